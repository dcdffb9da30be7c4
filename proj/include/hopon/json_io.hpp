#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

#include "hopon/ids.hpp"

namespace hopon {

using Json = nlohmann::json;

template <class Tag>
void to_json(Json& j, const Id<Tag>& id) {
    j = id.value;
}

/// Parses a scenario-style document. Comments are allowed. Syntax errors are
/// reported as ParseError with a line/column location.
Json parse_document(std::string_view text);

/// Reads a whole file and parses it with parse_document.
Json load_document_file(const std::string& path);

/// Serializes with sorted keys, two-space indentation, floats printed with
/// exactly nine decimals, arrays of scalars kept on one line, and a trailing
/// newline. Identical values always produce identical bytes.
std::string dump_canonical(const Json& value);

/// Strict reader over one JSON object. Every accessor records the key as
/// consumed; finish() rejects any key that was never asked for.
class DocReader {
public:
    DocReader(const Json& object, std::string path);

    [[nodiscard]] const std::string& path() const noexcept { return path_; }
    [[nodiscard]] std::string child(std::string_view key) const;
    [[nodiscard]] bool has(std::string_view key) const;

    const Json& require(std::string_view key);
    const Json* find(std::string_view key);

    std::int64_t integer(std::string_view key);
    std::optional<std::int64_t> opt_integer(std::string_view key);
    double number(std::string_view key);
    std::optional<double> opt_number(std::string_view key);
    double number_or(std::string_view key, double fallback);
    bool boolean(std::string_view key);
    bool boolean_or(std::string_view key, bool fallback);
    std::string string(std::string_view key);
    std::string string_or(std::string_view key, std::string fallback);
    const Json& array(std::string_view key);
    const Json* opt_array(std::string_view key);

    template <class IdT>
    IdT id(std::string_view key) {
        return IdT{integer(key)};
    }

    void finish() const;

private:
    const Json& object_;
    std::string path_;
    std::set<std::string, std::less<>> used_;
};

}  // namespace hopon
