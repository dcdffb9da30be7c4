#include "hopon/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hopon/errors.hpp"

namespace hopon {

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::validate: return "validate";
        case Stage::derive_routers: return "derive_routers";
        case Stage::map_tunnels: return "map_tunnels";
        case Stage::latency_budget: return "latency_budget";
        case Stage::admission: return "admission";
    }
    return "unknown";
}

Json parse_document(std::string_view text) {
    try {
        return Json::parse(text.begin(), text.end(), nullptr, true, true);
    } catch (const Json::parse_error& e) {
        std::size_t line = 1;
        std::size_t column = 1;
        const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        std::string what = e.what();
        // nlohmann prefixes its own location; keep only the reason.
        if (auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
        throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(column), what);
    }
}

Json load_document_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, "cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_document(buf.str());
}

namespace {

void append_escaped(std::string& out, const std::string& s) {
    // Reuse nlohmann's escaping for strings.
    out += Json(s).dump();
}

void append_number(std::string& out, const Json& v) {
    if (v.is_number_integer()) {
        out += v.dump();
        return;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
        out += "null";
        return;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", d == 0.0 ? 0.0 : d);
    out += buf;
}

bool is_scalar(const Json& v) { return !v.is_object() && !v.is_array(); }

void emit(std::string& out, const Json& v, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    if (v.is_object()) {
        if (v.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (!first) out += ",\n";
            first = false;
            out += inner;
            append_escaped(out, it.key());
            out += ": ";
            emit(out, it.value(), indent + 1);
        }
        out += "\n" + pad + "}";
    } else if (v.is_array()) {
        if (v.empty()) {
            out += "[]";
            return;
        }
        bool scalars = true;
        for (const auto& e : v) scalars = scalars && is_scalar(e);
        if (scalars) {
            out += "[";
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) out += ", ";
                emit(out, v[i], indent + 1);
            }
            out += "]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ",\n";
            out += inner;
            emit(out, v[i], indent + 1);
        }
        out += "\n" + pad + "]";
    } else if (v.is_string()) {
        append_escaped(out, v.get<std::string>());
    } else if (v.is_number()) {
        append_number(out, v);
    } else {
        out += v.dump();
    }
}

}  // namespace

std::string dump_canonical(const Json& value) {
    std::string out;
    emit(out, value, 0);
    out += "\n";
    return out;
}

DocReader::DocReader(const Json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ParseError(path_.empty() ? "/" : path_, "expected an object");
}

std::string DocReader::child(std::string_view key) const { return path_ + "/" + std::string(key); }

bool DocReader::has(std::string_view key) const { return object_.contains(std::string(key)); }

const Json& DocReader::require(std::string_view key) {
    const Json* v = find(key);
    if (v == nullptr) throw ParseError(child(key), "missing required field");
    return *v;
}

const Json* DocReader::find(std::string_view key) {
    used_.emplace(key);
    auto it = object_.find(std::string(key));
    if (it == object_.end() || it->is_null()) return nullptr;
    return &*it;
}

std::int64_t DocReader::integer(std::string_view key) {
    const Json& v = require(key);
    if (!v.is_number_integer()) throw ParseError(child(key), "expected an integer");
    return v.get<std::int64_t>();
}

std::optional<std::int64_t> DocReader::opt_integer(std::string_view key) {
    if (find(key) == nullptr) return std::nullopt;
    return integer(key);
}

double DocReader::number(std::string_view key) {
    const Json& v = require(key);
    if (!v.is_number()) throw ParseError(child(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(child(key), "number must be finite");
    return d;
}

std::optional<double> DocReader::opt_number(std::string_view key) {
    if (find(key) == nullptr) return std::nullopt;
    return number(key);
}

double DocReader::number_or(std::string_view key, double fallback) {
    return opt_number(key).value_or(fallback);
}

bool DocReader::boolean(std::string_view key) {
    const Json& v = require(key);
    if (!v.is_boolean()) throw ParseError(child(key), "expected true or false");
    return v.get<bool>();
}

bool DocReader::boolean_or(std::string_view key, bool fallback) {
    if (find(key) == nullptr) return fallback;
    return boolean(key);
}

std::string DocReader::string(std::string_view key) {
    const Json& v = require(key);
    if (!v.is_string()) throw ParseError(child(key), "expected a string");
    return v.get<std::string>();
}

std::string DocReader::string_or(std::string_view key, std::string fallback) {
    if (find(key) == nullptr) return fallback;
    return string(key);
}

const Json& DocReader::array(std::string_view key) {
    const Json& v = require(key);
    if (!v.is_array()) throw ParseError(child(key), "expected an array");
    return v;
}

const Json* DocReader::opt_array(std::string_view key) {
    if (find(key) == nullptr) return nullptr;
    return &array(key);
}

void DocReader::finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
        if (!used_.contains(it.key())) throw ParseError(child(it.key()), "unknown key");
    }
}

}  // namespace hopon
