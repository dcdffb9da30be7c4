#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hopon {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input document. `where()` is either "line L, column C" for
/// syntax errors or a JSON pointer such as "/slices/0/tunnels/2/ingress".
class ParseError : public Error {
public:
    ParseError(std::string where, const std::string& what)
        : Error(where + ": " + what), where_(std::move(where)) {}

    [[nodiscard]] const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

class NoPathError : public Error {
public:
    using Error::Error;
};

/// Stage of the slice composition pipeline that produced an error.
enum class Stage { validate, derive_routers, map_tunnels, latency_budget, admission };

std::string_view to_string(Stage stage);

class CompositionError : public Error {
public:
    CompositionError(Stage stage, const std::string& what)
        : Error(std::string(to_string(stage)) + ": " + what), stage_(stage) {}

    [[nodiscard]] Stage stage() const noexcept { return stage_; }

private:
    Stage stage_;
};

class CmError : public Error {
public:
    using Error::Error;
};

/// Raised by resolve() when no CM holds a record for the device name.
class NotFoundError : public CmError {
public:
    using CmError::CmError;
};

class EndpointError : public Error {
public:
    using Error::Error;
};

class EngineError : public Error {
public:
    using Error::Error;
};

}  // namespace hopon
