#pragma once

#include <string>
#include <vector>

namespace hopon {

enum class Severity { warning, error };

struct Finding {
    Severity severity = Severity::error;
    std::string location;
    std::string message;

    friend bool operator==(const Finding&, const Finding&) = default;
};

struct ValidationReport {
    std::vector<Finding> findings;

    [[nodiscard]] bool has_errors() const {
        for (const auto& f : findings)
            if (f.severity == Severity::error) return true;
        return false;
    }
    [[nodiscard]] bool empty() const { return findings.empty(); }

    void error(std::string location, std::string message) {
        findings.push_back({Severity::error, std::move(location), std::move(message)});
    }
    void warning(std::string location, std::string message) {
        findings.push_back({Severity::warning, std::move(location), std::move(message)});
    }
};

inline const char* to_string(Severity s) { return s == Severity::error ? "error" : "warning"; }

}  // namespace hopon
