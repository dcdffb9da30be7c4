#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace hopon {

enum class CmLevel { cluster, domain, global };

/// Identifies one CM entity. `scope` is the cluster or domain id; 0 for global.
struct CmId {
    CmLevel level = CmLevel::global;
    std::int64_t scope = 0;

    friend auto operator<=>(const CmId&, const CmId&) = default;
};

inline std::string to_string(const CmId& id) {
    switch (id.level) {
        case CmLevel::cluster: return "cluster-" + std::to_string(id.scope);
        case CmLevel::domain: return "domain-" + std::to_string(id.scope);
        case CmLevel::global: return "global";
    }
    return "?";
}

}  // namespace hopon
