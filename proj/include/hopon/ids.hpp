#pragma once

#include <compare>
#include <cstdint>
#include <ostream>
#include <string>

namespace hopon {

/// Integer identifier tagged with the namespace it lives in, so a tunnel id
/// cannot be passed where a network-node id is expected.
template <class Tag>
struct Id {
    std::int64_t value = 0;

    constexpr Id() = default;
    constexpr explicit Id(std::int64_t v) : value(v) {}

    friend constexpr auto operator<=>(const Id&, const Id&) = default;
    friend std::ostream& operator<<(std::ostream& os, const Id& id) { return os << id.value; }
};

template <class Tag>
std::string to_string(Id<Tag> id) {
    return std::to_string(id.value);
}

using NnId = Id<struct NnTag>;
using LinkId = Id<struct LinkTag>;
using ClusterId = Id<struct ClusterTag>;
using DomainId = Id<struct DomainTag>;
using VnId = Id<struct VnTag>;
using VnNodeId = Id<struct VnNodeTag>;
using TunnelId = Id<struct TunnelTag>;
using RouterId = Id<struct RouterTag>;

using PacketId = std::uint64_t;

}  // namespace hopon
