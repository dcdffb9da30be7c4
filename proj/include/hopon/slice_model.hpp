#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hopon/ids.hpp"
#include "hopon/infra.hpp"
#include "hopon/json_io.hpp"
#include "hopon/validation.hpp"

namespace hopon {

struct QosSpec {
    /// Zero means scheduler-managed (only allowed on open tunnels).
    double rate_bps = 0.0;
    std::optional<double> latency_budget_s;
    std::optional<int> priority;

    friend bool operator==(const QosSpec&, const QosSpec&) = default;
};

/// Cluster or domain in which a VN node is the anchor point of the VN.
struct AnchorScope {
    enum class Level { cluster, domain };
    Level level = Level::cluster;
    std::int64_t id = 0;

    friend auto operator<=>(const AnchorScope&, const AnchorScope&) = default;
};

struct VnNode {
    VnNodeId id;
    NnId nn;
    std::optional<AnchorScope> anchor;

    friend bool operator==(const VnNode&, const VnNode&) = default;
};

/// Logical connection between two VN nodes. A bidirectional tunnel carries
/// traffic egress->ingress under the same id.
struct Tunnel {
    TunnelId id;
    VnNodeId ingress;
    VnNodeId egress;
    QosSpec qos;
    bool bidirectional = false;

    friend bool operator==(const Tunnel&, const Tunnel&) = default;
};

enum class Direction { dl, ul };

/// Logical connection between a VN node and an access node that hosts no
/// VN-specific function. DL: vn_node -> access_nn. UL: access_nn -> vn_node.
struct OpenTunnel {
    TunnelId id;
    Direction direction = Direction::dl;
    VnNodeId vn_node;
    NnId access_nn;
    QosSpec qos;

    friend bool operator==(const OpenTunnel&, const OpenTunnel&) = default;
};

struct DeviceCos {
    double rate_bps = 0.0;
    double latency_s = 0.0;

    friend bool operator==(const DeviceCos&, const DeviceCos&) = default;
};

/// Access-link treatment of the VN at one access node.
struct AlPolicy {
    NnId nn;
    bool pre_assigned = false;
    std::optional<std::string> resource_id;
    bool shared = false;
    QosSpec dl_qos;
    QosSpec ul_qos;

    friend bool operator==(const AlPolicy&, const AlPolicy&) = default;
};

struct VnDescription {
    VnId id;
    std::map<VnNodeId, VnNode> nodes;
    std::map<TunnelId, Tunnel> tunnels;
    std::map<TunnelId, OpenTunnel> open_tunnels;
    DeviceCos device_cos;
    std::map<NnId, AlPolicy> al_policies;
    bool ac_required = false;

    [[nodiscard]] const VnNode* find_node(VnNodeId node) const;
    [[nodiscard]] const AlPolicy* find_al_policy(NnId nn) const;
    [[nodiscard]] std::vector<const OpenTunnel*> open_tunnels_in(Direction dir) const;

    friend bool operator==(const VnDescription&, const VnDescription&) = default;
};

/// Reads one entry of the `slices` section. Throws ParseError with a field
/// path on malformed, duplicate or dangling content.
VnDescription parse_vn_description(const Json& doc, const std::string& path = "/slices/0");

Json to_json(const VnDescription& vn);
Json to_json(const QosSpec& qos);

/// Cross-checks the VN against the infrastructure. Empty findings mean the
/// VN can be handed to the composer.
ValidationReport validate_vn(const VnDescription& vn, const Infrastructure& infra);

const char* to_string(Direction dir);

}  // namespace hopon
