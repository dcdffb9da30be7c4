#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "hopon/cm_ids.hpp"
#include "hopon/ids.hpp"
#include "hopon/infra.hpp"
#include "hopon/json_io.hpp"
#include "hopon/slice_model.hpp"

namespace hopon {

/// Where a VN router runs: at one NN, or as the cluster/domain-level router.
struct Placement {
    enum class Kind { nn, cluster, domain };
    Kind kind = Kind::nn;
    std::int64_t id = 0;

    friend auto operator<=>(const Placement&, const Placement&) = default;
};

struct TunnelEntry {
    VnNodeId egress;
    QosSpec qos;

    friend bool operator==(const TunnelEntry&, const TunnelEntry&) = default;
};

struct OpenTunnelEntry {
    Direction direction = Direction::dl;
    /// DL: destination access NN. Unused for UL.
    NnId destination_nn;
    /// DL: ingress VN node. UL: egress VN node.
    VnNodeId vn_node;
    QosSpec qos;

    friend bool operator==(const OpenTunnelEntry&, const OpenTunnelEntry&) = default;
};

/// Destination VN node -> next tunnel. A wildcard stands for "every
/// destination uses this tunnel".
struct RoutingTable {
    std::map<VnNodeId, TunnelId> entries;
    std::optional<TunnelId> wildcard;

    [[nodiscard]] bool empty() const { return entries.empty() && !wildcard; }
    [[nodiscard]] std::optional<TunnelId> lookup(VnNodeId destination) const;

    friend bool operator==(const RoutingTable&, const RoutingTable&) = default;
};

struct RouterConfig {
    RouterId id;
    VnId vn;
    Placement placement;
    /// NN whose cloud hosts the router's data plane.
    NnId host_nn;
    std::vector<VnNodeId> served_vn_nodes;
    std::map<TunnelId, TunnelEntry> tunnel_table;
    std::map<TunnelId, OpenTunnelEntry> open_tunnel_table;
    RoutingTable routing_table;
    CmId cm;

    [[nodiscard]] bool serves(VnNodeId node) const;

    friend bool operator==(const RouterConfig&, const RouterConfig&) = default;
};

enum class MappingFormat { ip_like, source_routing, destination_based, dedicated };
enum class BudgetSplit { equal, delay_proportional };

struct LinkBudget {
    LinkId link;
    NnId from;
    NnId to;
    double reserved_bps = 0.0;
    double latency_budget_s = 0.0;

    friend bool operator==(const LinkBudget&, const LinkBudget&) = default;
};

struct PathMapping {
    std::vector<NnId> nodes;
    double rate_bps = 0.0;
    std::vector<LinkBudget> links;

    friend bool operator==(const PathMapping&, const PathMapping&) = default;
};

/// Physical realization of one logical tunnel (or open tunnel). Paths run
/// from the ingress NN to the egress NN; a bidirectional tunnel uses each
/// path reversed for the return direction.
struct TunnelMapping {
    VnId vn;
    TunnelId tunnel;
    bool open = false;
    bool bidirectional = false;
    MappingFormat format = MappingFormat::ip_like;
    VnNodeId ingress_node;
    VnNodeId egress_node;
    NnId ingress_nn;
    NnId egress_nn;
    std::vector<PathMapping> paths;
    std::optional<std::string> resource_id;

    friend bool operator==(const TunnelMapping&, const TunnelMapping&) = default;
};

struct MappingPolicy {
    MappingFormat default_format = MappingFormat::ip_like;
    std::map<std::pair<VnId, TunnelId>, MappingFormat> overrides;
    std::size_t k = 1;
    BudgetSplit budget_split = BudgetSplit::equal;
    /// Reserved rate = declared rate * redundancy_factor / overbooking_factor.
    double overbooking_factor = 1.0;
    double redundancy_factor = 1.0;

    [[nodiscard]] MappingFormat format_for(VnId vn, TunnelId tunnel) const;
    [[nodiscard]] double reserved_rate(double declared_bps) const {
        return declared_bps * redundancy_factor / overbooking_factor;
    }
};

struct LinkBottleneck {
    LinkId link;
    NnId from;
    NnId to;
    double demanded_bps = 0.0;
    double available_bps = 0.0;
};

struct AlBottleneck {
    NnId nn;
    Direction direction = Direction::dl;
    double demanded_bps = 0.0;
    double available_bps = 0.0;
};

struct AdmissionDecision {
    bool admitted = true;
    std::optional<LinkBottleneck> bottleneck;
    std::optional<AlBottleneck> al_bottleneck;
};

struct ForwardingRule {
    NnId next_nn;
    double rate_bps = 0.0;
    std::vector<TunnelId> tunnels;

    friend bool operator==(const ForwardingRule&, const ForwardingRule&) = default;
};

struct AlConfig {
    NnId nn;
    AlPolicy policy;
    DeviceCos device_cos;

    friend bool operator==(const AlConfig&, const AlConfig&) = default;
};

/// Integrated rate requirement handed to the SDRA-Op instance of a RAN cluster.
struct ClusterRateTarget {
    double dl_rate_bps = 0.0;
    double ul_rate_bps = 0.0;
    std::vector<TunnelId> scheduler_managed;

    friend bool operator==(const ClusterRateTarget&, const ClusterRateTarget&) = default;
};

using ForwardingKey = std::pair<VnId, NnId>;

struct DeployedSlice {
    VnDescription vn;
    std::map<RouterId, RouterConfig> routers;
    std::map<TunnelId, TunnelMapping> mappings;
    std::map<TunnelId, TunnelMapping> open_mappings;
    std::map<NnId, std::map<ForwardingKey, ForwardingRule>> nn_forwarding_rules;
    std::map<NnId, AlConfig> al_configs;
    std::map<ClusterId, ClusterRateTarget> sdra_op_config;

    [[nodiscard]] const RouterConfig* router_serving(VnNodeId node) const;
    [[nodiscard]] const RouterConfig* router_at(Placement placement) const;
    [[nodiscard]] std::vector<const TunnelMapping*> all_mappings() const;

    friend bool operator==(const DeployedSlice&, const DeployedSlice&) = default;
};

/// One reservation on one direction of one link.
struct Reservation {
    LinkId link;
    NnId from;
    NnId to;
    double bps = 0.0;
};

/// Reservations a mapping puts on the network, both directions for
/// bidirectional tunnels.
std::vector<Reservation> reservations_of(const TunnelMapping& mapping);

using ReservationTable = std::map<std::tuple<LinkId, NnId, NnId>, double>;
ReservationTable reserved_by(std::span<const DeployedSlice> deployed);

std::vector<RouterConfig> derive_router_configs(const VnDescription& vn, const Infrastructure& infra);

/// Per-link share of a latency budget; the last link absorbs rounding so the
/// shares sum to the budget.
std::vector<double> allocate_latency_budget(double budget_s, std::span<const double> link_delays_s, BudgetSplit split);

/// `existing` holds reservations already made by deployed slices; it is used
/// to check residual capacity for dedicated mappings.
TunnelMapping map_tunnel(const VnDescription& vn, const Tunnel& tunnel, const Infrastructure& infra,
                         const MappingPolicy& policy, const ReservationTable& existing = {});

TunnelMapping map_open_tunnel(const VnDescription& vn, const OpenTunnel& open, const Infrastructure& infra,
                              const MappingPolicy& policy);

AdmissionDecision admit_slice(const VnDescription& vn, std::span<const TunnelMapping> mappings,
                              const Infrastructure& infra, std::span<const DeployedSlice> already_deployed);

/// Full pipeline: routers, mappings, budgets, admission. Errors carry the
/// stage that failed; nothing is returned unless the slice is admitted.
DeployedSlice compose_slice(const VnDescription& vn, const Infrastructure& infra, const MappingPolicy& policy,
                            std::span<const DeployedSlice> deployed);

Json to_json(const RouterConfig& router);
Json to_json(const TunnelMapping& mapping);
Json to_json(const DeployedSlice& slice);
Json association_json(const DeployedSlice& slice);
Json nn_config_json(const DeployedSlice& slice, NnId nn);
Json sdra_op_json(const DeployedSlice& slice);

/// Canonical documents making up a deployed slice, keyed by relative path.
std::map<std::string, std::string> render_slice_documents(const DeployedSlice& slice);

/// Graphviz view of the logical VN: VN nodes, tunnels and open tunnels.
std::string export_dot(const VnDescription& vn);

const char* to_string(MappingFormat format);
const char* to_string(BudgetSplit split);
std::optional<MappingFormat> parse_mapping_format(std::string_view text);
std::optional<BudgetSplit> parse_budget_split(std::string_view text);
std::string to_string(const Placement& placement);

}  // namespace hopon
