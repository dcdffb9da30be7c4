#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hopon/cm.hpp"
#include "hopon/ids.hpp"
#include "hopon/slice_model.hpp"
#include "hopon/sonac_com.hpp"

namespace hopon {

// ---------------------------------------------------------------------------
// Packets and header states

struct RawHeader {
    std::string destination;
    friend bool operator==(const RawHeader&, const RawHeader&) = default;
};
struct VnRoutedHeader {
    VnNodeId node;
    friend bool operator==(const VnRoutedHeader&, const VnRoutedHeader&) = default;
};
struct IpLikeHeader {
    NnId nn;
    QosSpec qos;
    friend bool operator==(const IpLikeHeader&, const IpLikeHeader&) = default;
};
struct SourceRoutedHeader {
    std::vector<NnId> path;
    QosSpec qos;
    std::size_t cursor = 0;
    friend bool operator==(const SourceRoutedHeader&, const SourceRoutedHeader&) = default;
};
struct LabeledHeader {
    VnId vn;
    friend bool operator==(const LabeledHeader&, const LabeledHeader&) = default;
};
struct DedicatedHeader {
    VnId vn;
    std::string resource_id;
    friend bool operator==(const DedicatedHeader&, const DedicatedHeader&) = default;
};

using HeaderState =
    std::variant<RawHeader, VnRoutedHeader, IpLikeHeader, SourceRoutedHeader, LabeledHeader, DedicatedHeader>;

const char* header_name(const HeaderState& header);

struct Packet {
    PacketId id = 0;
    VnId vn;
    std::string source;
    std::string destination;
    double size_bits = 0.0;
    std::optional<int> priority;
    int ttl = 0;
    HeaderState header;
    double created_at = 0.0;
    std::optional<double> delivered_at;
};

/// Initial TTL: a backstop well above the longest loop-free VN route.
int initial_ttl(const VnDescription& vn);

/// Wraps a vn_routed packet for transport over `mapping`. The header's VN
/// node selects the direction: the mapping's egress, or its ingress when the
/// tunnel is bidirectional. `path_index` picks among source-routed paths.
Packet process_header(const TunnelMapping& mapping, Packet packet, std::size_t path_index = 0);

/// Restores vn_routed(toward) at the far end of the tunnel; `toward` must be
/// an end the header could have been addressed to.
Packet decapsulate(const TunnelMapping& mapping, Packet packet, VnNodeId toward);

/// Open-tunnel transport: DL carries the destination access NN address.
Packet process_open_header(const TunnelMapping& open_mapping, Packet packet);
Packet decapsulate_open(const TunnelMapping& open_mapping, Packet packet);

/// NN sequence travelled by `mapping` toward `toward`, for `path_index`.
std::vector<NnId> oriented_path(const TunnelMapping& mapping, VnNodeId toward, std::size_t path_index = 0);

/// Per-path rates for a source-routed flow, proportional to each path's
/// residual capacity. Throws when the residuals cannot carry the flow.
std::vector<double> split_rate(const TunnelMapping& mapping, double flow_rate_bps,
                               std::span<const double> path_residual_bps);

// ---------------------------------------------------------------------------
// SDT-Op: VN routers

enum class OpenTunnelMode { multicast, multipath };
enum class DropReason {
    ttl_expired,
    unresolved,
    no_route,
    no_open_tunnel,
    queue_overflow,
    not_attached,
    stale,
    policing,
    collision,
    not_admitted,
    unregistered,
};

const char* to_string(OpenTunnelMode mode);
std::optional<OpenTunnelMode> parse_open_tunnel_mode(std::string_view text);
const char* to_string(DropReason reason);

struct DeliverLocal {
    friend bool operator==(const DeliverLocal&, const DeliverLocal&) = default;
};
struct Forward {
    TunnelId tunnel;
    VnNodeId egress;
    friend bool operator==(const Forward&, const Forward&) = default;
};
struct OpenTunnelSet {
    std::vector<TunnelId> tunnels;
    OpenTunnelMode mode = OpenTunnelMode::multicast;
    friend bool operator==(const OpenTunnelSet&, const OpenTunnelSet&) = default;
};
struct Drop {
    DropReason reason = DropReason::unresolved;
    friend bool operator==(const Drop&, const Drop&) = default;
};

using ForwardingDecision = std::variant<DeliverLocal, Forward, OpenTunnelSet, Drop>;

/// (vn, endpoint name) -> anchor VN node, with the location the router last
/// learned. Entries without an expiry are fixed or kept fresh by pushes.
class EndpointRoutingTable {
public:
    struct Entry {
        VnNodeId anchor;
        LocationInfo location;
        std::optional<double> expires_at;
    };

    [[nodiscard]] const Entry* lookup(VnId vn, const std::string& name, double now);
    void install(VnId vn, const std::string& name, Entry entry);
    void erase(VnId vn, const std::string& name);
    [[nodiscard]] std::size_t size() const { return entries_.size(); }

private:
    std::map<std::pair<VnId, std::string>, Entry> entries_;
};

/// Mutable per-router runtime state.
struct RouterState {
    EndpointRoutingTable table;
    std::uint64_t round_robin = 0;
};

struct RouteEnv {
    const DeployedSlice* slice = nullptr;
    const CmTree* cm = nullptr;
    Granularity granularity = Granularity::cluster;
    ResolutionMode resolution_mode = ResolutionMode::requesting;
    double cache_ttl_s = 5.0;
    OpenTunnelMode open_mode = OpenTunnelMode::multicast;
    double now = 0.0;
};

struct RouteOutcome {
    ForwardingDecision decision;
    std::optional<VnNodeId> anchor;
    /// Where the destination was last known to be, for local delivery.
    std::optional<LocationInfo> location;
    int resolution_messages = 0;
    int resolution_hops = 0;
    /// Set when a pushing-mode router should subscribe for this device.
    bool subscribe = false;
};

/// Anchor VN node for an endpoint located at `loc`, as seen at granularity
/// `g`. Prefers, in order: the VN node hosted at the NN (access granularity or
/// core attachment), the ingress of DL open tunnels into the cluster, the
/// cluster anchor, the domain anchor.
std::optional<VnNodeId> anchor_for_location(const VnDescription& vn, const Infrastructure& infra,
                                            const LocationInfo& loc, Granularity g);

/// One VN router step for `packet` (TTL is decremented here).
RouteOutcome route_packet(const RouterConfig& router, RouterState& state, Packet& packet, const RouteEnv& env);

/// Open tunnels of `cluster_router` whose destination is among `candidates`
/// (and, when given, whose ingress VN node `ingress_router` serves).
ForwardingDecision select_open_tunnels(const RouterConfig& cluster_router, std::span<const NnId> candidates,
                                       OpenTunnelMode mode, std::uint64_t& round_robin,
                                       const RouterConfig* ingress_router = nullptr);

/// Same, with candidates fetched from the cluster router's CM.
ForwardingDecision select_open_tunnels(const RouterConfig& cluster_router, const std::string& device,
                                       const CmTree& cm, OpenTunnelMode mode, std::uint64_t& round_robin);

// ---------------------------------------------------------------------------
// SDRA-Op: access-link scheduling

struct Grant {
    std::string device;
    double bits = 0.0;
};

struct SlotResult {
    std::vector<Grant> grants;
    /// (device, handle) of queued items whose last bit was granted this slot.
    std::vector<std::pair<std::string, std::uint64_t>> completed;
    double capacity_bits = 0.0;
};

/// Slotted scheduler for one direction of one access NN. Pre-assigned VN
/// partitions are served first by bit-level deficit round robin weighted by
/// device CoS rate; what remains is a shared pool split over VNs (weighted by
/// service rate) and then devices (weighted by CoS rate). Each device is
/// capped at its CoS rate per slot.
class AccessLinkScheduler {
public:
    AccessLinkScheduler(double capacity_bps, double slot_s);

    void set_vn(VnId vn, double partition_bps, double service_weight);
    void add_device(const std::string& name, VnId vn, double cos_rate_bps);
    void set_eligible(const std::string& name, bool eligible);
    [[nodiscard]] bool has_device(const std::string& name) const;

    void enqueue(const std::string& name, std::uint64_t handle, double bits);
    /// Removes queued items for which `drop` returns true; returns their handles.
    template <class Pred>
    std::vector<std::uint64_t> remove_if(const std::string& name, Pred drop);
    std::vector<std::uint64_t> flush(const std::string& name);

    SlotResult schedule_slot();

    [[nodiscard]] double backlog_bits(const std::string& name) const;
    [[nodiscard]] std::size_t queued_items(const std::string& name) const;
    [[nodiscard]] bool has_eligible_backlog() const;
    [[nodiscard]] bool has_backlog() const;
    [[nodiscard]] std::vector<std::string> device_names() const;
    [[nodiscard]] bool eligible(const std::string& name) const;
    [[nodiscard]] double slot_s() const { return slot_s_; }
    [[nodiscard]] double capacity_bps() const { return capacity_bps_; }

private:
    struct Item {
        std::uint64_t handle;
        double remaining;
    };
    struct DeviceQueue {
        VnId vn;
        double cos_rate_bps = 0.0;
        bool eligible = true;
        std::deque<Item> items;
        double backlog = 0.0;
    };
    struct VnShare {
        double partition_bps = 0.0;
        double weight = 1.0;
    };

    void grant(const std::string& name, DeviceQueue& q, double bits, SlotResult& out);

    double capacity_bps_;
    double slot_s_;
    std::map<std::string, DeviceQueue> devices_;
    std::map<VnId, VnShare> vns_;
    std::uint64_t rotation_ = 0;
};

/// Runs one slot of `scheduler`.
SlotResult schedule_access_link(AccessLinkScheduler& scheduler);

/// Bit-level DRR over flows with the given weights and per-flow caps.
/// Returns per-flow grants; the sum never exceeds `budget`. `start` rotates
/// the visiting order.
std::vector<double> drr_allocate(double budget, std::span<const double> weights, std::span<const double> caps,
                                 std::size_t start = 0);

template <class Pred>
std::vector<std::uint64_t> AccessLinkScheduler::remove_if(const std::string& name, Pred drop) {
    std::vector<std::uint64_t> out;
    auto it = devices_.find(name);
    if (it == devices_.end()) return out;
    auto& q = it->second;
    std::deque<Item> kept;
    for (const auto& item : q.items) {
        if (drop(item.handle)) {
            out.push_back(item.handle);
            q.backlog -= item.remaining;
        } else {
            kept.push_back(item);
        }
    }
    q.items = std::move(kept);
    if (q.items.empty()) q.backlog = 0.0;
    return out;
}

}  // namespace hopon
