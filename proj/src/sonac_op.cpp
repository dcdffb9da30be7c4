#include "hopon/sonac_op.hpp"

#include <algorithm>
#include <numeric>

#include "hopon/errors.hpp"
#include "hopon/shares.hpp"

namespace hopon {

namespace {

constexpr double kBitEpsilon = 1e-6;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

const char* header_name(const HeaderState& header) {
    return std::visit(Overloaded{[](const RawHeader&) { return "raw"; },
                                 [](const VnRoutedHeader&) { return "vn_routed"; },
                                 [](const IpLikeHeader&) { return "ip_like"; },
                                 [](const SourceRoutedHeader&) { return "source_routed"; },
                                 [](const LabeledHeader&) { return "labeled"; },
                                 [](const DedicatedHeader&) { return "dedicated"; }},
                      header);
}

int initial_ttl(const VnDescription& vn) { return 2 * static_cast<int>(vn.nodes.size()) + 4; }

const char* to_string(OpenTunnelMode mode) { return mode == OpenTunnelMode::multicast ? "multicast" : "multipath"; }

std::optional<OpenTunnelMode> parse_open_tunnel_mode(std::string_view text) {
    if (text == "multicast") return OpenTunnelMode::multicast;
    if (text == "multipath") return OpenTunnelMode::multipath;
    return std::nullopt;
}

const char* to_string(DropReason reason) {
    switch (reason) {
        case DropReason::ttl_expired: return "ttl_expired";
        case DropReason::unresolved: return "unresolved";
        case DropReason::no_route: return "no_route";
        case DropReason::no_open_tunnel: return "no_open_tunnel";
        case DropReason::queue_overflow: return "queue_overflow";
        case DropReason::not_attached: return "not_attached";
        case DropReason::stale: return "stale";
        case DropReason::policing: return "policing";
        case DropReason::collision: return "collision";
        case DropReason::not_admitted: return "not_admitted";
        case DropReason::unregistered: return "unregistered";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Header processing

namespace {

bool reversed_toward(const TunnelMapping& mapping, VnNodeId toward) {
    if (toward == mapping.egress_node) return false;
    if (mapping.bidirectional && toward == mapping.ingress_node) return true;
    throw Error("tunnel " + to_string(mapping.tunnel) + " does not lead to VN node " + to_string(toward));
}

QosSpec path_qos(const PathMapping& path) {
    QosSpec qos;
    qos.rate_bps = path.rate_bps;
    if (!path.links.empty()) {
        double budget = 0.0;
        for (const auto& l : path.links) budget += l.latency_budget_s;
        qos.latency_budget_s = budget;
    }
    return qos;
}

}  // namespace

std::vector<NnId> oriented_path(const TunnelMapping& mapping, VnNodeId toward, std::size_t path_index) {
    if (path_index >= mapping.paths.size())
        throw Error("tunnel " + to_string(mapping.tunnel) + " has no path " + std::to_string(path_index));
    auto nodes = mapping.paths[path_index].nodes;
    if (reversed_toward(mapping, toward)) std::reverse(nodes.begin(), nodes.end());
    return nodes;
}

Packet process_header(const TunnelMapping& mapping, Packet packet, std::size_t path_index) {
    if (mapping.open) throw Error("process_header called with open tunnel " + to_string(mapping.tunnel));
    const auto* routed = std::get_if<VnRoutedHeader>(&packet.header);
    if (routed == nullptr)
        throw Error(std::string("process_header expects a vn_routed packet, got ") + header_name(packet.header));
    const bool reversed = reversed_toward(mapping, routed->node);
    if (path_index >= mapping.paths.size())
        throw Error("tunnel " + to_string(mapping.tunnel) + " has no path " + std::to_string(path_index));
    const auto& path = mapping.paths[path_index];
    switch (mapping.format) {
        case MappingFormat::ip_like:
            packet.header = IpLikeHeader{reversed ? mapping.ingress_nn : mapping.egress_nn, path_qos(path)};
            break;
        case MappingFormat::source_routing: {
            auto nodes = path.nodes;
            if (reversed) std::reverse(nodes.begin(), nodes.end());
            packet.header = SourceRoutedHeader{std::move(nodes), path_qos(path), 0};
            break;
        }
        case MappingFormat::destination_based: packet.header = LabeledHeader{mapping.vn}; break;
        case MappingFormat::dedicated:
            packet.header = DedicatedHeader{mapping.vn, mapping.resource_id.value_or("")};
            break;
    }
    return packet;
}

Packet decapsulate(const TunnelMapping& mapping, Packet packet, VnNodeId toward) {
    const bool reversed = reversed_toward(mapping, toward);
    bool matches = false;
    switch (mapping.format) {
        case MappingFormat::ip_like: {
            const auto* h = std::get_if<IpLikeHeader>(&packet.header);
            matches = h != nullptr && h->nn == (reversed ? mapping.ingress_nn : mapping.egress_nn);
            break;
        }
        case MappingFormat::source_routing: matches = std::holds_alternative<SourceRoutedHeader>(packet.header); break;
        case MappingFormat::destination_based: {
            const auto* h = std::get_if<LabeledHeader>(&packet.header);
            matches = h != nullptr && h->vn == mapping.vn;
            break;
        }
        case MappingFormat::dedicated: {
            const auto* h = std::get_if<DedicatedHeader>(&packet.header);
            matches = h != nullptr && h->vn == mapping.vn;
            break;
        }
    }
    if (!matches)
        throw Error(std::string("format/mapping mismatch: ") + header_name(packet.header) + " header on " +
                    to_string(mapping.format) + " tunnel " + to_string(mapping.tunnel));
    packet.header = VnRoutedHeader{toward};
    return packet;
}

Packet process_open_header(const TunnelMapping& open_mapping, Packet packet) {
    if (!open_mapping.open) throw Error("tunnel " + to_string(open_mapping.tunnel) + " is not an open tunnel");
    packet.header = IpLikeHeader{open_mapping.egress_nn, path_qos(open_mapping.paths.front())};
    return packet;
}

Packet decapsulate_open(const TunnelMapping& open_mapping, Packet packet) {
    const auto* h = std::get_if<IpLikeHeader>(&packet.header);
    if (!open_mapping.open || h == nullptr || h->nn != open_mapping.egress_nn)
        throw Error("format/mapping mismatch on open tunnel " + to_string(open_mapping.tunnel));
    if (open_mapping.egress_node.value != 0)
        packet.header = VnRoutedHeader{open_mapping.egress_node};
    else
        packet.header = RawHeader{packet.destination};
    return packet;
}

std::vector<double> split_rate(const TunnelMapping& mapping, double flow_rate_bps,
                               std::span<const double> path_residual_bps) {
    if (mapping.paths.empty()) throw Error("tunnel " + to_string(mapping.tunnel) + " has no paths");
    if (path_residual_bps.size() != mapping.paths.size())
        throw Error("split_rate needs one residual per path of tunnel " + to_string(mapping.tunnel));
    if (mapping.paths.size() > 1 && mapping.format != MappingFormat::source_routing)
        throw Error("only source-routed tunnels split over several paths");
    const double total = std::accumulate(path_residual_bps.begin(), path_residual_bps.end(), 0.0);
    if (total < flow_rate_bps)
        throw Error("residual capacity " + std::to_string(total) + " bps cannot carry " +
                    std::to_string(flow_rate_bps) + " bps on tunnel " + to_string(mapping.tunnel));
    if (mapping.paths.size() == 1) return {flow_rate_bps};
    return proportional_shares(flow_rate_bps, path_residual_bps);
}

// ---------------------------------------------------------------------------
// VN routers

const EndpointRoutingTable::Entry* EndpointRoutingTable::lookup(VnId vn, const std::string& name, double now) {
    auto it = entries_.find({vn, name});
    if (it == entries_.end()) return nullptr;
    if (it->second.expires_at && *it->second.expires_at <= now) {
        entries_.erase(it);
        return nullptr;
    }
    return &it->second;
}

void EndpointRoutingTable::install(VnId vn, const std::string& name, Entry entry) {
    entries_[{vn, name}] = std::move(entry);
}

void EndpointRoutingTable::erase(VnId vn, const std::string& name) { entries_.erase({vn, name}); }

std::optional<VnNodeId> anchor_for_location(const VnDescription& vn, const Infrastructure& infra,
                                            const LocationInfo& loc, Granularity g) {
    auto hosted_at = [&](NnId nn) -> std::optional<VnNodeId> {
        for (const auto& [id, n] : vn.nodes)
            if (n.nn == nn) return id;
        return std::nullopt;
    };
    auto anchored_in = [&](AnchorScope scope) -> std::optional<VnNodeId> {
        for (const auto& [id, n] : vn.nodes)
            if (n.anchor == scope) return id;
        return std::nullopt;
    };

    if (loc.nn && (!loc.cluster || g == Granularity::access_node))
        if (auto h = hosted_at(*loc.nn)) return h;
    if (loc.cluster && g != Granularity::domain) {
        if (g == Granularity::access_node && loc.nn)
            for (const auto& [id, o] : vn.open_tunnels)
                if (o.direction == Direction::dl && o.access_nn == *loc.nn) return o.vn_node;
        for (const auto& [id, o] : vn.open_tunnels) {
            if (o.direction != Direction::dl) continue;
            const auto* node = infra.find_node(o.access_nn);
            if (node != nullptr && node->cluster == loc.cluster) return o.vn_node;
        }
        if (auto a = anchored_in({AnchorScope::Level::cluster, loc.cluster->value})) return a;
    }
    return anchored_in({AnchorScope::Level::domain, loc.domain.value});
}

namespace {

int hops_to_global(const CmId& cm) {
    switch (cm.level) {
        case CmLevel::cluster: return 2;
        case CmLevel::domain: return 1;
        case CmLevel::global: return 0;
    }
    return 0;
}

bool has_open_tunnels_from(const RouterConfig& cluster_router, const RouterConfig& ingress_router) {
    return std::any_of(cluster_router.open_tunnel_table.begin(), cluster_router.open_tunnel_table.end(),
                       [&](const auto& kv) {
                           return kv.second.direction == Direction::dl && ingress_router.serves(kv.second.vn_node);
                       });
}

}  // namespace

RouteOutcome route_packet(const RouterConfig& router, RouterState& state, Packet& packet, const RouteEnv& env) {
    RouteOutcome out{Drop{DropReason::unresolved}, std::nullopt, std::nullopt, 0, 0, false};
    if (--packet.ttl <= 0) {
        out.decision = Drop{DropReason::ttl_expired};
        return out;
    }
    const auto& vn = env.slice->vn;
    const auto& infra = env.cm->infrastructure();

    const auto* entry = state.table.lookup(packet.vn, packet.destination, env.now);
    if (entry == nullptr) {
        ResolveResult res;
        try {
            res = env.cm->resolve(router.cm, packet.destination, env.granularity);
        } catch (const NotFoundError&) {
            out.resolution_messages = 2 + 2 * hops_to_global(router.cm);
            out.resolution_hops = hops_to_global(router.cm);
            return out;
        }
        out.resolution_messages += 2 + 2 * res.hops;
        out.resolution_hops += res.hops;
        const auto anchor = anchor_for_location(vn, infra, res.location, env.granularity);
        if (!anchor) return out;
        EndpointRoutingTable::Entry fresh{*anchor, res.location, std::nullopt};
        if (env.resolution_mode == ResolutionMode::pushing)
            out.subscribe = true;
        else
            fresh.expires_at = env.now + env.cache_ttl_s;
        state.table.install(packet.vn, packet.destination, fresh);
        entry = state.table.lookup(packet.vn, packet.destination, env.now);
    }
    out.anchor = entry->anchor;

    if (!router.serves(entry->anchor)) {
        const auto tunnel = router.routing_table.lookup(entry->anchor);
        const auto te = tunnel ? router.tunnel_table.find(*tunnel) : router.tunnel_table.end();
        if (te == router.tunnel_table.end()) {
            out.decision = Drop{DropReason::no_route};
            return out;
        }
        out.decision = Forward{*tunnel, te->second.egress};
        return out;
    }

    LocationInfo location = entry->location;
    auto refine = [&] {
        // The cached answer is too coarse for delivery: ask for the access node.
        try {
            const auto res = env.cm->resolve(router.cm, packet.destination, Granularity::access_node);
            out.resolution_messages += 2 + 2 * res.hops;
            out.resolution_hops += res.hops;
            location = res.location;
            auto updated = *entry;
            updated.location = location;
            state.table.install(packet.vn, packet.destination, updated);
            return true;
        } catch (const NotFoundError&) {
            return false;
        }
    };

    if (location.cluster) {
        const auto* cluster_router = env.slice->router_at({Placement::Kind::cluster, location.cluster->value});
        if (cluster_router != nullptr && has_open_tunnels_from(*cluster_router, router)) {
            if (location.candidates.empty() && !refine()) return out;
            out.location = location;
            out.decision =
                select_open_tunnels(*cluster_router, location.candidates, env.open_mode, state.round_robin, &router);
            return out;
        }
        if (!location.nn && !refine()) return out;
    }
    out.location = location;
    out.decision = DeliverLocal{};
    return out;
}

ForwardingDecision select_open_tunnels(const RouterConfig& cluster_router, std::span<const NnId> candidates,
                                       OpenTunnelMode mode, std::uint64_t& round_robin,
                                       const RouterConfig* ingress_router) {
    std::vector<TunnelId> matches;
    for (const auto& [id, e] : cluster_router.open_tunnel_table) {
        if (e.direction != Direction::dl) continue;
        if (ingress_router != nullptr && !ingress_router->serves(e.vn_node)) continue;
        if (std::find(candidates.begin(), candidates.end(), e.destination_nn) == candidates.end()) continue;
        matches.push_back(id);
    }
    if (matches.empty()) return Drop{DropReason::no_open_tunnel};
    if (mode == OpenTunnelMode::multicast) return OpenTunnelSet{matches, mode};
    const TunnelId pick = matches[round_robin++ % matches.size()];
    return OpenTunnelSet{{pick}, mode};
}

ForwardingDecision select_open_tunnels(const RouterConfig& cluster_router, const std::string& device,
                                       const CmTree& cm, OpenTunnelMode mode, std::uint64_t& round_robin) {
    LocationInfo loc;
    try {
        loc = cm.resolve(cluster_router.cm, device, Granularity::access_node).location;
    } catch (const NotFoundError&) {
        return Drop{DropReason::unresolved};
    }
    std::vector<NnId> candidates = loc.candidates;
    if (candidates.empty() && loc.nn) candidates.push_back(*loc.nn);
    return select_open_tunnels(cluster_router, candidates, mode, round_robin);
}

// ---------------------------------------------------------------------------
// Access-link scheduling

std::vector<double> drr_allocate(double budget, std::span<const double> weights, std::span<const double> caps,
                                 std::size_t start) {
    const std::size_t n = weights.size();
    if (caps.size() != n) throw Error("drr_allocate: weights and caps differ in length");
    std::vector<double> grants(n, 0.0);
    std::vector<double> left(caps.begin(), caps.end());
    double remaining = std::max(0.0, budget);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = (start + i) % std::max<std::size_t>(n, 1);

    while (remaining > kBitEpsilon) {
        double weight_sum = 0.0;
        for (std::size_t i : order)
            if (left[i] > kBitEpsilon) weight_sum += weights[i] > 0 ? weights[i] : 1.0;
        if (weight_sum <= 0.0) break;
        const double round_budget = remaining;
        bool capped = false;
        for (std::size_t i : order) {
            if (left[i] <= kBitEpsilon || remaining <= 0.0) continue;
            const double quantum = round_budget * (weights[i] > 0 ? weights[i] : 1.0) / weight_sum;
            double g = std::min({quantum, left[i], remaining});
            if (left[i] - g <= kBitEpsilon) {
                g = std::min(left[i], remaining);
                capped = true;
            }
            grants[i] += g;
            left[i] -= g;
            remaining -= g;
        }
        if (!capped) break;
    }
    return grants;
}

AccessLinkScheduler::AccessLinkScheduler(double capacity_bps, double slot_s)
    : capacity_bps_(capacity_bps), slot_s_(slot_s) {
    if (!(capacity_bps > 0)) throw Error("access-link capacity must be positive");
    if (!(slot_s > 0)) throw Error("access-link slot length must be positive");
}

void AccessLinkScheduler::set_vn(VnId vn, double partition_bps, double service_weight) {
    vns_[vn] = VnShare{std::max(0.0, partition_bps), std::max(1.0, service_weight)};
}

void AccessLinkScheduler::add_device(const std::string& name, VnId vn, double cos_rate_bps) {
    auto& q = devices_[name];
    q.vn = vn;
    q.cos_rate_bps = cos_rate_bps;
    vns_.try_emplace(vn);
}

void AccessLinkScheduler::set_eligible(const std::string& name, bool eligible) {
    auto it = devices_.find(name);
    if (it == devices_.end()) throw Error("access link has no device " + name);
    it->second.eligible = eligible;
}

bool AccessLinkScheduler::has_device(const std::string& name) const { return devices_.count(name) != 0; }

void AccessLinkScheduler::enqueue(const std::string& name, std::uint64_t handle, double bits) {
    auto it = devices_.find(name);
    if (it == devices_.end()) throw Error("access link has no device " + name);
    it->second.items.push_back({handle, bits});
    it->second.backlog += bits;
}

std::vector<std::uint64_t> AccessLinkScheduler::flush(const std::string& name) {
    return remove_if(name, [](std::uint64_t) { return true; });
}

void AccessLinkScheduler::grant(const std::string& name, DeviceQueue& q, double bits, SlotResult& out) {
    out.grants.push_back({name, bits});
    q.backlog -= bits;
    while (!q.items.empty() && bits > 0.0) {
        auto& head = q.items.front();
        const double take = std::min(bits, head.remaining);
        head.remaining -= take;
        bits -= take;
        if (head.remaining <= kBitEpsilon) {
            out.completed.emplace_back(name, head.handle);
            q.items.pop_front();
        }
    }
    q.backlog = q.items.empty() ? 0.0 : std::max(0.0, q.backlog);
}

SlotResult AccessLinkScheduler::schedule_slot() {
    SlotResult out;
    out.capacity_bits = capacity_bps_ * slot_s_;
    double budget = out.capacity_bits;

    std::map<std::string, double> limit;
    for (const auto& [name, q] : devices_) {
        if (!q.eligible || q.backlog <= kBitEpsilon) continue;
        limit[name] = q.cos_rate_bps > 0 ? std::min(q.backlog, q.cos_rate_bps * slot_s_) : q.backlog;
    }
    std::map<std::string, double> granted;

    auto serve = [&](const std::vector<std::string>& names, double pot) {
        std::vector<double> weights;
        std::vector<double> caps;
        for (const auto& n : names) {
            weights.push_back(devices_.at(n).cos_rate_bps);
            caps.push_back(limit.at(n));
        }
        const auto g = drr_allocate(pot, weights, caps, rotation_);
        double used = 0.0;
        for (std::size_t i = 0; i < names.size(); ++i) {
            granted[names[i]] += g[i];
            limit[names[i]] -= g[i];
            used += g[i];
        }
        return used;
    };
    auto members = [&](VnId vn) {
        std::vector<std::string> names;
        for (const auto& [name, cap] : limit)
            if (cap > kBitEpsilon && devices_.at(name).vn == vn) names.push_back(name);
        return names;
    };

    for (const auto& [vn, share] : vns_) {
        if (share.partition_bps <= 0 || budget <= kBitEpsilon) continue;
        const auto names = members(vn);
        if (names.empty()) continue;
        budget -= serve(names, std::min(share.partition_bps * slot_s_, budget));
    }

    if (budget > kBitEpsilon) {
        std::vector<VnId> vns;
        std::vector<double> weights;
        std::vector<double> caps;
        for (const auto& [vn, share] : vns_) {
            double demand = 0.0;
            for (const auto& [name, cap] : limit)
                if (devices_.at(name).vn == vn) demand += std::max(0.0, cap);
            if (demand <= kBitEpsilon) continue;
            vns.push_back(vn);
            weights.push_back(share.weight);
            caps.push_back(demand);
        }
        const auto vn_pots = drr_allocate(budget, weights, caps, rotation_);
        for (std::size_t i = 0; i < vns.size(); ++i) budget -= serve(members(vns[i]), vn_pots[i]);
    }

    for (const auto& [name, bits] : granted)
        if (bits > 0.0) grant(name, devices_.at(name), bits, out);
    ++rotation_;
    return out;
}

double AccessLinkScheduler::backlog_bits(const std::string& name) const {
    auto it = devices_.find(name);
    return it == devices_.end() ? 0.0 : it->second.backlog;
}

std::size_t AccessLinkScheduler::queued_items(const std::string& name) const {
    auto it = devices_.find(name);
    return it == devices_.end() ? 0 : it->second.items.size();
}

bool AccessLinkScheduler::has_eligible_backlog() const {
    return std::any_of(devices_.begin(), devices_.end(),
                       [](const auto& kv) { return kv.second.eligible && kv.second.backlog > kBitEpsilon; });
}

bool AccessLinkScheduler::has_backlog() const {
    return std::any_of(devices_.begin(), devices_.end(), [](const auto& kv) { return !kv.second.items.empty(); });
}

std::vector<std::string> AccessLinkScheduler::device_names() const {
    std::vector<std::string> out;
    for (const auto& [name, q] : devices_) out.push_back(name);
    return out;
}

bool AccessLinkScheduler::eligible(const std::string& name) const {
    auto it = devices_.find(name);
    return it != devices_.end() && it->second.eligible;
}

SlotResult schedule_access_link(AccessLinkScheduler& scheduler) { return scheduler.schedule_slot(); }

}  // namespace hopon
