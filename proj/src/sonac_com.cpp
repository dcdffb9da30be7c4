#include "hopon/sonac_com.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <set>
#include <sstream>

#include "hopon/errors.hpp"
#include "hopon/shares.hpp"

namespace hopon {

const char* to_string(MappingFormat format) {
    switch (format) {
        case MappingFormat::ip_like: return "ip_like";
        case MappingFormat::source_routing: return "source_routing";
        case MappingFormat::destination_based: return "destination_based";
        case MappingFormat::dedicated: return "dedicated";
    }
    return "?";
}

const char* to_string(BudgetSplit split) { return split == BudgetSplit::equal ? "equal" : "delay_proportional"; }

std::optional<MappingFormat> parse_mapping_format(std::string_view text) {
    if (text == "ip_like") return MappingFormat::ip_like;
    if (text == "source_routing") return MappingFormat::source_routing;
    if (text == "destination_based") return MappingFormat::destination_based;
    if (text == "dedicated") return MappingFormat::dedicated;
    return std::nullopt;
}

std::optional<BudgetSplit> parse_budget_split(std::string_view text) {
    if (text == "equal") return BudgetSplit::equal;
    if (text == "delay_proportional") return BudgetSplit::delay_proportional;
    return std::nullopt;
}

std::string to_string(const Placement& placement) {
    switch (placement.kind) {
        case Placement::Kind::nn: return "nn " + std::to_string(placement.id);
        case Placement::Kind::cluster: return "cluster " + std::to_string(placement.id);
        case Placement::Kind::domain: return "domain " + std::to_string(placement.id);
    }
    return "?";
}

std::optional<TunnelId> RoutingTable::lookup(VnNodeId destination) const {
    if (auto it = entries.find(destination); it != entries.end()) return it->second;
    return wildcard;
}

bool RouterConfig::serves(VnNodeId node) const {
    return std::find(served_vn_nodes.begin(), served_vn_nodes.end(), node) != served_vn_nodes.end();
}

MappingFormat MappingPolicy::format_for(VnId vn, TunnelId tunnel) const {
    if (auto it = overrides.find({vn, tunnel}); it != overrides.end()) return it->second;
    return default_format;
}

const RouterConfig* DeployedSlice::router_serving(VnNodeId node) const {
    for (const auto& [id, r] : routers)
        if (r.serves(node)) return &r;
    return nullptr;
}

const RouterConfig* DeployedSlice::router_at(Placement placement) const {
    for (const auto& [id, r] : routers)
        if (r.placement == placement) return &r;
    return nullptr;
}

std::vector<const TunnelMapping*> DeployedSlice::all_mappings() const {
    std::vector<const TunnelMapping*> out;
    for (const auto& [id, m] : mappings) out.push_back(&m);
    for (const auto& [id, m] : open_mappings) out.push_back(&m);
    return out;
}

// ---------------------------------------------------------------------------
// SDT-Com: routers and routing tables

namespace {

Placement placement_of(const VnNode& node) {
    if (!node.anchor) return {Placement::Kind::nn, node.nn.value};
    return {node.anchor->level == AnchorScope::Level::cluster ? Placement::Kind::cluster : Placement::Kind::domain,
            node.anchor->id};
}

CmId cm_for(const Placement& p, const Infrastructure& infra) {
    switch (p.kind) {
        case Placement::Kind::cluster: return {CmLevel::cluster, p.id};
        case Placement::Kind::domain: return {CmLevel::domain, p.id};
        case Placement::Kind::nn: {
            const auto& n = infra.node(NnId{p.id});
            if (n.cluster) return {CmLevel::cluster, n.cluster->value};
            return {CmLevel::domain, n.domain.value};
        }
    }
    return {};
}

struct LogicalEdge {
    VnNodeId from;
    VnNodeId to;
    TunnelId tunnel;
};

std::vector<LogicalEdge> logical_edges(const VnDescription& vn) {
    std::vector<LogicalEdge> edges;
    for (const auto& [id, t] : vn.tunnels) {
        edges.push_back({t.ingress, t.egress, id});
        if (t.bidirectional) edges.push_back({t.egress, t.ingress, id});
    }
    return edges;
}

constexpr int kUnreachable = std::numeric_limits<int>::max();

// Hop distance from every VN node to `dest` over the directed logical graph.
std::map<VnNodeId, int> distances_to(const VnDescription& vn, const std::vector<LogicalEdge>& edges, VnNodeId dest) {
    std::map<VnNodeId, int> dist;
    for (const auto& [id, n] : vn.nodes) dist[id] = kUnreachable;
    dist[dest] = 0;
    std::deque<VnNodeId> queue{dest};
    while (!queue.empty()) {
        VnNodeId cur = queue.front();
        queue.pop_front();
        for (const auto& e : edges) {
            if (e.to == cur && dist[e.from] == kUnreachable) {
                dist[e.from] = dist[cur] + 1;
                queue.push_back(e.from);
            }
        }
    }
    return dist;
}

}  // namespace

std::vector<RouterConfig> derive_router_configs(const VnDescription& vn, const Infrastructure& infra) {
    struct Group {
        std::vector<VnNodeId> nodes;
        std::vector<TunnelId> open_tunnels;
    };
    std::map<Placement, Group> groups;
    for (const auto& [id, n] : vn.nodes) groups[placement_of(n)].nodes.push_back(id);
    for (const auto& [id, o] : vn.open_tunnels) {
        if (o.direction == Direction::dl) {
            const auto* nn = infra.find_node(o.access_nn);
            if (nn == nullptr || !nn->cluster)
                throw CompositionError(Stage::derive_routers,
                                       "open tunnel " + to_string(id) + " destination NN " + to_string(o.access_nn) +
                                           " is not in a RAN cluster");
            groups[{Placement::Kind::cluster, nn->cluster->value}].open_tunnels.push_back(id);
        } else {
            groups[{Placement::Kind::nn, o.access_nn.value}].open_tunnels.push_back(id);
        }
    }

    std::int64_t next_free_id = vn.nodes.empty() ? 1 : vn.nodes.rbegin()->first.value + 1;
    const auto edges = logical_edges(vn);
    std::map<VnNodeId, std::map<VnNodeId, int>> dist_to;
    for (const auto& [id, n] : vn.nodes) dist_to[id] = distances_to(vn, edges, id);

    std::vector<RouterConfig> routers;
    for (auto& [placement, group] : groups) {
        RouterConfig r;
        r.vn = vn.id;
        r.placement = placement;
        r.served_vn_nodes = group.nodes;
        r.cm = cm_for(placement, infra);
        if (!group.nodes.empty()) {
            r.id = RouterId{group.nodes.front().value};
            r.host_nn = vn.nodes.at(group.nodes.front()).nn;
        } else {
            r.id = RouterId{next_free_id++};
            if (placement.kind == Placement::Kind::nn) {
                r.host_nn = NnId{placement.id};
            } else {
                const auto* cluster = infra.find_cluster(ClusterId{placement.id});
                r.host_nn = cluster->members.front();
            }
        }

        for (const auto& [tid, t] : vn.tunnels) {
            if (r.serves(t.ingress)) r.tunnel_table[tid] = TunnelEntry{t.egress, t.qos};
            else if (t.bidirectional && r.serves(t.egress)) r.tunnel_table[tid] = TunnelEntry{t.ingress, t.qos};
        }
        for (TunnelId oid : group.open_tunnels) {
            const auto& o = vn.open_tunnels.at(oid);
            r.open_tunnel_table[oid] = OpenTunnelEntry{o.direction, o.access_nn, o.vn_node, o.qos};
        }

        std::vector<LogicalEdge> outgoing;
        for (const auto& e : edges)
            if (r.serves(e.from) && !r.serves(e.to)) outgoing.push_back(e);
        if (!outgoing.empty()) {
            for (const auto& [dest, n] : vn.nodes) {
                if (r.serves(dest)) continue;
                int best_hops = kUnreachable;
                std::optional<TunnelId> best;
                for (const auto& e : outgoing) {
                    const int d = dist_to.at(dest).at(e.to);
                    if (d == kUnreachable) continue;
                    if (d + 1 < best_hops || (d + 1 == best_hops && e.tunnel < *best)) {
                        best_hops = d + 1;
                        best = e.tunnel;
                    }
                }
                if (!best)
                    throw CompositionError(Stage::derive_routers, "VN node " + to_string(group.nodes.front()) +
                                                                      " cannot reach VN node " + to_string(dest));
                r.routing_table.entries[dest] = *best;
            }
            auto& entries = r.routing_table.entries;
            if (entries.size() >= 2 &&
                std::all_of(entries.begin(), entries.end(),
                            [&](const auto& kv) { return kv.second == entries.begin()->second; })) {
                r.routing_table.wildcard = entries.begin()->second;
                entries.clear();
            }
        }
        routers.push_back(std::move(r));
    }
    std::sort(routers.begin(), routers.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return routers;
}

// ---------------------------------------------------------------------------
// SDRA-Com: tunnel mapping, budgets, admission

std::vector<double> allocate_latency_budget(double budget_s, std::span<const double> link_delays_s,
                                            BudgetSplit split) {
    if (!(budget_s > 0)) throw Error("latency budget must be positive");
    if (link_delays_s.empty()) throw Error("latency budget needs a non-empty path");
    std::vector<double> shares;
    if (split == BudgetSplit::delay_proportional) {
        shares = proportional_shares(budget_s, link_delays_s);
    } else {
        const std::vector<double> ones(link_delays_s.size(), 1.0);
        shares = proportional_shares(budget_s, ones);
    }
    for (std::size_t i = 0; i < shares.size(); ++i) {
        if (link_delays_s[i] > shares[i]) {
            std::ostringstream msg;
            msg << "link " << i << " propagation delay " << link_delays_s[i] << " s exceeds its budget " << shares[i]
                << " s";
            throw Error(msg.str());
        }
    }
    return shares;
}

std::vector<Reservation> reservations_of(const TunnelMapping& mapping) {
    std::vector<Reservation> out;
    for (const auto& p : mapping.paths) {
        for (const auto& l : p.links) {
            if (l.reserved_bps <= 0) continue;
            out.push_back({l.link, l.from, l.to, l.reserved_bps});
            if (mapping.bidirectional) out.push_back({l.link, l.to, l.from, l.reserved_bps});
        }
    }
    return out;
}

ReservationTable reserved_by(std::span<const DeployedSlice> deployed) {
    ReservationTable table;
    for (const auto& s : deployed)
        for (const auto* m : s.all_mappings())
            for (const auto& r : reservations_of(*m)) table[{r.link, r.from, r.to}] += r.bps;
    return table;
}

namespace {

PathMapping build_path(const Infrastructure& infra, const PhysicalPath& path, double rate_bps, double budget_s,
                       const MappingPolicy& policy) {
    PathMapping pm;
    pm.nodes = path.nodes;
    pm.rate_bps = rate_bps;
    if (path.links.empty()) return pm;
    std::vector<double> delays;
    for (LinkId l : path.links) delays.push_back(infra.link(l).prop_delay_s);
    std::vector<double> budgets;
    try {
        budgets = allocate_latency_budget(budget_s, delays, policy.budget_split);
    } catch (const Error& e) {
        throw CompositionError(Stage::latency_budget, e.what());
    }
    for (std::size_t i = 0; i < path.links.size(); ++i) {
        pm.links.push_back(
            {path.links[i], path.nodes[i], path.nodes[i + 1], policy.reserved_rate(rate_bps), budgets[i]});
    }
    return pm;
}

std::vector<PhysicalPath> candidate_paths(const Infrastructure& infra, NnId src, NnId dst, std::size_t k,
                                          const std::string& what) {
    if (src == dst) return {PhysicalPath{{src}, {}, 0.0}};
    try {
        return physical_paths(infra, src, dst, k);
    } catch (const NoPathError& e) {
        throw CompositionError(Stage::map_tunnels, what + ": " + e.what());
    }
}

}  // namespace

TunnelMapping map_tunnel(const VnDescription& vn, const Tunnel& tunnel, const Infrastructure& infra,
                         const MappingPolicy& policy, const ReservationTable& existing) {
    if (policy.k < 1) throw CompositionError(Stage::map_tunnels, "mapping policy k must be at least 1");
    const VnNode* in = vn.find_node(tunnel.ingress);
    const VnNode* out = vn.find_node(tunnel.egress);
    if (in == nullptr || out == nullptr)
        throw CompositionError(Stage::map_tunnels, "tunnel " + to_string(tunnel.id) + " is not part of VN " +
                                                       to_string(vn.id));
    TunnelMapping m;
    m.vn = vn.id;
    m.tunnel = tunnel.id;
    m.bidirectional = tunnel.bidirectional;
    m.format = policy.format_for(vn.id, tunnel.id);
    m.ingress_node = tunnel.ingress;
    m.egress_node = tunnel.egress;
    m.ingress_nn = in->nn;
    m.egress_nn = out->nn;

    const std::size_t k = m.format == MappingFormat::source_routing ? policy.k : 1;
    auto paths = candidate_paths(infra, m.ingress_nn, m.egress_nn, k, "tunnel " + to_string(tunnel.id));
    const double budget = tunnel.qos.latency_budget_s.value_or(vn.device_cos.latency_s);

    if (m.format == MappingFormat::dedicated) {
        const double need = policy.reserved_rate(tunnel.qos.rate_bps);
        const auto& path = paths.front();
        for (std::size_t i = 0; i < path.links.size(); ++i) {
            const Link& link = infra.link(path.links[i]);
            std::vector<std::pair<NnId, NnId>> dirs{{path.nodes[i], path.nodes[i + 1]}};
            if (tunnel.bidirectional) dirs.emplace_back(path.nodes[i + 1], path.nodes[i]);
            for (const auto& [from, to] : dirs) {
                double used = 0.0;
                if (auto it = existing.find({link.id, from, to}); it != existing.end()) used = it->second;
                if (link.capacity_bps - used < need) {
                    std::ostringstream msg;
                    msg << "dedicated tunnel " << tunnel.id << " needs " << need << " bps on link " << link.id
                        << " but only " << (link.capacity_bps - used) << " bps remain";
                    throw CompositionError(Stage::map_tunnels, msg.str());
                }
            }
        }
        m.resource_id = "lambda-vn" + to_string(vn.id) + "-t" + to_string(tunnel.id);
    }

    std::vector<double> shares{tunnel.qos.rate_bps};
    if (paths.size() > 1) {
        std::vector<double> weights;
        for (const auto& p : paths) {
            double bottleneck = std::numeric_limits<double>::infinity();
            for (LinkId l : p.links) bottleneck = std::min(bottleneck, infra.link(l).capacity_bps);
            weights.push_back(bottleneck);
        }
        shares = proportional_shares(tunnel.qos.rate_bps, weights);
    }
    for (std::size_t i = 0; i < paths.size(); ++i)
        m.paths.push_back(build_path(infra, paths[i], shares[i], budget, policy));
    return m;
}

TunnelMapping map_open_tunnel(const VnDescription& vn, const OpenTunnel& open, const Infrastructure& infra,
                              const MappingPolicy& policy) {
    const VnNode* node = vn.find_node(open.vn_node);
    if (node == nullptr)
        throw CompositionError(Stage::map_tunnels, "open tunnel " + to_string(open.id) + " references unknown VN node");
    TunnelMapping m;
    m.vn = vn.id;
    m.tunnel = open.id;
    m.open = true;
    m.format = MappingFormat::ip_like;
    if (open.direction == Direction::dl) {
        m.ingress_node = open.vn_node;
        m.ingress_nn = node->nn;
        m.egress_nn = open.access_nn;
    } else {
        m.egress_node = open.vn_node;
        m.ingress_nn = open.access_nn;
        m.egress_nn = node->nn;
    }
    auto paths = candidate_paths(infra, m.ingress_nn, m.egress_nn, 1, "open tunnel " + to_string(open.id));
    const double budget = open.qos.latency_budget_s.value_or(vn.device_cos.latency_s);
    m.paths.push_back(build_path(infra, paths.front(), open.qos.rate_bps, budget, policy));
    return m;
}

AdmissionDecision admit_slice(const VnDescription& vn, std::span<const TunnelMapping> mappings,
                              const Infrastructure& infra, std::span<const DeployedSlice> already_deployed) {
    AdmissionDecision decision;
    const ReservationTable existing = reserved_by(already_deployed);
    ReservationTable demand;
    for (const auto& m : mappings)
        for (const auto& r : reservations_of(m)) demand[{r.link, r.from, r.to}] += r.bps;

    for (const auto& [key, bps] : demand) {
        const auto& [link_id, from, to] = key;
        const double capacity = infra.link(link_id).capacity_bps;
        double used = 0.0;
        if (auto it = existing.find(key); it != existing.end()) used = it->second;
        if (used + bps > capacity * (1.0 + 1e-12)) {
            decision.admitted = false;
            decision.bottleneck = LinkBottleneck{link_id, from, to, bps, capacity - used};
            return decision;
        }
    }

    // Pre-assigned access-link partitions must fit the radio capacity.
    std::map<std::pair<NnId, Direction>, double> partitions;
    auto add_partitions = [&](const VnDescription& d) {
        for (const auto& [nn, p] : d.al_policies) {
            if (!p.pre_assigned) continue;
            partitions[{nn, Direction::dl}] += p.dl_qos.rate_bps;
            partitions[{nn, Direction::ul}] += p.ul_qos.rate_bps;
        }
    };
    for (const auto& s : already_deployed) add_partitions(s.vn);
    std::map<std::pair<NnId, Direction>, double> before = partitions;
    add_partitions(vn);
    for (const auto& [key, total] : partitions) {
        const auto* node = infra.find_node(key.first);
        if (node == nullptr) continue;
        if (total > node->al_capacity_bps * (1.0 + 1e-12) && total > before[key]) {
            decision.admitted = false;
            decision.al_bottleneck =
                AlBottleneck{key.first, key.second, total - before[key], node->al_capacity_bps - before[key]};
            return decision;
        }
    }
    return decision;
}

DeployedSlice compose_slice(const VnDescription& vn, const Infrastructure& infra, const MappingPolicy& policy,
                            std::span<const DeployedSlice> deployed) {
    const ValidationReport report = validate_vn(vn, infra);
    for (const auto& f : report.findings)
        if (f.severity == Severity::error) throw CompositionError(Stage::validate, f.location + ": " + f.message);
    for (const auto& s : deployed)
        if (s.vn.id == vn.id) throw CompositionError(Stage::validate, "VN " + to_string(vn.id) + " already deployed");

    DeployedSlice slice;
    slice.vn = vn;
    for (auto& r : derive_router_configs(vn, infra)) slice.routers.emplace(r.id, std::move(r));

    ReservationTable running = reserved_by(deployed);
    std::vector<TunnelMapping> all;
    for (const auto& [id, t] : vn.tunnels) {
        TunnelMapping m = map_tunnel(vn, t, infra, policy, running);
        for (const auto& r : reservations_of(m)) running[{r.link, r.from, r.to}] += r.bps;
        all.push_back(m);
        slice.mappings.emplace(id, std::move(m));
    }
    for (const auto& [id, o] : vn.open_tunnels) {
        TunnelMapping m = map_open_tunnel(vn, o, infra, policy);
        all.push_back(m);
        slice.open_mappings.emplace(id, std::move(m));
    }

    const AdmissionDecision decision = admit_slice(vn, all, infra, deployed);
    if (!decision.admitted) {
        std::ostringstream msg;
        msg << "VN " << vn.id << " rejected: ";
        if (decision.bottleneck) {
            const auto& b = *decision.bottleneck;
            msg << "link " << b.link << " (" << b.from << "->" << b.to << ") demand " << b.demanded_bps
                << " bps exceeds available " << b.available_bps << " bps";
        } else if (decision.al_bottleneck) {
            const auto& b = *decision.al_bottleneck;
            msg << "access link at NN " << b.nn << " (" << to_string(b.direction) << ") demand " << b.demanded_bps
                << " bps exceeds available " << b.available_bps << " bps";
        }
        throw CompositionError(Stage::admission, msg.str());
    }

    for (const auto& [id, m] : slice.mappings) {
        if (m.format != MappingFormat::destination_based) continue;
        const auto& path = m.paths.front();
        auto install = [&](const std::vector<NnId>& nodes) {
            for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
                auto& rule = slice.nn_forwarding_rules[nodes[i]][{vn.id, nodes.back()}];
                if (!rule.tunnels.empty() && rule.next_nn != nodes[i + 1]) {
                    throw CompositionError(Stage::map_tunnels, "conflicting forwarding rules at NN " +
                                                                   to_string(nodes[i]) + " for destination NN " +
                                                                   to_string(nodes.back()));
                }
                rule.next_nn = nodes[i + 1];
                rule.rate_bps += path.rate_bps;
                rule.tunnels.push_back(id);
            }
        };
        install(path.nodes);
        if (m.bidirectional) install(std::vector<NnId>(path.nodes.rbegin(), path.nodes.rend()));
    }

    for (const auto& [nn, p] : vn.al_policies) slice.al_configs.emplace(nn, AlConfig{nn, p, vn.device_cos});

    for (const auto& [id, o] : vn.open_tunnels) {
        const auto& node = infra.node(o.access_nn);
        if (!node.cluster) continue;
        auto& target = slice.sdra_op_config[*node.cluster];
        if (o.direction == Direction::dl) target.dl_rate_bps += o.qos.rate_bps;
        else target.ul_rate_bps += o.qos.rate_bps;
        if (o.qos.rate_bps == 0) target.scheduler_managed.push_back(id);
    }
    return slice;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

Json id_map_key(std::int64_t v) { return std::to_string(v); }

}  // namespace

Json to_json(const RouterConfig& r) {
    Json j{{"router", r.id.value},
           {"vn", r.vn.value},
           {"placement", to_string(r.placement)},
           {"host_nn", r.host_nn.value},
           {"cm", to_string(r.cm)}};
    Json served = Json::array();
    for (auto n : r.served_vn_nodes) served.push_back(n.value);
    j["served_vn_nodes"] = served;
    if (!r.tunnel_table.empty()) {
        Json t = Json::object();
        for (const auto& [id, e] : r.tunnel_table)
            t[id_map_key(id.value)] = Json{{"egress_vn_node", e.egress.value}, {"qos", to_json(e.qos)}};
        j["tunnels"] = t;
    }
    if (!r.open_tunnel_table.empty()) {
        Json t = Json::object();
        for (const auto& [id, e] : r.open_tunnel_table) {
            if (e.direction == Direction::dl) {
                t[id_map_key(id.value)] = Json{{"direction", "dl"},
                                               {"ingress_vn_node", e.vn_node.value},
                                               {"destination_nn", e.destination_nn.value},
                                               {"qos", to_json(e.qos)}};
            } else {
                t[id_map_key(id.value)] =
                    Json{{"direction", "ul"}, {"egress_vn_node", e.vn_node.value}, {"qos", to_json(e.qos)}};
            }
        }
        j["open_tunnels"] = t;
    }
    if (!r.routing_table.empty()) {
        Json t = Json::object();
        if (r.routing_table.wildcard) t["*"] = r.routing_table.wildcard->value;
        for (const auto& [dest, tunnel] : r.routing_table.entries) t[id_map_key(dest.value)] = tunnel.value;
        j["routing_table"] = t;
    }
    return j;
}

Json to_json(const TunnelMapping& m) {
    Json paths = Json::array();
    for (const auto& p : m.paths) {
        Json nodes = Json::array();
        for (auto n : p.nodes) nodes.push_back(n.value);
        Json links = Json::array();
        for (const auto& l : p.links) {
            links.push_back({{"link", l.link.value},
                             {"from", l.from.value},
                             {"to", l.to.value},
                             {"reserved_bps", l.reserved_bps},
                             {"latency_budget_s", l.latency_budget_s}});
        }
        paths.push_back({{"nodes", nodes}, {"rate_bps", p.rate_bps}, {"links", links}});
    }
    Json j{{"tunnel", m.tunnel.value},
           {"vn", m.vn.value},
           {"open", m.open},
           {"bidirectional", m.bidirectional},
           {"format", to_string(m.format)},
           {"ingress_nn", m.ingress_nn.value},
           {"egress_nn", m.egress_nn.value},
           {"paths", paths}};
    if (!m.open || m.ingress_node.value != 0) j["ingress_vn_node"] = m.ingress_node.value;
    if (!m.open || m.egress_node.value != 0) j["egress_vn_node"] = m.egress_node.value;
    if (m.resource_id) j["resource_id"] = *m.resource_id;
    return j;
}

Json association_json(const DeployedSlice& slice) {
    Json nodes = Json::object();
    for (const auto& [id, r] : slice.routers)
        for (auto n : r.served_vn_nodes) nodes[id_map_key(n.value)] = id.value;
    return Json{{"vn", slice.vn.id.value}, {"vn_node_to_router", nodes}};
}

namespace {

Json al_direction_json(const AlPolicy& p, const QosSpec& qos) {
    Json j{{"pre_assigned", p.pre_assigned}, {"shared", p.shared}, {"qos", to_json(qos)}};
    if (p.resource_id) j["resource_id"] = *p.resource_id;
    return j;
}

}  // namespace

Json nn_config_json(const DeployedSlice& slice, NnId nn) {
    Json j{{"nn", nn.value}, {"vn", slice.vn.id.value}};
    if (auto it = slice.nn_forwarding_rules.find(nn); it != slice.nn_forwarding_rules.end()) {
        Json rules = Json::object();
        for (const auto& [key, rule] : it->second) {
            if (key.first != slice.vn.id) continue;
            rules[id_map_key(key.second.value)] =
                Json{{"next_nn", rule.next_nn.value}, {"qos", Json{{"rate_bps", rule.rate_bps}}}};
        }
        j["forwarding"] = rules;
    }
    if (auto it = slice.al_configs.find(nn); it != slice.al_configs.end()) {
        const auto& al = it->second;
        j["access_link"] = Json{{"dl", al_direction_json(al.policy, al.policy.dl_qos)},
                                {"ul", al_direction_json(al.policy, al.policy.ul_qos)},
                                {"device_cos",
                                 {{"rate_bps", al.device_cos.rate_bps}, {"latency_s", al.device_cos.latency_s}}}};
    }
    return j;
}

Json sdra_op_json(const DeployedSlice& slice) {
    Json clusters = Json::object();
    for (const auto& [cid, t] : slice.sdra_op_config) {
        Json managed = Json::array();
        for (auto id : t.scheduler_managed) managed.push_back(id.value);
        clusters[id_map_key(cid.value)] =
            Json{{"dl_rate_bps", t.dl_rate_bps}, {"ul_rate_bps", t.ul_rate_bps}, {"scheduler_managed", managed}};
    }
    Json access = Json::object();
    for (const auto& [nn, al] : slice.al_configs) {
        access[id_map_key(nn.value)] =
            Json{{"device_rate_bps", al.device_cos.rate_bps},
                 {"device_latency_s", al.device_cos.latency_s},
                 {"pre_assigned", al.policy.pre_assigned},
                 {"dl_partition_bps", al.policy.pre_assigned ? al.policy.dl_qos.rate_bps : 0.0},
                 {"ul_partition_bps", al.policy.pre_assigned ? al.policy.ul_qos.rate_bps : 0.0}};
    }
    return Json{{"vn", slice.vn.id.value}, {"clusters", clusters}, {"access_nodes", access}};
}

Json to_json(const DeployedSlice& slice) {
    Json routers = Json::array();
    for (const auto& [id, r] : slice.routers) routers.push_back(to_json(r));
    Json mappings = Json::array();
    for (const auto* m : slice.all_mappings()) mappings.push_back(to_json(*m));
    Json nns = Json::object();
    std::set<NnId> nn_ids;
    for (const auto& [nn, rules] : slice.nn_forwarding_rules) nn_ids.insert(nn);
    for (const auto& [nn, al] : slice.al_configs) nn_ids.insert(nn);
    for (NnId nn : nn_ids) nns[id_map_key(nn.value)] = nn_config_json(slice, nn);
    return Json{{"vn", to_json(slice.vn)},
                {"routers", routers},
                {"association", association_json(slice)},
                {"mappings", mappings},
                {"nn_configs", nns},
                {"sdra_op", sdra_op_json(slice)}};
}

std::map<std::string, std::string> render_slice_documents(const DeployedSlice& slice) {
    std::map<std::string, std::string> docs;
    const std::string dir = "vn-" + to_string(slice.vn.id) + "/";
    docs[dir + "association.json"] = dump_canonical(association_json(slice));
    for (const auto& [id, r] : slice.routers)
        docs[dir + "routers/router-" + to_string(id) + ".json"] = dump_canonical(to_json(r));
    std::set<NnId> nn_ids;
    for (const auto& [nn, rules] : slice.nn_forwarding_rules) nn_ids.insert(nn);
    for (const auto& [nn, al] : slice.al_configs) nn_ids.insert(nn);
    for (NnId nn : nn_ids) docs[dir + "nn/nn-" + to_string(nn) + ".json"] = dump_canonical(nn_config_json(slice, nn));
    Json mappings = Json::array();
    for (const auto* m : slice.all_mappings()) mappings.push_back(to_json(*m));
    docs[dir + "mappings.json"] = dump_canonical(mappings);
    docs[dir + "sdra_op.json"] = dump_canonical(sdra_op_json(slice));
    docs[dir + "deployed.json"] = dump_canonical(to_json(slice));
    return docs;
}

std::string export_dot(const VnDescription& vn) {
    std::ostringstream out;
    out << "digraph vn_" << vn.id << " {\n";
    out << "  rankdir=LR;\n";
    for (const auto& [id, n] : vn.nodes) {
        out << "  vn" << id << " [shape=ellipse, label=\"VN node " << id << "\\nNN " << n.nn;
        if (n.anchor)
            out << "\\nanchor " << (n.anchor->level == AnchorScope::Level::cluster ? "cluster " : "domain ")
                << n.anchor->id;
        out << "\"];\n";
    }
    std::set<NnId> access;
    for (const auto& [id, o] : vn.open_tunnels) access.insert(o.access_nn);
    for (NnId nn : access) out << "  nn" << nn << " [shape=box, label=\"NN " << nn << "\"];\n";
    for (const auto& [id, t] : vn.tunnels) {
        out << "  vn" << t.ingress << " -> vn" << t.egress << " [label=\"t" << id << "\"";
        if (t.bidirectional) out << ", dir=both";
        out << "];\n";
    }
    for (const auto& [id, o] : vn.open_tunnels) {
        if (o.direction == Direction::dl)
            out << "  vn" << o.vn_node << " -> nn" << o.access_nn;
        else
            out << "  nn" << o.access_nn << " -> vn" << o.vn_node;
        out << " [style=dashed, label=\"o" << id << "\"];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace hopon
