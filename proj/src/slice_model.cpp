#include "hopon/slice_model.hpp"

#include <set>

#include "hopon/errors.hpp"

namespace hopon {

const char* to_string(Direction dir) { return dir == Direction::dl ? "dl" : "ul"; }

const VnNode* VnDescription::find_node(VnNodeId node) const {
    auto it = nodes.find(node);
    return it == nodes.end() ? nullptr : &it->second;
}

const AlPolicy* VnDescription::find_al_policy(NnId nn) const {
    auto it = al_policies.find(nn);
    return it == al_policies.end() ? nullptr : &it->second;
}

std::vector<const OpenTunnel*> VnDescription::open_tunnels_in(Direction dir) const {
    std::vector<const OpenTunnel*> out;
    for (const auto& entry : open_tunnels)
        if (entry.second.direction == dir) out.push_back(&entry.second);
    return out;
}

namespace {

QosSpec parse_qos(const Json& j, const std::string& path, bool rate_required) {
    DocReader r(j, path);
    QosSpec q;
    if (rate_required) {
        q.rate_bps = r.number("rate_bps");
        if (!(q.rate_bps > 0)) throw ParseError(r.child("rate_bps"), "rate must be positive");
    } else {
        q.rate_bps = r.number_or("rate_bps", 0.0);
        if (q.rate_bps < 0) throw ParseError(r.child("rate_bps"), "rate must be non-negative");
    }
    q.latency_budget_s = r.opt_number("latency_budget_s");
    if (q.latency_budget_s && !(*q.latency_budget_s > 0))
        throw ParseError(r.child("latency_budget_s"), "latency budget must be positive");
    if (auto p = r.opt_integer("priority")) q.priority = static_cast<int>(*p);
    r.finish();
    return q;
}

QosSpec parse_optional_qos(DocReader& r, std::string_view key) {
    if (const Json* q = r.find(key)) return parse_qos(*q, r.child(key), false);
    return QosSpec{};
}

std::string item(const DocReader& r, std::string_view key, std::size_t i) {
    return r.child(key) + "/" + std::to_string(i);
}

}  // namespace

VnDescription parse_vn_description(const Json& doc, const std::string& path) {
    DocReader r(doc, path);
    VnDescription vn;
    vn.id = r.id<VnId>("vn_id");
    vn.ac_required = r.boolean_or("ac_required", false);

    const Json& nodes = r.array("vn_nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        DocReader n(nodes[i], item(r, "vn_nodes", i));
        VnNode node;
        node.id = n.id<VnNodeId>("id");
        node.nn = n.id<NnId>("nn");
        if (const Json* a = n.find("anchor")) {
            DocReader ar(*a, n.child("anchor"));
            const bool has_cluster = ar.has("cluster");
            const bool has_domain = ar.has("domain");
            if (has_cluster == has_domain) throw ParseError(ar.path(), "anchor needs exactly one of cluster or domain");
            node.anchor = has_cluster ? AnchorScope{AnchorScope::Level::cluster, ar.integer("cluster")}
                                      : AnchorScope{AnchorScope::Level::domain, ar.integer("domain")};
            ar.finish();
        }
        n.finish();
        if (!vn.nodes.emplace(node.id, node).second)
            throw ParseError(n.child("id"), "duplicate VN node id " + to_string(node.id));
    }

    std::set<TunnelId> tunnel_ids;
    auto claim_tunnel_id = [&](TunnelId id, const std::string& where) {
        if (!tunnel_ids.insert(id).second) throw ParseError(where, "duplicate tunnel id " + to_string(id));
    };
    auto require_vn_node = [&](VnNodeId id, const std::string& where) {
        if (!vn.nodes.contains(id)) throw ParseError(where, "unknown VN node " + to_string(id));
    };

    if (const Json* tunnels = r.opt_array("tunnels")) {
        for (std::size_t i = 0; i < tunnels->size(); ++i) {
            DocReader t((*tunnels)[i], item(r, "tunnels", i));
            Tunnel tunnel;
            tunnel.id = t.id<TunnelId>("id");
            tunnel.ingress = t.id<VnNodeId>("ingress");
            tunnel.egress = t.id<VnNodeId>("egress");
            tunnel.bidirectional = t.boolean_or("bidirectional", false);
            tunnel.qos = parse_qos(t.require("qos"), t.child("qos"), true);
            t.finish();
            claim_tunnel_id(tunnel.id, t.child("id"));
            require_vn_node(tunnel.ingress, t.child("ingress"));
            require_vn_node(tunnel.egress, t.child("egress"));
            if (tunnel.ingress == tunnel.egress)
                throw ParseError(t.path(), "tunnel " + to_string(tunnel.id) + " has ingress equal to egress");
            vn.tunnels.emplace(tunnel.id, tunnel);
        }
    }
    if (const Json* dl = r.opt_array("dl_open_tunnels")) {
        for (std::size_t i = 0; i < dl->size(); ++i) {
            DocReader t((*dl)[i], item(r, "dl_open_tunnels", i));
            OpenTunnel o;
            o.direction = Direction::dl;
            o.id = t.id<TunnelId>("id");
            o.vn_node = t.id<VnNodeId>("ingress");
            o.access_nn = t.id<NnId>("destination_nn");
            o.qos = parse_optional_qos(t, "qos");
            t.finish();
            claim_tunnel_id(o.id, t.child("id"));
            require_vn_node(o.vn_node, t.child("ingress"));
            vn.open_tunnels.emplace(o.id, o);
        }
    }
    if (const Json* ul = r.opt_array("ul_open_tunnels")) {
        for (std::size_t i = 0; i < ul->size(); ++i) {
            DocReader t((*ul)[i], item(r, "ul_open_tunnels", i));
            OpenTunnel o;
            o.direction = Direction::ul;
            o.id = t.id<TunnelId>("id");
            o.access_nn = t.id<NnId>("source_nn");
            o.vn_node = t.id<VnNodeId>("destination");
            o.qos = parse_optional_qos(t, "qos");
            t.finish();
            claim_tunnel_id(o.id, t.child("id"));
            require_vn_node(o.vn_node, t.child("destination"));
            vn.open_tunnels.emplace(o.id, o);
        }
    }

    {
        DocReader c(r.require("device_cos"), r.child("device_cos"));
        vn.device_cos.rate_bps = c.number("rate_bps");
        vn.device_cos.latency_s = c.number("latency_s");
        c.finish();
        if (!(vn.device_cos.rate_bps > 0)) throw ParseError(c.child("rate_bps"), "device CoS rate must be positive");
        if (!(vn.device_cos.latency_s > 0)) throw ParseError(c.child("latency_s"), "device CoS latency must be positive");
    }

    if (const Json* al = r.opt_array("al_policies")) {
        for (std::size_t i = 0; i < al->size(); ++i) {
            DocReader a((*al)[i], item(r, "al_policies", i));
            AlPolicy p;
            p.nn = a.id<NnId>("nn");
            p.pre_assigned = a.boolean("pre_assigned");
            if (const Json* res = a.find("resource_id")) {
                if (!res->is_string()) throw ParseError(a.child("resource_id"), "expected a string");
                p.resource_id = res->get<std::string>();
            }
            p.shared = a.boolean("shared");
            p.dl_qos = parse_optional_qos(a, "dl_qos");
            p.ul_qos = parse_optional_qos(a, "ul_qos");
            a.finish();
            if (p.pre_assigned != p.resource_id.has_value())
                throw ParseError(a.path(), "resource_id must be present exactly when pre_assigned is true");
            if (!vn.al_policies.emplace(p.nn, p).second)
                throw ParseError(a.child("nn"), "duplicate access-link policy for NN " + to_string(p.nn));
        }
    }
    r.finish();
    return vn;
}

Json to_json(const QosSpec& qos) {
    Json j{{"rate_bps", qos.rate_bps}};
    if (qos.latency_budget_s) j["latency_budget_s"] = *qos.latency_budget_s;
    if (qos.priority) j["priority"] = *qos.priority;
    return j;
}

Json to_json(const VnDescription& vn) {
    Json nodes = Json::array();
    for (const auto& [id, n] : vn.nodes) {
        Json j{{"id", id.value}, {"nn", n.nn.value}};
        if (n.anchor)
            j["anchor"] = Json{{n.anchor->level == AnchorScope::Level::cluster ? "cluster" : "domain", n.anchor->id}};
        nodes.push_back(std::move(j));
    }
    Json tunnels = Json::array();
    for (const auto& [id, t] : vn.tunnels) {
        Json j{{"id", id.value}, {"ingress", t.ingress.value}, {"egress", t.egress.value}, {"qos", to_json(t.qos)}};
        if (t.bidirectional) j["bidirectional"] = true;
        tunnels.push_back(std::move(j));
    }
    Json dl = Json::array();
    Json ul = Json::array();
    for (const auto& [id, o] : vn.open_tunnels) {
        if (o.direction == Direction::dl) {
            dl.push_back({{"id", id.value},
                          {"ingress", o.vn_node.value},
                          {"destination_nn", o.access_nn.value},
                          {"qos", to_json(o.qos)}});
        } else {
            ul.push_back({{"id", id.value},
                          {"source_nn", o.access_nn.value},
                          {"destination", o.vn_node.value},
                          {"qos", to_json(o.qos)}});
        }
    }
    Json al = Json::array();
    for (const auto& [nn, p] : vn.al_policies) {
        Json j{{"nn", nn.value},
               {"pre_assigned", p.pre_assigned},
               {"shared", p.shared},
               {"dl_qos", to_json(p.dl_qos)},
               {"ul_qos", to_json(p.ul_qos)}};
        if (p.resource_id) j["resource_id"] = *p.resource_id;
        al.push_back(std::move(j));
    }
    return Json{{"vn_id", vn.id.value},
                {"ac_required", vn.ac_required},
                {"vn_nodes", nodes},
                {"tunnels", tunnels},
                {"dl_open_tunnels", dl},
                {"ul_open_tunnels", ul},
                {"device_cos", {{"rate_bps", vn.device_cos.rate_bps}, {"latency_s", vn.device_cos.latency_s}}},
                {"al_policies", al}};
}

ValidationReport validate_vn(const VnDescription& vn, const Infrastructure& infra) {
    ValidationReport report;
    const std::string base = "/slices/vn-" + to_string(vn.id);
    if (vn.nodes.empty()) report.error(base + "/vn_nodes", "VN has no nodes");
    for (const auto& [id, n] : vn.nodes) {
        const std::string where = base + "/vn_nodes/" + to_string(id);
        const NetworkNode* nn = infra.find_node(n.nn);
        if (nn == nullptr) {
            report.error(where, "VN node " + to_string(id) + " is hosted on unknown NN " + to_string(n.nn));
            continue;
        }
        if (!n.anchor) continue;
        if (n.anchor->level == AnchorScope::Level::cluster) {
            if (infra.find_cluster(ClusterId{n.anchor->id}) == nullptr)
                report.error(where, "anchor cluster " + std::to_string(n.anchor->id) + " does not exist");
            else if (!nn->cluster || nn->cluster->value != n.anchor->id)
                report.error(where, "anchor cluster " + std::to_string(n.anchor->id) + " does not contain NN " +
                                        to_string(n.nn));
        } else {
            if (!infra.has_domain(DomainId{n.anchor->id}))
                report.error(where, "anchor domain " + std::to_string(n.anchor->id) + " does not exist");
            else if (nn->domain.value != n.anchor->id)
                report.error(where, "anchor domain " + std::to_string(n.anchor->id) + " does not contain NN " +
                                        to_string(n.nn));
        }
    }
    std::set<AnchorScope> scopes;
    for (const auto& [id, n] : vn.nodes) {
        if (n.anchor && !scopes.insert(*n.anchor).second)
            report.error(base + "/vn_nodes/" + to_string(id), "more than one VN node anchors the same scope");
    }
    for (const auto& [id, o] : vn.open_tunnels) {
        const std::string where = base + "/open_tunnels/" + to_string(id);
        const NetworkNode* nn = infra.find_node(o.access_nn);
        if (nn == nullptr) {
            report.error(where, "open tunnel references unknown NN " + to_string(o.access_nn));
        } else if (nn->kind != NodeKind::access) {
            report.error(where, "open tunnel must terminate at access node (NN " + to_string(o.access_nn) +
                                    " is core)");
        }
    }
    for (const auto& [nn_id, p] : vn.al_policies) {
        const std::string where = base + "/al_policies/" + to_string(nn_id);
        const NetworkNode* nn = infra.find_node(nn_id);
        if (nn == nullptr) report.error(where, "access-link policy for unknown NN " + to_string(nn_id));
        else if (nn->kind != NodeKind::access)
            report.error(where, "access-link policy on core NN " + to_string(nn_id));
        if (p.pre_assigned && !(p.dl_qos.rate_bps > 0 || p.ul_qos.rate_bps > 0))
            report.warning(where, "pre-assigned access-link resource has no rate");
    }
    return report;
}

}  // namespace hopon
