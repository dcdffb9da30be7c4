#include "hopon/infra.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <set>

#include "hopon/errors.hpp"

namespace hopon {

const char* to_string(NodeKind kind) { return kind == NodeKind::core ? "core" : "access"; }
const char* to_string(LinkKind kind) { return kind == LinkKind::wired ? "wired" : "wireless"; }

Infrastructure Infrastructure::build(std::vector<NetworkNode> nodes, std::vector<Link> links,
                                     std::vector<Cluster> clusters) {
    if (nodes.empty()) throw ParseError("/infrastructure/nodes", "no nodes");
    Infrastructure infra;
    for (auto& c : clusters) {
        c.members.clear();
        if (!infra.clusters_.emplace(c.id, c).second)
            throw ParseError("/infrastructure/clusters", "duplicate cluster id " + to_string(c.id));
    }
    for (const auto& n : nodes) {
        if (n.cloud_units < 0) throw ParseError("/infrastructure/nodes", "negative cloud_units on NN " + to_string(n.id));
        if (n.al_capacity_bps <= 0)
            throw ParseError("/infrastructure/nodes", "al_capacity_bps must be positive on NN " + to_string(n.id));
        if (n.cluster && !infra.clusters_.contains(*n.cluster))
            throw ParseError("/infrastructure/nodes",
                             "NN " + to_string(n.id) + " references unknown cluster " + to_string(*n.cluster));
        if (!infra.nodes_.emplace(n.id, n).second)
            throw ParseError("/infrastructure/nodes", "duplicate node id " + to_string(n.id));
    }
    for (const auto& l : links) {
        for (NnId end : {l.a, l.b}) {
            if (!infra.nodes_.contains(end))
                throw ParseError("/infrastructure/links",
                                 "link " + to_string(l.id) + " references unknown NN " + to_string(end));
        }
        if (l.a == l.b) throw ParseError("/infrastructure/links", "link " + to_string(l.id) + " is a self-loop");
        if (!(l.capacity_bps > 0))
            throw ParseError("/infrastructure/links", "link " + to_string(l.id) + " capacity must be positive");
        if (l.prop_delay_s < 0)
            throw ParseError("/infrastructure/links", "link " + to_string(l.id) + " delay must be non-negative");
        if (!infra.links_.emplace(l.id, l).second)
            throw ParseError("/infrastructure/links", "duplicate link id " + to_string(l.id));
    }

    for (const auto& [id, c] : infra.clusters_) {
        auto& d = infra.domains_[c.domain];
        d.id = c.domain;
        d.clusters.push_back(id);
    }
    for (const auto& [id, n] : infra.nodes_) {
        auto& d = infra.domains_[n.domain];
        d.id = n.domain;
        d.members.push_back(id);
        if (n.cluster) infra.clusters_.at(*n.cluster).members.push_back(id);
        infra.adjacency_[id];
    }
    for (const auto& [id, l] : infra.links_) {
        infra.adjacency_[l.a].push_back({l.b, id});
        infra.adjacency_[l.b].push_back({l.a, id});
    }
    for (auto& [id, adj] : infra.adjacency_) {
        std::sort(adj.begin(), adj.end(), [](const Adjacency& x, const Adjacency& y) {
            return std::pair(x.neighbor, x.link) < std::pair(y.neighbor, y.link);
        });
    }
    return infra;
}

const NetworkNode* Infrastructure::find_node(NnId id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
}

const NetworkNode& Infrastructure::node(NnId id) const {
    const auto* n = find_node(id);
    if (n == nullptr) throw Error("unknown NN " + to_string(id));
    return *n;
}

const Link& Infrastructure::link(LinkId id) const {
    auto it = links_.find(id);
    if (it == links_.end()) throw Error("unknown link " + to_string(id));
    return it->second;
}

const Cluster* Infrastructure::find_cluster(ClusterId id) const {
    auto it = clusters_.find(id);
    return it == clusters_.end() ? nullptr : &it->second;
}

std::span<const Adjacency> Infrastructure::adjacency(NnId id) const {
    auto it = adjacency_.find(id);
    if (it == adjacency_.end()) return {};
    return it->second;
}

const Link* Infrastructure::link_between(NnId a, NnId b) const {
    for (const auto& adj : adjacency(a))
        if (adj.neighbor == b) return &links_.at(adj.link);
    return nullptr;
}

Infrastructure load_infrastructure(const Json& section, const std::string& path) {
    DocReader doc(section, path);
    std::vector<NetworkNode> nodes;
    std::vector<Link> links;
    std::vector<Cluster> clusters;

    const Json& node_list = doc.array("nodes");
    for (std::size_t i = 0; i < node_list.size(); ++i) {
        DocReader r(node_list[i], doc.child("nodes") + "/" + std::to_string(i));
        NetworkNode n;
        n.id = r.id<NnId>("id");
        const std::string kind = r.string("kind");
        if (kind == "core") n.kind = NodeKind::core;
        else if (kind == "access") n.kind = NodeKind::access;
        else throw ParseError(r.child("kind"), "expected \"core\" or \"access\"");
        if (auto c = r.opt_integer("cluster")) n.cluster = ClusterId{*c};
        n.domain = r.id<DomainId>("domain");
        n.cloud_units = r.number_or("cloud_units", 0.0);
        n.al_capacity_bps = r.number_or("al_capacity_bps", kDefaultAlCapacityBps);
        r.finish();
        nodes.push_back(n);
    }
    if (const Json* link_list = doc.opt_array("links")) {
        for (std::size_t i = 0; i < link_list->size(); ++i) {
            DocReader r((*link_list)[i], doc.child("links") + "/" + std::to_string(i));
            Link l;
            l.id = r.id<LinkId>("id");
            l.a = r.id<NnId>("a");
            l.b = r.id<NnId>("b");
            l.capacity_bps = r.number("capacity_bps");
            l.prop_delay_s = r.number("delay_s");
            const std::string kind = r.string_or("kind", "wired");
            if (kind == "wired") l.kind = LinkKind::wired;
            else if (kind == "wireless") l.kind = LinkKind::wireless;
            else throw ParseError(r.child("kind"), "expected \"wired\" or \"wireless\"");
            r.finish();
            links.push_back(l);
        }
    }
    if (const Json* cluster_list = doc.opt_array("clusters")) {
        for (std::size_t i = 0; i < cluster_list->size(); ++i) {
            DocReader r((*cluster_list)[i], doc.child("clusters") + "/" + std::to_string(i));
            Cluster c;
            c.id = r.id<ClusterId>("id");
            c.domain = r.id<DomainId>("domain");
            r.finish();
            clusters.push_back(c);
        }
    }
    doc.finish();
    return Infrastructure::build(std::move(nodes), std::move(links), std::move(clusters));
}

Json to_json(const Infrastructure& infra) {
    Json nodes = Json::array();
    for (const auto& [id, n] : infra.nodes()) {
        Json j{{"id", id.value},
               {"kind", to_string(n.kind)},
               {"domain", n.domain.value},
               {"cloud_units", n.cloud_units},
               {"al_capacity_bps", n.al_capacity_bps}};
        if (n.cluster) j["cluster"] = n.cluster->value;
        nodes.push_back(std::move(j));
    }
    Json links = Json::array();
    for (const auto& [id, l] : infra.links()) {
        links.push_back({{"id", id.value},
                         {"a", l.a.value},
                         {"b", l.b.value},
                         {"capacity_bps", l.capacity_bps},
                         {"delay_s", l.prop_delay_s},
                         {"kind", to_string(l.kind)}});
    }
    Json clusters = Json::array();
    for (const auto& [id, c] : infra.clusters()) clusters.push_back({{"id", id.value}, {"domain", c.domain.value}});
    return Json{{"nodes", nodes}, {"links", links}, {"clusters", clusters}};
}

namespace {

// Union-find over NN ids.
class DisjointSets {
public:
    NnId find(NnId x) {
        auto it = parent_.find(x);
        if (it == parent_.end()) {
            parent_[x] = x;
            return x;
        }
        if (it->second == x) return x;
        NnId root = find(it->second);
        parent_[x] = root;
        return root;
    }
    void unite(NnId a, NnId b) { parent_[find(a)] = find(b); }

private:
    std::map<NnId, NnId> parent_;
};

}  // namespace

ValidationReport validate_infrastructure(const Infrastructure& infra) {
    ValidationReport report;
    for (const auto& [id, n] : infra.nodes()) {
        const std::string where = "/infrastructure/nodes/" + to_string(id);
        if (n.kind == NodeKind::access && !n.cluster) {
            report.error(where, "access NN " + to_string(id) + " is not in any cluster");
        }
        if (n.kind == NodeKind::core && n.cluster) {
            report.error(where, "core NN " + to_string(id) + " must not belong to a cluster");
        }
        if (n.cluster) {
            const auto* c = infra.find_cluster(*n.cluster);
            if (c != nullptr && c->domain != n.domain) {
                report.error(where, "NN " + to_string(id) + " is in domain " + to_string(n.domain) + " but its cluster " +
                                        to_string(*n.cluster) + " is in domain " + to_string(c->domain));
            }
        }
    }
    for (const auto& [id, c] : infra.clusters()) {
        if (c.members.empty())
            report.warning("/infrastructure/clusters/" + to_string(id), "cluster " + to_string(id) + " has no members");
    }
    for (const auto& [did, d] : infra.domains()) {
        if (d.members.size() < 2) continue;
        DisjointSets sets;
        for (NnId m : d.members) sets.find(m);
        for (const auto& [lid, l] : infra.links()) {
            if (infra.node(l.a).domain == did && infra.node(l.b).domain == did) sets.unite(l.a, l.b);
        }
        const NnId root = sets.find(d.members.front());
        for (NnId m : d.members) {
            if (sets.find(m) != root) {
                report.warning("/infrastructure/domains/" + to_string(did),
                               "domain " + to_string(did) + " link graph is disconnected (NN " + to_string(m) +
                                   " unreachable from NN " + to_string(d.members.front()) + ")");
                break;
            }
        }
    }
    return report;
}

namespace {

struct Partial {
    double delay = 0.0;
    std::vector<NnId> nodes;
    std::vector<LinkId> links;
};

// Total order used for ranking; extending a path never makes it compare lower,
// so a best-first search emits complete paths already sorted.
bool ranks_before(const Partial& x, const Partial& y) {
    if (x.delay != y.delay) return x.delay < y.delay;
    if (x.links.size() != y.links.size()) return x.links.size() < y.links.size();
    if (x.nodes != y.nodes) return x.nodes < y.nodes;
    return x.links < y.links;
}

struct RankAfter {
    bool operator()(const Partial& x, const Partial& y) const { return ranks_before(y, x); }
};

bool reachable(const Infrastructure& infra, NnId src, NnId dst) {
    std::set<NnId> seen{src};
    std::vector<NnId> stack{src};
    while (!stack.empty()) {
        NnId cur = stack.back();
        stack.pop_back();
        if (cur == dst) return true;
        for (const auto& adj : infra.adjacency(cur))
            if (seen.insert(adj.neighbor).second) stack.push_back(adj.neighbor);
    }
    return false;
}

}  // namespace

std::vector<PhysicalPath> physical_paths(const Infrastructure& infra, NnId src, NnId dst, std::size_t k) {
    if (infra.find_node(src) == nullptr) throw Error("unknown source NN " + to_string(src));
    if (infra.find_node(dst) == nullptr) throw Error("unknown destination NN " + to_string(dst));
    if (src == dst) throw Error("source and destination NN are both " + to_string(src));
    if (!reachable(infra, src, dst))
        throw NoPathError("no physical path from NN " + to_string(src) + " to NN " + to_string(dst));

    std::vector<PhysicalPath> out;
    if (k == 0) return out;
    std::priority_queue<Partial, std::vector<Partial>, RankAfter> frontier;
    frontier.push(Partial{0.0, {src}, {}});
    while (!frontier.empty() && out.size() < k) {
        Partial cur = frontier.top();
        frontier.pop();
        const NnId tail = cur.nodes.back();
        if (tail == dst) {
            out.push_back(PhysicalPath{cur.nodes, cur.links, cur.delay});
            continue;
        }
        for (const auto& adj : infra.adjacency(tail)) {
            if (std::find(cur.nodes.begin(), cur.nodes.end(), adj.neighbor) != cur.nodes.end()) continue;
            Partial next = cur;
            next.delay += infra.link(adj.link).prop_delay_s;
            next.nodes.push_back(adj.neighbor);
            next.links.push_back(adj.link);
            frontier.push(std::move(next));
        }
    }
    return out;
}

PhysicalPath shortest_path(const Infrastructure& infra, NnId src, NnId dst) {
    if (src == dst) {
        (void)infra.node(src);  // throws on unknown NN
        return PhysicalPath{{src}, {}, 0.0};
    }
    return physical_paths(infra, src, dst, 1).front();
}

}  // namespace hopon
