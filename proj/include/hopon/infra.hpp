#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hopon/ids.hpp"
#include "hopon/json_io.hpp"
#include "hopon/validation.hpp"

namespace hopon {

enum class NodeKind { core, access };
enum class LinkKind { wired, wireless };

/// Access-link capacity assumed for access nodes that do not declare one.
inline constexpr double kDefaultAlCapacityBps = 20e6;

struct NetworkNode {
    NnId id;
    NodeKind kind = NodeKind::core;
    std::optional<ClusterId> cluster;
    DomainId domain;
    double cloud_units = 0.0;
    /// Radio access-link capacity, per direction. Only meaningful for access nodes.
    double al_capacity_bps = kDefaultAlCapacityBps;

    friend bool operator==(const NetworkNode&, const NetworkNode&) = default;
};

struct Link {
    LinkId id;
    NnId a;
    NnId b;
    double capacity_bps = 0.0;
    double prop_delay_s = 0.0;
    LinkKind kind = LinkKind::wired;

    [[nodiscard]] NnId other(NnId end) const { return end == a ? b : a; }

    friend bool operator==(const Link&, const Link&) = default;
};

struct Cluster {
    ClusterId id;
    DomainId domain;
    std::vector<NnId> members;

    friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct Domain {
    DomainId id;
    std::vector<ClusterId> clusters;
    std::vector<NnId> members;

    friend bool operator==(const Domain&, const Domain&) = default;
};

struct Adjacency {
    NnId neighbor;
    LinkId link;

    friend bool operator==(const Adjacency&, const Adjacency&) = default;
};

/// Physical network: nodes, links, RAN clusters and domains. Immutable once
/// built; every collection is ordered by id.
class Infrastructure {
public:
    Infrastructure() = default;

    /// Links the pieces together. Throws ParseError on duplicate ids,
    /// dangling references, self-loops or non-positive capacities.
    static Infrastructure build(std::vector<NetworkNode> nodes, std::vector<Link> links,
                                std::vector<Cluster> clusters);

    [[nodiscard]] const std::map<NnId, NetworkNode>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::map<LinkId, Link>& links() const noexcept { return links_; }
    [[nodiscard]] const std::map<ClusterId, Cluster>& clusters() const noexcept { return clusters_; }
    [[nodiscard]] const std::map<DomainId, Domain>& domains() const noexcept { return domains_; }

    [[nodiscard]] const NetworkNode* find_node(NnId id) const;
    [[nodiscard]] const NetworkNode& node(NnId id) const;
    [[nodiscard]] const Link& link(LinkId id) const;
    [[nodiscard]] const Cluster* find_cluster(ClusterId id) const;
    [[nodiscard]] bool has_domain(DomainId id) const { return domains_.contains(id); }

    /// Neighbors of `id`, sorted by neighbor id then link id.
    [[nodiscard]] std::span<const Adjacency> adjacency(NnId id) const;

    /// Lowest-id link joining a and b, if any.
    [[nodiscard]] const Link* link_between(NnId a, NnId b) const;

    friend bool operator==(const Infrastructure&, const Infrastructure&) = default;

private:
    std::map<NnId, NetworkNode> nodes_;
    std::map<LinkId, Link> links_;
    std::map<ClusterId, Cluster> clusters_;
    std::map<DomainId, Domain> domains_;
    std::map<NnId, std::vector<Adjacency>> adjacency_;
};

/// Reads the `infrastructure` section of a scenario document.
Infrastructure load_infrastructure(const Json& section, const std::string& path = "/infrastructure");

Json to_json(const Infrastructure& infra);

ValidationReport validate_infrastructure(const Infrastructure& infra);

struct PhysicalPath {
    std::vector<NnId> nodes;
    std::vector<LinkId> links;
    double delay_s = 0.0;

    [[nodiscard]] std::size_t hops() const { return links.size(); }

    friend bool operator==(const PhysicalPath&, const PhysicalPath&) = default;
};

/// Up to k loop-free paths from src to dst, ordered by (total propagation
/// delay, hop count, node sequence). Throws NoPathError when dst is not
/// reachable and Error on bad arguments.
std::vector<PhysicalPath> physical_paths(const Infrastructure& infra, NnId src, NnId dst, std::size_t k);

/// Single-node path when src == dst, otherwise physical_paths(..., 1).front().
PhysicalPath shortest_path(const Infrastructure& infra, NnId src, NnId dst);

const char* to_string(NodeKind kind);
const char* to_string(LinkKind kind);

}  // namespace hopon
