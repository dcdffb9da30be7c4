#pragma once

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "hopon/infra.hpp"
#include "hopon/json_io.hpp"
#include "hopon/scenario.hpp"

namespace hopon::test {

inline std::string fixture_dir() {
    if (const char* env = std::getenv("HOPON_FIXTURE_DIR")) return env;
    return HOPON_FIXTURE_DIR;
}

inline std::string fixture(const std::string& name) { return fixture_dir() + "/" + name; }

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream out;
    out << f.rdbuf();
    return out.str();
}

inline Scenario reference() { return load_scenario(fixture("reference.scn")); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int pick(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Single-domain infrastructure of `n` core NNs (ids 1..n) with the given links.
inline Infrastructure core_graph(int n, const std::vector<std::tuple<int, int, double>>& edges, double cap = 1e8) {
    std::vector<NetworkNode> nodes;
    for (int i = 1; i <= n; ++i) {
        NetworkNode node;
        node.id = NnId{i};
        node.domain = DomainId{1};
        nodes.push_back(node);
    }
    std::vector<Link> links;
    int id = 1;
    for (const auto& [a, b, d] : edges) {
        Link l;
        l.id = LinkId{id++};
        l.a = NnId{a};
        l.b = NnId{b};
        l.capacity_bps = cap;
        l.prop_delay_s = d;
        links.push_back(l);
    }
    return Infrastructure::build(nodes, links, {});
}

}  // namespace hopon::test
