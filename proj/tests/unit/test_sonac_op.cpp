#include <doctest.h>

#include <numeric>

#include "hopon/errors.hpp"
#include "hopon/scenario.hpp"
#include "hopon/sonac_op.hpp"
#include "support.hpp"

using namespace hopon;

namespace {

struct RefSlice {
    Scenario sc = hopon::test::reference();
    DeployedSlice slice = compose_slice(sc.slices[0], sc.infra, sc.policy, {});
};

Packet routed_packet(VnId vn, VnNodeId at, std::string destination = "B") {
    Packet p;
    p.id = 1;
    p.vn = vn;
    p.source = "A";
    p.destination = std::move(destination);
    p.size_bits = 12000;
    p.ttl = 16;
    p.header = VnRoutedHeader{at};
    return p;
}

const RouterConfig& router_serving(const DeployedSlice& slice, VnNodeId node) {
    for (const auto& [id, r] : slice.routers)
        if (r.serves(node)) return r;
    throw Error("no router serves node " + to_string(node));
}

// Weighted max-min fair shares with per-flow caps (progressive filling).
std::vector<double> water_fill(double budget, const std::vector<double>& w, const std::vector<double>& cap) {
    const std::size_t n = w.size();
    std::vector<double> out(n, 0.0);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return cap[a] / w[a] < cap[b] / w[b]; });
    double wsum = 0.0;
    for (double x : w) wsum += x;
    double left = budget;
    for (std::size_t i : idx) {
        const double fair = left * w[i] / wsum;
        out[i] = std::min(fair, cap[i]);
        left -= out[i];
        wsum -= w[i];
    }
    return out;
}

}  // namespace

TEST_CASE("destination-based headers keep only the VN id") {
    RefSlice f;
    const auto& m = f.slice.mappings.at(TunnelId{11});
    REQUIRE(m.format == MappingFormat::destination_based);
    const auto p = process_header(m, routed_packet(VnId{1}, VnNodeId{4}));
    REQUIRE(std::holds_alternative<LabeledHeader>(p.header));
    CHECK(std::get<LabeledHeader>(p.header).vn == VnId{1});
}

TEST_CASE("source-routed headers carry the NN list with the cursor at 0") {
    RefSlice f;
    auto policy = f.sc.policy;
    policy.overrides[{VnId{1}, TunnelId{11}}] = MappingFormat::source_routing;
    const auto& tunnel = f.sc.slices[0].tunnels.at(TunnelId{11});
    const auto m = map_tunnel(f.sc.slices[0], tunnel, f.sc.infra, policy);
    const auto p = process_header(m, routed_packet(VnId{1}, VnNodeId{4}));
    REQUIRE(std::holds_alternative<SourceRoutedHeader>(p.header));
    const auto& h = std::get<SourceRoutedHeader>(p.header);
    CHECK(h.path == std::vector<NnId>{NnId{11}, NnId{16}, NnId{17}});
    CHECK(h.cursor == 0);
}

TEST_CASE("encapsulation round-trips in every format and direction") {
    RefSlice f;
    const auto& vn = f.sc.slices[0];
    for (const auto format : {MappingFormat::ip_like, MappingFormat::source_routing, MappingFormat::destination_based,
                              MappingFormat::dedicated}) {
        auto policy = f.sc.policy;
        for (const auto& [id, t] : vn.tunnels) policy.overrides[{vn.id, id}] = format;
        for (const auto& [id, t] : vn.tunnels) {
            const auto m = map_tunnel(vn, t, f.sc.infra, policy);
            std::vector<VnNodeId> ends{t.egress};
            if (t.bidirectional) ends.push_back(t.ingress);
            for (const auto end : ends) {
                const auto original = routed_packet(vn.id, end);
                const auto wrapped = process_header(m, original);
                CHECK_FALSE(std::holds_alternative<VnRoutedHeader>(wrapped.header));
                const auto back = decapsulate(m, wrapped, end);
                CHECK(back.header == original.header);
            }
        }
    }
}

TEST_CASE("decapsulating a foreign header is a mismatch") {
    RefSlice f;
    const auto& m = f.slice.mappings.at(TunnelId{11});
    auto p = routed_packet(VnId{1}, VnNodeId{4});
    p.header = IpLikeHeader{NnId{17}, {}};
    CHECK_THROWS_WITH(decapsulate(m, p, VnNodeId{4}), doctest::Contains("mismatch"));
    CHECK_THROWS(process_header(m, process_header(m, routed_packet(VnId{1}, VnNodeId{4}))));
}

TEST_CASE("rate splitting follows residual capacity") {
    TunnelMapping m;
    m.format = MappingFormat::source_routing;
    m.paths.resize(2);
    const std::vector<double> residual{10e6, 30e6};
    const auto rates = split_rate(m, 8e6, residual);
    REQUIRE(rates.size() == 2);
    const double total = residual[0] + residual[1];
    for (std::size_t i = 0; i < 2; ++i) CHECK(rates[i] == doctest::Approx(8e6 * residual[i] / total).epsilon(1e-12));
    CHECK(rates[0] == doctest::Approx(2e6));
    CHECK(rates[1] == doctest::Approx(6e6));

    const std::vector<double> equal{5e6, 5e6};
    const auto even = split_rate(m, 3e6, equal);
    CHECK(even[0] == doctest::Approx(even[1]));
    CHECK(even[0] + even[1] == doctest::Approx(3e6));

    const std::vector<double> tight{1e6, 1e6};
    CHECK_THROWS(split_rate(m, 3e6, tight));

    m.paths.resize(1);
    const std::vector<double> one{4e6};
    CHECK(split_rate(m, 4e6, one) == std::vector<double>{4e6});
}

TEST_CASE("open tunnel selection intersects candidates with destinations") {
    RefSlice f;
    const auto& router3 = f.slice.routers.at(RouterId{3});
    std::uint64_t rr = 0;
    const std::vector<NnId> both{NnId{19}, NnId{20}};
    const auto multi = select_open_tunnels(router3, both, OpenTunnelMode::multicast, rr);
    REQUIRE(std::holds_alternative<OpenTunnelSet>(multi));
    CHECK(std::get<OpenTunnelSet>(multi).tunnels == std::vector<TunnelId>{TunnelId{13}, TunnelId{14}});

    const std::vector<NnId> one{NnId{20}};
    for (const auto mode : {OpenTunnelMode::multicast, OpenTunnelMode::multipath}) {
        const auto d = select_open_tunnels(router3, one, mode, rr);
        REQUIRE(std::holds_alternative<OpenTunnelSet>(d));
        CHECK(std::get<OpenTunnelSet>(d).tunnels == std::vector<TunnelId>{TunnelId{14}});
    }

    SUBCASE("multipath alternates") {
        std::vector<TunnelId> seen;
        for (int i = 0; i < 4; ++i)
            seen.push_back(std::get<OpenTunnelSet>(select_open_tunnels(router3, both, OpenTunnelMode::multipath, rr)).tunnels.at(0));
        CHECK(seen[0] != seen[1]);
        CHECK(seen[0] == seen[2]);
        CHECK(seen[1] == seen[3]);
    }
    SUBCASE("no open tunnel reaches the candidate") {
        auto trimmed = router3;
        trimmed.open_tunnel_table.erase(TunnelId{13});
        const std::vector<NnId> only19{NnId{19}};
        CHECK(select_open_tunnels(trimmed, only19, OpenTunnelMode::multicast, rr) ==
              ForwardingDecision{Drop{DropReason::no_open_tunnel}});
    }
}

TEST_CASE("router 1 forwards toward the anchor of a device in cluster 12") {
    RefSlice f;
    CmTree cm(f.sc.infra);
    (void)cm.register_device("B", NnId{19}, 0.0);
    RouterState state;
    RouteEnv env{&f.slice, &cm};
    auto p = routed_packet(VnId{1}, VnNodeId{1});
    const auto out = route_packet(f.slice.routers.at(RouterId{1}), state, p, env);
    CHECK(out.decision == ForwardingDecision{Forward{TunnelId{1}, VnNodeId{2}}});
    CHECK(out.anchor == VnNodeId{2});
    CHECK(out.resolution_messages > 0);

    SUBCASE("the cached entry answers the next packet") {
        auto q = routed_packet(VnId{1}, VnNodeId{1});
        const auto again = route_packet(f.slice.routers.at(RouterId{1}), state, q, env);
        CHECK(again.resolution_messages == 0);
        CHECK(again.decision == out.decision);
    }
    SUBCASE("the anchor router duplicates onto both open tunnels") {
        (void)cm.report_measurements("B", {{NnId{19}, -60}, {NnId{20}, -70}}, 0.0);
        RouterState s2;
        auto q = routed_packet(VnId{1}, VnNodeId{2});
        const auto at2 = route_packet(f.slice.routers.at(RouterId{2}), s2, q, env);
        REQUIRE(std::holds_alternative<OpenTunnelSet>(at2.decision));
        CHECK(std::get<OpenTunnelSet>(at2.decision).tunnels.size() == 2);
    }
}

TEST_CASE("a packet at its destination's anchor is delivered locally") {
    RefSlice f;
    CmTree cm(f.sc.infra);
    (void)cm.register_device("A", NnId{11}, 0.0);
    RouterState state;
    state.table.install(VnId{1}, "A", {VnNodeId{1}, LocationInfo{DomainId{1}, ClusterId{11}, NnId{11}, {}}, std::nullopt});
    RouteEnv env{&f.slice, &cm};
    auto p = routed_packet(VnId{1}, VnNodeId{1}, "A");
    const auto out = route_packet(f.slice.routers.at(RouterId{1}), state, p, env);
    CHECK(out.decision == ForwardingDecision{DeliverLocal{}});
    CHECK(out.location->nn == NnId{11});
}

TEST_CASE("unresolvable names and exhausted TTL are dropped") {
    RefSlice f;
    CmTree cm(f.sc.infra);
    RouterState state;
    RouteEnv env{&f.slice, &cm};
    auto p = routed_packet(VnId{1}, VnNodeId{1}, "ghost");
    CHECK(route_packet(f.slice.routers.at(RouterId{1}), state, p, env).decision ==
          ForwardingDecision{Drop{DropReason::unresolved}});
    (void)cm.register_device("B", NnId{19}, 0.0);
    auto q = routed_packet(VnId{1}, VnNodeId{1});
    q.ttl = 1;
    CHECK(route_packet(f.slice.routers.at(RouterId{1}), state, q, env).decision ==
          ForwardingDecision{Drop{DropReason::ttl_expired}});
}

TEST_CASE("a device in domain 2 is reached through the domain-2 anchor") {
    auto sc = hopon::test::reference();
    auto vn = sc.slices[0];
    vn.nodes[VnNodeId{6}] = VnNode{VnNodeId{6}, NnId{27}, AnchorScope{AnchorScope::Level::domain, 2}};
    vn.tunnels[TunnelId{20}] = Tunnel{TunnelId{20}, VnNodeId{4}, VnNodeId{6}, {5e6, {}, {}}, false};
    vn.tunnels[TunnelId{21}] = Tunnel{TunnelId{21}, VnNodeId{6}, VnNodeId{4}, {5e6, {}, {}}, false};
    const auto slice = compose_slice(vn, sc.infra, sc.policy, {});
    CmTree cm(sc.infra);
    (void)cm.register_device("D", NnId{21}, 0.0);

    // Replay: resolve once, translate to the domain-2 anchor, then follow tables.
    const auto& router2 = router_serving(slice, VnNodeId{2});
    const auto loc = cm.resolve(router2.cm, "D", Granularity::cluster).location;
    CHECK(loc.domain == DomainId{2});
    const auto anchor = anchor_for_location(vn, sc.infra, loc, Granularity::cluster);
    REQUIRE(anchor == VnNodeId{6});
    std::vector<TunnelId> expected;
    VnNodeId at{2};
    while (at != *anchor) {
        const auto t = router_serving(slice, at).routing_table.lookup(*anchor);
        REQUIRE(t);
        expected.push_back(*t);
        at = router_serving(slice, at).tunnel_table.at(*t).egress;
        REQUIRE(expected.size() <= vn.nodes.size());
    }

    std::vector<TunnelId> taken;
    std::map<RouterId, RouterState> states;
    RouteEnv env{&slice, &cm};
    at = VnNodeId{2};
    for (int guard = 0; guard < 10; ++guard) {
        const auto& r = router_serving(slice, at);
        auto p = routed_packet(vn.id, at, "D");
        const auto out = route_packet(r, states[r.id], p, env);
        if (std::holds_alternative<DeliverLocal>(out.decision)) break;
        REQUIRE(std::holds_alternative<Forward>(out.decision));
        taken.push_back(std::get<Forward>(out.decision).tunnel);
        at = std::get<Forward>(out.decision).egress;
    }
    CHECK(taken == expected);
    CHECK(at == VnNodeId{6});
}

TEST_CASE("drr allocation equals weighted max-min fair shares") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = hopon::test::pick(rng, 1, 8);
        std::vector<double> w;
        std::vector<double> cap;
        for (int i = 0; i < n; ++i) {
            w.push_back(hopon::test::uniform(rng, 1e4, 1e6));
            cap.push_back(hopon::test::uniform(rng, 0, 50000));
        }
        const double budget = hopon::test::uniform(rng, 0, 150000);
        const auto got = drr_allocate(budget, w, cap, static_cast<std::size_t>(trial));
        const auto want = water_fill(budget, w, cap);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-6));
            CHECK(got[i] <= cap[i] + 1e-6);
            sum += got[i];
        }
        CHECK(sum <= budget + 1e-6);
    }
}

TEST_CASE("a saturated device drains at its CoS rate inside a larger partition") {
    AccessLinkScheduler al(20e6, 0.001);
    al.set_vn(VnId{1}, 1e6, 1);
    al.add_device("B", VnId{1}, 500e3);
    for (std::uint64_t i = 0; i < 200; ++i) al.enqueue("B", i, 12000);
    double bits = 0.0;
    for (int slot = 0; slot < 1000; ++slot)
        for (const auto& g : al.schedule_slot().grants) bits += g.bits;
    CHECK(bits == doctest::Approx(500e3).epsilon(1e-9));
}

TEST_CASE("empty queues get no grants") {
    AccessLinkScheduler al(20e6, 0.001);
    al.set_vn(VnId{1}, 1e6, 1);
    al.add_device("B", VnId{1}, 500e3);
    const auto r = al.schedule_slot();
    CHECK(r.grants.empty());
    CHECK(r.completed.empty());
    CHECK(r.capacity_bits == doctest::Approx(20e3));
}

TEST_CASE("two identical devices in one partition complete the same number of packets") {
    // Reference: classic packet DRR with one quantum per round.
    const double quantum = 1e6 * 0.001 / 2;
    std::array<double, 2> deficit{0, 0};
    std::array<int, 2> ref_done{0, 0};
    for (int round = 0; round < 2000; ++round)
        for (int i = 0; i < 2; ++i) {
            deficit[i] += quantum;
            while (deficit[i] >= 12000) {
                deficit[i] -= 12000;
                ++ref_done[i];
            }
        }

    AccessLinkScheduler al(1e6, 0.001);
    al.set_vn(VnId{1}, 1e6, 1);
    al.add_device("B", VnId{1}, 500e3);
    al.add_device("C", VnId{1}, 500e3);
    for (std::uint64_t i = 0; i < 400; ++i) {
        al.enqueue("B", i, 12000);
        al.enqueue("C", 1000 + i, 12000);
    }
    std::map<std::string, int> done;
    for (int slot = 0; slot < 2000; ++slot)
        for (const auto& [dev, handle] : al.schedule_slot().completed) ++done[dev];
    CHECK(std::abs(done["B"] - done["C"]) <= 1);
    CHECK(std::abs(done["B"] - ref_done[0]) <= 1);
    CHECK(std::abs(done["C"] - ref_done[1]) <= 1);
}

TEST_CASE("scheduler conservation and partition guarantee under random load") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const double cap = hopon::test::uniform(rng, 2e6, 20e6);
        AccessLinkScheduler al(cap, 0.001);
        const double partition = hopon::test::uniform(rng, 0.1, 0.5) * cap;
        al.set_vn(VnId{1}, partition, 1);
        al.set_vn(VnId{2}, 0, hopon::test::pick(rng, 1, 4));
        al.add_device("p", VnId{1}, 0);
        const int others = hopon::test::pick(rng, 1, 5);
        for (int i = 0; i < others; ++i)
            al.add_device("o" + std::to_string(i), VnId{2}, hopon::test::uniform(rng, 1e5, cap));
        std::uint64_t handle = 0;
        double partition_bits = 0.0;
        for (int slot = 0; slot < 200; ++slot) {
            while (al.backlog_bits("p") < cap * 0.002) al.enqueue("p", handle++, 12000);
            for (int i = 0; i < others; ++i) {
                const auto name = "o" + std::to_string(i);
                if (hopon::test::pick(rng, 0, 1) == 1) al.enqueue(name, handle++, hopon::test::uniform(rng, 1000, 30000));
            }
            const auto r = al.schedule_slot();
            double sum = 0.0;
            for (const auto& g : r.grants) {
                sum += g.bits;
                if (g.device == "p") partition_bits += g.bits;
            }
            CHECK(sum <= r.capacity_bits * (1 + 1e-12));
        }
        CHECK(partition_bits >= partition * 0.2 * 0.99);
    }
}

TEST_CASE("endpoint routing entries expire") {
    EndpointRoutingTable t;
    t.install(VnId{1}, "B", {VnNodeId{2}, {}, 5.0});
    CHECK(t.lookup(VnId{1}, "B", 4.9) != nullptr);
    CHECK(t.lookup(VnId{1}, "B", 5.0) == nullptr);
    CHECK(t.size() == 0);
}
