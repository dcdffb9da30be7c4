#include <doctest.h>

#include <queue>

#include "hopon/engine.hpp"
#include "hopon/errors.hpp"
#include "hopon/json_io.hpp"
#include "support.hpp"

using namespace hopon;

namespace {

Scenario load(const std::string& name) { return load_scenario(hopon::test::fixture(name)); }

std::string metrics_text(const MetricsReport& m) { return dump_canonical(to_json(m)); }

// Dijkstra over link delays, independent of the library's path search.
double min_delay(const Infrastructure& infra, NnId from, NnId to) {
    std::map<NnId, double> dist;
    using Item = std::pair<double, NnId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[from] = 0.0;
    pq.emplace(0.0, from);
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        for (const auto& [id, l] : infra.links()) {
            NnId v;
            if (l.a == u) v = l.b;
            else if (l.b == u) v = l.a;
            else continue;
            const double nd = d + l.prop_delay_s;
            if (!dist.contains(v) || nd < dist[v]) {
                dist[v] = nd;
                pq.emplace(nd, v);
            }
        }
    }
    return dist.at(to);
}

void check_conservation(const MetricsReport& m) {
    for (const auto& [vn, v] : m.vns) CHECK(v.sent == v.delivered + v.dropped_total() + v.in_flight);
    for (const auto& [key, l] : m.links) {
        CHECK(l.mean_utilization >= 0.0);
        CHECK(l.peak_utilization <= 1.0 + 1e-12);
        CHECK(l.mean_utilization <= l.peak_utilization + 1e-12);
    }
}

Scenario mobile_three_moves() {
    auto sc = load("fixed_hop_on.scn");
    sc.run.duration_s = 10;
    sc.devices.clear();
    DeviceSpec s{"S", DeviceKind::server, VnId{1}, NnId{17}, {}, std::nullopt, 0.0};
    DeviceSpec b{"B", DeviceKind::mobile, VnId{1}, NnId{19}, {}, std::nullopt, 0.0};
    b.trace = {{2.0, NnId{12}, {}}, {4.0, NnId{19}, {}}, {5.0, NnId{20}, {}}, {6.0, NnId{11}, {}}};
    sc.devices = {s, b};
    TrafficSpec t;
    t.src = "B";
    t.dst = "S";
    t.rate_bps = 24000;
    t.size_bits = 12000;
    t.start_s = 0.5;
    t.stop_s = 9;
    sc.traffic = {t};
    return sc;
}

}  // namespace

TEST_CASE("a scenario without traffic reports registration signaling only") {
    auto sc = load("fixed_hop_on.scn");
    sc.traffic.clear();
    const auto m = run_scenario(sc);
    for (const auto& [vn, v] : m.vns) {
        CHECK(v.sent == 0);
        CHECK(v.delivered == 0);
        CHECK(v.dropped_total() == 0);
        CHECK(v.latency.count == 0);
    }
    CHECK(m.signaling.registration == 14);
    CHECK(m.signaling.cm == 0);
    CHECK(m.signaling.al == 0);
    CHECK(m.signaling.session_baseline == 0);
}

TEST_CASE("fixed endpoints with pre-assigned shared AL send signaling-free") {
    const auto sc = load("fixed_hop_on.scn");
    const auto m = run_scenario(sc);
    const auto& v = m.vns.at(VnId{1});
    CHECK(v.sent == 23);
    CHECK(v.delivered == 23);
    CHECK(m.devices.at("B").delivery_ratio() == 1.0);
    CHECK(m.devices.at("A").delivery_ratio() == 1.0);
    CHECK(m.signaling.registration == 7 * sc.devices.size());
    CHECK(m.signaling.cm + m.signaling.al + m.signaling.session_baseline == 0);
    check_conservation(m);
}

TEST_CASE("delivered latency is bounded below by propagation delay") {
    for (const auto* name : {"fixed_hop_on.scn", "reference.scn", "handover_multicast.scn"}) {
        const auto sc = load(name);
        std::vector<TraceRow> rows;
        const auto m = run_scenario(sc, &rows);
        check_conservation(m);
        std::map<PacketId, double> emitted;
        std::map<std::string, NnId> home;
        for (const auto& d : sc.devices) home[d.name] = d.nn;
        for (const auto& r : rows) {
            if (r.event == "emit") emitted[r.packet] = r.time;
            if (r.event != "delivered") continue;
            const auto* dst = sc.find_device(r.dst);
            // Mobile receivers may sit elsewhere; bound them by their nearest possible NN.
            double bound = std::numeric_limits<double>::infinity();
            std::vector<NnId> spots{dst->nn};
            for (const auto& st : dst->trace) spots.push_back(st.nn);
            const auto* src = sc.find_device(r.src);
            std::vector<NnId> origins{src->nn};
            for (const auto& st : src->trace) origins.push_back(st.nn);
            for (auto o : origins)
                for (auto s : spots) bound = std::min(bound, min_delay(sc.infra, o, s));
            CHECK(r.time - emitted.at(r.packet) >= bound - 1e-12);
        }
    }
}

TEST_CASE("runs are deterministic and stepping matches a full run") {
    for (const auto* name : {"reference.scn", "handover_multicast.scn", "dedicated.scn"}) {
        const auto sc = load(name);
        const auto once = metrics_text(run_scenario(sc));
        CHECK(once == metrics_text(run_scenario(sc)));

        Engine engine(sc);
        std::uint64_t steps = 0;
        double last = 0.0;
        while (engine.step()) {
            ++steps;
            CHECK(engine.now() >= last);
            last = engine.now();
        }
        CHECK(engine.finished());
        CHECK_FALSE(engine.step());
        const auto stepped = engine.metrics();
        CHECK(stepped.events_processed == steps);
        CHECK(metrics_text(stepped) == once);
    }
}

TEST_CASE("a different seed changes jittered traffic") {
    auto sc = load("reference.scn");
    for (auto& t : sc.traffic) t.jitter_s = 0.01;
    const auto a = metrics_text(run_scenario(sc));
    sc.run.seed = 8;
    CHECK(a != metrics_text(run_scenario(sc)));
}

TEST_CASE("a single registration event then the end") {
    auto sc = load("fixed_hop_on.scn");
    sc.traffic.clear();
    sc.devices.resize(1);
    Engine engine(sc);
    CHECK(engine.step());
    CHECK_FALSE(engine.step());
    CHECK(engine.metrics().events_processed == 1);
}

TEST_CASE("equal-time events keep their creation order") {
    auto sc = load("fixed_hop_on.scn");
    TrafficSpec a2b;
    a2b.src = "A";
    a2b.dst = "B";
    a2b.schedule = {2.0};
    a2b.size_bits = 1000;
    TrafficSpec b2a = a2b;
    b2a.src = "B";
    b2a.dst = "A";
    sc.traffic = {a2b, b2a};
    for (int run = 0; run < 3; ++run) {
        std::vector<TraceRow> rows;
        (void)run_scenario(sc, &rows);
        std::vector<std::string> order;
        for (const auto& r : rows)
            if (r.event == "emit") order.push_back(r.src);
        CHECK(order == std::vector<std::string>{"A", "B"});
        for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].time >= rows[i - 1].time);
    }
    std::swap(sc.traffic[0], sc.traffic[1]);
    std::vector<TraceRow> rows;
    (void)run_scenario(sc, &rows);
    CHECK(std::find_if(rows.begin(), rows.end(), [](const TraceRow& r) { return r.event == "emit"; })->src == "B");
}

TEST_CASE("baseline session signaling is N per establishment") {
    auto sc = load("fixed_hop_on.scn");
    const int n = sc.baseline.session_messages;
    REQUIRE(n == 10);

    SUBCASE("one flow, no mobility") {
        sc.traffic.resize(1);
        const auto base = run_baseline(sc);
        CHECK(base.signaling.session_baseline == 1 * n);
        CHECK(run_scenario(sc).signaling.session_baseline == 0);
    }
    SUBCASE("idle gap forces a second setup") {
        // A->B once, B->A three times then again after a 47 s gap.
        const auto base = run_baseline(sc);
        CHECK(base.signaling.session_baseline == static_cast<std::uint64_t>(n * (1 + 2)));
    }
    SUBCASE("three inter-cluster moves") {
        const auto mob = mobile_three_moves();
        // Clusters along the trace: 12, 11, 12, 12, 11; the 19->20 step stays put.
        int crossings = 0;
        ClusterId at = *mob.infra.node(mob.devices[1].nn).cluster;
        for (const auto& st : mob.devices[1].trace) {
            const auto c = *mob.infra.node(st.nn).cluster;
            if (c != at) ++crossings;
            at = c;
        }
        REQUIRE(crossings == 3);
        const auto base = run_baseline(mob);
        CHECK(base.signaling.session_baseline == static_cast<std::uint64_t>(n * (1 + crossings)));
        const auto hop = run_scenario(mob);
        CHECK(hop.signaling.session_baseline == 0);
        CHECK(hop.signaling.total() <= base.signaling.total());
    }
}

TEST_CASE("baseline never signals less than hop-on") {
    for (const auto* name : {"reference.scn", "fixed_hop_on.scn", "handover_multicast.scn", "handover_single.scn",
                             "dedicated.scn"}) {
        auto sc = load(name);
        for (int n : {1, 3, 10}) {
            sc.baseline.session_messages = n;
            CHECK(run_scenario(sc).signaling.total() <= run_baseline(sc).signaling.total());
        }
    }
    const auto mob = mobile_three_moves();
    CHECK(run_scenario(mob).signaling.total() <= run_baseline(mob).signaling.total());
}

TEST_CASE("multicast open tunnels deliver through the handover; one tunnel does not") {
    const auto multi = run_scenario(load("handover_multicast.scn"));
    const auto single = run_scenario(load("handover_single.scn"));
    CHECK(multi.devices.at("B").delivery_ratio() == 1.0);
    CHECK(single.devices.at("B").delivery_ratio() < 1.0);
    CHECK(single.vns.at(VnId{1}).dropped.count(DropReason::stale) == 1);
    check_conservation(multi);
    check_conservation(single);
}

TEST_CASE("dedicated tunnels isolate latency from cross traffic") {
    const auto sc = load("dedicated.scn");
    const auto m = run_scenario(sc);
    const auto& v = m.vns.at(VnId{2});
    REQUIRE(v.latency.count > 0);
    const auto path = shortest_path(sc.infra, NnId{13}, NnId{17});
    const double rate = sc.find_slice(VnId{2})->tunnels.at(TunnelId{1}).qos.rate_bps;
    double closed = 0.0;
    for (const auto& l : path.links) closed += 12000.0 / rate + sc.infra.link(l).prop_delay_s;
    CHECK(v.latency.variance == 0.0);
    CHECK(std::abs(v.latency.min - closed) <= 1e-9);
    CHECK(std::abs(v.latency.max - closed) <= 1e-9);

    const auto twin = run_scenario(load("dedicated_shared_twin.scn"));
    CHECK(twin.vns.at(VnId{2}).latency.variance > 0.0);
}

TEST_CASE("metrics JSON carries the documented keys") {
    const auto j = to_json(run_scenario(load("fixed_hop_on.scn")));
    for (const auto* k : {"mode", "duration_s", "seed", "events_processed", "vns", "signaling", "links", "devices"})
        CHECK(j.contains(k));
    const auto& v = j.at("vns").at("1");
    for (const auto* k : {"sent", "delivered", "dropped", "in_flight", "latency"}) CHECK(v.contains(k));
    CHECK(j.at("signaling").at("per_packet").get<double>() == 0.0);
}

TEST_CASE("comparison JSON puts both modes side by side") {
    const auto sc = load("fixed_hop_on.scn");
    const auto j = comparison_json(run_scenario(sc), run_baseline(sc));
    CHECK(j.at("session_signaling").at("hop_on").get<int>() == 0);
    CHECK(j.at("session_signaling").at("session_baseline").get<int>() == 30);
    CHECK(j.contains("hop_on"));
    CHECK(j.contains("session_baseline"));
}

TEST_CASE("trace CSV header") {
    std::vector<TraceRow> rows;
    (void)run_scenario(load("fixed_hop_on.scn"), &rows);
    const auto csv = trace_csv(rows);
    CHECK(csv.rfind("packet_id,vn,src,dst,event,location,time_s,header\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(rows.size() + 1));
}
