// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../common/oracles.hpp"
#include "hopon/engine.hpp"
#include "hopon/errors.hpp"
#include "hopon/json_io.hpp"
#include "hopon/scenario.hpp"

namespace fs = std::filesystem;
using namespace hopon;

namespace {

std::string fixture_dir() {
    if (const char* env = std::getenv("HOPON_FIXTURE_DIR")) return env;
    return HOPON_FIXTURE_DIR;
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

Scenario load(const std::string& name) { return load_scenario(fixture_dir() + "/" + name); }

/// Collects failed expectations for one criterion.
struct Check {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

struct Criterion {
    int number;
    std::string title;
    std::string tolerance;
    std::function<std::string(Check&)> body;
};

// ---------------------------------------------------------------------------

std::string golden_reproduction(Check& c) {
    const auto sc = load("reference.scn");
    const auto docs = render_slice_documents(compose_slice(sc.slices[0], sc.infra, sc.policy, {}));
    const fs::path golden = fs::path(fixture_dir()) / "golden";
    int compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(golden)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), golden).generic_string();
        const auto it = docs.find(rel);
        c.expect(it != docs.end(), rel + " not emitted");
        if (it != docs.end()) c.expect(it->second == read_file(e.path()), rel + " differs from golden");
        ++compared;
    }
    c.expect(compared >= 12, "too few goldens");

    const auto r4 = Json::parse(docs.at("vn-1/routers/router-4.json"));
    c.expect(r4.at("routing_table").size() == 1 && r4.at("routing_table").contains("*"), "router 4 wildcard");
    const auto nn11 = Json::parse(docs.at("vn-1/nn/nn-11.json"));
    c.expect(nn11.at("forwarding").at("17").at("next_nn").get<int>() == 16, "NN 11 -> 17 via 16");
    const auto nn18 = Json::parse(docs.at("vn-1/nn/nn-18.json"));
    c.expect(!nn18.at("access_link").at("dl").at("pre_assigned").get<bool>(), "NN 18 pre-assignment NO");
    return std::to_string(compared) + " documents byte-identical";
}

std::string routing_oracle(Check& c) {
    std::mt19937_64 rng(2024);
    int composed = 0;
    int pairs = 0;
    while (composed < 200) {
        const auto sample = oracle::random_vn(rng, 10, 20);
        bool complete = true;
        std::map<std::int64_t, oracle::ExpectedTable> expected;
        for (const auto& [id, n] : sample.vn.nodes) {
            expected[id.value] = oracle::bfs_next_hops(sample.vn, static_cast<int>(id.value));
            complete = complete && expected[id.value].complete;
        }
        std::vector<RouterConfig> routers;
        try {
            routers = derive_router_configs(sample.vn, sample.infra);
        } catch (const CompositionError&) {
            c.expect(!complete, "rejected a VN whose routers all reach every destination");
            continue;
        }
        c.expect(complete, "accepted a VN with an unreachable destination");
        ++composed;
        for (const auto& r : routers) {
            const auto& exp = expected.at(r.served_vn_nodes.front().value);
            for (const auto& [dest, tunnel] : exp.next_tunnel)
                c.expect(r.routing_table.lookup(VnNodeId{dest}) == TunnelId{tunnel}, "next hop differs from BFS");
        }
        const auto hops = oracle::hop_matrix(sample.vn);
        for (const auto& [a, na] : sample.vn.nodes)
            for (const auto& [b, nb] : sample.vn.nodes) {
                if (a == b) continue;
                const int h = hops.at({static_cast<int>(a.value), static_cast<int>(b.value)});
                if (h >= std::numeric_limits<int>::max() / 4) continue;
                const auto walked = oracle::table_walk(routers, a, b);
                c.expect(walked.has_value(), "walk failed or looped");
                if (walked) c.expect(*walked <= static_cast<int>(sample.vn.nodes.size()), "walk too long");
                ++pairs;
            }
    }
    return std::to_string(composed) + " VNs, " + std::to_string(pairs) + " reachable pairs walked";
}

// Sessions a baseline run must set up: one per flow, plus one after every
// idle gap longer than the timeout.
int expected_sessions(const Scenario& sc) {
    std::map<std::pair<std::string, std::string>, std::vector<double>> times;
    for (const auto& t : sc.traffic) {
        auto& v = times[{t.src, t.dst}];
        if (!t.schedule.empty()) {
            for (double x : t.schedule)
                if (x <= sc.run.duration_s) v.push_back(x);
        } else {
            const double gap = t.size_bits / *t.rate_bps;
            for (int k = 0;; ++k) {
                const double x = t.start_s + k * gap;
                if (x >= t.stop_s || x > sc.run.duration_s) break;
                v.push_back(x);
            }
        }
    }
    int sessions = 0;
    for (auto& [flow, v] : times) {
        std::sort(v.begin(), v.end());
        for (std::size_t i = 0; i < v.size(); ++i)
            if (i == 0 || v[i] - v[i - 1] > sc.baseline.idle_timeout_s) ++sessions;
    }
    return sessions;
}

std::string signaling_free(Check& c) {
    const auto sc = load("fixed_hop_on.scn");
    const auto hop = run_scenario(sc);
    const auto base = run_baseline(sc);
    const auto cmp = comparison_json(hop, base);
    const auto& v = hop.vns.at(VnId{1});
    c.expect(v.sent > 0 && v.delivered == v.sent, "not every packet delivered");
    c.expect(hop.signaling.registration == 7 * sc.devices.size(), "registration is not 7 per device");
    c.expect(hop.signaling.cm + hop.signaling.al + hop.signaling.session_baseline == 0, "per-packet signaling");
    const int n = sc.baseline.session_messages;
    const auto expected = static_cast<std::uint64_t>(n * expected_sessions(sc));
    const auto col_base = cmp.at("session_signaling").at("session_baseline").get<std::uint64_t>();
    const auto col_hop = cmp.at("session_signaling").at("hop_on").get<std::uint64_t>();
    c.expect(col_hop == 0, "hop-on session column nonzero");
    c.expect(col_base == expected, "baseline session column " + std::to_string(col_base) + " != " +
                                       std::to_string(expected));
    c.expect(col_base >= 10, "baseline below 10");
    return "registration " + std::to_string(hop.signaling.registration) + " for " + std::to_string(sc.devices.size()) +
           " devices, per-packet 0 over " + std::to_string(v.sent) + " packets, baseline session " +
           std::to_string(col_base);
}

std::string handover_free(Check& c) {
    const auto multi = run_scenario(load("handover_multicast.scn"));
    const auto single = run_scenario(load("handover_single.scn"));
    const auto& dm = multi.devices.at("B");
    const auto& ds = single.devices.at("B");
    c.expect(dm.addressed_to > 0 && dm.delivered_to == dm.addressed_to, "multicast ratio is not 1.000");
    c.expect(ds.delivery_ratio() < 1.0, "single open tunnel ratio is not below 1");
    char buf[96];
    std::snprintf(buf, sizeof buf, "multicast %.3f (%llu/%llu), single %.3f", dm.delivery_ratio(),
                  static_cast<unsigned long long>(dm.delivered_to), static_cast<unsigned long long>(dm.addressed_to),
                  ds.delivery_ratio());
    return buf;
}

std::string budget_conservation(Check& c) {
    std::mt19937_64 rng(77);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const int n = std::uniform_int_distribution<int>(1, 16)(rng);
        std::vector<double> delays;
        for (int k = 0; k < n; ++k) delays.push_back(std::uniform_real_distribution<double>(1e-5, 5e-3)(rng));
        const double floor = std::accumulate(delays.begin(), delays.end(), 0.0);
        const double budget = floor * std::uniform_real_distribution<double>(1.0, 40.0)(rng) * n;
        for (auto split : {BudgetSplit::equal, BudgetSplit::delay_proportional}) {
            const auto shares = allocate_latency_budget(budget, delays, split);
            const double total = std::accumulate(shares.begin(), shares.end(), 0.0);
            const double rel = std::abs(total - budget) / budget;
            worst = std::max(worst, rel);
            c.expect(rel <= 1e-9, "sum off by " + std::to_string(rel));
        }
    }
    const std::vector<double> ms{1.0, 3.0};
    const auto ex = allocate_latency_budget(100.0, ms, BudgetSplit::delay_proportional);
    c.expect(ex == std::vector<double>{25.0, 75.0}, "100 ms over (1, 3) ms is not (25, 75) ms");
    char buf[96];
    std::snprintf(buf, sizeof buf, "2000 splits, worst relative error %.2e; (25, 75) ms exact", worst);
    return buf;
}

VnDescription two_node_vn(std::int64_t id, double rate) {
    VnDescription vn;
    vn.id = VnId{id};
    vn.device_cos = {1e5, 0.1};
    vn.nodes[VnNodeId{1}] = VnNode{VnNodeId{1}, NnId{13}, std::nullopt};
    vn.nodes[VnNodeId{2}] = VnNode{VnNodeId{2}, NnId{17}, std::nullopt};
    vn.tunnels[TunnelId{1}] = Tunnel{TunnelId{1}, VnNodeId{1}, VnNodeId{2}, QosSpec{rate, {}, {}}, false};
    return vn;
}

std::string admission(Check& c) {
    auto sc = load("reference.scn");
    auto vn = sc.slices[0];
    vn.ac_required = true;
    vn.tunnels.at(TunnelId{1}).qos.rate_bps = 1e6;
    c.expect(vn.device_cos.rate_bps == 500e3, "fixture CoS is not 500 kbps");
    const auto slice = compose_slice(vn, sc.infra, sc.policy, {});
    CmTree cm(sc.infra);
    RadioIdAllocator radio;
    ServiceAdmission adm;
    std::string pattern;
    for (int i = 0; i < 3; ++i) {
        DeviceState d;
        d.name = "B" + std::to_string(i);
        d.kind = DeviceKind::mobile;
        d.vn = vn.id;
        d.access_nn = NnId{19};
        (void)register_endpoint(d, &slice, sc.infra, cm, radio, 0.0);
        pattern += request_service_admission(d, slice, adm, vn.device_cos.rate_bps) ? "grant " : "deny ";
    }
    c.expect(pattern == "grant grant deny ", "device admission pattern " + pattern);

    auto infra_json = to_json(sc.infra);
    for (auto& l : infra_json["links"])
        if (l["id"] == 12) l["capacity_bps"] = 15e6;
    const auto infra = load_infrastructure(infra_json);
    const std::vector<DeployedSlice> first{compose_slice(two_node_vn(2, 10e6), infra, {}, {})};
    std::string named;
    try {
        (void)compose_slice(two_node_vn(3, 10e6), infra, {}, first);
        c.expect(false, "second identical slice admitted");
    } catch (const CompositionError& e) {
        named = e.what();
        c.expect(e.stage() == Stage::admission, "wrong stage");
        c.expect(named.find("link 12") != std::string::npos, "bottleneck not named: " + named);
    }
    return "devices: " + pattern + "| second slice rejected at link 12";
}

std::string dedicated_isolation(Check& c) {
    const auto sc = load("dedicated.scn");
    const auto m = run_scenario(sc);
    const auto& lat = m.vns.at(VnId{2}).latency;
    const double rate = sc.find_slice(VnId{2})->tunnels.at(TunnelId{1}).qos.rate_bps;
    double size = 0.0;
    for (const auto& t : sc.traffic)
        if (t.src == "P") size = t.size_bits;
    double closed = 0.0;
    for (const auto& l : shortest_path(sc.infra, NnId{13}, NnId{17}).links)
        closed += size / rate + sc.infra.link(l).prop_delay_s;
    c.expect(lat.count > 0, "no dedicated packets delivered");
    c.expect(lat.variance == 0.0, "dedicated variance nonzero");
    c.expect(std::abs(lat.min - closed) <= 1e-9 && std::abs(lat.max - closed) <= 1e-9, "latency off closed form");
    const auto twin = run_scenario(load("dedicated_shared_twin.scn"));
    const double twin_var = twin.vns.at(VnId{2}).latency.variance;
    c.expect(twin_var > 0.0, "shared twin variance is zero");
    char buf[160];
    std::snprintf(buf, sizeof buf, "dedicated %zu pkts at %.9f s (closed form %.9f), variance 0; shared twin variance %.3e",
                  lat.count, lat.max, closed, twin_var);
    return buf;
}

std::string determinism(Check& c) {
    int runs = 0;
    for (const auto& e : fs::directory_iterator(fixture_dir())) {
        if (e.path().extension() != ".scn") continue;
        const auto sc = load_scenario(e.path().string());
        for (auto mode : {RunMode::hop_on, RunMode::session_baseline}) {
            auto s = sc;
            s.run.mode = mode;
            const auto a = dump_canonical(to_json(run_scenario(s)));
            const auto b = dump_canonical(to_json(run_scenario(s)));
            c.expect(a == b, e.path().filename().string() + " differs between runs");
            ++runs;
        }
    }
    return std::to_string(runs) + " scenario/mode pairs byte-identical";
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "golden composition of the reference VN", "exact", golden_reproduction},
        {2, "routing tables equal the BFS oracle", "exact", routing_oracle},
        {3, "signaling-free hop-on", "exact counts", signaling_free},
        {4, "handover-free delivery", "exact 1.000", handover_free},
        {5, "latency budget conservation", "1e-9 relative", budget_conservation},
        {6, "admission", "exact", admission},
        {7, "dedicated resource isolation", "1e-9 s", dedicated_isolation},
        {8, "determinism", "byte-identical", determinism},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Check c;
        std::string detail;
        try {
            detail = cr.body(c);
        } catch (const std::exception& e) {
            c.failures.push_back(std::string("exception: ") + e.what());
        }
        const bool ok = c.failures.empty();
        failed += ok ? 0 : 1;
        std::printf("%s %d %s [tolerance: %s] %s\n", ok ? "PASS" : "FAIL", cr.number, cr.title.c_str(),
                    cr.tolerance.c_str(), ok ? detail.c_str() : "");
        for (std::size_t i = 0; i < c.failures.size() && i < 5; ++i) std::printf("    %s\n", c.failures[i].c_str());
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
