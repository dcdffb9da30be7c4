#include "hopon/scenario.hpp"

#include <set>

#include "hopon/errors.hpp"

namespace hopon {

const char* to_string(RunMode mode) { return mode == RunMode::hop_on ? "hop_on" : "session_baseline"; }

const VnDescription* Scenario::find_slice(VnId vn) const {
    for (const auto& s : slices)
        if (s.id == vn) return &s;
    return nullptr;
}

const DeviceSpec* Scenario::find_device(const std::string& name) const {
    for (const auto& d : devices)
        if (d.name == name) return &d;
    return nullptr;
}

namespace {

std::string at(const std::string& base, std::size_t i) { return base + "/" + std::to_string(i); }

template <class T, class Parse>
T enum_value(DocReader& r, std::string_view key, T fallback, Parse parse) {
    if (!r.has(key)) return fallback;
    const std::string text = r.string(key);
    auto v = parse(text);
    if (!v) throw ParseError(r.child(key), "unknown value \"" + text + "\"");
    return *v;
}

MappingPolicy parse_policy(const Json& j) {
    DocReader r(j, "/policy");
    MappingPolicy p;
    p.default_format = enum_value(r, "default_format", p.default_format, parse_mapping_format);
    p.budget_split = enum_value(r, "budget_split", p.budget_split, parse_budget_split);
    if (auto k = r.opt_integer("k")) {
        if (*k < 1) throw ParseError(r.child("k"), "k must be at least 1");
        p.k = static_cast<std::size_t>(*k);
    }
    p.overbooking_factor = r.number_or("overbooking_factor", 1.0);
    p.redundancy_factor = r.number_or("redundancy_factor", 1.0);
    if (!(p.overbooking_factor > 0)) throw ParseError(r.child("overbooking_factor"), "must be positive");
    if (!(p.redundancy_factor > 0)) throw ParseError(r.child("redundancy_factor"), "must be positive");
    if (const auto* overrides = r.opt_array("overrides")) {
        for (std::size_t i = 0; i < overrides->size(); ++i) {
            DocReader o((*overrides)[i], at(r.child("overrides"), i));
            const auto vn = o.id<VnId>("vn");
            const auto tunnel = o.id<TunnelId>("tunnel");
            const auto format = enum_value(o, "format", MappingFormat::ip_like, parse_mapping_format);
            if (!p.overrides.emplace(std::pair{vn, tunnel}, format).second)
                throw ParseError(o.path(), "duplicate override for VN " + to_string(vn) + " tunnel " +
                                               to_string(tunnel));
            o.finish();
        }
    }
    r.finish();
    return p;
}

CmSettings parse_cm(const Json& j) {
    DocReader r(j, "/cm");
    CmSettings s;
    s.granularity = enum_value(r, "granularity", s.granularity, parse_granularity);
    s.mode = enum_value(r, "mode", s.mode, parse_resolution_mode);
    s.cache_ttl_s = r.number_or("cache_ttl_s", s.cache_ttl_s);
    s.hop_delay_s = r.number_or("hop_delay_s", s.hop_delay_s);
    s.candidate_threshold = r.number_or("candidate_threshold", s.candidate_threshold);
    if (auto m = r.opt_integer("max_candidates")) {
        if (*m < 1) throw ParseError(r.child("max_candidates"), "must be at least 1");
        s.max_candidates = static_cast<std::size_t>(*m);
    }
    if (s.cache_ttl_s < 0) throw ParseError(r.child("cache_ttl_s"), "must not be negative");
    if (s.hop_delay_s < 0) throw ParseError(r.child("hop_delay_s"), "must not be negative");
    r.finish();
    return s;
}

AccessSettings parse_access(const Json& j) {
    DocReader r(j, "/access");
    AccessSettings s;
    s.slot_s = r.number_or("slot_s", s.slot_s);
    s.collision_probability = r.number_or("collision_probability", s.collision_probability);
    if (!(s.slot_s > 0)) throw ParseError(r.child("slot_s"), "must be positive");
    if (s.collision_probability < 0 || s.collision_probability > 1)
        throw ParseError(r.child("collision_probability"), "must lie in [0, 1]");
    r.finish();
    return s;
}

OpSettings parse_op(const Json& j) {
    DocReader r(j, "/sonac_op");
    OpSettings s;
    s.open_tunnel_mode = enum_value(r, "open_tunnel_mode", s.open_tunnel_mode, parse_open_tunnel_mode);
    s.router_processing_delay_s = r.number_or("router_processing_delay_s", s.router_processing_delay_s);
    if (s.router_processing_delay_s < 0) throw ParseError(r.child("router_processing_delay_s"), "must not be negative");
    if (auto q = r.opt_integer("queue_limit_packets")) {
        if (*q < 1) throw ParseError(r.child("queue_limit_packets"), "must be at least 1");
        s.queue_limit_packets = static_cast<std::size_t>(*q);
    }
    r.finish();
    return s;
}

RegistrationSettings parse_registration(const Json& j) {
    DocReader r(j, "/registration");
    RegistrationSettings s;
    s.network_messages = static_cast<int>(r.opt_integer("network_messages").value_or(s.network_messages));
    s.slice_messages = static_cast<int>(r.opt_integer("slice_messages").value_or(s.slice_messages));
    if (s.network_messages < 0) throw ParseError(r.child("network_messages"), "must not be negative");
    if (s.slice_messages < 0) throw ParseError(r.child("slice_messages"), "must not be negative");
    r.finish();
    return s;
}

BaselineSettings parse_baseline(const Json& j) {
    DocReader r(j, "/baseline");
    BaselineSettings s;
    s.session_messages = static_cast<int>(r.opt_integer("session_messages").value_or(s.session_messages));
    s.idle_timeout_s = r.number_or("idle_timeout_s", s.idle_timeout_s);
    if (s.session_messages < 0) throw ParseError(r.child("session_messages"), "must not be negative");
    if (!(s.idle_timeout_s > 0)) throw ParseError(r.child("idle_timeout_s"), "must be positive");
    r.finish();
    return s;
}

RunSettings parse_run(const Json& j) {
    DocReader r(j, "/run");
    RunSettings s;
    s.duration_s = r.number("duration_s");
    if (auto seed = r.opt_integer("seed")) s.seed = static_cast<std::uint64_t>(*seed);
    s.mode = enum_value(r, "mode", s.mode, [](std::string_view t) -> std::optional<RunMode> {
        if (t == "hop_on") return RunMode::hop_on;
        if (t == "session_baseline") return RunMode::session_baseline;
        return std::nullopt;
    });
    r.finish();
    return s;
}

std::vector<Reading> parse_readings(const Json& arr, const std::string& path) {
    std::vector<Reading> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        DocReader r(arr[i], at(path, i));
        out.push_back({r.id<NnId>("nn"), r.number("strength")});
        r.finish();
    }
    return out;
}

DeviceSpec parse_device(const Json& j, const std::string& path) {
    DocReader r(j, path);
    DeviceSpec d;
    d.name = r.string("name");
    if (d.name.empty()) throw ParseError(r.child("name"), "device name must not be empty");
    d.kind = enum_value(r, "kind", d.kind, parse_device_kind);
    d.vn = r.id<VnId>("vn");
    d.nn = r.id<NnId>("nn");
    d.requested_rate_bps = r.opt_number("requested_rate_bps");
    d.register_at_s = r.number_or("register_at_s", 0.0);
    if (const auto* trace = r.opt_array("trace")) {
        for (std::size_t i = 0; i < trace->size(); ++i) {
            DocReader s((*trace)[i], at(r.child("trace"), i));
            MobilityStep step;
            step.t = s.number("t");
            step.nn = s.id<NnId>("nn");
            if (const auto* readings = s.opt_array("readings")) step.readings = parse_readings(*readings, s.child("readings"));
            s.finish();
            d.trace.push_back(std::move(step));
        }
    }
    r.finish();
    return d;
}

TrafficSpec parse_traffic(const Json& j, const std::string& path) {
    DocReader r(j, path);
    TrafficSpec t;
    t.src = r.string("src");
    t.dst = r.string("dst");
    t.rate_bps = r.opt_number("rate_bps");
    if (const auto* schedule = r.opt_array("schedule")) {
        for (std::size_t i = 0; i < schedule->size(); ++i) {
            if (!(*schedule)[i].is_number()) throw ParseError(at(r.child("schedule"), i), "expected a number");
            t.schedule.push_back((*schedule)[i].get<double>());
        }
    }
    if (t.rate_bps && !t.schedule.empty()) throw ParseError(path, "give either rate_bps or schedule, not both");
    if (!t.rate_bps && t.schedule.empty()) throw ParseError(path, "traffic needs rate_bps or schedule");
    t.size_bits = r.number("size_bits");
    t.start_s = r.number_or("start_s", 0.0);
    if (auto stop = r.opt_number("stop_s")) t.stop_s = *stop;
    t.jitter_s = r.number_or("jitter_s", 0.0);
    r.finish();
    return t;
}

}  // namespace

Scenario parse_scenario(const Json& doc) {
    DocReader r(doc, "");
    Scenario s;
    s.infra = load_infrastructure(r.require("infrastructure"));
    const auto& slices = r.array("slices");
    std::set<VnId> seen;
    for (std::size_t i = 0; i < slices.size(); ++i) {
        auto vn = parse_vn_description(slices[i], at("/slices", i));
        if (!seen.insert(vn.id).second) throw ParseError(at("/slices", i), "duplicate vn_id " + to_string(vn.id));
        s.slices.push_back(std::move(vn));
    }
    if (const auto* p = r.find("policy")) s.policy = parse_policy(*p);
    if (const auto* c = r.find("cm")) s.cm = parse_cm(*c);
    if (const auto* a = r.find("access")) s.access = parse_access(*a);
    if (const auto* o = r.find("sonac_op")) s.sonac_op = parse_op(*o);
    if (const auto* g = r.find("registration")) s.registration = parse_registration(*g);
    if (const auto* b = r.find("baseline")) s.baseline = parse_baseline(*b);
    s.run = parse_run(r.require("run"));
    if (const auto* devices = r.opt_array("devices")) {
        std::set<std::string> names;
        for (std::size_t i = 0; i < devices->size(); ++i) {
            auto d = parse_device((*devices)[i], at("/devices", i));
            if (!names.insert(d.name).second) throw ParseError(at("/devices", i), "duplicate device name " + d.name);
            s.devices.push_back(std::move(d));
        }
    }
    if (const auto* traffic = r.opt_array("traffic"))
        for (std::size_t i = 0; i < traffic->size(); ++i)
            s.traffic.push_back(parse_traffic((*traffic)[i], at("/traffic", i)));
    r.finish();
    return s;
}

Scenario parse_scenario_text(std::string_view text) { return parse_scenario(parse_document(text)); }

Scenario load_scenario(const std::string& path) { return parse_scenario(load_document_file(path)); }

ValidationReport validate_scenario(const Scenario& s) {
    ValidationReport report = validate_infrastructure(s.infra);
    for (std::size_t i = 0; i < s.slices.size(); ++i) {
        const auto sub = validate_vn(s.slices[i], s.infra);
        for (const auto& f : sub.findings)
            report.findings.push_back({f.severity, at("/slices", i) + (f.location.empty() ? "" : " " + f.location),
                                       f.message});
    }
    for (const auto& [key, format] : s.policy.overrides) {
        const auto* vn = s.find_slice(key.first);
        if (vn == nullptr || vn->tunnels.count(key.second) == 0)
            report.error("/policy/overrides", "override names unknown tunnel " + to_string(key.second) + " of VN " +
                                                  to_string(key.first));
    }
    if (!(s.run.duration_s > 0)) report.error("/run/duration_s", "duration must be positive");

    for (std::size_t i = 0; i < s.devices.size(); ++i) {
        const auto& d = s.devices[i];
        const std::string where = at("/devices", i);
        const auto* vn = s.find_slice(d.vn);
        if (vn == nullptr) report.error(where + "/vn", "device " + d.name + " names unknown VN " + to_string(d.vn));
        const auto* node = s.infra.find_node(d.nn);
        if (node == nullptr) {
            report.error(where + "/nn", "device " + d.name + " attaches to unknown NN " + to_string(d.nn));
        } else if (d.kind != DeviceKind::server && node->kind != NodeKind::access) {
            report.error(where + "/nn", "device " + d.name + " must attach to an access NN");
        }
        if (d.kind != DeviceKind::mobile && !d.trace.empty())
            report.error(where + "/trace", "only mobile devices carry a mobility trace");
        double last = -1.0;
        for (std::size_t k = 0; k < d.trace.size(); ++k) {
            const auto& step = d.trace[k];
            const std::string sp = at(where + "/trace", k);
            if (step.t < 0 || step.t < last) report.error(sp + "/t", "trace times must be non-negative and ascending");
            last = step.t;
            const auto* sn = s.infra.find_node(step.nn);
            if (sn == nullptr || sn->kind != NodeKind::access)
                report.error(sp + "/nn", "trace step must target an existing access NN");
        }
        if (d.register_at_s < 0) report.error(where + "/register_at_s", "must not be negative");
        if (d.requested_rate_bps && vn != nullptr && !vn->ac_required)
            report.warning(where + "/requested_rate_bps", "VN " + to_string(d.vn) + " does not use admission control");
    }
    for (std::size_t i = 0; i < s.traffic.size(); ++i) {
        const auto& t = s.traffic[i];
        const std::string where = at("/traffic", i);
        const auto* src = s.find_device(t.src);
        const auto* dst = s.find_device(t.dst);
        if (src == nullptr) report.error(where + "/src", "unknown device " + t.src);
        if (dst == nullptr) report.error(where + "/dst", "unknown device " + t.dst);
        if (src != nullptr && dst != nullptr && src->vn != dst->vn)
            report.error(where, "source and destination belong to different VNs");
        if (src != nullptr && src == dst) report.error(where, "source and destination are the same device");
        if (!(t.size_bits > 0)) report.error(where + "/size_bits", "packet size must be positive");
        if (t.rate_bps && !(*t.rate_bps > 0)) report.error(where + "/rate_bps", "rate must be positive");
        if (!(t.stop_s > t.start_s)) report.error(where, "stop_s must be after start_s");
        if (t.jitter_s < 0) report.error(where + "/jitter_s", "jitter must not be negative");
        for (double when : t.schedule)
            if (when < 0) report.error(where + "/schedule", "emission times must not be negative");
    }
    return report;
}

}  // namespace hopon
