#include "hopon/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "hopon/errors.hpp"

namespace hopon {

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::register_device: return "register_device";
        case EventKind::device_move: return "device_move";
        case EventKind::cm_update: return "cm_update";
        case EventKind::traffic_emit: return "traffic_emit";
        case EventKind::session_setup_done: return "session_setup_done";
        case EventKind::al_slot: return "al_slot";
        case EventKind::al_done: return "al_done";
        case EventKind::link_tx_done: return "link_tx_done";
        case EventKind::nn_arrival: return "nn_arrival";
        case EventKind::router_arrival: return "router_arrival";
        case EventKind::resolution_complete: return "resolution_complete";
    }
    return "?";
}

std::uint64_t VnMetrics::dropped_total() const {
    std::uint64_t n = 0;
    for (const auto& [reason, count] : dropped) n += count;
    return n;
}

double DeviceMetrics::delivery_ratio() const {
    return addressed_to == 0 ? 0.0 : static_cast<double>(delivered_to) / static_cast<double>(addressed_to);
}

std::vector<DeployedSlice> compose_all(const Scenario& scenario) {
    std::vector<DeployedSlice> deployed;
    for (const auto& vn : scenario.slices) deployed.push_back(compose_slice(vn, scenario.infra, scenario.policy, deployed));
    return deployed;
}

namespace {

constexpr double kUtilizationBinS = 0.1;
constexpr std::size_t kDedupWindow = 1024;

struct EventLater {
    bool operator()(const Event& x, const Event& y) const {
        return x.time != y.time ? x.time > y.time : x.seq > y.seq;
    }
};

using DirKey = std::tuple<LinkId, NnId, NnId>;

std::string fmt_time(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", t);
    return buf;
}

}  // namespace

struct Engine::Impl {
    struct Leg {
        enum class Kind { association, tunnel, open_tunnel, delivery };
        Kind kind = Kind::association;
        std::vector<NnId> nodes;
        std::vector<LinkId> links;
        std::size_t hop = 0;
        /// Hops before this index reposition the packet inside its router
        /// and do not belong to the tunnel mapping.
        std::size_t mapping_offset = 0;
        TunnelId tunnel;
        VnNodeId toward;
        bool dedicated = false;
    };

    struct Transit {
        Packet packet;
        double elapsed = 0.0;
        double stamp = 0.0;
        NnId at;
        Leg leg;
        RouterId router;
        std::optional<RouteOutcome> pending;
        std::size_t server = 0;
        double tx_time = 0.0;
    };

    struct PacketRecord {
        VnId vn;
        std::string src;
        std::string dst;
        int outstanding = 1;
        bool delivered = false;
        DropReason last_drop = DropReason::unresolved;
        double latency = 0.0;
    };

    struct LinkServer {
        DirKey key;
        double capacity_bps = 0.0;
        double prop_delay_s = 0.0;
        bool busy = false;
        std::uint64_t current = 0;
        std::deque<std::uint64_t> queue;
    };

    struct Session {
        bool up = false;
        bool pending = false;
        double last_activity = 0.0;
        std::vector<std::uint64_t> buffered;
    };

    struct Dedup {
        std::deque<PacketId> order;
        std::set<PacketId> seen;
    };

    Scenario sc;
    bool tracing = false;
    std::vector<DeployedSlice> slices;
    std::map<VnId, std::size_t> slice_index;
    CmTree cm;
    RadioIdAllocator radio_ids;
    ServiceAdmission admission;
    std::map<std::string, DeviceState> devices;
    std::map<std::pair<VnId, RouterId>, RouterState> routers;

    std::vector<std::pair<NnId, Direction>> al_keys;
    std::map<std::pair<NnId, Direction>, std::size_t> al_index;
    std::vector<AccessLinkScheduler> als;
    std::vector<bool> al_pending;

    std::vector<LinkServer> servers;
    std::map<DirKey, std::size_t> shared_servers;
    std::map<std::tuple<VnId, TunnelId, LinkId, NnId, NnId>, std::size_t> dedicated_servers;
    std::map<DirKey, std::vector<double>> util_bits;
    std::map<DirKey, std::uint64_t> link_packets;

    std::map<PacketId, PacketRecord> packets;
    std::map<std::uint64_t, Transit> transits;
    std::map<std::string, Dedup> dedup;
    std::map<std::pair<NnId, NnId>, PhysicalPath> path_cache;
    std::map<std::pair<VnId, TunnelId>, std::vector<double>> wrr_credit;

    std::vector<std::size_t> flow_next;
    std::vector<std::pair<std::string, std::string>> session_keys;
    std::map<std::pair<std::string, std::string>, std::size_t> session_index;
    std::vector<Session> sessions;

    std::priority_queue<Event, std::vector<Event>, EventLater> queue;
    std::uint64_t next_seq = 0;
    std::uint64_t next_transit = 0;
    PacketId next_packet = 0;
    double clock = 0.0;
    std::uint64_t processed = 0;
    std::mt19937_64 rng;

    SignalingMetrics signaling;
    std::map<std::string, DeviceMetrics> device_metrics;
    std::vector<TraceRow> trace_rows;

    Impl(Scenario scenario, bool trace)
        : sc(std::move(scenario)),
          tracing(trace),
          cm(sc.infra, CmConfig{sc.cm.candidate_threshold, sc.cm.max_candidates}),
          rng(sc.run.seed) {
        cm = CmTree(sc.infra, CmConfig{sc.cm.candidate_threshold, sc.cm.max_candidates});
        const auto report = validate_scenario(sc);
        for (const auto& f : report.findings)
            if (f.severity == Severity::error) throw EngineError("invalid scenario: " + f.location + ": " + f.message);
        slices = compose_all(sc);
        for (std::size_t i = 0; i < slices.size(); ++i) {
            slice_index[slices[i].vn.id] = i;
            for (const auto& [rid, r] : slices[i].routers) routers[{slices[i].vn.id, rid}];
        }
        build_links();
        build_access_links();
        schedule_initial();
    }

    // -- setup ---------------------------------------------------------------

    void build_links() {
        std::map<DirKey, double> dedicated;
        for (const auto& s : slices) {
            for (const auto& [tid, m] : s.mappings) {
                if (m.format != MappingFormat::dedicated) continue;
                for (const auto& r : reservations_of(m)) {
                    dedicated[{r.link, r.from, r.to}] += r.bps;
                    dedicated_servers[{s.vn.id, tid, r.link, r.from, r.to}] = servers.size();
                    add_server({r.link, r.from, r.to}, r.bps, sc.infra.link(r.link).prop_delay_s);
                }
            }
        }
        for (const auto& [lid, l] : sc.infra.links()) {
            for (const auto& [from, to] : {std::pair{l.a, l.b}, std::pair{l.b, l.a}}) {
                const DirKey key{lid, from, to};
                double cap = l.capacity_bps;
                if (auto it = dedicated.find(key); it != dedicated.end()) cap -= it->second;
                shared_servers[key] = servers.size();
                add_server(key, std::max(cap, 1.0), l.prop_delay_s);
                util_bits[key];
                link_packets[key] = 0;
            }
        }
    }

    void add_server(const DirKey& key, double capacity_bps, double prop_delay_s) {
        LinkServer s;
        s.key = key;
        s.capacity_bps = capacity_bps;
        s.prop_delay_s = prop_delay_s;
        servers.push_back(std::move(s));
    }

    void build_access_links() {
        for (const auto& [id, n] : sc.infra.nodes()) {
            if (n.kind != NodeKind::access) continue;
            for (Direction dir : {Direction::dl, Direction::ul}) {
                al_index[{id, dir}] = als.size();
                al_keys.emplace_back(id, dir);
                als.emplace_back(n.al_capacity_bps, sc.access.slot_s);
                al_pending.push_back(false);
                auto& sched = als.back();
                for (const auto& s : slices) {
                    double partition = 0.0;
                    double weight = 1.0;
                    if (auto it = s.al_configs.find(id); it != s.al_configs.end()) {
                        const auto& p = it->second.policy;
                        const double rate = dir == Direction::dl ? p.dl_qos.rate_bps : p.ul_qos.rate_bps;
                        if (p.pre_assigned) partition = rate;
                        weight = rate;
                    }
                    sched.set_vn(s.vn.id, partition, weight);
                }
            }
        }
    }

    void schedule_initial() {
        for (std::size_t i = 0; i < sc.devices.size(); ++i) {
            const auto& d = sc.devices[i];
            DeviceState st;
            st.name = d.name;
            st.kind = d.kind;
            st.vn = d.vn;
            st.access_nn = d.nn;
            st.trace = d.trace;
            devices.emplace(d.name, std::move(st));
            device_metrics[d.name];
            push(d.register_at_s, EventKind::register_device, i);
            for (std::size_t k = 0; k < d.trace.size(); ++k) push(d.trace[k].t, EventKind::device_move, i, k);
        }
        flow_next.assign(sc.traffic.size(), 0);
        for (std::size_t f = 0; f < sc.traffic.size(); ++f) schedule_emission(f);
    }

    // -- event queue ---------------------------------------------------------

    void push(double t, EventKind kind, std::uint64_t a = 0, std::uint64_t b = 0) {
        queue.push(Event{t, next_seq++, kind, a, b});
    }

    bool step() {
        if (queue.empty() || queue.top().time > sc.run.duration_s) return false;
        const Event ev = queue.top();
        queue.pop();
        clock = ev.time;
        ++processed;
        dispatch(ev);
        return true;
    }

    void dispatch(const Event& ev) {
        switch (ev.kind) {
            case EventKind::register_device: on_register(ev.a); break;
            case EventKind::device_move: on_move(ev.a, ev.b); break;
            case EventKind::cm_update: on_cm_update(ev.a, ev.b); break;
            case EventKind::traffic_emit: on_emit(ev.a); break;
            case EventKind::session_setup_done: on_session_up(ev.a); break;
            case EventKind::al_slot: on_al_slot(ev.a); break;
            case EventKind::al_done: on_al_done(ev.a, ev.b); break;
            case EventKind::link_tx_done: on_tx_done(ev.a); break;
            case EventKind::nn_arrival: on_nn_arrival(ev.a); break;
            case EventKind::router_arrival: route_at(ev.a, RouterId{static_cast<std::int64_t>(ev.b)}); break;
            case EventKind::resolution_complete: on_resolved(ev.a); break;
        }
    }

    // -- helpers -------------------------------------------------------------

    const DeployedSlice& slice_of(VnId vn) const { return slices.at(slice_index.at(vn)); }

    const PhysicalPath& path_between(NnId a, NnId b) {
        auto key = std::pair{a, b};
        auto it = path_cache.find(key);
        if (it == path_cache.end()) {
            try {
                it = path_cache.emplace(key, shortest_path(sc.infra, a, b)).first;
            } catch (const NoPathError& e) {
                throw EngineError(e.what());
            }
        }
        return it->second;
    }

    void trace(const Transit& t, const std::string& event, const std::string& location) {
        if (!tracing) return;
        trace_rows.push_back(TraceRow{t.packet.id, t.packet.vn, t.packet.source, t.packet.destination, event, location,
                                      clock, header_name(t.packet.header)});
    }

    std::uint64_t new_transit(Transit t) {
        const std::uint64_t id = ++next_transit;
        transits.emplace(id, std::move(t));
        return id;
    }

    void finish_copy(std::uint64_t tid) {
        auto& rec = packets.at(transits.at(tid).packet.id);
        --rec.outstanding;
        transits.erase(tid);
    }

    void drop(std::uint64_t tid, DropReason reason, const std::string& where) {
        auto& t = transits.at(tid);
        trace(t, std::string("drop:") + to_string(reason), where);
        packets.at(t.packet.id).last_drop = reason;
        finish_copy(tid);
    }

    void deliver(std::uint64_t tid, const std::string& where) {
        auto& t = transits.at(tid);
        auto& d = dedup[t.packet.destination];
        if (d.seen.count(t.packet.id) != 0) {
            trace(t, "duplicate", where);
            finish_copy(tid);
            return;
        }
        d.seen.insert(t.packet.id);
        d.order.push_back(t.packet.id);
        if (d.order.size() > kDedupWindow) {
            d.seen.erase(d.order.front());
            d.order.pop_front();
        }
        auto& rec = packets.at(t.packet.id);
        if (!rec.delivered) {
            rec.delivered = true;
            rec.latency = t.elapsed;
            ++device_metrics[rec.dst].delivered_to;
        }
        trace(t, "delivered", where);
        finish_copy(tid);
    }

    static std::string nn_loc(NnId nn) { return "nn " + to_string(nn); }

    // -- devices -------------------------------------------------------------

    void attach_al(const DeviceState& d, NnId nn, bool eligible) {
        for (Direction dir : {Direction::dl, Direction::ul}) {
            auto it = al_index.find({nn, dir});
            if (it == al_index.end()) continue;
            auto& sched = als[it->second];
            if (!sched.has_device(d.name)) sched.add_device(d.name, d.vn, slice_of(d.vn).vn.device_cos.rate_bps);
            sched.set_eligible(d.name, eligible);
            if (eligible) kick_al(it->second);
        }
    }

    void on_register(std::size_t idx) {
        const auto& spec = sc.devices[idx];
        auto& d = devices.at(spec.name);
        const auto& slice = slice_of(d.vn);
        RegistrationResult reg;
        try {
            reg = register_endpoint(d, &slice, sc.infra, cm, radio_ids, clock,
                                    RegistrationOptions{sc.registration.network_messages,
                                                        sc.registration.slice_messages, sc.cm.granularity});
        } catch (const EndpointError& e) {
            throw EngineError(std::string("registration failed: ") + e.what());
        }
        signaling.registration += static_cast<std::uint64_t>(reg.signaling.total());

        if (d.kind == DeviceKind::mobile) {
            const auto* step = current_step(d, clock);
            const auto report = cm.report_measurements(
                d.name, step != nullptr && !step->readings.empty() ? step->readings
                                                                  : synthesized_readings(sc.infra, d.access_nn),
                clock);
            signaling.cm += 1;
            apply_notifications(report.notifications);
        } else {
            const auto& node = sc.infra.node(d.access_nn);
            LocationInfo loc{node.domain, node.cluster, d.access_nn, {}};
            if (node.kind == NodeKind::access) loc.candidates = {d.access_nn};
            for (auto& [key, state] : routers)
                if (key.first == d.vn) state.table.install(d.vn, d.name, {*d.anchor, loc, std::nullopt});
        }
        if (slice.vn.ac_required) {
            signaling.registration += 2;
            request_service_admission(d, slice, admission, spec.requested_rate_bps.value_or(slice.vn.device_cos.rate_bps));
        }
        if (d.kind != DeviceKind::server) attach_al(d, d.access_nn, true);
    }

    const MobilityStep* current_step(const DeviceState& d, double t) const {
        const MobilityStep* out = nullptr;
        for (const auto& s : d.trace)
            if (s.t <= t) out = &s;
        return out;
    }

    std::vector<NnId> candidates_of(const DeviceState& d) const {
        const auto& node = sc.infra.node(d.access_nn);
        std::vector<NnId> out;
        if (!node.cluster) return out;
        for (const auto& [cid, c] : sc.infra.clusters()) {
            if (const auto* rec = cm.cluster_record(cid, d.name)) {
                for (const auto& r : rec->candidates) out.push_back(r.nn);
            }
        }
        return out;
    }

    void on_move(std::size_t idx, std::size_t step_index) {
        auto& d = devices.at(sc.devices[idx].name);
        const auto& step = d.trace[step_index];
        const NnId old_nn = d.access_nn;
        bool changed = false;
        try {
            changed = apply_move(d, step.nn, sc.infra);
        } catch (const EndpointError& e) {
            throw EngineError(e.what());
        }
        if (d.phase == Phase::unregistered) return;
        if (changed) {
            const bool cluster_changed = sc.infra.node(old_nn).cluster != sc.infra.node(step.nn).cluster;
            attach_al(d, old_nn, false);
            if (auto it = al_index.find({old_nn, Direction::ul}); it != al_index.end())
                for (auto h : als[it->second].flush(d.name)) drop(h, DropReason::not_attached, nn_loc(old_nn));
            const auto cands = candidates_of(d);
            if (std::find(cands.begin(), cands.end(), old_nn) == cands.end()) {
                if (auto it = al_index.find({old_nn, Direction::dl}); it != al_index.end())
                    for (auto h : als[it->second].flush(d.name)) drop(h, DropReason::not_attached, nn_loc(old_nn));
            } else if (auto it = al_index.find({old_nn, Direction::dl}); it != al_index.end()) {
                kick_al(it->second);
            }
            attach_al(d, step.nn, true);
            if (auto anchor = choose_anchor(slice_of(d.vn).vn, sc.infra, d.kind, d.access_nn, sc.cm.granularity))
                d.anchor = anchor;
            if (cluster_changed && sc.run.mode == RunMode::session_baseline)
                for (std::size_t s = 0; s < session_keys.size(); ++s)
                    if (session_keys[s].first == d.name || session_keys[s].second == d.name) sessions[s].up = false;
        }
        if (changed || !step.readings.empty()) push(clock + sc.cm.hop_delay_s, EventKind::cm_update, idx, step_index);
    }

    void on_cm_update(std::size_t idx, std::size_t step_index) {
        auto& d = devices.at(sc.devices[idx].name);
        if (d.phase == Phase::unregistered) return;
        const auto& step = d.trace[step_index];
        const auto update = report_location(d, d.access_nn, step.nn == d.access_nn ? step.readings : std::vector<Reading>{},
                                            cm, clock);
        signaling.cm += static_cast<std::uint64_t>(update.messages);
        apply_notifications(update.notifications);
    }

    void apply_notifications(const std::vector<Notification>& notes) {
        for (const auto& n : notes) {
            auto it = routers.find({n.subscriber.vn, n.subscriber.router});
            if (it == routers.end()) continue;
            const auto anchor = anchor_for_location(slice_of(n.subscriber.vn).vn, sc.infra, n.location, n.granularity);
            if (anchor)
                it->second.table.install(n.subscriber.vn, n.device, {*anchor, n.location, std::nullopt});
            else
                it->second.table.erase(n.subscriber.vn, n.device);
        }
    }

    // -- traffic -------------------------------------------------------------

    void schedule_emission(std::size_t f) {
        const auto& t = sc.traffic[f];
        const std::size_t k = flow_next[f]++;
        double when = 0.0;
        if (t.rate_bps) {
            when = t.start_s + static_cast<double>(k) * (t.size_bits / *t.rate_bps);
            if (when >= t.stop_s) return;
        } else {
            if (k >= t.schedule.size()) return;
            when = t.schedule[k];
        }
        if (t.jitter_s > 0) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            when += u * t.jitter_s;
        }
        if (when > sc.run.duration_s) return;
        push(when, EventKind::traffic_emit, f);
    }

    void on_emit(std::size_t f) {
        const auto& spec = sc.traffic[f];
        schedule_emission(f);
        auto& src = devices.at(spec.src);
        const auto& slice = slice_of(src.vn);

        Transit t;
        t.packet.id = ++next_packet;
        t.packet.vn = src.vn;
        t.packet.source = spec.src;
        t.packet.destination = spec.dst;
        t.packet.size_bits = spec.size_bits;
        t.packet.created_at = clock;
        t.packet.ttl = initial_ttl(slice.vn);
        t.packet.header = RawHeader{spec.dst};
        t.stamp = clock;
        t.at = src.access_nn;
        packets[t.packet.id] = PacketRecord{src.vn, spec.src, spec.dst};
        ++device_metrics[spec.src].sent_from;
        ++device_metrics[spec.dst].addressed_to;

        std::optional<DropReason> dropped;
        if (src.phase == Phase::unregistered) {
            dropped = DropReason::unregistered;
        } else {
            auto sent = hop_on_send(src, slice, spec.dst, spec.size_bits, clock);
            dropped = sent.dropped;
            if (!dropped && src.kind != DeviceKind::server)
                signaling.al += static_cast<std::uint64_t>(al_messages_per_packet(slice, sc.infra, src.access_nn));
        }
        const auto tid = new_transit(std::move(t));
        trace(transits.at(tid), "emit", nn_loc(src.access_nn));
        if (dropped) {
            drop(tid, *dropped, nn_loc(src.access_nn));
            return;
        }
        if (sc.run.mode == RunMode::session_baseline && !session_ready(spec.src, spec.dst, tid)) return;
        inject(tid);
    }

    bool session_ready(const std::string& src, const std::string& dst, std::uint64_t tid) {
        auto key = std::pair{src, dst};
        auto [it, fresh] = session_index.emplace(key, sessions.size());
        if (fresh) {
            session_keys.push_back(key);
            sessions.emplace_back();
        }
        auto& s = sessions[it->second];
        if (s.up && clock - s.last_activity > sc.baseline.idle_timeout_s) s.up = false;
        if (s.up) {
            s.last_activity = clock;
            return true;
        }
        s.buffered.push_back(tid);
        if (!s.pending) {
            s.pending = true;
            signaling.session_baseline += static_cast<std::uint64_t>(sc.baseline.session_messages);
            const double one_way = path_between(devices.at(src).access_nn, devices.at(dst).access_nn).delay_s;
            push(clock + sc.baseline.session_messages * one_way, EventKind::session_setup_done, it->second);
        }
        return false;
    }

    void on_session_up(std::size_t idx) {
        auto& s = sessions[idx];
        s.up = true;
        s.pending = false;
        s.last_activity = clock;
        auto buffered = std::move(s.buffered);
        s.buffered.clear();
        for (auto tid : buffered) {
            auto& t = transits.at(tid);
            t.elapsed += clock - t.stamp;
            t.stamp = clock;
            inject(tid);
        }
    }

    void inject(std::uint64_t tid) {
        auto& t = transits.at(tid);
        const auto& src = devices.at(t.packet.source);
        if (src.kind == DeviceKind::server) {
            t.at = src.access_nn;
            association(tid, *src.anchor);
            return;
        }
        al_enqueue(tid, src.access_nn, Direction::ul, src.name);
    }

    // -- access links --------------------------------------------------------

    void al_enqueue(std::uint64_t tid, NnId nn, Direction dir, const std::string& device) {
        const std::size_t idx = al_index.at({nn, dir});
        auto& sched = als[idx];
        auto& t = transits.at(tid);
        if (!sched.has_device(device)) {
            const auto& d = devices.at(device);
            sched.add_device(device, d.vn, slice_of(d.vn).vn.device_cos.rate_bps);
            sched.set_eligible(device, d.access_nn == nn);
        }
        if (sched.queued_items(device) >= sc.sonac_op.queue_limit_packets) {
            drop(tid, DropReason::queue_overflow, nn_loc(nn));
            return;
        }
        t.stamp = clock;
        t.at = nn;
        sched.enqueue(device, tid, t.packet.size_bits);
        trace(t, dir == Direction::dl ? "al_dl_enqueue" : "al_ul_enqueue", nn_loc(nn));
        kick_al(idx);
    }

    void kick_al(std::size_t idx) {
        if (al_pending[idx] || !als[idx].has_backlog()) return;
        const double slot = sc.access.slot_s;
        const double k = std::ceil(clock / slot - 1e-9);
        al_pending[idx] = true;
        push(k * slot, EventKind::al_slot, idx);
    }

    void on_al_slot(std::size_t idx) {
        al_pending[idx] = false;
        auto& sched = als[idx];
        const NnId nn = al_keys[idx].first;
        for (const auto& name : sched.device_names()) {
            if (sched.eligible(name)) continue;
            const double hold = slice_of(devices.at(name).vn).vn.device_cos.latency_s;
            const auto stale = sched.remove_if(name, [&](std::uint64_t h) {
                return clock - transits.at(h).packet.created_at > hold;
            });
            for (auto h : stale) drop(h, DropReason::stale, nn_loc(nn));
        }
        const auto result = sched.schedule_slot();
        for (const auto& [name, handle] : result.completed) push(clock + sched.slot_s(), EventKind::al_done, handle, idx);
        if (sched.has_backlog()) {
            al_pending[idx] = true;
            push(std::round(clock / sched.slot_s() + 1.0) * sched.slot_s(), EventKind::al_slot, idx);
        }
    }

    void on_al_done(std::uint64_t tid, std::size_t idx) {
        const auto [nn, dir] = al_keys[idx];
        auto& t = transits.at(tid);
        t.elapsed += clock - t.stamp;
        t.stamp = clock;
        const std::string name = dir == Direction::dl ? t.packet.destination : t.packet.source;
        const auto& d = devices.at(name);
        if (d.access_nn != nn) {
            drop(tid, DropReason::not_attached, nn_loc(nn));
            return;
        }
        if (dir == Direction::dl) {
            deliver(tid, nn_loc(nn));
            return;
        }
        ul_arrival(tid, nn);
    }

    void ul_arrival(std::uint64_t tid, NnId nn) {
        auto& t = transits.at(tid);
        t.at = nn;
        trace(t, "al_ul_done", nn_loc(nn));
        const auto& slice = slice_of(t.packet.vn);
        if (sc.access.collision_probability > 0) {
            auto it = slice.al_configs.find(nn);
            if (it != slice.al_configs.end() && it->second.policy.pre_assigned && it->second.policy.shared) {
                const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                if (u < sc.access.collision_probability) {
                    drop(tid, DropReason::collision, nn_loc(nn));
                    return;
                }
            }
        }
        // A UL open tunnel is taken only toward the VN node the destination is anchored to.
        if (const auto* ul_router = slice.router_at({Placement::Kind::nn, nn.value})) {
            auto& state = routers.at({t.packet.vn, ul_router->id});
            if (const auto* entry = state.table.lookup(t.packet.vn, t.packet.destination, clock)) {
                for (const auto& [oid, o] : ul_router->open_tunnel_table) {
                    if (o.direction != Direction::ul || o.vn_node != entry->anchor) continue;
                    const auto& mapping = slice.open_mappings.at(oid);
                    t.packet = process_open_header(mapping, t.packet);
                    start_leg(tid, Leg::Kind::open_tunnel, mapping.paths.front().nodes, links_of(mapping.paths.front()),
                              oid, o.vn_node, false);
                    return;
                }
            }
        }
        association(tid, *devices.at(t.packet.source).anchor);
    }

    // -- physical legs -------------------------------------------------------

    static std::vector<LinkId> links_of(const PathMapping& p) {
        std::vector<LinkId> out;
        for (const auto& l : p.links) out.push_back(l.link);
        return out;
    }

    void association(std::uint64_t tid, VnNodeId anchor) {
        auto& t = transits.at(tid);
        const NnId target = slice_of(t.packet.vn).vn.nodes.at(anchor).nn;
        const auto& p = path_between(t.at, target);
        start_leg(tid, Leg::Kind::association, p.nodes, p.links, TunnelId{}, anchor, false);
    }

    void start_leg(std::uint64_t tid, Leg::Kind kind, std::vector<NnId> nodes, std::vector<LinkId> links,
                   TunnelId tunnel, VnNodeId toward, bool dedicated) {
        auto& t = transits.at(tid);
        Leg leg;
        leg.kind = kind;
        leg.tunnel = tunnel;
        leg.toward = toward;
        leg.dedicated = dedicated;
        if (!nodes.empty() && nodes.front() != t.at) {
            const auto& pre = path_between(t.at, nodes.front());
            leg.nodes = pre.nodes;
            leg.links = pre.links;
            leg.mapping_offset = pre.links.size();
            leg.nodes.insert(leg.nodes.end(), nodes.begin() + 1, nodes.end());
            leg.links.insert(leg.links.end(), links.begin(), links.end());
        } else {
            leg.nodes = std::move(nodes);
            leg.links = std::move(links);
        }
        if (leg.nodes.empty()) leg.nodes = {t.at};
        t.leg = std::move(leg);
        advance(tid);
    }

    void advance(std::uint64_t tid) {
        auto& t = transits.at(tid);
        auto& leg = t.leg;
        t.at = leg.nodes[leg.hop];
        if (leg.hop + 1 >= leg.nodes.size()) {
            leg_end(tid);
            return;
        }
        const NnId cur = leg.nodes[leg.hop];
        const NnId next = leg.nodes[leg.hop + 1];
        const LinkId link = leg.links[leg.hop];
        if (leg.kind == Leg::Kind::tunnel && leg.hop >= leg.mapping_offset &&
            std::holds_alternative<LabeledHeader>(t.packet.header)) {
            const auto& rules = slice_of(t.packet.vn).nn_forwarding_rules;
            const auto at_nn = rules.find(cur);
            const ForwardingRule* rule = nullptr;
            if (at_nn != rules.end()) {
                auto r = at_nn->second.find({t.packet.vn, leg.nodes.back()});
                if (r != at_nn->second.end()) rule = &r->second;
            }
            if (rule == nullptr || rule->next_nn != next)
                throw EngineError("NN " + to_string(cur) + " has no forwarding rule toward NN " +
                                  to_string(leg.nodes.back()) + " for VN " + to_string(t.packet.vn));
        }
        std::size_t server = shared_servers.at({link, cur, next});
        if (leg.dedicated && leg.hop >= leg.mapping_offset)
            server = dedicated_servers.at({t.packet.vn, leg.tunnel, link, cur, next});
        enqueue_link(tid, server);
    }

    void enqueue_link(std::uint64_t tid, std::size_t idx) {
        auto& s = servers[idx];
        auto& t = transits.at(tid);
        t.stamp = clock;
        t.server = idx;
        if (!s.busy) {
            start_tx(idx, tid);
            return;
        }
        if (s.queue.size() >= sc.sonac_op.queue_limit_packets) {
            drop(tid, DropReason::queue_overflow, "link " + to_string(std::get<0>(s.key)));
            return;
        }
        s.queue.push_back(tid);
    }

    void start_tx(std::size_t idx, std::uint64_t tid) {
        auto& s = servers[idx];
        auto& t = transits.at(tid);
        t.elapsed += clock - t.stamp;
        t.tx_time = t.packet.size_bits / s.capacity_bps;
        s.busy = true;
        s.current = tid;
        record_utilization(s.key, clock, clock + t.tx_time, s.capacity_bps);
        ++link_packets[s.key];
        push(clock + t.tx_time, EventKind::link_tx_done, idx);
    }

    void record_utilization(const DirKey& key, double start, double end, double rate) {
        auto& bins = util_bits[key];
        const double limit = std::min(end, sc.run.duration_s);
        double t = start;
        while (t < limit) {
            const auto bin = static_cast<std::size_t>(std::floor(t / kUtilizationBinS + 1e-12));
            const double bin_end = std::min(static_cast<double>(bin + 1) * kUtilizationBinS, limit);
            if (bins.size() <= bin) bins.resize(bin + 1, 0.0);
            bins[bin] += (bin_end - t) * rate;
            if (bin_end <= t) break;
            t = bin_end;
        }
    }

    void on_tx_done(std::size_t idx) {
        auto& s = servers[idx];
        const std::uint64_t tid = s.current;
        s.busy = false;
        auto& t = transits.at(tid);
        t.elapsed += t.tx_time + s.prop_delay_s;
        push(clock + s.prop_delay_s, EventKind::nn_arrival, tid);
        if (!s.queue.empty()) {
            const auto next = s.queue.front();
            s.queue.pop_front();
            start_tx(idx, next);
        }
    }

    void on_nn_arrival(std::uint64_t tid) {
        auto& t = transits.at(tid);
        ++t.leg.hop;
        if (auto* sr = std::get_if<SourceRoutedHeader>(&t.packet.header); sr && t.leg.hop > t.leg.mapping_offset) ++sr->cursor;
        advance(tid);
    }

    void leg_end(std::uint64_t tid) {
        auto& t = transits.at(tid);
        const auto& slice = slice_of(t.packet.vn);
        switch (t.leg.kind) {
            case Leg::Kind::association: {
                t.packet.header = VnRoutedHeader{t.leg.toward};
                router_arrive(tid, slice.router_serving(t.leg.toward)->id);
                return;
            }
            case Leg::Kind::tunnel: {
                t.packet = decapsulate(slice.mappings.at(t.leg.tunnel), t.packet, t.leg.toward);
                router_arrive(tid, slice.router_serving(t.leg.toward)->id);
                return;
            }
            case Leg::Kind::open_tunnel: {
                const auto& mapping = slice.open_mappings.at(t.leg.tunnel);
                t.packet = decapsulate_open(mapping, t.packet);
                if (mapping.egress_node.value != 0) {
                    router_arrive(tid, slice.router_serving(mapping.egress_node)->id);
                } else {
                    dl_access(tid, t.at);
                }
                return;
            }
            case Leg::Kind::delivery: {
                const auto& d = devices.at(t.packet.destination);
                if (d.kind == DeviceKind::server) {
                    if (d.access_nn == t.at)
                        deliver(tid, nn_loc(t.at));
                    else
                        drop(tid, DropReason::not_attached, nn_loc(t.at));
                    return;
                }
                dl_access(tid, t.at);
                return;
            }
        }
    }

    void dl_access(std::uint64_t tid, NnId nn) {
        auto& t = transits.at(tid);
        const auto it = devices.find(t.packet.destination);
        const auto* node = sc.infra.find_node(nn);
        if (it == devices.end() || node == nullptr || node->kind != NodeKind::access) {
            drop(tid, DropReason::not_attached, nn_loc(nn));
            return;
        }
        const auto& d = it->second;
        const auto cands = candidates_of(d);
        const bool listening = d.access_nn == nn || std::find(cands.begin(), cands.end(), nn) != cands.end();
        if (!listening || d.kind == DeviceKind::server) {
            drop(tid, DropReason::not_attached, nn_loc(nn));
            return;
        }
        al_enqueue(tid, nn, Direction::dl, d.name);
    }

    // -- routers -------------------------------------------------------------

    void router_arrive(std::uint64_t tid, RouterId router) {
        const double delay = sc.sonac_op.router_processing_delay_s;
        if (delay > 0) {
            transits.at(tid).elapsed += delay;
            push(clock + delay, EventKind::router_arrival, tid, static_cast<std::uint64_t>(router.value));
            return;
        }
        route_at(tid, router);
    }

    void route_at(std::uint64_t tid, RouterId router) {
        auto& t = transits.at(tid);
        t.router = router;
        const auto& slice = slice_of(t.packet.vn);
        const auto& cfg = slice.routers.at(router);
        auto& state = routers.at({t.packet.vn, router});
        RouteEnv env{&slice, &cm, sc.cm.granularity, sc.cm.mode, sc.cm.cache_ttl_s, sc.sonac_op.open_tunnel_mode, clock};
        auto outcome = route_packet(cfg, state, t.packet, env);
        trace(t, "router", "router " + to_string(router));
        if (outcome.subscribe)
            cm.subscribe(Subscription{{t.packet.vn, router}, t.packet.destination, ResolutionMode::pushing,
                                      sc.cm.granularity});
        if (outcome.resolution_messages > 0) {
            signaling.cm += static_cast<std::uint64_t>(outcome.resolution_messages);
            const double delay = outcome.resolution_messages * sc.cm.hop_delay_s;
            t.elapsed += delay;
            t.pending = std::move(outcome);
            push(clock + delay, EventKind::resolution_complete, tid);
            return;
        }
        apply_decision(tid, outcome);
    }

    void on_resolved(std::uint64_t tid) {
        auto& t = transits.at(tid);
        auto outcome = std::move(*t.pending);
        t.pending.reset();
        apply_decision(tid, outcome);
    }

    void apply_decision(std::uint64_t tid, const RouteOutcome& outcome) {
        auto& t = transits.at(tid);
        const auto& slice = slice_of(t.packet.vn);
        const std::string where = "router " + to_string(t.router);
        if (const auto* d = std::get_if<Drop>(&outcome.decision)) {
            drop(tid, d->reason, where);
            return;
        }
        if (const auto* f = std::get_if<Forward>(&outcome.decision)) {
            const auto& mapping = slice.mappings.at(f->tunnel);
            const std::size_t path = pick_path(t.packet.vn, mapping);
            t.packet.header = VnRoutedHeader{f->egress};
            t.packet = process_header(mapping, t.packet, path);
            trace(t, "forward", where);
            auto nodes = oriented_path(mapping, f->egress, path);
            auto links = links_of(mapping.paths[path]);
            if (nodes.front() != mapping.paths[path].nodes.front()) std::reverse(links.begin(), links.end());
            start_leg(tid, Leg::Kind::tunnel, std::move(nodes), std::move(links), f->tunnel, f->egress,
                      mapping.format == MappingFormat::dedicated);
            return;
        }
        if (const auto* o = std::get_if<OpenTunnelSet>(&outcome.decision)) {
            packets.at(t.packet.id).outstanding += static_cast<int>(o->tunnels.size()) - 1;
            std::vector<std::uint64_t> copies{tid};
            for (std::size_t i = 1; i < o->tunnels.size(); ++i) copies.push_back(new_transit(transits.at(tid)));
            for (std::size_t i = 0; i < o->tunnels.size(); ++i) {
                const auto& mapping = slice.open_mappings.at(o->tunnels[i]);
                auto& c = transits.at(copies[i]);
                c.packet = process_open_header(mapping, c.packet);
                trace(c, "open_tunnel " + to_string(o->tunnels[i]), where);
                start_leg(copies[i], Leg::Kind::open_tunnel, mapping.paths.front().nodes,
                          links_of(mapping.paths.front()), o->tunnels[i], VnNodeId{}, false);
            }
            return;
        }
        // Local delivery along the shortest path to the endpoint's NN.
        if (!outcome.location || !outcome.location->nn) {
            drop(tid, DropReason::unresolved, where);
            return;
        }
        t.packet.header = RawHeader{t.packet.destination};
        const auto& p = path_between(t.at, *outcome.location->nn);
        start_leg(tid, Leg::Kind::delivery, p.nodes, p.links, TunnelId{}, VnNodeId{}, false);
    }

    /// Smooth weighted round robin over source-routed paths by rate share.
    std::size_t pick_path(VnId vn, const TunnelMapping& mapping) {
        if (mapping.paths.size() <= 1) return 0;
        auto& credit = wrr_credit[{vn, mapping.tunnel}];
        credit.resize(mapping.paths.size(), 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < mapping.paths.size(); ++i) {
            credit[i] += mapping.paths[i].rate_bps;
            total += mapping.paths[i].rate_bps;
        }
        const auto best = static_cast<std::size_t>(std::max_element(credit.begin(), credit.end()) - credit.begin());
        credit[best] -= total;
        return best;
    }

    // -- reporting -----------------------------------------------------------

    MetricsReport metrics() const {
        MetricsReport r;
        r.mode = sc.run.mode;
        r.duration_s = sc.run.duration_s;
        r.seed = sc.run.seed;
        r.events_processed = processed;
        r.signaling = signaling;
        r.devices = device_metrics;
        for (const auto& s : slices) r.vns[s.vn.id];
        std::map<VnId, std::vector<double>> latencies;
        for (const auto& [id, rec] : packets) {
            auto& m = r.vns[rec.vn];
            ++m.sent;
            if (rec.delivered) {
                ++m.delivered;
                latencies[rec.vn].push_back(rec.latency);
            } else if (rec.outstanding <= 0) {
                ++m.dropped[rec.last_drop];
            } else {
                ++m.in_flight;
            }
        }
        for (auto& [vn, values] : latencies) {
            auto& st = r.vns[vn].latency;
            st.count = values.size();
            double mean = 0.0;
            double m2 = 0.0;
            std::size_t k = 0;
            for (double x : values) {
                ++k;
                const double delta = x - mean;
                mean += delta / static_cast<double>(k);
                m2 += delta * (x - mean);
            }
            st.mean = mean;
            st.variance = m2 / static_cast<double>(k);
            std::sort(values.begin(), values.end());
            st.min = values.front();
            st.max = values.back();
            const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(values.size())));
            st.p99 = values[std::max<std::size_t>(rank, 1) - 1];
        }
        for (const auto& [key, bins] : util_bits) {
            const double cap = sc.infra.link(std::get<0>(key)).capacity_bps;
            LinkMetrics lm;
            lm.packets = link_packets.at(key);
            double total = 0.0;
            for (std::size_t i = 0; i < bins.size(); ++i) {
                total += bins[i];
                const double start = static_cast<double>(i) * kUtilizationBinS;
                const double width = std::min(kUtilizationBinS, sc.run.duration_s - start);
                if (width > 0) lm.peak_utilization = std::max(lm.peak_utilization, std::min(1.0, bins[i] / (cap * width)));
            }
            lm.mean_utilization = std::min(1.0, total / (cap * sc.run.duration_s));
            r.links[key] = lm;
        }
        return r;
    }
};

Engine::Engine(Scenario scenario, bool trace) : impl_(std::make_unique<Impl>(std::move(scenario), trace)) {}
Engine::~Engine() = default;

bool Engine::step() { return impl_->step(); }

void Engine::run() {
    while (impl_->step()) {
    }
}

double Engine::now() const { return impl_->clock; }
bool Engine::finished() const {
    return impl_->queue.empty() || impl_->queue.top().time > impl_->sc.run.duration_s;
}
MetricsReport Engine::metrics() const { return impl_->metrics(); }
const std::vector<TraceRow>& Engine::trace() const { return impl_->trace_rows; }
const std::vector<DeployedSlice>& Engine::deployed() const { return impl_->slices; }
const CmTree& Engine::cm() const { return impl_->cm; }
const Scenario& Engine::scenario() const { return impl_->sc; }

const DeviceState& Engine::device(const std::string& name) const {
    auto it = impl_->devices.find(name);
    if (it == impl_->devices.end()) throw EngineError("unknown device " + name);
    return it->second;
}

MetricsReport run_scenario(const Scenario& scenario, std::vector<TraceRow>* trace) {
    Engine engine(scenario, trace != nullptr);
    engine.run();
    if (trace != nullptr) *trace = engine.trace();
    return engine.metrics();
}

MetricsReport run_baseline(const Scenario& scenario, std::vector<TraceRow>* trace) {
    Scenario copy = scenario;
    copy.run.mode = RunMode::session_baseline;
    return run_scenario(copy, trace);
}

namespace {

Json latency_json(const LatencyStats& s) {
    return Json{{"count", s.count}, {"min_s", s.min},       {"mean_s", s.mean},
                {"p99_s", s.p99},   {"max_s", s.max},       {"variance_s2", s.variance}};
}

Json signaling_json(const SignalingMetrics& s) {
    return Json{{"registration", s.registration},
                {"cm", s.cm},
                {"al", s.al},
                {"session_baseline", s.session_baseline},
                {"total", s.total()}};
}

std::string link_key(const DirKey& key) {
    return to_string(std::get<0>(key)) + ":" + to_string(std::get<1>(key)) + "->" + to_string(std::get<2>(key));
}

}  // namespace

Json to_json(const MetricsReport& r) {
    Json vns = Json::object();
    std::uint64_t sent = 0;
    for (const auto& [vn, m] : r.vns) {
        Json dropped = Json::object();
        for (const auto& [reason, n] : m.dropped) dropped[to_string(reason)] = n;
        vns[to_string(vn)] = Json{{"sent", m.sent},
                                  {"delivered", m.delivered},
                                  {"dropped", dropped},
                                  {"dropped_total", m.dropped_total()},
                                  {"in_flight", m.in_flight},
                                  {"latency", latency_json(m.latency)}};
        sent += m.sent;
    }
    Json links = Json::object();
    for (const auto& [key, lm] : r.links)
        links[link_key(key)] = Json{{"mean_utilization", lm.mean_utilization},
                                    {"peak_utilization", lm.peak_utilization},
                                    {"packets", lm.packets}};
    Json devices = Json::object();
    for (const auto& [name, d] : r.devices)
        devices[name] = Json{{"sent_from", d.sent_from},
                             {"addressed_to", d.addressed_to},
                             {"delivered_to", d.delivered_to},
                             {"delivery_ratio", d.delivery_ratio()}};
    Json signaling = signaling_json(r.signaling);
    const std::uint64_t data_plane = r.signaling.cm + r.signaling.al + r.signaling.session_baseline;
    signaling["per_packet"] = sent == 0 ? 0.0 : static_cast<double>(data_plane) / static_cast<double>(sent);
    return Json{{"mode", to_string(r.mode)},
                {"duration_s", r.duration_s},
                {"seed", r.seed},
                {"events_processed", r.events_processed},
                {"vns", vns},
                {"signaling", signaling},
                {"links", links},
                {"devices", devices}};
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
    std::ostringstream out;
    out << "packet_id,vn,src,dst,event,location,time_s,header\n";
    for (const auto& r : rows)
        out << r.packet << ',' << r.vn << ',' << r.src << ',' << r.dst << ',' << r.event << ',' << r.location << ','
            << fmt_time(r.time) << ',' << r.header << '\n';
    return out.str();
}

Json comparison_json(const MetricsReport& hop_on, const MetricsReport& baseline) {
    auto column = [](const MetricsReport& r) {
        Json latency = Json::object();
        for (const auto& [vn, m] : r.vns) latency[to_string(vn)] = latency_json(m.latency);
        return Json{{"signaling", signaling_json(r.signaling)}, {"latency", latency}};
    };
    return Json{{"hop_on", column(hop_on)},
                {"session_baseline", column(baseline)},
                {"session_signaling",
                 Json{{"hop_on", hop_on.signaling.session_baseline},
                      {"session_baseline", baseline.signaling.session_baseline}}}};
}

}  // namespace hopon
