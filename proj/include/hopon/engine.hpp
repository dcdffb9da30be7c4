#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "hopon/cm.hpp"
#include "hopon/endpoint.hpp"
#include "hopon/json_io.hpp"
#include "hopon/scenario.hpp"
#include "hopon/sonac_com.hpp"
#include "hopon/sonac_op.hpp"

namespace hopon {

enum class EventKind {
    register_device,
    device_move,
    cm_update,
    traffic_emit,
    session_setup_done,
    al_slot,
    al_done,
    link_tx_done,
    nn_arrival,
    router_arrival,
    resolution_complete,
};

const char* to_string(EventKind kind);

struct Event {
    double time = 0.0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::traffic_emit;
    std::uint64_t a = 0;
    std::uint64_t b = 0;
};

struct LatencyStats {
    std::size_t count = 0;
    double min = 0.0;
    double mean = 0.0;
    double p99 = 0.0;
    double max = 0.0;
    double variance = 0.0;
};

struct VnMetrics {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::map<DropReason, std::uint64_t> dropped;
    std::uint64_t in_flight = 0;
    LatencyStats latency;

    [[nodiscard]] std::uint64_t dropped_total() const;
};

struct SignalingMetrics {
    std::uint64_t registration = 0;
    std::uint64_t cm = 0;
    std::uint64_t al = 0;
    std::uint64_t session_baseline = 0;

    [[nodiscard]] std::uint64_t total() const { return registration + cm + al + session_baseline; }
};

struct LinkMetrics {
    double mean_utilization = 0.0;
    double peak_utilization = 0.0;
    std::uint64_t packets = 0;
};

struct DeviceMetrics {
    std::uint64_t sent_from = 0;
    std::uint64_t addressed_to = 0;
    std::uint64_t delivered_to = 0;

    [[nodiscard]] double delivery_ratio() const;
};

struct MetricsReport {
    RunMode mode = RunMode::hop_on;
    double duration_s = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t events_processed = 0;
    std::map<VnId, VnMetrics> vns;
    SignalingMetrics signaling;
    std::map<std::tuple<LinkId, NnId, NnId>, LinkMetrics> links;
    std::map<std::string, DeviceMetrics> devices;
};

Json to_json(const MetricsReport& report);

struct TraceRow {
    PacketId packet = 0;
    VnId vn;
    std::string src;
    std::string dst;
    std::string event;
    std::string location;
    double time = 0.0;
    std::string header;
};

std::string trace_csv(const std::vector<TraceRow>& rows);

/// Deterministic discrete-event engine. Events run in (time, sequence) order.
class Engine {
public:
    explicit Engine(Scenario scenario, bool trace = false);
    ~Engine();
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    /// Processes one event. Returns false when nothing is left before the end
    /// of the run.
    bool step();
    void run();

    [[nodiscard]] double now() const;
    [[nodiscard]] bool finished() const;
    [[nodiscard]] MetricsReport metrics() const;
    [[nodiscard]] const std::vector<TraceRow>& trace() const;
    [[nodiscard]] const std::vector<DeployedSlice>& deployed() const;
    [[nodiscard]] const CmTree& cm() const;
    [[nodiscard]] const DeviceState& device(const std::string& name) const;
    [[nodiscard]] const Scenario& scenario() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Composes every slice of the scenario in order; later slices see the
/// reservations of earlier ones.
std::vector<DeployedSlice> compose_all(const Scenario& scenario);

MetricsReport run_scenario(const Scenario& scenario, std::vector<TraceRow>* trace = nullptr);
/// Same scenario with mode forced to session_baseline.
MetricsReport run_baseline(const Scenario& scenario, std::vector<TraceRow>* trace = nullptr);

/// Side-by-side signaling and latency comparison of the two modes.
Json comparison_json(const MetricsReport& hop_on, const MetricsReport& baseline);

}  // namespace hopon
