#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hopon/cm.hpp"
#include "hopon/endpoint.hpp"
#include "hopon/infra.hpp"
#include "hopon/json_io.hpp"
#include "hopon/slice_model.hpp"
#include "hopon/sonac_com.hpp"
#include "hopon/sonac_op.hpp"
#include "hopon/validation.hpp"

namespace hopon {

enum class RunMode { hop_on, session_baseline };

struct CmSettings {
    Granularity granularity = Granularity::cluster;
    ResolutionMode mode = ResolutionMode::requesting;
    double cache_ttl_s = 5.0;
    /// One-way delay of a CM-to-CM (or router-to-CM) message.
    double hop_delay_s = 0.001;
    double candidate_threshold = -90.0;
    std::size_t max_candidates = 3;
};

struct AccessSettings {
    double slot_s = 0.001;
    double collision_probability = 0.0;
};

struct OpSettings {
    OpenTunnelMode open_tunnel_mode = OpenTunnelMode::multicast;
    double router_processing_delay_s = 0.0;
    std::size_t queue_limit_packets = 1000;
};

struct RegistrationSettings {
    int network_messages = 2;
    int slice_messages = 2;
};

struct BaselineSettings {
    int session_messages = 10;
    double idle_timeout_s = 30.0;
};

struct RunSettings {
    double duration_s = 0.0;
    std::uint64_t seed = 1;
    RunMode mode = RunMode::hop_on;
};

struct DeviceSpec {
    std::string name;
    DeviceKind kind = DeviceKind::fixed;
    VnId vn;
    NnId nn;
    std::vector<MobilityStep> trace;
    std::optional<double> requested_rate_bps;
    double register_at_s = 0.0;
};

struct TrafficSpec {
    std::string src;
    std::string dst;
    std::optional<double> rate_bps;
    /// Explicit emission times; used instead of a rate when present.
    std::vector<double> schedule;
    double size_bits = 0.0;
    double start_s = 0.0;
    double stop_s = std::numeric_limits<double>::infinity();
    double jitter_s = 0.0;
};

struct Scenario {
    Infrastructure infra;
    std::vector<VnDescription> slices;
    MappingPolicy policy;
    CmSettings cm;
    AccessSettings access;
    OpSettings sonac_op;
    RegistrationSettings registration;
    BaselineSettings baseline;
    RunSettings run;
    std::vector<DeviceSpec> devices;
    std::vector<TrafficSpec> traffic;

    [[nodiscard]] const VnDescription* find_slice(VnId vn) const;
    [[nodiscard]] const DeviceSpec* find_device(const std::string& name) const;
};

Scenario parse_scenario(const Json& doc);
Scenario parse_scenario_text(std::string_view text);
Scenario load_scenario(const std::string& path);

/// Cross-reference checks over the whole scenario; errors mean it cannot run.
ValidationReport validate_scenario(const Scenario& scenario);

const char* to_string(RunMode mode);

}  // namespace hopon
