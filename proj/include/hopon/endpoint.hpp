#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hopon/cm.hpp"
#include "hopon/sonac_com.hpp"
#include "hopon/sonac_op.hpp"

namespace hopon {

enum class DeviceKind { fixed, mobile, server };
enum class Phase { unregistered, network_registered, cm_registered, slice_registered, admitted };

struct MobilityStep {
    double t = 0.0;
    NnId nn;
    std::vector<Reading> readings;
};

struct DeviceState {
    std::string name;
    DeviceKind kind = DeviceKind::fixed;
    Phase phase = Phase::unregistered;
    VnId vn;
    std::optional<std::int64_t> radio_id;
    std::optional<VnNodeId> anchor;
    NnId access_nn;
    double admitted_rate_bps = 0.0;
    std::vector<MobilityStep> trace;
    /// (time, bits) accepted inside the policing window.
    std::deque<std::pair<double, double>> recent_sends;
};

struct SignalingCount {
    int network = 0;
    int cm = 0;
    int slice = 0;
    [[nodiscard]] int total() const { return network + cm + slice; }
};

struct RegistrationResult {
    VnId vn;
    std::int64_t radio_id = 0;
    VnNodeId anchor;
    bool ac_required = false;
    SignalingCount signaling;
};

/// Per-access-NN monotonic radio id counters.
class RadioIdAllocator {
public:
    std::int64_t next(NnId nn) { return ++counters_[nn]; }

private:
    std::map<NnId, std::int64_t> counters_;
};

struct RegistrationOptions {
    int network_messages = 2;
    int slice_messages = 2;
    /// Resolution granularity used to pick a mobile device's anchor.
    Granularity mobile_granularity = Granularity::cluster;
};

/// Network registration, CM registration, slice registration. `slice` is null
/// when the device's VN is not deployed.
RegistrationResult register_endpoint(DeviceState& device, const DeployedSlice* slice, const Infrastructure& infra,
                                     CmTree& cm, RadioIdAllocator& radio_ids, double now,
                                     const RegistrationOptions& options = {});

/// Anchor rule for an endpoint at `nn`: fixed devices and servers use the
/// exact location, mobile devices the coarser CM granularity.
std::optional<VnNodeId> choose_anchor(const VnDescription& vn, const Infrastructure& infra, DeviceKind kind, NnId nn,
                                      Granularity mobile_granularity);

/// Admitted rates per anchor-facing tunnel, shared by all devices of a VN.
class ServiceAdmission {
public:
    [[nodiscard]] double admitted_on(VnId vn, std::optional<TunnelId> tunnel) const;
    void add(VnId vn, std::optional<TunnelId> tunnel, const std::string& device, double bps);
    void release(const std::string& device);

private:
    std::map<std::pair<VnId, std::int64_t>, double> per_tunnel_;
    std::map<std::string, std::vector<std::tuple<VnId, std::int64_t, double>>> per_device_;
};

/// Lowest-id tunnel whose ingress is the anchor, else whose egress is.
std::optional<TunnelId> anchor_facing_tunnel(const VnDescription& vn, VnNodeId anchor);

/// Grants iff the anchor-facing tunnel still has room for `requested_bps`.
bool request_service_admission(DeviceState& device, const DeployedSlice& slice, ServiceAdmission& admission,
                               double requested_bps);

struct SendResult {
    Packet packet;
    /// Access-link grant requests this packet needs (0 on a pre-assigned,
    /// shared AL).
    int al_messages = 0;
    std::optional<DropReason> dropped;
};

inline constexpr double kPolicingWindowS = 1.0;

SendResult hop_on_send(DeviceState& device, const DeployedSlice& slice, const std::string& destination,
                       double size_bits, double now);

/// AL signaling needed per packet for a VN at an access NN.
int al_messages_per_packet(const DeployedSlice& slice, const Infrastructure& infra, NnId nn);

/// Updates the device's attachment. Returns false when the step is a no-op.
bool apply_move(DeviceState& device, NnId new_nn, const Infrastructure& infra);

struct CmUpdate {
    int messages = 0;
    std::vector<Notification> notifications;
    std::vector<Reading> candidates;
};

/// CM side of a move (or of a fresh measurement report): move_device when
/// the NN changed, then a measurement report.
CmUpdate report_location(const DeviceState& device, NnId nn, const std::vector<Reading>& readings, CmTree& cm,
                         double now);

const char* to_string(DeviceKind kind);
const char* to_string(Phase phase);
std::optional<DeviceKind> parse_device_kind(std::string_view text);

}  // namespace hopon
