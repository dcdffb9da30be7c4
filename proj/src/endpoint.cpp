#include "hopon/endpoint.hpp"

#include "hopon/errors.hpp"

namespace hopon {

const char* to_string(DeviceKind kind) {
    switch (kind) {
        case DeviceKind::fixed: return "fixed";
        case DeviceKind::mobile: return "mobile";
        case DeviceKind::server: return "server";
    }
    return "?";
}

const char* to_string(Phase phase) {
    switch (phase) {
        case Phase::unregistered: return "unregistered";
        case Phase::network_registered: return "network_registered";
        case Phase::cm_registered: return "cm_registered";
        case Phase::slice_registered: return "slice_registered";
        case Phase::admitted: return "admitted";
    }
    return "?";
}

std::optional<DeviceKind> parse_device_kind(std::string_view text) {
    if (text == "fixed") return DeviceKind::fixed;
    if (text == "mobile") return DeviceKind::mobile;
    if (text == "server") return DeviceKind::server;
    return std::nullopt;
}

std::optional<VnNodeId> choose_anchor(const VnDescription& vn, const Infrastructure& infra, DeviceKind kind, NnId nn,
                                      Granularity mobile_granularity) {
    const auto& node = infra.node(nn);
    LocationInfo loc{node.domain, node.cluster, nn, {}};
    const Granularity g = kind == DeviceKind::mobile ? mobile_granularity : Granularity::access_node;
    return anchor_for_location(vn, infra, loc, g);
}

RegistrationResult register_endpoint(DeviceState& device, const DeployedSlice* slice, const Infrastructure& infra,
                                     CmTree& cm, RadioIdAllocator& radio_ids, double now,
                                     const RegistrationOptions& options) {
    if (device.phase != Phase::unregistered) throw EndpointError("device " + device.name + " already registered");
    if (slice == nullptr) throw EndpointError("VN " + to_string(device.vn) + " is not deployed");
    const auto* node = infra.find_node(device.access_nn);
    if (node == nullptr) throw EndpointError("device " + device.name + " attaches to unknown NN");
    if (device.kind != DeviceKind::server && node->kind != NodeKind::access)
        throw EndpointError("device " + device.name + " must attach to an access NN");

    const auto anchor = choose_anchor(slice->vn, infra, device.kind, device.access_nn, options.mobile_granularity);
    if (!anchor)
        throw EndpointError("NN " + to_string(device.access_nn) + " of device " + device.name +
                            " is outside every anchor scope of VN " + to_string(device.vn));

    RegistrationResult result;
    result.vn = device.vn;
    result.ac_required = slice->vn.ac_required;
    result.anchor = *anchor;
    result.signaling.network = options.network_messages;
    try {
        const auto reg = device.kind == DeviceKind::server ? cm.register_server(device.name, device.access_nn, now)
                                                           : cm.register_device(device.name, device.access_nn, now);
        result.signaling.cm = reg.messages;
    } catch (const CmError& e) {
        throw EndpointError(e.what());
    }
    result.signaling.slice = options.slice_messages;
    result.radio_id = radio_ids.next(device.access_nn);

    device.phase = Phase::slice_registered;
    device.radio_id = result.radio_id;
    device.anchor = *anchor;
    device.admitted_rate_bps = slice->vn.ac_required ? 0.0 : slice->vn.device_cos.rate_bps;
    return result;
}

double ServiceAdmission::admitted_on(VnId vn, std::optional<TunnelId> tunnel) const {
    auto it = per_tunnel_.find({vn, tunnel ? tunnel->value : -1});
    return it == per_tunnel_.end() ? 0.0 : it->second;
}

void ServiceAdmission::add(VnId vn, std::optional<TunnelId> tunnel, const std::string& device, double bps) {
    const std::int64_t key = tunnel ? tunnel->value : -1;
    per_tunnel_[{vn, key}] += bps;
    per_device_[device].emplace_back(vn, key, bps);
}

void ServiceAdmission::release(const std::string& device) {
    auto it = per_device_.find(device);
    if (it == per_device_.end()) return;
    for (const auto& [vn, key, bps] : it->second) per_tunnel_[{vn, key}] -= bps;
    per_device_.erase(it);
}

std::optional<TunnelId> anchor_facing_tunnel(const VnDescription& vn, VnNodeId anchor) {
    for (const auto& [id, t] : vn.tunnels)
        if (t.ingress == anchor) return id;
    for (const auto& [id, t] : vn.tunnels)
        if (t.egress == anchor) return id;
    return std::nullopt;
}

bool request_service_admission(DeviceState& device, const DeployedSlice& slice, ServiceAdmission& admission,
                               double requested_bps) {
    if (device.phase < Phase::slice_registered)
        throw EndpointError("device " + device.name + " has not registered to a slice");
    if (!slice.vn.ac_required) throw EndpointError("admission not applicable to VN " + to_string(slice.vn.id));
    if (requested_bps < 0) throw EndpointError("requested rate must not be negative");

    const auto tunnel = anchor_facing_tunnel(slice.vn, *device.anchor);
    if (tunnel) {
        const double limit = slice.vn.tunnels.at(*tunnel).qos.rate_bps;
        const double used = admission.admitted_on(slice.vn.id, tunnel);
        if (used + requested_bps > limit * (1.0 + 1e-12)) return false;
    }
    admission.add(slice.vn.id, tunnel, device.name, requested_bps);
    device.admitted_rate_bps += requested_bps;
    device.phase = Phase::admitted;
    return true;
}

int al_messages_per_packet(const DeployedSlice& slice, const Infrastructure& infra, NnId nn) {
    const auto* node = infra.find_node(nn);
    if (node == nullptr || node->kind != NodeKind::access) return 0;
    auto it = slice.al_configs.find(nn);
    if (it == slice.al_configs.end()) return 1;
    return it->second.policy.pre_assigned && it->second.policy.shared ? 0 : 1;
}

SendResult hop_on_send(DeviceState& device, const DeployedSlice& slice, const std::string& destination,
                       double size_bits, double now) {
    if (device.phase < Phase::slice_registered)
        throw EndpointError("sender " + device.name + " is not registered to a slice");
    if (destination.empty()) throw EndpointError("destination name must not be empty");

    SendResult out;
    out.packet.vn = device.vn;
    out.packet.source = device.name;
    out.packet.destination = destination;
    out.packet.size_bits = size_bits;
    out.packet.ttl = initial_ttl(slice.vn);
    out.packet.header = RawHeader{destination};
    out.packet.created_at = now;

    if (slice.vn.ac_required && device.phase != Phase::admitted) {
        out.dropped = DropReason::not_admitted;
        return out;
    }
    if (device.kind != DeviceKind::server) {
        while (!device.recent_sends.empty() && device.recent_sends.front().first <= now - kPolicingWindowS)
            device.recent_sends.pop_front();
        double window_bits = 0.0;
        for (const auto& [t, bits] : device.recent_sends) window_bits += bits;
        // Single-packet slack: accept while the window is within the rate.
        if (window_bits > device.admitted_rate_bps * kPolicingWindowS * (1.0 + 1e-12) ||
            device.admitted_rate_bps <= 0.0) {
            out.dropped = DropReason::policing;
            return out;
        }
        device.recent_sends.emplace_back(now, size_bits);
    }
    return out;
}

bool apply_move(DeviceState& device, NnId new_nn, const Infrastructure& infra) {
    if (device.kind != DeviceKind::mobile) throw EndpointError("device " + device.name + " is not mobile");
    const auto* node = infra.find_node(new_nn);
    if (node == nullptr) throw EndpointError("mobility step of " + device.name + " targets unknown NN");
    if (node->kind != NodeKind::access)
        throw EndpointError("mobility step of " + device.name + " targets core NN " + to_string(new_nn));
    if (new_nn == device.access_nn) return false;
    device.access_nn = new_nn;
    return true;
}

CmUpdate report_location(const DeviceState& device, NnId nn, const std::vector<Reading>& readings, CmTree& cm,
                         double now) {
    CmUpdate out;
    const auto* g = cm.global_record(device.name);
    if (g == nullptr) throw EndpointError("device " + device.name + " is not registered with the CM");
    auto moved = cm.move_device(device.name, nn, now);
    out.messages += moved.messages;
    out.notifications = std::move(moved.notifications);
    const auto report = cm.report_measurements(
        device.name, readings.empty() ? synthesized_readings(cm.infrastructure(), nn) : readings, now);
    ++out.messages;
    out.notifications.insert(out.notifications.end(), report.notifications.begin(), report.notifications.end());
    out.candidates = report.candidates;
    return out;
}

}  // namespace hopon
