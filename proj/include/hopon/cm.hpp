#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hopon/cm_ids.hpp"
#include "hopon/ids.hpp"
#include "hopon/infra.hpp"

namespace hopon {

enum class Granularity { domain, cluster, access_node };
enum class ResolutionMode { requesting, pushing };

struct Reading {
    NnId nn;
    double strength = 0.0;

    friend bool operator==(const Reading&, const Reading&) = default;
};

struct ClusterRecord {
    NnId access_nn;
    std::vector<Reading> candidates;
    double updated_at = 0.0;
};

/// Domain-level record. Devices are tracked by cluster; servers attached to a
/// core NN are tracked by that NN directly.
struct DomainRecord {
    std::optional<ClusterId> cluster;
    std::optional<NnId> core_nn;
    double updated_at = 0.0;
};

struct GlobalRecord {
    DomainId domain;
    double updated_at = 0.0;
};

struct LocationInfo {
    DomainId domain;
    std::optional<ClusterId> cluster;
    /// Access NN for devices, attachment NN for servers.
    std::optional<NnId> nn;
    std::vector<NnId> candidates;

    friend bool operator==(const LocationInfo&, const LocationInfo&) = default;
};

struct Subscriber {
    VnId vn;
    RouterId router;

    friend auto operator<=>(const Subscriber&, const Subscriber&) = default;
};

struct Subscription {
    Subscriber subscriber;
    std::string device;
    ResolutionMode mode = ResolutionMode::requesting;
    Granularity granularity = Granularity::cluster;
};

struct Notification {
    Subscriber subscriber;
    std::string device;
    Granularity granularity = Granularity::cluster;
    LocationInfo location;
};

struct CmConfig {
    double candidate_threshold = -90.0;
    std::size_t max_candidates = 3;
};

struct RegisterResult {
    int messages = 0;
    std::vector<CmLevel> levels_changed;
};

struct MoveResult {
    int messages = 0;
    std::vector<CmLevel> levels_changed;
    std::vector<Notification> notifications;
};

struct ReportResult {
    std::vector<Reading> candidates;
    NnId current;
    std::vector<Notification> notifications;
};

struct ResolveResult {
    LocationInfo location;
    /// CM-to-CM hops walked: up until a record is found, then down as far as
    /// the requested granularity needs.
    int hops = 0;
    CmId answered_by;
};

/// Cluster, domain and global CM entities mirroring the infrastructure
/// hierarchy. Single-writer: the engine is the only mutator.
class CmTree {
public:
    explicit CmTree(const Infrastructure& infra, CmConfig config = {});

    /// Device at an access NN: device->cluster, cluster->domain, domain->global.
    RegisterResult register_device(const std::string& name, NnId access_nn, double now);
    /// Server attached to a core NN: tracked from its domain CM upward.
    RegisterResult register_server(const std::string& name, NnId nn, double now);
    void deregister(const std::string& name);

    ReportResult report_measurements(const std::string& name, const std::vector<Reading>& readings, double now);
    MoveResult move_device(const std::string& name, NnId new_access_nn, double now);

    ResolveResult resolve(const CmId& asking, const std::string& name, Granularity granularity) const;

    void subscribe(const Subscription& subscription);
    void unsubscribe(const Subscriber& subscriber, const std::string& device);
    [[nodiscard]] std::vector<Subscription> subscriptions_for(const std::string& device) const;

    /// Cluster CM for an access NN, domain CM for a core NN.
    [[nodiscard]] CmId cm_for_nn(NnId nn) const;
    [[nodiscard]] std::optional<CmId> parent(const CmId& cm) const;
    [[nodiscard]] std::vector<CmId> cm_ids() const;

    [[nodiscard]] const ClusterRecord* cluster_record(ClusterId cluster, const std::string& name) const;
    [[nodiscard]] const DomainRecord* domain_record(DomainId domain, const std::string& name) const;
    [[nodiscard]] const GlobalRecord* global_record(const std::string& name) const;
    [[nodiscard]] bool is_registered(const std::string& name) const;

    /// Ground truth from a sweep over every CM's records.
    [[nodiscard]] std::optional<LocationInfo> sweep(const std::string& name) const;
    /// Cross-level mismatches found by a full sweep; empty when consistent.
    [[nodiscard]] std::vector<std::string> consistency_violations() const;

    [[nodiscard]] const CmConfig& config() const { return config_; }
    [[nodiscard]] const Infrastructure& infrastructure() const { return *infra_; }

private:
    std::vector<Notification> notify(const std::string& name, bool domain_changed, bool cluster_changed,
                                     bool access_changed) const;
    [[nodiscard]] LocationInfo location_of(const std::string& name) const;

    const Infrastructure* infra_;
    CmConfig config_;
    std::map<ClusterId, std::map<std::string, ClusterRecord>> clusters_;
    std::map<DomainId, std::map<std::string, DomainRecord>> domains_;
    std::map<std::string, GlobalRecord> global_;
    std::map<std::string, std::map<Subscriber, Subscription>> subscriptions_;
};

/// Readings used when a mobility step carries none: the serving NN at -60,
/// every other access NN of its cluster at -80.
std::vector<Reading> synthesized_readings(const Infrastructure& infra, NnId serving_nn);

const char* to_string(Granularity g);
const char* to_string(ResolutionMode m);
std::optional<Granularity> parse_granularity(std::string_view text);
std::optional<ResolutionMode> parse_resolution_mode(std::string_view text);

}  // namespace hopon
