#include "hopon/cm.hpp"

#include <algorithm>

#include "hopon/errors.hpp"

namespace hopon {

const char* to_string(Granularity g) {
    switch (g) {
        case Granularity::domain: return "domain";
        case Granularity::cluster: return "cluster";
        case Granularity::access_node: return "access_node";
    }
    return "?";
}

const char* to_string(ResolutionMode m) { return m == ResolutionMode::requesting ? "requesting" : "pushing"; }

std::optional<Granularity> parse_granularity(std::string_view text) {
    if (text == "domain") return Granularity::domain;
    if (text == "cluster") return Granularity::cluster;
    if (text == "access_node") return Granularity::access_node;
    return std::nullopt;
}

std::optional<ResolutionMode> parse_resolution_mode(std::string_view text) {
    if (text == "requesting") return ResolutionMode::requesting;
    if (text == "pushing") return ResolutionMode::pushing;
    return std::nullopt;
}

std::vector<Reading> synthesized_readings(const Infrastructure& infra, NnId serving_nn) {
    const auto& node = infra.node(serving_nn);
    std::vector<Reading> out{{serving_nn, -60.0}};
    if (!node.cluster) return out;
    for (NnId member : infra.find_cluster(*node.cluster)->members)
        if (member != serving_nn) out.push_back({member, -80.0});
    return out;
}

CmTree::CmTree(const Infrastructure& infra, CmConfig config) : infra_(&infra), config_(config) {
    if (config_.max_candidates == 0) throw CmError("max_candidates must be at least 1");
    for (const auto& [id, c] : infra.clusters()) clusters_[id];
    for (const auto& [id, d] : infra.domains()) domains_[id];
}

namespace {

const NetworkNode& access_node_or_throw(const Infrastructure& infra, NnId nn) {
    const auto* node = infra.find_node(nn);
    if (node == nullptr) throw CmError("unknown NN " + to_string(nn));
    if (node->kind != NodeKind::access || !node->cluster)
        throw CmError("NN " + to_string(nn) + " is not an access node");
    return *node;
}

}  // namespace

RegisterResult CmTree::register_device(const std::string& name, NnId access_nn, double now) {
    const auto& node = access_node_or_throw(*infra_, access_nn);
    if (global_.count(name) != 0) {
        const auto here = clusters_[*node.cluster].find(name);
        if (here != clusters_[*node.cluster].end() && here->second.access_nn == access_nn) return {1, {}};
        const auto moved = move_device(name, access_nn, now);
        return {moved.messages, moved.levels_changed};
    }
    clusters_[*node.cluster][name] = ClusterRecord{access_nn, {{access_nn, 0.0}}, now};
    domains_[node.domain][name] = DomainRecord{*node.cluster, std::nullopt, now};
    global_[name] = GlobalRecord{node.domain, now};
    return {3, {CmLevel::cluster, CmLevel::domain, CmLevel::global}};
}

RegisterResult CmTree::register_server(const std::string& name, NnId nn, double now) {
    const auto* node = infra_->find_node(nn);
    if (node == nullptr) throw CmError("unknown NN " + to_string(nn));
    if (node->kind == NodeKind::access) return register_device(name, nn, now);
    if (auto it = global_.find(name); it != global_.end()) {
        const auto& rec = domains_[it->second.domain].at(name);
        if (rec.core_nn == nn) return {1, {}};
        throw CmError("server " + name + " is already registered elsewhere");
    }
    domains_[node->domain][name] = DomainRecord{std::nullopt, nn, now};
    global_[name] = GlobalRecord{node->domain, now};
    return {2, {CmLevel::domain, CmLevel::global}};
}

void CmTree::deregister(const std::string& name) {
    for (auto& [id, records] : clusters_) records.erase(name);
    for (auto& [id, records] : domains_) records.erase(name);
    global_.erase(name);
    subscriptions_.erase(name);
}

ReportResult CmTree::report_measurements(const std::string& name, const std::vector<Reading>& readings, double now) {
    const auto g = global_.find(name);
    if (g == global_.end()) throw CmError("device " + name + " is not registered");
    const auto& drec = domains_.at(g->second.domain).at(name);
    if (!drec.cluster) throw CmError("device " + name + " is not registered in a RAN cluster");
    const ClusterId cluster = *drec.cluster;
    auto& rec = clusters_.at(cluster).at(name);

    std::map<NnId, double> best;
    for (const auto& r : readings) {
        const auto* node = infra_->find_node(r.nn);
        if (node == nullptr) throw CmError("measurement for unknown NN " + to_string(r.nn));
        if (node->cluster != cluster || r.strength < config_.candidate_threshold) continue;
        auto [it, fresh] = best.emplace(r.nn, r.strength);
        if (!fresh) it->second = std::max(it->second, r.strength);
    }
    if (best.empty()) throw CmError("no serving candidate for device " + name);
    std::vector<Reading> candidates;
    for (const auto& [nn, s] : best) candidates.push_back({nn, s});
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Reading& a, const Reading& b) { return a.strength > b.strength; });
    if (candidates.size() > config_.max_candidates) candidates.resize(config_.max_candidates);

    const bool changed = candidates.front().nn != rec.access_nn || candidates != rec.candidates;
    rec.access_nn = candidates.front().nn;
    rec.candidates = candidates;
    rec.updated_at = now;

    ReportResult out{candidates, rec.access_nn, {}};
    if (changed) out.notifications = notify(name, false, false, true);
    return out;
}

MoveResult CmTree::move_device(const std::string& name, NnId new_access_nn, double now) {
    const auto g = global_.find(name);
    if (g == global_.end()) throw CmError("device " + name + " is not registered");
    const auto& node = access_node_or_throw(*infra_, new_access_nn);
    const DomainId old_domain = g->second.domain;
    const auto old_drec = domains_.at(old_domain).at(name);
    if (!old_drec.cluster) throw CmError("server " + name + " cannot move");
    const ClusterId old_cluster = *old_drec.cluster;
    const ClusterRecord old_rec = clusters_.at(old_cluster).at(name);
    if (old_rec.access_nn == new_access_nn) return {};

    const ClusterId new_cluster = *node.cluster;
    const DomainId new_domain = node.domain;
    const bool cluster_changed = new_cluster != old_cluster;
    const bool domain_changed = new_domain != old_domain;

    MoveResult out;
    out.messages = 1;
    out.levels_changed.push_back(CmLevel::cluster);
    ClusterRecord rec{new_access_nn, {}, now};
    if (!cluster_changed) {
        rec.candidates = old_rec.candidates;
        auto pos = std::find_if(rec.candidates.begin(), rec.candidates.end(),
                                [&](const Reading& r) { return r.nn == new_access_nn; });
        if (pos == rec.candidates.end()) {
            rec.candidates.insert(rec.candidates.begin(), Reading{new_access_nn, 0.0});
            if (rec.candidates.size() > config_.max_candidates) rec.candidates.resize(config_.max_candidates);
        } else {
            std::rotate(rec.candidates.begin(), pos, pos + 1);
        }
    } else {
        rec.candidates = {{new_access_nn, 0.0}};
        clusters_.at(old_cluster).erase(name);
        out.messages += 2;
        out.levels_changed.push_back(CmLevel::domain);
    }
    clusters_.at(new_cluster)[name] = rec;
    if (cluster_changed) {
        if (domain_changed) {
            domains_.at(old_domain).erase(name);
            out.messages += 2;
            out.levels_changed.push_back(CmLevel::global);
            global_[name] = GlobalRecord{new_domain, now};
        }
        domains_.at(new_domain)[name] = DomainRecord{new_cluster, std::nullopt, now};
    }
    out.notifications = notify(name, domain_changed, cluster_changed, true);
    out.messages += static_cast<int>(out.notifications.size());
    return out;
}

ResolveResult CmTree::resolve(const CmId& asking, const std::string& name, Granularity granularity) const {
    auto has_record = [&](const CmId& cm) {
        switch (cm.level) {
            case CmLevel::cluster: {
                auto it = clusters_.find(ClusterId{cm.scope});
                if (it == clusters_.end()) throw CmError("unknown CM " + to_string(cm));
                return it->second.count(name) != 0;
            }
            case CmLevel::domain: {
                auto it = domains_.find(DomainId{cm.scope});
                if (it == domains_.end()) throw CmError("unknown CM " + to_string(cm));
                return it->second.count(name) != 0;
            }
            case CmLevel::global: return global_.count(name) != 0;
        }
        return false;
    };

    ResolveResult out;
    CmId cur = asking;
    while (!has_record(cur)) {
        auto up = parent(cur);
        if (!up) throw NotFoundError("no CM holds a record for " + name);
        cur = *up;
        ++out.hops;
    }

    auto inconsistent = [&] { return CmError("CM records for " + name + " are inconsistent at " + to_string(cur)); };
    if (cur.level == CmLevel::global) {
        const DomainId d = global_.at(name).domain;
        out.location.domain = d;
        if (granularity == Granularity::domain) {
            out.answered_by = cur;
            return out;
        }
        cur = {CmLevel::domain, d.value};
        ++out.hops;
        if (!has_record(cur)) throw inconsistent();
    }
    if (cur.level == CmLevel::domain) {
        const auto& rec = domains_.at(DomainId{cur.scope}).at(name);
        out.location.domain = DomainId{cur.scope};
        if (rec.core_nn) {
            out.location.nn = rec.core_nn;
            out.answered_by = cur;
            return out;
        }
        out.location.cluster = rec.cluster;
        if (granularity != Granularity::access_node) {
            out.answered_by = cur;
            return out;
        }
        cur = {CmLevel::cluster, rec.cluster->value};
        ++out.hops;
        if (!has_record(cur)) throw inconsistent();
    }
    const ClusterId c{cur.scope};
    const auto& rec = clusters_.at(c).at(name);
    out.location.domain = infra_->find_cluster(c)->domain;
    out.location.cluster = c;
    out.location.nn = rec.access_nn;
    for (const auto& r : rec.candidates) out.location.candidates.push_back(r.nn);
    out.answered_by = cur;
    return out;
}

void CmTree::subscribe(const Subscription& subscription) {
    subscriptions_[subscription.device][subscription.subscriber] = subscription;
}

void CmTree::unsubscribe(const Subscriber& subscriber, const std::string& device) {
    if (auto it = subscriptions_.find(device); it != subscriptions_.end()) it->second.erase(subscriber);
}

std::vector<Subscription> CmTree::subscriptions_for(const std::string& device) const {
    std::vector<Subscription> out;
    if (auto it = subscriptions_.find(device); it != subscriptions_.end())
        for (const auto& [sub, s] : it->second) out.push_back(s);
    return out;
}

CmId CmTree::cm_for_nn(NnId nn) const {
    const auto& node = infra_->node(nn);
    if (node.kind == NodeKind::access && node.cluster) return {CmLevel::cluster, node.cluster->value};
    return {CmLevel::domain, node.domain.value};
}

std::optional<CmId> CmTree::parent(const CmId& cm) const {
    switch (cm.level) {
        case CmLevel::cluster: {
            const auto* c = infra_->find_cluster(ClusterId{cm.scope});
            if (c == nullptr) throw CmError("unknown CM " + to_string(cm));
            return CmId{CmLevel::domain, c->domain.value};
        }
        case CmLevel::domain: return CmId{CmLevel::global, 0};
        case CmLevel::global: return std::nullopt;
    }
    return std::nullopt;
}

std::vector<CmId> CmTree::cm_ids() const {
    std::vector<CmId> out;
    for (const auto& [id, r] : clusters_) out.push_back({CmLevel::cluster, id.value});
    for (const auto& [id, r] : domains_) out.push_back({CmLevel::domain, id.value});
    out.push_back({CmLevel::global, 0});
    return out;
}

const ClusterRecord* CmTree::cluster_record(ClusterId cluster, const std::string& name) const {
    auto c = clusters_.find(cluster);
    if (c == clusters_.end()) return nullptr;
    auto it = c->second.find(name);
    return it == c->second.end() ? nullptr : &it->second;
}

const DomainRecord* CmTree::domain_record(DomainId domain, const std::string& name) const {
    auto d = domains_.find(domain);
    if (d == domains_.end()) return nullptr;
    auto it = d->second.find(name);
    return it == d->second.end() ? nullptr : &it->second;
}

const GlobalRecord* CmTree::global_record(const std::string& name) const {
    auto it = global_.find(name);
    return it == global_.end() ? nullptr : &it->second;
}

bool CmTree::is_registered(const std::string& name) const { return global_.count(name) != 0; }

LocationInfo CmTree::location_of(const std::string& name) const {
    LocationInfo loc;
    const auto& g = global_.at(name);
    loc.domain = g.domain;
    const auto& d = domains_.at(g.domain).at(name);
    if (d.core_nn) {
        loc.nn = d.core_nn;
        return loc;
    }
    loc.cluster = d.cluster;
    const auto& c = clusters_.at(*d.cluster).at(name);
    loc.nn = c.access_nn;
    for (const auto& r : c.candidates) loc.candidates.push_back(r.nn);
    return loc;
}

std::optional<LocationInfo> CmTree::sweep(const std::string& name) const {
    std::optional<LocationInfo> loc;
    for (const auto& [cid, records] : clusters_) {
        auto it = records.find(name);
        if (it == records.end()) continue;
        if (loc) return std::nullopt;
        loc = LocationInfo{infra_->find_cluster(cid)->domain, cid, it->second.access_nn, {}};
        for (const auto& r : it->second.candidates) loc->candidates.push_back(r.nn);
    }
    if (loc) return loc;
    for (const auto& [did, records] : domains_) {
        auto it = records.find(name);
        if (it != records.end() && it->second.core_nn) return LocationInfo{did, std::nullopt, it->second.core_nn, {}};
    }
    return std::nullopt;
}

std::vector<std::string> CmTree::consistency_violations() const {
    std::vector<std::string> out;
    std::map<std::string, int> cluster_count;
    for (const auto& [cid, records] : clusters_) {
        const DomainId d = infra_->find_cluster(cid)->domain;
        for (const auto& [name, rec] : records) {
            ++cluster_count[name];
            const auto* drec = domain_record(d, name);
            if (drec == nullptr || drec->cluster != cid)
                out.push_back(name + ": cluster " + to_string(cid) + " record not reflected at domain " + to_string(d));
            if (std::none_of(rec.candidates.begin(), rec.candidates.end(),
                             [&](const Reading& r) { return r.nn == rec.access_nn; }))
                out.push_back(name + ": current access NN missing from candidate set");
        }
    }
    for (const auto& [name, n] : cluster_count)
        if (n > 1) out.push_back(name + ": recorded in " + std::to_string(n) + " clusters");
    for (const auto& [did, records] : domains_) {
        for (const auto& [name, rec] : records) {
            const auto* g = global_record(name);
            if (g == nullptr || g->domain != did)
                out.push_back(name + ": domain " + to_string(did) + " record not reflected at global");
            if (rec.cluster && cluster_record(*rec.cluster, name) == nullptr)
                out.push_back(name + ": domain " + to_string(did) + " points at cluster without a record");
        }
    }
    for (const auto& [name, g] : global_)
        if (domain_record(g.domain, name) == nullptr) out.push_back(name + ": global points at domain without a record");
    return out;
}

std::vector<Notification> CmTree::notify(const std::string& name, bool domain_changed, bool cluster_changed,
                                         bool access_changed) const {
    std::vector<Notification> out;
    auto it = subscriptions_.find(name);
    if (it == subscriptions_.end()) return out;
    const LocationInfo loc = location_of(name);
    for (const auto& [sub, s] : it->second) {
        if (s.mode != ResolutionMode::pushing) continue;
        const bool affected = (s.granularity == Granularity::domain && domain_changed) ||
                              (s.granularity == Granularity::cluster && (cluster_changed || domain_changed)) ||
                              (s.granularity == Granularity::access_node && access_changed);
        if (affected) out.push_back({sub, name, s.granularity, loc});
    }
    return out;
}

}  // namespace hopon
