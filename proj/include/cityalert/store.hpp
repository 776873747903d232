#pragma once

#include <algorithm>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "geo.hpp"
#include "incident.hpp"
#include "log.hpp"

namespace cityalert {

struct IncidentQuery {
    std::optional<Timestamp> since;  // detected_at >= since
    std::optional<std::string> category;
    std::optional<BoundingBox> bbox;  // incidents without geo never match
    std::size_t limit = 200;
};

inline bool matches(const Incident& inc, const std::optional<std::string>& category,
                    const std::optional<BoundingBox>& bbox) {
    if (category && inc.category != *category) return false;
    if (bbox && (!inc.geo || !in_bounds(*inc.geo, *bbox))) return false;
    return true;
}

inline bool matches(const Incident& inc, const IncidentQuery& q) {
    if (q.since && inc.detected_at < *q.since) return false;
    return matches(inc, q.category, q.bbox);
}

// Incident index backed by an optional checksummed log. Single writer, many
// readers; every acked append is durable and visible to subsequent queries.
class IncidentStore {
public:
    IncidentStore() = default;

    explicit IncidentStore(const std::string& log_path, std::uint64_t max_bytes = ChecksummedLog::kUnlimited)
        : log_(std::make_unique<ChecksummedLog>(log_path, max_bytes)) {
        for (const auto& record : log_->recovered()) {
            Incident inc;
            try {
                inc = nlohmann::json::parse(record).get<Incident>();
            } catch (const std::exception& e) {
                throw CorruptLog(log_path + ": unreadable incident record: " + e.what());
            }
            index(std::move(inc));
        }
        if (log_->torn_lines() > 0) {
            spdlog::warn("{}: discarded {} torn trailing line(s)", log_path, log_->torn_lines());
        }
    }

    // Returns false (and writes nothing) when the id is already stored.
    bool append(const Incident& inc) {
        validate(inc);
        std::unique_lock lock(mu_);
        if (by_id_.count(inc.id)) return false;
        if (log_) log_->append(nlohmann::json(inc).dump());
        index(inc);
        return true;
    }

    std::optional<Incident> get(const std::string& id) const {
        std::shared_lock lock(mu_);
        auto it = by_id_.find(id);
        if (it == by_id_.end()) return std::nullopt;
        return incidents_[it->second];
    }

    // Newest first by detected_at; among equal instants the later append first.
    std::vector<Incident> query(const IncidentQuery& q = {}) const {
        std::shared_lock lock(mu_);
        std::vector<std::size_t> hits;
        for (std::size_t i = 0; i < incidents_.size(); ++i) {
            if (matches(incidents_[i], q)) hits.push_back(i);
        }
        std::sort(hits.begin(), hits.end(), [&](std::size_t a, std::size_t b) {
            if (incidents_[a].detected_at != incidents_[b].detected_at) {
                return incidents_[a].detected_at > incidents_[b].detected_at;
            }
            return a > b;
        });
        if (hits.size() > q.limit) hits.resize(q.limit);
        std::vector<Incident> out;
        out.reserve(hits.size());
        for (auto i : hits) out.push_back(incidents_[i]);
        return out;
    }

    // Incidents appended after `last_id`, oldest first; nullopt for an unknown id.
    std::optional<std::vector<Incident>> after(const std::string& last_id) const {
        std::shared_lock lock(mu_);
        auto it = by_id_.find(last_id);
        if (it == by_id_.end()) return std::nullopt;
        return std::vector<Incident>(incidents_.begin() + static_cast<std::ptrdiff_t>(it->second) + 1,
                                     incidents_.end());
    }

    // All incidents in append order.
    std::vector<Incident> all() const {
        std::shared_lock lock(mu_);
        return incidents_;
    }

    std::size_t size() const {
        std::shared_lock lock(mu_);
        return incidents_.size();
    }

    std::size_t torn_lines() const { return log_ ? log_->torn_lines() : 0; }

private:
    void index(Incident inc) {
        if (by_id_.count(inc.id)) return;
        by_id_.emplace(inc.id, incidents_.size());
        incidents_.push_back(std::move(inc));
    }

    std::unique_ptr<ChecksummedLog> log_;
    mutable std::shared_mutex mu_;
    std::vector<Incident> incidents_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

} // namespace cityalert
