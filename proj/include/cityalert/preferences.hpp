#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "geo.hpp"
#include "incident.hpp"
#include "log.hpp"

namespace cityalert {

struct UserPreferences {
    std::string user;
    bool notifications_enabled = true;
    std::set<std::string> categories;
    std::optional<BoundingBox> bbox;

    // Push-notification rule: enabled, subscribed category, and (when an area
    // of interest is set) a geo-located incident inside it.
    bool wants(const Incident& inc) const {
        if (!notifications_enabled || !categories.count(inc.category)) return false;
        if (bbox && (!inc.geo || !in_bounds(*inc.geo, *bbox))) return false;
        return true;
    }

    friend bool operator==(const UserPreferences&, const UserPreferences&) = default;
};

inline void to_json(nlohmann::json& j, const UserPreferences& p) {
    j = {{"user", p.user}, {"notifications_enabled", p.notifications_enabled}, {"categories", p.categories}};
    j["bbox"] = p.bbox ? nlohmann::json(*p.bbox) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, UserPreferences& p) {
    p.user = j.at("user").get<std::string>();
    p.notifications_enabled = j.at("notifications_enabled").get<bool>();
    p.categories = j.at("categories").get<std::set<std::string>>();
    p.bbox.reset();
    if (auto it = j.find("bbox"); it != j.end() && !it->is_null()) p.bbox = it->get<BoundingBox>();
}

// Per-user settings persisted as an append-only log; the last record for a
// user wins on recovery.
class PreferenceStore {
public:
    explicit PreferenceStore(std::vector<std::string> categories) : categories_(categories.begin(), categories.end()) {}

    PreferenceStore(std::vector<std::string> categories, const std::string& log_path)
        : PreferenceStore(std::move(categories)) {
        log_ = std::make_unique<ChecksummedLog>(log_path);
        for (const auto& record : log_->recovered()) {
            try {
                auto p = nlohmann::json::parse(record).get<UserPreferences>();
                prefs_[p.user] = std::move(p);
            } catch (const std::exception& e) {
                throw CorruptLog(log_path + ": unreadable preference record: " + e.what());
            }
        }
        if (log_->torn_lines() > 0) {
            spdlog::warn("{}: discarded {} torn trailing line(s)", log_path, log_->torn_lines());
        }
    }

    UserPreferences defaults(const std::string& user) const { return {user, true, categories_, std::nullopt}; }

    UserPreferences get(const std::string& user) const {
        std::shared_lock lock(mu_);
        auto it = prefs_.find(user);
        return it == prefs_.end() ? defaults(user) : it->second;
    }

    // Throws FormatError for an empty user or an unknown category.
    UserPreferences put(const UserPreferences& p) {
        if (p.user.empty()) throw FormatError("user id is empty");
        for (const auto& c : p.categories) {
            if (!categories_.count(c)) throw FormatError("unknown category '" + c + "'");
        }
        if (p.bbox && !p.bbox->well_formed()) throw FormatError("bbox is not well-formed");
        std::unique_lock lock(mu_);
        if (log_) log_->append(nlohmann::json(p).dump());
        prefs_[p.user] = p;
        return p;
    }

    const std::set<std::string>& categories() const { return categories_; }

private:
    std::set<std::string> categories_;
    std::unique_ptr<ChecksummedLog> log_;
    mutable std::shared_mutex mu_;
    std::map<std::string, UserPreferences> prefs_;
};

} // namespace cityalert
