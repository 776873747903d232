#pragma once

#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "geo.hpp"
#include "text.hpp"
#include "time.hpp"

namespace cityalert {

// A post that passed both classifier stages. Scores are the raw per-class
// classifier outputs (signed margins or log-posteriors depending on family).
struct Incident {
    std::string id;
    std::string source_id;
    std::string category;
    double stage1_score = 0.0;
    std::map<std::string, double> stage2_scores;
    std::optional<GeoPoint> geo;
    bool out_of_area = false;
    std::string sanitized_text;
    std::string raw_text;
    Timestamp posted_at{};
    Timestamp detected_at{};

    friend bool operator==(const Incident&, const Incident&) = default;
};

// Deterministic digest of (source id, category): replays are idempotent.
inline std::string incident_id(std::string_view source_id, std::string_view category) {
    std::uint64_t h = text::fnv1a64(source_id);
    h = text::fnv1a64("\x1f", h);
    h = text::fnv1a64(category, h);
    return "inc-" + text::hex64(h);
}

inline void validate(const Incident& inc) {
    if (inc.id.empty()) throw FormatError("incident id is empty");
    if (inc.category.empty()) throw FormatError("incident " + inc.id + ": empty category");
    if (inc.geo && !inc.geo->valid()) throw FormatError("incident " + inc.id + ": coordinates out of range");
    if (inc.detected_at < inc.posted_at) throw FormatError("incident " + inc.id + ": detected before posted");
}

inline void to_json(nlohmann::json& j, const Incident& inc) {
    j = nlohmann::json::object();
    j["id"] = inc.id;
    j["source_id"] = inc.source_id;
    j["category"] = inc.category;
    if (inc.geo) {
        j["lat"] = inc.geo->lat;
        j["lon"] = inc.geo->lon;
        j["geo_source"] = to_string(inc.geo->source);
        j["place_name"] = inc.geo->place_name ? nlohmann::json(*inc.geo->place_name) : nlohmann::json(nullptr);
    } else {
        j["lat"] = nullptr;
        j["lon"] = nullptr;
        j["geo_source"] = nullptr;
        j["place_name"] = nullptr;
    }
    j["out_of_area"] = inc.out_of_area;
    j["sanitized_text"] = inc.sanitized_text;
    j["raw_text"] = inc.raw_text;
    j["posted_at"] = format_timestamp(inc.posted_at);
    j["detected_at"] = format_timestamp(inc.detected_at);
    j["scores"] = {{"stage1", inc.stage1_score}, {"stage2", inc.stage2_scores}};
}

inline void from_json(const nlohmann::json& j, Incident& inc) {
    inc.id = j.at("id").get<std::string>();
    inc.source_id = j.at("source_id").get<std::string>();
    inc.category = j.at("category").get<std::string>();
    inc.geo.reset();
    if (!j.at("lat").is_null()) {
        GeoPoint p;
        p.lat = j.at("lat").get<double>();
        p.lon = j.at("lon").get<double>();
        p.source = parse_geo_source(j.at("geo_source").get<std::string>());
        if (!j.at("place_name").is_null()) p.place_name = j.at("place_name").get<std::string>();
        inc.geo = p;
    }
    inc.out_of_area = j.at("out_of_area").get<bool>();
    inc.sanitized_text = j.at("sanitized_text").get<std::string>();
    inc.raw_text = j.at("raw_text").get<std::string>();
    inc.posted_at = parse_timestamp(j.at("posted_at").get<std::string>());
    inc.detected_at = parse_timestamp(j.at("detected_at").get<std::string>());
    const auto& scores = j.at("scores");
    inc.stage1_score = scores.at("stage1").get<double>();
    inc.stage2_scores = scores.at("stage2").get<std::map<std::string, double>>();
    validate(inc);
}

} // namespace cityalert
