#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "preprocess.hpp"
#include "text.hpp"

namespace cityalert {

enum class GeoSource { PostMetadata, Gazetteer, ExternalGeocoder };

inline std::string to_string(GeoSource s) {
    switch (s) {
    case GeoSource::PostMetadata: return "post-metadata";
    case GeoSource::Gazetteer: return "gazetteer";
    case GeoSource::ExternalGeocoder: return "external-geocoder";
    }
    return "unknown";
}

inline GeoSource parse_geo_source(std::string_view s) {
    if (s == "post-metadata") return GeoSource::PostMetadata;
    if (s == "gazetteer") return GeoSource::Gazetteer;
    if (s == "external-geocoder") return GeoSource::ExternalGeocoder;
    throw FormatError("unknown geo source '" + std::string(s) + "'");
}

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
    GeoSource source = GeoSource::PostMetadata;
    std::optional<std::string> place_name;

    Coordinates coords() const { return {lat, lon}; }
    bool valid() const { return coords().valid(); }
    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline void to_json(nlohmann::json& j, const GeoPoint& p) {
    j = {{"lat", p.lat}, {"lon", p.lon}, {"source", to_string(p.source)}};
    j["place_name"] = p.place_name ? nlohmann::json(*p.place_name) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, GeoPoint& p) {
    p.lat = j.at("lat").get<double>();
    p.lon = j.at("lon").get<double>();
    p.source = parse_geo_source(j.at("source").get<std::string>());
    p.place_name.reset();
    if (auto it = j.find("place_name"); it != j.end() && !it->is_null()) p.place_name = it->get<std::string>();
    if (!p.valid()) throw FormatError("geo point out of range");
}

// Closed lat/lon rectangle.
struct BoundingBox {
    double min_lat = 0.0;
    double min_lon = 0.0;
    double max_lat = 0.0;
    double max_lon = 0.0;

    bool well_formed() const {
        return min_lat < max_lat && min_lon < max_lon && Coordinates{min_lat, min_lon}.valid() &&
               Coordinates{max_lat, max_lon}.valid();
    }

    Coordinates center() const { return {(min_lat + max_lat) / 2, (min_lon + max_lon) / 2}; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Fixture box around Greater Mumbai; configuration overrides it.
inline constexpr BoundingBox kMumbaiBox{18.89, 72.77, 19.28, 73.03};

inline bool in_bounds(const Coordinates& c, const BoundingBox& box) {
    return c.lat >= box.min_lat && c.lat <= box.max_lat && c.lon >= box.min_lon && c.lon <= box.max_lon;
}

inline bool in_bounds(const GeoPoint& p, const BoundingBox& box) { return in_bounds(p.coords(), box); }

// Parses "min_lat,min_lon,max_lat,max_lon" (the query-string form).
inline BoundingBox parse_bbox(std::string_view s) {
    auto parts = text::split(s, ',');
    if (parts.size() != 4) throw FormatError("bbox needs four comma-separated numbers");
    BoundingBox box{text::parse_double(text::trim(parts[0])), text::parse_double(text::trim(parts[1])),
                    text::parse_double(text::trim(parts[2])), text::parse_double(text::trim(parts[3]))};
    if (!box.well_formed()) throw FormatError("bbox is not well-formed");
    return box;
}

inline void to_json(nlohmann::json& j, const BoundingBox& b) { j = {b.min_lat, b.min_lon, b.max_lat, b.max_lon}; }

inline void from_json(const nlohmann::json& j, BoundingBox& b) {
    if (!j.is_array() || j.size() != 4) throw FormatError("bbox must be an array of four numbers");
    b = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    if (!b.well_formed()) throw FormatError("bbox is not well-formed");
}

// Offline place-name lookup. Names are stored as lowercase token sequences so
// that multi-word places ("marine drive") match sanitized token runs.
class Gazetteer {
public:
    void add(std::string_view name, Coordinates c) {
        if (!c.valid()) throw FormatError("gazetteer entry '" + std::string(name) + "' has invalid coordinates");
        auto key = text::split_whitespace(text::to_lower(name));
        if (key.empty()) throw FormatError("gazetteer entry has an empty name");
        max_tokens_ = std::max(max_tokens_, key.size());
        entries_[text::join(key, " ")] = c;
    }

    std::optional<Coordinates> find(std::string_view name) const {
        auto it = entries_.find(text::join(text::split_whitespace(text::to_lower(name)), " "));
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    // Longest place-name run of tokens; ties go to the earliest position.
    std::optional<GeoPoint> match(const std::vector<std::string>& tokens) const {
        for (std::size_t len = std::min(max_tokens_, tokens.size()); len >= 1; --len) {
            for (std::size_t start = 0; start + len <= tokens.size(); ++start) {
                std::string key = tokens[start];
                for (std::size_t i = start + 1; i < start + len; ++i) key += ' ' + tokens[i];
                if (auto it = entries_.find(key); it != entries_.end()) {
                    return GeoPoint{it->second.lat, it->second.lon, GeoSource::Gazetteer, key};
                }
            }
        }
        return std::nullopt;
    }

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    static Gazetteer load(const std::string& path) {
        Gazetteer gaz;
        text::for_each_line(path, [&](const std::string& line, std::size_t lineno) {
            auto body = text::trim(line);
            if (body.empty() || body.front() == '#') return;
            auto fields = text::split(line, '\t');
            auto where = path + ":" + std::to_string(lineno);
            if (fields.size() != 3) throw FormatError(where + ": expected place<TAB>lat<TAB>lon");
            try {
                gaz.add(fields[0], {text::parse_double(fields[1]), text::parse_double(fields[2])});
            } catch (const FormatError& e) {
                throw FormatError(where + ": " + e.what());
            }
        });
        return gaz;
    }

private:
    std::map<std::string, Coordinates> entries_;
    std::size_t max_tokens_ = 0;
};

// One remote lookup for a free-text place string.
class Geocoder {
public:
    virtual ~Geocoder() = default;
    // nullopt: the backend answered but found nothing. Throws GeocoderUnavailable
    // when the backend cannot be reached or answers with garbage.
    virtual std::optional<GeoPoint> lookup(std::string_view query) = 0;
};

struct HttpGeocoderConfig {
    std::string endpoint;  // http://host[:port]/path
    std::string query_param = "q";
    std::string key_param = "key";
    std::string api_key;   // sent only when non-empty
    std::string lat_path = "lat";  // dotted paths into the JSON response;
    std::string lon_path = "lon";  // numeric segments index arrays
    std::chrono::milliseconds timeout{2000};
};

namespace detail {

inline const nlohmann::json* json_at_path(const nlohmann::json& root, std::string_view path) {
    const nlohmann::json* cur = &root;
    for (const auto& seg : text::split(path, '.')) {
        if (cur->is_object()) {
            auto it = cur->find(seg);
            if (it == cur->end()) return nullptr;
            cur = &*it;
        } else if (cur->is_array()) {
            std::size_t idx = 0;
            auto r = std::from_chars(seg.data(), seg.data() + seg.size(), idx);
            if (r.ec != std::errc{} || r.ptr != seg.data() + seg.size() || idx >= cur->size()) return nullptr;
            cur = &(*cur)[idx];
        } else {
            return nullptr;
        }
    }
    return cur;
}

inline double json_number(const nlohmann::json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return text::parse_double(v.get<std::string>());
    throw FormatError("not a number");
}

} // namespace detail

// Generic JSON-over-HTTP geocoding client (plain http only).
class HttpGeocoder : public Geocoder {
public:
    explicit HttpGeocoder(HttpGeocoderConfig cfg) : cfg_(std::move(cfg)) {
        const std::string_view scheme = "http://";
        if (cfg_.endpoint.rfind(scheme, 0) != 0) throw ConfigError("geocoder endpoint must start with http://");
        auto slash = cfg_.endpoint.find('/', scheme.size());
        host_ = cfg_.endpoint.substr(0, slash);
        path_ = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);
        if (host_.size() == scheme.size()) throw ConfigError("geocoder endpoint has no host");
    }

    std::optional<GeoPoint> lookup(std::string_view query) override {
        httplib::Client client(host_);
        auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
        auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        httplib::Params params{{cfg_.query_param, std::string(query)}};
        if (!cfg_.api_key.empty()) params.emplace(cfg_.key_param, cfg_.api_key);
        auto res = client.Get(path_, params, httplib::Headers{});
        if (!res) throw GeocoderUnavailable("geocoder " + host_ + ": " + httplib::to_string(res.error()));
        if (res->status == 404) return std::nullopt;
        if (res->status != 200) throw GeocoderUnavailable("geocoder " + host_ + ": HTTP " + std::to_string(res->status));

        try {
            auto body = nlohmann::json::parse(res->body);
            const auto* lat = detail::json_at_path(body, cfg_.lat_path);
            const auto* lon = detail::json_at_path(body, cfg_.lon_path);
            if (!lat || !lon || lat->is_null() || lon->is_null()) return std::nullopt;
            GeoPoint p{detail::json_number(*lat), detail::json_number(*lon), GeoSource::ExternalGeocoder,
                       std::string(query)};
            if (!p.valid()) throw FormatError("coordinates out of range");
            return p;
        } catch (const std::exception& e) {
            throw GeocoderUnavailable("geocoder " + host_ + ": bad response: " + e.what());
        }
    }

private:
    HttpGeocoderConfig cfg_;
    std::string host_;
    std::string path_;
};

// Post coordinates win; then the longest gazetteer match over the sanitized
// tokens; then at most one external lookup of the sanitized text.
// GeocoderUnavailable propagates so the caller can decide how to degrade.
inline std::optional<GeoPoint> resolve_location(const RawPost& post, const SanitizedPost& sanitized,
                                                const Gazetteer& gaz, Geocoder* external = nullptr) {
    if (post.coords && post.coords->valid()) {
        return GeoPoint{post.coords->lat, post.coords->lon, GeoSource::PostMetadata, std::nullopt};
    }
    if (auto hit = gaz.match(sanitized.tokens)) return hit;
    if (external && !sanitized.tokens.empty()) return external->lookup(sanitized.text());
    return std::nullopt;
}

} // namespace cityalert
