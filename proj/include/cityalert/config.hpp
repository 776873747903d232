#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "geo.hpp"
#include "models.hpp"
#include "pipeline.hpp"

namespace cityalert {

struct ContactEntry {
    std::string category;
    std::string authority;
    std::string phone;
    std::string description;

    friend bool operator==(const ContactEntry&, const ContactEntry&) = default;
};

inline void to_json(nlohmann::json& j, const ContactEntry& c) {
    j = {{"category", c.category}, {"authority", c.authority}, {"phone", c.phone}, {"description", c.description}};
}

inline void from_json(const nlohmann::json& j, ContactEntry& c) {
    c.category = j.at("category").get<std::string>();
    c.authority = j.at("authority").get<std::string>();
    c.phone = j.at("phone").get<std::string>();
    c.description = j.value("description", "");
}

// Service configuration. Asset paths are resolved against the directory of
// the config file; data_dir holds the mutable logs.
struct AppConfig {
    int version = 1;
    int port = 8080;
    std::string host = "0.0.0.0";
    std::string data_dir = "var";
    std::string models_dir = "models";
    std::string dictionary = "dictionary.tsv";
    std::string normalization = "normalization.tsv";
    std::string gazetteer = "gazetteer.tsv";
    std::string filters;    // empty: built-in list
    std::string wordcloud = "wordcloud.json";
    std::string static_dir;  // empty: no static files
    std::vector<std::string> categories = default_categories();
    BoundingBox bbox = kMumbaiBox;
    std::size_t queue_capacity = 1024;
    std::size_t subscriber_queue_capacity = 256;
    int sse_keepalive_ms = 15000;
    int http_threads = 32;
    std::uint64_t max_log_bytes = 0;  // 0: unlimited
    std::optional<HttpGeocoderConfig> geocoder;
    std::vector<ContactEntry> contacts;

    std::string incidents_log() const { return (std::filesystem::path(data_dir) / "incidents.log").string(); }
    std::string preferences_log() const { return (std::filesystem::path(data_dir) / "preferences.log").string(); }

    // Throws ConfigError on inconsistent settings.
    void check() const {
        if (version != 1) throw ConfigError("unsupported config version " + std::to_string(version));
        if (port < 0 || port > 65535) throw ConfigError("port out of range");
        if (categories.empty()) throw ConfigError("no categories configured");
        if (!bbox.well_formed()) throw ConfigError("bbox is not well-formed");
        if (queue_capacity == 0 || subscriber_queue_capacity == 0) throw ConfigError("queue capacities must be positive");
        if (http_threads < 2) throw ConfigError("http_threads must be at least 2");
        for (const auto& c : contacts) {
            if (std::find(categories.begin(), categories.end(), c.category) == categories.end()) {
                throw ConfigError("contact for unknown category '" + c.category + "'");
            }
            if (c.phone.empty()) throw ConfigError("contact '" + c.authority + "' has no phone");
        }
    }

    std::vector<ContactEntry> contacts_for(const std::string& category) const {
        std::vector<ContactEntry> out;
        for (const auto& c : contacts) {
            if (c.category == category) out.push_back(c);
        }
        return out;
    }

    bool has_category(const std::string& c) const {
        return std::find(categories.begin(), categories.end(), c) != categories.end();
    }
};

namespace detail {

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

inline int parse_port(const std::string& s) {
    try {
        std::size_t used = 0;
        int v = std::stoi(s, &used);
        if (used != s.size() || v < 0 || v > 65535) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("invalid port '" + s + "'");
    }
}

} // namespace detail

// Parses the config JSON; relative paths are taken against `base_dir`.
inline AppConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    AppConfig c;
    try {
        c.version = j.value("version", 1);
        c.port = j.value("port", c.port);
        c.host = j.value("host", c.host);
        c.data_dir = j.value("data_dir", c.data_dir);
        c.models_dir = j.value("models", c.models_dir);
        c.dictionary = j.value("dictionary", c.dictionary);
        c.normalization = j.value("normalization", c.normalization);
        c.gazetteer = j.value("gazetteer", c.gazetteer);
        c.filters = j.value("filters", c.filters);
        c.wordcloud = j.value("wordcloud", c.wordcloud);
        c.static_dir = j.value("static_dir", c.static_dir);
        if (j.contains("categories")) c.categories = j.at("categories").get<std::vector<std::string>>();
        if (j.contains("bbox")) c.bbox = j.at("bbox").get<BoundingBox>();
        c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
        c.subscriber_queue_capacity = j.value("subscriber_queue_capacity", c.subscriber_queue_capacity);
        c.sse_keepalive_ms = j.value("sse_keepalive_ms", c.sse_keepalive_ms);
        c.http_threads = j.value("http_threads", c.http_threads);
        c.max_log_bytes = j.value("max_log_bytes", c.max_log_bytes);
        if (auto g = j.find("geocoder"); g != j.end() && !g->is_null()) {
            HttpGeocoderConfig gc;
            gc.endpoint = g->at("endpoint").get<std::string>();
            gc.query_param = g->value("query_param", gc.query_param);
            gc.key_param = g->value("key_param", gc.key_param);
            gc.api_key = g->value("api_key", gc.api_key);
            gc.lat_path = g->value("lat_path", gc.lat_path);
            gc.lon_path = g->value("lon_path", gc.lon_path);
            gc.timeout = std::chrono::milliseconds(g->value("timeout_ms", 2000));
            c.geocoder = gc;
        }
        if (j.contains("contacts")) c.contacts = j.at("contacts").get<std::vector<ContactEntry>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const FormatError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (auto* p : {&c.data_dir, &c.models_dir, &c.dictionary, &c.normalization, &c.gazetteer, &c.filters,
                    &c.wordcloud, &c.static_dir}) {
        *p = detail::resolve_path(base_dir, *p);
    }
    return c;
}

// Reads the config file, then applies CITYALERT_PORT and CITYALERT_DATA_DIR.
inline AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    auto base = std::filesystem::absolute(path).parent_path();
    AppConfig c = parse_config(j, base);
    if (const char* port = std::getenv("CITYALERT_PORT"); port && *port) c.port = detail::parse_port(port);
    if (const char* dir = std::getenv("CITYALERT_DATA_DIR"); dir && *dir) {
        c.data_dir = std::filesystem::absolute(dir).lexically_normal().string();
    }
    c.check();
    return c;
}

// Loads models and lexicons named by the config into an immutable context.
inline std::shared_ptr<const PipelineContext> load_context(const AppConfig& cfg) {
    auto ctx = std::make_shared<PipelineContext>();
    auto models = load_models(cfg.models_dir);
    ctx->stage1 = std::move(models.stage1);
    ctx->stage2 = std::move(models.stage2);
    ctx->dict = Dictionary::load(cfg.dictionary);
    ctx->norm = NormalizationMap::load(cfg.normalization);
    ctx->gazetteer = Gazetteer::load(cfg.gazetteer);
    if (!cfg.filters.empty()) ctx->filters = FilterList::load(cfg.filters);
    ctx->bbox = cfg.bbox;
    ctx->categories = cfg.categories;
    if (cfg.geocoder) ctx->geocoder = std::make_shared<HttpGeocoder>(*cfg.geocoder);
    ctx->check();
    return ctx;
}

} // namespace cityalert
