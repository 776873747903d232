#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "config.hpp"
#include "incident.hpp"
#include "pipeline.hpp"
#include "preferences.hpp"
#include "queue.hpp"
#include "store.hpp"

namespace cityalert {

// One server-push frame. Incident events carry the incident id as the event
// id so clients can resume with Last-Event-ID.
struct StreamEvent {
    std::string id;
    std::string event;
    std::string data;

    std::string frame() const {
        std::string out;
        if (!id.empty()) out += "id: " + id + "\n";
        out += "event: " + event + "\n";
        out += "data: " + data + "\n\n";
        return out;
    }
};

// Per-connection delivery queue. Bounded: on overflow the oldest event is
// dropped and a gap marker is emitted before the next delivery.
class Subscription {
public:
    using Filter = std::function<bool(const Incident&)>;

    Subscription(Filter filter, std::size_t capacity) : filter_(std::move(filter)), capacity_(capacity) {}

    bool wants(const Incident& inc) const { return filter_(inc); }

    void push(StreamEvent ev) {
        std::lock_guard lock(mu_);
        if (closed_) return;
        if (events_.size() >= capacity_) {
            events_.pop_front();
            ++dropped_;
        }
        events_.push_back(std::move(ev));
        cv_.notify_one();
    }

    // Waits up to `timeout` for events. nullopt once closed.
    std::optional<std::vector<StreamEvent>> wait(std::chrono::milliseconds timeout) {
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, timeout, [&] { return closed_ || !events_.empty(); });
        if (closed_) return std::nullopt;
        std::vector<StreamEvent> out;
        if (dropped_ > 0) {
            out.push_back({"", "gap", nlohmann::json{{"reason", "overflow"}, {"dropped", dropped_}}.dump()});
            dropped_ = 0;
        }
        while (!events_.empty()) {
            out.push_back(std::move(events_.front()));
            events_.pop_front();
        }
        return out;
    }

    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        cv_.notify_all();
    }

private:
    Filter filter_;
    const std::size_t capacity_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<StreamEvent> events_;
    std::size_t dropped_ = 0;
    bool closed_ = false;
};

// Fan-out of new incidents to live subscriptions.
class Broadcaster {
public:
    std::shared_ptr<Subscription> subscribe(Subscription::Filter filter, std::size_t capacity) {
        auto sub = std::make_shared<Subscription>(std::move(filter), capacity);
        std::lock_guard lock(mu_);
        if (closed_) {
            sub->close();
        } else {
            subs_.push_back(sub);
        }
        return sub;
    }

    void unsubscribe(const std::shared_ptr<Subscription>& sub) {
        sub->close();
        std::lock_guard lock(mu_);
        subs_.remove(sub);
    }

    void publish(const Incident& inc, const StreamEvent& ev) {
        std::lock_guard lock(mu_);
        for (const auto& sub : subs_) {
            if (sub->wants(inc)) sub->push(ev);
        }
    }

    void close_all() {
        std::lock_guard lock(mu_);
        closed_ = true;
        for (const auto& sub : subs_) sub->close();
        subs_.clear();
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return subs_.size();
    }

private:
    mutable std::mutex mu_;
    std::list<std::shared_ptr<Subscription>> subs_;
    bool closed_ = false;
};

// Ingest queue → pipeline worker → store + broadcast, behind an HTTP API.
class Service {
public:
    Service(AppConfig cfg, std::shared_ptr<const PipelineContext> ctx, Clock clock = system_clock())
        : cfg_(checked(std::move(cfg))),
          ctx_(std::move(ctx)),
          clock_(clock),
          store_(cfg_.incidents_log(), cfg_.max_log_bytes),
          prefs_(cfg_.categories, cfg_.preferences_log()),
          queue_(cfg_.queue_capacity),
          processor_(ctx_, std::move(clock)) {
        worker_ = std::thread([this] { processor_.consume(queue_, [this](const Incident& inc) { record(inc); }); });
    }

    ~Service() { stop(); }

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Stops accepting posts, finishes the queued ones, and ends all streams.
    void stop() {
        std::call_once(stopped_, [this] {
            queue_.close();
            if (worker_.joinable()) worker_.join();
            broadcaster_.close_all();
        });
    }

    enum class IngestStatus { Accepted, Malformed, Busy };

    // Never blocks: a full queue answers Busy.
    IngestStatus accept(const SourceItem& item) {
        if (!item.post) return IngestStatus::Malformed;
        if (!queue_.try_push(item)) return IngestStatus::Busy;
        ++accepted_;
        return IngestStatus::Accepted;
    }

    // Blocks until every accepted post has been processed.
    void drain() const {
        while (processor_.summary().ingested < accepted_.load()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
    }

    nlohmann::json event_payload(const Incident& inc) const {
        return {{"incident", inc}, {"contacts", cfg_.contacts_for(inc.category)}};
    }

    const AppConfig& config() const { return cfg_; }
    IncidentStore& store() { return store_; }
    PreferenceStore& preferences() { return prefs_; }
    Broadcaster& broadcaster() { return broadcaster_; }
    StreamSummary summary() const { return processor_.summary(); }
    std::size_t queue_depth() const { return queue_.size(); }
    std::size_t accepted() const { return accepted_.load(); }
    std::size_t delivery_failures() const { return delivery_failures_.load(); }
    Timestamp now() const { return clock_(); }

    // Pipeline sink: store, then publish if the id is new. Returns false for
    // duplicates and storage failures (which are logged and counted).
    bool record(const Incident& inc) {
        try {
            if (!store_.append(inc)) return false;
        } catch (const std::exception& e) {
            ++delivery_failures_;
            spdlog::error("incident {}: not stored: {}", inc.id, e.what());
            return false;
        }
        broadcaster_.publish(inc, {inc.id, "incident", event_payload(inc).dump()});
        return true;
    }

private:
    static AppConfig checked(AppConfig cfg) {
        cfg.check();
        return cfg;
    }

    AppConfig cfg_;
    std::shared_ptr<const PipelineContext> ctx_;
    Clock clock_;
    IncidentStore store_;
    PreferenceStore prefs_;
    Broadcaster broadcaster_;
    BoundedQueue<SourceItem> queue_;
    StreamProcessor processor_;
    std::thread worker_;
    std::once_flag stopped_;
    std::atomic<std::size_t> accepted_{0};
    std::atomic<std::size_t> delivery_failures_{0};
};

namespace detail {

inline void json_response(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

inline void error_response(httplib::Response& res, int status, const std::string& message) {
    json_response(res, status, {{"error", message}});
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (const auto& part : text::split(s, ',')) {
        auto t = std::string(text::trim(part));
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

} // namespace detail

// Binds the HTTP routes of a Service.
class HttpApi {
public:
    explicit HttpApi(Service& service) : svc_(service) {
        const int threads = svc_.config().http_threads;
        server_.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
        routes();
        const auto& dir = svc_.config().static_dir;
        if (!dir.empty() && std::filesystem::is_directory(dir)) server_.set_mount_point("/", dir);
    }

    ~HttpApi() { stop(); }

    // Binds to host:port (0 picks a free port) and serves on a background thread.
    int start(const std::string& host, int port) {
        int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return bound;
    }

    void stop() {
        if (stopping_.exchange(true)) return;
        svc_.broadcaster().close_all();
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    void wait() {
        if (thread_.joinable()) thread_.join();
    }

    httplib::Server& server() { return server_; }

private:
    void routes() {
        server_.Post("/api/posts", [this](const httplib::Request& req, httplib::Response& res) {
            SourceItem item;
            try {
                auto body = nlohmann::json::parse(req.body);
                std::optional<Timestamp> received;
                if (!body.is_object() || !body.contains("timestamp") || body["timestamp"].is_null()) received = svc_.now();
                item.post = parse_post(body, received);
            } catch (const std::exception& e) {
                return detail::error_response(res, 400, e.what());
            }
            switch (svc_.accept(item)) {
            case Service::IngestStatus::Accepted:
                return detail::json_response(res, 202, {{"id", item.post->id}, {"status", "accepted"}});
            case Service::IngestStatus::Busy:
                res.set_header("Retry-After", "1");
                return detail::error_response(res, 429, "ingest queue full");
            case Service::IngestStatus::Malformed: break;
            }
            detail::error_response(res, 400, "malformed post");
        });

        server_.Get("/api/incidents", [this](const httplib::Request& req, httplib::Response& res) {
            IncidentQuery q;
            try {
                if (req.has_param("since")) q.since = parse_timestamp(req.get_param_value("since"));
                if (req.has_param("category")) q.category = req.get_param_value("category");
                if (req.has_param("bbox")) q.bbox = parse_bbox(req.get_param_value("bbox"));
                if (req.has_param("limit")) {
                    const auto& s = req.get_param_value("limit");
                    std::size_t used = 0;
                    long long v = std::stoll(s, &used);
                    if (used != s.size() || v < 1 || v > 10000) throw FormatError("limit must be in [1, 10000]");
                    q.limit = static_cast<std::size_t>(v);
                }
            } catch (const std::exception& e) {
                return detail::error_response(res, 400, e.what());
            }
            auto list = svc_.store().query(q);
            detail::json_response(res, 200, {{"incidents", list}, {"count", list.size()}});
        });

        server_.Get("/api/incidents/:id", [this](const httplib::Request& req, httplib::Response& res) {
            auto inc = svc_.store().get(req.path_params.at("id"));
            if (!inc) return detail::error_response(res, 404, "no such incident");
            detail::json_response(res, 200, *inc);
        });

        server_.Get("/api/contacts", [this](const httplib::Request& req, httplib::Response& res) {
            const auto& cfg = svc_.config();
            if (!req.has_param("category")) return detail::json_response(res, 200, {{"contacts", cfg.contacts}});
            auto cat = req.get_param_value("category");
            if (!cfg.has_category(cat)) return detail::error_response(res, 404, "unknown category '" + cat + "'");
            detail::json_response(res, 200, {{"contacts", cfg.contacts_for(cat)}});
        });

        server_.Get("/api/categories", [this](const httplib::Request&, httplib::Response& res) {
            const auto& cfg = svc_.config();
            detail::json_response(res, 200, {{"categories", cfg.categories}, {"bbox", cfg.bbox}});
        });

        server_.Get("/api/preferences/:user", [this](const httplib::Request& req, httplib::Response& res) {
            detail::json_response(res, 200, svc_.preferences().get(req.path_params.at("user")));
        });

        server_.Put("/api/preferences/:user", [this](const httplib::Request& req, httplib::Response& res) {
            UserPreferences p;
            try {
                auto body = nlohmann::json::parse(req.body);
                if (!body.is_object()) throw FormatError("body must be an object");
                body["user"] = req.path_params.at("user");
                p = body.get<UserPreferences>();
                p = svc_.preferences().put(p);
            } catch (const std::exception& e) {
                return detail::error_response(res, 400, e.what());
            }
            detail::json_response(res, 200, p);
        });

        server_.Get("/api/wordcloud", [this](const httplib::Request&, httplib::Response& res) {
            std::ifstream in(svc_.config().wordcloud);
            if (!in) return detail::error_response(res, 404, "no attribute ranking has been exported");
            try {
                auto j = nlohmann::json::parse(in);
                detail::json_response(res, 200, j);
            } catch (const std::exception& e) {
                detail::error_response(res, 500, std::string("word cloud export unreadable: ") + e.what());
            }
        });

        server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            detail::json_response(res, 200,
                                  {{"status", "ok"},
                                   {"incidents", svc_.store().size()},
                                   {"queue_depth", svc_.queue_depth()},
                                   {"subscribers", svc_.broadcaster().size()},
                                   {"delivery_failures", svc_.delivery_failures()},
                                   {"summary", svc_.summary()}});
        });

        server_.Get("/api/stream", [this](const httplib::Request& req, httplib::Response& res) { stream(req, res); });
    }

    void stream(const httplib::Request& req, httplib::Response& res) {
        const auto& cfg = svc_.config();
        std::optional<std::set<std::string>> categories;
        std::optional<BoundingBox> bbox;
        std::optional<std::string> user;
        try {
            if (req.has_param("category")) {
                categories.emplace();
                for (const auto& c : detail::split_list(req.get_param_value("category"))) {
                    if (!cfg.has_category(c)) throw FormatError("unknown category '" + c + "'");
                    categories->insert(c);
                }
            }
            if (req.has_param("bbox")) bbox = parse_bbox(req.get_param_value("bbox"));
            if (req.has_param("user")) user = req.get_param_value("user");
        } catch (const std::exception& e) {
            return detail::error_response(res, 400, e.what());
        }
        std::string last_id = req.get_header_value("Last-Event-ID");
        if (last_id.empty() && req.has_param("last_event_id")) last_id = req.get_param_value("last_event_id");

        auto& prefs = svc_.preferences();
        Subscription::Filter filter = [categories, bbox, user, &prefs](const Incident& inc) {
            if (categories && !categories->count(inc.category)) return false;
            if (!matches(inc, std::nullopt, bbox)) return false;
            if (user && !prefs.get(*user).wants(inc)) return false;
            return true;
        };

        // Subscribe before reading the backlog so nothing falls between the
        // two; live events already replayed are skipped by id.
        struct State {
            std::shared_ptr<Subscription> sub;
            std::vector<StreamEvent> pending;
            std::unordered_set<std::string> replayed;
        };
        auto state = std::make_shared<State>();
        state->sub = svc_.broadcaster().subscribe(filter, cfg.subscriber_queue_capacity);
        state->pending.push_back({"", "hello", nlohmann::json{{"resumed_from", last_id.empty() ? nlohmann::json(nullptr)
                                                                                                : nlohmann::json(last_id)}}
                                                   .dump()});
        if (!last_id.empty()) {
            if (auto missed = svc_.store().after(last_id)) {
                for (const auto& inc : *missed) {
                    if (!filter(inc)) continue;
                    state->replayed.insert(inc.id);
                    state->pending.push_back({inc.id, "incident", svc_.event_payload(inc).dump()});
                }
            } else {
                state->pending.push_back({"", "gap", nlohmann::json{{"reason", "unknown-last-event-id"}}.dump()});
            }
        }

        const auto keepalive = std::chrono::milliseconds(cfg.sse_keepalive_ms);
        res.set_header("Cache-Control", "no-cache");
        res.set_header("X-Accel-Buffering", "no");
        auto& broadcaster = svc_.broadcaster();
        res.set_chunked_content_provider(
            "text/event-stream",
            [state, keepalive](std::size_t, httplib::DataSink& sink) {
                auto send = [&](const std::string& s) { return sink.write(s.data(), s.size()); };
                if (!state->pending.empty()) {
                    std::string batch;
                    for (const auto& ev : state->pending) batch += ev.frame();
                    state->pending.clear();
                    return send(batch);
                }
                auto events = state->sub->wait(keepalive);
                if (!events) return false;
                if (events->empty()) return send(": keepalive\n\n");
                std::string batch;
                for (auto& ev : *events) {
                    if (!ev.id.empty() && state->replayed.erase(ev.id)) continue;
                    batch += ev.frame();
                }
                return batch.empty() ? true : send(batch);
            },
            [state, &broadcaster](bool) { broadcaster.unsubscribe(state->sub); });
    }

    Service& svc_;
    httplib::Server server_;
    std::thread thread_;
    std::atomic<bool> stopping_{false};
};

} // namespace cityalert
