#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <cityalert/server.hpp>

#include "pipeline_fixtures.hpp"
#include "test_support.hpp"

namespace cityalert::testing {

inline std::vector<ContactEntry> fixture_contacts() {
    return {{"fire", "Mumbai Fire Brigade", "101", "fire and rescue"},
            {"accident", "Traffic Police Control", "103", "road accidents"},
            {"accident", "Ambulance", "108", "medical emergencies"},
            {"earthquake", "Disaster Management Cell", "1916", "municipal disaster response"},
            {"theft", "Police Control Room", "100", "crime"},
            {"drunk-driving", "Traffic Police Control", "103", "road safety"}};
    // cyclone deliberately has no entry
}

inline AppConfig fixture_config(const TempDir& dir) {
    AppConfig c;
    c.data_dir = dir.file("var");
    c.wordcloud = dir.file("wordcloud.json");
    c.categories = synthetic_categories();
    c.contacts = fixture_contacts();
    c.sse_keepalive_ms = 50;
    c.http_threads = 16;
    return c;
}

// A clock that blocks callers until opened; lets tests hold the pipeline
// worker mid-post to exercise backpressure.
class GateClock {
public:
    Clock clock() {
        return [this] {
            std::unique_lock lock(mu_);
            ++waiting_;
            cv_.notify_all();
            cv_.wait(lock, [&] { return open_; });
            --waiting_;
            return parse_timestamp("2016-03-01T12:00:00Z");
        };
    }
    void wait_until_blocked() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return waiting_ > 0; });
    }
    void open() {
        std::lock_guard lock(mu_);
        open_ = true;
        cv_.notify_all();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    bool open_ = false;
    int waiting_ = 0;
};

struct TestServer {
    explicit TestServer(const TempDir& dir, Clock clock = system_clock())
        : TestServer(fixture_config(dir), std::move(clock)) {}

    TestServer(AppConfig cfg, Clock clock = system_clock()) {
        service = std::make_unique<Service>(std::move(cfg), fixture_context(), std::move(clock));
        api = std::make_unique<HttpApi>(*service);
        port = api->start("127.0.0.1", 0);
    }

    ~TestServer() {
        api->stop();
        service->stop();
    }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(10, 0);
        return c;
    }

    std::unique_ptr<Service> service;
    std::unique_ptr<HttpApi> api;
    int port = 0;
};

struct ReceivedEvent {
    std::string id;
    std::string event;
    std::string data;
};

// Minimal event-stream client running on its own thread.
class SseClient {
public:
    SseClient(int port, std::string path, httplib::Headers headers = {}) {
        thread_ = std::thread([this, port, path = std::move(path), headers = std::move(headers)] {
            httplib::Client c("127.0.0.1", port);
            c.set_read_timeout(10, 0);
            auto res = c.Get(path, headers, [this](const char* data, std::size_t len) {
                std::lock_guard lock(mu_);
                buffer_.append(data, len);
                parse();
                cv_.notify_all();
                return !stop_;
            });
            std::lock_guard lock(mu_);
            if (res) status_ = res->status;
            finished_ = true;
            cv_.notify_all();
        });
    }

    ~SseClient() { close(); }

    void close() {
        {
            std::lock_guard lock(mu_);
            stop_ = true;
        }
        if (thread_.joinable()) thread_.join();
    }

    // Waits until `n` events named `event` have arrived (or timeout).
    bool wait_for(const std::string& event, std::size_t n, std::chrono::milliseconds timeout = std::chrono::seconds(5)) {
        std::unique_lock lock(mu_);
        return cv_.wait_for(lock, timeout, [&] { return count_locked(event) >= n || finished_; }) &&
               count_locked(event) >= n;
    }

    std::vector<ReceivedEvent> events(const std::string& event) const {
        std::lock_guard lock(mu_);
        std::vector<ReceivedEvent> out;
        for (const auto& e : events_) {
            if (e.event == event) out.push_back(e);
        }
        return out;
    }

    int status() const {
        std::lock_guard lock(mu_);
        return status_;
    }

    bool finished() const {
        std::lock_guard lock(mu_);
        return finished_;
    }

private:
    std::size_t count_locked(const std::string& event) const {
        std::size_t n = 0;
        for (const auto& e : events_) n += e.event == event;
        return n;
    }

    void parse() {
        for (;;) {
            auto end = buffer_.find("\n\n");
            if (end == std::string::npos) return;
            std::string frame = buffer_.substr(0, end);
            buffer_.erase(0, end + 2);
            ReceivedEvent ev;
            bool any = false;
            for (const auto& line : text::split(frame, '\n')) {
                if (line.empty() || line[0] == ':') continue;
                auto colon = line.find(':');
                auto field = line.substr(0, colon);
                auto value = colon == std::string::npos ? std::string() : line.substr(colon + 1);
                if (!value.empty() && value[0] == ' ') value.erase(0, 1);
                if (field == "id") ev.id = value;
                if (field == "event") ev.event = value;
                if (field == "data") ev.data += value;
                any = true;
            }
            if (any) events_.push_back(std::move(ev));
        }
    }

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::thread thread_;
    std::string buffer_;
    std::vector<ReceivedEvent> events_;
    bool stop_ = false;
    bool finished_ = false;
    int status_ = 0;
};

inline std::string post_body(const std::string& id, const std::string& text,
                             std::optional<Coordinates> c = std::nullopt) {
    nlohmann::json j{{"id", id}, {"text", text}, {"timestamp", "2016-03-01T10:00:00Z"}, {"author", "tester"}};
    if (c) {
        j["lat"] = c->lat;
        j["lon"] = c->lon;
    }
    return j.dump();
}

} // namespace cityalert::testing
