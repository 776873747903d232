#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "classifier.hpp"
#include "errors.hpp"
#include "geo.hpp"
#include "incident.hpp"
#include "lexicon.hpp"
#include "preprocess.hpp"
#include "queue.hpp"
#include "text.hpp"
#include "time.hpp"

namespace cityalert {

// ---------------------------------------------------------------------------
// Keyword pre-filter

namespace detail {

// Lowercases and turns every run of non-word bytes into one space, padded
// on both ends, so whole-word search becomes substring search.
inline std::string word_boundary_form(std::string_view s) {
    std::string out = " ";
    for (char c : s) {
        bool word = text::is_ascii_alnum(c) || static_cast<unsigned char>(c) >= 0x80;
        if (word) {
            out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
        } else if (out.back() != ' ') {
            out += ' ';
        }
    }
    if (out.back() != ' ') out += ' ';
    return out;
}

} // namespace detail

class FilterList {
public:
    // Phrases are lowercased, trimmed, whitespace-collapsed and deduplicated
    // keeping first occurrence. Throws ConfigError when nothing is left.
    explicit FilterList(const std::vector<std::string>& phrases) {
        std::set<std::string> seen;
        for (const auto& p : phrases) {
            auto norm = text::join(text::split_whitespace(text::to_lower(p)), " ");
            if (norm.empty() || !seen.insert(norm).second) continue;
            phrases_.push_back(norm);
            auto form = detail::word_boundary_form(norm);
            if (form != " ") patterns_.push_back(form);
        }
        if (patterns_.empty()) throw ConfigError("filter list is empty");
    }

    bool matches(std::string_view raw_text) const {
        auto hay = detail::word_boundary_form(raw_text);
        for (const auto& p : patterns_) {
            if (hay.find(p) != std::string::npos) return true;
        }
        return false;
    }

    const std::vector<std::string>& phrases() const { return phrases_; }

    // One phrase per line; blank lines and '#' comments ignored.
    static FilterList load(const std::string& path) {
        std::vector<std::string> phrases;
        text::for_each_line(path, [&](const std::string& line, std::size_t) {
            auto body = text::trim(line);
            if (body.empty() || body.front() == '#') return;
            phrases.emplace_back(body);
        });
        return FilterList(phrases);
    }

private:
    std::vector<std::string> phrases_;
    std::vector<std::string> patterns_;
};

inline const std::vector<std::string>& default_categories() {
    static const std::vector<std::string> c{"fire", "accident", "earthquake", "cyclone", "theft", "drunk-driving"};
    return c;
}

// The collection keywords plus per-category synonyms.
inline FilterList default_filter_list() {
    return FilterList({"fire", "earthquake", "theft", "robbery", "drunk driving", "drunk driving accident",
                       "blaze", "accident", "collision", "crash", "tremors", "tremor", "quake", "cyclone",
                       "hurricane", "storm", "burglary", "stolen", "drunk", "drunk driver"});
}

inline bool keyword_filter(const RawPost& post, const FilterList& filters) { return filters.matches(post.text); }

// ---------------------------------------------------------------------------
// Post records (JSON Lines / HTTP bodies)

// Fields: id, text, lat, lon, timestamp, author. lat/lon are optional but come
// together. A missing timestamp takes `default_time` when given.
inline RawPost parse_post(const nlohmann::json& j, std::optional<Timestamp> default_time = std::nullopt) {
    if (!j.is_object()) throw FormatError("post record must be a JSON object");
    RawPost post;
    auto id = j.find("id");
    if (id == j.end()) throw FormatError("post record has no id");
    if (id->is_string()) {
        post.id = id->get<std::string>();
    } else if (id->is_number_integer()) {
        post.id = std::to_string(id->get<long long>());
    } else {
        throw FormatError("post id must be a string or integer");
    }
    auto txt = j.find("text");
    if (txt == j.end() || !txt->is_string()) throw FormatError("post " + post.id + ": missing text");
    post.text = txt->get<std::string>();

    auto lat = j.find("lat");
    auto lon = j.find("lon");
    bool has_lat = lat != j.end() && !lat->is_null();
    bool has_lon = lon != j.end() && !lon->is_null();
    if (has_lat != has_lon) throw FormatError("post " + post.id + ": lat and lon must come together");
    if (has_lat) {
        if (!lat->is_number() || !lon->is_number()) throw FormatError("post " + post.id + ": lat/lon must be numbers");
        post.coords = Coordinates{lat->get<double>(), lon->get<double>()};
    }

    auto ts = j.find("timestamp");
    if (ts != j.end() && !ts->is_null()) {
        if (!ts->is_string()) throw FormatError("post " + post.id + ": timestamp must be a string");
        post.timestamp = parse_timestamp(ts->get<std::string>());
    } else if (default_time) {
        post.timestamp = *default_time;
    } else {
        throw FormatError("post " + post.id + ": missing timestamp");
    }

    if (auto a = j.find("author"); a != j.end() && !a->is_null()) {
        if (!a->is_string()) throw FormatError("post " + post.id + ": author must be a string");
        post.author = a->get<std::string>();
    }
    validate(post);
    return post;
}

inline nlohmann::json post_to_json(const RawPost& p) {
    nlohmann::json j{{"id", p.id}, {"text", p.text}, {"timestamp", format_timestamp(p.timestamp)}, {"author", p.author}};
    if (p.coords) {
        j["lat"] = p.coords->lat;
        j["lon"] = p.coords->lon;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Per-post processing

// Immutable, shared by every processing thread.
struct PipelineContext {
    TrainedStage stage1;
    TrainedStage stage2;
    Dictionary dict;
    NormalizationMap norm;
    Gazetteer gazetteer;
    FilterList filters = default_filter_list();
    BoundingBox bbox = kMumbaiBox;
    std::vector<std::string> categories = default_categories();
    std::shared_ptr<Geocoder> geocoder;  // optional
    std::string positive_label = "emergency";

    // Throws ConfigError when the models and configuration disagree.
    void check() const {
        if (!bbox.well_formed()) throw ConfigError("bbox is not well-formed");
        const auto& s1 = stage1.classes();
        if (std::find(s1.begin(), s1.end(), positive_label) == s1.end()) {
            throw ConfigError("stage-1 model has no class '" + positive_label + "'");
        }
        for (const auto& c : stage2.classes()) {
            if (std::find(categories.begin(), categories.end(), c) == categories.end()) {
                throw ConfigError("stage-2 class '" + c + "' is not a configured category");
            }
        }
    }
};

using Clock = std::function<Timestamp()>;

inline Clock system_clock() { return [] { return now_seconds(); }; }

enum class DropReason { None, Filter, EmptyAfterCleaning, Stage1 };

inline std::string to_string(DropReason r) {
    switch (r) {
    case DropReason::None: return "none";
    case DropReason::Filter: return "filter";
    case DropReason::EmptyAfterCleaning: return "empty-after-cleaning";
    case DropReason::Stage1: return "stage1";
    }
    return "unknown";
}

struct ProcessOutcome {
    std::optional<Incident> incident;
    DropReason reason = DropReason::None;
    std::optional<SanitizedPost> sanitized;  // set once cleaning succeeded
};

// filter → sanitize → stage 1 → stage 2 → geolocate. detected_at is the later
// of the clock and the post time, so it never precedes the post.
inline ProcessOutcome process_post(const RawPost& post, const PipelineContext& ctx, const Clock& clock) {
    ProcessOutcome out;
    if (!keyword_filter(post, ctx.filters)) {
        out.reason = DropReason::Filter;
        spdlog::debug("post {}: dropped ({})", post.id, to_string(out.reason));
        return out;
    }
    try {
        out.sanitized = sanitize(post, ctx.dict, ctx.norm);
    } catch (const EmptyAfterCleaning&) {
        out.reason = DropReason::EmptyAfterCleaning;
        spdlog::debug("post {}: dropped ({})", post.id, to_string(out.reason));
        return out;
    }
    const auto& s = *out.sanitized;
    auto detection = two_stage_classify(s, ctx.stage1, ctx.stage2, ctx.positive_label);
    if (!detection) {
        out.reason = DropReason::Stage1;
        spdlog::debug("post {}: dropped ({})", post.id, to_string(out.reason));
        return out;
    }

    Incident inc;
    inc.source_id = post.id;
    inc.category = detection->category;
    inc.id = incident_id(inc.source_id, inc.category);
    inc.stage1_score = detection->stage1.scores[detection->stage1.best];
    for (std::size_t i = 0; i < detection->stage2.classes.size(); ++i) {
        inc.stage2_scores[detection->stage2.classes[i]] = detection->stage2.scores[i];
    }
    try {
        inc.geo = resolve_location(post, s, ctx.gazetteer, ctx.geocoder.get());
    } catch (const GeocoderUnavailable& e) {
        spdlog::warn("post {}: {}; continuing without external geocoding", post.id, e.what());
        inc.geo = ctx.gazetteer.match(s.tokens);
    }
    inc.out_of_area = inc.geo && !in_bounds(*inc.geo, ctx.bbox);
    inc.sanitized_text = s.text();
    inc.raw_text = post.text;
    inc.posted_at = post.timestamp;
    inc.detected_at = std::max(clock(), post.timestamp);
    out.incident = std::move(inc);
    return out;
}

// ---------------------------------------------------------------------------
// Sources

// One item pulled from a source: a post, or the reason a record was unusable.
struct SourceItem {
    std::optional<RawPost> post;
    std::string error;
};

inline SourceItem parse_post_line(std::string_view line, std::optional<Timestamp> default_time = std::nullopt) {
    try {
        return {parse_post(nlohmann::json::parse(line), default_time), {}};
    } catch (const std::exception& e) {
        return {std::nullopt, e.what()};
    }
}

class PostSource {
public:
    virtual ~PostSource() = default;
    // nullopt when the source is exhausted or closed.
    virtual std::optional<SourceItem> next() = 0;
    // Unblocks a pending next(); called when the consumer aborts.
    virtual void interrupt() {}
};

// JSON Lines replay. rate > 0 throttles to that many posts per second.
class JsonlFileSource : public PostSource {
public:
    explicit JsonlFileSource(const std::string& path, double rate = 0.0) : in_(path), rate_(rate) {
        if (!in_) throw FormatError("cannot open " + path);
        if (rate < 0) throw std::invalid_argument("rate must be non-negative");
    }

    std::optional<SourceItem> next() override {
        std::string line;
        while (std::getline(in_, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (text::trim(line).empty()) continue;
            throttle();
            return parse_post_line(line);
        }
        return std::nullopt;
    }

private:
    void throttle() {
        if (rate_ <= 0) return;
        auto now = std::chrono::steady_clock::now();
        if (emitted_ == 0) start_ = now;
        auto due = start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                std::chrono::duration<double>(static_cast<double>(emitted_) / rate_));
        if (due > now) std::this_thread::sleep_until(due);
        ++emitted_;
    }

    std::ifstream in_;
    double rate_;
    std::size_t emitted_ = 0;
    std::chrono::steady_clock::time_point start_;
};

// Connects to host:port and reads JSON Lines until the peer closes.
class TcpLineSource : public PostSource {
public:
    TcpLineSource(const std::string& host, int port) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
            throw Error("cannot resolve " + host);
        }
        for (auto* ai = res; ai; ai = ai->ai_next) {
            int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
                fd_ = fd;
                break;
            }
            ::close(fd);
        }
        ::freeaddrinfo(res);
        if (fd_ < 0) throw Error("cannot connect to " + host + ":" + std::to_string(port));
    }

    ~TcpLineSource() override {
        if (fd_ >= 0) ::close(fd_);
    }

    std::optional<SourceItem> next() override {
        for (;;) {
            auto nl = buf_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (text::trim(line).empty()) continue;
                return parse_post_line(line);
            }
            char chunk[4096];
            auto n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n <= 0) {
                if (n < 0 && errno == EINTR) continue;
                if (text::trim(buf_).empty()) return std::nullopt;
                std::string line;
                line.swap(buf_);
                return parse_post_line(line);
            }
            buf_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void interrupt() override { ::shutdown(fd_, SHUT_RDWR); }

private:
    int fd_ = -1;
    std::string buf_;
};

// Fixed list, mostly for tests.
class VectorSource : public PostSource {
public:
    explicit VectorSource(std::vector<SourceItem> items) : items_(std::move(items)) {}
    std::optional<SourceItem> next() override {
        if (pos_ >= items_.size()) return std::nullopt;
        return items_[pos_++];
    }

private:
    std::vector<SourceItem> items_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Streaming

struct StreamSummary {
    std::size_t ingested = 0;
    std::size_t filtered = 0;
    std::size_t stage1_rejected = 0;
    std::size_t empty_dropped = 0;
    std::size_t malformed = 0;
    std::size_t duplicates = 0;
    std::size_t incidents = 0;

    bool conserved() const {
        return ingested == filtered + stage1_rejected + empty_dropped + malformed + duplicates + incidents;
    }
    friend bool operator==(const StreamSummary&, const StreamSummary&) = default;
};

inline void to_json(nlohmann::json& j, const StreamSummary& s) {
    j = {{"ingested", s.ingested},   {"filtered", s.filtered},   {"stage1_rejected", s.stage1_rejected},
         {"empty_dropped", s.empty_dropped}, {"malformed", s.malformed}, {"duplicates", s.duplicates},
         {"incidents", s.incidents}};
}

using IncidentSink = std::function<void(const Incident&)>;

// Consumes items in arrival order, drops repeated source ids, and hands
// incidents to the sink in the same order. Counters can be read while running.
class StreamProcessor {
public:
    StreamProcessor(std::shared_ptr<const PipelineContext> ctx, Clock clock = system_clock())
        : ctx_(std::move(ctx)), clock_(std::move(clock)) {}

    void handle(const SourceItem& item, const IncidentSink& sink) {
        std::lock_guard lock(mu_);
        ++summary_.ingested;
        if (!item.post) {
            ++summary_.malformed;
            spdlog::warn("skipping malformed record: {}", item.error);
            return;
        }
        const auto& post = *item.post;
        if (!seen_.insert(post.id).second) {
            ++summary_.duplicates;
            spdlog::debug("post {}: dropped (duplicate)", post.id);
            return;
        }
        auto outcome = process_post(post, *ctx_, clock_);
        switch (outcome.reason) {
        case DropReason::Filter: ++summary_.filtered; return;
        case DropReason::EmptyAfterCleaning: ++summary_.empty_dropped; return;
        case DropReason::Stage1: ++summary_.stage1_rejected; return;
        case DropReason::None: break;
        }
        ++summary_.incidents;
        sink(*outcome.incident);
    }

    // Runs until the queue is closed and drained.
    void consume(BoundedQueue<SourceItem>& queue, const IncidentSink& sink) {
        while (auto item = queue.pop()) handle(*item, sink);
    }

    StreamSummary summary() const {
        std::lock_guard lock(mu_);
        return summary_;
    }

private:
    std::shared_ptr<const PipelineContext> ctx_;
    Clock clock_;
    mutable std::mutex mu_;
    StreamSummary summary_;
    std::unordered_set<std::string> seen_;
};

struct StreamOptions {
    std::size_t queue_capacity = 1024;
    Clock clock = system_clock();
};

// Reader thread pulls from the source into a bounded queue (blocking when
// full); the calling thread classifies and feeds the sink. A throwing sink
// stops the run and the exception propagates.
inline StreamSummary run_stream(PostSource& source, std::shared_ptr<const PipelineContext> ctx,
                                const IncidentSink& sink, StreamOptions opts = {}) {
    BoundedQueue<SourceItem> queue(opts.queue_capacity);
    std::exception_ptr reader_error;
    std::thread reader([&] {
        try {
            while (auto item = source.next()) {
                if (!queue.push(std::move(*item))) break;
            }
        } catch (...) {
            reader_error = std::current_exception();
        }
        queue.close();
    });
    StreamProcessor processor(std::move(ctx), opts.clock);
    try {
        processor.consume(queue, sink);
    } catch (...) {
        queue.close();
        source.interrupt();
        reader.join();
        throw;
    }
    reader.join();
    if (reader_error) std::rethrow_exception(reader_error);
    return processor.summary();
}

} // namespace cityalert
