#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dataset.hpp"
#include "time.hpp"

namespace cityalert {

struct CategoryKeywords {
    std::string category;
    std::vector<std::string> keywords;
};

// Shape of a generated labeled corpus. Defaults mirror a 3200-post corpus
// with 1313 emergencies.
struct SyntheticSpec {
    std::size_t positives = 1313;
    std::size_t negatives = 1887;
    std::vector<CategoryKeywords> categories = default_keywords();
    double text_noise = 0.0;   // chance a post gets stretched/abbreviated/tagged
    double label_noise = 0.0;  // chance the stage-1 label is flipped
    std::uint64_t seed = 42;

    static std::vector<CategoryKeywords> default_keywords() {
        return {{"fire", {"fire", "blaze"}},
                {"accident", {"accident", "collision"}},
                {"earthquake", {"earthquake", "tremors"}},
                {"cyclone", {"cyclone", "hurricane"}},
                {"theft", {"theft", "robbery"}},
                {"drunk-driving", {"drunk driving", "drunk driver"}}};
    }
};

namespace detail {

inline const std::vector<std::string>& synthetic_places() {
    static const std::vector<std::string> places{
        "powai", "andheri", "bandra", "dadar", "colaba", "juhu", "kurla", "worli",
        "vikhroli", "ghatkopar", "borivali", "malad", "chembur", "mulund", "goregaon", "sion"};
    return places;
}

// {k} = keyword, {p} = place. Every emergency template carries at least one
// distress word that benign templates never use, and places the keyword next
// to fixed words so keyword trigrams recur across posts.
inline const std::vector<std::string>& emergency_templates() {
    static const std::vector<std::string> t{
        "there is a {k} at {p} , please send help",
        "we see a huge {k} near {p} , people trapped",
        "a {k} was reported in {p} , need help urgently",
        "urgent : a {k} has hit {p} right now , call emergency services",
        "there was a major {k} at {p} station , many injured",
        "rescue teams needed asap , {k} in {p}",
        "help ! there is a {k} near {p} market , people injured",
        "emergency ! a terrible {k} at {p} , please respond",
        "a serious {k} on the road near {p} , send ambulance",
        "just witnessed a {k} in {p} , injured people need help",
    };
    return t;
}

inline const std::vector<std::string>& benign_templates() {
    static const std::vector<std::string> t{
        "I am so so drunk right now",
        "fire in my office , the boss is angry",
        "this new song is fire",
        "my playlist is on fire today",
        "that price at {p} mall is daylight robbery",
        "watched an earthquake documentary at home in {p}",
        "the match last night was a cyclone of emotions",
        "identity theft webinar in {p} tomorrow",
        "no drunk driving campaign launched in {p} , good initiative",
        "accident prone me dropped my phone again",
        "great weather today in {p}",
        "traffic is slow as usual near {p}",
        "new cafe opened in {p} , loved the coffee",
        "watching the cricket match with friends",
        "what a beautiful sunset at {p}",
        "long day at work , going to sleep early",
        "the food at this place in {p} is amazing",
        "movie night with family , such a fun evening",
        "shopping at {p} market this weekend",
        "finally finished my project , time to relax",
        "morning run along the sea face in {p}",
        "rain makes {p} look so green",
    };
    return t;
}

inline std::string replace_all(std::string s, std::string_view from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Stretches the first vowel of the first long-enough word: "fire" -> "fiiiire".
inline std::string stretch(const std::string& s, std::mt19937_64& rng) {
    auto words = text::split_whitespace(s);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (words[i].size() >= 4 && text::all_ascii_alpha(words[i])) eligible.push_back(i);
    }
    if (eligible.empty()) return s;
    std::string& w = words[eligible[pick(rng, eligible.size())]];
    auto v = w.find_first_of("aeiou", 1);
    if (v == std::string::npos) v = w.size() - 1;
    w.insert(v, std::string(3 + pick(rng, 3), w[v]));
    return text::join(words, " ");
}

inline std::string abbreviate(std::string s) {
    static const std::vector<std::pair<std::string, std::string>> chat{
        {"please", "plz"}, {"help", "hlp"}, {"people", "ppl"}, {"building", "bldng"},
        {"tomorrow", "2mrw"}, {"because", "coz"}, {"right now", "rn"}, {"you", "u"}};
    auto words = text::split_whitespace(s);
    for (auto& w : words) {
        for (const auto& [from, to] : chat) {
            if (w == from) w = to;
        }
    }
    return text::join(words, " ");
}

} // namespace detail

// Deterministic labeled corpus for desk-scale verification. Positives name a
// category keyword at a Mumbai locality; negatives come from a benign pool
// that sometimes uses the same keywords figuratively. Output order
// interleaves the classes pseudo-randomly.
inline Dataset generate_synthetic_corpus(const SyntheticSpec& spec) {
    if (spec.positives == 0 || spec.negatives == 0 || spec.categories.empty()) {
        throw std::invalid_argument("synthetic corpus needs both classes and a category");
    }
    if (spec.text_noise < 0.0 || spec.text_noise >= 1.0 || spec.label_noise < 0.0 ||
        spec.label_noise >= 1.0) {
        throw std::invalid_argument("noise rates must lie in [0, 1)");
    }
    std::mt19937_64 rng(spec.seed);
    const auto& places = detail::synthetic_places();
    const Timestamp start = parse_timestamp("2016-03-01T00:00:00Z");

    Dataset ds;
    ds.reserve(spec.positives + spec.negatives);
    // Template, keyword slot and place depend only on the round, so every
    // category sees the same context words and only the keyword separates them.
    const auto& templates = detail::emergency_templates();
    const std::size_t ncat = spec.categories.size();
    for (std::size_t i = 0; i < spec.positives; ++i) {
        const auto& cat = spec.categories[i % ncat];
        const std::size_t round = i / ncat;
        const auto& tpl = templates[round % templates.size()];
        const auto& kw = cat.keywords[(round / templates.size()) % cat.keywords.size()];
        std::mt19937_64 round_rng(spec.seed * 0x9e3779b97f4a7c15ull + round);
        std::string place = places[detail::pick(round_rng, places.size())];
        std::string textv = detail::replace_all(detail::replace_all(tpl, "{k}", kw), "{p}", place);
        LabeledPost p{textv, kEmergency, cat.category, std::nullopt, std::nullopt};
        p.coords = Coordinates{18.90 + 0.37 * detail::uniform01(rng), 72.78 + 0.24 * detail::uniform01(rng)};
        ds.push_back(std::move(p));
    }
    for (std::size_t i = 0; i < spec.negatives; ++i) {
        const auto& tpl = detail::benign_templates()[detail::pick(rng, detail::benign_templates().size())];
        std::string textv = detail::replace_all(tpl, "{p}", places[detail::pick(rng, places.size())]);
        ds.push_back(LabeledPost{textv, kNonEmergency, std::nullopt, std::nullopt, std::nullopt});
    }

    // Seeded interleave, then timestamps in final order. Text and label noise
    // draw from their own streams so either can change without moving the other.
    std::mt19937_64 text_rng(spec.seed ^ 0x7465787400000000ull);
    std::mt19937_64 label_rng(spec.seed ^ 0x6c6162656c000000ull);
    for (std::size_t i = ds.size(); i > 1; --i) std::swap(ds[i - 1], ds[detail::pick(rng, i)]);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto& p = ds[i];
        p.timestamp = start + std::chrono::seconds(60 * static_cast<long long>(i));
        if (spec.text_noise > 0.0 && detail::uniform01(text_rng) < spec.text_noise) {
            switch (detail::pick(text_rng, 3)) {
                case 0: p.text = detail::stretch(p.text, text_rng); break;
                case 1: p.text = detail::abbreviate(p.text); break;
                default: p.text = "@user" + std::to_string(i) + " " + p.text + " http://t.co/x" +
                                  std::to_string(i) + " #mumbai";
            }
        }
        if (spec.label_noise > 0.0 && detail::uniform01(label_rng) < spec.label_noise) {
            if (p.stage1_label == kEmergency) {
                p.stage1_label = kNonEmergency;
                p.category.reset();
            } else {
                p.stage1_label = kEmergency;
                p.category = spec.categories[detail::pick(label_rng, spec.categories.size())].category;
            }
        }
    }
    return ds;
}

} // namespace cityalert
