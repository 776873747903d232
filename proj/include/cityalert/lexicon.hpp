#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "text.hpp"

namespace cityalert {

// Lowercase word list with unigram counts. Serves as the set of valid words
// for compression and spelling, and as the language model for normalization.
class Dictionary {
public:
    Dictionary() = default;

    // Adds or overwrites a word. The word is lowercased.
    void add(std::string_view word, std::uint64_t count) {
        std::string w = text::to_lower(word);
        auto [it, inserted] = counts_.try_emplace(w, count);
        if (!inserted) {
            total_ -= it->second;
            it->second = count;
        } else {
            if (by_length_.size() <= w.size()) by_length_.resize(w.size() + 1);
            by_length_[w.size()].push_back(w);
        }
        total_ += count;
    }

    bool contains(std::string_view word) const {
        return counts_.find(std::string(word)) != counts_.end();
    }

    std::uint64_t frequency(std::string_view word) const {
        auto it = counts_.find(std::string(word));
        return it == counts_.end() ? 0 : it->second;
    }

    // Add-one smoothed unigram probability; nonzero for unseen words.
    double smoothed_probability(std::string_view word) const {
        return (static_cast<double>(frequency(word)) + 1.0) /
               (static_cast<double>(total_) + static_cast<double>(counts_.size()) + 1.0);
    }

    std::size_t size() const { return counts_.size(); }
    std::uint64_t total_count() const { return total_; }

    // Words of exactly `len` bytes, in insertion order.
    const std::vector<std::string>& words_of_length(std::size_t len) const {
        static const std::vector<std::string> empty;
        return len < by_length_.size() ? by_length_[len] : empty;
    }

    std::size_t max_word_length() const {
        return by_length_.empty() ? 0 : by_length_.size() - 1;
    }

    // "word<TAB>count" per line; blank lines and '#' comments are skipped.
    static Dictionary load(const std::string& path) {
        Dictionary dict;
        text::for_each_line(path, [&](const std::string& line, std::size_t lineno) {
            auto body = text::trim(line);
            if (body.empty() || body.front() == '#') return;
            auto fields = text::split(line, '\t');
            if (fields.size() != 2 || fields[0].empty()) {
                throw FormatError(path + ":" + std::to_string(lineno) + ": expected word<TAB>count");
            }
            dict.add(fields[0], parse_count(fields[1], path, lineno));
        });
        return dict;
    }

    static std::uint64_t parse_count(const std::string& s, const std::string& path,
                                     std::size_t lineno) {
        try {
            std::size_t used = 0;
            long long v = std::stoll(s, &used);
            if (used != s.size() || v < 0) throw std::invalid_argument(s);
            return static_cast<std::uint64_t>(v);
        } catch (const std::logic_error&) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": bad count '" + s + "'");
        }
    }

private:
    std::unordered_map<std::string, std::uint64_t> counts_;
    std::vector<std::vector<std::string>> by_length_;
    std::uint64_t total_ = 0;
};

struct NormalizationCandidate {
    std::string phrase;  // space-separated target tokens
    std::uint64_t count = 0;
};

// Un-normalized phrase -> weighted normalized alternatives.
class NormalizationMap {
public:
    // Identity pairs are ignored; a key is stored lowercased.
    void add(std::string_view source, std::string_view target, std::uint64_t count) {
        if (count == 0) throw FormatError("normalization count must be positive");
        std::string key = text::join(text::split_whitespace(text::to_lower(source)), " ");
        std::string value = text::join(text::split_whitespace(text::to_lower(target)), " ");
        if (key.empty() || value.empty() || key == value) return;
        auto& cands = pairs_[key];
        auto it = std::find_if(cands.begin(), cands.end(),
                               [&](const auto& c) { return c.phrase == value; });
        if (it == cands.end()) {
            cands.push_back({value, count});
        } else {
            it->count += count;
        }
        max_key_tokens_ = std::max(max_key_tokens_, text::split_whitespace(key).size());
    }

    const std::vector<NormalizationCandidate>* find(const std::string& key) const {
        auto it = pairs_.find(key);
        return it == pairs_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return pairs_.size(); }
    std::size_t max_key_tokens() const { return max_key_tokens_; }

    // "source<TAB>target<TAB>count" per line.
    static NormalizationMap load(const std::string& path) {
        NormalizationMap map;
        text::for_each_line(path, [&](const std::string& line, std::size_t lineno) {
            auto body = text::trim(line);
            if (body.empty() || body.front() == '#') return;
            auto fields = text::split(line, '\t');
            if (fields.size() != 3) {
                throw FormatError(path + ":" + std::to_string(lineno) +
                                  ": expected source<TAB>target<TAB>count");
            }
            auto count = Dictionary::parse_count(fields[2], path, lineno);
            if (count == 0) {
                throw FormatError(path + ":" + std::to_string(lineno) + ": count must be positive");
            }
            map.add(fields[0], fields[1], count);
        });
        return map;
    }

private:
    std::map<std::string, std::vector<NormalizationCandidate>> pairs_;
    std::size_t max_key_tokens_ = 0;
};

} // namespace cityalert
