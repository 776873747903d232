#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "text.hpp"

namespace cityalert {

struct FeatureOptions {
    std::size_t order = 1;  // 1 = unigrams, 3 = word trigrams
    // For order 3: documents shorter than three tokens contribute the
    // trigrams of their "<s> ... </s>" padded form instead of nothing.
    bool fallback_short_docs = true;
    bool binary = false;  // presence instead of term counts

    friend bool operator==(const FeatureOptions&, const FeatureOptions&) = default;
};

inline constexpr std::string_view kSentenceStart = "<s>";
inline constexpr std::string_view kSentenceEnd = "</s>";

inline std::vector<std::string> extract_ngrams(std::span<const std::string> doc,
                                               const FeatureOptions& opts) {
    if (opts.order != 1 && opts.order != 3) {
        throw std::invalid_argument("n-gram order must be 1 or 3");
    }
    const std::size_t n = opts.order;
    std::vector<std::string> grams;
    auto emit = [&](std::span<const std::string> toks) {
        for (std::size_t i = 0; i + n <= toks.size(); ++i) {
            std::string g = toks[i];
            for (std::size_t k = 1; k < n; ++k) {
                g += ' ';
                g += toks[i + k];
            }
            grams.push_back(std::move(g));
        }
    };
    if (doc.size() >= n) {
        emit(doc);
    } else if (n > 1 && opts.fallback_short_docs && !doc.empty()) {
        std::vector<std::string> padded;
        padded.emplace_back(kSentenceStart);
        padded.insert(padded.end(), doc.begin(), doc.end());
        padded.emplace_back(kSentenceEnd);
        emit(padded);
    }
    return grams;
}

struct FeatureVector {
    std::vector<std::pair<std::uint32_t, double>> entries;  // strictly increasing index
    std::size_t dimension = 0;

    bool empty() const { return entries.empty(); }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

class Vocabulary {
public:
    Vocabulary() = default;

    std::size_t order() const { return order_; }
    std::size_t size() const { return features_.size(); }
    const std::vector<std::string>& features() const { return features_; }
    const std::string& feature(std::size_t i) const { return features_.at(i); }

    std::optional<std::uint32_t> index_of(const std::string& feature) const {
        auto it = index_.find(feature);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(const std::string& feature) const { return index_.count(feature) > 0; }

    // Stable content digest of the serialized form.
    std::uint64_t hash() const {
        std::uint64_t h = text::fnv1a64("vocab");
        for (std::size_t i = 0; i < features_.size(); ++i) {
            h = text::fnv1a64(std::to_string(i) + "\t" + features_[i] + "\n", h);
        }
        return h;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw FormatError("cannot write " + path);
        for (std::size_t i = 0; i < features_.size(); ++i) out << i << '\t' << features_[i] << '\n';
        if (!out) throw FormatError("write failed: " + path);
    }

    // The n-gram order is taken from the token count of the features.
    static Vocabulary load(const std::string& path) {
        Vocabulary v;
        text::for_each_line(path, [&](const std::string& line, std::size_t lineno) {
            if (line.empty()) return;
            auto tab = line.find('\t');
            if (tab == std::string::npos || line.substr(0, tab) != std::to_string(v.size())) {
                throw FormatError(path + ":" + std::to_string(lineno) + ": expected index<TAB>feature");
            }
            std::string feature = line.substr(tab + 1);
            std::size_t order = text::split_whitespace(feature).size();
            if (v.order_ == 0) v.order_ = order;
            if (order != v.order_ || !v.insert(feature)) {
                throw FormatError(path + ":" + std::to_string(lineno) + ": bad feature");
            }
        });
        if (v.order_ == 0) throw EmptyVocabulary(path + " is empty");
        return v;
    }

    static Vocabulary fit(std::span<const std::vector<std::string>> docs, const FeatureOptions& opts) {
        if (docs.empty()) throw std::invalid_argument("no documents to fit");
        Vocabulary v;
        v.order_ = opts.order;
        for (const auto& doc : docs) {
            for (auto& g : extract_ngrams(doc, opts)) v.insert(std::move(g));
        }
        if (v.size() == 0) throw EmptyVocabulary("no document yields an n-gram");
        return v;
    }

private:
    bool insert(std::string feature) {
        auto [it, inserted] = index_.try_emplace(feature, static_cast<std::uint32_t>(features_.size()));
        if (inserted) features_.push_back(std::move(feature));
        return inserted;
    }

    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<std::string> features_;
    std::size_t order_ = 0;
};

inline Vocabulary fit_vocabulary(std::span<const std::vector<std::string>> docs,
                                 const FeatureOptions& opts) {
    return Vocabulary::fit(docs, opts);
}

// Out-of-vocabulary n-grams are ignored.
inline FeatureVector vectorize(std::span<const std::string> doc, const Vocabulary& vocab,
                               const FeatureOptions& opts) {
    std::map<std::uint32_t, double> counts;
    for (const auto& g : extract_ngrams(doc, opts)) {
        if (auto idx = vocab.index_of(g)) counts[*idx] += 1.0;
    }
    FeatureVector v;
    v.dimension = vocab.size();
    v.entries.reserve(counts.size());
    for (auto [idx, c] : counts) v.entries.emplace_back(idx, opts.binary ? 1.0 : c);
    return v;
}

} // namespace cityalert
