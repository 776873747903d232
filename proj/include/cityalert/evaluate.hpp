#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "classifier.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "features.hpp"

namespace cityalert {

// Fold assignment for stratified k-fold cross validation.
struct FoldPlan {
    std::size_t k = 10;
    std::vector<std::size_t> assignments;  // example index -> fold id
    std::uint64_t seed = 0;
    bool best_effort = false;  // some class had fewer than k examples

    std::vector<std::size_t> test_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (assignments[i] == fold) out.push_back(i);
        }
        return out;
    }

    std::vector<std::size_t> train_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (assignments[i] != fold) out.push_back(i);
        }
        return out;
    }
};

// Per class (in sorted label order), the indices are shuffled with the seed
// and dealt round-robin; the dealing position carries over between classes
// so fold sizes stay balanced too. `declared` lists classes expected to be
// present; a declared class with fewer than k examples flags best effort.
inline FoldPlan make_folds(std::span<const std::string> labels, std::size_t k, std::uint64_t seed,
                           std::span<const std::string> declared = {}) {
    if (k < 2) throw std::invalid_argument("k must be at least 2");
    if (labels.size() < k) {
        throw TooFewExamples(std::to_string(labels.size()) + " examples for " + std::to_string(k) + " folds");
    }
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (const auto& c : declared) by_class[c];
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(labels.size(), 0);
    std::mt19937_64 rng(seed);
    std::size_t next = 0;
    for (auto& [label, idx] : by_class) {
        if (idx.size() < k) plan.best_effort = true;
        detail::seeded_shuffle(idx, rng);
        for (std::size_t i : idx) plan.assignments[i] = next++ % k;
    }
    return plan;
}

// counts[actual][predicted]
struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<std::size_t>> counts;

    explicit ConfusionMatrix(std::vector<std::string> cls = {})
        : classes(std::move(cls)), counts(classes.size(), std::vector<std::size_t>(classes.size(), 0)) {}

    void add(const std::string& actual, const std::string& predicted, std::size_t n = 1) {
        counts[class_index(classes, actual)][class_index(classes, predicted)] += n;
    }

    std::size_t row_sum(std::size_t c) const {
        return std::accumulate(counts[c].begin(), counts[c].end(), std::size_t{0});
    }

    std::size_t col_sum(std::size_t c) const {
        std::size_t s = 0;
        for (const auto& row : counts) s += row[c];
        return s;
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        for (std::size_t a = 0; a < counts.size(); ++a) {
            for (std::size_t p = 0; p < counts.size(); ++p) counts[a][p] += o.counts[a][p];
        }
        return *this;
    }
};

struct ClassMetrics {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct FoldResult {
    std::size_t fold = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    double f1 = 0.0;
    bool leakage_ok = true;
};

struct EvalReport {
    ConfusionMatrix confusion;
    std::vector<ClassMetrics> per_class;
    double f1 = 0.0;               // positive-class F1 (binary) or macro F1
    std::string averaging;         // "positive" or "macro"
    std::optional<std::string> positive_class;
    std::vector<FoldResult> per_fold;
};

inline double f_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

// Rates with a zero denominator are reported as 0.
inline EvalReport score_confusion(const ConfusionMatrix& cm, std::optional<std::string> positive = std::nullopt) {
    EvalReport r{cm, {}, 0.0, positive ? "positive" : "macro", positive, {}};
    for (std::size_t c = 0; c < cm.classes.size(); ++c) {
        const double tp = static_cast<double>(cm.counts[c][c]);
        const double predicted = static_cast<double>(cm.col_sum(c));
        const double actual = static_cast<double>(cm.row_sum(c));
        ClassMetrics m{cm.classes[c], predicted > 0 ? tp / predicted : 0.0, actual > 0 ? tp / actual : 0.0, 0.0,
                       cm.row_sum(c)};
        m.f1 = f_score(m.precision, m.recall);
        r.per_class.push_back(m);
    }
    if (positive) {
        r.f1 = r.per_class[class_index(cm.classes, *positive)].f1;
    } else {
        double sum = 0.0;
        for (const auto& m : r.per_class) sum += m.f1;
        r.f1 = r.per_class.empty() ? 0.0 : sum / static_cast<double>(r.per_class.size());
    }
    return r;
}

// Called once per fold with the fitted stage and the index split, after the
// stage has been trained and before the held-out fold is predicted.
using FoldObserver = std::function<void(std::size_t fold, const TrainedStage&, std::span<const std::size_t> train,
                                        std::span<const std::size_t> test)>;

// True when no n-gram occurring only in held-out documents reached the
// vocabulary.
inline bool leakage_free(const Vocabulary& vocab, std::span<const std::vector<std::string>> docs,
                         std::span<const std::size_t> train, std::span<const std::size_t> test,
                         const FeatureOptions& opts) {
    std::unordered_set<std::string> seen;
    for (std::size_t i : train) {
        for (auto& g : extract_ngrams(docs[i], opts)) seen.insert(std::move(g));
    }
    for (std::size_t i : test) {
        for (const auto& g : extract_ngrams(docs[i], opts)) {
            if (!seen.count(g) && vocab.contains(g)) return false;
        }
    }
    return true;
}

// k-fold cross validation. Each fold's vocabulary and model are fitted on the
// other folds only; predictions from all folds are pooled into one confusion
// matrix before scoring.
inline EvalReport cross_validate(std::span<const std::vector<std::string>> docs, std::span<const std::string> labels,
                                 const std::vector<std::string>& classes, const StageConfig& config,
                                 const FoldPlan& plan, std::optional<std::string> positive = std::nullopt,
                                 const FoldObserver& observer = {}) {
    if (docs.size() != labels.size() || plan.assignments.size() != docs.size()) {
        throw std::invalid_argument("fold plan does not match the dataset");
    }
    ConfusionMatrix pooled(classes);
    std::vector<FoldResult> folds;
    for (std::size_t f = 0; f < plan.k; ++f) {
        const auto train = plan.train_indices(f);
        const auto test = plan.test_indices(f);
        if (test.empty()) continue;
        std::vector<std::vector<std::string>> train_docs;
        std::vector<std::string> train_labels;
        for (std::size_t i : train) {
            train_docs.push_back(docs[i]);
            train_labels.push_back(labels[i]);
        }
        TrainedStage stage = train_stage(train_docs, train_labels, classes, config);
        if (observer) observer(f, stage, train, test);

        ConfusionMatrix fold_cm(classes);
        for (std::size_t i : test) fold_cm.add(labels[i], stage.predict(docs[i]).label());
        pooled += fold_cm;
        folds.push_back({f, train.size(), test.size(), score_confusion(fold_cm, positive).f1,
                         leakage_free(stage.vocab, docs, train, test, config.features)});
    }
    EvalReport report = score_confusion(pooled, positive);
    report.per_fold = std::move(folds);
    return report;
}

// Stage 1 over every example: emergency vs non-emergency, scored on the
// emergency class.
inline EvalReport cross_validate_stage1(std::span<const LabeledExample> examples, const StageConfig& config,
                                        std::size_t k, std::uint64_t seed, const FoldObserver& observer = {}) {
    std::vector<std::vector<std::string>> docs;
    std::vector<std::string> labels;
    for (const auto& ex : examples) {
        docs.push_back(ex.tokens);
        labels.push_back(ex.stage1_label);
    }
    auto plan = make_folds(labels, k, seed, stage1_classes());
    return cross_validate(docs, labels, stage1_classes(), config, plan, kEmergency, observer);
}

// Stage 2 over the emergency examples only, macro-averaged over categories.
inline EvalReport cross_validate_stage2(std::span<const LabeledExample> examples,
                                        const std::vector<std::string>& categories, const StageConfig& config,
                                        std::size_t k, std::uint64_t seed, const FoldObserver& observer = {}) {
    std::vector<std::vector<std::string>> docs;
    std::vector<std::string> labels;
    for (const auto& ex : examples) {
        if (ex.stage1_label != kEmergency) continue;
        docs.push_back(ex.tokens);
        labels.push_back(ex.category.value());
    }
    auto plan = make_folds(labels, k, seed, categories);
    return cross_validate(docs, labels, categories, config, plan, std::nullopt, observer);
}

struct AttributeScore {
    std::string feature;
    double score = 0.0;
};

using AttributeRanking = std::vector<AttributeScore>;

inline double entropy_bits(std::span<const double> counts) {
    double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (double c : counts) {
        if (c > 0.0) h -= (c / total) * std::log2(c / total);
    }
    return h;
}

// IG(f) = H(label) - H(label | f present/absent), on binarized occurrence, in
// bits. Sorted by score descending, then by vocabulary index.
inline AttributeRanking information_gain(std::span<const std::vector<std::string>> docs,
                                         std::span<const std::string> labels, const Vocabulary& vocab,
                                         const FeatureOptions& opts) {
    std::vector<std::string> classes(labels.begin(), labels.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    const std::size_t k = classes.size();

    std::vector<double> label_counts(k, 0.0);
    std::vector<std::vector<double>> present(vocab.size(), std::vector<double>(k, 0.0));
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const std::size_t c = class_index(classes, labels[d]);
        label_counts[c] += 1.0;
        std::set<std::uint32_t> seen;
        for (const auto& g : extract_ngrams(docs[d], opts)) {
            if (auto idx = vocab.index_of(g)) seen.insert(*idx);
        }
        for (auto idx : seen) present[idx][c] += 1.0;
    }
    const double n = static_cast<double>(docs.size());
    const double h = entropy_bits(label_counts);

    std::vector<std::pair<std::size_t, double>> scored;
    for (std::size_t f = 0; f < vocab.size(); ++f) {
        std::vector<double> absent(k);
        double n_present = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            absent[c] = label_counts[c] - present[f][c];
            n_present += present[f][c];
        }
        const double cond = (n_present / n) * entropy_bits(present[f]) + ((n - n_present) / n) * entropy_bits(absent);
        scored.emplace_back(f, std::clamp(h - cond, 0.0, h));
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    AttributeRanking ranking;
    ranking.reserve(scored.size());
    for (auto [f, s] : scored) ranking.push_back({vocab.feature(f), s});
    return ranking;
}

struct WordCloudEntry {
    std::string term;
    double weight = 0.0;
};

// Top entries with weights scaled into (0, 1] by the maximum score. An
// all-zero ranking yields weight 1 for every entry.
inline std::vector<WordCloudEntry> export_wordcloud(const AttributeRanking& ranking, std::size_t top_k) {
    top_k = std::min(top_k, ranking.size());
    double max_score = 0.0;
    for (std::size_t i = 0; i < top_k; ++i) max_score = std::max(max_score, ranking[i].score);
    std::vector<WordCloudEntry> out;
    for (std::size_t i = 0; i < top_k; ++i) {
        double w = max_score > 0.0 ? ranking[i].score / max_score : 1.0;
        if (w <= 0.0) continue;
        out.push_back({ranking[i].feature, w});
    }
    return out;
}

inline void to_json(nlohmann::json& j, const ClassMetrics& m) {
    j = {{"label", m.label}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
}

inline void to_json(nlohmann::json& j, const FoldResult& f) {
    j = {{"fold", f.fold}, {"train_size", f.train_size}, {"test_size", f.test_size},
         {"f1", f.f1}, {"leakage_ok", f.leakage_ok}};
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
    j = nlohmann::json::object();
    j["classes"] = r.confusion.classes;
    j["confusion"] = r.confusion.counts;
    j["per_class"] = r.per_class;
    j["f1"] = r.f1;
    j["averaging"] = r.averaging;
    if (r.positive_class) {
        const auto& m = r.per_class[class_index(r.confusion.classes, *r.positive_class)];
        j["positive_class"] = *r.positive_class;
        j["precision"] = m.precision;
        j["recall"] = m.recall;
    } else {
        double p = 0.0, rc = 0.0;
        for (const auto& m : r.per_class) {
            p += m.precision;
            rc += m.recall;
        }
        const double n = r.per_class.empty() ? 1.0 : static_cast<double>(r.per_class.size());
        j["precision"] = p / n;
        j["recall"] = rc / n;
    }
    j["per_fold"] = r.per_fold;
}

inline void to_json(nlohmann::json& j, const WordCloudEntry& e) { j = {{"term", e.term}, {"weight", e.weight}}; }

} // namespace cityalert
