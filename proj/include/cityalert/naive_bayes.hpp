#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "features.hpp"
#include "prediction.hpp"

namespace cityalert {

struct LabeledVector {
    FeatureVector features;
    std::string label;
};

struct NaiveBayesModel {
    std::vector<std::string> classes;
    std::vector<double> log_prior;
    std::vector<std::vector<double>> log_likelihood;  // [class][feature]
    double alpha = 1.0;
    std::size_t vocab_size = 0;
};

inline std::size_t class_index(const std::vector<std::string>& classes, const std::string& label) {
    auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) throw std::invalid_argument("undeclared class '" + label + "'");
    return static_cast<std::size_t>(it - classes.begin());
}

// Multinomial NB with additive smoothing:
//   P(f|c) = (count(f,c) + alpha) / (total(c) + alpha * |V|),  P(c) = docs(c) / docs.
inline NaiveBayesModel train_nb(std::span<const LabeledVector> examples,
                                const std::vector<std::string>& classes, double alpha = 1.0) {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    if (examples.empty()) throw MissingClass("no training examples");
    const std::size_t dim = examples.front().features.dimension;
    const std::size_t k = classes.size();

    std::vector<double> docs(k, 0.0), totals(k, 0.0);
    std::vector<std::vector<double>> counts(k, std::vector<double>(dim, 0.0));
    for (const auto& ex : examples) {
        if (ex.features.dimension != dim) throw DimensionMismatch("mixed feature dimensions");
        std::size_t c = class_index(classes, ex.label);
        docs[c] += 1.0;
        for (auto [idx, v] : ex.features.entries) {
            counts[c][idx] += v;
            totals[c] += v;
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (docs[c] == 0.0) throw MissingClass("class '" + classes[c] + "' has no examples");
    }

    NaiveBayesModel m;
    m.classes = classes;
    m.alpha = alpha;
    m.vocab_size = dim;
    const double n = static_cast<double>(examples.size());
    for (std::size_t c = 0; c < k; ++c) {
        m.log_prior.push_back(std::log(docs[c] / n));
        const double denom = totals[c] + alpha * static_cast<double>(dim);
        std::vector<double> ll(dim);
        for (std::size_t f = 0; f < dim; ++f) ll[f] = std::log((counts[c][f] + alpha) / denom);
        m.log_likelihood.push_back(std::move(ll));
    }
    return m;
}

inline Prediction predict_nb(const NaiveBayesModel& model, const FeatureVector& vec) {
    if (vec.dimension != model.vocab_size) {
        throw DimensionMismatch("vector dimension " + std::to_string(vec.dimension) +
                                " != model vocabulary " + std::to_string(model.vocab_size));
    }
    std::vector<double> scores = model.log_prior;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        for (auto [idx, v] : vec.entries) scores[c] += v * model.log_likelihood[c][idx];
    }
    return make_prediction(model.classes, std::move(scores));
}

} // namespace cityalert
