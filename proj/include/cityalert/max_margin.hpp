#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "features.hpp"
#include "naive_bayes.hpp"
#include "prediction.hpp"

namespace cityalert {

struct MarginParams {
    double reg = 1e-3;  // L2 strength (lambda)
    std::size_t epochs = 20;
    std::uint64_t seed = 1;
};

// Linear hinge-loss classifier. classes = {positive, negative}.
struct MaxMarginModel {
    std::vector<std::string> classes;
    std::vector<double> weights;
    double bias = 0.0;
    MarginParams params;
};

namespace detail {

inline double sparse_dot(const std::vector<double>& w, const FeatureVector& x) {
    double s = 0.0;
    for (auto [idx, v] : x.entries) s += w[idx] * v;
    return s;
}

// Fisher-Yates driven by mt19937_64 so the order is identical on every
// standard library.
inline void seeded_shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
    for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
}

} // namespace detail

// Stochastic subgradient descent on
//   lambda/2 * |w|^2 + mean_i max(0, 1 - y_i (w.x_i + b))
// with step 1/(lambda t), the bias folded in as a constant feature, projection
// onto the ball of radius 1/sqrt(lambda), and the returned weights averaged
// over the second half of the epochs. Deterministic for fixed inputs and seed.
inline MaxMarginModel train_margin(std::span<const LabeledVector> examples,
                                   const std::string& positive, const std::string& negative,
                                   const MarginParams& params = {}) {
    if (!(params.reg > 0.0)) throw std::invalid_argument("reg must be positive");
    if (params.epochs == 0) throw std::invalid_argument("epochs must be >= 1");
    if (examples.empty()) throw SingleClass("no training examples");

    const std::size_t dim = examples.front().features.dimension;
    std::vector<double> y;
    y.reserve(examples.size());
    bool has_pos = false, has_neg = false;
    for (const auto& ex : examples) {
        if (ex.features.dimension != dim) throw DimensionMismatch("mixed feature dimensions");
        if (ex.label == positive) {
            y.push_back(1.0);
            has_pos = true;
        } else if (ex.label == negative) {
            y.push_back(-1.0);
            has_neg = true;
        } else {
            throw std::invalid_argument("label '" + ex.label + "' is neither class");
        }
    }
    if (!has_pos || !has_neg) throw SingleClass("training data needs both classes");

    const double lambda = params.reg;
    const double radius = 1.0 / std::sqrt(lambda);
    std::vector<double> v(dim, 0.0);  // w = scale * (v, vb)
    double vb = 0.0, scale = 1.0, sq_norm = 0.0;  // sq_norm = |(v, vb)|^2
    std::vector<double> avg(dim, 0.0);
    double avg_b = 0.0;

    std::mt19937_64 rng(params.seed);
    std::vector<std::size_t> order(examples.size());
    std::uint64_t t = 0;
    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        detail::seeded_shuffle(order, rng);
        const bool averaging = epoch >= params.epochs / 2;
        for (std::size_t i : order) {
            ++t;
            const FeatureVector& x = examples[i].features;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const double raw = detail::sparse_dot(v, x) + vb;
            const double margin = y[i] * scale * raw;

            double dot = raw;  // (v, vb).(x, 1) before this step's update
            scale *= 1.0 - eta * lambda;
            if (scale <= 0.0) {
                dot = 0.0;
                std::fill(v.begin(), v.end(), 0.0);
                vb = 0.0;
                scale = 1.0;
                sq_norm = 0.0;
            }
            if (margin < 1.0) {
                const double c = eta * y[i] / scale;
                double x_sq = 1.0;
                for (auto [idx, val] : x.entries) {
                    v[idx] += c * val;
                    x_sq += val * val;
                }
                vb += c;
                sq_norm += 2.0 * c * dot + c * c * x_sq;
            }
            const double norm = scale * std::sqrt(std::max(sq_norm, 0.0));
            if (norm > radius) scale *= radius / norm;
            if (scale < 1e-9) {
                for (double& w : v) w *= scale;
                vb *= scale;
                sq_norm *= scale * scale;
                scale = 1.0;
            }
            if (averaging) {
                for (std::size_t f = 0; f < dim; ++f) avg[f] += scale * v[f];
                avg_b += scale * vb;
            }
        }
    }

    const double n = static_cast<double>(examples.size() * (params.epochs - params.epochs / 2));
    MaxMarginModel m;
    m.classes = {positive, negative};
    m.weights.resize(dim);
    for (std::size_t f = 0; f < dim; ++f) m.weights[f] = avg[f] / n;
    m.bias = avg_b / n;
    m.params = params;
    return m;
}

// score = w.x + b; positive iff score >= 0.
inline Prediction predict_margin(const MaxMarginModel& model, const FeatureVector& vec) {
    if (vec.dimension != model.weights.size()) {
        throw DimensionMismatch("vector dimension " + std::to_string(vec.dimension) +
                                " != model dimension " + std::to_string(model.weights.size()));
    }
    const double score = detail::sparse_dot(model.weights, vec) + model.bias;
    return make_prediction(model.classes, {score, -score});
}

// Multiclass via one binary model per class against the rest.
struct OneVsRestModel {
    std::vector<std::string> classes;
    std::vector<MaxMarginModel> models;
};

inline constexpr std::string_view kRestLabel = "\x01rest";

inline OneVsRestModel train_one_vs_rest(std::span<const LabeledVector> examples,
                                        const std::vector<std::string>& classes,
                                        const MarginParams& params = {}) {
    OneVsRestModel m;
    m.classes = classes;
    for (const auto& cls : classes) {
        std::vector<LabeledVector> binary;
        binary.reserve(examples.size());
        bool seen = false;
        for (const auto& ex : examples) {
            class_index(classes, ex.label);
            seen = seen || ex.label == cls;
            binary.push_back({ex.features, ex.label == cls ? cls : std::string(kRestLabel)});
        }
        if (!seen) throw MissingClass("class '" + cls + "' has no examples");
        m.models.push_back(train_margin(binary, cls, std::string(kRestLabel), params));
    }
    return m;
}

inline Prediction predict_one_vs_rest(const OneVsRestModel& model, const FeatureVector& vec) {
    std::vector<double> scores;
    scores.reserve(model.models.size());
    for (const auto& bin : model.models) scores.push_back(predict_margin(bin, vec).scores[0]);
    return make_prediction(model.classes, std::move(scores));
}

} // namespace cityalert
