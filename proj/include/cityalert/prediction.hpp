#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace cityalert {

struct Prediction {
    std::vector<std::string> classes;
    std::vector<double> scores;  // log-posterior (NB) or signed margin, per class
    std::size_t best = 0;

    const std::string& label() const { return classes.at(best); }
};

// Index of the highest score; earlier classes win ties.
inline std::size_t argmax(const std::vector<double>& scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return best;
}

inline Prediction make_prediction(std::vector<std::string> classes, std::vector<double> scores) {
    Prediction p{std::move(classes), std::move(scores), 0};
    p.best = argmax(p.scores);
    return p;
}

// Softmax of the scores, computed stably via log-sum-exp.
inline std::vector<double> normalized_posterior(const std::vector<double>& log_scores) {
    if (log_scores.empty()) return {};
    double mx = *std::max_element(log_scores.begin(), log_scores.end());
    double sum = 0.0;
    for (double s : log_scores) sum += std::exp(s - mx);
    std::vector<double> out;
    out.reserve(log_scores.size());
    for (double s : log_scores) out.push_back(std::exp(s - mx) / sum);
    return out;
}

} // namespace cityalert
