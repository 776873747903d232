#pragma once

#include <string>
#include <vector>

#include <cityalert/features.hpp>

namespace cityalert::testing {

inline FeatureVector dense(std::vector<double> counts) {
    FeatureVector v;
    v.dimension = counts.size();
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] > 0) v.entries.emplace_back(static_cast<std::uint32_t>(i), counts[i]);
    }
    return v;
}

// Direct multiplication oracle: P(c) * prod_f P(f|c)^count for every class,
// normalized. Parameters are computed from raw counts with the smoothing
// formula, independent of the trained model.
inline std::vector<double> oracle_posterior(const std::vector<std::vector<double>>& docs, const std::vector<int>& labels,
                                     int num_classes, double alpha, const std::vector<double>& query) {
    const std::size_t dim = query.size();
    std::vector<double> joint(num_classes);
    for (int c = 0; c < num_classes; ++c) {
        double ndocs = 0, total = 0;
        std::vector<double> count(dim, 0.0);
        for (std::size_t d = 0; d < docs.size(); ++d) {
            if (labels[d] != c) continue;
            ndocs += 1;
            for (std::size_t f = 0; f < dim; ++f) {
                count[f] += docs[d][f];
                total += docs[d][f];
            }
        }
        double p = ndocs / static_cast<double>(docs.size());
        for (std::size_t f = 0; f < dim; ++f) {
            double lik = (count[f] + alpha) / (total + alpha * static_cast<double>(dim));
            for (int rep = 0; rep < static_cast<int>(query[f]); ++rep) p *= lik;
        }
        joint[c] = p;
    }
    double z = 0;
    for (double j : joint) z += j;
    for (double& j : joint) j /= z;
    return joint;
}

} // namespace cityalert::testing
