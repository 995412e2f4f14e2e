#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bandrank/classifiers.hpp"
#include "bandrank/rng.hpp"

namespace bandrank::detail {

LogisticModel fit_logistic(const LogisticParams& p, const FeatureMatrix& x, std::span<const std::uint8_t> y);
NaiveBayesModel fit_naive_bayes(const FeatureMatrix& x, std::span<const std::uint8_t> y);
KnnModel fit_knn(const KnnParams& p, const FeatureMatrix& x, std::span<const std::uint8_t> y);
TreeModel fit_decision_tree(const TreeParams& p, const FeatureMatrix& x, std::span<const std::uint8_t> y);
ForestModel fit_random_forest(const ForestParams& fp, const TreeParams& tp, std::uint64_t seed,
                              const FeatureMatrix& x, std::span<const std::uint8_t> y);
BoostedModel fit_boosting(const BoostingParams& p, const FeatureMatrix& x, std::span<const std::uint8_t> y);
SgdModel fit_sgd(const SgdParams& p, std::uint64_t seed, const FeatureMatrix& x, std::span<const std::uint8_t> y);
SvmModel fit_svm(const SvmParams& p, std::uint64_t seed, const FeatureMatrix& x, std::span<const std::uint8_t> y);

double naive_bayes_log_odds(const NaiveBayesModel& m, std::span<const double> x);
double svm_decision(const SvmModel& m, std::span<const double> x);
double boosted_margin(const BoostedModel& m, std::span<const double> x);

/// CART with Gini impurity grown until leaves are pure or smaller than
/// min_samples_split. `samples` may repeat indices (bootstrap). When
/// max_features < cols, each node examines a random subset of that size drawn
/// from rng, falling back to the remaining features when none of the subset
/// can split.
Tree build_cart(const FeatureMatrix& x, std::span<const std::uint8_t> y, std::vector<std::size_t> samples,
                int min_samples_split, std::size_t max_features, Xoshiro256* rng);

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// log(1 + exp(-m)) without overflow.
double log1p_exp_neg(double m);

/// Midpoint of two sorted distinct values that still separates them.
inline double split_point(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

}  // namespace bandrank::detail
