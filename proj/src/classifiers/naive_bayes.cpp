#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "internal.hpp"

namespace bandrank::detail {

namespace {

constexpr double kVarSmoothing = 1e-9;
constexpr double kMinVariance = 1e-12;

double joint_log_likelihood(const NaiveBayesModel& m, int cls, std::span<const double> x) {
    const double prior = m.log_prior[static_cast<std::size_t>(cls)];
    if (!std::isfinite(prior)) return prior;
    double ll = prior;
    const auto& mean = m.mean[static_cast<std::size_t>(cls)];
    const auto& var = m.var[static_cast<std::size_t>(cls)];
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double diff = x[j] - mean[j];
        ll -= 0.5 * std::log(2.0 * std::numbers::pi * var[j]) + diff * diff / (2.0 * var[j]);
    }
    return ll;
}

}  // namespace

NaiveBayesModel fit_naive_bayes(const FeatureMatrix& x, std::span<const std::uint8_t> y) {
    const std::size_t d = x.cols;
    // Smoothing is relative to the largest per-feature variance over all samples.
    double max_var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) mean += x(i, j);
        mean /= static_cast<double>(x.rows);
        double var = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
        max_var = std::max(max_var, var / static_cast<double>(x.rows));
    }
    const double epsilon = std::max(kVarSmoothing * max_var, kMinVariance);

    NaiveBayesModel m;
    for (int cls = 0; cls < 2; ++cls) {
        const auto c = static_cast<std::size_t>(cls);
        std::size_t count = 0;
        std::vector<double> mean(d, 0.0);
        for (std::size_t i = 0; i < x.rows; ++i) {
            if (y[i] != cls) continue;
            ++count;
            for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
        }
        if (count == 0) {
            m.log_prior[c] = -std::numeric_limits<double>::infinity();
            m.mean[c].assign(d, 0.0);
            m.var[c].assign(d, 1.0);
            continue;
        }
        for (auto& v : mean) v /= static_cast<double>(count);
        std::vector<double> var(d, 0.0);
        for (std::size_t i = 0; i < x.rows; ++i) {
            if (y[i] != cls) continue;
            for (std::size_t j = 0; j < d; ++j) var[j] += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
        }
        for (auto& v : var) v = v / static_cast<double>(count) + epsilon;
        m.log_prior[c] = std::log(static_cast<double>(count) / static_cast<double>(x.rows));
        m.mean[c] = std::move(mean);
        m.var[c] = std::move(var);
    }
    return m;
}

double naive_bayes_log_odds(const NaiveBayesModel& m, std::span<const double> x) {
    const double l1 = joint_log_likelihood(m, 1, x);
    const double l0 = joint_log_likelihood(m, 0, x);
    if (std::isinf(l0) && l0 < 0) return std::numeric_limits<double>::infinity();
    if (std::isinf(l1) && l1 < 0) return -std::numeric_limits<double>::infinity();
    return l1 - l0;
}

}  // namespace bandrank::detail
