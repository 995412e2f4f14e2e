#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.hpp"

namespace bandrank::detail {

namespace {

// d/dz of the modified Huber loss: max(0, 1 - z)^2 for z >= -1, -4z otherwise.
double modified_huber_slope(double z) {
    if (z >= 1.0) return 0.0;
    if (z >= -1.0) return -2.0 * (1.0 - z);
    return -4.0;
}

}  // namespace

// Plain SGD on the modified Huber loss with labels in {-1, +1}. L1 is applied
// with the cumulative truncated-gradient penalty of Tsuruoka et al.; the
// intercept is not penalized.
SgdModel fit_sgd(const SgdParams& p, std::uint64_t seed, const FeatureMatrix& x, std::span<const std::uint8_t> y) {
    const std::size_t d = x.cols;
    SgdModel m;
    m.weights.assign(d, 0.0);
    std::vector<double> applied(d, 0.0);  // penalty actually applied to each weight so far
    double total_penalty = 0.0;           // penalty each weight could have received
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Xoshiro256 rng(seed);

    std::uint64_t t = 0;
    for (int epoch = 0; epoch < p.epochs; ++epoch) {
        rng.shuffle(std::span(order));
        for (std::size_t i : order) {
            ++t;
            const double eta = p.eta0 / std::sqrt(static_cast<double>(t));
            const double label = y[i] ? 1.0 : -1.0;
            const auto row = x.row(i);
            const double z = label * (dot(m.weights, row) + m.bias);
            const double slope = modified_huber_slope(z);
            if (slope != 0.0) {
                for (std::size_t j = 0; j < d; ++j) m.weights[j] -= eta * slope * label * row[j];
                m.bias -= eta * slope * label;
            }

            total_penalty += eta * p.alpha;
            for (std::size_t j = 0; j < d; ++j) {
                const double before = m.weights[j];
                if (before > 0.0) {
                    m.weights[j] = std::max(0.0, before - (total_penalty + applied[j]));
                } else if (before < 0.0) {
                    m.weights[j] = std::min(0.0, before + (total_penalty - applied[j]));
                }
                applied[j] += m.weights[j] - before;
            }
        }
    }
    return m;
}

}  // namespace bandrank::detail
