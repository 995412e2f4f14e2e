#include <algorithm>
#include <numeric>

#include "internal.hpp"

namespace bandrank {

std::vector<std::size_t> knn_neighbors(const KnnModel& model, std::span<const double> x) {
    const std::size_t n = model.points.rows;
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = model.points.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double diff = row[j] - x[j];
            s += diff * diff;
        }
        dist[i] = {s, i};
    }
    const std::size_t k = std::min(static_cast<std::size_t>(model.k), n);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
    return out;
}

namespace detail {

KnnModel fit_knn(const KnnParams& p, const FeatureMatrix& x, std::span<const std::uint8_t> y) {
    return {p.k, x, std::vector<std::uint8_t>(y.begin(), y.end())};
}

}  // namespace detail
}  // namespace bandrank
