#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <set>
#include <unordered_map>

#include "internal.hpp"

namespace bandrank::detail {

namespace {

constexpr double kTau = 1e-12;
constexpr std::size_t kCacheBytes = 64ULL << 20;

double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return std::exp(-gamma * s);
}

// LRU cache of rows of Q_ij = y_i y_j K(x_i, x_j).
class QMatrix {
public:
    QMatrix(const FeatureMatrix& x, const std::vector<double>& y, double gamma)
        : x_(x), y_(y), gamma_(gamma),
          capacity_(std::max<std::size_t>(2, kCacheBytes / (std::max<std::size_t>(x.rows, 1) * sizeof(double)))) {}

    const std::vector<double>& row(std::size_t i) {
        if (auto it = index_.find(i); it != index_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second);
            return it->second->second;
        }
        if (lru_.size() >= capacity_) {
            index_.erase(lru_.back().first);
            lru_.pop_back();
        }
        std::vector<double> values(x_.rows);
        const auto xi = x_.row(i);
        for (std::size_t j = 0; j < x_.rows; ++j) values[j] = y_[i] * y_[j] * rbf(xi, x_.row(j), gamma_);
        lru_.emplace_front(i, std::move(values));
        index_[i] = lru_.begin();
        return lru_.front().second;
    }

private:
    const FeatureMatrix& x_;
    const std::vector<double>& y_;
    double gamma_;
    std::size_t capacity_;
    std::list<std::pair<std::size_t, std::vector<double>>> lru_;
    std::unordered_map<std::size_t, decltype(lru_)::iterator> index_;
};

FeatureMatrix take_rows(const FeatureMatrix& x, const std::vector<std::size_t>& rows) {
    FeatureMatrix out;
    out.rows = rows.size();
    out.cols = x.cols;
    out.values.reserve(out.rows * out.cols);
    for (std::size_t r : rows) {
        const auto src = x.row(r);
        out.values.insert(out.values.end(), src.begin(), src.end());
    }
    return out;
}

}  // namespace

// C-SVC dual solved by SMO with the maximal-violating-pair working set.
SvmModel fit_svm(const SvmParams& p, std::uint64_t seed, const FeatureMatrix& x_full,
                 std::span<const std::uint8_t> y_full) {
    // Seeded subsample (without replacement, original order kept) above the cap.
    std::vector<std::size_t> keep;
    if (x_full.rows > p.max_train) {
        Xoshiro256 rng(seed);
        std::set<std::size_t> chosen;
        for (std::size_t j = x_full.rows - p.max_train; j < x_full.rows; ++j) {
            const auto t = static_cast<std::size_t>(rng.bounded(j + 1));
            if (!chosen.insert(t).second) chosen.insert(j);
        }
        keep.assign(chosen.begin(), chosen.end());
    } else {
        keep.resize(x_full.rows);
        for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    }
    const FeatureMatrix x = take_rows(x_full, keep);
    const std::size_t n = x.rows;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = y_full[keep[i]] ? 1.0 : -1.0;

    // gamma = 1 / (d * Var(all feature values))
    double mean = 0.0;
    for (double v : x.values) mean += v;
    mean /= static_cast<double>(x.values.size());
    double var = 0.0;
    for (double v : x.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.values.size());
    const double gamma = var > 0.0 ? 1.0 / (static_cast<double>(x.cols) * var) : 1.0;

    QMatrix q(x, y, gamma);
    const double c = p.c;
    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);  // G = Q alpha - e
    // Diagonal of Q: y_i^2 K(x_i, x_i) = 1 for the RBF kernel.
    const double qd = 1.0;

    auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0); };
    auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c); };

    std::size_t iter = 0;
    for (; iter < p.max_iter; ++iter) {
        double g_max = -std::numeric_limits<double>::infinity();
        double g_min = std::numeric_limits<double>::infinity();
        std::size_t i = n;
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * grad[t];
            if (in_up(t) && v > g_max) {
                g_max = v;
                i = t;
            }
            if (in_low(t) && v < g_min) {
                g_min = v;
                j = t;
            }
        }
        if (i == n || j == n || g_max - g_min < p.tol) break;

        const std::vector<double> q_i = q.row(i);
        const std::vector<double>& q_j = q.row(j);
        const double old_ai = alpha[i];
        const double old_aj = alpha[j];

        if (y[i] != y[j]) {
            double quad = qd + qd + 2.0 * q_i[j];
            if (quad <= 0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = qd + qd - 2.0 * q_i[j];
            if (quad <= 0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = sum;
                }
                if (alpha[i] < 0) {
                    alpha[i] = 0;
                    alpha[j] = sum;
                }
            }
        }

        const double d_ai = alpha[i] - old_ai;
        const double d_aj = alpha[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t) grad[t] += q_i[t] * d_ai + q_j[t] * d_aj;
    }

    // rho from free vectors, or the midpoint of the feasible interval when none are free.
    double free_sum = 0.0;
    std::size_t free_count = 0;
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (alpha[t] >= c) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++free_count;
            free_sum += yg;
        }
    }
    const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;

    SvmModel m;
    m.gamma = gamma;
    m.bias = -rho;
    m.iterations = iter;
    m.support.cols = x.cols;
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] <= 0.0) continue;
        const auto row = x.row(t);
        m.support.values.insert(m.support.values.end(), row.begin(), row.end());
        ++m.support.rows;
        m.coef.push_back(alpha[t] * y[t]);
    }
    return m;
}

double svm_decision(const SvmModel& m, std::span<const double> x) {
    double s = m.bias;
    for (std::size_t i = 0; i < m.support.rows; ++i) s += m.coef[i] * rbf(m.support.row(i), x, m.gamma);
    return s;
}

}  // namespace bandrank::detail
