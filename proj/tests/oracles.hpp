#pragma once

// Independent reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace oracle {

/// k nearest rows of `points` (row-major, `dim` columns) to `x`, sorting every
/// (distance, index) pair.
inline std::vector<std::size_t> knn(const std::vector<double>& points, std::size_t dim, std::span<const double> x,
                                    std::size_t k) {
    const std::size_t n = points.size() / dim;
    std::vector<std::pair<double, std::size_t>> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double diff = points[i * dim + j] - x[j];
            s += diff * diff;
        }
        d[i] = {s, i};
    }
    std::sort(d.begin(), d.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < std::min(k, n); ++i) out.push_back(d[i].second);
    return out;
}

/// IoU of class `cls` from index sets. Pixels labelled 255 in either sequence
/// are ignored. An empty union scores 1.
inline double set_iou(const std::vector<std::uint8_t>& preds, const std::vector<std::uint8_t>& truth, int cls) {
    std::set<std::size_t> p;
    std::set<std::size_t> t;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == 255 || truth[i] == 255) continue;
        if (preds[i] == cls) p.insert(i);
        if (truth[i] == cls) t.insert(i);
    }
    std::vector<std::size_t> inter;
    std::vector<std::size_t> uni;
    std::set_intersection(p.begin(), p.end(), t.begin(), t.end(), std::back_inserter(inter));
    std::set_union(p.begin(), p.end(), t.begin(), t.end(), std::back_inserter(uni));
    if (uni.empty()) return 1.0;
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

struct Stump {
    double threshold = 0.0;
    std::size_t errors = 0;
};

/// Best single threshold over all midpoints of distinct sorted values, with
/// class 1 on the low side (water is dark).
inline Stump best_threshold(std::vector<double> xs, const std::vector<std::uint8_t>& ys) {
    std::vector<double> cand;
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) cand.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    Stump best{0.0, std::numeric_limits<std::size_t>::max()};
    for (double t : cand) {
        std::size_t err = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) err += ((xs[i] <= t ? 1 : 0) != ys[i]) ? 1 : 0;
        if (err < best.errors) best = {t, err};
    }
    return best;
}

/// Soft-margin RBF SVM dual solved by projected gradient ascent onto
/// {0 <= a <= C, sum a_i y_i = 0}; the projection bisects on the multiplier.
struct DualSvm {
    std::vector<double> alpha;
    double bias = 0.0;
    double objective = 0.0;
};

inline double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-gamma * s);
}

inline DualSvm solve_svm_dual(const std::vector<std::vector<double>>& x, const std::vector<double>& y, double c,
                              double gamma, int iterations = 200000) {
    const std::size_t n = x.size();
    std::vector<std::vector<double>> q(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) q[i][j] = y[i] * y[j] * rbf(x[i], x[j], gamma);
    }
    auto project = [&](std::vector<double>& a) {
        auto clipped_sum = [&](double mu) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += y[i] * std::clamp(a[i] - mu * y[i], 0.0, c);
            return s;
        };
        double lo = -1e6;
        double hi = 1e6;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (clipped_sum(mid) > 0.0) lo = mid; else hi = mid;
        }
        const double mu = 0.5 * (lo + hi);
        for (std::size_t i = 0; i < n; ++i) a[i] = std::clamp(a[i] - mu * y[i], 0.0, c);
    };
    std::vector<double> a(n, 0.0);
    const double step = 1.0 / static_cast<double>(n);
    for (int it = 0; it < iterations; ++it) {
        std::vector<double> g(n, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) g[i] -= q[i][j] * a[j];
        }
        for (std::size_t i = 0; i < n; ++i) a[i] += step * g[i];
        project(a);
    }
    DualSvm out;
    out.alpha = a;
    double obj = std::accumulate(a.begin(), a.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) obj -= 0.5 * a[i] * a[j] * q[i][j];
    }
    out.objective = obj;
    double bsum = 0.0;
    int bcount = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] > 1e-6 && a[i] < c - 1e-6) {
            double f = 0.0;
            for (std::size_t j = 0; j < n; ++j) f += a[j] * y[j] * rbf(x[j], x[i], gamma);
            bsum += y[i] - f;
            ++bcount;
        }
    }
    out.bias = bcount > 0 ? bsum / bcount : 0.0;
    return out;
}

inline double svm_decision(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                           const DualSvm& m, std::span<const double> probe, double gamma) {
    double f = m.bias;
    for (std::size_t j = 0; j < x.size(); ++j) f += m.alpha[j] * y[j] * rbf(x[j], probe, gamma);
    return f;
}

/// Dual objective of an arbitrary alpha vector.
inline double svm_dual_objective(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                 const std::vector<double>& a, double gamma) {
    double obj = std::accumulate(a.begin(), a.end(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) obj -= 0.5 * a[i] * a[j] * y[i] * y[j] * rbf(x[i], x[j], gamma);
    }
    return obj;
}

/// Central difference of f at each coordinate of `theta`.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> theta, double h) {
    std::vector<double> g(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = theta[i];
        theta[i] = orig + h;
        const double up = f(theta);
        theta[i] = orig - h;
        const double down = f(theta);
        theta[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// Relative error with a floor on the denominator so near-zero components are
/// compared absolutely.
inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Ranks with ties averaged, 1-based.
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

/// Spearman rank correlation (Pearson correlation of the ranks).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double num = 0.0;
    double da = 0.0;
    double db = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

/// Gaussian naive Bayes posterior of class 1 for 1-D input from explicit
/// class means, variances and priors.
inline double gaussian_posterior(double x, double m0, double v0, double p0, double m1, double v1, double p1) {
    auto pdf = [](double x, double m, double v) {
        return std::exp(-(x - m) * (x - m) / (2.0 * v)) / std::sqrt(2.0 * 3.14159265358979323846 * v);
    };
    const double a = p1 * pdf(x, m1, v1);
    const double b = p0 * pdf(x, m0, v0);
    return a / (a + b);
}

}  // namespace oracle
