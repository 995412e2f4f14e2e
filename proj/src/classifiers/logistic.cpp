#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "internal.hpp"

namespace bandrank::detail {

namespace {

double mean_loss(const Eigen::MatrixXd& xa, const Eigen::VectorXd& yv, const Eigen::VectorXd& w) {
    const Eigen::VectorXd margin = xa * w;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < margin.size(); ++i) {
        loss += log1p_exp_neg(yv[i] > 0.5 ? margin[i] : -margin[i]);
    }
    return loss / static_cast<double>(margin.size());
}

}  // namespace

double log1p_exp_neg(double m) {
    return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

// Unregularized logistic regression by IRLS (Newton) with step halving.
LogisticModel fit_logistic(const LogisticParams& p, const FeatureMatrix& x, std::span<const std::uint8_t> y) {
    const auto n = static_cast<Eigen::Index>(x.rows);
    const auto d = static_cast<Eigen::Index>(x.cols);
    Eigen::MatrixXd xa(n, d + 1);
    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) xa(i, j) = x(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        xa(i, d) = 1.0;
        yv[i] = y[static_cast<std::size_t>(i)];
    }

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
    double loss = mean_loss(xa, yv, w);
    int iter = 0;
    for (; iter < p.max_iter; ++iter) {
        const Eigen::VectorXd margin = xa * w;
        Eigen::VectorXd prob(n);
        Eigen::VectorXd weight(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            prob[i] = 1.0 / (1.0 + std::exp(-margin[i]));
            weight[i] = prob[i] * (1.0 - prob[i]);
        }
        const Eigen::VectorXd grad = xa.transpose() * (prob - yv);
        Eigen::MatrixXd hess = xa.transpose() * weight.asDiagonal() * xa;
        // Jitter only guards an exactly singular Hessian (constant columns, saturated fits).
        hess.diagonal().array() += 1e-10 * std::max(1.0, hess.diagonal().maxCoeff());
        const Eigen::VectorXd step = hess.ldlt().solve(grad);
        if (!step.allFinite()) break;

        double scale = 1.0;
        double next_loss = std::numeric_limits<double>::infinity();
        Eigen::VectorXd candidate;
        for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
            candidate = w - scale * step;
            next_loss = mean_loss(xa, yv, candidate);
            if (next_loss <= loss) break;
        }
        if (!(next_loss <= loss)) break;
        w = candidate;
        const double change = loss - next_loss;
        loss = next_loss;
        if (change < p.tol) {
            ++iter;
            break;
        }
    }

    LogisticModel model;
    model.weights.assign(w.data(), w.data() + d);
    model.bias = w[d];
    model.iterations = iter;
    return model;
}

}  // namespace bandrank::detail
