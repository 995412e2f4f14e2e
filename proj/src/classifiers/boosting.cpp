#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.hpp"

namespace bandrank::detail {

namespace {

// Split acceptance threshold on the regularized gain.
constexpr double kMinGain = 1e-6;

struct Stats {
    double g = 0.0;
    double h = 0.0;
};

double score(const Stats& s, double lambda) { return s.g * s.g / (s.h + lambda); }

// Exact greedy second-order tree: gain = (GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)) / 2 - gamma,
// leaf weight = -eta * G / (H + lambda).
Tree build_boost_tree(const BoostingParams& p, const FeatureMatrix& x, std::span<const double> grad,
                      std::span<const double> hess) {
    Tree tree;
    struct Pending {
        std::int32_t node;
        int depth;
        std::vector<std::size_t> samples;
    };
    std::vector<std::size_t> all(x.rows);
    std::iota(all.begin(), all.end(), std::size_t{0});
    tree.nodes.emplace_back();
    std::vector<Pending> stack;
    stack.push_back({0, 0, std::move(all)});
    std::vector<std::pair<double, std::size_t>> sorted;

    while (!stack.empty()) {
        Pending job = std::move(stack.back());
        stack.pop_back();

        Stats total;
        for (std::size_t s : job.samples) {
            total.g += grad[s];
            total.h += hess[s];
        }
        tree.nodes[job.node].value = -p.learning_rate * total.g / (total.h + p.lambda);
        if (job.depth >= p.max_depth) continue;

        bool found = false;
        double best_gain = kMinGain;
        std::int32_t best_feature = -1;
        double best_threshold = 0.0;
        for (std::size_t f = 0; f < x.cols; ++f) {
            sorted.clear();
            for (std::size_t s : job.samples) sorted.emplace_back(x(s, f), s);
            std::sort(sorted.begin(), sorted.end());
            Stats left;
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                left.g += grad[sorted[i].second];
                left.h += hess[sorted[i].second];
                if (sorted[i].first == sorted[i + 1].first) continue;
                const Stats right{total.g - left.g, total.h - left.h};
                if (left.h < p.min_child_weight || right.h < p.min_child_weight) continue;
                const double gain =
                    0.5 * (score(left, p.lambda) + score(right, p.lambda) - score(total, p.lambda)) - p.gamma;
                if (gain > best_gain + 1e-12 * std::abs(best_gain)) {
                    found = true;
                    best_gain = gain;
                    best_feature = static_cast<std::int32_t>(f);
                    best_threshold = split_point(sorted[i].first, sorted[i + 1].first);
                }
            }
        }
        if (!found) continue;

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t s : job.samples) {
            (x(s, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(s);
        }
        const auto left_id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& node = tree.nodes[job.node];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left_id;
        node.right = left_id + 1;
        stack.push_back({left_id + 1, job.depth + 1, std::move(right)});
        stack.push_back({left_id, job.depth + 1, std::move(left)});
    }
    return tree;
}

double mean_logistic_loss(std::span<const double> margin, std::span<const std::uint8_t> y) {
    double loss = 0.0;
    for (std::size_t i = 0; i < margin.size(); ++i) {
        loss += log1p_exp_neg(y[i] ? margin[i] : -margin[i]);
    }
    return loss / static_cast<double>(margin.size());
}

}  // namespace

BoostedModel fit_boosting(const BoostingParams& p, const FeatureMatrix& x, std::span<const std::uint8_t> y) {
    BoostedModel model;
    model.base_margin = 0.0;  // base probability 0.5
    std::vector<double> margin(x.rows, model.base_margin);
    std::vector<double> grad(x.rows);
    std::vector<double> hess(x.rows);

    for (int round = 0; round < p.rounds; ++round) {
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double prob = 1.0 / (1.0 + std::exp(-margin[i]));
            grad[i] = prob - y[i];
            hess[i] = std::max(prob * (1.0 - prob), 1e-16);
        }
        Tree tree = build_boost_tree(p, x, grad, hess);
        for (std::size_t i = 0; i < x.rows; ++i) margin[i] += tree.leaf_for(x.row(i)).value;
        model.trees.push_back(std::move(tree));
        model.train_loss.push_back(mean_logistic_loss(margin, y));
    }
    return model;
}

double boosted_margin(const BoostedModel& m, std::span<const double> x) {
    double margin = m.base_margin;
    for (const auto& t : m.trees) margin += t.leaf_for(x).value;
    return margin;
}

}  // namespace bandrank::detail
