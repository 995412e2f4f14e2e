#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "internal.hpp"

namespace bandrank::detail {

namespace {

struct Candidate {
    bool valid = false;
    std::int32_t feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;  // n_left*gini_left + n_right*gini_right
};

// n * gini for a node with class counts (a, b).
double weighted_gini(double a, double b) {
    const double n = a + b;
    return n > 0.0 ? n - (a * a + b * b) / n : 0.0;
}

// Best threshold on one feature: smallest weighted impurity, smallest threshold among ties.
void scan_feature(const FeatureMatrix& x, std::span<const std::uint8_t> y, std::span<const std::size_t> samples,
                  std::size_t feature, std::vector<std::pair<double, std::size_t>>& scratch, Candidate& best) {
    scratch.clear();
    for (std::size_t s : samples) scratch.emplace_back(x(s, feature), s);
    std::sort(scratch.begin(), scratch.end());

    double total_water = 0.0;
    for (const auto& [v, s] : scratch) total_water += y[s];
    const double n = static_cast<double>(scratch.size());

    double left_water = 0.0;
    for (std::size_t i = 0; i + 1 < scratch.size(); ++i) {
        left_water += y[scratch[i].second];
        if (scratch[i].first == scratch[i + 1].first) continue;
        const double n_left = static_cast<double>(i + 1);
        const double n_right = n - n_left;
        const double impurity = weighted_gini(left_water, n_left - left_water) +
                                weighted_gini(total_water - left_water, n_right - (total_water - left_water));
        // Equal-gain candidates keep the earlier (smaller) threshold.
        if (!best.valid || impurity < best.impurity - 1e-12 * n) {
            best.valid = true;
            best.feature = static_cast<std::int32_t>(feature);
            best.threshold = split_point(scratch[i].first, scratch[i + 1].first);
            best.impurity = impurity;
        }
    }
}

}  // namespace

Tree build_cart(const FeatureMatrix& x, std::span<const std::uint8_t> y, std::vector<std::size_t> samples,
                int min_samples_split, std::size_t max_features, Xoshiro256* rng) {
    Tree tree;
    const std::size_t d = x.cols;
    const bool subsample = rng != nullptr && max_features > 0 && max_features < d;

    struct Pending {
        std::int32_t node;
        std::vector<std::size_t> samples;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, std::move(samples)});

    std::vector<std::pair<double, std::size_t>> scratch;
    std::vector<std::size_t> features(d);

    while (!stack.empty()) {
        Pending job = std::move(stack.back());
        stack.pop_back();

        double water = 0.0;
        for (std::size_t s : job.samples) water += y[s];
        const double n = static_cast<double>(job.samples.size());
        tree.nodes[job.node].value = n > 0 ? water / n : 0.0;
        if (water == 0.0 || water == n || job.samples.size() < static_cast<std::size_t>(min_samples_split)) {
            continue;
        }

        std::iota(features.begin(), features.end(), std::size_t{0});
        std::size_t first_pass = d;
        if (subsample) {
            // Partial Fisher-Yates: the first max_features entries become the subset.
            for (std::size_t i = 0; i < max_features; ++i) {
                const auto j = i + static_cast<std::size_t>(rng->bounded(d - i));
                std::swap(features[i], features[j]);
            }
            std::sort(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(max_features));
            std::sort(features.begin() + static_cast<std::ptrdiff_t>(max_features), features.end());
            first_pass = max_features;
        }

        Candidate best;
        for (std::size_t i = 0; i < first_pass; ++i) scan_feature(x, y, job.samples, features[i], scratch, best);
        for (std::size_t i = first_pass; i < d && !best.valid; ++i) {
            scan_feature(x, y, job.samples, features[i], scratch, best);
        }
        if (!best.valid) continue;

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t s : job.samples) {
            (x(s, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(s);
        }
        const auto left_id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& node = tree.nodes[job.node];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left_id;
        node.right = left_id + 1;
        // Right is pushed first so the left subtree is expanded first; node ids
        // are assigned at split time, so the order only affects traversal.
        stack.push_back({left_id + 1, std::move(right)});
        stack.push_back({left_id, std::move(left)});
    }
    return tree;
}

TreeModel fit_decision_tree(const TreeParams& p, const FeatureMatrix& x, std::span<const std::uint8_t> y) {
    std::vector<std::size_t> samples(x.rows);
    std::iota(samples.begin(), samples.end(), std::size_t{0});
    return {build_cart(x, y, std::move(samples), p.min_samples_split, 0, nullptr)};
}

ForestModel fit_random_forest(const ForestParams& fp, const TreeParams& tp, std::uint64_t seed,
                              const FeatureMatrix& x, std::span<const std::uint8_t> y) {
    // Per-tree seeds are drawn up front from the master stream so each tree is
    // independent of build order.
    Xoshiro256 master(seed);
    std::vector<std::uint64_t> tree_seeds(static_cast<std::size_t>(fp.n_estimators));
    for (auto& s : tree_seeds) s = master.next();

    const auto max_features = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols))));
    ForestModel model;
    model.trees.reserve(tree_seeds.size());
    for (std::uint64_t s : tree_seeds) {
        Xoshiro256 rng(s);
        std::vector<std::size_t> bootstrap(x.rows);
        for (auto& idx : bootstrap) idx = static_cast<std::size_t>(rng.bounded(x.rows));
        model.trees.push_back(build_cart(x, y, std::move(bootstrap), tp.min_samples_split, max_features, &rng));
    }
    return model;
}

}  // namespace bandrank::detail
