#include <algorithm>
#include <cctype>
#include <cmath>

#include "bandrank/errors.hpp"
#include "internal.hpp"

namespace bandrank {

namespace {

constexpr std::array<std::string_view, 8> kNames = {"LR", "GNB", "KN", "DT", "RF", "XGB", "SGD", "SVM"};

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double vote_fraction(const std::vector<Tree>& trees, std::span<const double> x) {
    std::size_t water = 0;
    for (const auto& t : trees) water += t.leaf_for(x).value > 0.5 ? 1 : 0;
    return static_cast<double>(water) / static_cast<double>(trees.size());
}

}  // namespace

std::string_view variant_name(Variant v) noexcept { return kNames[static_cast<std::size_t>(v)]; }

Variant parse_variant(std::string_view name) {
    std::string s(name);
    for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (s == "KNN") s = "KN";
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (s == kNames[i]) return static_cast<Variant>(i);
    }
    throw ArgumentError("unknown algorithm '" + std::string(name) + "'");
}

std::vector<Variant> parse_variant_list(std::string_view spec) {
    std::string s(spec);
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (s == "all") return {kTableOrder.begin(), kTableOrder.end()};
    std::vector<Variant> out;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const auto comma = std::min(spec.find(',', pos), spec.size());
        const auto item = spec.substr(pos, comma - pos);
        pos = comma + 1;
        if (item.empty()) continue;
        const Variant v = parse_variant(item);
        if (std::find(out.begin(), out.end(), v) != out.end()) {
            throw ArgumentError("duplicate algorithm " + std::string(variant_name(v)));
        }
        out.push_back(v);
    }
    if (out.empty()) throw ArgumentError("empty algorithm list");
    return out;
}

void ClassifierSpec::validate() const {
    if (knn.k < 1 || knn.k % 2 == 0) throw ArgumentError("k must be odd and >= 1");
    if (forest.n_estimators < 1) throw ArgumentError("n_estimators must be >= 1");
    if (sgd.epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (tree.min_samples_split < 2) throw ArgumentError("min_samples_split must be >= 2");
    if (logistic.max_iter < 1) throw ArgumentError("max_iter must be >= 1");
    if (boosting.rounds < 1 || boosting.max_depth < 0 || !(boosting.learning_rate > 0) || boosting.lambda < 0) {
        throw ArgumentError("invalid boosting parameters");
    }
    if (!(sgd.eta0 > 0) || sgd.alpha < 0) throw ArgumentError("invalid SGD parameters");
    if (!(svm.c > 0) || !(svm.tol > 0) || svm.max_train < 2) throw ArgumentError("invalid SVM parameters");
}

const TreeNode& Tree::leaf_for(std::span<const double> x) const {
    const TreeNode* node = &nodes.front();
    while (node->feature >= 0) {
        node = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(node->feature)] <= node->threshold
                                                   ? node->left
                                                   : node->right)];
    }
    return *node;
}

std::size_t Tree::leaf_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

std::size_t Tree::depth() const noexcept {
    if (nodes.empty()) return 0;
    std::vector<std::size_t> depth(nodes.size(), 0);
    std::size_t best = 0;
    // Children always have larger ids than their parent.
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, depth[i]);
        if (nodes[i].feature >= 0) {
            depth[static_cast<std::size_t>(nodes[i].left)] = depth[i] + 1;
            depth[static_cast<std::size_t>(nodes[i].right)] = depth[i] + 1;
        }
    }
    return best;
}

FittedModel::FittedModel(ClassifierSpec spec, std::size_t dim, ModelParams params)
    : spec_(std::move(spec)), dim_(dim), params_(std::move(params)) {}

void FittedModel::check_dim(std::span<const double> x) const {
    if (x.size() != dim_) {
        throw ArgumentError("expected " + std::to_string(dim_) + " features, got " + std::to_string(x.size()));
    }
}

double FittedModel::decision_value(std::span<const double> x) const {
    check_dim(x);
    return std::visit(
        overloaded{
            [&](const LogisticModel& m) { return detail::dot(m.weights, x) + m.bias; },
            [&](const NaiveBayesModel& m) { return detail::naive_bayes_log_odds(m, x); },
            [&](const KnnModel& m) {
                const auto nn = knn_neighbors(m, x);
                std::size_t water = 0;
                for (std::size_t i : nn) water += m.labels[i];
                return static_cast<double>(water) / static_cast<double>(nn.size());
            },
            [&](const TreeModel& m) { return m.tree.leaf_for(x).value; },
            [&](const ForestModel& m) { return vote_fraction(m.trees, x); },
            [&](const BoostedModel& m) { return detail::boosted_margin(m, x); },
            [&](const SgdModel& m) { return detail::dot(m.weights, x) + m.bias; },
            [&](const SvmModel& m) { return detail::svm_decision(m, x); },
        },
        params_);
}

int FittedModel::predict(std::span<const double> x) const {
    const double score = decision_value(x);
    switch (spec_.variant) {
        case Variant::KNearest: return score >= 0.5 ? 1 : 0;
        case Variant::DecisionTree:
        case Variant::RandomForest: return score > 0.5 ? 1 : 0;
        default: return score >= 0.0 ? 1 : 0;
    }
}

std::vector<std::uint8_t> FittedModel::predict_all(std::span<const SamplePoint> points) const {
    std::vector<std::uint8_t> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(static_cast<std::uint8_t>(predict(p.features)));
    return out;
}

FittedModel fit(const ClassifierSpec& spec, const FeatureMatrix& x, std::span<const std::uint8_t> y) {
    spec.validate();
    if (x.rows == 0) throw ArgumentError("empty training set");
    if (x.cols == 0) throw ArgumentError("training set has no features");
    if (y.size() != x.rows) throw ArgumentError("label count does not match feature rows");
    for (double v : x.values) {
        if (!std::isfinite(v)) throw DataError("non-finite feature value in training set");
    }
    std::size_t water = 0;
    for (auto label : y) {
        if (label > 1) throw DataError("labels must be 0 or 1");
        water += label;
    }
    const bool single_class = water == 0 || water == y.size();
    if (single_class && spec.variant != Variant::GaussianNaiveBayes && spec.variant != Variant::KNearest) {
        throw DegenerateDataError(std::string(variant_name(spec.variant)) + " needs both classes in training data");
    }

    ModelParams params = [&]() -> ModelParams {
        switch (spec.variant) {
            case Variant::LogisticRegression: return detail::fit_logistic(spec.logistic, x, y);
            case Variant::GaussianNaiveBayes: return detail::fit_naive_bayes(x, y);
            case Variant::KNearest: return detail::fit_knn(spec.knn, x, y);
            case Variant::DecisionTree: return detail::fit_decision_tree(spec.tree, x, y);
            case Variant::RandomForest: return detail::fit_random_forest(spec.forest, spec.tree, spec.seed, x, y);
            case Variant::GradientBoostedTrees: return detail::fit_boosting(spec.boosting, x, y);
            case Variant::SGDLinear: return detail::fit_sgd(spec.sgd, spec.seed, x, y);
            case Variant::SvmRbf: return detail::fit_svm(spec.svm, spec.seed, x, y);
        }
        throw ArgumentError("unknown classifier variant");
    }();
    return FittedModel(spec, x.cols, std::move(params));
}

FittedModel fit(const ClassifierSpec& spec, std::span<const SamplePoint> train) {
    const FeatureMatrix x = to_matrix(train);
    const auto y = labels_of(train);
    return fit(spec, x, y);
}

std::array<double, 2> naive_bayes_posterior(const FittedModel& model, std::span<const double> x) {
    const auto* m = std::get_if<NaiveBayesModel>(&model.params());
    if (m == nullptr) throw ArgumentError("posterior requires a naive Bayes model");
    if (x.size() != model.dim()) throw ArgumentError("dimensionality mismatch");
    const double log_odds = detail::naive_bayes_log_odds(*m, x);
    if (log_odds == std::numeric_limits<double>::infinity()) return {0.0, 1.0};
    if (log_odds == -std::numeric_limits<double>::infinity()) return {1.0, 0.0};
    // Logistic of the log-odds; the smaller probability is computed directly to keep precision.
    if (log_odds >= 0) {
        const double p0 = 1.0 / (1.0 + std::exp(log_odds));
        return {p0, 1.0 - p0};
    }
    const double p1 = 1.0 / (1.0 + std::exp(-log_odds));
    return {1.0 - p1, p1};
}

}  // namespace bandrank
