#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "bandrank/sampling.hpp"

namespace bandrank {

enum class Variant : std::uint8_t {
    LogisticRegression,
    GaussianNaiveBayes,
    KNearest,
    DecisionTree,
    RandomForest,
    GradientBoostedTrees,
    SGDLinear,
    SvmRbf,
};

/// Column order of the published band-ranking table: LR GNB RF KN DT SGD XGB SVM.
inline constexpr std::array<Variant, 8> kTableOrder = {
    Variant::LogisticRegression, Variant::GaussianNaiveBayes, Variant::RandomForest, Variant::KNearest,
    Variant::DecisionTree,       Variant::SGDLinear,          Variant::GradientBoostedTrees, Variant::SvmRbf,
};

/// Short names: LR, GNB, KN, DT, RF, XGB, SGD, SVM.
std::string_view variant_name(Variant v) noexcept;
Variant parse_variant(std::string_view name);  // throws ArgumentError
/// "all" or a comma-separated list of short names.
std::vector<Variant> parse_variant_list(std::string_view spec);

struct LogisticParams {
    int max_iter = 100;
    double tol = 1e-6;  // on loss change
};

struct KnnParams {
    int k = 7;
};

struct TreeParams {
    int min_samples_split = 2;
};

struct ForestParams {
    int n_estimators = 100;
};

struct BoostingParams {
    int rounds = 100;
    double learning_rate = 0.3;
    int max_depth = 6;
    double lambda = 1.0;
    double gamma = 0.0;
    double min_child_weight = 1.0;
};

struct SgdParams {
    int epochs = 25;
    double alpha = 1e-4;  // L1 strength
    double eta0 = 0.01;   // eta_t = eta0 / sqrt(t)
};

struct SvmParams {
    double c = 1.0;
    double tol = 1e-3;
    std::size_t max_train = 5000;
    std::size_t max_iter = 10'000'000;
};

struct ClassifierSpec {
    Variant variant = Variant::LogisticRegression;
    std::uint64_t seed = 0;
    LogisticParams logistic;
    KnnParams knn;
    TreeParams tree;
    ForestParams forest;
    BoostingParams boosting;
    SgdParams sgd;
    SvmParams svm;

    static ClassifierSpec make(Variant v, std::uint64_t seed = 0) {
        ClassifierSpec s;
        s.variant = v;
        s.seed = seed;
        return s;
    }

    /// Throws ArgumentError on out-of-range hyperparameters (k even or < 1, etc.).
    void validate() const;
};

/// Binary decision tree node; a node is a leaf when feature < 0. Samples with
/// x[feature] <= threshold go left.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;  // leaf payload: water fraction (CART) or margin increment (boosting)
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    const TreeNode& leaf_for(std::span<const double> x) const;
    std::size_t leaf_count() const noexcept;
    std::size_t depth() const noexcept;
};

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
    int iterations = 0;
};

struct NaiveBayesModel {
    std::array<double, 2> log_prior{};  // -inf for a class absent from training
    std::array<std::vector<double>, 2> mean;
    std::array<std::vector<double>, 2> var;
};

struct KnnModel {
    int k = 7;
    FeatureMatrix points;
    std::vector<std::uint8_t> labels;
};

struct TreeModel {
    Tree tree;
};

struct ForestModel {
    std::vector<Tree> trees;
};

struct BoostedModel {
    double base_margin = 0.0;
    std::vector<Tree> trees;
    std::vector<double> train_loss;  // mean logistic loss after each round
};

struct SgdModel {
    std::vector<double> weights;
    double bias = 0.0;
};

struct SvmModel {
    double gamma = 1.0;
    double bias = 0.0;
    FeatureMatrix support;     // support vectors
    std::vector<double> coef;  // alpha_i * y_i, y in {-1, +1}
    std::size_t iterations = 0;
};

using ModelParams = std::variant<LogisticModel, NaiveBayesModel, KnnModel, TreeModel, ForestModel, BoostedModel,
                                 SgdModel, SvmModel>;

/// A trained classifier. Immutable; predict and decision_value are re-entrant.
///
/// decision_value semantics per variant, and the rule predict applies:
///   LR, SGD    w.x + b                       1 iff >= 0
///   GNB        log P(water|x) - log P(land|x) 1 iff >= 0
///   SVM        sum a_i y_i K(x_i, x) + b      1 iff >= 0
///   XGB        boosted margin                1 iff >= 0
///   KN         water vote fraction           1 iff >= 0.5
///   DT         water fraction in leaf        1 iff >  0.5
///   RF         water vote fraction of trees  1 iff >  0.5
class FittedModel {
public:
    FittedModel(ClassifierSpec spec, std::size_t dim, ModelParams params);

    const ClassifierSpec& spec() const noexcept { return spec_; }
    std::size_t dim() const noexcept { return dim_; }
    const ModelParams& params() const noexcept { return params_; }

    int predict(std::span<const double> x) const;
    double decision_value(std::span<const double> x) const;

    std::vector<std::uint8_t> predict_all(std::span<const SamplePoint> points) const;

private:
    void check_dim(std::span<const double> x) const;

    ClassifierSpec spec_;
    std::size_t dim_ = 0;
    ModelParams params_;
};

/// Trains the variant named by spec. All randomness derives from spec.seed.
/// Throws DegenerateDataError for a single-class training set (except GNB and
/// KN), DataError for non-finite features, ArgumentError for an empty set.
FittedModel fit(const ClassifierSpec& spec, std::span<const SamplePoint> train);
FittedModel fit(const ClassifierSpec& spec, const FeatureMatrix& x, std::span<const std::uint8_t> y);

/// Class posteriors {P(land|x), P(water|x)} of a naive Bayes model.
std::array<double, 2> naive_bayes_posterior(const FittedModel& model, std::span<const double> x);

/// Indices of the k nearest training points (squared Euclidean distance, ties
/// to the lower index), nearest first.
std::vector<std::size_t> knn_neighbors(const KnnModel& model, std::span<const double> x);

// BRNK container: magic, u32 version, u8 variant tag, spec, dim, parameter blobs; little-endian.
void write_model(const FittedModel& model, std::ostream& out);
FittedModel read_model(std::istream& in);
void save_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

}  // namespace bandrank
