#include <fstream>

#include "bandrank/binary_io.hpp"
#include "internal.hpp"

namespace bandrank {

namespace {

constexpr std::uint32_t kModelVersion = 1;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void put_spec(io::Writer& w, const ClassifierSpec& s) {
    w.put<std::uint64_t>(s.seed);
    w.put<std::int32_t>(s.logistic.max_iter);
    w.put(s.logistic.tol);
    w.put<std::int32_t>(s.knn.k);
    w.put<std::int32_t>(s.tree.min_samples_split);
    w.put<std::int32_t>(s.forest.n_estimators);
    w.put<std::int32_t>(s.boosting.rounds);
    w.put(s.boosting.learning_rate);
    w.put<std::int32_t>(s.boosting.max_depth);
    w.put(s.boosting.lambda);
    w.put(s.boosting.gamma);
    w.put(s.boosting.min_child_weight);
    w.put<std::int32_t>(s.sgd.epochs);
    w.put(s.sgd.alpha);
    w.put(s.sgd.eta0);
    w.put(s.svm.c);
    w.put(s.svm.tol);
    w.put<std::uint64_t>(s.svm.max_train);
    w.put<std::uint64_t>(s.svm.max_iter);
}

ClassifierSpec get_spec(io::Reader& r, Variant v) {
    ClassifierSpec s;
    s.variant = v;
    s.seed = r.get<std::uint64_t>();
    s.logistic.max_iter = r.get<std::int32_t>();
    s.logistic.tol = r.get<double>();
    s.knn.k = r.get<std::int32_t>();
    s.tree.min_samples_split = r.get<std::int32_t>();
    s.forest.n_estimators = r.get<std::int32_t>();
    s.boosting.rounds = r.get<std::int32_t>();
    s.boosting.learning_rate = r.get<double>();
    s.boosting.max_depth = r.get<std::int32_t>();
    s.boosting.lambda = r.get<double>();
    s.boosting.gamma = r.get<double>();
    s.boosting.min_child_weight = r.get<double>();
    s.sgd.epochs = r.get<std::int32_t>();
    s.sgd.alpha = r.get<double>();
    s.sgd.eta0 = r.get<double>();
    s.svm.c = r.get<double>();
    s.svm.tol = r.get<double>();
    s.svm.max_train = r.get<std::uint64_t>();
    s.svm.max_iter = r.get<std::uint64_t>();
    return s;
}

void put_matrix(io::Writer& w, const FeatureMatrix& m) {
    w.put<std::uint64_t>(m.rows);
    w.put<std::uint64_t>(m.cols);
    w.put_doubles(m.values);
}

FeatureMatrix get_matrix(io::Reader& r) {
    FeatureMatrix m;
    m.rows = r.get<std::uint64_t>();
    m.cols = r.get<std::uint64_t>();
    m.values = r.get_doubles();
    if (m.values.size() != m.rows * m.cols) throw CorruptDataError("matrix blob size mismatch");
    return m;
}

void put_tree(io::Writer& w, const Tree& t) {
    w.put<std::uint64_t>(t.nodes.size());
    for (const auto& n : t.nodes) {
        w.put(n.feature);
        w.put(n.threshold);
        w.put(n.left);
        w.put(n.right);
        w.put(n.value);
    }
}

Tree get_tree(io::Reader& r, std::size_t dim) {
    Tree t;
    const auto count = r.get<std::uint64_t>();
    if (count == 0 || count > (1ULL << 32)) throw CorruptDataError("implausible tree size");
    t.nodes.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& n = t.nodes[i];
        n.feature = r.get<std::int32_t>();
        n.threshold = r.get<double>();
        n.left = r.get<std::int32_t>();
        n.right = r.get<std::int32_t>();
        n.value = r.get<double>();
        if (n.feature >= 0) {
            const auto lo = static_cast<std::int64_t>(i);
            if (static_cast<std::size_t>(n.feature) >= dim || n.left <= lo || n.right <= lo ||
                static_cast<std::uint64_t>(n.left) >= count || static_cast<std::uint64_t>(n.right) >= count) {
                throw CorruptDataError("tree node references out of range");
            }
        }
    }
    return t;
}

void put_trees(io::Writer& w, const std::vector<Tree>& trees) {
    w.put<std::uint64_t>(trees.size());
    for (const auto& t : trees) put_tree(w, t);
}

std::vector<Tree> get_trees(io::Reader& r, std::size_t dim) {
    const auto count = r.get<std::uint64_t>();
    if (count > (1ULL << 24)) throw CorruptDataError("implausible tree count");
    std::vector<Tree> trees;
    trees.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) trees.push_back(get_tree(r, dim));
    return trees;
}

}  // namespace

void write_model(const FittedModel& model, std::ostream& out) {
    io::Writer w(out);
    w.magic("BRNK");
    w.put<std::uint32_t>(kModelVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(model.spec().variant));
    put_spec(w, model.spec());
    w.put<std::uint64_t>(model.dim());
    std::visit(overloaded{
                   [&](const LogisticModel& m) {
                       w.put_doubles(m.weights);
                       w.put(m.bias);
                       w.put<std::int32_t>(m.iterations);
                   },
                   [&](const NaiveBayesModel& m) {
                       for (int c = 0; c < 2; ++c) {
                           w.put(m.log_prior[c]);
                           w.put_doubles(m.mean[c]);
                           w.put_doubles(m.var[c]);
                       }
                   },
                   [&](const KnnModel& m) {
                       w.put<std::int32_t>(m.k);
                       put_matrix(w, m.points);
                       w.put<std::uint64_t>(m.labels.size());
                       for (auto l : m.labels) w.put(l);
                   },
                   [&](const TreeModel& m) { put_tree(w, m.tree); },
                   [&](const ForestModel& m) { put_trees(w, m.trees); },
                   [&](const BoostedModel& m) {
                       w.put(m.base_margin);
                       put_trees(w, m.trees);
                       w.put_doubles(m.train_loss);
                   },
                   [&](const SgdModel& m) {
                       w.put_doubles(m.weights);
                       w.put(m.bias);
                   },
                   [&](const SvmModel& m) {
                       w.put(m.gamma);
                       w.put(m.bias);
                       put_matrix(w, m.support);
                       w.put_doubles(m.coef);
                       w.put<std::uint64_t>(m.iterations);
                   },
               },
               model.params());
    if (!out) throw FormatError("failed writing model");
}

FittedModel read_model(std::istream& in) {
    io::Reader r(in);
    r.expect_magic("BRNK");
    const auto version = r.get<std::uint32_t>();
    if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));
    const auto tag = r.get<std::uint8_t>();
    if (tag > static_cast<std::uint8_t>(Variant::SvmRbf)) throw FormatError("unknown model variant tag");
    const auto variant = static_cast<Variant>(tag);
    const ClassifierSpec spec = get_spec(r, variant);
    const auto dim = static_cast<std::size_t>(r.get<std::uint64_t>());
    if (dim == 0 || dim > 4096) throw CorruptDataError("implausible model dimensionality");

    auto check_len = [&](const std::vector<double>& v) {
        if (v.size() != dim) throw CorruptDataError("parameter blob length does not match dimensionality");
    };

    ModelParams params = [&]() -> ModelParams {
        switch (variant) {
            case Variant::LogisticRegression: {
                LogisticModel m;
                m.weights = r.get_doubles();
                check_len(m.weights);
                m.bias = r.get<double>();
                m.iterations = r.get<std::int32_t>();
                return m;
            }
            case Variant::GaussianNaiveBayes: {
                NaiveBayesModel m;
                for (int c = 0; c < 2; ++c) {
                    m.log_prior[c] = r.get<double>();
                    m.mean[c] = r.get_doubles();
                    m.var[c] = r.get_doubles();
                    check_len(m.mean[c]);
                    check_len(m.var[c]);
                }
                return m;
            }
            case Variant::KNearest: {
                KnnModel m;
                m.k = r.get<std::int32_t>();
                m.points = get_matrix(r);
                const auto n = r.get<std::uint64_t>();
                if (n != m.points.rows || m.points.cols != dim) throw CorruptDataError("kNN blob mismatch");
                m.labels.resize(n);
                for (auto& l : m.labels) l = r.get<std::uint8_t>();
                return m;
            }
            case Variant::DecisionTree: return TreeModel{get_tree(r, dim)};
            case Variant::RandomForest: return ForestModel{get_trees(r, dim)};
            case Variant::GradientBoostedTrees: {
                BoostedModel m;
                m.base_margin = r.get<double>();
                m.trees = get_trees(r, dim);
                m.train_loss = r.get_doubles();
                return m;
            }
            case Variant::SGDLinear: {
                SgdModel m;
                m.weights = r.get_doubles();
                check_len(m.weights);
                m.bias = r.get<double>();
                return m;
            }
            case Variant::SvmRbf: {
                SvmModel m;
                m.gamma = r.get<double>();
                m.bias = r.get<double>();
                m.support = get_matrix(r);
                m.coef = r.get_doubles();
                m.iterations = r.get<std::uint64_t>();
                if (m.support.cols != dim || m.coef.size() != m.support.rows) {
                    throw CorruptDataError("SVM blob mismatch");
                }
                return m;
            }
        }
        throw FormatError("unknown model variant");
    }();
    return FittedModel(spec, dim, std::move(params));
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    write_model(model, out);
}

FittedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return read_model(in);
}

}  // namespace bandrank
