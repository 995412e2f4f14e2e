#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "bandrank/classifiers.hpp"
#include "bandrank/errors.hpp"
#include "bandrank/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace bandrank;
using testing::TempDir;
using testing::two_gaussians;

namespace {

constexpr std::array<Variant, 8> kAll = kTableOrder;

SamplePoint point(std::vector<double> x, int label, int id = 0) {
    SamplePoint p;
    p.features = std::move(x);
    p.label = static_cast<std::uint8_t>(label);
    p.source = {"T", id, 0};
    return p;
}

double accuracy(const FittedModel& m, const std::vector<SamplePoint>& pts) {
    std::size_t hit = 0;
    for (const auto& p : pts) hit += m.predict(p.features) == p.label ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(pts.size());
}

std::vector<SamplePoint> xor_clusters() {
    std::vector<SamplePoint> pts;
    const double corners[4][2] = {{0.1, 0.1}, {0.9, 0.9}, {0.1, 0.9}, {0.9, 0.1}};
    int id = 0;
    for (int c = 0; c < 4; ++c) {
        for (int k = 0; k < 4; ++k) {
            const double dx = (k % 2 == 0 ? -0.03 : 0.03);
            const double dy = (k < 2 ? -0.03 : 0.03);
            pts.push_back(point({corners[c][0] + dx, corners[c][1] + dy}, c < 2 ? 1 : 0, id++));
        }
    }
    return pts;
}

}  // namespace

TEST_CASE("variant names") {
    for (Variant v : kAll) CHECK(parse_variant(variant_name(v)) == v);
    CHECK(parse_variant_list("all").size() == 8);
    CHECK(parse_variant_list("SVM,LR") == std::vector<Variant>{Variant::SvmRbf, Variant::LogisticRegression});
    CHECK_THROWS_AS(parse_variant("CNN"), ArgumentError);
    CHECK_THROWS_AS(parse_variant_list("LR,LR"), ArgumentError);
}

TEST_CASE("spec validation") {
    auto s = ClassifierSpec::make(Variant::KNearest);
    s.knn.k = 4;
    CHECK_THROWS_AS(s.validate(), ArgumentError);
    s.knn.k = 0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);
    auto b = ClassifierSpec::make(Variant::GradientBoostedTrees);
    b.boosting.learning_rate = 0.0;
    CHECK_THROWS_AS(b.validate(), ArgumentError);
}

TEST_CASE("fit input validation") {
    std::vector<SamplePoint> one_class{point({0.1}, 1, 0), point({0.2}, 1, 1), point({0.3}, 1, 2)};
    CHECK_THROWS_AS(fit(ClassifierSpec::make(Variant::LogisticRegression), one_class), DegenerateDataError);
    CHECK_THROWS_AS(fit(ClassifierSpec::make(Variant::SvmRbf), one_class), DegenerateDataError);
    CHECK_NOTHROW(fit(ClassifierSpec::make(Variant::GaussianNaiveBayes), one_class));
    CHECK_THROWS_AS(fit(ClassifierSpec::make(Variant::DecisionTree), std::vector<SamplePoint>{}), ArgumentError);
    std::vector<SamplePoint> with_nan{point({0.1}, 1, 0), point({std::nan("")}, 0, 1)};
    CHECK_THROWS_AS(fit(ClassifierSpec::make(Variant::LogisticRegression), with_nan), DataError);
    const auto m = fit(ClassifierSpec::make(Variant::LogisticRegression), two_gaussians(0.05, 0.4, 0.02, 20, 1));
    const std::vector<double> wrong{0.1, 0.2};
    CHECK_THROWS_AS(m.predict(wrong), ArgumentError);
}

TEST_CASE("naive Bayes class means and posterior") {
    std::vector<SamplePoint> pts;
    for (int i = 0; i < 50; ++i) pts.push_back(point({0.01}, 1, i));
    for (int i = 0; i < 50; ++i) pts.push_back(point({0.30}, 0, 50 + i));
    const auto m = fit(ClassifierSpec::make(Variant::GaussianNaiveBayes), pts);
    const auto& nb = std::get<NaiveBayesModel>(m.params());
    CHECK(nb.mean[1][0] == doctest::Approx(0.01));
    CHECK(nb.mean[0][0] == doctest::Approx(0.30));
    CHECK(m.predict(std::vector<double>{0.02}) == 1);
}

TEST_CASE("naive Bayes matches the closed-form posterior") {
    // Symmetric classes around 0 and 1 with equal variance: boundary at 0.5.
    std::vector<SamplePoint> pts;
    int id = 0;
    for (double d : {-0.5, -0.25, 0.0, 0.25, 0.5}) {
        pts.push_back(point({0.0 + d}, 0, id++));
        pts.push_back(point({1.0 + d}, 1, id++));
    }
    const auto m = fit(ClassifierSpec::make(Variant::GaussianNaiveBayes), pts);
    CHECK(m.predict(std::vector<double>{0.49}) == 0);
    CHECK(m.predict(std::vector<double>{0.51}) == 1);
    const auto& nb = std::get<NaiveBayesModel>(m.params());
    for (double x : {-0.3, 0.2, 0.49, 0.5, 0.8, 1.7}) {
        const std::vector<double> q{x};
        const auto post = naive_bayes_posterior(m, q);
        CHECK(std::abs(post[0] + post[1] - 1.0) <= 1e-12);
        const double expect = oracle::gaussian_posterior(x, nb.mean[0][0], nb.var[0][0], 0.5, nb.mean[1][0],
                                                         nb.var[1][0], 0.5);
        CHECK(post[1] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("naive Bayes posteriors sum to one on random data") {
    Xoshiro256 rng(8);
    std::vector<SamplePoint> pts;
    for (int i = 0; i < 200; ++i) pts.push_back(point({rng.uniform01(), rng.uniform01()}, i % 3 == 0, i));
    const auto m = fit(ClassifierSpec::make(Variant::GaussianNaiveBayes), pts);
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> q{rng.uniform(-1, 2), rng.uniform(-1, 2)};
        const auto post = naive_bayes_posterior(m, q);
        CHECK(std::abs(post[0] + post[1] - 1.0) <= 1e-12);
    }
}

TEST_CASE("kNN stores every point and votes") {
    const auto pts = two_gaussians(0.05, 0.4, 0.02, 30, 4);
    const auto m = fit(ClassifierSpec::make(Variant::KNearest), pts);
    const auto& knn = std::get<KnnModel>(m.params());
    CHECK(knn.points.rows == pts.size());
    CHECK(knn.labels.size() == pts.size());

    // Seven stored points nearest the query: five water, two land.
    std::vector<SamplePoint> votes{point({0.00}, 1, 0), point({0.01}, 1, 1), point({-0.01}, 1, 2),
                                   point({0.02}, 1, 3), point({-0.02}, 1, 4), point({0.03}, 0, 5),
                                   point({-0.03}, 0, 6), point({5.0}, 0, 7), point({6.0}, 0, 8)};
    const auto v = fit(ClassifierSpec::make(Variant::KNearest), votes);
    const std::vector<double> q{0.0};
    CHECK(v.predict(q) == 1);
    CHECK(v.decision_value(q) == doctest::Approx(5.0 / 7.0));
}

TEST_CASE("kNN equals the brute-force oracle") {
    Xoshiro256 rng(21);
    std::vector<SamplePoint> pts;
    for (int i = 0; i < 2000; ++i) {
        // Coarse grid values force many distance ties.
        pts.push_back(point({std::round(rng.uniform01() * 40) / 40, std::round(rng.uniform01() * 40) / 40},
                            rng.uniform01() < 0.5, i));
    }
    const auto m = fit(ClassifierSpec::make(Variant::KNearest), pts);
    const auto& knn = std::get<KnnModel>(m.params());
    for (int t = 0; t < 200; ++t) {
        const std::vector<double> q{std::round(rng.uniform01() * 40) / 40, rng.uniform01()};
        const auto got = knn_neighbors(knn, q);
        const auto want = oracle::knn(knn.points.values, 2, q, 7);
        CHECK(got == want);
        std::size_t water = 0;
        for (std::size_t i : want) water += knn.labels[i];
        CHECK(m.predict(q) == (water >= 4 ? 1 : 0));
    }
}

TEST_CASE("kNN with k = 1 recovers training labels") {
    auto pts = two_gaussians(0.1, 0.15, 0.05, 100, 5);
    auto spec = ClassifierSpec::make(Variant::KNearest);
    spec.knn.k = 1;
    const auto m = fit(spec, pts);
    for (const auto& p : pts) CHECK(m.predict(p.features) == p.label);
}

TEST_CASE("decision tree on separated classes") {
    std::vector<SamplePoint> pts;
    for (int i = 0; i < 40; ++i) pts.push_back(point({0.02 + 0.001 * i}, 1, i));
    for (int i = 0; i < 40; ++i) pts.push_back(point({0.2 + 0.01 * i}, 0, 40 + i));
    const auto m = fit(ClassifierSpec::make(Variant::DecisionTree), pts);
    const auto& tree = std::get<TreeModel>(m.params()).tree;
    CHECK(tree.leaf_count() == 2);
    CHECK(accuracy(m, pts) == 1.0);
    std::vector<double> xs;
    for (const auto& p : pts) xs.push_back(p.features[0]);
    const auto stump = oracle::best_threshold(xs, testing::labels(pts));
    CHECK(stump.errors == 0);
    CHECK(tree.nodes[0].threshold == doctest::Approx(stump.threshold));
}

TEST_CASE("decision tree is invariant to monotone feature transforms") {
    Xoshiro256 rng(13);
    std::vector<SamplePoint> train;
    for (int i = 0; i < 300; ++i) {
        const double x0 = rng.uniform01();
        const double x1 = rng.uniform01();
        train.push_back(point({x0, x1}, (x0 + 0.3 * x1 + 0.1 * rng.normal()) < 0.6, i));
    }
    auto warp = [](double v) { return std::exp(3.0 * v) - 1.0; };
    std::vector<SamplePoint> warped = train;
    for (auto& p : warped) p.features[0] = warp(p.features[0]);
    const auto a = fit(ClassifierSpec::make(Variant::DecisionTree), train);
    const auto b = fit(ClassifierSpec::make(Variant::DecisionTree), warped);
    CHECK(std::get<TreeModel>(a.params()).tree.leaf_count() == std::get<TreeModel>(b.params()).tree.leaf_count());
    // Probes reuse observed values so no probe falls between a midpoint and its warped image.
    for (int t = 0; t < 300; ++t) {
        const auto& p0 = train[rng.bounded(train.size())];
        const auto& p1 = train[rng.bounded(train.size())];
        const std::vector<double> q{p0.features[0], p1.features[1]};
        const std::vector<double> qw{warp(p0.features[0]), p1.features[1]};
        CHECK(a.predict(q) == b.predict(qw));
    }
}

TEST_CASE("SVM separates XOR clusters like the brute-force dual") {
    const auto pts = xor_clusters();
    const auto m = fit(ClassifierSpec::make(Variant::SvmRbf), pts);
    CHECK(accuracy(m, pts) == 1.0);
    const auto& svm = std::get<SvmModel>(m.params());

    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (const auto& p : pts) {
        x.push_back(p.features);
        y.push_back(p.label == 1 ? 1.0 : -1.0);
    }
    const auto dual = oracle::solve_svm_dual(x, y, 1.0, svm.gamma);

    // Recover alpha from the stored coefficients (coef = alpha * y).
    std::vector<double> alpha(x.size(), 0.0);
    for (std::size_t s = 0; s < svm.support.rows; ++s) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (svm.support(s, 0) == x[i][0] && svm.support(s, 1) == x[i][1]) alpha[i] = svm.coef[s] * y[i];
        }
    }
    const double obj = oracle::svm_dual_objective(x, y, alpha, svm.gamma);
    CHECK(obj == doctest::Approx(dual.objective).epsilon(1e-3));
    for (double gx = 0.0; gx <= 1.0; gx += 0.1) {
        for (double gy = 0.0; gy <= 1.0; gy += 0.1) {
            const std::vector<double> q{gx, gy};
            const double f = oracle::svm_decision(x, y, dual, q, svm.gamma);
            if (std::abs(f) > 0.05) CHECK((m.decision_value(q) >= 0) == (f >= 0));
        }
    }
    CHECK(m.predict(std::vector<double>{0.1, 0.1}) == 1);
    CHECK(m.predict(std::vector<double>{0.1, 0.9}) == 0);
}

TEST_CASE("decision values agree with predict") {
    const auto pts = two_gaussians(0.1, 0.2, 0.05, 150, 17);
    Xoshiro256 rng(2);
    for (Variant v : kAll) {
        const auto m = fit(ClassifierSpec::make(v, 3), pts);
        for (int t = 0; t < 100; ++t) {
            const std::vector<double> q{rng.uniform(0.0, 0.3)};
            const double d = m.decision_value(q);
            int expect = 0;
            switch (v) {
                case Variant::KNearest: expect = d >= 0.5; break;
                case Variant::DecisionTree:
                case Variant::RandomForest: expect = d > 0.5; break;
                default: expect = d >= 0.0; break;
            }
            CHECK(m.predict(q) == expect);
        }
    }
    const auto lr = fit(ClassifierSpec::make(Variant::LogisticRegression), pts);
    const auto& w = std::get<LogisticModel>(lr.params());
    const std::vector<double> q{0.13};
    CHECK(lr.decision_value(q) == doctest::Approx(w.weights[0] * 0.13 + w.bias));
}

TEST_CASE("every variant separates well-separated classes") {
    const auto train = two_gaussians(0.05, 0.40, 0.02, 500, 31);
    const auto test = two_gaussians(0.05, 0.40, 0.02, 500, 32);
    for (Variant v : kAll) {
        CAPTURE(variant_name(v));
        const auto m = fit(ClassifierSpec::make(v, 5), train);
        CHECK(accuracy(m, test) >= 0.95);
    }
}

TEST_CASE("fits are deterministic") {
    const auto train = two_gaussians(0.1, 0.16, 0.04, 200, 41);
    const auto probe = two_gaussians(0.1, 0.16, 0.06, 100, 42);
    for (Variant v : kAll) {
        CAPTURE(variant_name(v));
        const auto a = fit(ClassifierSpec::make(v, 9), train);
        const auto b = fit(ClassifierSpec::make(v, 9), train);
        for (const auto& p : probe) CHECK(a.decision_value(p.features) == b.decision_value(p.features));
    }
}

TEST_CASE("boosting loss never increases") {
    const auto train = two_gaussians(0.1, 0.14, 0.05, 300, 51);
    const auto m = fit(ClassifierSpec::make(Variant::GradientBoostedTrees), train);
    const auto& loss = std::get<BoostedModel>(m.params()).train_loss;
    CHECK(loss.size() == 100);
    for (std::size_t i = 1; i < loss.size(); ++i) CHECK(loss[i] <= loss[i - 1] + 1e-12);
    for (const auto& t : std::get<BoostedModel>(m.params()).trees) CHECK(t.depth() <= 6);
}

TEST_CASE("forest uses its seed") {
    const auto train = two_gaussians(0.1, 0.14, 0.05, 200, 61);
    const auto a = fit(ClassifierSpec::make(Variant::RandomForest, 1), train);
    const auto b = fit(ClassifierSpec::make(Variant::RandomForest, 2), train);
    CHECK(std::get<ForestModel>(a.params()).trees.size() == 100);
    bool differ = false;
    for (const auto& p : train) differ = differ || a.decision_value(p.features) != b.decision_value(p.features);
    CHECK(differ);
}

TEST_CASE("model container round trip") {
    TempDir dir("classifier_io");
    Xoshiro256 rng(77);
    std::vector<SamplePoint> train;
    for (int i = 0; i < 200; ++i) train.push_back(point({rng.uniform01(), rng.uniform01()}, rng.uniform01() < 0.4, i));
    for (Variant v : kAll) {
        CAPTURE(variant_name(v));
        const auto m = fit(ClassifierSpec::make(v, 4), train);
        const auto path = dir / (std::string(variant_name(v)) + ".brnk");
        save_model(m, path);
        const auto back = load_model(path);
        CHECK(back.spec().variant == v);
        CHECK(back.dim() == 2);
        for (int t = 0; t < 50; ++t) {
            const std::vector<double> q{rng.uniform01(), rng.uniform01()};
            CHECK(back.decision_value(q) == m.decision_value(q));
        }
    }
}

TEST_CASE("model container rejects bad input") {
    std::istringstream bad_magic("XXXX0000");
    CHECK_THROWS_AS(read_model(bad_magic), FormatError);
    const auto m = fit(ClassifierSpec::make(Variant::LogisticRegression), two_gaussians(0.05, 0.4, 0.02, 20, 1));
    std::ostringstream os;
    write_model(m, os);
    const std::string bytes = os.str();
    CHECK(bytes.substr(0, 4) == "BRNK");
    std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_model(truncated), CorruptDataError);
    CHECK_THROWS_AS(load_model("/nonexistent/model.brnk"), FormatError);
}
