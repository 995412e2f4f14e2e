#include <doctest.h>

#include <cmath>
#include <limits>

#include "bandrank/errors.hpp"
#include "bandrank/ranking.hpp"
#include "bandrank/synthetic.hpp"
#include "oracles.hpp"
#include "published_table.hpp"
#include "test_support.hpp"

using namespace bandrank;
using testing::TempDir;

namespace {

using Matrix = std::vector<std::vector<double>>;

const Scene& scene() {
    static const Scene s = [] {
        SyntheticSpec spec;
        spec.width = 160;
        spec.height = 160;
        spec.seed = 4;
        return make_synthetic_scene(spec);
    }();
    return s;
}

RankingOptions options(std::size_t n, std::uint64_t seed, std::size_t jobs = 1) {
    RankingOptions o;
    o.n_per_class = n;
    o.split.seed = seed;
    o.jobs = jobs;
    return o;
}

std::vector<ClassifierSpec> specs(std::initializer_list<Variant> vs) {
    std::vector<ClassifierSpec> out;
    for (Variant v : vs) out.push_back(ClassifierSpec::make(v));
    return out;
}

bool same_matrix(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return false;
        for (std::size_t j = 0; j < a[i].size(); ++j) {
            if (!(a[i][j] == b[i][j] || (std::isnan(a[i][j]) && std::isnan(b[i][j])))) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("cell seeds depend on band and variant identity") {
    CHECK(cell_seed(42, BandId::B11, Variant::SvmRbf) == cell_seed(42, BandId::B11, Variant::SvmRbf));
    CHECK(cell_seed(42, BandId::B11, Variant::SvmRbf) != cell_seed(42, BandId::B12, Variant::SvmRbf));
    CHECK(cell_seed(42, BandId::B11, Variant::SvmRbf) != cell_seed(42, BandId::B11, Variant::KNearest));
    CHECK(cell_seed(42, BandId::B11, Variant::SvmRbf) != cell_seed(43, BandId::B11, Variant::SvmRbf));
}

TEST_CASE("one-cell ranking equals a direct computation") {
    const WaterMask mask = scene_mask(scene());
    const std::vector<BandId> bands{BandId::B8};
    const auto r = rank_bands(scene(), mask, bands, specs({Variant::GaussianNaiveBayes}), options(300, 5));
    REQUIRE(r.miou.size() == 1);
    REQUIRE(r.miou[0].size() == 1);

    const auto pts = balanced_sample(scene(), bands, mask, 300, 5);
    const Dataset ds = split(pts, SplitSpec{5, {0.7, 0.15, 0.15}});
    const auto model = fit(ClassifierSpec::make(Variant::GaussianNaiveBayes,
                                                cell_seed(5, BandId::B8, Variant::GaussianNaiveBayes)),
                           ds.train);
    const double direct = 100.0 * miou(confusion(model.predict_all(ds.val), labels_of(ds.val)));
    CHECK(r.miou[0][0] == direct);
    CHECK(r.train_size == ds.train.size());
    CHECK(r.val_size == ds.val.size());
}

TEST_CASE("cells do not depend on their neighbours or on the worker count") {
    const WaterMask mask = scene_mask(scene());
    const std::vector<BandId> bands{BandId::B2, BandId::B8, BandId::B11};
    const auto algos = specs({Variant::LogisticRegression, Variant::RandomForest, Variant::SvmRbf,
                              Variant::GradientBoostedTrees, Variant::SGDLinear});
    const auto serial = rank_bands(scene(), mask, bands, algos, options(250, 8, 1));
    for (std::size_t jobs : {2u, 3u, 8u}) {
        const auto parallel = rank_bands(scene(), mask, bands, algos, options(250, 8, jobs));
        CHECK(same_matrix(parallel.miou, serial.miou));
        CHECK(parallel.row_percents == serial.row_percents);
    }
    const std::vector<BandId> lone{BandId::B8};
    const auto isolated = rank_bands(scene(), mask, lone, specs({Variant::SvmRbf}), options(250, 8));
    CHECK(isolated.miou[0][0] == serial.miou[1][2]);

    const PercentScores ps = percent_scores(serial.miou);
    CHECK(ps.rows == serial.row_percents);
    CHECK(ps.cols == serial.col_percents);
}

TEST_CASE("failed fits become annotated gaps") {
    Dataset ds;
    ds.bands = {BandId::B11};
    for (int i = 0; i < 10; ++i) {
        SamplePoint p;
        p.features = {0.01 * i};
        p.label = 1;
        p.source = {"T", i, 0};
        ds.train.push_back(p);
        p.label = static_cast<std::uint8_t>(i % 2);
        ds.val.push_back(p);
    }
    const CellOutcome lr = rank_cell(ds, 0, ClassifierSpec::make(Variant::LogisticRegression));
    CHECK(std::isnan(lr.miou100));
    CHECK_FALSE(lr.error.empty());
    const CellOutcome nb = rank_cell(ds, 0, ClassifierSpec::make(Variant::GaussianNaiveBayes));
    CHECK(nb.error.empty());
    CHECK(nb.miou100 == doctest::Approx(25.0));
}

TEST_CASE("ranking argument checks") {
    const WaterMask mask = scene_mask(scene());
    CHECK_THROWS_AS(rank_bands(scene(), mask, {}, specs({Variant::LogisticRegression}), options(10, 1)),
                    ArgumentError);
    CHECK_THROWS_AS(rank_bands(scene(), mask, {BandId::B11}, {}, options(10, 1)), ArgumentError);
    CHECK_THROWS_AS(rank_bands(scene(), mask, {BandId::B11}, specs({Variant::LogisticRegression}),
                               options(1000000, 1)),
                    InsufficientDataError);
}

TEST_CASE("best cell") {
    const CellIndex best = best_cell(published::kMiou);
    CHECK(published::kBands[best.row] == "B11");
    CHECK(published::kAlgorithms[best.col] == "GNB");
    CHECK(best.value == 87.71);
    const CellIndex one = best_cell(Matrix{{42.0}});
    CHECK(one.row == 0);
    CHECK(one.value == 42.0);
    const CellIndex tie = best_cell(Matrix{{1.0, 3.0}, {3.0, 2.0}});
    CHECK(tie.row == 0);
    CHECK(tie.col == 1);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK(best_cell(Matrix{{nan, 5.0}}).col == 1);
    CHECK_THROWS_AS(best_cell(Matrix{}), ArgumentError);
    CHECK_THROWS_AS(best_cell(Matrix{{nan}}), ArgumentError);
}

TEST_CASE("synthetic separability ordering is recovered") {
    const WaterMask mask = scene_mask(scene());
    const std::vector<BandId> bands = parse_band_list("all");
    const auto algos = specs({Variant::LogisticRegression, Variant::GaussianNaiveBayes, Variant::DecisionTree});
    const auto r = rank_bands(scene(), mask, bands, algos, options(400, 42));
    std::vector<double> engineered;
    for (BandId b : bands) engineered.push_back(-static_cast<double>(synthetic_rank(b)));
    CHECK(oracle::spearman(r.row_percents, engineered) >= 0.9);
    const BandId top = best_cell(r).first;
    CHECK((top == BandId::B11 || top == BandId::B12));
}

TEST_CASE("models can be saved per cell") {
    TempDir dir("ranking_models");
    const WaterMask mask = scene_mask(scene());
    RankingOptions o = options(100, 3);
    o.model_dir = dir.path();
    const std::vector<BandId> bands{BandId::B11};
    const auto r = rank_bands(scene(), mask, bands, specs({Variant::DecisionTree}), o);
    const auto m = load_model(dir / "B11_DT.brnk");
    CHECK(m.spec().variant == Variant::DecisionTree);
    CHECK(m.spec().seed == cell_seed(3, BandId::B11, Variant::DecisionTree));
    CHECK(std::isfinite(r.miou[0][0]));
}
