#include <doctest.h>

#include <cmath>
#include <fstream>

#include "bandrank/bandnet.hpp"
#include "bandrank/errors.hpp"
#include "bandrank/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace bandrank;
using namespace bandrank::bandnet;
using testing::TempDir;
using testing::two_gaussians;

namespace {

MLPParams random_params(std::size_t d, std::uint64_t seed, double scale = 1.0) {
    MLPConfig cfg;
    cfg.input_dim = d;
    MLPParams p(cfg);
    Xoshiro256 rng(seed);
    for (double& v : p.data()) v = scale * rng.uniform(-1.0, 1.0);
    return p;
}

std::vector<SamplePoint> random_batch(std::size_t d, std::size_t n, std::uint64_t seed) {
    Xoshiro256 rng(seed);
    std::vector<SamplePoint> pts(n);
    for (auto& p : pts) {
        for (std::size_t j = 0; j < d; ++j) p.features.push_back(rng.uniform(0.0, 0.6));
        p.label = static_cast<std::uint8_t>(rng.bounded(2));
    }
    return pts;
}

Dataset separable_dataset(std::uint64_t seed) {
    const auto pts = two_gaussians(0.02, 0.35, 0.02, 1000, seed);
    Dataset ds = split(pts, SplitSpec{seed, {0.7, 0.15, 0.15}});
    ds.bands = {BandId::B11};
    return ds;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("parameter counts") {
    MLPConfig c;
    for (auto [d, n] : {std::pair<std::size_t, std::size_t>{1, 1153}, {2, 1185}, {3, 1217}}) {
        c.input_dim = d;
        CHECK(param_count(c) == n);
        const MLPParams p(c);
        const std::size_t enumerated =
            p.w1().size() + p.b1().size() + p.w2().size() + p.b2().size() + p.w3().size() + p.b3().size();
        CHECK(enumerated == n);
        CHECK(p.size() == n);
        CHECK(p.w1().size() == d * 32);
        CHECK(p.w3().size() == 32);
    }
    c.input_dim = 0;
    CHECK_THROWS_AS(param_count(c), ArgumentError);
}

TEST_CASE("initialisation") {
    MLPConfig c;
    const MLPParams a = init_params(c, 5);
    CHECK(a == init_params(c, 5));
    CHECK(a != init_params(c, 6));
    for (auto bias : {a.b1(), a.b2(), a.b3()}) {
        for (double v : bias) CHECK(v == 0.0);
    }
    const double bound = std::sqrt(6.0 / 33.0);
    double max_abs = 0.0;
    for (double v : a.w1()) max_abs = std::max(max_abs, std::abs(v));
    CHECK(max_abs <= bound);
    CHECK(max_abs > 0.5 * bound);
    for (double v : a.w2()) CHECK(std::abs(v) <= std::sqrt(6.0 / 64.0));
}

TEST_CASE("forward pass") {
    MLPConfig c;
    const MLPParams zero(c);
    const std::vector<double> x{0.3};
    CHECK(forward(zero, x) == 0.5);
    const MLPParams p = random_params(1, 3);
    CHECK(forward(p, x) == forward(p, x));
    CHECK_THROWS_AS(forward(p, std::vector<double>{0.1, 0.2}), ArgumentError);
    CHECK_THROWS_AS(forward(p, std::vector<double>{std::nan("")}), DataError);
    const MLPParams big = random_params(1, 4, 50.0);
    for (double v : {-1e6, -3.0, 0.0, 0.7, 1e6}) {
        const double out = forward(big, std::vector<double>{v});
        CHECK(out > 0.0);
        CHECK(out < 1.0);
        CHECK(std::isfinite(bce_loss(out, 0)));
        CHECK(std::isfinite(bce_loss(out, 1)));
    }
}

TEST_CASE("inverted dropout scales kept units") {
    const MLPParams p = random_params(2, 8, 0.5);
    const std::vector<double> x{0.12, 0.4};
    const auto h2 = hidden_activations(p, x);
    REQUIRE(h2.size() == 32);
    const std::vector<std::uint8_t> ones(32, 1);
    double z = p.b3()[0];
    for (std::size_t j = 0; j < 32; ++j) z += p.w3()[j] * h2[j] / 0.6;
    CHECK(forward(p, x, ones) == doctest::Approx(std::clamp(sigmoid(z), 1e-7, 1 - 1e-7)).epsilon(1e-12));

    std::vector<std::uint8_t> half(32, 0);
    double zh = p.b3()[0];
    for (std::size_t j = 0; j < 32; j += 2) {
        half[j] = 1;
        zh += p.w3()[j] * h2[j] / 0.6;
    }
    CHECK(forward(p, x, half) == doctest::Approx(sigmoid(zh)).epsilon(1e-12));
    CHECK_THROWS_AS(forward(p, x, std::vector<std::uint8_t>(31, 1)), ArgumentError);
}

TEST_CASE("binary cross-entropy") {
    CHECK(bce_loss(0.5, 1) == doctest::Approx(std::log(2.0)));
    CHECK(bce_loss(1 - 1e-7, 1) == doctest::Approx(1e-7).epsilon(1e-3));
    CHECK(bce_loss(1e-7, 1) == doctest::Approx(16.118).epsilon(1e-4));
    CHECK(bce_loss(0.0, 1) == bce_loss(1e-7, 1));
    CHECK(bce_loss(0.2, 0) == doctest::Approx(-std::log(0.8)));
}

TEST_CASE("gradients match central differences") {
    for (std::size_t d : {1u, 2u, 3u}) {
        for (std::uint64_t seed : {11u, 12u}) {
            const MLPParams p = random_params(d, seed, 0.6);
            const auto batch = random_batch(d, 5, seed + 100);
            const GradientResult g = gradients(p, batch);
            CHECK(g.loss == doctest::Approx(mean_loss(p, batch)).epsilon(1e-12));
            const auto fd = oracle::central_difference(
                [&](const std::vector<double>& theta) {
                    MLPParams q = p;
                    std::copy(theta.begin(), theta.end(), q.data().begin());
                    return mean_loss(q, batch);
                },
                std::vector<double>(p.data().begin(), p.data().end()), 1e-5);
            double worst = 0.0;
            for (std::size_t i = 0; i < fd.size(); ++i) {
                worst = std::max(worst, oracle::relative_error(g.grad.data()[i], fd[i]));
            }
            CHECK(worst < 1e-4);
        }
    }
}

TEST_CASE("gradient edge cases") {
    const MLPParams p = random_params(1, 2);
    CHECK_THROWS_AS(gradients(p, std::vector<SamplePoint>{}), ArgumentError);
    const auto one = random_batch(1, 1, 3);
    std::vector<SamplePoint> twice{one[0], one[0]};
    const auto g1 = gradients(p, one);
    const auto g2 = gradients(p, twice);
    for (std::size_t i = 0; i < g1.grad.size(); ++i) {
        CHECK(g2.grad.data()[i] == doctest::Approx(g1.grad.data()[i]).epsilon(1e-12));
    }
    const std::vector<std::uint8_t> wrong(5, 1);
    CHECK_THROWS_AS(gradients(p, one, wrong), ArgumentError);

    // Saturated output: the loss is flat in z3, so the gradient vanishes.
    MLPParams sat = random_params(1, 2);
    sat.b3()[0] = 100.0;
    std::vector<SamplePoint> pos = one;
    pos[0].label = 1;
    const auto gs = gradients(sat, pos);
    for (double v : gs.grad.data()) CHECK(v == 0.0);
}

TEST_CASE("gradient with a dropout mask matches differences of the masked loss") {
    const MLPParams p = random_params(2, 21, 0.5);
    const auto batch = random_batch(2, 3, 22);
    Xoshiro256 rng(23);
    std::vector<std::uint8_t> keep(3 * 32);
    for (auto& k : keep) k = rng.uniform01() < 0.6 ? 1 : 0;
    const auto g = gradients(p, batch, keep);
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& theta) {
            MLPParams q = p;
            std::copy(theta.begin(), theta.end(), q.data().begin());
            double s = 0.0;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const std::span<const std::uint8_t> mask(keep.data() + 32 * i, 32);
                s += bce_loss(forward(q, batch[i].features, mask), batch[i].label);
            }
            return s / static_cast<double>(batch.size());
        },
        std::vector<double>(p.data().begin(), p.data().end()), 1e-5);
    for (std::size_t i = 0; i < fd.size(); ++i) CHECK(oracle::relative_error(g.grad.data()[i], fd[i]) < 1e-4);
}

TEST_CASE("training on separable reflectance") {
    const Dataset ds = separable_dataset(3);
    MLPConfig mlp;
    TrainConfig cfg;
    cfg.seed = 7;
    cfg.max_epochs = 50;
    const TrainResult r = train(ds, mlp, cfg);
    const auto& h = r.history;
    CHECK(h.epochs() <= 50);
    CHECK(h.val_acc[h.best_epoch] >= 0.99);
    for (double v : h.val_loss) CHECK(h.val_loss[h.best_epoch] <= v);
    CHECK(evaluate(r.params, ds.val).loss == doctest::Approx(h.val_loss[h.best_epoch]).epsilon(1e-12));

    const TrainResult again = train(ds, mlp, cfg);
    CHECK(again.params == r.params);
    CHECK(again.history.val_loss == h.val_loss);
    CHECK(again.history.train_loss == h.train_loss);
}

TEST_CASE("training runs to max_epochs while validation loss keeps improving") {
    const Dataset ds = separable_dataset(4);
    TrainConfig cfg;
    cfg.seed = 1;
    cfg.max_epochs = 6;
    const TrainResult r = train(ds, MLPConfig{}, cfg);
    for (std::size_t i = 1; i < r.history.val_loss.size(); ++i) {
        REQUIRE(r.history.val_loss[i] < r.history.val_loss[i - 1]);
    }
    CHECK(r.history.epochs() == 6);
    CHECK_FALSE(r.history.stopped_early);
    CHECK(r.history.best_epoch == 5);
}

TEST_CASE("early stopping restores the best epoch") {
    // Overlapping classes and a large step make validation loss plateau quickly.
    const auto pts = two_gaussians(0.10, 0.12, 0.05, 300, 9);
    Dataset ds = split(pts, SplitSpec{9, {0.7, 0.15, 0.15}});
    TrainConfig cfg;
    cfg.seed = 2;
    cfg.learning_rate = 0.05;
    cfg.patience = 3;
    const TrainResult r = train(ds, MLPConfig{}, cfg);
    const auto& h = r.history;
    REQUIRE(h.stopped_early);
    CHECK(h.epochs() == h.best_epoch + 1 + cfg.patience);
    CHECK(evaluate(r.params, ds.val).loss == doctest::Approx(h.val_loss[h.best_epoch]).epsilon(1e-12));
    for (double v : h.val_loss) CHECK(h.val_loss[h.best_epoch] <= v);
}

TEST_CASE("training argument checks") {
    Dataset empty;
    CHECK_THROWS_AS(train(empty, MLPConfig{}, TrainConfig{}), ArgumentError);
    TrainConfig bad;
    bad.patience = 0;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    MLPConfig two;
    two.input_dim = 2;
    CHECK_THROWS_AS(train(separable_dataset(1), two, TrainConfig{}), ArgumentError);
}

TEST_CASE("map inference") {
    const Dataset ds = separable_dataset(5);
    TrainConfig cfg;
    cfg.seed = 3;
    cfg.max_epochs = 30;
    const TrainResult r = train(ds, MLPConfig{}, cfg);

    const SamplePoint* water = nullptr;
    for (const auto& p : ds.train) {
        if (p.label == 1 && p.features[0] > 0.0) {
            water = &p;
            break;
        }
    }
    REQUIRE(water != nullptr);
    Scene s;
    s.tile_id = "M";
    const auto code = static_cast<std::uint16_t>(std::lround(water->features[0] * 10000));
    BandGrid g(BandId::B11, 37, 23);
    std::fill(g.values.begin(), g.values.end(), code);
    s.bands.emplace(BandId::B11, g);
    BandGrid scl(BandId::SCL, 37, 23);
    std::fill(scl.values.begin(), scl.values.end(), 6);
    scl.at(3, 4) = 0;
    s.scl = scl;
    const std::vector<BandId> bands{BandId::B11};
    const WaterMask m = predict_map(r.params, s, bands, 0.5, 1);
    CHECK(m.count(mask_label::kWater) == 37u * 23u - 1u);
    CHECK(m.at(3, 4) == mask_label::kInvalid);
    CHECK(predict_map(r.params, s, bands, 0.5, 1) == m);
    CHECK(predict_map(r.params, s, bands, 0.5, 4) == m);
    CHECK_THROWS_AS(predict_map(r.params, s, bands, 1.0 + 1e-9), ArgumentError);
    CHECK_THROWS_AS(predict_map(r.params, s, bands, 0.0), ArgumentError);
    const std::vector<BandId> two{BandId::B11, BandId::B12};
    CHECK_THROWS_AS(predict_map(r.params, s, two), ArgumentError);
}

TEST_CASE("weight file and history CSV") {
    TempDir dir("bandnet_io");
    const MLPParams p = random_params(3, 31);
    save_weights(p, dir / "w.bnet");
    const std::string bytes = testing::slurp(dir / "w.bnet");
    CHECK(bytes.substr(0, 4) == "BNET");
    CHECK(bytes.size() == 4 + 4 * 5 + 8 * 1217);
    CHECK(load_weights(dir / "w.bnet") == p);
    {
        std::ofstream os(dir / "w.bnet", std::ios::app | std::ios::binary);
        os << 'x';
    }
    CHECK_THROWS_AS(load_weights(dir / "w.bnet"), CorruptDataError);
    {
        std::ofstream os(dir / "short.bnet", std::ios::binary);
        os << bytes.substr(0, 100);
    }
    CHECK_THROWS_AS(load_weights(dir / "short.bnet"), CorruptDataError);
    CHECK_THROWS_AS(load_weights(dir / "missing.bnet"), FormatError);

    TrainHistory h;
    h.train_loss = {0.7, 0.5, 0.45};
    h.val_loss = {0.6, 0.4, 0.41};
    h.val_acc = {0.5, 0.9, 0.88};
    h.best_epoch = 1;
    write_history_csv(h, dir / "h.csv");
    CHECK(testing::slurp(dir / "h.csv").substr(0, 61) ==
          "epoch,train_loss,val_loss,val_acc\n1,0.70000000,0.60000000,0.5");
    const TrainHistory back = read_history_csv(dir / "h.csv");
    CHECK(back.best_epoch == 1);
    CHECK(back.val_acc == h.val_acc);
}
