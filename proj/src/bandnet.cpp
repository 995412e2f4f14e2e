#include "bandrank/bandnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "bandrank/binary_io.hpp"
#include "bandrank/errors.hpp"
#include "bandrank/parallel.hpp"
#include "bandrank/rng.hpp"

namespace bandrank::bandnet {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kWeightVersion = 1;

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

struct Trace {
    std::vector<double> z1, a1, z2, a2, dropped;
    double z3 = 0.0;
    double raw_p = 0.0;
};

void run_forward(const MLPParams& params, std::span<const double> x, std::span<const std::uint8_t> keep, Trace& t) {
    const auto& cfg = params.config();
    const std::size_t d = cfg.input_dim;
    const std::size_t h1 = cfg.hidden[0];
    const std::size_t h2 = cfg.hidden[1];
    if (x.size() != d) {
        throw ArgumentError("BandNet expects " + std::to_string(d) + " inputs, got " + std::to_string(x.size()));
    }
    for (double v : x) {
        if (!std::isfinite(v)) throw DataError("non-finite BandNet input");
    }
    const auto w1 = params.w1();
    const auto b1 = params.b1();
    const auto w2 = params.w2();
    const auto b2 = params.b2();
    const auto w3 = params.w3();

    t.z1.assign(b1.begin(), b1.end());
    for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t j = 0; j < h1; ++j) t.z1[j] += x[k] * w1[k * h1 + j];
    }
    t.a1.resize(h1);
    for (std::size_t j = 0; j < h1; ++j) t.a1[j] = t.z1[j] > 0 ? t.z1[j] : 0.0;

    t.z2.assign(b2.begin(), b2.end());
    for (std::size_t i = 0; i < h1; ++i) {
        const double a = t.a1[i];
        if (a == 0.0) continue;
        for (std::size_t j = 0; j < h2; ++j) t.z2[j] += a * w2[i * h2 + j];
    }
    t.a2.resize(h2);
    for (std::size_t j = 0; j < h2; ++j) t.a2[j] = t.z2[j] > 0 ? t.z2[j] : 0.0;

    t.dropped = t.a2;
    if (!keep.empty()) {
        const double scale = 1.0 / (1.0 - cfg.dropout_rate);
        for (std::size_t j = 0; j < h2; ++j) t.dropped[j] = keep[j] ? t.a2[j] * scale : 0.0;
    }
    t.z3 = params.b3()[0];
    for (std::size_t j = 0; j < h2; ++j) t.z3 += t.dropped[j] * w3[j];
    t.raw_p = sigmoid(t.z3);
}

std::vector<std::size_t> layer_offsets(const MLPConfig& c) {
    const std::size_t d = c.input_dim;
    const std::size_t h1 = c.hidden[0];
    const std::size_t h2 = c.hidden[1];
    const std::array<std::size_t, 6> sizes{d * h1, h1, h1 * h2, h2, h2, 1};
    std::vector<std::size_t> off(7, 0);
    for (std::size_t i = 0; i < 6; ++i) off[i + 1] = off[i] + sizes[i];
    return off;
}

}  // namespace

void MLPConfig::validate() const {
    if (input_dim < 1) throw ArgumentError("input_dim must be >= 1");
    if (hidden[0] < 1 || hidden[1] < 1) throw ArgumentError("hidden widths must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ArgumentError("dropout rate must be in [0, 1)");
}

MLPParams::MLPParams(const MLPConfig& config) : config_(config) {
    config_.validate();
    const auto off = layer_offsets(config_);
    std::copy(off.begin(), off.end(), offsets_.begin());
    data_.assign(offsets_.back(), 0.0);
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw ArgumentError("learning_rate must be positive");
    if (patience < 1) throw ArgumentError("patience must be >= 1");
    if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
    if (max_epochs < 1) throw ArgumentError("max_epochs must be >= 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && epsilon > 0)) {
        throw ArgumentError("invalid Adam parameters");
    }
}

std::size_t param_count(const MLPConfig& config) {
    config.validate();
    const std::size_t d = config.input_dim;
    const std::size_t h1 = config.hidden[0];
    const std::size_t h2 = config.hidden[1];
    return (d * h1 + h1) + (h1 * h2 + h2) + (h2 + 1);
}

MLPParams init_params(const MLPConfig& config, std::uint64_t seed) {
    MLPParams params(config);
    Xoshiro256 rng(seed);
    auto glorot = [&](std::span<double> w, std::size_t fan_in, std::size_t fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (auto& v : w) v = rng.uniform(-limit, limit);
    };
    glorot(params.w1(), config.input_dim, config.hidden[0]);
    glorot(params.w2(), config.hidden[0], config.hidden[1]);
    glorot(params.w3(), config.hidden[1], 1);
    return params;
}

double forward(const MLPParams& params, std::span<const double> x) {
    Trace t;
    run_forward(params, x, {}, t);
    return clamp_prob(t.raw_p);
}

double forward(const MLPParams& params, std::span<const double> x, std::span<const std::uint8_t> keep) {
    if (keep.size() != params.config().hidden[1]) throw ArgumentError("dropout mask has the wrong length");
    Trace t;
    run_forward(params, x, keep, t);
    return clamp_prob(t.raw_p);
}

std::vector<double> hidden_activations(const MLPParams& params, std::span<const double> x) {
    Trace t;
    run_forward(params, x, {}, t);
    return t.a2;
}

double bce_loss(double p, int y) {
    p = clamp_prob(p);
    return y ? -std::log(p) : -std::log(1.0 - p);
}

GradientResult gradients(const MLPParams& params, std::span<const SamplePoint> batch,
                         std::span<const std::uint8_t> keep_masks) {
    if (batch.empty()) throw ArgumentError("gradient of an empty batch is undefined");
    const auto& cfg = params.config();
    const std::size_t d = cfg.input_dim;
    const std::size_t h1 = cfg.hidden[0];
    const std::size_t h2 = cfg.hidden[1];
    if (!keep_masks.empty() && keep_masks.size() != batch.size() * h2) {
        throw ArgumentError("dropout masks must hold batch_size * hidden entries");
    }
    const double drop_scale = 1.0 / (1.0 - cfg.dropout_rate);
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    GradientResult out{MLPParams(cfg), 0.0};
    auto gw1 = out.grad.w1();
    auto gb1 = out.grad.b1();
    auto gw2 = out.grad.w2();
    auto gb2 = out.grad.b2();
    auto gw3 = out.grad.w3();
    auto gb3 = out.grad.b3();
    const auto w2 = params.w2();
    const auto w3 = params.w3();

    Trace t;
    std::vector<double> dz2(h2);
    std::vector<double> dz1(h1);
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto& point = batch[s];
        const auto keep = keep_masks.empty() ? std::span<const std::uint8_t>{} : keep_masks.subspan(s * h2, h2);
        run_forward(params, point.features, keep, t);
        out.loss += bce_loss(t.raw_p, point.label) * inv_n;

        // d(loss)/d(z3) is p - y inside the clamp range and 0 where the clamp is active.
        const bool clamped = t.raw_p < kProbClamp || t.raw_p > 1.0 - kProbClamp;
        const double dz3 = clamped ? 0.0 : (t.raw_p - point.label) * inv_n;
        if (dz3 == 0.0) continue;

        gb3[0] += dz3;
        for (std::size_t j = 0; j < h2; ++j) {
            gw3[j] += dz3 * t.dropped[j];
            double da2 = dz3 * w3[j];
            if (!keep.empty()) da2 = keep[j] ? da2 * drop_scale : 0.0;
            dz2[j] = t.z2[j] > 0 ? da2 : 0.0;
            gb2[j] += dz2[j];
        }
        for (std::size_t i = 0; i < h1; ++i) {
            double da1 = 0.0;
            for (std::size_t j = 0; j < h2; ++j) {
                gw2[i * h2 + j] += t.a1[i] * dz2[j];
                da1 += w2[i * h2 + j] * dz2[j];
            }
            dz1[i] = t.z1[i] > 0 ? da1 : 0.0;
            gb1[i] += dz1[i];
        }
        for (std::size_t k = 0; k < d; ++k) {
            for (std::size_t i = 0; i < h1; ++i) gw1[k * h1 + i] += point.features[k] * dz1[i];
        }
    }
    return out;
}

double mean_loss(const MLPParams& params, std::span<const SamplePoint> points) {
    if (points.empty()) throw ArgumentError("mean loss of an empty set is undefined");
    double loss = 0.0;
    for (const auto& p : points) loss += bce_loss(forward(params, p.features), p.label);
    return loss / static_cast<double>(points.size());
}

Evaluation evaluate(const MLPParams& params, std::span<const SamplePoint> points, double threshold) {
    if (points.empty()) throw ArgumentError("cannot evaluate an empty set");
    Evaluation ev;
    std::size_t hits = 0;
    for (const auto& p : points) {
        const double prob = forward(params, p.features);
        ev.loss += bce_loss(prob, p.label);
        const std::uint8_t pred = prob >= threshold ? 1 : 0;
        ev.predictions.push_back(pred);
        hits += pred == p.label ? 1 : 0;
    }
    ev.loss /= static_cast<double>(points.size());
    ev.accuracy = static_cast<double>(hits) / static_cast<double>(points.size());
    return ev;
}

TrainResult train(const Dataset& dataset, const MLPConfig& mlp, const TrainConfig& cfg) {
    mlp.validate();
    cfg.validate();
    if (dataset.train.empty() || dataset.val.empty()) throw ArgumentError("train and val splits must be non-empty");
    for (const auto* split : {&dataset.train, &dataset.val}) {
        for (const auto& p : *split) {
            if (p.features.size() != mlp.input_dim) throw ArgumentError("sample dimensionality differs from input_dim");
        }
    }

    MLPParams params = init_params(mlp, derive_seed(cfg.seed, 1));
    Xoshiro256 rng(derive_seed(cfg.seed, 2));
    const std::size_t n_params = params.size();
    std::vector<double> m(n_params, 0.0);
    std::vector<double> v(n_params, 0.0);
    std::uint64_t step = 0;

    const std::size_t h2 = mlp.hidden[1];
    const double keep_prob = 1.0 - mlp.dropout_rate;
    std::vector<std::size_t> order(dataset.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<SamplePoint> batch;
    std::vector<std::uint8_t> masks;

    TrainResult result{params, {}};
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(std::span(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(dataset.train[order[i]]);
            masks.resize(batch.size() * h2);
            for (auto& k : masks) k = rng.uniform01() < keep_prob ? 1 : 0;

            const GradientResult g = gradients(params, batch, masks);
            epoch_loss += g.loss * static_cast<double>(batch.size());

            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            auto theta = params.data();
            const auto grad = g.grad.data();
            for (std::size_t i = 0; i < n_params; ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                theta[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
            }
        }

        const Evaluation val = evaluate(params, dataset.val);
        result.history.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
        result.history.val_loss.push_back(val.loss);
        result.history.val_acc.push_back(val.accuracy);

        if (val.loss < best_loss) {
            best_loss = val.loss;
            result.params = params;
            result.history.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            result.history.stopped_early = true;
            break;
        }
    }
    return result;
}

WaterMask predict_map(const MLPParams& params, const Scene& scene, std::span<const BandId> bands, double threshold,
                      std::size_t jobs) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ArgumentError("threshold must lie in (0, 1)");
    if (bands.size() != params.config().input_dim) {
        throw ArgumentError("band list length differs from the network input dimension");
    }
    std::vector<const BandGrid*> grids;
    for (BandId b : bands) grids.push_back(&scene.band(b));

    const int w = scene.width();
    const int h = scene.height();
    WaterMask mask(w, h);
    constexpr int kRowsPerJob = 16;
    const auto n_jobs = static_cast<std::size_t>((h + kRowsPerJob - 1) / kRowsPerJob);
    parallel_for(n_jobs, jobs, [&](std::size_t job) {
        Trace t;
        std::vector<double> x(grids.size());
        const int y0 = static_cast<int>(job) * kRowsPerJob;
        const int y1 = std::min(h, y0 + kRowsPerJob);
        for (int y = y0; y < y1; ++y) {
            for (int px = 0; px < w; ++px) {
                const std::size_t idx = static_cast<std::size_t>(y) * w + px;
                if (scene.scl && scene.scl->values[idx] == 0) {
                    mask.labels[idx] = mask_label::kInvalid;
                    continue;
                }
                for (std::size_t b = 0; b < grids.size(); ++b) x[b] = reflectance(grids[b]->values[idx]);
                run_forward(params, x, {}, t);
                mask.labels[idx] = clamp_prob(t.raw_p) >= threshold ? mask_label::kWater : mask_label::kNonWater;
            }
        }
    });
    return mask;
}

void save_weights(const MLPParams& params, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    io::Writer w(out);
    const auto& cfg = params.config();
    w.magic("BNET");
    w.put<std::uint32_t>(kWeightVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg.input_dim));
    w.put<std::uint32_t>(2);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg.hidden[0]));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg.hidden[1]));
    for (double v : params.data()) w.put(v);
    if (!out) throw FormatError("failed writing " + path.string());
}

MLPParams load_weights(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    io::Reader r(in);
    r.expect_magic("BNET");
    const auto version = r.get<std::uint32_t>();
    if (version != kWeightVersion) throw FormatError("unsupported weight file version " + std::to_string(version));
    MLPConfig cfg;
    cfg.input_dim = r.get<std::uint32_t>();
    const auto layers = r.get<std::uint32_t>();
    if (layers != 2) throw FormatError("weight file declares " + std::to_string(layers) + " hidden layers, expected 2");
    cfg.hidden[0] = r.get<std::uint32_t>();
    cfg.hidden[1] = r.get<std::uint32_t>();
    if (cfg.input_dim < 1 || cfg.input_dim > 64 || cfg.hidden[0] < 1 || cfg.hidden[0] > 4096 || cfg.hidden[1] < 1 ||
        cfg.hidden[1] > 4096) {
        throw CorruptDataError("implausible shape in weight file");
    }
    MLPParams params(cfg);
    for (auto& v : params.data()) {
        v = r.get<double>();
        if (!std::isfinite(v)) throw CorruptDataError("non-finite parameter in weight file");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw CorruptDataError("trailing bytes in weight file");
    return params;
}

void write_history_csv(const TrainHistory& history, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "epoch,train_loss,val_loss,val_acc\n";
    char buf[128];
    for (std::size_t e = 0; e < history.epochs(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.8f,%.8f,%.6f\n", e + 1, history.train_loss[e], history.val_loss[e],
                      history.val_acc[e]);
        out << buf;
    }
}

TrainHistory read_history_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "epoch,train_loss,val_loss,val_acc") {
        throw FormatError(path.string() + ": unexpected history header");
    }
    TrainHistory h;
    double best = std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> cells;
        try {
            while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
        } catch (const std::logic_error&) {
            throw CorruptDataError(path.string() + ": unparsable history row");
        }
        if (cells.size() != 4) throw CorruptDataError(path.string() + ": history row needs 4 columns");
        h.train_loss.push_back(cells[1]);
        h.val_loss.push_back(cells[2]);
        h.val_acc.push_back(cells[3]);
        if (cells[2] < best) {
            best = cells[2];
            h.best_epoch = h.val_loss.size() - 1;
        }
    }
    return h;
}

}  // namespace bandrank::bandnet
