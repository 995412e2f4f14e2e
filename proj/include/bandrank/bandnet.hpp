#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bandrank/raster.hpp"
#include "bandrank/sampling.hpp"

namespace bandrank::bandnet {

/// Two ReLU dense layers, inverted dropout, sigmoid head. The hidden width of
/// 32 reproduces the published parameter counts (1153 / 1185 / 1217 for one,
/// two and three input bands).
struct MLPConfig {
    std::size_t input_dim = 1;
    std::array<std::size_t, 2> hidden{32, 32};
    double dropout_rate = 0.4;

    void validate() const;
    friend bool operator==(const MLPConfig&, const MLPConfig&) = default;
};

/// All trainable parameters in one buffer, laid out W1, b1, W2, b2, W3, b3.
/// Weight matrices are row-major [fan_in][fan_out].
class MLPParams {
public:
    MLPParams() = default;
    explicit MLPParams(const MLPConfig& config);  // zero-filled

    const MLPConfig& config() const noexcept { return config_; }
    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> w1() noexcept { return block(0); }
    std::span<double> b1() noexcept { return block(1); }
    std::span<double> w2() noexcept { return block(2); }
    std::span<double> b2() noexcept { return block(3); }
    std::span<double> w3() noexcept { return block(4); }
    std::span<double> b3() noexcept { return block(5); }
    std::span<const double> w1() const noexcept { return block(0); }
    std::span<const double> b1() const noexcept { return block(1); }
    std::span<const double> w2() const noexcept { return block(2); }
    std::span<const double> b2() const noexcept { return block(3); }
    std::span<const double> w3() const noexcept { return block(4); }
    std::span<const double> b3() const noexcept { return block(5); }

    friend bool operator==(const MLPParams&, const MLPParams&) = default;

private:
    std::span<double> block(std::size_t i) noexcept { return {data_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]}; }
    std::span<const double> block(std::size_t i) const noexcept {
        return {data_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }

    MLPConfig config_;
    std::array<std::size_t, 7> offsets_{};
    std::vector<double> data_;
};

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 200;
    std::size_t patience = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_acc;
    std::size_t best_epoch = 0;  // 0-based index into the vectors
    bool stopped_early = false;

    std::size_t epochs() const noexcept { return val_loss.size(); }
};

inline constexpr double kProbClamp = 1e-7;

std::size_t param_count(const MLPConfig& config);

/// Glorot-uniform weights, zero biases.
MLPParams init_params(const MLPConfig& config, std::uint64_t seed);

/// Inference-mode forward pass (no dropout). Returns p clamped to [1e-7, 1 - 1e-7].
/// Throws DataError for non-finite input, ArgumentError for a wrong length.
double forward(const MLPParams& params, std::span<const double> x);

/// Training-mode forward pass with a dropout keep-mask (one 0/1 entry per unit
/// of the second hidden layer); kept activations are scaled by 1 / (1 - rate).
double forward(const MLPParams& params, std::span<const double> x, std::span<const std::uint8_t> keep);

/// Second hidden layer activations before dropout (inference mode).
std::vector<double> hidden_activations(const MLPParams& params, std::span<const double> x);

/// -[y ln p + (1 - y) ln(1 - p)] with p clamped to [1e-7, 1 - 1e-7].
double bce_loss(double p, int y);

struct GradientResult {
    MLPParams grad;
    double loss = 0.0;  // mean BCE over the batch
};

/// Exact gradient of the mean batch BCE. `keep_masks` holds batch*hidden[1]
/// entries (row per sample) or is empty for no dropout.
GradientResult gradients(const MLPParams& params, std::span<const SamplePoint> batch,
                         std::span<const std::uint8_t> keep_masks = {});

/// Mean BCE of the whole set in inference mode.
double mean_loss(const MLPParams& params, std::span<const SamplePoint> points);

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<std::uint8_t> predictions;
};

Evaluation evaluate(const MLPParams& params, std::span<const SamplePoint> points, double threshold = 0.5);

struct TrainResult {
    MLPParams params;  // weights of the best validation epoch
    TrainHistory history;
};

/// Adam on mini-batches, monitoring validation loss each epoch. Stops after
/// `patience` epochs without a strict improvement, or at max_epochs, and
/// returns the best epoch's weights.
TrainResult train(const Dataset& dataset, const MLPConfig& mlp, const TrainConfig& cfg);

/// Per-pixel water mask: probability >= threshold is water; pixels whose SCL
/// code is 0 are invalid (255). Rows are split across `jobs` workers; the
/// result does not depend on the worker count.
WaterMask predict_map(const MLPParams& params, const Scene& scene, std::span<const BandId> bands,
                      double threshold = 0.5, std::size_t jobs = 1);

// Weight file: "BNET", u32 version, u32 input dim, u32 hidden layer count,
// u32 widths..., then float64 parameters in W1 b1 W2 b2 W3 b3 order; little-endian.
void save_weights(const MLPParams& params, const std::filesystem::path& path);
MLPParams load_weights(const std::filesystem::path& path);

/// CSV `epoch,train_loss,val_loss,val_acc`, epochs numbered from 1.
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);
TrainHistory read_history_csv(const std::filesystem::path& path);

}  // namespace bandrank::bandnet
