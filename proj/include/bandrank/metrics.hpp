#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bandrank {

/// counts[actual][predicted]; class 0 = non-water, class 1 = water.
struct ConfusionMatrix {
    std::array<std::array<std::uint64_t, 2>, 2> counts{};

    std::uint64_t total() const noexcept { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
    std::uint64_t row_sum(int cls) const noexcept;
    std::uint64_t col_sum(int cls) const noexcept;

    /// Entrywise sum; merging shard matrices is order-independent.
    ConfusionMatrix& operator+=(const ConfusionMatrix& other) noexcept;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Pairs where either label is 255 (invalid) are skipped. Throws ArgumentError
/// on length mismatch or labels outside {0, 1, 255}.
ConfusionMatrix confusion(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> truth);

struct IoU {
    double value = 0.0;
    bool class_absent = false;  // class never occurs in truth or predictions; value is 1.0
};

/// TP_i / (row_i + col_i - TP_i).
IoU iou(const ConfusionMatrix& cm, int class_index);

/// Mean of the two per-class IoUs, in [0, 1].
double miou(const ConfusionMatrix& cm);
/// Same, also reporting whether either class was absent.
double miou(const ConfusionMatrix& cm, bool& any_class_absent);

/// matches / total; throws ArgumentError for empty or mismatched input.
double binary_accuracy(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> truth);

/// Aggregates of a band x algorithm mIoU matrix on the 0-100 scale.
///   row  = sum over the row / (100 * cells in the row)
///   col  = sum over the column / (100 * cells in the column)
/// NaN cells (failed fits) are left out of both numerator and denominator.
struct PercentScores {
    std::vector<double> rows;
    std::vector<double> cols;
};

PercentScores percent_scores(const std::vector<std::vector<double>>& matrix);

/// Half-up rounding to `digits` decimals.
double round_half_up(double value, int digits = 2);

/// Fixed two-decimal text, half-up; empty string for NaN.
std::string format_2dp(double value);

/// Ranking table CSV: header `band,<algos...>,percent`, one row per band with
/// 0-100 mIoU cells, then a trailing `percent` row of column percents.
void write_ranking_csv(const std::filesystem::path& path, const std::vector<std::string>& band_names,
                       const std::vector<std::string>& algo_names, const std::vector<std::vector<double>>& miou100);

struct RankingTable {
    std::vector<std::string> bands;
    std::vector<std::string> algorithms;
    std::vector<std::vector<double>> miou;  // NaN for empty cells
    std::vector<double> row_percents;
    std::vector<double> col_percents;
};

RankingTable read_ranking_csv(const std::filesystem::path& path);

}  // namespace bandrank
