#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bandrank/classifiers.hpp"
#include "bandrank/metrics.hpp"
#include "bandrank/raster.hpp"
#include "bandrank/sampling.hpp"

namespace bandrank {

struct RankingOptions {
    std::size_t n_per_class = 2000;
    SplitSpec split;  // split.seed is the master seed for sampling and every cell
    std::size_t jobs = 1;
    std::optional<std::filesystem::path> model_dir;  // when set, each fitted model is saved here
};

struct CellOutcome {
    double miou100 = 0.0;  // NaN when the fit failed
    std::string error;     // reason for a failed cell
    double seconds = 0.0;
    bool class_absent = false;
};

struct RankingResult {
    std::vector<BandId> bands;
    std::vector<ClassifierSpec> algorithms;
    std::vector<std::vector<double>> miou;  // [band][algorithm], 0-100, NaN for failed cells
    std::vector<std::vector<std::string>> errors;
    std::vector<std::vector<double>> seconds;
    std::vector<double> row_percents;
    std::vector<double> col_percents;
    std::uint64_t seed = 0;
    std::size_t train_size = 0;
    std::size_t val_size = 0;
    std::string started_at;
    std::string finished_at;
};

/// Seed for the (band, algorithm) cell; depends on the band's and variant's
/// fixed ordinals, not on their position in the requested lists.
std::uint64_t cell_seed(std::uint64_t master, BandId band, Variant variant);

/// Fits one algorithm on one feature column of the dataset and scores mIoU on
/// the validation split. Degenerate fits are reported in `error`, not thrown.
CellOutcome rank_cell(const Dataset& dataset, std::size_t column, const ClassifierSpec& spec,
                      const std::optional<std::filesystem::path>& model_path = std::nullopt);

/// Every band x algorithm cell on one shared seeded sample (same pixels for
/// every band). Output does not depend on options.jobs.
RankingResult rank_bands(const Scene& scene, const WaterMask& mask, const std::vector<BandId>& bands,
                         const std::vector<ClassifierSpec>& algorithms, const RankingOptions& options);

struct CellIndex {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
};

/// Argmax over non-NaN cells, ties to the earlier row then the earlier column.
/// Throws ArgumentError when no cell holds a value.
CellIndex best_cell(const std::vector<std::vector<double>>& matrix);
std::pair<BandId, Variant> best_cell(const RankingResult& result);

std::vector<std::string> band_names(const std::vector<BandId>& bands);
std::vector<std::string> algorithm_names(const std::vector<ClassifierSpec>& algorithms);

}  // namespace bandrank
