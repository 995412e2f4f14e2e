#include "bandrank/ranking.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>

#include "bandrank/errors.hpp"
#include "bandrank/parallel.hpp"
#include "bandrank/rng.hpp"

namespace bandrank {

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t master, BandId band, Variant variant) {
    return derive_seed(master, static_cast<std::uint64_t>(band), static_cast<std::uint64_t>(variant));
}

CellOutcome rank_cell(const Dataset& dataset, std::size_t column, const ClassifierSpec& spec,
                      const std::optional<std::filesystem::path>& model_path) {
    CellOutcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
        const auto train = select_feature(dataset.train, column);
        const auto val = select_feature(dataset.val, column);
        const FittedModel model = fit(spec, train);
        const auto preds = model.predict_all(val);
        const auto truth = labels_of(val);
        bool absent = false;
        out.miou100 = 100.0 * miou(confusion(preds, truth), absent);
        out.class_absent = absent;
        if (model_path) save_model(model, *model_path);
    } catch (const DegenerateDataError& e) {
        out.miou100 = std::numeric_limits<double>::quiet_NaN();
        out.error = e.what();
    } catch (const DataError& e) {
        out.miou100 = std::numeric_limits<double>::quiet_NaN();
        out.error = e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

RankingResult rank_bands(const Scene& scene, const WaterMask& mask, const std::vector<BandId>& bands,
                         const std::vector<ClassifierSpec>& algorithms, const RankingOptions& options) {
    if (bands.empty() || algorithms.empty()) throw ArgumentError("ranking needs at least one band and algorithm");
    for (BandId b : bands) {
        if (!scene.has_band(b)) throw ArgumentError("scene has no band " + std::string(band_name(b)));
    }
    for (const auto& a : algorithms) a.validate();

    RankingResult result;
    result.started_at = utc_now();
    result.bands = bands;
    result.algorithms = algorithms;
    result.seed = options.split.seed;

    const auto points = balanced_sample(scene, bands, mask, options.n_per_class, options.split.seed);
    Dataset dataset = split(points, options.split);
    dataset.bands = bands;
    result.train_size = dataset.train.size();
    result.val_size = dataset.val.size();

    const std::size_t n_algos = algorithms.size();
    const std::size_t n_cells = bands.size() * n_algos;
    std::vector<CellOutcome> cells(n_cells);
    if (options.model_dir) std::filesystem::create_directories(*options.model_dir);

    parallel_for(n_cells, options.jobs, [&](std::size_t cell) {
        const std::size_t b = cell / n_algos;
        const std::size_t a = cell % n_algos;
        ClassifierSpec spec = algorithms[a];
        spec.seed = cell_seed(options.split.seed, bands[b], spec.variant);
        std::optional<std::filesystem::path> model_path;
        if (options.model_dir) {
            model_path = *options.model_dir / (std::string(band_name(bands[b])) + "_" +
                                               std::string(variant_name(spec.variant)) + ".brnk");
        }
        cells[cell] = rank_cell(dataset, b, spec, model_path);
    });

    result.miou.assign(bands.size(), std::vector<double>(n_algos));
    result.errors.assign(bands.size(), std::vector<std::string>(n_algos));
    result.seconds.assign(bands.size(), std::vector<double>(n_algos));
    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        const std::size_t b = cell / n_algos;
        const std::size_t a = cell % n_algos;
        result.miou[b][a] = cells[cell].miou100;
        result.errors[b][a] = cells[cell].error;
        result.seconds[b][a] = cells[cell].seconds;
    }
    const PercentScores pct = percent_scores(result.miou);
    result.row_percents = pct.rows;
    result.col_percents = pct.cols;
    result.finished_at = utc_now();
    return result;
}

CellIndex best_cell(const std::vector<std::vector<double>>& matrix) {
    bool found = false;
    CellIndex best;
    for (std::size_t r = 0; r < matrix.size(); ++r) {
        for (std::size_t c = 0; c < matrix[r].size(); ++c) {
            const double v = matrix[r][c];
            if (std::isnan(v)) continue;
            if (!found || v > best.value) {
                best = {r, c, v};
                found = true;
            }
        }
    }
    if (!found) throw ArgumentError("no filled cell to choose from");
    return best;
}

std::pair<BandId, Variant> best_cell(const RankingResult& result) {
    const CellIndex idx = best_cell(result.miou);
    return {result.bands[idx.row], result.algorithms[idx.col].variant};
}

std::vector<std::string> band_names(const std::vector<BandId>& bands) {
    std::vector<std::string> out;
    for (BandId b : bands) out.emplace_back(band_name(b));
    return out;
}

std::vector<std::string> algorithm_names(const std::vector<ClassifierSpec>& algorithms) {
    std::vector<std::string> out;
    for (const auto& a : algorithms) out.emplace_back(variant_name(a.variant));
    return out;
}

}  // namespace bandrank
