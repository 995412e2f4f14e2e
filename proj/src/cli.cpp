#include "bandrank/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bandrank/bandnet.hpp"
#include "bandrank/classifiers.hpp"
#include "bandrank/errors.hpp"
#include "bandrank/metrics.hpp"
#include "bandrank/parallel.hpp"
#include "bandrank/ranking.hpp"
#include "bandrank/raster.hpp"
#include "bandrank/sampling.hpp"

namespace bandrank::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string default_output_dir() {
    const char* env = std::getenv(kOutputDirEnv);
    return (env != nullptr && *env != '\0') ? std::string(env) : std::string("out");
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const std::string& what) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw ArgumentError(what + ": not a number: '" + item + "'");
        values.push_back(v);
    }
    if (values.size() != expected) {
        throw ArgumentError(what + ": expected " + std::to_string(expected) + " comma-separated values");
    }
    return values;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw ArgumentError("empty entry in list '" + text + "'");
        items.push_back(item);
    }
    if (items.empty()) throw ArgumentError("empty list");
    return items;
}

json band_json(const std::vector<BandId>& bands) {
    json out = json::array();
    for (BandId b : bands) out.push_back(std::string(band_name(b)));
    return out;
}

void write_json(const json& doc, const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << doc.dump(2) << '\n';
}

/// Options shared by the scene-consuming subcommands.
struct SceneOptions {
    std::string window;
    std::string window_geo;
    int water_code = kDefaultWaterCode;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--window", window, "Pixel window x0,y0,w,h");
        cmd.add_option("--window-geo", window_geo, "Geographic window N,W,S,E in scene coordinates");
        cmd.add_option("--water-code", water_code, "SCL code treated as water")->capture_default_str();
    }

    std::optional<PixelWindow> resolve(const Scene& scene) const {
        if (!window.empty() && !window_geo.empty()) throw ArgumentError("--window and --window-geo are exclusive");
        if (!window.empty()) {
            const auto v = parse_numbers(window, 4, "--window");
            for (double x : v) {
                if (x != std::floor(x)) throw ArgumentError("--window: values must be integers");
            }
            return PixelWindow{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
                               static_cast<int>(v[3])};
        }
        if (!window_geo.empty()) {
            const auto v = parse_numbers(window_geo, 4, "--window-geo");
            return geo_window(scene, v[0], v[1], v[2], v[3]);
        }
        return std::nullopt;
    }

    json describe(const std::optional<PixelWindow>& w) const {
        json out;
        out["water_code"] = water_code;
        if (w) {
            out["window"] = {{"x0", w->x0}, {"y0", w->y0}, {"w", w->w}, {"h", w->h}};
        } else {
            out["window"] = nullptr;
        }
        if (!window_geo.empty()) out["window_geo"] = window_geo;
        return out;
    }
};

struct LoadedScene {
    Scene scene;
    std::optional<PixelWindow> window;
};

LoadedScene load_windowed(const std::string& dir, const SceneOptions& opts) {
    LoadedScene out;
    Scene full = load_scene(dir);
    out.window = opts.resolve(full);
    out.scene = out.window ? subset(full, *out.window) : std::move(full);
    return out;
}

/// Sampling options shared by sample, rank and train.
struct SamplingOptions {
    std::uint64_t seed = 42;
    std::size_t n_per_class = 2000;
    std::string fractions = "0.7,0.15,0.15";

    void add_to(CLI::App& cmd) {
        cmd.add_option("--seed", seed, "Master seed")->capture_default_str();
        cmd.add_option("--n-per-class", n_per_class, "Pixels drawn per class")->capture_default_str();
        cmd.add_option("--fractions", fractions, "Train,val,test fractions")->capture_default_str();
    }

    SplitSpec split_spec() const {
        const auto f = parse_numbers(fractions, 3, "--fractions");
        SplitSpec spec;
        spec.seed = seed;
        spec.fractions = {f[0], f[1], f[2]};
        spec.validate();
        return spec;
    }

    json describe(const SplitSpec& spec) const {
        return {{"seed", seed},
                {"n_per_class", n_per_class},
                {"fractions", {spec.fractions[0], spec.fractions[1], spec.fractions[2]}}};
    }
};

json manifest_base(const std::string& command, const std::vector<std::string>& args) {
    json m;
    m["command"] = command;
    m["argv"] = args;
    m["started_at"] = utc_now();
    return m;
}

fs::path prepare_out(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Pixel-wise classification with a fitted classical model; SCL 0 is invalid.
WaterMask classify_map(const FittedModel& model, const Scene& scene, const std::vector<BandId>& bands,
                       std::size_t jobs) {
    if (bands.size() != model.dim()) {
        throw ArgumentError("model expects " + std::to_string(model.dim()) + " bands, got " +
                            std::to_string(bands.size()));
    }
    std::vector<const BandGrid*> grids;
    for (BandId b : bands) grids.push_back(&scene.band(b));
    const int w = scene.width();
    const int h = scene.height();
    WaterMask mask(w, h);
    parallel_for(static_cast<std::size_t>(h), jobs, [&](std::size_t row) {
        const int y = static_cast<int>(row);
        std::vector<double> x(bands.size());
        for (int c = 0; c < w; ++c) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + c;
            if (scene.scl && scene.scl->values[idx] == 0) {
                mask.labels[idx] = mask_label::kInvalid;
                continue;
            }
            for (std::size_t k = 0; k < grids.size(); ++k) x[k] = reflectance(grids[k]->values[idx]);
            mask.labels[idx] = model.predict(x) == 1 ? mask_label::kWater : mask_label::kNonWater;
        }
    });
    return mask;
}

/// Bands a weight/model file was trained on: explicit flag, else the training
/// run's manifest next to the file, else a `<BAND>_<ALGO>.brnk` file name.
std::vector<BandId> resolve_model_bands(const std::string& flag, const fs::path& file) {
    if (!flag.empty()) return parse_band_list(flag);
    for (const fs::path& dir : {file.parent_path(), file.parent_path().parent_path()}) {
        const fs::path manifest = (dir.empty() ? fs::path(".") : dir) / "manifest.json";
        if (!fs::exists(manifest)) continue;
        std::ifstream is(manifest);
        const json m = json::parse(is, nullptr, false);
        if (m.is_discarded() || !m.contains("bands") || m.value("command", "") != "train") continue;
        std::vector<BandId> bands;
        for (const auto& b : m["bands"]) bands.push_back(parse_band(b.get<std::string>()));
        return bands;
    }
    const std::string stem = file.stem().string();
    if (const auto us = stem.find('_'); file.extension() == ".brnk" && us != std::string::npos) {
        return {parse_band(stem.substr(0, us))};
    }
    throw ArgumentError("cannot determine the model's bands; pass --bands");
}

/// Either a BandNet weight file or a classical model container.
struct Predictor {
    std::optional<bandnet::MLPParams> mlp;
    std::optional<FittedModel> model;
    std::vector<BandId> bands;
    double threshold = 0.5;

    static Predictor load(const std::string& weights, const std::string& model_path, const std::string& band_flag,
                          double threshold) {
        if (weights.empty() == model_path.empty()) throw ArgumentError("exactly one of --weights or --model is required");
        Predictor p;
        p.threshold = threshold;
        if (!weights.empty()) {
            p.mlp = bandnet::load_weights(weights);
            p.bands = resolve_model_bands(band_flag, weights);
            if (p.bands.size() != p.mlp->config().input_dim) {
                throw ArgumentError("weights expect " + std::to_string(p.mlp->config().input_dim) + " bands, got " +
                                    std::to_string(p.bands.size()));
            }
        } else {
            p.model = load_model(model_path);
            p.bands = resolve_model_bands(band_flag, model_path);
        }
        return p;
    }

    WaterMask map(const Scene& scene, std::size_t jobs) const {
        if (mlp) return bandnet::predict_map(*mlp, scene, bands, threshold, jobs);
        return classify_map(*model, scene, bands, jobs);
    }
};

/// mIoU of a predicted mask against the scene's SCL-derived reference.
std::optional<double> reference_miou(const WaterMask& pred, const Scene& scene, int water_code) {
    if (!scene.scl) return std::nullopt;
    const WaterMask truth = scene_mask(scene, water_code);
    const ConfusionMatrix cm = confusion(pred.labels, truth.labels);
    if (cm.total() == 0) return std::nullopt;
    return miou(cm);
}

// ---------------------------------------------------------------- subcommands

int cmd_ingest(const std::string& scene_dir, const SceneOptions& so, const std::string& out_dir,
               const std::vector<std::string>& args, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    json m = manifest_base("ingest", args);
    LoadedScene ls = load_windowed(scene_dir, so);
    ls.scene.validate();
    const fs::path dir = prepare_out(out_dir);
    save_scene(ls.scene, dir / "scene");
    json stats;
    if (ls.scene.scl) {
        const WaterMask mask = scene_mask(ls.scene, so.water_code);
        write_mask_pgm(mask, dir / "mask.pgm");
        stats = {{"water", mask.count(mask_label::kWater)},
                 {"non_water", mask.count(mask_label::kNonWater)},
                 {"invalid", mask.count(mask_label::kInvalid)}};
    }
    m["scene"] = scene_dir;
    m["tile_id"] = ls.scene.tile_id;
    m["date"] = ls.scene.date;
    m["width"] = ls.scene.width();
    m["height"] = ls.scene.height();
    m["scene_options"] = so.describe(ls.window);
    m["pixels"] = stats;
    m["seconds"] = seconds_since(t0);
    write_json(m, dir / "manifest.json");
    out << "ingested " << ls.scene.tile_id << " " << ls.scene.width() << "x" << ls.scene.height() << " -> "
        << (dir / "scene").string() << '\n';
    return kExitOk;
}

int cmd_tile(const std::string& scene_dir, const SceneOptions& so, int tile_size, bool require_water,
             const std::string& rotations, const std::string& out_dir, const std::vector<std::string>& args,
             std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    json m = manifest_base("tile", args);
    std::vector<int> turns;
    for (const std::string& r : split_list(rotations)) {
        const auto v = parse_numbers(r, 1, "--rotations");
        if (v[0] != std::floor(v[0]) || v[0] < 0 || v[0] > 3) throw ArgumentError("--rotations: values in 0..3");
        turns.push_back(static_cast<int>(v[0]));
    }
    LoadedScene ls = load_windowed(scene_dir, so);
    const std::vector<Scene> tiles = tile(ls.scene, tile_size, require_water, so.water_code);
    const fs::path dir = prepare_out(out_dir);
    json listed = json::array();
    for (const Scene& t : tiles) {
        for (int k : turns) {
            const Scene r = rotate(t, k);
            const std::string name = k == 0 ? r.tile_id : r.tile_id + "_rot" + std::to_string(k * 90);
            const fs::path tdir = dir / "tiles" / name;
            save_scene(r, tdir);
            json entry = {{"id", name}, {"rotation_deg", k * 90}};
            if (r.scl) {
                const WaterMask mask = scene_mask(r, so.water_code);
                write_mask_pgm(mask, tdir / "mask.pgm");
                entry["water"] = mask.count(mask_label::kWater);
            }
            listed.push_back(entry);
        }
    }
    m["scene"] = scene_dir;
    m["scene_options"] = so.describe(ls.window);
    m["tile_size"] = tile_size;
    m["require_water"] = require_water;
    m["rotations"] = turns;
    m["tiles"] = listed;
    m["seconds"] = seconds_since(t0);
    write_json(m, dir / "manifest.json");
    out << "wrote " << listed.size() << " tiles to " << (dir / "tiles").string() << '\n';
    return kExitOk;
}

int cmd_sample(const std::string& scene_dir, const SceneOptions& so, const SamplingOptions& sa,
               const std::string& band_flag, const std::string& out_dir, const std::vector<std::string>& args,
               std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    json m = manifest_base("sample", args);
    const std::vector<BandId> bands = parse_band_list(band_flag);
    const SplitSpec spec = sa.split_spec();
    LoadedScene ls = load_windowed(scene_dir, so);
    const WaterMask mask = scene_mask(ls.scene, so.water_code);
    const auto points = balanced_sample(ls.scene, bands, mask, sa.n_per_class, sa.seed);
    Dataset ds = split(points, spec);
    ds.bands = bands;
    const fs::path dir = prepare_out(out_dir);
    write_dataset(ds, dir);
    m["scene"] = scene_dir;
    m["scene_options"] = so.describe(ls.window);
    m["bands"] = band_json(bands);
    m["sampling"] = sa.describe(spec);
    m["sizes"] = {{"train", ds.train.size()}, {"val", ds.val.size()}, {"test", ds.test.size()}};
    m["seconds"] = seconds_since(t0);
    write_json(m, dir / "manifest.json");
    out << "sampled " << points.size() << " points (train " << ds.train.size() << ", val " << ds.val.size()
        << ", test " << ds.test.size() << ")\n";
    return kExitOk;
}

int cmd_rank(const std::string& scene_dir, const SceneOptions& so, const SamplingOptions& sa,
             const std::string& band_flag, const std::string& algo_flag, std::size_t jobs, bool save_models,
             const std::string& out_dir, const std::vector<std::string>& args, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    json m = manifest_base("rank", args);
    const std::vector<BandId> bands = parse_band_list(band_flag);
    std::vector<ClassifierSpec> algos;
    for (Variant v : parse_variant_list(algo_flag)) algos.push_back(ClassifierSpec::make(v));
    RankingOptions opts;
    opts.n_per_class = sa.n_per_class;
    opts.split = sa.split_spec();
    opts.jobs = jobs;
    LoadedScene ls = load_windowed(scene_dir, so);
    const WaterMask mask = scene_mask(ls.scene, so.water_code);
    const fs::path dir = prepare_out(out_dir);
    if (save_models) opts.model_dir = dir / "models";
    const RankingResult result = rank_bands(ls.scene, mask, bands, algos, opts);

    const auto bnames = band_names(result.bands);
    const auto anames = algorithm_names(result.algorithms);
    write_ranking_csv(dir / "ranking.csv", bnames, anames, result.miou);

    json cells = json::array();
    for (std::size_t b = 0; b < bnames.size(); ++b) {
        for (std::size_t a = 0; a < anames.size(); ++a) {
            json cell = {{"band", bnames[b]},
                         {"algorithm", anames[a]},
                         {"seed", cell_seed(sa.seed, result.bands[b], result.algorithms[a].variant)},
                         {"seconds", result.seconds[b][a]}};
            if (std::isnan(result.miou[b][a])) {
                cell["miou"] = nullptr;
                cell["error"] = result.errors[b][a];
            } else {
                cell["miou"] = result.miou[b][a];
            }
            cells.push_back(cell);
        }
    }
    m["scene"] = scene_dir;
    m["scene_options"] = so.describe(ls.window);
    m["bands"] = band_json(bands);
    m["algorithms"] = anames;
    m["seed"] = sa.seed;
    m["sampling"] = sa.describe(opts.split);
    m["sizes"] = {{"train", result.train_size}, {"val", result.val_size}};
    m["jobs"] = jobs;
    m["cells"] = cells;
    try {
        const CellIndex best = best_cell(result.miou);
        m["best"] = {{"band", bnames[best.row]}, {"algorithm", anames[best.col]}, {"miou", best.value}};
        out << "best cell: " << bnames[best.row] << " / " << anames[best.col] << " = " << format_2dp(best.value)
            << '\n';
    } catch (const ArgumentError&) {
        m["best"] = nullptr;
        out << "no cell produced a score\n";
    }
    if (save_models) m["models"] = (dir / "models").string();
    m["seconds"] = seconds_since(t0);
    write_json(m, dir / "manifest.json");
    out << "wrote " << (dir / "ranking.csv").string() << '\n';
    return kExitOk;
}

struct TrainFlags {
    std::size_t max_epochs = 200;
    std::size_t patience = 5;
    std::size_t batch_size = 32;
    double learning_rate = 1e-4;
    double dropout = 0.4;
};

int cmd_train(const std::string& scene_dir, const SceneOptions& so, const SamplingOptions& sa,
              const std::string& band_flag, const TrainFlags& tf, const std::string& out_dir,
              const std::vector<std::string>& args, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    json m = manifest_base("train", args);
    const std::vector<BandId> bands = parse_band_list(band_flag);
    const SplitSpec spec = sa.split_spec();

    bandnet::MLPConfig mlp;
    mlp.input_dim = bands.size();
    mlp.dropout_rate = tf.dropout;
    mlp.validate();
    bandnet::TrainConfig cfg;
    cfg.learning_rate = tf.learning_rate;
    cfg.batch_size = tf.batch_size;
    cfg.max_epochs = tf.max_epochs;
    cfg.patience = tf.patience;
    cfg.seed = sa.seed;
    cfg.validate();

    LoadedScene ls = load_windowed(scene_dir, so);
    const WaterMask mask = scene_mask(ls.scene, so.water_code);
    const auto points = balanced_sample(ls.scene, bands, mask, sa.n_per_class, sa.seed);
    Dataset ds = split(points, spec);
    ds.bands = bands;
    const bandnet::TrainResult tr = bandnet::train(ds, mlp, cfg);

    const fs::path dir = prepare_out(out_dir);
    bandnet::save_weights(tr.params, dir / "bandnet.bnet");
    bandnet::write_history_csv(tr.history, dir / "history.csv");

    const bandnet::Evaluation test = bandnet::evaluate(tr.params, ds.test);
    const auto truth = labels_of(ds.test);
    const ConfusionMatrix cm = confusion(test.predictions, truth);
    const double test_miou = miou(cm);
    const std::size_t best = tr.history.best_epoch;

    m["scene"] = scene_dir;
    m["scene_options"] = so.describe(ls.window);
    m["bands"] = band_json(bands);
    m["seed"] = sa.seed;
    m["sampling"] = sa.describe(spec);
    m["sizes"] = {{"train", ds.train.size()}, {"val", ds.val.size()}, {"test", ds.test.size()}};
    m["model"] = {{"input_dim", mlp.input_dim},
                  {"hidden", {mlp.hidden[0], mlp.hidden[1]}},
                  {"dropout", mlp.dropout_rate},
                  {"parameters", bandnet::param_count(mlp)}};
    m["training"] = {{"learning_rate", cfg.learning_rate},
                     {"batch_size", cfg.batch_size},
                     {"max_epochs", cfg.max_epochs},
                     {"patience", cfg.patience},
                     {"epochs_run", tr.history.val_loss.size()},
                     {"best_epoch", best + 1},
                     {"stopped_early", tr.history.stopped_early}};
    m["metrics"] = {{"val_loss", tr.history.val_loss.at(best)},
                    {"val_accuracy", tr.history.val_acc.at(best)},
                    {"test_loss", test.loss},
                    {"test_accuracy", test.accuracy},
                    {"test_miou", test_miou * 100.0}};
    m["seconds"] = seconds_since(t0);
    write_json(m, dir / "manifest.json");
    out << "trained BandNet on " << band_json(bands).dump() << ": best epoch " << best + 1 << ", val acc "
        << std::fixed << std::setprecision(4) << tr.history.val_acc.at(best) << ", test mIoU "
        << std::setprecision(2) << test_miou * 100.0 << '\n';
    out.unsetf(std::ios::floatfield);
    return kExitOk;
}

int cmd_infer(const Predictor& pred, const std::string& weights, const std::string& model_path,
              const std::string& scene_dir, const SceneOptions& so, std::size_t jobs, const std::string& out_dir,
              const std::vector<std::string>& args, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    json m = manifest_base("infer", args);
    LoadedScene ls = load_windowed(scene_dir, so);
    const WaterMask mask = pred.map(ls.scene, jobs);
    const fs::path dir = prepare_out(out_dir);
    write_mask_pgm(mask, dir / "mask.pgm");
    m["scene"] = scene_dir;
    m["scene_options"] = so.describe(ls.window);
    m["weights"] = weights.empty() ? json(nullptr) : json(weights);
    m["model"] = model_path.empty() ? json(nullptr) : json(model_path);
    m["bands"] = band_json(pred.bands);
    m["threshold"] = pred.threshold;
    m["jobs"] = jobs;
    m["pixels"] = {{"water", mask.count(mask_label::kWater)},
                   {"non_water", mask.count(mask_label::kNonWater)},
                   {"invalid", mask.count(mask_label::kInvalid)}};
    if (const auto ref = reference_miou(mask, ls.scene, so.water_code)) m["reference_miou"] = *ref * 100.0;
    m["seconds"] = seconds_since(t0);
    write_json(m, dir / "manifest.json");
    out << "wrote " << (dir / "mask.pgm").string() << " (" << mask.count(mask_label::kWater) << " water pixels)\n";
    return kExitOk;
}

int cmd_monitor(const Predictor& pred, const std::string& weights, const std::string& model_path,
                const std::string& scenes_flag, const SceneOptions& so, std::size_t jobs, const std::string& out_dir,
                const std::vector<std::string>& args, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    json m = manifest_base("monitor", args);
    const std::vector<std::string> scene_dirs = split_list(scenes_flag);
    if (scene_dirs.size() < 2) throw ArgumentError("--scenes needs at least two scenes");

    std::vector<WaterMask> masks;
    std::vector<std::string> labels;
    json dates = json::array();
    std::optional<PixelWindow> first_window;
    for (std::size_t i = 0; i < scene_dirs.size(); ++i) {
        LoadedScene ls = load_windowed(scene_dirs[i], so);
        if (i == 0) first_window = ls.window;
        if (!masks.empty() && (ls.scene.width() != masks[0].width || ls.scene.height() != masks[0].height)) {
            throw DataError("scene " + scene_dirs[i] + " does not match the first scene's extent");
        }
        masks.push_back(pred.map(ls.scene, jobs));
        std::string label = ls.scene.date.empty() ? std::to_string(i) : ls.scene.date;
        if (std::find(labels.begin(), labels.end(), label) != labels.end()) label += "_" + std::to_string(i);
        labels.push_back(label);
        json entry = {{"scene", scene_dirs[i]},
                      {"date", ls.scene.date},
                      {"mask", "mask_" + label + ".pgm"},
                      {"water", masks.back().count(mask_label::kWater)}};
        if (const auto ref = reference_miou(masks.back(), ls.scene, so.water_code)) {
            entry["reference_miou"] = *ref * 100.0;
        }
        dates.push_back(entry);
    }

    const fs::path dir = prepare_out(out_dir);
    for (std::size_t i = 0; i < masks.size(); ++i) write_mask_pgm(masks[i], dir / ("mask_" + labels[i] + ".pgm"));
    json changes = json::array();
    for (std::size_t i = 0; i < masks.size(); ++i) {
        for (std::size_t j = i + 1; j < masks.size(); ++j) {
            const WaterMask change = change_map(masks[i], masks[j]);
            const std::string name = "change_" + labels[i] + "_" + labels[j] + ".pgm";
            write_mask_pgm(change, dir / name);
            changes.push_back({{"from", labels[i]},
                               {"to", labels[j]},
                               {"map", name},
                               {"changed", change.count(mask_label::kWater)}});
        }
    }
    m["weights"] = weights.empty() ? json(nullptr) : json(weights);
    m["model"] = model_path.empty() ? json(nullptr) : json(model_path);
    m["bands"] = band_json(pred.bands);
    m["threshold"] = pred.threshold;
    m["scene_options"] = so.describe(first_window);
    m["jobs"] = jobs;
    m["dates"] = dates;
    m["changes"] = changes;
    m["seconds"] = seconds_since(t0);
    write_json(m, dir / "manifest.json");
    out << "wrote " << masks.size() << " masks and " << changes.size() << " change maps to " << dir.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- report

std::vector<std::vector<std::string>> read_csv_cells(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

void print_aligned(const std::vector<std::vector<std::string>>& rows, std::ostream& out) {
    std::vector<std::size_t> widths;
    for (const auto& r : rows) {
        if (widths.size() < r.size()) widths.resize(r.size(), 0);
        for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
    }
    for (std::size_t n = 0; n < rows.size(); ++n) {
        const auto& r = rows[n];
        std::string line;
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i > 0) line += "  ";
            const std::string pad(widths[i] - r[i].size(), ' ');
            line += i == 0 ? r[i] + pad : pad + r[i];
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << '\n';
        if (n == 0) {
            std::size_t total = 0;
            for (std::size_t w : widths) total += w;
            out << std::string(total + 2 * (widths.size() - 1), '-') << '\n';
        }
    }
}

int cmd_report(const std::string& run_dir, std::ostream& out) {
    const fs::path dir(run_dir);
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw DataError("no manifest.json in " + run_dir);
    std::ifstream is(manifest_path);
    const json m = json::parse(is, nullptr, false);
    if (m.is_discarded() || !m.is_object()) throw FormatError("malformed manifest " + manifest_path.string());
    const std::string command = m.value("command", "");
    out << "run: " << command << " (" << run_dir << ")\n";
    if (m.contains("seed")) out << "seed: " << m["seed"].dump() << '\n';

    bool reported = false;
    if (fs::exists(dir / "ranking.csv")) {
        const auto rows = read_csv_cells(dir / "ranking.csv");
        out << '\n';
        print_aligned(rows, out);
        const RankingTable table = read_ranking_csv(dir / "ranking.csv");
        try {
            const CellIndex best = best_cell(table.miou);
            out << "\nbest cell: " << table.bands[best.row] << " / " << table.algorithms[best.col] << " = "
                << rows.at(best.row + 1).at(best.col + 1) << '\n';
        } catch (const ArgumentError&) {
            out << "\nbest cell: none\n";
        }
        reported = true;
    }
    if (fs::exists(dir / "history.csv")) {
        const bandnet::TrainHistory h = bandnet::read_history_csv(dir / "history.csv");
        const auto rows = read_csv_cells(dir / "history.csv");
        if (h.val_loss.empty()) throw DataError("empty history.csv");
        const auto& best_row = rows.at(h.best_epoch + 1);
        out << "\nBandNet\n";
        out << "  epochs run:   " << h.val_loss.size() << '\n';
        out << "  best epoch:   " << h.best_epoch + 1 << '\n';
        out << "  val loss:     " << best_row.at(2) << '\n';
        out << "  val accuracy: " << best_row.at(3) << '\n';
        if (m.contains("metrics")) {
            const json& mt = m["metrics"];
            if (mt.contains("test_accuracy")) {
                out << "  test accuracy: " << std::fixed << std::setprecision(4) << mt["test_accuracy"].get<double>()
                    << '\n';
            }
            if (mt.contains("test_miou")) {
                out << "  test mIoU:     " << std::fixed << std::setprecision(2) << mt["test_miou"].get<double>()
                    << '\n';
            }
            out.unsetf(std::ios::floatfield);
        }
        reported = true;
    }
    if (!reported) {
        if (m.contains("pixels")) out << "pixels: " << m["pixels"].dump() << '\n';
        if (m.contains("sizes")) out << "sizes: " << m["sizes"].dump() << '\n';
        if (m.contains("changes")) {
            for (const auto& c : m["changes"]) {
                out << "change " << c.value("from", "") << " -> " << c.value("to", "") << ": "
                    << c.value("changed", 0) << " pixels\n";
            }
        }
        if (m.contains("tiles")) out << "tiles: " << m["tiles"].size() << '\n';
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Per-pixel water segmentation: band ranking and BandNet", "bandrank"};
    app.require_subcommand(1);

    const std::string out_default = default_output_dir();
    std::string out_dir = out_default;
    std::string scene_dir;
    std::string scenes;
    std::string bands;
    std::string rank_bands_flag = "all";
    std::string train_bands_flag = "B11";
    std::string algos = "all";
    std::string weights;
    std::string model_path;
    std::string rotations = "0";
    std::string run_dir;
    std::size_t jobs = 1;
    int tile_size = 549;
    bool require_water = false;
    bool save_models = false;
    double threshold = 0.5;
    SceneOptions so;
    SamplingOptions sa;
    TrainFlags tf;

    auto add_out = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_dir, "Output directory (default $" + std::string(kOutputDirEnv) + " or out)");
    };
    auto add_jobs = [&](CLI::App* cmd) {
        cmd->add_option("--jobs", jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    };

    CLI::App* ingest = app.add_subcommand("ingest", "Load a scene, apply a window, write it with its SCL mask");
    ingest->add_option("--scene", scene_dir, "Scene directory")->required();
    so.add_to(*ingest);
    add_out(ingest);

    CLI::App* tile_cmd = app.add_subcommand("tile", "Cut a scene into square tiles, optionally rotated");
    tile_cmd->add_option("--scene", scene_dir, "Scene directory")->required();
    tile_cmd->add_option("--tile-size", tile_size, "Tile edge in pixels")->capture_default_str();
    tile_cmd->add_flag("--require-water", require_water, "Keep only tiles containing water");
    tile_cmd->add_option("--rotations", rotations, "Quarter turns to emit, e.g. 0,1,2,3")->capture_default_str();
    so.add_to(*tile_cmd);
    add_out(tile_cmd);

    CLI::App* sample = app.add_subcommand("sample", "Balanced sample and train/val/test split as CSV");
    sample->add_option("--scene", scene_dir, "Scene directory")->required();
    sample->add_option("--bands", bands, "Bands, e.g. B11 or B2..B12")->required();
    so.add_to(*sample);
    sa.add_to(*sample);
    add_out(sample);

    CLI::App* rank = app.add_subcommand("rank", "Band x classifier mIoU ranking table");
    rank->add_option("--scene", scene_dir, "Scene directory")->required();
    rank->add_option("--bands", rank_bands_flag, "Bands to rank")->capture_default_str();
    rank->add_option("--algos", algos, "Classifiers, e.g. LR,GNB or all")->capture_default_str();
    rank->add_flag("--save-models", save_models, "Save every fitted model under <out>/models");
    so.add_to(*rank);
    sa.add_to(*rank);
    add_jobs(rank);
    add_out(rank);

    CLI::App* train_cmd = app.add_subcommand("train", "Train BandNet");
    train_cmd->add_option("--scene", scene_dir, "Scene directory")->required();
    train_cmd->add_option("--bands", train_bands_flag, "Input bands")->capture_default_str();
    train_cmd->add_option("--max-epochs", tf.max_epochs, "Epoch cap")->capture_default_str();
    train_cmd->add_option("--patience", tf.patience, "Early-stopping patience")->capture_default_str();
    train_cmd->add_option("--batch-size", tf.batch_size, "Mini-batch size")->capture_default_str();
    train_cmd->add_option("--learning-rate", tf.learning_rate, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--dropout", tf.dropout, "Dropout rate")->capture_default_str();
    so.add_to(*train_cmd);
    sa.add_to(*train_cmd);
    add_out(train_cmd);

    std::string pred_bands;
    CLI::App* infer = app.add_subcommand("infer", "Water mask for a scene from BandNet weights or a model");
    infer->add_option("--weights", weights, "BandNet weight file (.bnet)");
    infer->add_option("--model", model_path, "Classifier model file (.brnk)");
    infer->add_option("--scene", scene_dir, "Scene directory")->required();
    infer->add_option("--bands", pred_bands, "Input bands (default: from the training manifest)");
    infer->add_option("--threshold", threshold, "Water probability threshold")->capture_default_str();
    so.add_to(*infer);
    add_jobs(infer);
    add_out(infer);

    CLI::App* monitor = app.add_subcommand("monitor", "Per-date masks and pairwise change maps");
    monitor->add_option("--weights", weights, "BandNet weight file (.bnet)");
    monitor->add_option("--model", model_path, "Classifier model file (.brnk)");
    monitor->add_option("--scenes", scenes, "Comma-separated scene directories")->required();
    monitor->add_option("--bands", pred_bands, "Input bands (default: from the training manifest)");
    monitor->add_option("--threshold", threshold, "Water probability threshold")->capture_default_str();
    so.add_to(*monitor);
    add_jobs(monitor);
    add_out(monitor);

    CLI::App* report = app.add_subcommand("report", "Summarise a run directory");
    report->add_option("run_dir", run_dir, "Run directory")->required();

    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.emplace_back("bandrank");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "bandrank: " << e.what() << '\n';
        err << "run 'bandrank --help' for usage\n";
        return kExitUsage;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(scene_dir, so, out_dir, args, out);
        if (tile_cmd->parsed()) {
            return cmd_tile(scene_dir, so, tile_size, require_water, rotations, out_dir, args, out);
        }
        if (sample->parsed()) return cmd_sample(scene_dir, so, sa, bands, out_dir, args, out);
        if (rank->parsed()) return cmd_rank(scene_dir, so, sa, rank_bands_flag, algos, jobs, save_models, out_dir, args, out);
        if (train_cmd->parsed()) return cmd_train(scene_dir, so, sa, train_bands_flag, tf, out_dir, args, out);
        if (infer->parsed() || monitor->parsed()) {
            if (!(threshold > 0.0 && threshold < 1.0)) throw ArgumentError("--threshold must lie in (0, 1)");
            const Predictor pred = Predictor::load(weights, model_path, pred_bands, threshold);
            if (infer->parsed()) return cmd_infer(pred, weights, model_path, scene_dir, so, jobs, out_dir, args, out);
            return cmd_monitor(pred, weights, model_path, scenes, so, jobs, out_dir, args, out);
        }
        if (report->parsed()) return cmd_report(run_dir, out);
    } catch (const ArgumentError& e) {
        err << "bandrank: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "bandrank: " << e.what() << '\n';
        return kExitDataError;
    }
    return kExitUsage;
}

}  // namespace bandrank::cli
