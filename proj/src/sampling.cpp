#include "bandrank/sampling.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "bandrank/errors.hpp"
#include "bandrank/rng.hpp"

namespace bandrank {

namespace fs = std::filesystem;

namespace {

// Robert Floyd's algorithm: `count` distinct ranks from [0, population), sorted.
std::vector<std::size_t> choose_ranks(std::size_t population, std::size_t count, Xoshiro256& rng) {
    std::set<std::size_t> chosen;
    for (std::size_t j = population - count; j < population; ++j) {
        const auto t = static_cast<std::size_t>(rng.bounded(j + 1));
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    return {chosen.begin(), chosen.end()};
}

// Maps sorted per-class ranks back to pixel indices with one pass over the mask.
std::vector<std::size_t> ranks_to_pixels(const WaterMask& mask, std::uint8_t label,
                                         const std::vector<std::size_t>& ranks) {
    std::vector<std::size_t> pixels;
    pixels.reserve(ranks.size());
    std::size_t rank = 0;
    auto next = ranks.begin();
    for (std::size_t i = 0; i < mask.labels.size() && next != ranks.end(); ++i) {
        if (mask.labels[i] != label) continue;
        if (rank == *next) {
            pixels.push_back(i);
            ++next;
        }
        ++rank;
    }
    return pixels;
}

std::string csv_column(BandId id) {
    std::string name(band_name(id).substr(1));
    for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return "b" + name;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

void SplitSpec::validate() const {
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0)) throw ArgumentError("split fractions must all be positive");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("split fractions must sum to 1");
}

std::vector<SamplePoint> balanced_sample(const Scene& scene, std::span<const BandId> bands, const WaterMask& mask,
                                         std::size_t n_per_class, std::uint64_t seed) {
    if (mask.width != scene.width() || mask.height != scene.height()) {
        throw ArgumentError("mask shape does not match scene");
    }
    std::vector<const BandGrid*> grids;
    for (BandId id : bands) grids.push_back(&scene.band(id));

    const std::size_t n_water = mask.count(mask_label::kWater);
    const std::size_t n_land = mask.count(mask_label::kNonWater);
    if (n_water < n_per_class || n_land < n_per_class) {
        std::ostringstream msg;
        msg << "need " << n_per_class << " pixels per class, mask has " << n_water << " water and " << n_land
            << " non-water";
        throw InsufficientDataError(msg.str());
    }

    Xoshiro256 rng(seed);
    const auto water_ranks = choose_ranks(n_water, n_per_class, rng);
    const auto land_ranks = choose_ranks(n_land, n_per_class, rng);

    std::vector<SamplePoint> points;
    points.reserve(2 * n_per_class);
    auto emit = [&](const std::vector<std::size_t>& pixels, std::uint8_t label) {
        for (std::size_t idx : pixels) {
            SamplePoint p;
            p.features.reserve(grids.size());
            for (const BandGrid* g : grids) p.features.push_back(reflectance(g->values[idx]));
            p.label = label;
            p.source = {scene.tile_id, static_cast<int>(idx % mask.width), static_cast<int>(idx / mask.width)};
            points.push_back(std::move(p));
        }
    };
    emit(ranks_to_pixels(mask, mask_label::kWater, water_ranks), mask_label::kWater);
    emit(ranks_to_pixels(mask, mask_label::kNonWater, land_ranks), mask_label::kNonWater);
    return points;
}

Dataset split(std::span<const SamplePoint> points, const SplitSpec& spec) {
    spec.validate();
    if (points.empty()) throw ArgumentError("cannot split an empty point set");

    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < points.size(); ++i) by_class[points[i].label == 1 ? 1 : 0].push_back(i);

    Xoshiro256 rng(spec.seed);
    // Water first so the stream consumption order is fixed.
    rng.shuffle(std::span(by_class[1]));
    rng.shuffle(std::span(by_class[0]));

    // Proportional interleave: emit water while emitted_w / n_w <= emitted_l / n_l.
    std::vector<std::size_t> order;
    order.reserve(points.size());
    const std::size_t n_w = by_class[1].size();
    const std::size_t n_l = by_class[0].size();
    std::size_t w = 0;
    std::size_t l = 0;
    while (w < n_w || l < n_l) {
        const bool take_water = l == n_l || (w < n_w && w * n_l <= l * n_w);
        order.push_back(take_water ? by_class[1][w++] : by_class[0][l++]);
    }

    const auto n = static_cast<double>(points.size());
    const auto n_train = static_cast<std::size_t>(std::floor(n * spec.fractions[0] + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(n * spec.fractions[1] + 1e-9));

    Dataset ds;
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto& dest = i < n_train ? ds.train : (i < n_train + n_val ? ds.val : ds.test);
        dest.push_back(points[order[i]]);
    }
    return ds;
}

std::vector<SamplePoint> select_feature(std::span<const SamplePoint> points, std::size_t column) {
    std::vector<SamplePoint> out;
    out.reserve(points.size());
    for (const auto& p : points) {
        if (column >= p.features.size()) throw ArgumentError("feature column out of range");
        out.push_back({{p.features[column]}, p.label, p.source});
    }
    return out;
}

FeatureMatrix to_matrix(std::span<const SamplePoint> points) {
    FeatureMatrix m;
    m.rows = points.size();
    m.cols = points.empty() ? 0 : points.front().features.size();
    m.values.reserve(m.rows * m.cols);
    for (const auto& p : points) {
        if (p.features.size() != m.cols) throw ArgumentError("inconsistent feature dimensionality");
        m.values.insert(m.values.end(), p.features.begin(), p.features.end());
    }
    return m;
}

std::vector<std::uint8_t> labels_of(std::span<const SamplePoint> points) {
    std::vector<std::uint8_t> y;
    y.reserve(points.size());
    for (const auto& p : points) y.push_back(p.label);
    return y;
}

void write_points_csv(std::span<const SamplePoint> points, std::span<const BandId> bands, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    for (BandId b : bands) out << csv_column(b) << ',';
    out << "label,tile,x,y\n";
    char buf[32];
    for (const auto& p : points) {
        if (p.features.size() != bands.size()) throw ArgumentError("point dimensionality differs from band list");
        for (double f : p.features) {
            std::snprintf(buf, sizeof buf, "%.6f", f);
            out << buf << ',';
        }
        out << static_cast<int>(p.label) << ',' << p.source.tile_id << ',' << p.source.x << ',' << p.source.y
            << '\n';
    }
}

PointTable read_points_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 4 || header[header.size() - 4] != "label" || header[header.size() - 3] != "tile" ||
        header[header.size() - 2] != "x" || header.back() != "y") {
        throw FormatError(path.string() + ": unexpected CSV header");
    }
    PointTable table;
    for (std::size_t i = 0; i + 4 < header.size(); ++i) {
        if (header[i].size() < 2 || header[i][0] != 'b') throw FormatError("bad band column " + header[i]);
        try {
            table.bands.push_back(parse_band("B" + header[i].substr(1)));
        } catch (const ArgumentError& e) {
            throw FormatError(path.string() + ": " + e.what());
        }
    }
    const std::size_t d = table.bands.size();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != d + 4) {
            throw CorruptDataError(path.string() + ":" + std::to_string(line_no) + ": wrong column count");
        }
        SamplePoint p;
        try {
            for (std::size_t i = 0; i < d; ++i) p.features.push_back(std::stod(cells[i]));
            const int label = std::stoi(cells[d]);
            if (label != 0 && label != 1) throw CorruptDataError("label must be 0 or 1");
            p.label = static_cast<std::uint8_t>(label);
            p.source = {cells[d + 1], std::stoi(cells[d + 2]), std::stoi(cells[d + 3])};
        } catch (const std::logic_error&) {
            throw CorruptDataError(path.string() + ":" + std::to_string(line_no) + ": unparsable value");
        }
        table.points.push_back(std::move(p));
    }
    return table;
}

void write_dataset(const Dataset& dataset, const fs::path& dir) {
    fs::create_directories(dir);
    write_points_csv(dataset.train, dataset.bands, dir / "train.csv");
    write_points_csv(dataset.val, dataset.bands, dir / "val.csv");
    write_points_csv(dataset.test, dataset.bands, dir / "test.csv");
}

Dataset read_dataset(const fs::path& dir) {
    Dataset ds;
    auto train = read_points_csv(dir / "train.csv");
    auto val = read_points_csv(dir / "val.csv");
    auto test = read_points_csv(dir / "test.csv");
    if (val.bands != train.bands || test.bands != train.bands) {
        throw FormatError(dir.string() + ": split files disagree on band columns");
    }
    ds.bands = std::move(train.bands);
    ds.train = std::move(train.points);
    ds.val = std::move(val.points);
    ds.test = std::move(test.points);
    return ds;
}

}  // namespace bandrank
