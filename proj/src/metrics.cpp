#include "bandrank/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "bandrank/errors.hpp"

namespace bandrank {

std::uint64_t ConfusionMatrix::row_sum(int cls) const noexcept {
    const auto& r = counts[static_cast<std::size_t>(cls)];
    return r[0] + r[1];
}

std::uint64_t ConfusionMatrix::col_sum(int cls) const noexcept {
    return counts[0][static_cast<std::size_t>(cls)] + counts[1][static_cast<std::size_t>(cls)];
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) noexcept {
    for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t p = 0; p < 2; ++p) counts[a][p] += other.counts[a][p];
    }
    return *this;
}

ConfusionMatrix confusion(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> truth) {
    if (preds.size() != truth.size()) throw ArgumentError("prediction and truth lengths differ");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto p = preds[i];
        const auto t = truth[i];
        if (p == 255 || t == 255) continue;
        if (p > 1 || t > 1) throw ArgumentError("labels must be 0, 1 or 255");
        ++cm.counts[t][p];
    }
    return cm;
}

IoU iou(const ConfusionMatrix& cm, int class_index) {
    if (class_index != 0 && class_index != 1) throw ArgumentError("class index must be 0 or 1");
    const auto tp = cm.counts[static_cast<std::size_t>(class_index)][static_cast<std::size_t>(class_index)];
    const auto uni = cm.row_sum(class_index) + cm.col_sum(class_index) - tp;
    if (uni == 0) return {1.0, true};
    return {static_cast<double>(tp) / static_cast<double>(uni), false};
}

double miou(const ConfusionMatrix& cm, bool& any_class_absent) {
    const IoU water = iou(cm, 1);
    const IoU land = iou(cm, 0);
    any_class_absent = water.class_absent || land.class_absent;
    return (land.value + water.value) / 2.0;
}

double miou(const ConfusionMatrix& cm) {
    bool absent = false;
    return miou(cm, absent);
}

double binary_accuracy(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> truth) {
    if (preds.size() != truth.size()) throw ArgumentError("prediction and truth lengths differ");
    if (preds.empty()) throw ArgumentError("accuracy of an empty sequence is undefined");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

PercentScores percent_scores(const std::vector<std::vector<double>>& matrix) {
    if (matrix.empty() || matrix.front().empty()) throw ArgumentError("percent scores need a non-empty matrix");
    const std::size_t cols = matrix.front().size();
    for (const auto& row : matrix) {
        if (row.size() != cols) throw ArgumentError("ragged mIoU matrix");
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    PercentScores out;
    for (const auto& row : matrix) {
        double sum = 0.0;
        std::size_t n = 0;
        for (double v : row) {
            if (std::isnan(v)) continue;
            sum += v;
            ++n;
        }
        out.rows.push_back(n ? sum / (100.0 * static_cast<double>(n)) : nan);
    }
    for (std::size_t c = 0; c < cols; ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& row : matrix) {
            if (std::isnan(row[c])) continue;
            sum += row[c];
            ++n;
        }
        out.cols.push_back(n ? sum / (100.0 * static_cast<double>(n)) : nan);
    }
    return out;
}

double round_half_up(double value, int digits) {
    const double scale = std::pow(10.0, digits);
    // The nudge keeps decimal ties such as 0.665 (stored as 0.66499999...) rounding up.
    return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

std::string format_2dp(double value) {
    if (std::isnan(value)) return {};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", round_half_up(value, 2));
    return buf;
}

void write_ranking_csv(const std::filesystem::path& path, const std::vector<std::string>& band_names,
                       const std::vector<std::string>& algo_names, const std::vector<std::vector<double>>& miou100) {
    if (miou100.size() != band_names.size()) throw ArgumentError("row count differs from band list");
    const PercentScores pct = percent_scores(miou100);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "band";
    for (const auto& a : algo_names) out << ',' << a;
    out << ",percent\n";
    for (std::size_t r = 0; r < band_names.size(); ++r) {
        if (miou100[r].size() != algo_names.size()) throw ArgumentError("column count differs from algorithm list");
        out << band_names[r];
        for (double v : miou100[r]) out << ',' << format_2dp(v);
        out << ',' << format_2dp(pct.rows[r]) << '\n';
    }
    out << "percent";
    for (double v : pct.cols) out << ',' << format_2dp(v);
    out << ",\n";
}

RankingTable read_ranking_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    auto cells_of = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    auto number = [](const std::string& s) {
        return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
    };
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty ranking CSV");
    const auto header = cells_of(line);
    if (header.size() < 3 || header.front() != "band" || header.back() != "percent") {
        throw FormatError(path.string() + ": unexpected ranking header");
    }
    RankingTable t;
    t.algorithms.assign(header.begin() + 1, header.end() - 1);
    const std::size_t n_algos = t.algorithms.size();
    try {
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto cells = cells_of(line);
            if (cells.size() != n_algos + 2) throw CorruptDataError(path.string() + ": wrong column count");
            if (cells.front() == "percent") {
                for (std::size_t c = 0; c < n_algos; ++c) t.col_percents.push_back(number(cells[c + 1]));
                continue;
            }
            t.bands.push_back(cells.front());
            std::vector<double> row;
            for (std::size_t c = 0; c < n_algos; ++c) row.push_back(number(cells[c + 1]));
            t.miou.push_back(std::move(row));
            t.row_percents.push_back(number(cells.back()));
        }
    } catch (const std::logic_error&) {
        throw CorruptDataError(path.string() + ": unparsable number");
    }
    return t;
}

}  // namespace bandrank
