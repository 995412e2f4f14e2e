#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bandrank/raster.hpp"

namespace bandrank {

struct PixelSource {
    std::string tile_id;
    int x = 0;
    int y = 0;

    friend bool operator==(const PixelSource&, const PixelSource&) = default;
    friend auto operator<=>(const PixelSource&, const PixelSource&) = default;
};

/// One pixel: reflectance (code / 10000) per selected band, its label, and where it came from.
struct SamplePoint {
    std::vector<double> features;
    std::uint8_t label = 0;  // 0 non-water, 1 water
    PixelSource source;

    friend bool operator==(const SamplePoint&, const SamplePoint&) = default;
};

struct SplitSpec {
    std::uint64_t seed = 0;
    std::array<double, 3> fractions{0.70, 0.15, 0.15};  // train, val, test

    /// Throws ArgumentError unless all fractions are positive and sum to 1 (1e-9).
    void validate() const;
};

struct Dataset {
    std::vector<BandId> bands;  // feature order
    std::vector<SamplePoint> train;
    std::vector<SamplePoint> val;
    std::vector<SamplePoint> test;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Draws exactly n_per_class water and n_per_class non-water pixels, uniformly
/// without replacement. Invalid pixels never enter the pool. Pixel selection
/// depends only on (mask, n_per_class, seed), never on the band list, so every
/// band list sees the same pixels. Output is water points then non-water
/// points, each in row-major pixel order.
std::vector<SamplePoint> balanced_sample(const Scene& scene, std::span<const BandId> bands, const WaterMask& mask,
                                         std::size_t n_per_class, std::uint64_t seed);

/// Stratified seeded split. Each class is shuffled separately, the classes are
/// interleaved in proportion, and the interleaved sequence is cut into
/// floor(N*train), floor(N*val) and the remainder.
Dataset split(std::span<const SamplePoint> points, const SplitSpec& spec);

/// Copy of the points keeping only feature `column`.
std::vector<SamplePoint> select_feature(std::span<const SamplePoint> points, std::size_t column);

/// Dense row-major design matrix.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

FeatureMatrix to_matrix(std::span<const SamplePoint> points);
std::vector<std::uint8_t> labels_of(std::span<const SamplePoint> points);

// CSV with header `b<id>,...,label,tile,x,y` (b2, b8a, b11 ...), 6 fractional digits.
void write_points_csv(std::span<const SamplePoint> points, std::span<const BandId> bands,
                      const std::filesystem::path& path);

struct PointTable {
    std::vector<BandId> bands;
    std::vector<SamplePoint> points;
};

PointTable read_points_csv(const std::filesystem::path& path);

/// Writes train.csv, val.csv and test.csv into dir.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace bandrank
