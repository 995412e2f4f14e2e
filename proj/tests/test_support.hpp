#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <unistd.h>
#include <string>
#include <vector>

#include "bandrank/raster.hpp"
#include "bandrank/rng.hpp"
#include "bandrank/sampling.hpp"

namespace testing {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("bandrank_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

/// 1-D two-Gaussian reflectance points: label 1 around `water`, 0 around `land`.
inline std::vector<bandrank::SamplePoint> two_gaussians(double water, double land, double sigma, std::size_t per_class,
                                                        std::uint64_t seed) {
    bandrank::Xoshiro256 rng(seed);
    std::vector<bandrank::SamplePoint> pts;
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const bool is_water = i % 2 == 0;
        bandrank::SamplePoint p;
        p.features = {(is_water ? water : land) + sigma * rng.normal()};
        p.label = is_water ? 1 : 0;
        p.source = {"G", static_cast<int>(i), 0};
        pts.push_back(p);
    }
    return pts;
}

inline std::vector<std::uint8_t> labels(const std::vector<bandrank::SamplePoint>& pts) {
    std::vector<std::uint8_t> out;
    for (const auto& p : pts) out.push_back(p.label);
    return out;
}

}  // namespace testing
