#pragma once

#include <cstdint>
#include <string>

#include "bandrank/raster.hpp"

namespace bandrank {

/// Parameters of a simulated multispectral scene with circular lakes.
struct SyntheticSpec {
    int width = 256;
    int height = 256;
    std::uint64_t seed = 1;
    std::string tile_id = "SYNTH";
    std::string date = "2019-01-04";
    int lakes = 6;
    double lake_scale = 1.0;   // multiplies every lake radius (shrinking/growing water)
    double water_mean = 0.03;  // reflectance of water in every band
    double sigma = 0.03;       // per-pixel noise, both classes
    /// Land-minus-water separation in units of sigma, for the best (B11) and
    /// worst (B2) band; bands in between are spaced linearly in the order
    /// B11 > B12 > B8A > B8 > B7 > B6 > B5 > B4 > B3 > B2.
    double best_separation = 5.0;
    double worst_separation = 0.2;
    int nodata_rows = 2;  // SCL = 0 along the top rows
};

/// Separability rank of a band in the simulator (0 = most separable).
int synthetic_rank(BandId band);

/// Scene with all ten reflectance bands, an SCL grid (6 water, 4 land, 0 no-data)
/// and a 10 m north-up geo transform.
Scene make_synthetic_scene(const SyntheticSpec& spec);

}  // namespace bandrank
