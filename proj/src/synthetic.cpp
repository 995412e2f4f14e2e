#include "bandrank/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "bandrank/rng.hpp"

namespace bandrank {

namespace {

constexpr std::array<BandId, 10> kSeparabilityOrder = {
    BandId::B11, BandId::B12, BandId::B8A, BandId::B8, BandId::B7,
    BandId::B6,  BandId::B5,  BandId::B4,  BandId::B3, BandId::B2,
};

struct Lake {
    double cx, cy, r;
};

}  // namespace

int synthetic_rank(BandId band) {
    const auto it = std::find(kSeparabilityOrder.begin(), kSeparabilityOrder.end(), band);
    return it == kSeparabilityOrder.end() ? -1 : static_cast<int>(it - kSeparabilityOrder.begin());
}

Scene make_synthetic_scene(const SyntheticSpec& spec) {
    Xoshiro256 layout(derive_seed(spec.seed, 0));
    std::vector<Lake> lakes;
    const double base = std::min(spec.width, spec.height);
    for (int i = 0; i < spec.lakes; ++i) {
        lakes.push_back({layout.uniform(0.1, 0.9) * spec.width, layout.uniform(0.1, 0.9) * spec.height,
                         layout.uniform(0.05, 0.14) * base});
    }

    Scene scene;
    scene.tile_id = spec.tile_id;
    scene.date = spec.date;
    scene.geo = GeoTransform{{600000.0, 10.0, 0.0, 1400000.0, 0.0, -10.0}};

    BandGrid scl(BandId::SCL, spec.width, spec.height);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            bool water = false;
            for (const auto& l : lakes) {
                const double r = l.r * spec.lake_scale;
                if ((x - l.cx) * (x - l.cx) + (y - l.cy) * (y - l.cy) <= r * r) water = true;
            }
            scl.at(x, y) = y < spec.nodata_rows ? 0 : (water ? 6 : 4);
        }
    }

    for (BandId band : kReflectanceBands) {
        const int rank = synthetic_rank(band);
        const double t = rank / 9.0;
        const double separation = spec.best_separation + t * (spec.worst_separation - spec.best_separation);
        const double land_mean = spec.water_mean + separation * spec.sigma;
        Xoshiro256 noise(derive_seed(spec.seed, 1, static_cast<std::uint64_t>(band)));
        BandGrid grid(band, spec.width, spec.height);
        for (std::size_t i = 0; i < grid.values.size(); ++i) {
            const double mean = scl.values[i] == 6 ? spec.water_mean : land_mean;
            const double value = mean + spec.sigma * noise.normal();
            grid.values[i] = static_cast<std::uint16_t>(std::clamp(std::lround(value * kReflectanceScale), 0L, 65535L));
        }
        scene.bands.emplace(band, std::move(grid));
    }
    scene.scl = std::move(scl);
    return scene;
}

}  // namespace bandrank
