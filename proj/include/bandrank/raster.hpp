#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bandrank {

/// Sentinel-2 bands handled by the pipeline, in wavelength order, plus the
/// scene classification layer.
enum class BandId : std::uint8_t { B2, B3, B4, B5, B6, B7, B8, B8A, B11, B12, SCL };

inline constexpr std::array<BandId, 10> kReflectanceBands = {
    BandId::B2, BandId::B3, BandId::B4, BandId::B5, BandId::B6,
    BandId::B7, BandId::B8, BandId::B8A, BandId::B11, BandId::B12,
};

/// Canonical name ("B2", "B8A", "SCL").
std::string_view band_name(BandId id) noexcept;

/// Accepts canonical names and zero-padded aliases ("B02", "B8a"). Throws FormatError.
BandId parse_band(std::string_view name);

/// Parses "B2,B3", "B2..B12" (inclusive range in wavelength order) or "all".
std::vector<BandId> parse_band_list(std::string_view spec);

/// Reflectance codes are scaled by 10000 (BOA reflectance = code / 10000).
inline constexpr double kReflectanceScale = 10000.0;

inline double reflectance(std::uint16_t code) noexcept { return code / kReflectanceScale; }

struct BandGrid {
    BandId band_id = BandId::B2;
    int width = 0;
    int height = 0;
    double resolution_m = 10.0;
    std::vector<std::uint16_t> values;  // row-major

    BandGrid() = default;
    BandGrid(BandId id, int w, int h, double resolution = 10.0);
    BandGrid(BandId id, int w, int h, std::vector<std::uint16_t> data, double resolution = 10.0);

    std::uint16_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint16_t& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const noexcept { return values.size(); }

    friend bool operator==(const BandGrid&, const BandGrid&) = default;
};

/// GDAL-style affine: X = c[0] + px*c[1] + py*c[2], Y = c[3] + px*c[4] + py*c[5].
struct GeoTransform {
    std::array<double, 6> c{};

    std::array<double, 2> apply(double px, double py) const noexcept {
        return {c[0] + px * c[1] + py * c[2], c[3] + px * c[4] + py * c[5]};
    }
    /// Inverse mapping; throws ArgumentError when the linear part is singular.
    std::array<double, 2> invert(double x, double y) const;

    friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

struct Scene {
    std::string tile_id;
    std::string date;  // ISO-8601
    std::map<BandId, BandGrid> bands;
    std::optional<BandGrid> scl;
    std::optional<GeoTransform> geo;

    int width() const noexcept;
    int height() const noexcept;
    bool has_band(BandId id) const noexcept { return bands.count(id) != 0; }
    const BandGrid& band(BandId id) const;  // throws ArgumentError when missing

    /// Throws CorruptDataError if any grid disagrees with the others in shape.
    void validate() const;

    friend bool operator==(const Scene&, const Scene&) = default;
};

namespace mask_label {
inline constexpr std::uint8_t kNonWater = 0;
inline constexpr std::uint8_t kWater = 1;
inline constexpr std::uint8_t kInvalid = 255;
}  // namespace mask_label

struct WaterMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> labels;  // {0, 1, 255}, row-major

    WaterMask() = default;
    WaterMask(int w, int h, std::uint8_t fill = mask_label::kNonWater);

    std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::size_t count(std::uint8_t label) const noexcept;

    friend bool operator==(const WaterMask&, const WaterMask&) = default;
};

/// Sentinel-2 L2A scene classification code for water.
inline constexpr int kDefaultWaterCode = 6;

struct PixelWindow {
    int x0 = 0;
    int y0 = 0;
    int w = 0;
    int h = 0;
};

// Scene directory I/O: `scene.json` plus raw little-endian uint16 band files.
Scene load_scene(const std::filesystem::path& dir);
void save_scene(const Scene& scene, const std::filesystem::path& dir);

WaterMask scl_to_mask(const BandGrid& scl, int water_code = kDefaultWaterCode);

/// Mask for a scene; throws ArgumentError when the scene carries no SCL grid.
WaterMask scene_mask(const Scene& scene, int water_code = kDefaultWaterCode);

Scene subset(const Scene& scene, const PixelWindow& window);
WaterMask subset(const WaterMask& mask, const PixelWindow& window);

/// Non-overlapping row-major tiles; trailing partial tiles are dropped. With
/// require_water, tiles whose SCL-derived mask has no water pixel are skipped.
std::vector<Scene> tile(const Scene& scene, int tile_size = 549, bool require_water = false,
                        int water_code = kDefaultWaterCode);

/// Counter-clockwise rotation by quarter_turns * 90 degrees, k in [0, 3].
Scene rotate(const Scene& scene, int quarter_turns);
BandGrid rotate(const BandGrid& grid, int quarter_turns);
WaterMask rotate(const WaterMask& mask, int quarter_turns);

/// Pixel window covering a projected-coordinate box, rounded outward and
/// clipped to the scene. Corners are (north, west, south, east).
PixelWindow geo_window(const Scene& scene, double north, double west, double south, double east);

// Binary PGM (P5, maxval 255): water 255, non-water 0, invalid 128.
void write_mask_pgm(const WaterMask& mask, const std::filesystem::path& path);
WaterMask read_mask_pgm(const std::filesystem::path& path);

/// Per-pixel change between two co-registered masks: 1 where exactly one of
/// them is water, 255 where either is invalid.
WaterMask change_map(const WaterMask& before, const WaterMask& after);

}  // namespace bandrank
