#include "bandrank/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "bandrank/errors.hpp"

namespace bandrank {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 11> kBandNames = {"B2", "B3", "B4", "B5",  "B6", "B7",
                                                         "B8", "B8A", "B11", "B12", "SCL"};

std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::uint16_t> read_u16_file(const fs::path& path, int width, int height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open band file " + path.string());
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::uintmax_t>(in.tellg());
    const auto expected = static_cast<std::uintmax_t>(width) * static_cast<std::uintmax_t>(height) * 2U;
    if (bytes != expected) {
        std::ostringstream msg;
        msg << path.string() << ": expected " << expected << " bytes for " << width << "x" << height
            << ", found " << bytes;
        throw CorruptDataError(msg.str());
    }
    in.seekg(0);
    std::vector<unsigned char> raw(bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw CorruptDataError("short read on " + path.string());
    std::vector<std::uint16_t> values(static_cast<std::size_t>(width) * height);
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
    }
    return values;
}

void write_u16_file(const fs::path& path, const std::vector<std::uint16_t>& values) {
    std::vector<unsigned char> raw(values.size() * 2);
    for (std::size_t i = 0; i < values.size(); ++i) {
        raw[2 * i] = static_cast<unsigned char>(values[i] & 0xFF);
        raw[2 * i + 1] = static_cast<unsigned char>(values[i] >> 8);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

template <typename T>
std::vector<T> crop(const std::vector<T>& src, int src_width, const PixelWindow& w) {
    std::vector<T> out(static_cast<std::size_t>(w.w) * w.h);
    for (int y = 0; y < w.h; ++y) {
        const auto from = src.begin() + static_cast<std::ptrdiff_t>(y + w.y0) * src_width + w.x0;
        std::copy(from, from + w.w, out.begin() + static_cast<std::ptrdiff_t>(y) * w.w);
    }
    return out;
}

// One counter-clockwise quarter turn: out(r, c) = in(row = c, col = width - 1 - r).
template <typename T>
std::vector<T> rotate_once(const std::vector<T>& in, int width, int height) {
    const int out_w = height;
    const int out_h = width;
    std::vector<T> out(in.size());
    for (int r = 0; r < out_h; ++r) {
        for (int c = 0; c < out_w; ++c) {
            out[static_cast<std::size_t>(r) * out_w + c] =
                in[static_cast<std::size_t>(c) * width + (width - 1 - r)];
        }
    }
    return out;
}

void check_turns(int k) {
    if (k < 0 || k > 3) throw ArgumentError("quarter_turns must be in [0, 3], got " + std::to_string(k));
}

void check_window(int width, int height, const PixelWindow& w) {
    if (w.w <= 0 || w.h <= 0 || w.x0 < 0 || w.y0 < 0 || w.x0 + w.w > width || w.y0 + w.h > height) {
        std::ostringstream msg;
        msg << "window (" << w.x0 << "," << w.y0 << "," << w.w << "," << w.h << ") outside " << width << "x"
            << height;
        throw BoundsError(msg.str());
    }
}

}  // namespace

std::string_view band_name(BandId id) noexcept { return kBandNames[static_cast<std::size_t>(id)]; }

BandId parse_band(std::string_view name) {
    std::string s = upper(trim(name));
    // B02 -> B2, B08 -> B8, B8A stays.
    if (s.size() >= 3 && s[0] == 'B' && s[1] == '0') s.erase(1, 1);
    for (std::size_t i = 0; i < kBandNames.size(); ++i) {
        if (s == kBandNames[i]) return static_cast<BandId>(i);
    }
    throw ArgumentError("unknown band id '" + std::string(name) + "'");
}

std::vector<BandId> parse_band_list(std::string_view spec) {
    std::vector<BandId> out;
    if (upper(trim(spec)) == "ALL") return {kReflectanceBands.begin(), kReflectanceBands.end()};
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const auto comma = std::min(spec.find(',', pos), spec.size());
        const std::string item = trim(spec.substr(pos, comma - pos));
        pos = comma + 1;
        if (item.empty()) continue;
        if (const auto dots = item.find(".."); dots != std::string::npos) {
            const BandId lo = parse_band(item.substr(0, dots));
            const BandId hi = parse_band(item.substr(dots + 2));
            if (lo == BandId::SCL || hi == BandId::SCL || hi < lo) {
                throw ArgumentError("bad band range '" + item + "'");
            }
            for (auto b = static_cast<int>(lo); b <= static_cast<int>(hi); ++b) {
                out.push_back(static_cast<BandId>(b));
            }
        } else {
            out.push_back(parse_band(item));
        }
    }
    if (out.empty()) throw ArgumentError("empty band list");
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (std::find(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(i), out[i]) !=
            out.begin() + static_cast<std::ptrdiff_t>(i)) {
            throw ArgumentError("duplicate band " + std::string(band_name(out[i])));
        }
    }
    return out;
}

BandGrid::BandGrid(BandId id, int w, int h, double resolution)
    : BandGrid(id, w, h, std::vector<std::uint16_t>(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0)),
               resolution) {}

BandGrid::BandGrid(BandId id, int w, int h, std::vector<std::uint16_t> data, double resolution)
    : band_id(id), width(w), height(h), resolution_m(resolution), values(std::move(data)) {
    if (w <= 0 || h <= 0) throw ArgumentError("band grid dimensions must be positive");
    if (values.size() != static_cast<std::size_t>(w) * h) {
        throw CorruptDataError("band grid holds " + std::to_string(values.size()) + " values, expected " +
                               std::to_string(static_cast<std::size_t>(w) * h));
    }
}

std::array<double, 2> GeoTransform::invert(double x, double y) const {
    const double det = c[1] * c[5] - c[2] * c[4];
    if (det == 0.0) throw ArgumentError("geo transform is singular");
    const double dx = x - c[0];
    const double dy = y - c[3];
    return {(c[5] * dx - c[2] * dy) / det, (-c[4] * dx + c[1] * dy) / det};
}

int Scene::width() const noexcept {
    if (!bands.empty()) return bands.begin()->second.width;
    return scl ? scl->width : 0;
}

int Scene::height() const noexcept {
    if (!bands.empty()) return bands.begin()->second.height;
    return scl ? scl->height : 0;
}

const BandGrid& Scene::band(BandId id) const {
    const auto it = bands.find(id);
    if (it == bands.end()) {
        throw ArgumentError("scene " + tile_id + " has no band " + std::string(band_name(id)));
    }
    return it->second;
}

void Scene::validate() const {
    const int w = width();
    const int h = height();
    auto check = [&](const BandGrid& g) {
        if (g.width != w || g.height != h) {
            throw CorruptDataError("band " + std::string(band_name(g.band_id)) + " is " + std::to_string(g.width) +
                                   "x" + std::to_string(g.height) + ", scene is " + std::to_string(w) + "x" +
                                   std::to_string(h));
        }
        if (g.values.size() != static_cast<std::size_t>(w) * h) throw CorruptDataError("grid size mismatch");
    };
    for (const auto& [id, g] : bands) {
        if (g.band_id != id) throw CorruptDataError("band map key disagrees with grid band id");
        check(g);
    }
    if (scl) check(*scl);
}

WaterMask::WaterMask(int w, int h, std::uint8_t fill)
    : width(w), height(h), labels(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {}

std::size_t WaterMask::count(std::uint8_t label) const noexcept {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

Scene load_scene(const fs::path& dir) {
    const fs::path header_path = dir / "scene.json";
    std::ifstream in(header_path);
    if (!in) throw FormatError("missing scene header " + header_path.string());

    json header;
    try {
        header = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(header_path.string() + ": " + e.what());
    }

    Scene scene;
    int width = 0;
    int height = 0;
    double resolution = 10.0;
    try {
        scene.tile_id = header.at("tile_id").get<std::string>();
        scene.date = header.value("date", std::string{});
        width = header.at("width").get<int>();
        height = header.at("height").get<int>();
        resolution = header.value("resolution_m", 10.0);
        if (header.contains("geo") && !header["geo"].is_null()) {
            const auto coeffs = header["geo"].get<std::vector<double>>();
            if (coeffs.size() != 6) throw FormatError("geo must have 6 coefficients");
            GeoTransform geo;
            std::copy(coeffs.begin(), coeffs.end(), geo.c.begin());
            scene.geo = geo;
        }
        if (width <= 0 || height <= 0) throw FormatError("scene dimensions must be positive");

        for (const auto& entry : header.at("bands")) {
            BandId id{};
            try {
                id = parse_band(entry.at("id").get<std::string>());
            } catch (const ArgumentError& e) {
                throw FormatError(header_path.string() + ": " + e.what());
            }
            if (id == BandId::SCL) throw FormatError("SCL must be declared under 'scl', not 'bands'");
            const double band_res = entry.value("resolution_m", resolution);
            if (band_res != resolution) {
                throw FormatError("band " + std::string(band_name(id)) +
                                  " has a different resolution; resample before loading");
            }
            if (scene.bands.count(id)) throw FormatError("band " + std::string(band_name(id)) + " declared twice");
            auto values = read_u16_file(dir / entry.at("file").get<std::string>(), width, height);
            scene.bands.emplace(id, BandGrid(id, width, height, std::move(values), resolution));
        }
        if (header.contains("scl") && !header["scl"].is_null()) {
            auto values = read_u16_file(dir / header["scl"].at("file").get<std::string>(), width, height);
            scene.scl = BandGrid(BandId::SCL, width, height, std::move(values), resolution);
        }
    } catch (const json::exception& e) {
        throw FormatError(header_path.string() + ": " + e.what());
    }
    if (scene.bands.empty() && !scene.scl) throw FormatError(header_path.string() + ": no grids declared");
    scene.validate();
    return scene;
}

void save_scene(const Scene& scene, const fs::path& dir) {
    scene.validate();
    fs::create_directories(dir);
    json header;
    header["tile_id"] = scene.tile_id;
    header["date"] = scene.date;
    header["width"] = scene.width();
    header["height"] = scene.height();
    double resolution = 10.0;
    if (!scene.bands.empty()) {
        resolution = scene.bands.begin()->second.resolution_m;
    } else if (scene.scl) {
        resolution = scene.scl->resolution_m;
    }
    header["resolution_m"] = resolution;
    if (scene.geo) header["geo"] = scene.geo->c;
    json bands = json::array();
    for (const auto& [id, grid] : scene.bands) {
        const std::string file = std::string(band_name(id)) + ".raw";
        write_u16_file(dir / file, grid.values);
        bands.push_back({{"id", band_name(id)}, {"file", file}});
    }
    header["bands"] = bands;
    if (scene.scl) {
        write_u16_file(dir / "SCL.raw", scene.scl->values);
        header["scl"] = {{"file", "SCL.raw"}};
    }
    std::ofstream out(dir / "scene.json", std::ios::trunc);
    if (!out) throw FormatError("cannot write " + (dir / "scene.json").string());
    out << header.dump(2) << '\n';
}

WaterMask scl_to_mask(const BandGrid& scl, int water_code) {
    WaterMask mask(scl.width, scl.height);
    for (std::size_t i = 0; i < scl.values.size(); ++i) {
        const int code = scl.values[i];
        if (code == 0) {
            mask.labels[i] = mask_label::kInvalid;
        } else if (code == water_code) {
            mask.labels[i] = mask_label::kWater;
        }
    }
    return mask;
}

WaterMask scene_mask(const Scene& scene, int water_code) {
    if (!scene.scl) throw ArgumentError("scene " + scene.tile_id + " has no SCL grid to annotate from");
    return scl_to_mask(*scene.scl, water_code);
}

Scene subset(const Scene& scene, const PixelWindow& window) {
    check_window(scene.width(), scene.height(), window);
    Scene out;
    out.tile_id = scene.tile_id;
    out.date = scene.date;
    for (const auto& [id, grid] : scene.bands) {
        out.bands.emplace(id, BandGrid(id, window.w, window.h, crop(grid.values, grid.width, window),
                                       grid.resolution_m));
    }
    if (scene.scl) {
        out.scl = BandGrid(BandId::SCL, window.w, window.h, crop(scene.scl->values, scene.scl->width, window),
                           scene.scl->resolution_m);
    }
    if (scene.geo) {
        GeoTransform g = *scene.geo;
        const auto origin = scene.geo->apply(window.x0, window.y0);
        g.c[0] = origin[0];
        g.c[3] = origin[1];
        out.geo = g;
    }
    return out;
}

WaterMask subset(const WaterMask& mask, const PixelWindow& window) {
    check_window(mask.width, mask.height, window);
    WaterMask out;
    out.width = window.w;
    out.height = window.h;
    out.labels = crop(mask.labels, mask.width, window);
    return out;
}

std::vector<Scene> tile(const Scene& scene, int tile_size, bool require_water, int water_code) {
    if (tile_size <= 0) throw ArgumentError("tile_size must be positive");
    if (require_water && !scene.scl) throw ArgumentError("require_water needs an SCL grid");
    std::vector<Scene> tiles;
    const int rows = scene.height() / tile_size;
    const int cols = scene.width() / tile_size;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Scene t = subset(scene, {c * tile_size, r * tile_size, tile_size, tile_size});
            if (require_water && scl_to_mask(*t.scl, water_code).count(mask_label::kWater) == 0) continue;
            t.tile_id = scene.tile_id + "_r" + std::to_string(r) + "_c" + std::to_string(c);
            tiles.push_back(std::move(t));
        }
    }
    return tiles;
}

BandGrid rotate(const BandGrid& grid, int quarter_turns) {
    check_turns(quarter_turns);
    BandGrid out = grid;
    for (int k = 0; k < quarter_turns; ++k) {
        out.values = rotate_once(out.values, out.width, out.height);
        std::swap(out.width, out.height);
    }
    return out;
}

WaterMask rotate(const WaterMask& mask, int quarter_turns) {
    check_turns(quarter_turns);
    WaterMask out = mask;
    for (int k = 0; k < quarter_turns; ++k) {
        out.labels = rotate_once(out.labels, out.width, out.height);
        std::swap(out.width, out.height);
    }
    return out;
}

Scene rotate(const Scene& scene, int quarter_turns) {
    check_turns(quarter_turns);
    Scene out;
    out.tile_id = scene.tile_id;
    out.date = scene.date;
    for (const auto& [id, grid] : scene.bands) out.bands.emplace(id, rotate(grid, quarter_turns));
    if (scene.scl) out.scl = rotate(*scene.scl, quarter_turns);
    if (scene.geo) {
        // Old pixel corner (px, py) lands at (py, W - px) after one turn, so the
        // transform stays affine and keeps pointing at the same ground locations.
        GeoTransform g = *scene.geo;
        int w = scene.width();
        int h = scene.height();
        for (int k = 0; k < quarter_turns; ++k) {
            const auto& c = g.c;
            g = GeoTransform{{c[0] + w * c[1], c[2], -c[1], c[3] + w * c[4], c[5], -c[4]}};
            std::swap(w, h);
        }
        out.geo = g;
    }
    return out;
}

PixelWindow geo_window(const Scene& scene, double north, double west, double south, double east) {
    if (!scene.geo) throw ArgumentError("scene " + scene.tile_id + " has no geo transform");
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = min_x;
    double max_x = -min_x;
    double max_y = -min_x;
    for (const auto& [gx, gy] : {std::pair{west, north}, {east, north}, {west, south}, {east, south}}) {
        const auto p = scene.geo->invert(gx, gy);
        min_x = std::min(min_x, p[0]);
        max_x = std::max(max_x, p[0]);
        min_y = std::min(min_y, p[1]);
        max_y = std::max(max_y, p[1]);
    }
    // Small tolerance so corners that land exactly on a pixel edge do not pull in an extra column.
    constexpr double kEdgeTol = 1e-9;
    const int x0 = std::max(0, static_cast<int>(std::floor(min_x + kEdgeTol)));
    const int y0 = std::max(0, static_cast<int>(std::floor(min_y + kEdgeTol)));
    const int x1 = std::min(scene.width(), static_cast<int>(std::ceil(max_x - kEdgeTol)));
    const int y1 = std::min(scene.height(), static_cast<int>(std::ceil(max_y - kEdgeTol)));
    if (x1 <= x0 || y1 <= y0) throw BoundsError("geographic window does not overlap the scene");
    return {x0, y0, x1 - x0, y1 - y0};
}

void write_mask_pgm(const WaterMask& mask, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
    std::vector<unsigned char> pixels(mask.labels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        switch (mask.labels[i]) {
            case mask_label::kWater: pixels[i] = 255; break;
            case mask_label::kNonWater: pixels[i] = 0; break;
            default: pixels[i] = 128; break;
        }
    }
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

WaterMask read_mask_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    auto token = [&]() {
        std::string t;
        char ch = 0;
        while (in.get(ch)) {
            if (ch == '#') {
                std::string comment;
                std::getline(in, comment);
            } else if (!std::isspace(static_cast<unsigned char>(ch))) {
                t.push_back(ch);
                break;
            }
        }
        while (in.get(ch) && !std::isspace(static_cast<unsigned char>(ch))) t.push_back(ch);
        return t;
    };
    if (token() != "P5") throw FormatError(path.string() + ": not a binary PGM");
    int w = 0;
    int h = 0;
    int maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw FormatError(path.string() + ": bad PGM header");
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw FormatError(path.string() + ": unsupported PGM header");
    WaterMask mask(w, h);
    std::vector<unsigned char> pixels(mask.labels.size());
    in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!in) throw CorruptDataError(path.string() + ": truncated PGM data");
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        switch (pixels[i]) {
            case 255: mask.labels[i] = mask_label::kWater; break;
            case 0: mask.labels[i] = mask_label::kNonWater; break;
            case 128: mask.labels[i] = mask_label::kInvalid; break;
            default: throw CorruptDataError(path.string() + ": unexpected mask value " + std::to_string(pixels[i]));
        }
    }
    return mask;
}

WaterMask change_map(const WaterMask& before, const WaterMask& after) {
    if (before.width != after.width || before.height != after.height) {
        throw ArgumentError("change_map needs masks of identical shape");
    }
    WaterMask out(before.width, before.height);
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
        const auto a = before.labels[i];
        const auto b = after.labels[i];
        if (a == mask_label::kInvalid || b == mask_label::kInvalid) {
            out.labels[i] = mask_label::kInvalid;
        } else {
            out.labels[i] = static_cast<std::uint8_t>(a ^ b);
        }
    }
    return out;
}

}  // namespace bandrank
