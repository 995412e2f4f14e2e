// Writes a simulated scene directory (ten bands, SCL, geo transform) that the
// bandrank CLI can ingest.

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>

#include "bandrank/raster.hpp"
#include "bandrank/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic multispectral scene with lakes", "make_synthetic_scene"};
    bandrank::SyntheticSpec spec;
    std::string out;
    app.add_option("--out", out, "Output scene directory")->required();
    app.add_option("--width", spec.width)->capture_default_str();
    app.add_option("--height", spec.height)->capture_default_str();
    app.add_option("--seed", spec.seed)->capture_default_str();
    app.add_option("--tile-id", spec.tile_id)->capture_default_str();
    app.add_option("--date", spec.date)->capture_default_str();
    app.add_option("--lakes", spec.lakes)->capture_default_str();
    app.add_option("--lake-scale", spec.lake_scale, "Multiplier on every lake radius")->capture_default_str();
    app.add_option("--sigma", spec.sigma, "Per-pixel reflectance noise")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        const bandrank::Scene scene = bandrank::make_synthetic_scene(spec);
        bandrank::save_scene(scene, out);
        std::cout << "wrote " << scene.width() << "x" << scene.height() << " scene to " << out << '\n';
    } catch (const std::exception& e) {
        std::cerr << "make_synthetic_scene: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
