#ifndef EITSFM_HEATMAP_HPP
#define EITSFM_HEATMAP_HPP

#include "eitsfm/pixel_grid.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eitsfm {

/// Value-to-gray mapping. Linear maps [lo, hi] onto 0..255; Diverging maps
/// [-m, m] onto 0..255 with zero at mid gray. A degenerate range maps every
/// value to mid gray.
struct Palette {
    enum class Kind { Linear, Diverging };
    Kind kind = Kind::Linear;
    double lo = 0.0;
    double hi = 1.0;

    static Palette linear(double lo, double hi) { return {Kind::Linear, lo, hi}; }
    static Palette diverging(double max_abs) { return {Kind::Diverging, -max_abs, max_abs}; }

    /// Range fitted to the data.
    static Palette fit(const Eigen::VectorXd& v, Kind kind) {
        if (kind == Kind::Diverging) return diverging(v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
        return v.size() ? linear(v.minCoeff(), v.maxCoeff()) : linear(0.0, 0.0);
    }

    std::uint8_t map(double v) const {
        if (!(hi > lo)) return 128;
        const double f = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        return static_cast<std::uint8_t>(std::lround(255.0 * f));
    }
};

/// 8-bit grayscale raster on the pixel lattice; row 0 is the top (largest y).
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;
};

inline GrayImage rasterize(const PixelGrid& grid, const Eigen::VectorXd& values, const Palette& palette,
                           std::uint8_t background = 0) {
    if (static_cast<std::size_t>(values.size()) != grid.size())
        throw std::invalid_argument("value vector does not match the pixel grid");
    if (!values.allFinite()) throw std::invalid_argument("heatmap values must be finite");
    if (grid.pixels.empty()) throw std::invalid_argument("empty pixel grid");
    int col_min = grid.pixels.front().col, col_max = col_min;
    int row_min = grid.pixels.front().row, row_max = row_min;
    for (const auto& px : grid.pixels) {
        col_min = std::min(col_min, px.col);
        col_max = std::max(col_max, px.col);
        row_min = std::min(row_min, px.row);
        row_max = std::max(row_max, px.row);
    }
    GrayImage img;
    img.width = col_max - col_min + 1;
    img.height = row_max - row_min + 1;
    img.data.assign(static_cast<std::size_t>(img.width) * img.height, background);
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const auto& px = grid.pixels[n];
        const auto x = static_cast<std::size_t>(px.col - col_min);
        const auto y = static_cast<std::size_t>(row_max - px.row);
        img.data[y * img.width + x] = palette.map(values[static_cast<Eigen::Index>(n)]);
    }
    return img;
}

/// Binary PGM (P5) encoding.
inline std::string encode_pgm(const GrayImage& img) {
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    out.append(img.data.begin(), img.data.end());
    return out;
}

/// Renders a per-pixel field to a PGM file. Inputs are validated before the
/// file is opened, and the bytes go to a temporary that is renamed into place,
/// so a failure never leaves a partial image behind.
inline void render_heatmap(const PixelGrid& grid, const Eigen::VectorXd& values, const Palette& palette,
                           const std::filesystem::path& path) {
    const std::string bytes = encode_pgm(rasterize(grid, values, palette));
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw std::runtime_error("failed writing " + path.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace eitsfm

#endif  // EITSFM_HEATMAP_HPP
