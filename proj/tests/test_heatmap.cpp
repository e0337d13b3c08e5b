#include "eitsfm/heatmap.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>

using namespace eitsfm;
namespace fs = std::filesystem;

namespace {

// 2 x 2 lattice, pixel order (0,0), (1,0), (0,1), (1,1).
PixelGrid square_grid() {
    PixelGrid grid;
    grid.cell_size = 1.0;
    for (int row = 0; row < 2; ++row)
        for (int col = 0; col < 2; ++col) {
            Pixel px;
            px.col = col;
            px.row = row;
            px.polygon = grid.cell_square(col, row);
            px.area = 1.0;
            px.centroid = centroid(px.polygon);
            grid.pixels.push_back(px);
            grid.overlaps.emplace_back();
        }
    return grid;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "eitsfm_heatmap_test";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(Heatmap, LinearPaletteExactBytes) {
    const GrayImage img = rasterize(square_grid(), Eigen::Vector4d(0.0, 1.0, 2.0, 3.0), Palette::linear(0.0, 3.0));
    ASSERT_EQ(img.width, 2);
    ASSERT_EQ(img.height, 2);
    // Top image row is lattice row 1.
    EXPECT_EQ(img.data, (std::vector<std::uint8_t>{170, 255, 0, 85}));
    const std::string pgm = encode_pgm(img);
    EXPECT_EQ(pgm, std::string("P5\n2 2\n255\n\xaa\xff\x00\x55", 15));
}

TEST(Heatmap, ConstantFieldIsUniform) {
    const Eigen::Vector4d v = Eigen::Vector4d::Constant(0.7);
    const GrayImage img = rasterize(square_grid(), v, Palette::fit(v, Palette::Kind::Linear));
    for (auto b : img.data) EXPECT_EQ(b, img.data[0]);
}

TEST(Heatmap, DivergingCentersZero) {
    const Palette p = Palette::diverging(2.0);
    EXPECT_EQ(p.map(0.0), 128);
    EXPECT_EQ(p.map(-2.0), 0);
    EXPECT_EQ(p.map(2.0), 255);
    EXPECT_EQ(p.map(5.0), 255);
}

TEST(Heatmap, NanWritesNothing) {
    const fs::path path = scratch("nan.pgm");
    fs::remove(path);
    Eigen::Vector4d v(0.0, std::numeric_limits<double>::quiet_NaN(), 1.0, 2.0);
    EXPECT_THROW(render_heatmap(square_grid(), v, Palette::linear(0, 2), path), std::invalid_argument);
    EXPECT_FALSE(fs::exists(path));
    EXPECT_FALSE(fs::exists(fs::path(path.string() + ".tmp")));
}

TEST(Heatmap, DeterministicFiles) {
    const fs::path a = scratch("a.pgm"), b = scratch("b.pgm");
    const Eigen::Vector4d v(-1.0, 0.25, 0.5, 2.0);
    render_heatmap(square_grid(), v, Palette::fit(v, Palette::Kind::Diverging), a);
    render_heatmap(square_grid(), v, Palette::fit(v, Palette::Kind::Diverging), b);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_EQ(slurp(a).size(), 15u);
}

TEST(Heatmap, UnwritableDirectoryFails) {
    const Eigen::Vector4d v = Eigen::Vector4d::Zero();
    EXPECT_THROW(render_heatmap(square_grid(), v, Palette::linear(0, 1), "/nonexistent-dir/x.pgm"), std::runtime_error);
}
