#ifndef EITSFM_IO_HPP
#define EITSFM_IO_HPP

#include "eitsfm/forward.hpp"
#include "eitsfm/geometry.hpp"
#include "eitsfm/pixel_grid.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>

// Plain-text formats are one record per line, whitespace separated, with a
// header line carrying the counts. Floating point values are written with 17
// significant digits so that text round trips are exact.

namespace eitsfm::io {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

template <typename T>
T read_value(std::istream& in, const char* what) {
    T v{};
    if (!(in >> v)) throw std::runtime_error(std::string("malformed input while reading ") + what);
    return v;
}

inline void expect_token(std::istream& in, const std::string& token) {
    std::string got;
    if (!(in >> got) || got != token) throw std::runtime_error("expected '" + token + "' but found '" + got + "'");
}

}  // namespace detail

/// Header: `eitmesh <nodes> <triangles> <boundary> <electrodes>`, then node
/// records `i x y`, triangle records `i a b c`, one boundary index per line,
/// one electrode node index per line.
inline void write_mesh(std::ostream& out, const TriMesh& mesh, const ElectrodeLayout& layout) {
    out << "eitmesh " << mesh.node_count() << ' ' << mesh.triangle_count() << ' ' << mesh.boundary_nodes.size() << ' '
        << layout.nodes.size() << '\n';
    for (std::size_t i = 0; i < mesh.node_count(); ++i)
        out << i << ' ' << format_double(mesh.nodes[i].x()) << ' ' << format_double(mesh.nodes[i].y()) << '\n';
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        out << t << ' ' << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
    }
    for (int b : mesh.boundary_nodes) out << b << '\n';
    for (int e : layout.nodes) out << e << '\n';
}

struct MeshFile {
    TriMesh mesh;
    ElectrodeLayout layout;
};

inline MeshFile read_mesh(std::istream& in) {
    detail::expect_token(in, "eitmesh");
    const auto nn = detail::read_value<std::size_t>(in, "node count");
    const auto nt = detail::read_value<std::size_t>(in, "triangle count");
    const auto nb = detail::read_value<std::size_t>(in, "boundary count");
    const auto ne = detail::read_value<std::size_t>(in, "electrode count");
    MeshFile f;
    f.mesh.nodes.resize(nn);
    for (std::size_t i = 0; i < nn; ++i) {
        if (detail::read_value<std::size_t>(in, "node index") != i) throw std::runtime_error("node records out of order");
        const double x = detail::read_value<double>(in, "node x");
        const double y = detail::read_value<double>(in, "node y");
        f.mesh.nodes[i] = Point(x, y);
    }
    f.mesh.triangles.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        if (detail::read_value<std::size_t>(in, "triangle index") != t)
            throw std::runtime_error("triangle records out of order");
        for (int a = 0; a < 3; ++a) f.mesh.triangles[t][a] = detail::read_value<int>(in, "triangle vertex");
    }
    for (std::size_t b = 0; b < nb; ++b) f.mesh.boundary_nodes.push_back(detail::read_value<int>(in, "boundary node"));
    for (std::size_t e = 0; e < ne; ++e) f.layout.nodes.push_back(detail::read_value<int>(in, "electrode node"));
    return f;
}

/// Header: `eitpixels <n_p> <cell_size> <origin_x> <origin_y> <region_vertices>`,
/// then region vertices `x y`, then per pixel
/// `i col row area cx cy n_vertices x0 y0 ... n_overlaps t0 a0 ...`.
inline void write_pixel_grid(std::ostream& out, const PixelGrid& grid) {
    out << "eitpixels " << grid.size() << ' ' << format_double(grid.cell_size) << ' ' << format_double(grid.origin.x())
        << ' ' << format_double(grid.origin.y()) << ' ' << grid.region.size() << '\n';
    for (const auto& p : grid.region) out << format_double(p.x()) << ' ' << format_double(p.y()) << '\n';
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const auto& px = grid.pixels[n];
        out << n << ' ' << px.col << ' ' << px.row << ' ' << format_double(px.area) << ' '
            << format_double(px.centroid.x()) << ' ' << format_double(px.centroid.y()) << ' ' << px.polygon.size();
        for (const auto& v : px.polygon) out << ' ' << format_double(v.x()) << ' ' << format_double(v.y());
        out << ' ' << grid.overlaps[n].size();
        for (const auto& o : grid.overlaps[n]) out << ' ' << o.triangle << ' ' << format_double(o.area);
        out << '\n';
    }
}

inline PixelGrid read_pixel_grid(std::istream& in) {
    detail::expect_token(in, "eitpixels");
    PixelGrid grid;
    const auto np = detail::read_value<std::size_t>(in, "pixel count");
    grid.cell_size = detail::read_value<double>(in, "cell size");
    grid.origin.x() = detail::read_value<double>(in, "origin x");
    grid.origin.y() = detail::read_value<double>(in, "origin y");
    const auto nr = detail::read_value<std::size_t>(in, "region vertex count");
    for (std::size_t i = 0; i < nr; ++i) {
        const double x = detail::read_value<double>(in, "region x");
        const double y = detail::read_value<double>(in, "region y");
        grid.region.emplace_back(x, y);
    }
    grid.pixels.resize(np);
    grid.overlaps.resize(np);
    for (std::size_t n = 0; n < np; ++n) {
        if (detail::read_value<std::size_t>(in, "pixel index") != n) throw std::runtime_error("pixel records out of order");
        auto& px = grid.pixels[n];
        px.col = detail::read_value<int>(in, "pixel col");
        px.row = detail::read_value<int>(in, "pixel row");
        px.area = detail::read_value<double>(in, "pixel area");
        px.centroid.x() = detail::read_value<double>(in, "centroid x");
        px.centroid.y() = detail::read_value<double>(in, "centroid y");
        const auto nv = detail::read_value<std::size_t>(in, "vertex count");
        for (std::size_t v = 0; v < nv; ++v) {
            const double x = detail::read_value<double>(in, "vertex x");
            const double y = detail::read_value<double>(in, "vertex y");
            px.polygon.emplace_back(x, y);
        }
        const auto no = detail::read_value<std::size_t>(in, "overlap count");
        for (std::size_t o = 0; o < no; ++o) {
            const int t = detail::read_value<int>(in, "overlap triangle");
            const double a = detail::read_value<double>(in, "overlap area");
            grid.overlaps[n].push_back({t, a});
        }
    }
    return grid;
}

/// Voltage or difference data: header
/// `# n_E <n> noise_level <level> seed <seed>`, then one matrix row per line.
inline void write_voltage_matrix(std::ostream& out, const Eigen::MatrixXd& v, double noise_level, std::uint64_t seed) {
    out << "# n_E " << v.rows() << " noise_level " << format_double(noise_level) << " seed " << seed << '\n';
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        for (Eigen::Index c = 0; c < v.cols(); ++c) out << (c ? " " : "") << format_double(v(r, c));
        out << '\n';
    }
}

inline DifferenceData read_voltage_matrix(std::istream& in) {
    detail::expect_token(in, "#");
    detail::expect_token(in, "n_E");
    const auto n = detail::read_value<Eigen::Index>(in, "n_E");
    detail::expect_token(in, "noise_level");
    const double level = detail::read_value<double>(in, "noise level");
    detail::expect_token(in, "seed");
    const auto seed = detail::read_value<std::uint64_t>(in, "seed");
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) m(r, c) = detail::read_value<double>(in, "matrix entry");
    return make_difference_data(std::move(m), level, seed);
}

/// Dense matrix: header `<rows> <cols>`, then row-major values.
inline void write_matrix_text(std::ostream& out, const Eigen::MatrixXd& m) {
    out << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_double(m(r, c));
        out << '\n';
    }
}

inline Eigen::MatrixXd read_matrix_text(std::istream& in) {
    const auto rows = detail::read_value<Eigen::Index>(in, "rows");
    const auto cols = detail::read_value<Eigen::Index>(in, "cols");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = detail::read_value<double>(in, "matrix entry");
    return m;
}

inline constexpr char sens_magic[5] = {'S', 'E', 'N', 'S', '1'};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::uint64_t bits = 0;
    if constexpr (std::is_same_v<T, double>)
        bits = std::bit_cast<std::uint64_t>(value);
    else
        bits = static_cast<std::uint64_t>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("truncated binary matrix");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    if constexpr (std::is_same_v<T, double>)
        return std::bit_cast<double>(bits);
    else
        return static_cast<T>(bits);
}

}  // namespace detail

/// Binary dense matrix: magic "SENS1", u64 rows, u64 cols, then row-major
/// little-endian IEEE-754 doubles.
inline void write_matrix_binary(std::ostream& out, const Eigen::MatrixXd& m) {
    out.write(sens_magic, sizeof sens_magic);
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) detail::put_le<double>(out, m(r, c));
}

inline Eigen::MatrixXd read_matrix_binary(std::istream& in) {
    char magic[sizeof sens_magic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, sens_magic))
        throw std::runtime_error("not a SENS1 matrix file");
    const auto rows = detail::get_le<std::uint64_t>(in);
    const auto cols = detail::get_le<std::uint64_t>(in);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = detail::get_le<double>(in);
    return m;
}

/// Per-pixel CSV: `pixel,x,y,value`.
inline void write_pixel_csv(std::ostream& out, const PixelGrid& grid, const Eigen::VectorXd& values,
                            const std::string& value_name = "value") {
    if (static_cast<std::size_t>(values.size()) != grid.size())
        throw std::invalid_argument("value vector does not match the pixel grid");
    out << "pixel,x,y," << value_name << '\n';
    for (std::size_t n = 0; n < grid.size(); ++n)
        out << n << ',' << format_double(grid.pixels[n].centroid.x()) << ',' << format_double(grid.pixels[n].centroid.y())
            << ',' << format_double(values[static_cast<Eigen::Index>(n)]) << '\n';
}

template <typename Writer>
void write_file(const std::string& path, Writer&& writer, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary | std::ios::out : std::ios::out);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    writer(out);
    if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace eitsfm::io

#endif  // EITSFM_IO_HPP
