#ifndef EITSFM_PIXEL_GRID_HPP
#define EITSFM_PIXEL_GRID_HPP

#include "eitsfm/geometry.hpp"
#include "eitsfm/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace eitsfm {

/// A reconstruction cell: one square lattice cell clipped to the region.
struct Pixel {
    Polygon polygon;
    int col = 0;
    int row = 0;
    double area = 0.0;
    Point centroid = Point::Zero();
};

struct TriangleOverlap {
    int triangle = 0;
    double area = 0.0;
};

/// Square lattice clipped to the shrunken domain, with exact per-pixel
/// overlap areas against the forward mesh triangles.
struct PixelGrid {
    double cell_size = 0.0;
    Point origin = Point::Zero();  // center of lattice cell (0, 0)
    Polygon region;                // counterclockwise boundary of the pixelized region
    std::vector<Pixel> pixels;
    std::vector<std::vector<TriangleOverlap>> overlaps;

    std::size_t size() const { return pixels.size(); }

    double region_area() const { return eitsfm::area(region); }

    Polygon cell_square(int col, int row) const {
        const Point lo = origin + cell_size * Point(col - 0.5, row - 0.5);
        const Point hi = origin + cell_size * Point(col + 0.5, row + 0.5);
        return axis_aligned_box(lo, hi);
    }
};

/// Offsets a counterclockwise polygon inward by `margin` using mitered vertex
/// normals. Throws when the offset collapses or turns inside out.
inline Polygon shrink_polygon(const Polygon& boundary, double margin) {
    const std::size_t n = boundary.size();
    if (n < 3) throw std::invalid_argument("boundary polygon needs at least 3 vertices");
    if (margin < 0.0) throw std::invalid_argument("boundary margin must be non-negative");
    const auto inward = [](const Point& a, const Point& b) {
        const Point d = (b - a).normalized();
        return Point(-d.y(), d.x());
    };
    Polygon shrunk(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Point& prev = boundary[(i + n - 1) % n];
        const Point& cur = boundary[i];
        const Point& next = boundary[(i + 1) % n];
        const Point n1 = inward(prev, cur);
        const Point n2 = inward(cur, next);
        const double denom = 1.0 + n1.dot(n2);
        if (denom < 1e-6) throw std::invalid_argument("boundary has a cusp; cannot offset it");
        shrunk[i] = cur + margin * (n1 + n2) / denom;
    }
    const double empty_region = 1e-12 * eitsfm::area(boundary);
    bool valid = eitsfm::signed_area(shrunk) > empty_region;
    for (std::size_t i = 0; valid && i < n; ++i) {
        const Point before = boundary[(i + 1) % n] - boundary[i];
        const Point after = shrunk[(i + 1) % n] - shrunk[i];
        if (before.dot(after) <= 0.0) valid = false;
        if (!eitsfm::contains(boundary, shrunk[i]) && margin > 0.0) valid = false;
    }
    if (!valid) throw std::invalid_argument("boundary margin leaves an empty reconstruction region");
    return shrunk;
}

namespace detail {

struct LatticeExtent {
    int col_half = 0;
    int row_half = 0;
};

inline LatticeExtent lattice_extent(const Polygon& region, const Point& origin, double h) {
    double half_w = 0.0;
    double half_h = 0.0;
    for (const auto& p : region) {
        half_w = std::max(half_w, std::abs(p.x() - origin.x()));
        half_h = std::max(half_h, std::abs(p.y() - origin.y()));
    }
    return {static_cast<int>(std::ceil(half_w / h - 0.5)), static_cast<int>(std::ceil(half_h / h - 0.5))};
}

inline Point bbox_center(const Polygon& poly) {
    Point lo = poly.front();
    Point hi = poly.front();
    for (const auto& p : poly) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return 0.5 * (lo + hi);
}

inline std::vector<Pixel> clip_lattice(const Polygon& region, const Point& origin, double h) {
    const LatticeExtent ext = lattice_extent(region, origin, h);
    const double min_area = 1e-12 * h * h;
    std::vector<Pixel> cells;
    for (int row = -ext.row_half; row <= ext.row_half; ++row) {
        for (int col = -ext.col_half; col <= ext.col_half; ++col) {
            const Point lo = origin + h * Point(col - 0.5, row - 0.5);
            const Point hi = origin + h * Point(col + 0.5, row + 0.5);
            Polygon clipped = clip_convex(region, axis_aligned_box(lo, hi));
            const double a = eitsfm::area(clipped);
            if (a <= min_area) continue;
            Pixel px;
            px.centroid = eitsfm::centroid(clipped);
            px.polygon = std::move(clipped);
            px.col = col;
            px.row = row;
            px.area = a;
            cells.push_back(std::move(px));
        }
    }
    return cells;
}

/// Uniform bucket index over triangle bounding boxes.
class TriangleBins {
public:
    TriangleBins(const TriMesh& mesh, double bin_size) : mesh_(mesh), size_(bin_size) {
        lo_ = mesh.nodes.front();
        Point hi = mesh.nodes.front();
        for (const auto& p : mesh.nodes) {
            lo_ = lo_.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        nx_ = std::max(1, static_cast<int>(std::ceil((hi.x() - lo_.x()) / size_)) + 1);
        ny_ = std::max(1, static_cast<int>(std::ceil((hi.y() - lo_.y()) / size_)) + 1);
        bins_.resize(static_cast<std::size_t>(nx_) * ny_);
        for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
            const auto [a, b] = bounds(mesh.triangle_polygon(t));
            for (int y = b.row_lo; y <= b.row_hi; ++y)
                for (int x = a.col_lo; x <= a.col_hi; ++x) bins_[y * nx_ + x].push_back(static_cast<int>(t));
        }
    }

    std::vector<int> candidates(const Polygon& poly) const {
        const auto [a, b] = bounds(poly);
        std::vector<int> out;
        for (int y = b.row_lo; y <= b.row_hi; ++y)
            for (int x = a.col_lo; x <= a.col_hi; ++x)
                out.insert(out.end(), bins_[y * nx_ + x].begin(), bins_[y * nx_ + x].end());
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

private:
    struct ColRange {
        int col_lo, col_hi;
    };
    struct RowRange {
        int row_lo, row_hi;
    };

    std::pair<ColRange, RowRange> bounds(const Polygon& poly) const {
        Point lo = poly.front();
        Point hi = poly.front();
        for (const auto& p : poly) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const auto clamp_x = [&](double v) { return std::clamp(static_cast<int>(std::floor((v - lo_.x()) / size_)), 0, nx_ - 1); };
        const auto clamp_y = [&](double v) { return std::clamp(static_cast<int>(std::floor((v - lo_.y()) / size_)), 0, ny_ - 1); };
        return {{clamp_x(lo.x()), clamp_x(hi.x())}, {clamp_y(lo.y()), clamp_y(hi.y())}};
    }

    const TriMesh& mesh_;
    double size_;
    Point lo_;
    int nx_ = 1;
    int ny_ = 1;
    std::vector<std::vector<int>> bins_;
};

}  // namespace detail

/// Builds the reconstruction pixel grid: the domain boundary is shrunk by
/// `boundary_margin`, and the lattice spacing is chosen so that the number of
/// nonempty clipped cells is as close as possible to `target_np`.
inline PixelGrid build_pixel_grid(const TriMesh& mesh, int target_np, double boundary_margin) {
    if (target_np < 1) throw std::invalid_argument("target pixel count must be positive");
    PixelGrid grid;
    grid.region = shrink_polygon(mesh.boundary_polygon(), boundary_margin);
    grid.origin = detail::bbox_center(grid.region);

    const double region_area = eitsfm::area(grid.region);
    double best_h = 0.0;
    if (target_np == 1) {
        double half = 0.0;
        for (const auto& p : grid.region) half = std::max(half, (p - grid.origin).cwiseAbs().maxCoeff());
        best_h = 2.0 * half * (1.0 + 1e-9);
    } else {
        const double h0 = std::sqrt(region_area / target_np);
        long best_gap = -1;
        constexpr int steps = 40;
        for (int s = 0; s <= steps; ++s) {
            // Scan outward from h0 so ties resolve toward the nominal spacing.
            const int offset = (s % 2 == 0) ? s / 2 : -(s + 1) / 2;
            const double h = h0 * std::pow(1.25, static_cast<double>(offset) / (steps / 2));
            const long count = static_cast<long>(detail::clip_lattice(grid.region, grid.origin, h).size());
            const long gap = std::labs(count - target_np);
            if (best_gap < 0 || gap < best_gap) {
                best_gap = gap;
                best_h = h;
            }
        }
    }
    grid.cell_size = best_h;
    grid.pixels = detail::clip_lattice(grid.region, grid.origin, best_h);
    if (grid.pixels.empty()) throw std::invalid_argument("pixel grid is empty");

    const detail::TriangleBins bins(mesh, std::max(best_h, 2.0 * mesh.mean_boundary_edge()));
    grid.overlaps.resize(grid.pixels.size());
    for (std::size_t n = 0; n < grid.pixels.size(); ++n) {
        const auto& px = grid.pixels[n];
        for (int t : bins.candidates(px.polygon)) {
            const double a = overlap_area(px.polygon, mesh.triangle_polygon(static_cast<std::size_t>(t)));
            if (a > 0.0) grid.overlaps[n].push_back({t, a});
        }
    }
    return grid;
}

/// Largest relative mismatch between a pixel's area and the sum of its
/// triangle overlaps.
inline double max_overlap_defect(const PixelGrid& grid) {
    double worst = 0.0;
    for (std::size_t n = 0; n < grid.size(); ++n) {
        double sum = 0.0;
        for (const auto& o : grid.overlaps[n]) sum += o.area;
        worst = std::max(worst, std::abs(sum - grid.pixels[n].area) / grid.pixels[n].area);
    }
    return worst;
}

}  // namespace eitsfm

#endif  // EITSFM_PIXEL_GRID_HPP
