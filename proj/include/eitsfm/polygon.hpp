#ifndef EITSFM_POLYGON_HPP
#define EITSFM_POLYGON_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace eitsfm {

using Point = Eigen::Vector2d;
using Polygon = std::vector<Point>;

inline double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Signed area (shoelace); positive for counterclockwise vertex order.
inline double signed_area(std::span<const Point> poly) {
    const std::size_t n = poly.size();
    if (n < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) twice += cross(poly[i], poly[(i + 1) % n]);
    return 0.5 * twice;
}

inline double area(std::span<const Point> poly) { return std::abs(signed_area(poly)); }

/// Area-weighted centroid. Falls back to the vertex mean for degenerate input.
inline Point centroid(std::span<const Point> poly) {
    const std::size_t n = poly.size();
    Point c = Point::Zero();
    if (n == 0) return c;
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % n];
        const double w = cross(p, q);
        twice += w;
        c += w * (p + q);
    }
    if (std::abs(twice) < 1e-300) {
        c.setZero();
        for (const auto& p : poly) c += p;
        return c / static_cast<double>(n);
    }
    return c / (3.0 * twice);
}

/// Sutherland-Hodgman clipping of an arbitrary simple subject polygon against a
/// convex, counterclockwise clip polygon. The returned polygon may contain
/// degenerate zero-width bridges when the subject is non-convex; its area is
/// exact regardless.
inline Polygon clip_convex(std::span<const Point> subject, std::span<const Point> clip) {
    Polygon output(subject.begin(), subject.end());
    const std::size_t m = clip.size();
    for (std::size_t e = 0; e < m && !output.empty(); ++e) {
        const Point& a = clip[e];
        const Point& b = clip[(e + 1) % m];
        const Point edge = b - a;
        const Polygon input = std::move(output);
        output.clear();
        const std::size_t n = input.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point& p = input[i];
            const Point& q = input[(i + 1) % n];
            const double sp = cross(edge, p - a);
            const double sq = cross(edge, q - a);
            const bool p_in = sp >= 0.0;
            const bool q_in = sq >= 0.0;
            if (p_in) output.push_back(p);
            if (p_in != q_in) {
                const double t = sp / (sp - sq);
                output.push_back(p + t * (q - p));
            }
        }
    }
    if (output.size() < 3) output.clear();
    return output;
}

inline double overlap_area(std::span<const Point> subject, std::span<const Point> convex_clip) {
    const Polygon clipped = clip_convex(subject, convex_clip);
    return area(clipped);
}

/// Even-odd point containment test.
inline bool contains(std::span<const Point> poly, const Point& p) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = poly[i];
        const Point& b = poly[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (p.x() < x) inside = !inside;
        }
    }
    return inside;
}

inline double distance_to_segment(const Point& p, const Point& a, const Point& b) {
    const Point ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

/// Distance from a point to the closed polyline boundary of a polygon.
inline double distance_to_boundary(std::span<const Point> poly, const Point& p) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i)
        best = std::min(best, distance_to_segment(p, poly[i], poly[(i + 1) % n]));
    return best;
}

inline Polygon axis_aligned_box(const Point& lo, const Point& hi) {
    return {lo, Point(hi.x(), lo.y()), hi, Point(lo.x(), hi.y())};
}

}  // namespace eitsfm

#endif  // EITSFM_POLYGON_HPP
