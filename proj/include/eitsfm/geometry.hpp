#ifndef EITSFM_GEOMETRY_HPP
#define EITSFM_GEOMETRY_HPP

#include "eitsfm/polygon.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace eitsfm {

using Triangle = std::array<int, 3>;

/// Conforming triangulation of a planar domain. Triangles are counterclockwise
/// and `boundary_nodes` traces the outer boundary counterclockwise.
struct TriMesh {
    std::vector<Point> nodes;
    std::vector<Triangle> triangles;
    std::vector<int> boundary_nodes;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t triangle_count() const { return triangles.size(); }

    double signed_area(std::size_t t) const {
        const auto& tri = triangles[t];
        return 0.5 * cross(nodes[tri[1]] - nodes[tri[0]], nodes[tri[2]] - nodes[tri[0]]);
    }

    Point centroid(std::size_t t) const {
        const auto& tri = triangles[t];
        return (nodes[tri[0]] + nodes[tri[1]] + nodes[tri[2]]) / 3.0;
    }

    Polygon triangle_polygon(std::size_t t) const {
        const auto& tri = triangles[t];
        return {nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]};
    }

    Polygon boundary_polygon() const {
        Polygon poly;
        poly.reserve(boundary_nodes.size());
        for (int b : boundary_nodes) poly.push_back(nodes[b]);
        return poly;
    }

    double total_area() const {
        double sum = 0.0;
        for (std::size_t t = 0; t < triangles.size(); ++t) sum += signed_area(t);
        return sum;
    }

    double mean_boundary_edge() const {
        const std::size_t n = boundary_nodes.size();
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            sum += (nodes[boundary_nodes[(i + 1) % n]] - nodes[boundary_nodes[i]]).norm();
        return sum / static_cast<double>(n);
    }
};

/// Throws std::logic_error naming the first violated mesh invariant.
inline void validate_mesh(const TriMesh& mesh) {
    const int n = static_cast<int>(mesh.nodes.size());
    std::map<std::pair<int, int>, int> edge_use;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int v : tri)
            if (v < 0 || v >= n)
                throw std::logic_error("triangle " + std::to_string(t) + " references a missing node");
        if (!(mesh.signed_area(t) > 0.0))
            throw std::logic_error("triangle " + std::to_string(t) + " has non-positive signed area");
        for (int e = 0; e < 3; ++e) {
            const int a = tri[e];
            const int b = tri[(e + 1) % 3];
            ++edge_use[{std::min(a, b), std::max(a, b)}];
        }
    }
    std::size_t boundary_edges = 0;
    for (const auto& [edge, uses] : edge_use) {
        if (uses > 2)
            throw std::logic_error("edge (" + std::to_string(edge.first) + "," +
                                   std::to_string(edge.second) + ") shared by more than 2 triangles");
        if (uses == 1) ++boundary_edges;
    }
    const auto& loop = mesh.boundary_nodes;
    if (loop.size() < 3) throw std::logic_error("boundary loop has fewer than 3 nodes");
    if (loop.size() != boundary_edges)
        throw std::logic_error("boundary loop length does not match the number of boundary edges");
    std::vector<char> seen(mesh.nodes.size(), 0);
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const int a = loop[i];
        const int b = loop[(i + 1) % loop.size()];
        if (a < 0 || a >= n || seen[a]) throw std::logic_error("boundary loop is not a simple cycle");
        seen[a] = 1;
        const auto it = edge_use.find({std::min(a, b), std::max(a, b)});
        if (it == edge_use.end() || it->second != 1)
            throw std::logic_error("boundary loop edge does not belong to exactly one triangle");
    }
    if (!(eitsfm::signed_area(mesh.boundary_polygon()) > 0.0))
        throw std::logic_error("boundary loop is not counterclockwise");
}

using RadiusFunction = std::function<double(double)>;

namespace detail {

/// Maps a normalized boundary arc-length parameter s in [0,1) to the polar angle
/// of a star-shaped curve r(theta), by inverting a sampled arc-length table.
class ArcLengthParametrization {
public:
    explicit ArcLengthParametrization(const RadiusFunction& radius, int samples = 8192)
        : angles_(samples + 1), arc_(samples + 1) {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        Point prev;
        for (int i = 0; i <= samples; ++i) {
            const double theta = two_pi * i / samples;
            const double r = radius(theta);
            if (!(r > 0.0) || !std::isfinite(r))
                throw std::invalid_argument("boundary radius function must be strictly positive and finite");
            const Point p(r * std::cos(theta), r * std::sin(theta));
            angles_[i] = theta;
            arc_[i] = i == 0 ? 0.0 : arc_[i - 1] + (p - prev).norm();
            prev = p;
        }
        const double r0 = radius(0.0);
        const double r1 = radius(two_pi);
        if (std::abs(r0 - r1) > 1e-9 * std::max(1.0, r0))
            throw std::invalid_argument("boundary radius function must be 2*pi periodic");
        length_ = arc_.back();
    }

    double angle(double s) const {
        const double target = s * length_;
        const auto it = std::lower_bound(arc_.begin(), arc_.end(), target);
        if (it == arc_.begin()) return 0.0;
        if (it == arc_.end()) return angles_.back();
        const std::size_t i = static_cast<std::size_t>(it - arc_.begin());
        const double f = (target - arc_[i - 1]) / (arc_[i] - arc_[i - 1]);
        return angles_[i - 1] + f * (angles_[i] - angles_[i - 1]);
    }

    double length() const { return length_; }

private:
    std::vector<double> angles_;
    std::vector<double> arc_;
    double length_ = 0.0;
};

}  // namespace detail

/// Ring-structured triangulation of the star-shaped domain
/// {rho * r(theta) * (cos theta, sin theta) : 0 <= rho <= 1}.
///
/// Ring k (k = 1..m) carries base*k nodes spaced uniformly in boundary arc
/// length, so the mesh has base*m^2 triangles and 1 + base*m(m+1)/2 nodes.
/// Adjacent rings are stitched by merging their nodes in parameter order.
inline TriMesh build_star_mesh(const RadiusFunction& radius, int target_elements) {
    if (target_elements < 16) throw std::invalid_argument("target_elements must be at least 16");
    const detail::ArcLengthParametrization param(radius);

    const int rings = std::max(1, static_cast<int>(std::lround(std::sqrt(target_elements / 6.0))));
    const int base = std::max(3, static_cast<int>(std::lround(static_cast<double>(target_elements) / (rings * rings))));

    TriMesh mesh;
    mesh.nodes.emplace_back(0.0, 0.0);
    std::vector<int> ring_start(rings + 1, 0);
    std::vector<int> ring_size(rings + 1, 1);
    for (int k = 1; k <= rings; ++k) {
        ring_start[k] = static_cast<int>(mesh.nodes.size());
        ring_size[k] = base * k;
        const double rho = static_cast<double>(k) / rings;
        for (int i = 0; i < ring_size[k]; ++i) {
            const double theta = param.angle(static_cast<double>(i) / ring_size[k]);
            const double r = rho * radius(theta);
            mesh.nodes.emplace_back(r * std::cos(theta), r * std::sin(theta));
        }
    }

    // Innermost ring: fan around the center.
    for (int i = 0; i < ring_size[1]; ++i)
        mesh.triangles.push_back({0, ring_start[1] + i, ring_start[1] + (i + 1) % ring_size[1]});

    for (int k = 2; k <= rings; ++k) {
        const int n_in = ring_size[k - 1];
        const int n_out = ring_size[k];
        const auto in = [&](int i) { return ring_start[k - 1] + i % n_in; };
        const auto out = [&](int j) { return ring_start[k] + j % n_out; };
        int i = 0;
        int j = 0;
        while (i < n_in || j < n_out) {
            const double next_in = static_cast<double>(i + 1) / n_in;
            const double next_out = static_cast<double>(j + 1) / n_out;
            const bool advance_out = i == n_in || (j < n_out && next_out <= next_in);
            if (advance_out) {
                mesh.triangles.push_back({in(i), out(j), out(j + 1)});
                ++j;
            } else {
                mesh.triangles.push_back({in(i), out(j), in(i + 1)});
                ++i;
            }
        }
    }

    for (int i = 0; i < ring_size[rings]; ++i) mesh.boundary_nodes.push_back(ring_start[rings] + i);
    return mesh;
}

inline TriMesh build_disc_mesh(double radius, int target_elements) {
    if (!(radius > 0.0)) throw std::invalid_argument("disc radius must be positive");
    return build_star_mesh([radius](double) { return radius; }, target_elements);
}

/// Elongated default domain used for the non-circular experiments.
inline RadiusFunction default_deformation() {
    return [](double theta) { return 1.0 + 0.15 * std::cos(2.0 * theta); };
}

inline TriMesh build_deformed_mesh(const RadiusFunction& radius, int target_elements) {
    return build_star_mesh(radius, target_elements);
}

/// Point electrodes on boundary nodes, counterclockwise; pattern j drives
/// current from electrode j to electrode (j+1) mod n.
struct ElectrodeLayout {
    std::vector<int> nodes;

    int count() const { return static_cast<int>(nodes.size()); }
    int next(int k) const { return (k + 1) % count(); }
};

/// Picks the boundary nodes nearest (in arc length) to n equispaced arc-length
/// targets, starting at the first boundary node.
inline ElectrodeLayout place_electrodes(const TriMesh& mesh, int n_electrodes) {
    const auto& loop = mesh.boundary_nodes;
    const int nb = static_cast<int>(loop.size());
    if (n_electrodes < 2) throw std::invalid_argument("need at least 2 electrodes");
    if (n_electrodes > nb)
        throw std::invalid_argument("more electrodes (" + std::to_string(n_electrodes) +
                                    ") than boundary nodes (" + std::to_string(nb) + ")");
    std::vector<double> arc(nb + 1, 0.0);
    for (int i = 0; i < nb; ++i)
        arc[i + 1] = arc[i] + (mesh.nodes[loop[(i + 1) % nb]] - mesh.nodes[loop[i]]).norm();
    const double perimeter = arc[nb];

    ElectrodeLayout layout;
    std::vector<char> used(nb, 0);
    for (int k = 0; k < n_electrodes; ++k) {
        const double target = perimeter * k / n_electrodes;
        int best = 0;
        double best_gap = std::numeric_limits<double>::infinity();
        for (int i = 0; i < nb; ++i) {
            double gap = std::abs(arc[i] - target);
            gap = std::min(gap, perimeter - gap);
            if (gap < best_gap) {
                best_gap = gap;
                best = i;
            }
        }
        if (used[best])
            throw std::invalid_argument("electrode targets " + std::to_string(k) +
                                        " snapped to an already used boundary node");
        used[best] = 1;
        layout.nodes.push_back(loop[best]);
    }
    return layout;
}

struct DiscShape {
    Point center;
    double radius;
};

struct PolygonShape {
    Polygon vertices;  // counterclockwise
};

struct Anomaly {
    std::variant<DiscShape, PolygonShape> shape;
    double contrast = 1.0;

    bool contains(const Point& p) const {
        return std::visit(
            [&](const auto& s) -> bool {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, DiscShape>)
                    return (p - s.center).norm() < s.radius;
                else
                    return eitsfm::contains(s.vertices, p);
            },
            shape);
    }

    Point center() const {
        return std::visit(
            [](const auto& s) -> Point {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, DiscShape>)
                    return s.center;
                else
                    return eitsfm::centroid(s.vertices);
            },
            shape);
    }

    /// Smallest distance from the anomaly closure to the given boundary polygon,
    /// negative when the anomaly is not inside it.
    double clearance(std::span<const Point> boundary) const {
        return std::visit(
            [&](const auto& s) -> double {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, DiscShape>) {
                    if (!eitsfm::contains(boundary, s.center)) return -1.0;
                    return distance_to_boundary(boundary, s.center) - s.radius;
                } else {
                    double best = std::numeric_limits<double>::infinity();
                    for (const auto& v : s.vertices) {
                        if (!eitsfm::contains(boundary, v)) return -1.0;
                        best = std::min(best, distance_to_boundary(boundary, v));
                    }
                    for (const auto& b : boundary)
                        if (eitsfm::contains(s.vertices, b)) return -1.0;
                    return best;
                }
            },
            shape);
    }
};

/// Reference conductivity plus interior anomalies; sigma = sigma0 + sum of
/// contrasts of the anomalies containing a point.
struct Phantom {
    std::string id = "phantom";
    double sigma0 = 1.0;
    std::vector<Anomaly> anomalies;
    double interior_margin = 0.05;
};

inline void validate_phantom(const Phantom& phantom, const TriMesh& mesh) {
    if (!(phantom.sigma0 > 0.0)) throw std::invalid_argument("reference conductivity must be positive");
    if (!(phantom.interior_margin > 0.0)) throw std::invalid_argument("interior margin must be positive");
    const Polygon boundary = mesh.boundary_polygon();
    for (std::size_t a = 0; a < phantom.anomalies.size(); ++a) {
        const auto& anomaly = phantom.anomalies[a];
        if (!std::isfinite(anomaly.contrast))
            throw std::invalid_argument("anomaly " + std::to_string(a) + " has a non-finite contrast");
        if (std::holds_alternative<DiscShape>(anomaly.shape) &&
            !(std::get<DiscShape>(anomaly.shape).radius > 0.0))
            throw std::invalid_argument("anomaly " + std::to_string(a) + " has a non-positive radius");
        if (anomaly.clearance(boundary) < phantom.interior_margin)
            throw std::invalid_argument("anomaly " + std::to_string(a) +
                                        " is closer to the boundary than the interior margin");
    }
}

/// Per-triangle conductivity by centroid membership.
inline Eigen::VectorXd rasterize_phantom(const Phantom& phantom, const TriMesh& mesh) {
    validate_phantom(phantom, mesh);
    Eigen::VectorXd sigma = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(mesh.triangle_count()), phantom.sigma0);
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const Point c = mesh.centroid(t);
        for (const auto& anomaly : phantom.anomalies)
            if (anomaly.contains(c)) sigma[static_cast<Eigen::Index>(t)] += anomaly.contrast;
        if (!(sigma[static_cast<Eigen::Index>(t)] > 0.0))
            throw std::invalid_argument("phantom yields non-positive conductivity in triangle " + std::to_string(t));
    }
    return sigma;
}

}  // namespace eitsfm

#endif  // EITSFM_GEOMETRY_HPP
