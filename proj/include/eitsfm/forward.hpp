#ifndef EITSFM_FORWARD_HPP
#define EITSFM_FORWARD_HPP

#include "eitsfm/geometry.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace eitsfm {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Gradients of the three P1 hat functions on a triangle, one per row.
inline Eigen::Matrix<double, 3, 2> hat_gradients(const TriMesh& mesh, std::size_t t) {
    const auto& tri = mesh.triangles[t];
    const Point& p0 = mesh.nodes[tri[0]];
    const Point& p1 = mesh.nodes[tri[1]];
    const Point& p2 = mesh.nodes[tri[2]];
    const double twice_area = cross(p1 - p0, p2 - p0);
    Eigen::Matrix<double, 3, 2> g;
    // grad(phi_i) = rot90(opposite edge) / (2A)
    g.row(0) = Eigen::RowVector2d(p1.y() - p2.y(), p2.x() - p1.x()) / twice_area;
    g.row(1) = Eigen::RowVector2d(p2.y() - p0.y(), p0.x() - p2.x()) / twice_area;
    g.row(2) = Eigen::RowVector2d(p0.y() - p1.y(), p1.x() - p0.x()) / twice_area;
    return g;
}

inline Eigen::Matrix3d element_stiffness(const TriMesh& mesh, std::size_t t, double sigma) {
    const auto g = hat_gradients(mesh, t);
    return sigma * mesh.signed_area(t) * (g * g.transpose());
}

/// P1 Galerkin stiffness matrix of -div(sigma grad u) with natural boundary
/// conditions; sigma is constant per triangle.
inline SparseMatrix assemble_stiffness(const TriMesh& mesh, const Eigen::VectorXd& sigma) {
    if (static_cast<std::size_t>(sigma.size()) != mesh.triangle_count())
        throw std::invalid_argument("conductivity vector length does not match the triangle count");
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(9 * mesh.triangle_count());
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const double s = sigma[static_cast<Eigen::Index>(t)];
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::invalid_argument("conductivity must be positive (triangle " + std::to_string(t) + ")");
        const Eigen::Matrix3d local = element_stiffness(mesh, t, s);
        const auto& tri = mesh.triangles[t];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) entries.emplace_back(tri[a], tri[b], local(a, b));
    }
    const auto n = static_cast<Eigen::Index>(mesh.node_count());
    SparseMatrix k(n, n);
    k.setFromTriplets(entries.begin(), entries.end());
    return k;
}

/// Unit nodal load e(source) - e(sink).
inline Eigen::VectorXd dipole_load(std::size_t nodes, int source, int sink) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nodes));
    f[source] += 1.0;
    f[sink] -= 1.0;
    return f;
}

/// Factorizes the Neumann stiffness matrix once and solves compatible load
/// cases in the zero-mean gauge.
///
/// The constant kernel is removed by eliminating node 0, which makes the
/// reduced matrix SPD; the solution is then shifted to zero nodal mean. The
/// shifted vector is the unique zero-mean solution, independent of which node
/// was eliminated.
class NeumannSolver {
public:
    NeumannSolver(const TriMesh& mesh, const Eigen::VectorXd& sigma)
        : stiffness_(assemble_stiffness(mesh, sigma)), sigma_(sigma) {
        const Eigen::Index n = stiffness_.rows();
        reduced_ = stiffness_.bottomRightCorner(n - 1, n - 1);
        factor_.compute(reduced_);
        if (factor_.info() != Eigen::Success) throw std::runtime_error("stiffness factorization failed");
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& load) const {
        const Eigen::Index n = stiffness_.rows();
        if (load.size() != n) throw std::invalid_argument("load vector has the wrong length");
        const double scale = load.cwiseAbs().sum();
        if (std::abs(load.sum()) > 1e-12 * std::max(scale, 1e-300))
            throw std::runtime_error("incompatible Neumann load: loads must sum to zero");
        Eigen::VectorXd u(n);
        u[0] = 0.0;
        u.tail(n - 1) = factor_.solve(load.tail(n - 1));
        u.array() -= u.mean();
        return u;
    }

    const SparseMatrix& stiffness() const { return stiffness_; }
    const Eigen::VectorXd& sigma() const { return sigma_; }

private:
    SparseMatrix stiffness_;
    SparseMatrix reduced_;
    Eigen::VectorXd sigma_;
    Eigen::SimplicialLDLT<SparseMatrix> factor_;
};

/// Potential for pattern j: unit current in at electrode j, out at j+1.
inline Eigen::VectorXd solve_pattern(const NeumannSolver& solver, const ElectrodeLayout& layout, int j) {
    if (j < 0 || j >= layout.count()) throw std::out_of_range("pattern index out of range");
    const auto n = static_cast<std::size_t>(solver.stiffness().rows());
    return solver.solve(dipole_load(n, layout.nodes[j], layout.nodes[layout.next(j)]));
}

/// Nodal potentials of all adjacent drive patterns for one conductivity.
struct PotentialSet {
    std::vector<Eigen::VectorXd> potentials;

    int pattern_count() const { return static_cast<int>(potentials.size()); }
    const Eigen::VectorXd& operator[](int j) const { return potentials[static_cast<std::size_t>(j)]; }
};

inline PotentialSet solve_patterns(const NeumannSolver& solver, const ElectrodeLayout& layout) {
    PotentialSet set;
    for (int j = 0; j < layout.count(); ++j) set.potentials.push_back(solve_pattern(solver, layout, j));
    return set;
}

/// Per-triangle gradient of a nodal P1 field (rows = triangles).
inline Eigen::MatrixX2d field_gradients(const TriMesh& mesh, const Eigen::VectorXd& u) {
    Eigen::MatrixX2d g(static_cast<Eigen::Index>(mesh.triangle_count()), 2);
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto hg = hat_gradients(mesh, t);
        const auto& tri = mesh.triangles[t];
        g.row(static_cast<Eigen::Index>(t)) = u[tri[0]] * hg.row(0) + u[tri[1]] * hg.row(1) + u[tri[2]] * hg.row(2);
    }
    return g;
}

/// Adjacent-pair voltages. Column j holds the data of drive pattern j, so
/// V(k, j) = u_j(E_k) - u_j(E_{k+1}).
struct VoltageDataSet {
    Eigen::MatrixXd V;
    std::string phantom_id;

    int electrode_count() const { return static_cast<int>(V.rows()); }
};

inline VoltageDataSet measure_voltages(const PotentialSet& potentials, const ElectrodeLayout& layout,
                                       std::string phantom_id = {}) {
    const int ne = layout.count();
    if (potentials.pattern_count() != ne) throw std::invalid_argument("potential set does not match layout");
    VoltageDataSet data{Eigen::MatrixXd(ne, ne), std::move(phantom_id)};
    for (int j = 0; j < ne; ++j)
        for (int k = 0; k < ne; ++k)
            data.V(k, j) = potentials[j][layout.nodes[k]] - potentials[j][layout.nodes[layout.next(k)]];
    return data;
}

/// Reference-minus-measured difference data. `matrix` is the n_E x n_E data
/// matrix with column j = data of pattern j; `stacked` is its column-major
/// vectorization, the right-hand side of the linearized system.
struct DifferenceData {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd stacked;
    double noise_level = 0.0;
    std::uint64_t seed = 0;

    int electrode_count() const { return static_cast<int>(matrix.rows()); }
};

inline DifferenceData make_difference_data(Eigen::MatrixXd matrix, double noise_level = 0.0, std::uint64_t seed = 0) {
    DifferenceData d;
    d.stacked = Eigen::Map<const Eigen::VectorXd>(matrix.data(), matrix.size());
    d.matrix = std::move(matrix);
    d.noise_level = noise_level;
    d.seed = seed;
    return d;
}

inline DifferenceData difference_data(const VoltageDataSet& reference, const VoltageDataSet& measured) {
    if (reference.V.rows() != measured.V.rows() || reference.V.cols() != measured.V.cols())
        throw std::invalid_argument("voltage data sets have mismatched shapes");
    return make_difference_data(reference.V - measured.V);
}

/// Adds uniform noise level * max|dV| * xi, xi ~ U[-1, 1], to every entry.
/// Draws use mt19937_64 with an explicit 53-bit mapping so the output is
/// reproducible across standard library implementations.
inline DifferenceData add_noise(const DifferenceData& data, double level, std::uint64_t seed) {
    if (!(level >= 0.0)) throw std::invalid_argument("noise level must be non-negative");
    if (level == 0.0) {
        DifferenceData copy = data;
        copy.seed = seed;
        return copy;
    }
    const double amplitude = level * data.stacked.cwiseAbs().maxCoeff();
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd noisy = data.matrix;
    for (Eigen::Index c = 0; c < noisy.cols(); ++c)
        for (Eigen::Index r = 0; r < noisy.rows(); ++r) {
            const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            noisy(r, c) += amplitude * (2.0 * unit - 1.0);
        }
    return make_difference_data(std::move(noisy), level, seed);
}

}  // namespace eitsfm

#endif  // EITSFM_FORWARD_HPP
