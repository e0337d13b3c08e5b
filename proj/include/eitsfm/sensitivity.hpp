#ifndef EITSFM_SENSITIVITY_HPP
#define EITSFM_SENSITIVITY_HPP

#include "eitsfm/forward.hpp"
#include "eitsfm/geometry.hpp"
#include "eitsfm/pixel_grid.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace eitsfm {

/// Linearized sensitivity matrix, n_E^2 x n_p. Row j*n_E + k, column n holds
/// the integral over pixel n of grad(u_j) . grad(u_k) for the reference
/// potentials, so block j (rows j*n_E .. j*n_E + n_E - 1) maps a pixel
/// perturbation to the difference data of drive pattern j.
struct SensitivityMatrix {
    Eigen::MatrixXd S;
    int electrodes = 0;

    Eigen::Index pixel_count() const { return S.cols(); }

    auto block(int j) const { return S.middleRows(static_cast<Eigen::Index>(j) * electrodes, electrodes); }

    /// Column n of block j: the boundary voltages of the pixel dipole field.
    Eigen::VectorXd column(int j, Eigen::Index n) const { return block(j).col(n); }
};

/// Per-pattern triangle gradients, one n_T x 2 matrix per pattern.
inline std::vector<Eigen::MatrixX2d> pattern_gradients(const TriMesh& mesh, const PotentialSet& potentials) {
    std::vector<Eigen::MatrixX2d> grads;
    grads.reserve(potentials.potentials.size());
    for (const auto& u : potentials.potentials) grads.push_back(field_gradients(mesh, u));
    return grads;
}

/// Assembles S from reference potentials using exact pixel/triangle overlap
/// areas; the P1 gradients are constant on each triangle so the pixel
/// integrals carry no quadrature error.
inline SensitivityMatrix assemble_sensitivity(const TriMesh& mesh, const PotentialSet& potentials0,
                                              const PixelGrid& grid) {
    const int ne = potentials0.pattern_count();
    if (ne == 0) throw std::invalid_argument("no reference potentials");
    for (const auto& u : potentials0.potentials)
        if (static_cast<std::size_t>(u.size()) != mesh.node_count())
            throw std::invalid_argument("reference potentials do not match the mesh");
    for (const auto& cell : grid.overlaps)
        for (const auto& o : cell)
            if (o.triangle < 0 || static_cast<std::size_t>(o.triangle) >= mesh.triangle_count())
                throw std::invalid_argument("pixel grid references triangles outside the mesh");

    const auto grads = pattern_gradients(mesh, potentials0);
    SensitivityMatrix sens{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ne) * ne, static_cast<Eigen::Index>(grid.size())), ne};
    Eigen::MatrixXd g(2, ne);
    for (std::size_t n = 0; n < grid.size(); ++n) {
        Eigen::MatrixXd cross_power = Eigen::MatrixXd::Zero(ne, ne);
        for (const auto& o : grid.overlaps[n]) {
            for (int j = 0; j < ne; ++j) g.col(j) = grads[static_cast<std::size_t>(j)].row(o.triangle).transpose();
            cross_power.noalias() += o.area * (g.transpose() * g);
        }
        sens.S.col(static_cast<Eigen::Index>(n)) = Eigen::Map<const Eigen::VectorXd>(cross_power.data(), cross_power.size());
    }
    return sens;
}

/// Right-hand side v -> integral over pixel n of grad(u_j) . grad(v), as a
/// nodal load vector.
inline Eigen::VectorXd pixel_dipole_load(const TriMesh& mesh, const PixelGrid& grid, const Eigen::MatrixX2d& grad_uj,
                                         Eigen::Index n) {
    if (n < 0 || static_cast<std::size_t>(n) >= grid.size())
        throw std::out_of_range("pixel " + std::to_string(n) + " is not part of the reconstruction region");
    Eigen::VectorXd load = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.node_count()));
    for (const auto& o : grid.overlaps[static_cast<std::size_t>(n)]) {
        const auto hg = hat_gradients(mesh, static_cast<std::size_t>(o.triangle));
        const Eigen::Vector3d contrib = o.area * (hg * grad_uj.row(o.triangle).transpose());
        const auto& tri = mesh.triangles[static_cast<std::size_t>(o.triangle)];
        for (int a = 0; a < 3; ++a) load[tri[a]] += contrib[a];
    }
    return load;
}

/// Boundary voltages of the pixel dipole field phi solving
/// div(sigma0 grad phi) = div(chi_q grad u_j) with homogeneous Neumann data.
/// `reference` must be factorized for sigma0 on `mesh`.
inline Eigen::VectorXd pixel_dipole_voltages(const TriMesh& mesh, const NeumannSolver& reference,
                                             const ElectrodeLayout& layout, const PixelGrid& grid,
                                             const Eigen::VectorXd& uj0, Eigen::Index n) {
    const Eigen::VectorXd load = pixel_dipole_load(mesh, grid, field_gradients(mesh, uj0), n);
    const Eigen::VectorXd phi = reference.solve(load);
    const int ne = layout.count();
    Eigen::VectorXd out(ne);
    for (int k = 0; k < ne; ++k) out[k] = phi[layout.nodes[k]] - phi[layout.nodes[layout.next(k)]];
    return out;
}

inline Eigen::VectorXd pixel_dipole_voltages(const TriMesh& mesh, const ElectrodeLayout& layout,
                                             const Eigen::VectorXd& sigma0, const PixelGrid& grid, int j,
                                             Eigen::Index n) {
    const NeumannSolver reference(mesh, sigma0);
    return pixel_dipole_voltages(mesh, reference, layout, grid, solve_pattern(reference, layout, j), n);
}

}  // namespace eitsfm

#endif  // EITSFM_SENSITIVITY_HPP
