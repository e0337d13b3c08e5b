#include "eitsfm/forward.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace eitsfm;

namespace {

struct Setup {
    TriMesh mesh = build_disc_mesh(1.0, 1200);
    ElectrodeLayout layout = place_electrodes(mesh, 16);
    Eigen::VectorXd sigma0 = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(mesh.triangle_count()));
};

const Setup& setup() {
    static const Setup s;
    return s;
}

Eigen::VectorXd disc_phantom(const TriMesh& mesh, Point c, double r, double contrast) {
    Phantom ph;
    ph.anomalies.push_back(Anomaly{DiscShape{c, r}, contrast});
    return rasterize_phantom(ph, mesh);
}

DifferenceData simulate(const Setup& s, const Eigen::VectorXd& sigma) {
    const NeumannSolver ref(s.mesh, s.sigma0), meas(s.mesh, sigma);
    return difference_data(measure_voltages(solve_patterns(ref, s.layout), s.layout),
                           measure_voltages(solve_patterns(meas, s.layout), s.layout));
}

}  // namespace

TEST(Stiffness, RowSumsVanish) {
    const auto& s = setup();
    const SparseMatrix k = assemble_stiffness(s.mesh, disc_phantom(s.mesh, Point(0.2, 0.1), 0.3, 2.0));
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(k.cols());
    EXPECT_LT((k * ones).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((SparseMatrix(k.transpose()) - k).norm(), 1e-13);
}

TEST(Stiffness, ReferenceTriangle) {
    TriMesh mesh;
    mesh.nodes = {Point(0, 0), Point(1, 0), Point(0, 1)};
    mesh.triangles = {{0, 1, 2}};
    Eigen::Matrix3d expected;
    expected << 1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5;
    EXPECT_LT((element_stiffness(mesh, 0, 1.0) - expected).cwiseAbs().maxCoeff(), 1e-15);
    const Eigen::MatrixXd k = Eigen::MatrixXd(assemble_stiffness(mesh, Eigen::VectorXd::Constant(1, 3.0)));
    EXPECT_LT((k - 3.0 * expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Stiffness, RejectsNonPositiveSigma) {
    const auto& s = setup();
    Eigen::VectorXd sigma = s.sigma0;
    sigma[5] = 0.0;
    EXPECT_THROW(assemble_stiffness(s.mesh, sigma), std::invalid_argument);
    EXPECT_THROW(assemble_stiffness(s.mesh, Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST(Solve, ResidualGaugeAndDirection) {
    const auto& s = setup();
    const NeumannSolver solver(s.mesh, disc_phantom(s.mesh, Point(-0.3, 0.2), 0.25, 1.0));
    for (int j = 0; j < 16; ++j) {
        const Eigen::VectorXd f = dipole_load(s.mesh.node_count(), s.layout.nodes[j], s.layout.nodes[s.layout.next(j)]);
        EXPECT_NEAR(f.sum(), 0.0, 0.0);
        const Eigen::VectorXd u = solve_pattern(solver, s.layout, j);
        EXPECT_LT((solver.stiffness() * u - f).norm(), 1e-10 * f.norm());
        EXPECT_NEAR(u.mean(), 0.0, 1e-12);
    }
    const NeumannSolver homogeneous(s.mesh, s.sigma0);
    for (int j = 0; j < 16; ++j) {
        const Eigen::VectorXd u = solve_pattern(homogeneous, s.layout, j);
        EXPECT_GT(u[s.layout.nodes[j]], u[s.layout.nodes[s.layout.next(j)]]);
        // Source and sink carry the extreme values.
        EXPECT_DOUBLE_EQ(u.maxCoeff(), u[s.layout.nodes[j]]);
        EXPECT_DOUBLE_EQ(u.minCoeff(), u[s.layout.nodes[s.layout.next(j)]]);
    }
}

TEST(Solve, DoublingSigmaHalvesPotential) {
    const auto& s = setup();
    const NeumannSolver one(s.mesh, s.sigma0), two(s.mesh, 2.0 * s.sigma0);
    const Eigen::VectorXd u1 = solve_pattern(one, s.layout, 3);
    const Eigen::VectorXd u2 = solve_pattern(two, s.layout, 3);
    EXPECT_LT((u2 - 0.5 * u1).norm(), 1e-12 * u1.norm());
}

TEST(Solve, IncompatibleLoadRejected) {
    const auto& s = setup();
    const NeumannSolver solver(s.mesh, s.sigma0);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.mesh.node_count()));
    f[7] = 1.0;
    EXPECT_THROW(solver.solve(f), std::runtime_error);
}

TEST(Voltages, TelescopingAndReciprocity) {
    const auto& s = setup();
    const NeumannSolver solver(s.mesh, disc_phantom(s.mesh, Point(0.1, -0.4), 0.2, -0.5));
    const VoltageDataSet v = measure_voltages(solve_patterns(solver, s.layout), s.layout);
    for (int j = 0; j < 16; ++j) EXPECT_NEAR(v.V.col(j).sum(), 0.0, 1e-12 * v.V.cwiseAbs().maxCoeff());
    EXPECT_LT((v.V - v.V.transpose()).cwiseAbs().maxCoeff(), 1e-8 * v.V.cwiseAbs().maxCoeff());
}

// 96 boundary nodes put the 16 electrodes at exactly equal angles. The mesh is
// only 6-fold symmetric, so entries next to the drive pair (where the point
// sources sit) carry visible discretization error; the rest match closely.
TEST(Voltages, RotationSymmetryOnHomogeneousDisc) {
    const TriMesh mesh = build_disc_mesh(1.0, 1536);
    ASSERT_EQ(mesh.boundary_nodes.size(), 96u);
    const ElectrodeLayout layout = place_electrodes(mesh, 16);
    const NeumannSolver solver(mesh, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(mesh.triangle_count())));
    const Eigen::MatrixXd v = measure_voltages(solve_patterns(solver, layout), layout).V;
    const double scale = v.cwiseAbs().maxCoeff();
    for (int j = 0; j < 16; ++j)
        for (int k = 0; k < 16; ++k) {
            const int dist = std::min((k - j + 16) % 16, (j - k + 16) % 16);
            const double tol = dist >= 2 ? 1e-3 : 3e-2;
            EXPECT_NEAR(v((k + 1) % 16, (j + 1) % 16), v(k, j), tol * scale) << "k " << k << " j " << j;
        }
}

TEST(Difference, ZeroForReference) {
    const auto& s = setup();
    const DifferenceData d = simulate(s, s.sigma0);
    EXPECT_EQ(d.stacked.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(d.noise_level, 0.0);
}

TEST(Difference, StackedMatchesMatrixColumns) {
    const auto& s = setup();
    const DifferenceData d = simulate(s, disc_phantom(s.mesh, Point(0.3, 0.3), 0.2, 1.0));
    for (int j = 0; j < 16; ++j) EXPECT_EQ(d.stacked.segment(16 * j, 16), d.matrix.col(j));
    EXPECT_GT(d.stacked.norm(), 0.0);
}

// dV(k, j) = u_k0^T (K_sigma - K_0) u_j, the discrete form of the integral
// of (sigma - sigma0) grad u_j . grad u_k0 over D.
TEST(Difference, GalerkinIdentity) {
    const auto& s = setup();
    const Eigen::VectorXd sigma = disc_phantom(s.mesh, Point(-0.2, 0.35), 0.25, 1.0);
    const DifferenceData d = simulate(s, sigma);
    const PotentialSet u0 = solve_patterns(NeumannSolver(s.mesh, s.sigma0), s.layout);
    const PotentialSet u = solve_patterns(NeumannSolver(s.mesh, sigma), s.layout);
    Eigen::MatrixXd integral(16, 16);
    for (int j = 0; j < 16; ++j) {
        const Eigen::MatrixX2d gj = field_gradients(s.mesh, u[j]);
        for (int k = 0; k < 16; ++k) {
            const Eigen::MatrixX2d gk = field_gradients(s.mesh, u0[k]);
            double sum = 0.0;
            for (std::size_t t = 0; t < s.mesh.triangle_count(); ++t) {
                const auto i = static_cast<Eigen::Index>(t);
                sum += (sigma[i] - 1.0) * s.mesh.signed_area(t) * gj.row(i).dot(gk.row(i));
            }
            integral(k, j) = sum;
        }
    }
    EXPECT_LT((integral - d.matrix).norm(), 1e-9 * d.matrix.norm());
}

// Linearization error shrinks at first order in the contrast.
TEST(Difference, LinearizationConvergesFirstOrder) {
    const auto& s = setup();
    const PotentialSet u0 = solve_patterns(NeumannSolver(s.mesh, s.sigma0), s.layout);
    std::vector<Eigen::MatrixX2d> g;
    for (int j = 0; j < 16; ++j) g.push_back(field_gradients(s.mesh, u0[j]));
    std::vector<double> errors;
    for (double c : {0.2, 0.1, 0.05}) {
        const Eigen::VectorXd sigma = disc_phantom(s.mesh, Point(0.3, -0.2), 0.25, c);
        const DifferenceData d = simulate(s, sigma);
        Eigen::MatrixXd linear = Eigen::MatrixXd::Zero(16, 16);
        for (std::size_t t = 0; t < s.mesh.triangle_count(); ++t) {
            const auto i = static_cast<Eigen::Index>(t);
            if (sigma[i] == 1.0) continue;
            for (int j = 0; j < 16; ++j)
                for (int k = 0; k < 16; ++k)
                    linear(k, j) += (sigma[i] - 1.0) * s.mesh.signed_area(t) * g[j].row(i).dot(g[k].row(i));
        }
        errors.push_back((d.matrix - linear).norm() / d.matrix.norm());
    }
    EXPECT_NEAR(errors[1] / errors[0], 0.5, 0.1);
    EXPECT_NEAR(errors[2] / errors[1], 0.5, 0.1);
}

TEST(Noise, ZeroLevelIsIdentity) {
    const auto& s = setup();
    const DifferenceData d = simulate(s, disc_phantom(s.mesh, Point(0.0, 0.0), 0.3, 1.0));
    const DifferenceData n = add_noise(d, 0.0, 42);
    EXPECT_EQ(n.matrix, d.matrix);
    EXPECT_EQ(n.stacked, d.stacked);
    EXPECT_THROW(add_noise(d, -0.1, 1), std::invalid_argument);
}

TEST(Noise, DeterministicBoundedCentered) {
    Eigen::MatrixXd m(100, 100);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::sin(0.37 * static_cast<double>(i));
    const DifferenceData d = make_difference_data(m);
    const double inf = d.stacked.cwiseAbs().maxCoeff();
    const DifferenceData a = add_noise(d, 0.01, 99), b = add_noise(d, 0.01, 99), c = add_noise(d, 0.01, 100);
    EXPECT_EQ(a.stacked, b.stacked);
    EXPECT_NE(a.stacked, c.stacked);
    const Eigen::VectorXd delta = a.stacked - d.stacked;
    EXPECT_LE(delta.cwiseAbs().maxCoeff(), 0.01 * inf);
    // 10^4 uniform draws on [-0.01, 0.01] * inf: standard error of the mean is about 5.8e-5 * inf.
    EXPECT_LT(std::abs(delta.mean()), 3e-4 * inf);
    EXPECT_EQ(a.noise_level, 0.01);
    EXPECT_EQ(a.seed, 99u);
}
