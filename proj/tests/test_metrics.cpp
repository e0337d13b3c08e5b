#include "eitsfm/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace eitsfm;

namespace {

struct Fixture {
    TriMesh mesh = build_disc_mesh(1.0, 2000);
    PixelGrid grid = build_pixel_grid(mesh, 400, 0.05);

    PixelTruth truth_for(const Phantom& ph) const { return project_truth(grid, rasterize_phantom(ph, mesh), ph.sigma0); }

    Eigen::VectorXd indicator(const std::vector<char>& mask) const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t n = 0; n < mask.size(); ++n) v[static_cast<Eigen::Index>(n)] = mask[n] ? 1.0 : 0.0;
        return v;
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

Phantom single_disc(double contrast = 1.0) {
    Phantom ph;
    ph.anomalies.push_back({DiscShape{Point(0.3, -0.1), 0.25}, contrast});
    return ph;
}

}  // namespace

TEST(Metrics, ProjectTruthConservesPerturbation) {
    const auto& f = fixture();
    const Phantom ph = single_disc(0.5);
    const Eigen::VectorXd sigma = rasterize_phantom(ph, f.mesh);
    const PixelTruth truth = f.truth_for(ph);
    double pixel_mass = 0.0;
    for (std::size_t n = 0; n < f.grid.size(); ++n) pixel_mass += truth.delta_sigma[static_cast<Eigen::Index>(n)] * f.grid.pixels[n].area;
    double overlap_mass = 0.0;
    for (const auto& list : f.grid.overlaps)
        for (const auto& o : list) overlap_mass += o.area * (sigma[o.triangle] - 1.0);
    EXPECT_NEAR(pixel_mass, overlap_mass, 1e-12);
    EXPECT_NEAR(pixel_mass, 0.5 * std::numbers::pi * 0.0625, 0.05 * pixel_mass);
    EXPECT_LT((truth.centroid - Point(0.3, -0.1)).norm(), 0.02);
    EXPECT_EQ(truth.dominant_sign, 1.0);
    EXPECT_FALSE(truth.empty());
}

TEST(Metrics, DominantSignFollowsNetMass) {
    Phantom ph;
    ph.anomalies.push_back({DiscShape{Point(0.4, 0.0), 0.15}, 1.0});
    ph.anomalies.push_back({DiscShape{Point(-0.4, 0.0), 0.3}, -0.5});
    EXPECT_EQ(fixture().truth_for(ph).dominant_sign, -1.0);
}

TEST(Metrics, PerfectIndicatorScoresPerfectly) {
    const auto& f = fixture();
    const PixelTruth truth = f.truth_for(single_disc());
    const Metrics m = evaluate(f.grid, truth, f.indicator(truth.inside));
    EXPECT_DOUBLE_EQ(m.support_jaccard, 1.0);
    EXPECT_DOUBLE_EQ(m.ringing_energy, 0.0);
    EXPECT_LT(m.centroid_error, f.grid.cell_size);
    EXPECT_TRUE(std::isnan(m.relative_data_misfit));
}

TEST(Metrics, ScaleInvariant) {
    const auto& f = fixture();
    const PixelTruth truth = f.truth_for(single_disc());
    const Eigen::VectorXd img = truth.delta_sigma + 0.1 * f.indicator(std::vector<char>(f.grid.size(), 1));
    const Metrics a = evaluate(f.grid, truth, img);
    const Metrics b = evaluate(f.grid, truth, 37.0 * img);
    EXPECT_NEAR(a.centroid_error, b.centroid_error, 1e-12);
    EXPECT_DOUBLE_EQ(a.support_jaccard, b.support_jaccard);
    EXPECT_NEAR(a.ringing_energy, b.ringing_energy, 1e-12);
}

TEST(Metrics, FarAwayImageIsAllRinging) {
    const auto& f = fixture();
    const PixelTruth truth = f.truth_for(single_disc());
    Eigen::VectorXd img = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.grid.size()));
    for (std::size_t n = 0; n < f.grid.size(); ++n)
        if (f.grid.pixels[n].centroid.x() < -0.3) img[static_cast<Eigen::Index>(n)] = 1.0;
    const Metrics m = evaluate(f.grid, truth, img);
    EXPECT_DOUBLE_EQ(m.support_jaccard, 0.0);
    EXPECT_DOUBLE_EQ(m.ringing_energy, 1.0);
    EXPECT_GT(m.centroid_error, 0.5);
}

TEST(Metrics, WrongSignLeavesCentroidUndefined) {
    const auto& f = fixture();
    const PixelTruth truth = f.truth_for(single_disc());
    const Metrics m = evaluate(f.grid, truth, -f.indicator(truth.inside));
    EXPECT_TRUE(std::isnan(m.centroid_error));
    EXPECT_DOUBLE_EQ(m.support_jaccard, 1.0);
}

TEST(Metrics, UndefinedForEmptyPhantomOrZeroImage) {
    const auto& f = fixture();
    const PixelTruth empty = f.truth_for(Phantom{});
    EXPECT_TRUE(empty.empty());
    const Metrics a = evaluate(f.grid, empty, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(f.grid.size())));
    EXPECT_FALSE(a.defined());
    EXPECT_TRUE(std::isnan(a.centroid_error));
    EXPECT_TRUE(std::isnan(a.ringing_energy));
    const Metrics b = evaluate(f.grid, f.truth_for(single_disc()), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.grid.size())));
    EXPECT_FALSE(b.defined());
}

TEST(Metrics, DataMisfit) {
    const auto& f = fixture();
    const auto np = static_cast<Eigen::Index>(f.grid.size());
    SensitivityMatrix sens;
    sens.electrodes = 2;
    sens.S = Eigen::MatrixXd::Zero(4, np);
    sens.S(0, 0) = 1.0;
    sens.S(3, 1) = 2.0;
    Eigen::Matrix2d v;
    v << 3.0, 0.0, 0.0, 4.0;
    const DifferenceData d = make_difference_data(v);
    Eigen::VectorXd img = Eigen::VectorXd::Zero(np);
    img[0] = 3.0;
    img[1] = 2.0;
    EXPECT_NEAR(evaluate(f.grid, PixelTruth{}, img, &sens, &d).relative_data_misfit, 0.0, 1e-15);
    img[1] = 0.0;
    EXPECT_NEAR(evaluate(f.grid, PixelTruth{}, img, &sens, &d).relative_data_misfit, 4.0 / 5.0, 1e-15);
    EXPECT_THROW(evaluate(f.grid, PixelTruth{}, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(Metrics, HalfMaxSupport) {
    EXPECT_EQ(half_max_support(Eigen::Vector4d(1.0, -0.5, 0.49, -2.0)), (std::vector<char>{1, 0, 0, 1}));
    EXPECT_EQ(half_max_support(Eigen::Vector3d::Zero()), (std::vector<char>{0, 0, 0}));
}

TEST(Metrics, ConnectedComponents) {
    // Path 0-1-2-3-4 with 2 masked out.
    const std::vector<std::vector<int>> adj{{1}, {0, 2}, {1, 3}, {2, 4}, {3}};
    const auto [label, count] = connected_components(adj, {1, 1, 0, 1, 1});
    EXPECT_EQ(count, 2);
    EXPECT_EQ(label, (std::vector<int>{0, 0, -1, 1, 1}));
}

TEST(Metrics, NeighborsAreSymmetric) {
    const auto& f = fixture();
    const auto adj = pixel_neighbors(f.grid);
    for (std::size_t n = 0; n < adj.size(); ++n) {
        EXPECT_LE(adj[n].size(), 8u);
        for (int q : adj[n]) {
            const auto& back = adj[static_cast<std::size_t>(q)];
            EXPECT_NE(std::find(back.begin(), back.end(), static_cast<int>(n)), back.end());
        }
    }
}
