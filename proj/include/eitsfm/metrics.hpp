#ifndef EITSFM_METRICS_HPP
#define EITSFM_METRICS_HPP

#include "eitsfm/forward.hpp"
#include "eitsfm/geometry.hpp"
#include "eitsfm/pixel_grid.hpp"
#include "eitsfm/sensitivity.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <map>
#include <utility>
#include <vector>

namespace eitsfm {

/// The true perturbation projected onto the pixel grid.
struct PixelTruth {
    Eigen::VectorXd delta_sigma;  // area-averaged sigma - sigma0 per pixel
    std::vector<char> inside;     // pixel at least half covered by anomaly triangles
    Point centroid = Point::Zero();
    double dominant_sign = 1.0;

    bool empty() const {
        for (char c : inside)
            if (c) return false;
        return true;
    }
};

inline PixelTruth project_truth(const PixelGrid& grid, const Eigen::VectorXd& sigma, double sigma0) {
    PixelTruth truth;
    const auto np = static_cast<Eigen::Index>(grid.size());
    truth.delta_sigma = Eigen::VectorXd::Zero(np);
    truth.inside.assign(grid.size(), 0);
    double mass = 0.0;
    double signed_mass = 0.0;
    for (std::size_t n = 0; n < grid.size(); ++n) {
        double covered = 0.0;
        double integral = 0.0;
        for (const auto& o : grid.overlaps[n]) {
            const double d = sigma[o.triangle] - sigma0;
            integral += o.area * d;
            if (d != 0.0) covered += o.area;
        }
        const double a = grid.pixels[n].area;
        truth.delta_sigma[static_cast<Eigen::Index>(n)] = integral / a;
        truth.inside[n] = covered >= 0.5 * a;
        mass += std::abs(integral);
        signed_mass += integral;
        truth.centroid += std::abs(integral) * grid.pixels[n].centroid;
    }
    if (mass > 0.0) truth.centroid /= mass;
    truth.dominant_sign = signed_mass < 0.0 ? -1.0 : 1.0;
    return truth;
}

/// Lattice neighbors (8-connectivity) of each pixel.
inline std::vector<std::vector<int>> pixel_neighbors(const PixelGrid& grid) {
    std::map<std::pair<int, int>, int> index;
    for (std::size_t n = 0; n < grid.size(); ++n) index[{grid.pixels[n].col, grid.pixels[n].row}] = static_cast<int>(n);
    std::vector<std::vector<int>> adj(grid.size());
    for (std::size_t n = 0; n < grid.size(); ++n)
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                const auto it = index.find({grid.pixels[n].col + dc, grid.pixels[n].row + dr});
                if (it != index.end()) adj[n].push_back(it->second);
            }
    return adj;
}

/// Pixels with |value| >= half of the maximum magnitude.
inline std::vector<char> half_max_support(const Eigen::VectorXd& values) {
    std::vector<char> support(static_cast<std::size_t>(values.size()), 0);
    const double peak = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
    if (!(peak > 0.0)) return support;
    for (Eigen::Index n = 0; n < values.size(); ++n) support[static_cast<std::size_t>(n)] = std::abs(values[n]) >= 0.5 * peak;
    return support;
}

/// Connected components (8-connectivity) of a pixel mask; returns a label per
/// pixel (-1 outside the mask) and the component count.
inline std::pair<std::vector<int>, int> connected_components(const std::vector<std::vector<int>>& adj,
                                                             const std::vector<char>& mask) {
    std::vector<int> label(mask.size(), -1);
    int count = 0;
    std::vector<int> stack;
    for (std::size_t s = 0; s < mask.size(); ++s) {
        if (!mask[s] || label[s] >= 0) continue;
        label[s] = count;
        stack.push_back(static_cast<int>(s));
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            for (int q : adj[static_cast<std::size_t>(p)])
                if (mask[static_cast<std::size_t>(q)] && label[static_cast<std::size_t>(q)] < 0) {
                    label[static_cast<std::size_t>(q)] = count;
                    stack.push_back(q);
                }
        }
        ++count;
    }
    return {std::move(label), count};
}

/// Localization metrics of one reconstruction. NaN marks an undefined metric
/// (empty phantom or identically zero image).
struct Metrics {
    double centroid_error = std::numeric_limits<double>::quiet_NaN();
    double support_jaccard = std::numeric_limits<double>::quiet_NaN();
    double ringing_energy = std::numeric_limits<double>::quiet_NaN();
    double relative_data_misfit = std::numeric_limits<double>::quiet_NaN();

    bool defined() const { return !std::isnan(support_jaccard); }
};

/// centroid_error: distance between the area-weighted centroid of the part of
/// the image carrying the dominant true sign and the true centroid.
/// support_jaccard: area Jaccard index of the half-max support against the
/// true anomaly pixels. ringing_energy: share of area-weighted |image| mass
/// outside the anomaly pixels dilated by one lattice step.
inline Metrics evaluate(const PixelGrid& grid, const PixelTruth& truth, const Eigen::VectorXd& image,
                        const SensitivityMatrix* sens = nullptr, const DifferenceData* data = nullptr) {
    Metrics m;
    const auto np = grid.size();
    if (static_cast<std::size_t>(image.size()) != np) throw std::invalid_argument("image does not match the pixel grid");
    if (sens && data) {
        const double norm = data->stacked.norm();
        if (norm > 0.0) m.relative_data_misfit = (sens->S * image - data->stacked).norm() / norm;
    }
    if (truth.empty() || !(image.cwiseAbs().maxCoeff() > 0.0)) return m;

    double weight = 0.0;
    Point c = Point::Zero();
    for (std::size_t n = 0; n < np; ++n) {
        const double part = std::max(truth.dominant_sign * image[static_cast<Eigen::Index>(n)], 0.0) * grid.pixels[n].area;
        weight += part;
        c += part * grid.pixels[n].centroid;
    }
    if (weight > 0.0) m.centroid_error = (c / weight - truth.centroid).norm();

    const auto support = half_max_support(image);
    double inter = 0.0;
    double uni = 0.0;
    for (std::size_t n = 0; n < np; ++n) {
        const double a = grid.pixels[n].area;
        if (support[n] && truth.inside[n]) inter += a;
        if (support[n] || truth.inside[n]) uni += a;
    }
    m.support_jaccard = uni > 0.0 ? inter / uni : 0.0;

    const auto adj = pixel_neighbors(grid);
    std::vector<char> dilated = truth.inside;
    for (std::size_t n = 0; n < np; ++n)
        if (truth.inside[n])
            for (int q : adj[n]) dilated[static_cast<std::size_t>(q)] = 1;
    double total = 0.0;
    double outside = 0.0;
    for (std::size_t n = 0; n < np; ++n) {
        const double mass = std::abs(image[static_cast<Eigen::Index>(n)]) * grid.pixels[n].area;
        total += mass;
        if (!dilated[n]) outside += mass;
    }
    m.ringing_energy = outside / total;
    return m;
}

}  // namespace eitsfm

#endif  // EITSFM_METRICS_HPP
