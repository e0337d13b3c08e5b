#ifndef EITSFM_SFM_HPP
#define EITSFM_SFM_HPP

#include "eitsfm/forward.hpp"
#include "eitsfm/sensitivity.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

namespace eitsfm {

/// Spectrally truncated inverse of the symmetrized data matrix.
///
/// Adjacent-pattern data matrices annihilate the constant vector, so only
/// eigenpairs with |mu| > eps * max|mu| are inverted.
class RegularizedDataInverse {
public:
    RegularizedDataInverse(const Eigen::MatrixXd& data_matrix, double eps_rel) : eps_rel_(eps_rel) {
        if (data_matrix.rows() != data_matrix.cols() || data_matrix.rows() == 0)
            throw std::invalid_argument("data matrix must be square and nonempty");
        if (!(eps_rel >= 0.0)) throw std::invalid_argument("truncation threshold must be non-negative");
        if (!data_matrix.allFinite()) throw std::invalid_argument("data matrix has non-finite entries");
        if (data_matrix.cwiseAbs().maxCoeff() == 0.0) throw std::invalid_argument("data matrix is identically zero");
        symmetric_ = 0.5 * (data_matrix + data_matrix.transpose());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric_);
        if (eig.info() != Eigen::Success) throw std::runtime_error("eigendecomposition of the data matrix failed");
        eigenvalues_ = eig.eigenvalues();
        eigenvectors_ = eig.eigenvectors();
        const double mu_max = eigenvalues_.cwiseAbs().maxCoeff();
        retained_ = (eigenvalues_.array().abs() > eps_rel * mu_max);
        Eigen::VectorXd inv = Eigen::VectorXd::Zero(eigenvalues_.size());
        for (Eigen::Index i = 0; i < inv.size(); ++i)
            if (retained_[i]) inv[i] = 1.0 / eigenvalues_[i];
        inverse_ = eigenvectors_ * inv.asDiagonal() * eigenvectors_.transpose();
        inverse_ = 0.5 * (inverse_ + inverse_.transpose());
    }

    RegularizedDataInverse(const DifferenceData& data, double eps_rel)
        : RegularizedDataInverse(data.matrix, eps_rel) {}

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return inverse_ * x; }

    const Eigen::MatrixXd& matrix() const { return inverse_; }
    const Eigen::MatrixXd& symmetrized() const { return symmetric_; }
    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
    double threshold() const { return eps_rel_; }

    Eigen::Index retained_count() const { return retained_.count(); }

    /// Orthonormal basis of the retained eigenspace, one vector per column.
    Eigen::MatrixXd retained_basis() const {
        Eigen::MatrixXd basis(eigenvectors_.rows(), retained_count());
        Eigen::Index c = 0;
        for (Eigen::Index i = 0; i < retained_.size(); ++i)
            if (retained_[i]) basis.col(c++) = eigenvectors_.col(i);
        return basis;
    }

private:
    double eps_rel_;
    Eigen::MatrixXd symmetric_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenvectors_;
    Eigen::Array<bool, Eigen::Dynamic, 1> retained_;
    Eigen::MatrixXd inverse_;
};

inline RegularizedDataInverse build_data_inverse(const DifferenceData& data, double eps_rel = 1e-3) {
    return RegularizedDataInverse(data, eps_rel);
}

/// zeta(j, n) = S_j^n . inv(dV) S_j^n, with S_j^n the n-th column of block j.
inline Eigen::MatrixXd compute_zeta(const SensitivityMatrix& sens, const RegularizedDataInverse& inv) {
    const int ne = sens.electrodes;
    if (inv.matrix().rows() != ne) throw std::invalid_argument("data inverse does not match the electrode count");
    Eigen::MatrixXd zeta(ne, sens.pixel_count());
    for (int j = 0; j < ne; ++j) {
        const auto block = sens.block(j);
        const Eigen::MatrixXd mapped = inv.matrix() * block;
        zeta.row(j) = block.cwiseProduct(mapped).colwise().sum();
    }
    return zeta;
}

/// w_n = ln(1 + sum_j |zeta_j^n / (S_j^n . S_j^n)|). Large w_n marks pixels
/// unlikely to contain the anomaly.
inline Eigen::VectorXd compute_weights(const Eigen::MatrixXd& zeta, const SensitivityMatrix& sens) {
    const int ne = sens.electrodes;
    if (zeta.rows() != ne || zeta.cols() != sens.pixel_count())
        throw std::invalid_argument("zeta shape does not match the sensitivity matrix");
    Eigen::VectorXd w(zeta.cols());
    for (Eigen::Index n = 0; n < zeta.cols(); ++n) {
        double sum = 0.0;
        for (int j = 0; j < ne; ++j) {
            const double norm2 = sens.block(j).col(n).squaredNorm();
            if (!(norm2 > 0.0))
                throw std::invalid_argument("sensitivity column of pixel " + std::to_string(n) + " for pattern " +
                                            std::to_string(j) + " has zero norm");
            sum += std::abs(zeta(j, n) / norm2);
        }
        w[n] = std::log1p(sum);
    }
    return w;
}

struct SfmIndexField {
    Eigen::MatrixXd zeta;
    Eigen::VectorXd w;
};

inline SfmIndexField sfm_index(const SensitivityMatrix& sens, const DifferenceData& data, double eps_rel = 1e-3) {
    const RegularizedDataInverse inv(data, eps_rel);
    SfmIndexField field;
    field.zeta = compute_zeta(sens, inv);
    field.w = compute_weights(field.zeta, sens);
    return field;
}

}  // namespace eitsfm

#endif  // EITSFM_SFM_HPP
