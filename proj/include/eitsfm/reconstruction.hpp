#ifndef EITSFM_RECONSTRUCTION_HPP
#define EITSFM_RECONSTRUCTION_HPP

#include "eitsfm/forward.hpp"
#include "eitsfm/sensitivity.hpp"

#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eitsfm {

/// How many singular triplets a truncated SVD keeps.
struct TruncationRule {
    enum class Kind { Count, Relative };

    Kind kind = Kind::Relative;
    double value = 1e-3;

    static TruncationRule count(int t) { return {Kind::Count, static_cast<double>(t)}; }
    /// Keep every lambda_t with lambda_t / lambda_1 >= rho.
    static TruncationRule relative(double rho) { return {Kind::Relative, rho}; }
};

/// Thin SVD with a chosen truncation level.
struct TsvdFactors {
    Eigen::VectorXd singular_values;
    Eigen::MatrixXd U;
    Eigen::MatrixXd V;
    Eigen::Index rank = 0;
    Eigen::Index truncation = 0;

    /// V_t diag(1/lambda) U_t^T b.
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        const Eigen::Index t = truncation;
        const Eigen::VectorXd coeff = (U.leftCols(t).transpose() * b).cwiseQuotient(singular_values.head(t));
        return V.leftCols(t) * coeff;
    }

    Eigen::MatrixXd pseudoinverse() const {
        const Eigen::Index t = truncation;
        return V.leftCols(t) * singular_values.head(t).cwiseInverse().asDiagonal() * U.leftCols(t).transpose();
    }

    /// Smallest t with lambda_t / lambda_1 <= ratio among nonzero values, or rank.
    Eigen::Index index_at_ratio(double ratio) const {
        for (Eigen::Index t = 0; t < rank; ++t)
            if (singular_values[t] / singular_values[0] <= ratio) return t + 1;
        return rank;
    }
};

inline Eigen::Index resolve_truncation(const Eigen::VectorXd& singular_values, Eigen::Index rank,
                                       const TruncationRule& rule) {
    if (rule.kind == TruncationRule::Kind::Count) {
        const auto t = static_cast<Eigen::Index>(rule.value);
        if (t < 1) throw std::invalid_argument("truncation count must be at least 1");
        if (t > rank)
            throw std::invalid_argument("truncation count " + std::to_string(t) + " exceeds the numerical rank " +
                                        std::to_string(rank));
        return t;
    }
    if (!(rule.value >= 0.0)) throw std::invalid_argument("relative truncation threshold must be non-negative");
    Eigen::Index t = 0;
    while (t < rank && singular_values[t] >= rule.value * singular_values[0]) ++t;
    return std::max<Eigen::Index>(t, 1);
}

inline TsvdFactors tsvd(const Eigen::MatrixXd& m, const TruncationRule& rule) {
    if (m.size() == 0) throw std::invalid_argument("cannot decompose an empty matrix");
    if (!m.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    TsvdFactors f;
    f.singular_values = svd.singularValues();
    f.U = svd.matrixU();
    f.V = svd.matrixV();
    if (!(f.singular_values[0] > 0.0)) throw std::invalid_argument("cannot truncate a zero matrix");
    const double cutoff = f.singular_values[0] * static_cast<double>(std::max(m.rows(), m.cols())) *
                          std::numeric_limits<double>::epsilon();
    f.rank = (f.singular_values.array() > cutoff).count();
    f.truncation = resolve_truncation(f.singular_values, f.rank, rule);
    return f;
}

enum class Method { S, B, A, W1 };

inline std::string_view method_name(Method m) {
    switch (m) {
        case Method::S: return "S";
        case Method::B: return "B";
        case Method::A: return "A";
        case Method::W1: return "W1";
    }
    return "?";
}

struct ReconstructionResult {
    Eigen::VectorXd delta_sigma;
    Method method = Method::S;
    Eigen::Index truncation = 0;
    double alpha = 0.0;
    double beta = 0.0;
    double eps_zeta = 0.0;
    double noise_level = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

inline void check_data(const SensitivityMatrix& sens, const DifferenceData& data) {
    if (data.stacked.size() != sens.S.rows())
        throw std::invalid_argument("difference data length does not match the sensitivity matrix");
}

inline void check_weights(const Eigen::VectorXd& w, const SensitivityMatrix& sens) {
    if (w.size() != sens.pixel_count()) throw std::invalid_argument("weight vector does not match the pixel count");
    if (!w.allFinite()) throw std::invalid_argument("weights must be finite");
}

}  // namespace detail

/// Standard linearized reconstruction: truncated pseudoinverse of S.
inline ReconstructionResult reconstruct_S(const TsvdFactors& s_factors, const SensitivityMatrix& sens,
                                          const DifferenceData& data) {
    detail::check_data(sens, data);
    ReconstructionResult r;
    r.delta_sigma = s_factors.solve(data.stacked);
    r.method = Method::S;
    r.truncation = s_factors.truncation;
    r.noise_level = data.noise_level;
    r.seed = data.seed;
    return r;
}

inline ReconstructionResult reconstruct_S(const SensitivityMatrix& sens, const DifferenceData& data,
                                          const TruncationRule& rule) {
    return reconstruct_S(tsvd(sens.S, rule), sens, data);
}

/// beta = lambda_1(S) / max(w): puts both blocks of the penalized system on a
/// comparable spectral scale.
inline double default_beta(const TsvdFactors& s_factors, const Eigen::VectorXd& w) {
    const double wmax = w.maxCoeff();
    if (!(wmax > 0.0)) throw std::invalid_argument("weights are all zero");
    return s_factors.singular_values[0] / wmax;
}

/// Naive combination: truncated SVD of the stacked system (S; beta W) against
/// (dV; 0).
inline ReconstructionResult reconstruct_B(const SensitivityMatrix& sens, const DifferenceData& data,
                                          const Eigen::VectorXd& w, double beta, const TruncationRule& rule) {
    detail::check_data(sens, data);
    detail::check_weights(w, sens);
    if ((w.array() <= 0.0).any()) throw std::invalid_argument("penalty weights must be positive");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
    const Eigen::Index m = sens.S.rows();
    const Eigen::Index np = sens.pixel_count();
    Eigen::MatrixXd B(m + np, np);
    B.topRows(m) = sens.S;
    B.bottomRows(np) = (beta * w).asDiagonal();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m + np);
    b.head(m) = data.stacked;
    const TsvdFactors f = tsvd(B, rule);
    ReconstructionResult r;
    r.delta_sigma = f.solve(b);
    r.method = Method::B;
    r.truncation = f.truncation;
    r.beta = beta;
    r.noise_level = data.noise_level;
    r.seed = data.seed;
    return r;
}

/// Entries of W^{-1}; zero weights map to the cap 1e6 / median(w).
inline Eigen::VectorXd inverse_weights(const Eigen::VectorXd& w) {
    std::vector<double> sorted(w.data(), w.data() + w.size());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    const double median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    if (!(median > 0.0)) throw std::invalid_argument("median weight must be positive to form W^{-1}");
    const double cap = 1e6 / median;
    Eigen::VectorXd inv(w.size());
    for (Eigen::Index n = 0; n < w.size(); ++n) {
        if (w[n] < 0.0) throw std::invalid_argument("weights must be non-negative");
        inv[n] = w[n] > 0.0 ? std::min(1.0 / w[n], cap) : cap;
    }
    return inv;
}

/// Proposed combination: truncated SVD of A = (S; alpha W^{-1}) against
/// (dV; alpha W^{-1} S^+ dV), with S^+ taken from `s_factors`. Untruncated,
/// the system is solved exactly by S^+ dV whenever S S^+ dV = dV.
inline ReconstructionResult reconstruct_A(const TsvdFactors& s_factors, const SensitivityMatrix& sens,
                                          const DifferenceData& data, const Eigen::VectorXd& w, double alpha,
                                          const TruncationRule& rule) {
    detail::check_data(sens, data);
    detail::check_weights(w, sens);
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
    const Eigen::Index m = sens.S.rows();
    const Eigen::Index np = sens.pixel_count();
    const Eigen::VectorXd w_inv = inverse_weights(w);
    Eigen::MatrixXd A(m + np, np);
    A.topRows(m) = sens.S;
    A.bottomRows(np) = (alpha * w_inv).asDiagonal();
    Eigen::VectorXd rhs(m + np);
    rhs.head(m) = data.stacked;
    rhs.tail(np) = alpha * w_inv.cwiseProduct(s_factors.solve(data.stacked));
    const bool fixed = rule.kind == TruncationRule::Kind::Count;
    TsvdFactors f = tsvd(A, fixed ? TruncationRule::relative(0.0) : rule);
    // Fixed counts are clamped to [1, rank(A)] rather than rejected.
    if (fixed) f.truncation = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(rule.value), 1, f.rank);
    ReconstructionResult r;
    r.delta_sigma = f.solve(rhs);
    r.method = Method::A;
    r.truncation = f.truncation;
    r.alpha = alpha;
    r.noise_level = data.noise_level;
    r.seed = data.seed;
    return r;
}

/// Which pixels count toward the augmented-system truncation level.
enum class T2Rule {
    UpperThird,  // indicator 1/w in the upper third of its range (the smallest weights)
    AsPrinted,   // 1/w <= 1/w_min - (1/w_min - 1/w_max) / 3, read literally
};

/// Truncation level for the augmented system: twice the number of selected
/// pixels, clamped to [1, rank]. Pixels with w_n = 0 are skipped when
/// locating the indicator range.
inline Eigen::Index select_t2(const Eigen::VectorXd& w, Eigen::Index rank, T2Rule rule = T2Rule::UpperThird) {
    double wmin = std::numeric_limits<double>::infinity();
    double wmax = 0.0;
    for (Eigen::Index n = 0; n < w.size(); ++n) {
        if (!std::isfinite(w[n]) || w[n] < 0.0) throw std::invalid_argument("weights must be finite and non-negative");
        if (w[n] > 0.0) {
            wmin = std::min(wmin, w[n]);
            wmax = std::max(wmax, w[n]);
        }
    }
    if (!(wmax > 0.0)) throw std::invalid_argument("all weights are zero");
    const double hi = 1.0 / wmin;
    const double lo = 1.0 / wmax;
    Eigen::Index count = 0;
    if (rule == T2Rule::AsPrinted) {
        const double threshold = hi - (hi - lo) / 3.0;
        const double slack = 1e-12 * threshold;
        for (Eigen::Index n = 0; n < w.size(); ++n)
            if (w[n] > 0.0 && 1.0 / w[n] <= threshold + slack) ++count;
    } else {
        const double threshold = lo + 2.0 * (hi - lo) / 3.0;
        const double slack = 1e-12 * threshold;
        for (Eigen::Index n = 0; n < w.size(); ++n)
            if (w[n] > 0.0 && 1.0 / w[n] >= threshold - slack) ++count;
    }
    return std::clamp<Eigen::Index>(2 * count, 1, std::max<Eigen::Index>(rank, 1));
}

}  // namespace eitsfm

#endif  // EITSFM_RECONSTRUCTION_HPP
