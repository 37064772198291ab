#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <utility>

#include "harmony/error.hpp"
#include "harmony/imgcore/image.hpp"

namespace harmony::dove {

struct LossConfig {
    double lambda = 0.01;

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(Errc::invalid_argument, "lambda must be >= 0");
    }
};

/// Verification score: inner product of foreground and background representations.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar domain_similarity(const Eigen::MatrixBase<DerivedA>& l_f,
                                            const Eigen::MatrixBase<DerivedB>& l_b) {
    if (l_f.size() != l_b.size()) throw Error(Errc::dimension_mismatch, "domain representations differ in length");
    return l_f.dot(l_b);
}

namespace detail {

template <typename Scalar>
void require_scores(std::span<const Scalar> s, const char* what) {
    if (s.empty()) throw Error(Errc::invalid_argument, std::string(what) + ": empty score list");
}

}  // namespace detail

/// E[max(0, 1 - real)] + E[max(0, 1 + fake)].
template <typename Scalar>
Scalar hinge_d_loss(std::span<const Scalar> real_scores, std::span<const Scalar> fake_scores) {
    detail::require_scores(real_scores, "hinge_d_loss");
    detail::require_scores(fake_scores, "hinge_d_loss");
    Scalar real_term(0), fake_term(0);
    for (Scalar s : real_scores) real_term += std::max(Scalar(0), Scalar(1) - s);
    for (Scalar s : fake_scores) fake_term += std::max(Scalar(0), Scalar(1) + s);
    return real_term / Scalar(real_scores.size()) + fake_term / Scalar(fake_scores.size());
}

/// -E[fake].
template <typename Scalar>
Scalar hinge_g_loss(std::span<const Scalar> fake_scores) {
    detail::require_scores(fake_scores, "hinge_g_loss");
    Scalar sum(0);
    for (Scalar s : fake_scores) sum += s;
    return -sum / Scalar(fake_scores.size());
}

/// Mean absolute difference over all entries.
template <typename Scalar>
Scalar reconstruction_loss(const Image<Scalar>& pred, const Image<Scalar>& target) {
    require_same_shape(pred, target);
    return (pred.pixels() - target.pixels()).cwiseAbs().mean();
}

inline double generator_total_loss(double l_rec, double l_gg, double l_gv, const LossConfig& cfg = {}) {
    cfg.validate();
    if (!std::isfinite(l_rec) || !std::isfinite(l_gg) || !std::isfinite(l_gv)) {
        throw Error(Errc::non_finite, "generator_total_loss: non-finite input");
    }
    return l_rec + cfg.lambda * (l_gg + l_gv);
}

struct LossReport {
    double l_rec = 0.0;
    double l_dg = 0.0;
    double l_gg = 0.0;
    double l_dv = 0.0;
    double l_gv = 0.0;
    double l_g_total = 0.0;
    double lambda = 0.01;
};

/// Assembles all loss terms for one step from discriminator scores.
LossReport make_loss_report(double l_rec, std::span<const double> dg_real, std::span<const double> dg_fake,
                            std::span<const double> dv_real, std::span<const double> dv_fake,
                            const LossConfig& cfg = {});

// Analytic gradients. Hinge and L1 terms use the zero subgradient at kinks;
// grad_check excludes those points.

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> domain_similarity_grad_fg(const Eigen::MatrixBase<Derived>& l_b) {
    return l_b;
}

/// d/d(real_i) and d/d(fake_j) of hinge_d_loss.
std::pair<Eigen::VectorXd, Eigen::VectorXd> hinge_d_grad(std::span<const double> real_scores,
                                                         std::span<const double> fake_scores);
Eigen::VectorXd hinge_g_grad(std::span<const double> fake_scores);
/// d/d(pred) of reconstruction_loss, as an N x 3 matrix.
Eigen::MatrixX3d reconstruction_grad(const ImageRGB& pred, const ImageRGB& target);
/// Partials w.r.t. (l_rec, l_gg, l_gv): (1, lambda, lambda).
Eigen::Vector3d generator_total_grad(const LossConfig& cfg = {});

}  // namespace harmony::dove
