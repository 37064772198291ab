#include "harmony/dove/losses.hpp"

namespace harmony::dove {

LossReport make_loss_report(double l_rec, std::span<const double> dg_real, std::span<const double> dg_fake,
                            std::span<const double> dv_real, std::span<const double> dv_fake, const LossConfig& cfg) {
    LossReport r;
    r.lambda = cfg.lambda;
    r.l_rec = l_rec;
    r.l_dg = hinge_d_loss(dg_real, dg_fake);
    r.l_gg = hinge_g_loss(dg_fake);
    r.l_dv = hinge_d_loss(dv_real, dv_fake);
    r.l_gv = hinge_g_loss(dv_fake);
    r.l_g_total = generator_total_loss(r.l_rec, r.l_gg, r.l_gv, cfg);
    return r;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> hinge_d_grad(std::span<const double> real_scores,
                                                         std::span<const double> fake_scores) {
    detail::require_scores(real_scores, "hinge_d_grad");
    detail::require_scores(fake_scores, "hinge_d_grad");
    Eigen::VectorXd gr(static_cast<Eigen::Index>(real_scores.size()));
    Eigen::VectorXd gf(static_cast<Eigen::Index>(fake_scores.size()));
    const double nr = static_cast<double>(real_scores.size());
    const double nf = static_cast<double>(fake_scores.size());
    for (std::size_t i = 0; i < real_scores.size(); ++i) gr[Eigen::Index(i)] = 1.0 - real_scores[i] > 0.0 ? -1.0 / nr : 0.0;
    for (std::size_t i = 0; i < fake_scores.size(); ++i) gf[Eigen::Index(i)] = 1.0 + fake_scores[i] > 0.0 ? 1.0 / nf : 0.0;
    return {gr, gf};
}

Eigen::VectorXd hinge_g_grad(std::span<const double> fake_scores) {
    detail::require_scores(fake_scores, "hinge_g_grad");
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(fake_scores.size()),
                                     -1.0 / static_cast<double>(fake_scores.size()));
}

Eigen::MatrixX3d reconstruction_grad(const ImageRGB& pred, const ImageRGB& target) {
    require_same_shape(pred, target);
    const double n = static_cast<double>(pred.pixels().size());
    return (pred.pixels() - target.pixels()).unaryExpr([n](double d) { return d > 0 ? 1.0 / n : d < 0 ? -1.0 / n : 0.0; });
}

Eigen::Vector3d generator_total_grad(const LossConfig& cfg) {
    cfg.validate();
    return {1.0, cfg.lambda, cfg.lambda};
}

}  // namespace harmony::dove
