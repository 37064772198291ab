#include "harmony/transfer/color_transfer.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "harmony/imgcore/color_space.hpp"
#include "harmony/rng.hpp"

namespace harmony::transfer {

namespace {

constexpr double kSigmaFloor = 1e-6;
constexpr double kCovarianceRidge = 1e-6;

void check_inputs(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference, const Mask& r_mask) {
    require_same_shape(target, t_mask);
    require_same_shape(reference, r_mask);
    if (target.space() != ColorSpace::RGB || reference.space() != ColorSpace::RGB) {
        throw Error(Errc::unsupported, "color transfer expects RGB inputs");
    }
    if (t_mask.count() == 0) throw Error(Errc::empty_mask, "target mask has no foreground pixels");
    if (r_mask.count() == 0) throw Error(Errc::empty_mask, "reference mask has no foreground pixels");
}

// Writes the transferred foreground cloud into a copy of the target and clamps
// it once. Background rows are never touched.
TransferResult finish(const ImageRGB& target, const Mask& t_mask, const Eigen::MatrixX3d& fg_rgb) {
    TransferResult out{target, 0.0};
    Eigen::Index clamped = 0;
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < t_mask.size(); ++i) {
        if (!t_mask[i]) continue;
        const auto row = fg_rgb.row(k++);
        if ((row.array() < 0.0).any() || (row.array() > 1.0).any()) ++clamped;
        out.image.pixels().row(i) = row.cwiseMax(0.0).cwiseMin(1.0);
    }
    out.clamp_fraction = static_cast<double>(clamped) / static_cast<double>(fg_rgb.rows());
    return out;
}

Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& linear) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = linear;
    return m;
}

Eigen::Matrix4d translation(const Eigen::Vector3d& offset) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topRightCorner<3, 1>() = offset;
    return m;
}

}  // namespace

std::string_view to_string(Method method) {
    switch (method) {
        case Method::REINHARD_LAB: return "REINHARD_LAB";
        case Method::XIAO_RGB: return "XIAO_RGB";
        case Method::FECKER_HIST: return "FECKER_HIST";
        case Method::PITIE_IDT: return "PITIE_IDT";
    }
    return "?";
}

Method method_from_string(std::string_view tag) {
    for (Method m : kAllMethods) {
        if (to_string(m) == tag) return m;
    }
    throw Error(Errc::parse, "unknown transfer method tag: " + std::string(tag));
}

// ---------------------------------------------------------------------------
// Reinhard: per-channel mean/std matching in l-alpha-beta.

TransferResult transfer_reinhard(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                                 const Mask& r_mask) {
    check_inputs(target, t_mask, reference, r_mask);
    const ImageRGB t_lab = convert_color_space(target, ColorSpace::LAB);
    const ImageRGB r_lab = convert_color_space(reference, ColorSpace::LAB);
    const auto ts = masked_moments(t_lab, t_mask);
    const auto rs = masked_moments(r_lab, r_mask);

    Eigen::MatrixX3d fg = gather(t_lab.pixels(), t_mask);
    for (int c = 0; c < 3; ++c) {
        if (ts.std[c] < kSigmaFloor) {
            fg.col(c).setConstant(rs.mean[c]);
        } else {
            fg.col(c) = ((fg.col(c).array() - ts.mean[c]) * (rs.std[c] / ts.std[c]) + rs.mean[c]).matrix();
        }
    }
    const ImageRGB fg_lab(static_cast<int>(fg.rows()), 1, fg, ColorSpace::LAB);
    return finish(target, t_mask, convert_color_space(fg_lab, ColorSpace::RGB).pixels());
}

// ---------------------------------------------------------------------------
// Xiao: mean/covariance matching in RGB through principal axes.

TransferMatrices principal_frame(const ChannelStats<double>& stats) {
    const Eigen::Matrix3d cov = stats.covariance + kCovarianceRidge * Eigen::Matrix3d::Identity();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Eigen::Matrix3d axes = eig.eigenvectors();
    for (int k = 0; k < 3; ++k) {
        Eigen::Index argmax = 0;
        axes.col(k).cwiseAbs().maxCoeff(&argmax);
        if (axes(argmax, k) < 0) axes.col(k) = -axes.col(k);
    }
    TransferMatrices m;
    m.translate = translation(stats.mean);
    m.rotate = homogeneous(axes);
    m.scale = homogeneous(eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal());
    return m;
}

Eigen::Matrix4d xiao_transform(const ChannelStats<double>& target, const ChannelStats<double>& reference) {
    const TransferMatrices t = principal_frame(target);
    const TransferMatrices r = principal_frame(reference);
    const Eigen::Matrix4d t_scale_inv = homogeneous(t.scale.topLeftCorner<3, 3>().diagonal().cwiseInverse().asDiagonal());
    const Eigen::Matrix4d t_rotate_inv = t.rotate.transpose();
    const Eigen::Matrix4d t_translate_inv = translation(-target.mean);
    return r.translate * r.rotate * r.scale * t_scale_inv * t_rotate_inv * t_translate_inv;
}

TransferResult transfer_xiao(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                             const Mask& r_mask) {
    check_inputs(target, t_mask, reference, r_mask);
    const Eigen::MatrixX3d fg = gather(target.pixels(), t_mask);
    const auto ts = cloud_moments(fg);
    const auto rs = masked_moments(reference, r_mask);
    const Eigen::Matrix4d m = xiao_transform(ts, rs);
    const Eigen::MatrixX3d out =
        (fg * m.topLeftCorner<3, 3>().transpose()).rowwise() + m.topRightCorner<3, 1>().transpose();
    return finish(target, t_mask, out);
}

// ---------------------------------------------------------------------------
// Histogram matching.

int level_of(double value, double lo, double hi, int bins) {
    const double t = hi > lo ? (value - lo) / (hi - lo) : 0.0;
    const long level = std::lround(t * (bins - 1));
    return static_cast<int>(std::clamp<long>(level, 0, bins - 1));
}

namespace {

std::vector<double> cumulative(std::span<const double> values, double lo, double hi, int bins) {
    std::vector<double> cdf(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) cdf[static_cast<std::size_t>(level_of(v, lo, hi, bins))] += 1.0;
    double running = 0.0;
    for (double& c : cdf) {
        running += c;
        c = running / static_cast<double>(values.size());
    }
    return cdf;
}

void check_bins(int bins) {
    if (bins < 64 || bins > 65536) throw Error(Errc::invalid_argument, "bin count must lie in [64, 65536]");
}

}  // namespace

std::vector<int> cdf_lookup_table(std::span<const double> source, std::span<const double> reference, double lo,
                                  double hi, int bins) {
    if (source.empty() || reference.empty()) throw Error(Errc::empty_mask, "histogram match of an empty sample");
    const auto src_cdf = cumulative(source, lo, hi, bins);
    const auto ref_cdf = cumulative(reference, lo, hi, bins);
    std::vector<int> lut(static_cast<std::size_t>(bins));
    for (int i = 0; i < bins; ++i) {
        const double c = src_cdf[static_cast<std::size_t>(i)];
        // First level at or above c; its predecessor (if any) is the other candidate.
        const auto above = std::lower_bound(ref_cdf.begin(), ref_cdf.end(), c);
        auto best = above == ref_cdf.end() ? std::prev(above) : above;
        if (above != ref_cdf.begin()) {
            const auto below = std::prev(above);
            if (above == ref_cdf.end() || c - *below <= *above - c) {
                // Lowest level sharing the predecessor's CDF value.
                best = std::lower_bound(ref_cdf.begin(), ref_cdf.end(), *below);
            }
        }
        lut[static_cast<std::size_t>(i)] = static_cast<int>(best - ref_cdf.begin());
    }
    return lut;
}

Eigen::VectorXd histogram_match_1d(std::span<const double> source, std::span<const double> reference, double lo,
                                   double hi, int bins) {
    const auto lut = cdf_lookup_table(source, reference, lo, hi, bins);
    std::vector<double> sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
    for (double v : reference) {
        const auto l = static_cast<std::size_t>(level_of(v, lo, hi, bins));
        sum[l] += v;
        ++count[l];
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(source.size()));
    for (std::size_t k = 0; k < source.size(); ++k) {
        const auto j = static_cast<std::size_t>(lut[static_cast<std::size_t>(level_of(source[k], lo, hi, bins))]);
        out[static_cast<Eigen::Index>(k)] =
            count[j] ? sum[j] / static_cast<double>(count[j]) : lo + (hi - lo) * static_cast<double>(j) / (bins - 1);
    }
    return out;
}

TransferResult histogram_transfer(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                                  const Mask& r_mask, int bins, ColorSpace space) {
    check_inputs(target, t_mask, reference, r_mask);
    check_bins(bins);
    const ImageRGB t_conv = convert_color_space(target, space);
    const ImageRGB r_conv = convert_color_space(reference, space);
    Eigen::MatrixX3d fg = gather(t_conv.pixels(), t_mask);
    const Eigen::MatrixX3d ref = gather(r_conv.pixels(), r_mask);
    for (int c = 0; c < 3; ++c) {
        const Eigen::VectorXd src = fg.col(c);
        const Eigen::VectorXd rv = ref.col(c);
        fg.col(c) = histogram_match_1d(std::span(src.data(), static_cast<std::size_t>(src.size())),
                                       std::span(rv.data(), static_cast<std::size_t>(rv.size())), 0.0, 1.0, bins);
    }
    const ImageRGB fg_img(static_cast<int>(fg.rows()), 1, fg, space);
    return finish(target, t_mask, convert_color_space(fg_img, ColorSpace::RGB).pixels());
}

TransferResult transfer_fecker(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                               const Mask& r_mask, int bins) {
    return histogram_transfer(target, t_mask, reference, r_mask, bins, ColorSpace::YCBCR);
}

// ---------------------------------------------------------------------------
// Pitie: iterative 1D matching along random orthonormal bases.

Eigen::VectorXd quantile_match_1d(std::span<const double> source, std::span<const double> reference) {
    if (source.empty() || reference.empty()) throw Error(Errc::empty_mask, "quantile match of an empty sample");
    std::vector<double> ref(reference.begin(), reference.end());
    std::sort(ref.begin(), ref.end());
    std::vector<std::size_t> order(source.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return source[a] < source[b]; });

    const double n_src = static_cast<double>(source.size());
    const double n_ref = static_cast<double>(ref.size());
    auto quantile = [&](std::size_t rank) {
        const double pos = std::clamp((static_cast<double>(rank) + 0.5) / n_src * n_ref - 0.5, 0.0, n_ref - 1.0);
        const auto lo = static_cast<std::size_t>(pos);
        const auto hi = std::min(lo + 1, ref.size() - 1);
        const double w = pos - static_cast<double>(lo);
        return w == 0.0 ? ref[lo] : (1.0 - w) * ref[lo] + w * ref[hi];
    };
    Eigen::VectorXd out(static_cast<Eigen::Index>(source.size()));
    for (std::size_t begin = 0; begin < order.size();) {
        std::size_t end = begin + 1;
        while (end < order.size() && source[order[end]] == source[order[begin]]) ++end;
        // Equal inputs share the mean of their quantiles.
        double sum = 0.0;
        for (std::size_t rank = begin; rank < end; ++rank) sum += quantile(rank);
        const double value = end - begin == 1 ? sum : sum / static_cast<double>(end - begin);
        for (std::size_t rank = begin; rank < end; ++rank) out[static_cast<Eigen::Index>(order[rank])] = value;
        begin = end;
    }
    return out;
}

std::vector<Eigen::Matrix3d> random_rotations(int count, std::uint64_t seed) {
    SplitMix rng(seed);
    auto gaussian = [&rng]() {
        // Box-Muller on a platform-independent uniform stream.
        const double u1 = 1.0 - rng.uniform();
        const double u2 = rng.uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    };
    std::vector<Eigen::Matrix3d> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) {
        Eigen::Matrix3d g;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) g(r, c) = gaussian();
        Eigen::HouseholderQR<Eigen::Matrix3d> qr(g);
        Eigen::Matrix3d q = qr.householderQ();
        const Eigen::Matrix3d upper = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int k = 0; k < 3; ++k) {
            if (upper(k, k) < 0) q.col(k) = -q.col(k);
        }
        out.push_back(q);
    }
    return out;
}

TransferResult transfer_pitie_with_rotations(const ImageRGB& target, const Mask& t_mask,
                                             const ImageRGB& reference, const Mask& r_mask,
                                             std::span<const Eigen::Matrix3d> rotations,
                                             std::vector<Eigen::MatrixX3d>* trace) {
    check_inputs(target, t_mask, reference, r_mask);
    if (rotations.empty()) throw Error(Errc::invalid_argument, "iterative transfer needs at least one iteration");
    Eigen::MatrixX3d fg = gather(target.pixels(), t_mask);
    const Eigen::MatrixX3d ref = gather(reference.pixels(), r_mask);
    for (const Eigen::Matrix3d& rot : rotations) {
        Eigen::MatrixX3d proj = fg * rot;
        const Eigen::MatrixX3d ref_proj = ref * rot;
        for (int k = 0; k < 3; ++k) {
            const Eigen::VectorXd src = proj.col(k);
            const Eigen::VectorXd rv = ref_proj.col(k);
            proj.col(k) = quantile_match_1d(std::span(src.data(), static_cast<std::size_t>(src.size())),
                                            std::span(rv.data(), static_cast<std::size_t>(rv.size())));
        }
        fg = proj * rot.transpose();
        if (trace) trace->push_back(fg);
    }
    return finish(target, t_mask, fg);
}

TransferResult transfer_pitie(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                              const Mask& r_mask, int iters, std::uint64_t seed) {
    if (iters < 1) throw Error(Errc::invalid_argument, "iteration count must be >= 1");
    const auto rotations = random_rotations(iters, seed);
    return transfer_pitie_with_rotations(target, t_mask, reference, r_mask, rotations);
}

// ---------------------------------------------------------------------------

Method choose_method(std::uint64_t seed) {
    SplitMix rng(seed);
    return kAllMethods[rng.below(4)];
}

TransferResult apply(Method method, const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                     const Mask& r_mask, std::uint64_t seed, const Params& params) {
    switch (method) {
        case Method::REINHARD_LAB: return transfer_reinhard(target, t_mask, reference, r_mask);
        case Method::XIAO_RGB: return transfer_xiao(target, t_mask, reference, r_mask);
        case Method::FECKER_HIST: return transfer_fecker(target, t_mask, reference, r_mask, params.fecker_bins);
        case Method::PITIE_IDT:
            return transfer_pitie(target, t_mask, reference, r_mask, params.pitie_iters, splitmix64(seed));
    }
    throw Error(Errc::unsupported, "unknown transfer method");
}

RandomTransfer random_transfer(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                               const Mask& r_mask, std::uint64_t seed, const Params& params) {
    const Method method = choose_method(seed);
    return {apply(method, target, t_mask, reference, r_mask, seed, params), method};
}

}  // namespace harmony::transfer
