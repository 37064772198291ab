#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "harmony/imgcore/image.hpp"
#include "harmony/imgcore/masked_stats.hpp"

namespace harmony::transfer {

/// One representative method per quadrant of {parametric, non-parametric} x
/// {decorrelated, correlated} color space.
enum class Method { REINHARD_LAB, XIAO_RGB, FECKER_HIST, PITIE_IDT };

inline constexpr Method kAllMethods[] = {Method::REINHARD_LAB, Method::XIAO_RGB, Method::FECKER_HIST,
                                         Method::PITIE_IDT};

std::string_view to_string(Method method);
Method method_from_string(std::string_view tag);

struct Params {
    int pitie_iters = 10;
    int fecker_bins = 256;
};

struct TransferResult {
    ImageRGB image;
    /// Fraction of foreground pixels with at least one channel clamped to [0, 1].
    double clamp_fraction = 0.0;
};

/// Affine factors of one pixel cloud, in homogeneous 4x4 form: T translates
/// the origin to the mean, R holds the principal axes as columns, S scales by
/// the per-axis standard deviations.
struct TransferMatrices {
    Eigen::Matrix4d translate = Eigen::Matrix4d::Identity();
    Eigen::Matrix4d rotate = Eigen::Matrix4d::Identity();
    Eigen::Matrix4d scale = Eigen::Matrix4d::Identity();
};

/// Principal-axis decomposition of a covariance, regularized by 1e-6 I.
/// Eigenvectors are ordered by ascending eigenvalue with the largest-magnitude
/// component of each made positive.
TransferMatrices principal_frame(const ChannelStats<double>& stats);

/// Homogeneous map that carries the target cloud's mean/covariance onto the
/// reference cloud's: T_r R_r S_r S_t^-1 R_t^T T_t^-1.
Eigen::Matrix4d xiao_transform(const ChannelStats<double>& target, const ChannelStats<double>& reference);

TransferResult transfer_reinhard(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                                 const Mask& r_mask);

TransferResult transfer_xiao(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                             const Mask& r_mask);

/// Per-channel cumulative-histogram matching in `space` (YCbCr for the
/// Fecker method) with nearest-neighbour level assignment.
TransferResult histogram_transfer(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                                  const Mask& r_mask, int bins, ColorSpace space);

TransferResult transfer_fecker(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                               const Mask& r_mask, int bins = 256);

TransferResult transfer_pitie(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                              const Mask& r_mask, int iters = 10, std::uint64_t seed = 0);

/// Iterative distribution transfer with caller-supplied rotations (one per
/// iteration). `trace`, when non-null, receives the foreground cloud after
/// every iteration, before clamping.
TransferResult transfer_pitie_with_rotations(const ImageRGB& target, const Mask& t_mask,
                                             const ImageRGB& reference, const Mask& r_mask,
                                             std::span<const Eigen::Matrix3d> rotations,
                                             std::vector<Eigen::MatrixX3d>* trace = nullptr);

/// Seeded orthonormal rotations (QR of Gaussian matrices, sign-corrected).
std::vector<Eigen::Matrix3d> random_rotations(int count, std::uint64_t seed);

struct RandomTransfer {
    TransferResult result;
    Method method;
};

Method choose_method(std::uint64_t seed);

TransferResult apply(Method method, const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                     const Mask& r_mask, std::uint64_t seed, const Params& params = {});

/// Uniform seeded choice among the four methods.
RandomTransfer random_transfer(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                               const Mask& r_mask, std::uint64_t seed, const Params& params = {});

/// Quantized level of a value on a [lo, hi] grid with `bins` levels.
int level_of(double value, double lo, double hi, int bins);

/// Nearest-neighbour CDF lookup table from source levels to reference levels.
/// Entry i is the reference level whose CDF is closest to the source CDF at
/// level i (ties to the lower level).
std::vector<int> cdf_lookup_table(std::span<const double> source, std::span<const double> reference, double lo,
                                  double hi, int bins);

/// Histogram matching of `source` values onto the distribution of `reference`.
/// Each mapped value is the mean of the reference samples falling in the
/// selected level (the level's grid value when that level is empty).
Eigen::VectorXd histogram_match_1d(std::span<const double> source, std::span<const double> reference, double lo,
                                   double hi, int bins);

/// Exact quantile matching: the k-th smallest source value moves to the
/// reference quantile at (k + 0.5) / n_source, linearly interpolated. Equal
/// source values all receive the mean of their quantiles.
Eigen::VectorXd quantile_match_1d(std::span<const double> source, std::span<const double> reference);

}  // namespace harmony::transfer
