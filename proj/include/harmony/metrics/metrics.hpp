#pragma once

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "harmony/imgcore/image.hpp"
#include "harmony/synth/records.hpp"

namespace harmony::metrics {

inline constexpr double kPeak = 255.0;
inline constexpr double kPsnrCap = 100.0;
inline constexpr int kEvalSize = 256;

/// Mean squared error over all H*W*3 entries on the 0-255 scale.
template <typename Scalar>
double mse(const Image<Scalar>& a, const Image<Scalar>& b) {
    require_same_shape(a, b);
    const auto diff = ((a.pixels() - b.pixels()).template cast<double>() * kPeak).eval();
    return diff.squaredNorm() / static_cast<double>(diff.size());
}

/// 10 log10(255^2 / mse), capped at 100 dB once mse < 255^2 * 1e-10.
inline double psnr_from_mse(double mse_value) {
    if (mse_value < kPeak * kPeak * 1e-10) return kPsnrCap;
    return 10.0 * std::log10(kPeak * kPeak / mse_value);
}

template <typename Scalar>
double psnr(const Image<Scalar>& a, const Image<Scalar>& b) {
    return psnr_from_mse(mse(a, b));
}

/// MSE restricted to the foreground: squared error summed over foreground
/// pixels and channels, divided by (foreground pixel count * 3).
template <typename Scalar>
double fmse(const Image<Scalar>& a, const Image<Scalar>& b, const Mask& mask) {
    require_same_shape(a, b);
    require_same_shape(a, mask);
    const Eigen::Index n = mask.count();
    if (n == 0) throw Error(Errc::empty_mask, "fmse: mask has no foreground pixels");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        if (mask[i]) sum += ((a.pixels().row(i) - b.pixels().row(i)).template cast<double>() * kPeak).squaredNorm();
    }
    return sum / static_cast<double>(n * 3);
}

struct ImagePairEval {
    std::string id;
    double mse = 0.0;
    double psnr = 0.0;
    double fmse = 0.0;
    double foreground_ratio = 0.0;
    std::string method;
    std::string category;
    std::string sub_dataset;
};

struct Aggregate {
    std::size_t count = 0;
    double mse = 0.0;
    double psnr = 0.0;
    double fmse = 0.0;
};

/// Table 4 style ratio buckets: [0, 0.05), [0.05, 0.15), [0.15, 1].
std::vector<double> default_bucket_edges();

/// Bucket index for a ratio: intervals are [lo, hi), the last one closed at 1.
std::size_t bucket_index(double ratio, const std::vector<double>& edges);
std::string bucket_label(const std::vector<double>& edges, std::size_t index);

struct MetricsReport {
    std::string label;
    std::vector<ImagePairEval> per_image;
    std::vector<double> bucket_edges;
    Aggregate overall;
    std::vector<Aggregate> buckets;
    std::map<std::string, Aggregate> by_method;
    std::map<std::string, Aggregate> by_category;
    std::map<std::string, Aggregate> by_sub_dataset;
    std::size_t missing = 0;
};

/// Arithmetic mean of the given evaluations (sorted by id before summing, so
/// the result does not depend on input order).
Aggregate aggregate(std::vector<ImagePairEval> evals);

/// Assigns every evaluation to exactly one bucket and computes all aggregates.
MetricsReport bucket_by_ratio(std::vector<ImagePairEval> evals, const std::vector<double>& edges);

/// Metrics for one pair after bilinear resize to 256x256 and 8-bit
/// quantization (mask resized nearest-neighbour).
ImagePairEval evaluate_pair(const ImageRGB& candidate, const ImageRGB& real, const Mask& mask);

struct EvalOptions {
    std::string split = "test";  // "train", "test" or "all"
    std::string label;           // empty: derived from the candidate directory
    std::vector<double> bucket_edges = default_bucket_edges();
    int workers = 1;
};

/// Candidate lookup: `<candidates>/<record id>.png`, falling back to the file
/// name of the record's real image (so a `real/` directory works as the
/// identity oracle and `composite/` gives the input-composite row).
MetricsReport evaluate_set(const synth::Manifest& manifest, const std::filesystem::path& root,
                           const std::filesystem::path& candidate_dir, const EvalOptions& options = {});

std::string format_table(const MetricsReport& report);
std::string report_json(const MetricsReport& report);
std::string buckets_csv(const MetricsReport& report);

}  // namespace harmony::metrics
