#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "harmony/dove/feature_map.hpp"
#include "harmony/dove/losses.hpp"

namespace harmony::dove {

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;
using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
/// Returns true when coordinate i of x sits at a non-differentiable point.
using KinkFn = std::function<bool(const Eigen::VectorXd&, Eigen::Index, double)>;

struct GradCheckResult {
    double max_relative_error = 0.0;
    Eigen::Index checked = 0;
    Eigen::Index excluded = 0;
};

/// Compares an analytic gradient to central differences
/// (f(x + h e_i) - f(x - h e_i)) / 2h. Relative error per coordinate is
/// |analytic - numeric| / max(1, |analytic|, |numeric|). Coordinates flagged by
/// `kink` (within h of a hinge or L1 kink) are skipped.
GradCheckResult grad_check(const ScalarFn& loss_fn, const GradFn& grad_fn, const Eigen::VectorXd& inputs,
                           double perturbation, const KinkFn& kink = {});

struct KernelCheck {
    std::string name;
    bool pass = false;
    /// Largest finite-difference relative error for gradient checks, or the
    /// largest deviation for invariant checks.
    double value = 0.0;
    double tolerance = 0.0;
};

/// Exhaustive no-leak check of partial_conv with the given weights on a 5x5
/// input: every masked-out entry is perturbed and the output compared bit for
/// bit.
KernelCheck check_partial_conv_no_leak(const ConvWeights<double>& w, std::uint64_t seed);

/// Runs the invariant and gradient suites for all kernels with a seed.
std::vector<KernelCheck> run_kernel_checks(std::uint64_t seed, const LossConfig& loss = {});

}  // namespace harmony::dove
