#pragma once

#include <Eigen/Dense>

#include "harmony/imgcore/image.hpp"

namespace harmony {

template <typename Scalar>
struct ChannelStats {
    Eigen::Matrix<Scalar, 3, 1> mean = Eigen::Matrix<Scalar, 3, 1>::Zero();
    Eigen::Matrix<Scalar, 3, 1> std = Eigen::Matrix<Scalar, 3, 1>::Zero();
    Eigen::Matrix<Scalar, 3, 3> covariance = Eigen::Matrix<Scalar, 3, 3>::Zero();
    Eigen::Index pixel_count = 0;
};

/// Population (1/N) moments of an N x 3 pixel cloud.
template <typename Derived>
ChannelStats<typename Derived::Scalar> cloud_moments(const Eigen::MatrixBase<Derived>& cloud) {
    using Scalar = typename Derived::Scalar;
    if (cloud.rows() == 0) throw Error(Errc::empty_mask, "moments of an empty pixel set");
    ChannelStats<Scalar> s;
    s.pixel_count = cloud.rows();
    s.mean = cloud.colwise().mean().transpose();
    const auto centered = (cloud.rowwise() - s.mean.transpose()).eval();
    s.covariance = (centered.transpose() * centered) / Scalar(cloud.rows());
    s.covariance = (s.covariance + s.covariance.transpose()).eval() / Scalar(2);
    s.std = s.covariance.diagonal().cwiseMax(Scalar(0)).cwiseSqrt();
    return s;
}

/// Moments over the foreground (mask = 1) pixels only.
template <typename Scalar>
ChannelStats<Scalar> masked_moments(const Image<Scalar>& img, const Mask& mask) {
    require_same_shape(img, mask);
    if (mask.count() == 0) throw Error(Errc::empty_mask, "masked_moments: mask has no foreground pixels");
    return cloud_moments(gather(img.pixels(), mask));
}

/// Reference pixels where mask = 1, target pixels elsewhere.
template <typename Scalar>
Image<Scalar> overlay_composite(const Image<Scalar>& target, const Image<Scalar>& reference, const Mask& mask) {
    require_same_shape(target, reference);
    require_same_shape(target, mask);
    if (target.space() != ColorSpace::RGB || reference.space() != ColorSpace::RGB) {
        throw Error(Errc::unsupported, "overlay_composite expects RGB inputs");
    }
    Image<Scalar> out = target;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        if (mask[i]) out.pixels().row(i) = reference.pixels().row(i);
    }
    return out;
}

inline double foreground_ratio(const Mask& mask) {
    if (mask.size() == 0) throw Error(Errc::invalid_argument, "foreground_ratio of a zero-area mask");
    return static_cast<double>(mask.count()) / static_cast<double>(mask.size());
}

}  // namespace harmony
