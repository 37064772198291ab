#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "harmony/imgcore/image.hpp"

namespace harmony {

namespace color_detail {

/// RGB -> LMS cone response, with each row rescaled to sum to one so that the
/// achromatic axis R = G = B maps to L = M = S (and therefore alpha = beta = 0).
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> rgb_to_lms() {
    Eigen::Matrix<double, 3, 3> m;
    m << 0.3811, 0.5783, 0.0402,
         0.1967, 0.7244, 0.0782,
         0.0241, 0.1288, 0.8444;
    for (int r = 0; r < 3; ++r) m.row(r) /= m.row(r).sum();
    return m.cast<Scalar>();
}

/// log-LMS -> l-alpha-beta decorrelation.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> log_lms_to_lab() {
    Eigen::Matrix<double, 3, 3> mix;
    mix << 1, 1, 1,
           1, 1, -2,
           1, -1, 0;
    const Eigen::Vector3d scale(1.0 / std::sqrt(3.0), 1.0 / std::sqrt(6.0), 1.0 / std::sqrt(2.0));
    return (scale.asDiagonal() * mix).cast<Scalar>();
}

/// Full-range BT.601, chroma offset by 0.5.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> rgb_to_ycbcr() {
    Eigen::Matrix<double, 3, 3> m;
    m << 0.299, 0.587, 0.114,
         -0.168736, -0.331264, 0.5,
         0.5, -0.418688, -0.081312;
    return m.cast<Scalar>();
}

template <typename Scalar>
Eigen::Matrix<Scalar, 1, 3> ycbcr_offset() {
    return Eigen::Matrix<Scalar, 1, 3>(Scalar(0), Scalar(0.5), Scalar(0.5));
}

template <typename Scalar>
constexpr Scalar log_epsilon() {
    return Scalar(1) / Scalar(255 * 255);
}

template <typename Scalar>
typename Image<Scalar>::PixelMatrix to_rgb(const Image<Scalar>& img) {
    using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
    switch (img.space()) {
        case ColorSpace::RGB:
            return img.pixels();
        case ColorSpace::YCBCR: {
            const Mat3 inv = rgb_to_ycbcr<Scalar>().inverse();
            return (img.pixels().rowwise() - ycbcr_offset<Scalar>()) * inv.transpose();
        }
        case ColorSpace::LAB: {
            const Mat3 lab_inv = log_lms_to_lab<Scalar>().inverse();
            const Mat3 lms_inv = rgb_to_lms<Scalar>().inverse();
            typename Image<Scalar>::PixelMatrix log_lms = img.pixels() * lab_inv.transpose();
            typename Image<Scalar>::PixelMatrix lms =
                (log_lms.array() * Scalar(std::log(10.0))).exp() - log_epsilon<Scalar>();
            return lms * lms_inv.transpose();
        }
    }
    throw Error(Errc::unsupported, "unknown color space");
}

template <typename Scalar>
typename Image<Scalar>::PixelMatrix from_rgb(const typename Image<Scalar>::PixelMatrix& rgb, ColorSpace target) {
    switch (target) {
        case ColorSpace::RGB:
            return rgb;
        case ColorSpace::YCBCR:
            return (rgb * rgb_to_ycbcr<Scalar>().transpose()).rowwise() + ycbcr_offset<Scalar>();
        case ColorSpace::LAB: {
            const typename Image<Scalar>::PixelMatrix lms =
                (rgb * rgb_to_lms<Scalar>().transpose()).array() + log_epsilon<Scalar>();
            if ((lms.array() <= Scalar(0)).any()) {
                throw Error(Errc::non_finite, "negative cone response before log transform");
            }
            const typename Image<Scalar>::PixelMatrix log_lms = lms.array().log10();
            return log_lms * log_lms_to_lab<Scalar>().transpose();
        }
    }
    throw Error(Errc::unsupported, "unknown color space");
}

}  // namespace color_detail

/// Converts between RGB and the decorrelated spaces (l-alpha-beta, YCbCr).
/// Non-RGB pairs are routed through RGB.
template <typename Scalar>
Image<Scalar> convert_color_space(const Image<Scalar>& img, ColorSpace target) {
    if (img.space() == target) return img;
    auto rgb = color_detail::to_rgb(img);
    auto out = color_detail::from_rgb<Scalar>(rgb, target);
    if (!out.allFinite()) {
        throw Error(Errc::non_finite, std::string("non-finite pixel converting to ") + std::string(to_string(target)));
    }
    return Image<Scalar>(img.width(), img.height(), std::move(out), target);
}

/// HSV hue in degrees [0, 360) and saturation in [0, 1] of an RGB pixel.
template <typename Scalar>
std::pair<Scalar, Scalar> hue_saturation(Scalar r, Scalar g, Scalar b) {
    const Scalar mx = std::max({r, g, b});
    const Scalar mn = std::min({r, g, b});
    const Scalar delta = mx - mn;
    const Scalar sat = mx > Scalar(0) ? delta / mx : Scalar(0);
    if (delta <= Scalar(0)) return {Scalar(0), sat};
    Scalar hue;
    if (mx == r) {
        hue = Scalar(60) * std::fmod((g - b) / delta, Scalar(6));
    } else if (mx == g) {
        hue = Scalar(60) * ((b - r) / delta + Scalar(2));
    } else {
        hue = Scalar(60) * ((r - g) / delta + Scalar(4));
    }
    if (hue < Scalar(0)) hue += Scalar(360);
    return {hue, sat};
}

}  // namespace harmony
