#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <utility>

#include "harmony/error.hpp"
#include "harmony/imgcore/image.hpp"
#include "harmony/rng.hpp"

namespace harmony::dove {

/// C x H x W activation tensor. Stored as a C x (H*W) matrix: one row per
/// channel, one column per spatial site in scan order.
template <typename Scalar>
class FeatureMap {
public:
    using Data = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    FeatureMap() = default;
    FeatureMap(int channels, int height, int width)
        : channels_(channels), height_(height), width_(width), data_(Data::Zero(channels, Eigen::Index(height) * width)) {
        if (channels <= 0 || height <= 0 || width <= 0) {
            throw Error(Errc::invalid_argument, "feature map dimensions must be positive");
        }
    }
    FeatureMap(int channels, int height, int width, Data data)
        : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
        if (channels <= 0 || height <= 0 || width <= 0 || data_.rows() != channels ||
            data_.cols() != Eigen::Index(height) * width) {
            throw Error(Errc::dimension_mismatch, "feature map data does not match its dimensions");
        }
    }

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    Eigen::Index sites() const { return data_.cols(); }

    Scalar& operator()(int c, int y, int x) { return data_(c, Eigen::Index(y) * width_ + x); }
    Scalar operator()(int c, int y, int x) const { return data_(c, Eigen::Index(y) * width_ + x); }

    Data& data() { return data_; }
    const Data& data() const { return data_; }

    bool same_spatial(const FeatureMap& o) const { return height_ == o.height_ && width_ == o.width_; }
    bool operator==(const FeatureMap& o) const {
        return channels_ == o.channels_ && same_spatial(o) && data_ == o.data_;
    }

private:
    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    Data data_;
};

/// Image (3 channels) as a feature map.
template <typename Scalar>
FeatureMap<Scalar> to_feature_map(const Image<Scalar>& img) {
    return FeatureMap<Scalar>(3, img.height(), img.width(), img.pixels().transpose());
}

/// Single-channel 0/1 map of a mask.
template <typename Scalar>
FeatureMap<Scalar> to_feature_map(const Mask& mask) {
    return FeatureMap<Scalar>(1, mask.height(), mask.width(), mask.data().template cast<Scalar>().matrix().transpose());
}

/// out_ch x in_ch x kH x kW kernels flattened to an out_ch x (in_ch*kH*kW)
/// matrix with (channel, ky, kx) ordering, plus one bias per output channel.
template <typename Scalar>
struct ConvWeights {
    int out_channels = 0;
    int in_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> kernels;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;

    static ConvWeights zeros(int out_ch, int in_ch, int kh, int kw) {
        ConvWeights w{out_ch, in_ch, kh, kw,
                      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(out_ch, in_ch * kh * kw),
                      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(out_ch)};
        return w;
    }

    Scalar& at(int o, int i, int ky, int kx) { return kernels(o, (i * kernel_h + ky) * kernel_w + kx); }
    Scalar at(int o, int i, int ky, int kx) const { return kernels(o, (i * kernel_h + ky) * kernel_w + kx); }

    void validate() const {
        if (out_channels <= 0 || in_channels <= 0 || kernel_h <= 0 || kernel_w <= 0 ||
            kernels.rows() != out_channels || kernels.cols() != in_channels * kernel_h * kernel_w ||
            bias.size() != out_channels) {
            throw Error(Errc::dimension_mismatch, "malformed convolution weights");
        }
        if (!kernels.allFinite() || !bias.allFinite()) throw Error(Errc::non_finite, "non-finite convolution weights");
    }
};

/// He-style seeded initialization, N(0, 2 / fan_in), bias zero.
template <typename Scalar>
ConvWeights<Scalar> random_weights(int out_ch, int in_ch, int kh, int kw, std::uint64_t seed) {
    auto w = ConvWeights<Scalar>::zeros(out_ch, in_ch, kh, kw);
    SplitMix rng(seed);
    const double stddev = std::sqrt(2.0 / (in_ch * kh * kw));
    for (Eigen::Index i = 0; i < w.kernels.size(); ++i) {
        const double u1 = 1.0 - rng.uniform();
        const double u2 = rng.uniform();
        w.kernels.data()[i] = Scalar(stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2));
    }
    return w;
}

template <typename Scalar>
FeatureMap<Scalar> leaky_relu(FeatureMap<Scalar> x, Scalar slope) {
    x.data() = x.data().unaryExpr([slope](Scalar v) { return v > Scalar(0) ? v : slope * v; });
    return x;
}

template <typename Scalar>
FeatureMap<Scalar> sigmoid(FeatureMap<Scalar> x) {
    x.data() = x.data().unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
    return x;
}

}  // namespace harmony::dove
