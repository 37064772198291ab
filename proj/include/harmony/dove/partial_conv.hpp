#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "harmony/dove/feature_map.hpp"
#include "harmony/imgcore/image.hpp"

namespace harmony::dove {

template <typename Scalar>
struct PartialConvResult {
    FeatureMap<Scalar> output;
    /// Single channel: 1 where the window saw at least one valid input.
    FeatureMap<Scalar> mask;
};

namespace detail {

/// Gathers every kH x kW window (zero padding of k/2, given stride) into the
/// columns of a (C*kH*kW) x (out sites) matrix, rows ordered (c, ky, kx).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> im2col(const FeatureMap<Scalar>& x, int kh, int kw, int stride,
                                                             int out_h, int out_w) {
    const int pad_y = kh / 2, pad_x = kw / 2;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cols =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(Eigen::Index(x.channels()) * kh * kw,
                                                                    Eigen::Index(out_h) * out_w);
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            const Eigen::Index col = Eigen::Index(oy) * out_w + ox;
            for (int c = 0; c < x.channels(); ++c) {
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride + ky - pad_y;
                    if (iy < 0 || iy >= x.height()) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride + kx - pad_x;
                        if (ix < 0 || ix >= x.width()) continue;
                        cols((Eigen::Index(c) * kh + ky) * kw + kx, col) = x(c, iy, ix);
                    }
                }
            }
        }
    }
    return cols;
}

inline int out_extent(int in, int k, int stride) { return (in + 2 * (k / 2) - k) / stride + 1; }

}  // namespace detail

/// Partial convolution with "same" zero padding. At each output site the
/// kernel sees input * mask; the response is rescaled by
/// (window size) / (valid count in window) and the bias added. Sites whose
/// window holds no valid input output 0 with the bias suppressed.
///
/// `mask` is either single-channel (broadcast over input channels) or has one
/// channel per input channel.
template <typename Scalar>
PartialConvResult<Scalar> partial_conv(const FeatureMap<Scalar>& input, const FeatureMap<Scalar>& mask,
                                       const ConvWeights<Scalar>& w, int stride = 1) {
    w.validate();
    if (stride < 1) throw Error(Errc::invalid_argument, "stride must be >= 1");
    if (!input.same_spatial(mask) || (mask.channels() != 1 && mask.channels() != input.channels())) {
        throw Error(Errc::dimension_mismatch, "partial_conv: mask is not broadcastable to the input");
    }
    if (w.in_channels != input.channels()) {
        throw Error(Errc::dimension_mismatch, "partial_conv: weight in_channels does not match input");
    }
    if (w.kernel_h % 2 == 0 || w.kernel_w % 2 == 0) {
        throw Error(Errc::invalid_argument, "partial_conv: same padding needs odd kernel sizes");
    }
    const int out_h = detail::out_extent(input.height(), w.kernel_h, stride);
    const int out_w = detail::out_extent(input.width(), w.kernel_w, stride);

    FeatureMap<Scalar> masked = input;
    if (mask.channels() == 1) {
        masked.data() = (input.data().array().rowwise() * mask.data().row(0).array()).matrix();
    } else {
        masked.data() = input.data().cwiseProduct(mask.data());
    }
    const auto cols = detail::im2col(masked, w.kernel_h, w.kernel_w, stride, out_h, out_w);
    const auto mask_cols = detail::im2col(mask, w.kernel_h, w.kernel_w, stride, out_h, out_w);
    const Scalar window = Scalar(Eigen::Index(mask.channels()) * w.kernel_h * w.kernel_w);

    FeatureMap<Scalar> out(w.out_channels, out_h, out_w);
    FeatureMap<Scalar> out_mask(1, out_h, out_w);
    out.data() = w.kernels * cols;
    for (Eigen::Index s = 0; s < out.sites(); ++s) {
        const Scalar valid = mask_cols.col(s).sum();
        if (valid > Scalar(0)) {
            out.data().col(s) = out.data().col(s) * (window / valid) + w.bias;
            out_mask.data()(0, s) = Scalar(1);
        } else {
            out.data().col(s).setZero();
        }
    }
    return {std::move(out), std::move(out_mask)};
}

/// Plain convolution with the same padding/stride conventions (reference for
/// the all-valid case).
template <typename Scalar>
FeatureMap<Scalar> conv2d(const FeatureMap<Scalar>& input, const ConvWeights<Scalar>& w, int stride = 1) {
    w.validate();
    if (w.in_channels != input.channels()) throw Error(Errc::dimension_mismatch, "conv2d: channel mismatch");
    const int out_h = detail::out_extent(input.height(), w.kernel_h, stride);
    const int out_w = detail::out_extent(input.width(), w.kernel_w, stride);
    FeatureMap<Scalar> out(w.out_channels, out_h, out_w);
    out.data() = (w.kernels * detail::im2col(input, w.kernel_h, w.kernel_w, stride, out_h, out_w)).colwise() + w.bias;
    return out;
}

/// Stack of partial-conv layers, each followed by LeakyReLU.
template <typename Scalar>
struct Extractor {
    std::vector<ConvWeights<Scalar>> layers;
    int stride = 2;
    Scalar slope = Scalar(0.2);

    int output_dim() const { return layers.empty() ? 0 : layers.back().out_channels; }
};

/// Desk-scale extractor: 3x3 kernels, stride 2, channels 3 -> 8 -> 16 -> 32.
template <typename Scalar>
Extractor<Scalar> make_extractor(std::uint64_t seed, std::vector<int> channels = {3, 8, 16, 32}, int kernel = 3) {
    Extractor<Scalar> e;
    for (std::size_t i = 0; i + 1 < channels.size(); ++i) {
        e.layers.push_back(random_weights<Scalar>(channels[i + 1], channels[i], kernel, kernel, splitmix64(seed + i)));
    }
    return e;
}

/// Feature map after the whole stack plus its propagated validity mask.
template <typename Scalar>
PartialConvResult<Scalar> run_extractor(const Extractor<Scalar>& extractor, FeatureMap<Scalar> x,
                                        FeatureMap<Scalar> mask) {
    if (extractor.layers.empty()) throw Error(Errc::invalid_argument, "extractor has no layers");
    for (const auto& layer : extractor.layers) {
        auto r = partial_conv(x, mask, layer, extractor.stride);
        x = leaky_relu(std::move(r.output), extractor.slope);
        mask = std::move(r.mask);
    }
    return {std::move(x), std::move(mask)};
}

template <typename Scalar>
struct DomainReps {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> foreground;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> background;
    /// Set when the mask is all zeros or all ones; the vectors are then empty.
    bool degenerate = false;
};

/// Average of the final map over sites whose propagated mask is 1.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> masked_average_pool(const FeatureMap<Scalar>& x, const FeatureMap<Scalar>& mask) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> acc = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(x.channels());
    Scalar n(0);
    for (Eigen::Index s = 0; s < x.sites(); ++s) {
        if (mask.data()(0, s) > Scalar(0)) {
            acc += x.data().col(s);
            n += Scalar(1);
        }
    }
    if (n == Scalar(0)) throw Error(Errc::empty_mask, "pooling over an empty validity mask");
    return acc / n;
}

/// Foreground and background domain representations: the same extractor run
/// on (I * M, M) and on (I * (1 - M), 1 - M), each pooled over its own mask.
template <typename Scalar>
DomainReps<Scalar> extract_domain_reps(const Image<Scalar>& img, const Mask& mask, const Extractor<Scalar>& extractor) {
    require_same_shape(img, mask);
    DomainReps<Scalar> reps;
    const Eigen::Index fg = mask.count();
    if (fg == 0 || fg == mask.size()) {
        reps.degenerate = true;
        return reps;
    }
    const FeatureMap<Scalar> x = to_feature_map(img);
    auto run = [&](const Mask& m) {
        const FeatureMap<Scalar> mm = to_feature_map<Scalar>(m);
        FeatureMap<Scalar> masked = x;
        masked.data() = (x.data().array().rowwise() * mm.data().row(0).array()).matrix();
        const auto r = run_extractor(extractor, std::move(masked), mm);
        return masked_average_pool(r.output, r.mask);
    };
    reps.foreground = run(mask);
    reps.background = run(mask.complement());
    return reps;
}

}  // namespace harmony::dove
