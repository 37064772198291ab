#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>

#include "harmony/dove/feature_map.hpp"
#include "harmony/rng.hpp"

namespace harmony::dove {

template <typename Scalar>
struct AttentionOutput {
    FeatureMap<Scalar> output;  // [attended enc ; attended dec]
    FeatureMap<Scalar> enc_attention;
    FeatureMap<Scalar> dec_attention;
};

/// Attention over concatenated encoder/decoder features: two 1x1
/// convolutions on [enc ; dec] followed by sigmoid give one attention map per
/// branch; each branch is scaled elementwise by its map and the results are
/// concatenated.
template <typename Scalar>
AttentionOutput<Scalar> attention_block(const FeatureMap<Scalar>& enc, const FeatureMap<Scalar>& dec,
                                        const ConvWeights<Scalar>& w_enc, const ConvWeights<Scalar>& w_dec) {
    if (!enc.same_spatial(dec)) throw Error(Errc::dimension_mismatch, "attention_block: spatial size mismatch");
    const int in = enc.channels() + dec.channels();
    w_enc.validate();
    w_dec.validate();
    if (w_enc.kernel_h != 1 || w_enc.kernel_w != 1 || w_dec.kernel_h != 1 || w_dec.kernel_w != 1 ||
        w_enc.in_channels != in || w_dec.in_channels != in || w_enc.out_channels != enc.channels() ||
        w_dec.out_channels != dec.channels()) {
        throw Error(Errc::dimension_mismatch, "attention_block: 1x1 weights do not match feature channels");
    }
    typename FeatureMap<Scalar>::Data cat(in, enc.sites());
    cat << enc.data(), dec.data();

    FeatureMap<Scalar> a_enc(enc.channels(), enc.height(), enc.width(), (w_enc.kernels * cat).colwise() + w_enc.bias);
    FeatureMap<Scalar> a_dec(dec.channels(), dec.height(), dec.width(), (w_dec.kernels * cat).colwise() + w_dec.bias);
    a_enc = sigmoid(std::move(a_enc));
    a_dec = sigmoid(std::move(a_dec));

    typename FeatureMap<Scalar>::Data out(in, enc.sites());
    out << a_enc.data().cwiseProduct(enc.data()), a_dec.data().cwiseProduct(dec.data());
    return {FeatureMap<Scalar>(in, enc.height(), enc.width(), std::move(out)), std::move(a_enc), std::move(a_dec)};
}

/// Per-channel spatial standardization: (x - mean) / sqrt(var + epsilon),
/// population variance.
template <typename Scalar>
FeatureMap<Scalar> instance_norm(FeatureMap<Scalar> x, Scalar epsilon = Scalar(1e-5)) {
    if (!(epsilon > Scalar(0))) throw Error(Errc::invalid_argument, "instance_norm: epsilon must be positive");
    for (int c = 0; c < x.channels(); ++c) {
        auto row = x.data().row(c);
        const Scalar mean = row.mean();
        const Scalar var = (row.array() - mean).square().mean();
        row = ((row.array() - mean) / std::sqrt(var + epsilon)).matrix();
    }
    return x;
}

template <typename Scalar>
struct SpectralNormResult {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weight;
    Scalar sigma = Scalar(0);
    /// Set for an all-zero input, which is returned unchanged.
    bool zero_matrix = false;
};

/// W / sigma_max(W) with sigma_max from seeded power iteration.
template <typename Derived>
SpectralNormResult<typename Derived::Scalar> spectral_normalize(const Eigen::MatrixBase<Derived>& w, int power_iters,
                                                                std::uint64_t seed) {
    using Scalar = typename Derived::Scalar;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    if (power_iters < 1) throw Error(Errc::invalid_argument, "spectral_normalize: power_iters must be >= 1");
    SpectralNormResult<Scalar> out;
    out.weight = w;
    if (w.size() == 0 || w.cwiseAbs().maxCoeff() == Scalar(0)) {
        out.zero_matrix = true;
        return out;
    }
    SplitMix rng(seed);
    Vec u(w.rows());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double u1 = 1.0 - rng.uniform();
        const double u2 = rng.uniform();
        u[i] = Scalar(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2));
    }
    u.normalize();
    Vec v(w.cols());
    for (int it = 0; it < power_iters; ++it) {
        v = w.transpose() * u;
        const Scalar vn = v.norm();
        if (vn == Scalar(0)) break;
        v /= vn;
        u = w * v;
        const Scalar un = u.norm();
        if (un == Scalar(0)) break;
        u /= un;
    }
    out.sigma = u.dot(w * v);
    out.weight = w / out.sigma;
    return out;
}

}  // namespace harmony::dove
