#include "harmony/dove/grad_check.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "harmony/dove/layers.hpp"
#include "harmony/dove/partial_conv.hpp"

namespace harmony::dove {

GradCheckResult grad_check(const ScalarFn& loss_fn, const GradFn& grad_fn, const Eigen::VectorXd& inputs,
                           double perturbation, const KinkFn& kink) {
    if (!(perturbation >= 1e-6 && perturbation <= 1e-3)) {
        throw Error(Errc::invalid_argument, "grad_check: perturbation must lie in [1e-6, 1e-3]");
    }
    const Eigen::VectorXd analytic = grad_fn(inputs);
    if (analytic.size() != inputs.size()) throw Error(Errc::dimension_mismatch, "grad_check: gradient length mismatch");
    GradCheckResult r;
    Eigen::VectorXd x = inputs;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (kink && kink(inputs, i, perturbation)) {
            ++r.excluded;
            continue;
        }
        x[i] = inputs[i] + perturbation;
        const double fp = loss_fn(x);
        x[i] = inputs[i] - perturbation;
        const double fm = loss_fn(x);
        x[i] = inputs[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw Error(Errc::non_finite, "grad_check: non-finite loss at a perturbed point");
        }
        const double numeric = (fp - fm) / (2.0 * perturbation);
        const double a = analytic[i];
        const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        r.max_relative_error = std::max(r.max_relative_error, err);
        ++r.checked;
    }
    return r;
}

namespace {

Eigen::VectorXd gaussian_vector(Eigen::Index n, SplitMix& rng) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u1 = 1.0 - rng.uniform();
        const double u2 = rng.uniform();
        v[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    return v;
}

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

KernelCheck within(std::string name, double value, double tol) {
    return {std::move(name), value <= tol, value, tol};
}

}  // namespace

KernelCheck check_partial_conv_no_leak(const ConvWeights<double>& w, std::uint64_t seed) {
    w.validate();
    SplitMix rng(seed);
    const int channels = w.in_channels;
    FeatureMap<double> x(channels, 5, 5), m(1, 5, 5);
    for (Eigen::Index i = 0; i < x.data().size(); ++i) x.data().data()[i] = rng.uniform() * 2 - 1;
    for (Eigen::Index s = 0; s < m.sites(); ++s) m.data()(0, s) = rng.uniform() < 0.5 ? 1.0 : 0.0;
    m.data()(0, 12) = 1.0;
    const auto base = partial_conv(x, m, w, 1);
    double mismatches = 0;
    for (int c = 0; c < channels; ++c) {
        for (Eigen::Index s = 0; s < m.sites(); ++s) {
            if (m.data()(0, s) != 0.0) continue;
            for (double v : {-1e6, 0.0, 123.25, rng.uniform()}) {
                auto y = x;
                y.data()(c, s) = v;
                const auto r = partial_conv(y, m, w, 1);
                if (!(r.output == base.output) || !(r.mask == base.mask)) mismatches += 1;
            }
        }
    }
    return within("partial_conv_no_leak", mismatches, 0.0);
}

namespace {

KernelCheck check_partial_conv_full_mask(std::uint64_t seed) {
    SplitMix rng(seed);
    auto w = random_weights<double>(5, 3, 3, 3, rng.next());
    for (Eigen::Index i = 0; i < w.bias.size(); ++i) w.bias[i] = rng.uniform();
    FeatureMap<double> x(3, 7, 6), m(1, 7, 6);
    for (Eigen::Index i = 0; i < x.data().size(); ++i) x.data().data()[i] = rng.uniform();
    m.data().setOnes();
    // Interior sites only: border windows see zero padding, which counts as invalid.
    const auto pc = partial_conv(x, m, w, 1).output;
    const auto ref = conv2d(x, w, 1);
    double worst = 0;
    for (int y = 1; y < 6; ++y)
        for (int xx = 1; xx < 5; ++xx)
            for (int c = 0; c < 5; ++c) worst = std::max(worst, std::abs(pc(c, y, xx) - ref(c, y, xx)));
    return within("partial_conv_full_mask", worst, 1e-12);
}

KernelCheck check_domain_reps(std::uint64_t seed, int redraws) {
    SplitMix rng(seed);
    const auto extractor = make_extractor<double>(rng.next());
    const int w = 16, h = 12;
    ImageRGB img(w, h);
    for (Eigen::Index i = 0; i < img.pixels().size(); ++i) img.pixels().data()[i] = rng.uniform();
    Mask mask(w, h);
    for (int y = 3; y < 9; ++y)
        for (int x = 4; x < 11; ++x) mask.set(x, y, true);
    const auto base = extract_domain_reps(img, mask, extractor);
    double mismatches = 0;
    for (int k = 0; k < redraws; ++k) {
        ImageRGB bg = img, fg = img;
        for (Eigen::Index p = 0; p < img.pixel_count(); ++p) {
            for (int c = 0; c < 3; ++c) {
                if (mask.data()[p]) fg.pixels()(p, c) = rng.uniform();
                else bg.pixels()(p, c) = rng.uniform();
            }
        }
        if (extract_domain_reps(bg, mask, extractor).foreground != base.foreground) mismatches += 1;
        if (extract_domain_reps(fg, mask, extractor).background != base.background) mismatches += 1;
    }
    return within("domain_reps_invariance", mismatches, 0.0);
}

KernelCheck check_loss_examples() {
    double worst = 0;
    auto d = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
    const double one[] = {1.0}, neg[] = {-1.0}, zero[] = {0.0}, half[] = {0.5}, pm[] = {1.0, -1.0};
    d(hinge_d_loss<double>(one, neg), 0.0);
    d(hinge_d_loss<double>(zero, zero), 2.0);
    d(hinge_d_loss<double>(neg, one), 4.0);
    d(hinge_g_loss<double>(zero), 0.0);
    d(hinge_g_loss<double>(half), -0.5);
    d(hinge_g_loss<double>(pm), 0.0);
    d(generator_total_loss(1.0, -2.0, -3.0, {0.01}), 0.95);
    d(generator_total_loss(1.0, -2.0, -3.0, {0.0}), 1.0);
    Eigen::Vector2d a(1, 2), b(3, 4);
    d(domain_similarity(a, b), 11.0);
    return within("loss_examples", worst, 0.0);
}

std::vector<KernelCheck> gradient_checks(std::uint64_t seed, const LossConfig& loss) {
    SplitMix rng(seed);
    const double h = 1e-5;
    std::vector<KernelCheck> out;

    const Eigen::VectorXd lb = gaussian_vector(32, rng);
    const Eigen::VectorXd lf = gaussian_vector(32, rng);
    auto ds = grad_check([&](const Eigen::VectorXd& x) { return domain_similarity(x, lb); },
                         [&](const Eigen::VectorXd&) { return Eigen::VectorXd(domain_similarity_grad_fg(lb)); }, lf, h);
    out.push_back(within("grad_domain_similarity", ds.max_relative_error, 1e-8));

    const Eigen::Vector3d parts(0.7, -1.3, 2.1);
    auto gt = grad_check([&](const Eigen::VectorXd& x) { return generator_total_loss(x[0], x[1], x[2], loss); },
                         [&](const Eigen::VectorXd&) { return Eigen::VectorXd(generator_total_grad(loss)); }, parts, h);
    out.push_back(within("grad_generator_total", gt.max_relative_error, 1e-8));

    const Eigen::VectorXd fake = gaussian_vector(16, rng);
    auto hg = grad_check([](const Eigen::VectorXd& x) { return hinge_g_loss(as_span(x)); },
                         [](const Eigen::VectorXd& x) { return hinge_g_grad(as_span(x)); }, fake, h);
    out.push_back(within("grad_hinge_g", hg.max_relative_error, 1e-8));

    // Scores laid out as [real ; fake], with two entries pinned on the margins.
    const Eigen::Index nr = 12;
    Eigen::VectorXd scores = 1.5 * gaussian_vector(24, rng);
    scores[0] = 1.0;
    scores[nr] = -1.0;
    auto split = [nr](const Eigen::VectorXd& x) {
        return std::pair{std::span<const double>(x.data(), nr),
                         std::span<const double>(x.data() + nr, static_cast<std::size_t>(x.size() - nr))};
    };
    auto hd = grad_check(
        [&](const Eigen::VectorXd& x) {
            auto [r, f] = split(x);
            return hinge_d_loss(r, f);
        },
        [&](const Eigen::VectorXd& x) {
            auto [r, f] = split(x);
            auto [gr, gf] = hinge_d_grad(r, f);
            Eigen::VectorXd g(x.size());
            g << gr, gf;
            return g;
        },
        scores, h,
        [nr](const Eigen::VectorXd& x, Eigen::Index i, double eps) {
            const double margin = i < nr ? 1.0 - x[i] : 1.0 + x[i];
            return std::abs(margin) <= eps;
        });
    out.push_back(within("grad_hinge_d", hd.excluded == 2 ? hd.max_relative_error : 1.0, 1e-3));

    const int w = 5, ht = 4;
    ImageRGB target(w, ht);
    for (Eigen::Index i = 0; i < target.pixels().size(); ++i) target.pixels().data()[i] = rng.uniform();
    Eigen::VectorXd pred(target.pixels().size());
    for (Eigen::Index i = 0; i < pred.size(); ++i) pred[i] = target.pixels().data()[i] + (rng.uniform() - 0.5) * 0.2;
    pred[3] = target.pixels().data()[3];
    auto to_img = [&](const Eigen::VectorXd& x) {
        ImageRGB img(w, ht);
        std::copy(x.data(), x.data() + x.size(), img.pixels().data());
        return img;
    };
    auto rl = grad_check([&](const Eigen::VectorXd& x) { return reconstruction_loss(to_img(x), target); },
                         [&](const Eigen::VectorXd& x) {
                             const Eigen::MatrixX3d g = reconstruction_grad(to_img(x), target);
                             return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.data(), g.size()));
                         },
                         pred, h,
                         [&](const Eigen::VectorXd& x, Eigen::Index i, double eps) {
                             return std::abs(x[i] - target.pixels().data()[i]) <= eps;
                         });
    out.push_back(within("grad_reconstruction", rl.max_relative_error, 1e-3));
    return out;
}

KernelCheck check_spectral_norm(std::uint64_t seed, int matrices) {
    SplitMix rng(seed);
    double worst = 0;
    for (int k = 0; k < matrices; ++k) {
        const int rows = 2 + static_cast<int>(rng.below(7));
        const int cols = 2 + static_cast<int>(rng.below(7));
        Eigen::MatrixXd m(rows, cols);
        const Eigen::VectorXd g = gaussian_vector(m.size(), rng);
        std::copy(g.data(), g.data() + g.size(), m.data());
        const auto sn = spectral_normalize(m, 50, rng.next());
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(sn.weight);
        worst = std::max(worst, std::abs(svd.singularValues()[0] - 1.0));
    }
    return within("spectral_norm_svd", worst, 1e-3);
}

KernelCheck check_instance_norm(std::uint64_t seed) {
    SplitMix rng(seed);
    FeatureMap<double> x(4, 9, 7);
    for (Eigen::Index i = 0; i < x.data().size(); ++i) x.data().data()[i] = rng.uniform() * 5 - 1;
    const auto y = instance_norm(x);
    double worst = 0;
    for (int c = 0; c < y.channels(); ++c) {
        const auto row = y.data().row(c).array();
        const double mean = row.mean();
        const double var = (row - mean).square().mean();
        worst = std::max({worst, std::abs(mean) / 1e-6, var > 1.0 ? (var - 1.0) / 1e-3 + 1.0 : (1.0 - var) / 1e-3});
    }
    // Normalized against each tolerance, so the bound is 1.
    return within("instance_norm_moments", worst, 1.0);
}

KernelCheck check_attention() {
    FeatureMap<double> enc(2, 3, 4), dec(3, 3, 4);
    for (Eigen::Index i = 0; i < enc.data().size(); ++i) enc.data().data()[i] = double(i) - 5;
    for (Eigen::Index i = 0; i < dec.data().size(); ++i) dec.data().data()[i] = 0.25 * double(i);
    const auto we = ConvWeights<double>::zeros(2, 5, 1, 1);
    const auto wd = ConvWeights<double>::zeros(3, 5, 1, 1);
    const auto a = attention_block(enc, dec, we, wd);
    double worst = (a.enc_attention.data().array() - 0.5).abs().maxCoeff();
    worst = std::max(worst, (a.dec_attention.data().array() - 0.5).abs().maxCoeff());
    worst = std::max(worst, (a.output.data().topRows(2) - 0.5 * enc.data()).cwiseAbs().maxCoeff());
    worst = std::max(worst, (a.output.data().bottomRows(3) - 0.5 * dec.data()).cwiseAbs().maxCoeff());
    return within("attention_zero_weights", worst, 0.0);
}

}  // namespace

std::vector<KernelCheck> run_kernel_checks(std::uint64_t seed, const LossConfig& loss) {
    loss.validate();
    std::vector<KernelCheck> checks;
    checks.push_back(check_partial_conv_no_leak(random_weights<double>(4, 2, 3, 3, splitmix64(seed ^ 7)),
                                                splitmix64(seed ^ 1)));
    checks.push_back(check_partial_conv_full_mask(splitmix64(seed ^ 2)));
    checks.push_back(check_domain_reps(splitmix64(seed ^ 3), 100));
    checks.push_back(check_loss_examples());
    for (auto& c : gradient_checks(splitmix64(seed ^ 4), loss)) checks.push_back(std::move(c));
    checks.push_back(check_spectral_norm(splitmix64(seed ^ 5), 100));
    checks.push_back(check_instance_norm(splitmix64(seed ^ 6)));
    checks.push_back(check_attention());
    return checks;
}

}  // namespace harmony::dove
