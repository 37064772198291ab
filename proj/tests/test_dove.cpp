#include <doctest.h>

#include <Eigen/SVD>

#include <fstream>

#include "harmony/dove/grad_check.hpp"
#include "harmony/dove/layers.hpp"
#include "harmony/dove/losses.hpp"
#include "harmony/dove/partial_conv.hpp"
#include "harmony/dove/weights_io.hpp"
#include "harmony/error.hpp"
#include "harmony/rng.hpp"
#include "support.hpp"

using namespace harmony;
using namespace harmony::dove;
namespace fs = std::filesystem;

namespace {

FeatureMap<double> random_map(int c, int h, int w, std::uint64_t seed) {
    SplitMix rng(seed);
    FeatureMap<double> x(c, h, w);
    for (Eigen::Index i = 0; i < x.data().size(); ++i) x.data().data()[i] = 2.0 * rng.uniform() - 1.0;
    return x;
}

std::span<const double> sp(const std::vector<double>& v) { return {v.data(), v.size()}; }

ImageRGB mirror(const ImageRGB& img) {
    ImageRGB out = img;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out.pixels().row(Eigen::Index(y) * img.width() + x) =
                img.pixels().row(Eigen::Index(y) * img.width() + (img.width() - 1 - x));
    return out;
}

Mask mirror(const Mask& m) {
    Mask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) out.set(x, y, m.at(m.width() - 1 - x, y));
    return out;
}

}  // namespace

TEST_CASE("partial_conv") {
    SUBCASE("hand-computed window") {
        auto w = ConvWeights<double>::zeros(1, 1, 3, 3);
        w.kernels.setOnes();
        FeatureMap<double> x(1, 3, 3);
        x.data().setOnes();
        FeatureMap<double> m(1, 3, 3);
        m(0, 0, 0) = m(0, 0, 2) = m(0, 2, 0) = m(0, 2, 2) = 1.0;
        const auto r = partial_conv(x, m, w);
        CHECK(r.output(0, 1, 1) == 9.0);
        CHECK(r.mask(0, 1, 1) == 1.0);
    }
    SUBCASE("all-ones mask matches plain convolution inside") {
        const auto w = random_weights<double>(4, 3, 3, 3, 5);
        auto wb = w;
        wb.bias << 0.1, -0.2, 0.3, 0.0;
        const auto x = random_map(3, 7, 6, 6);
        FeatureMap<double> m(1, 7, 6);
        m.data().setOnes();
        const auto pc = partial_conv(x, m, wb).output;
        const auto ref = conv2d(x, wb);
        for (int y = 1; y < 6; ++y)
            for (int xx = 1; xx < 5; ++xx)
                for (int c = 0; c < 4; ++c) CHECK(pc(c, y, xx) == doctest::Approx(ref(c, y, xx)).epsilon(1e-12));
    }
    SUBCASE("empty window outputs zero without bias") {
        auto w = random_weights<double>(2, 1, 3, 3, 1);
        w.bias << 5.0, -5.0;
        const auto x = random_map(1, 6, 6, 2);
        FeatureMap<double> m(1, 6, 6);
        m(0, 0, 0) = 1.0;
        const auto r = partial_conv(x, m, w);
        CHECK(r.output(0, 5, 5) == 0.0);
        CHECK(r.output(1, 5, 5) == 0.0);
        CHECK(r.mask(0, 5, 5) == 0.0);
        CHECK(r.mask(0, 1, 1) == 1.0);
    }
    SUBCASE("background perturbation never leaks") {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const auto check = check_partial_conv_no_leak(random_weights<double>(3, 2, 3, 3, seed), seed);
            CHECK_MESSAGE(check.pass, check.name);
            CHECK(check.value == 0.0);
        }
    }
    SUBCASE("shape errors") {
        const auto w = random_weights<double>(2, 3, 3, 3, 1);
        CHECK_THROWS_AS(partial_conv(random_map(2, 4, 4, 1), FeatureMap<double>(1, 4, 4), w), Error);
        CHECK_THROWS_AS(partial_conv(random_map(3, 4, 4, 1), FeatureMap<double>(1, 5, 4), w), Error);
        CHECK_THROWS_AS(partial_conv(random_map(3, 4, 4, 1), FeatureMap<double>(1, 4, 4), w, 0), Error);
    }
}

TEST_CASE("extract_domain_reps") {
    const auto ext = make_extractor<double>(11);
    CHECK(ext.output_dim() == 32);
    const auto img = testing::random_image(16, 12, 3);
    const auto mask = testing::rect_mask(16, 12, 3, 2, 10, 9);

    SUBCASE("background redraws leave l_f unchanged") {
        const auto base = extract_domain_reps(img, mask, ext);
        REQUIRE_FALSE(base.degenerate);
        CHECK(base.foreground.size() == 32);
        for (std::uint64_t s = 0; s < 20; ++s) {
            auto other = testing::random_image(16, 12, 100 + s);
            for (Eigen::Index i = 0; i < mask.size(); ++i) {
                if (mask[i]) other.pixels().row(i) = img.pixels().row(i);
            }
            const auto r = extract_domain_reps(other, mask, ext);
            CHECK(r.foreground == base.foreground);
        }
    }
    SUBCASE("reproducible") {
        CHECK(extract_domain_reps(img, mask, ext).background == extract_domain_reps(img, mask, ext).background);
    }
    SUBCASE("mirror-symmetric extractor swaps l_f and l_b") {
        auto sym = ext;
        for (auto& layer : sym.layers)
            for (int o = 0; o < layer.out_channels; ++o)
                for (int i = 0; i < layer.in_channels; ++i)
                    for (int ky = 0; ky < layer.kernel_h; ++ky) layer.at(o, i, ky, 2) = layer.at(o, i, ky, 0);
        const auto im = testing::random_image(9, 9, 4);
        const auto m = testing::random_mask(9, 9, 5);
        const auto a = extract_domain_reps(im, m, sym);
        const auto b = extract_domain_reps(mirror(im), mirror(m).complement(), sym);
        REQUIRE_FALSE(a.degenerate);
        CHECK((a.foreground - b.background).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("degenerate masks") {
        CHECK(extract_domain_reps(img, Mask(16, 12), ext).degenerate);
        CHECK(extract_domain_reps(img, Mask(16, 12, 1), ext).degenerate);
    }
}

TEST_CASE("domain_similarity") {
    Eigen::Vector2d u(0.6, 0.8), o(-0.8, 0.6);
    CHECK(domain_similarity(u, u) == doctest::Approx(1.0));
    CHECK(domain_similarity(u, o) == doctest::Approx(0.0));
    CHECK(domain_similarity(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)) == 11.0);
    CHECK_THROWS_AS(domain_similarity(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(3)), Error);
}

TEST_CASE("hinge losses") {
    CHECK(hinge_d_loss(sp({1.0}), sp({-1.0})) == 0.0);
    CHECK(hinge_d_loss(sp({0.0}), sp({0.0})) == 2.0);
    CHECK(hinge_d_loss(sp({-1.0}), sp({1.0})) == 4.0);
    CHECK(hinge_g_loss(sp({0.0})) == 0.0);
    CHECK(hinge_g_loss(sp({0.5})) == -0.5);
    CHECK(hinge_g_loss(sp({1.0, -1.0})) == 0.0);
    CHECK_THROWS_AS(hinge_d_loss(sp({}), sp({0.0})), Error);
    CHECK_THROWS_AS(hinge_g_loss(sp({})), Error);
}

TEST_CASE("reconstruction and total losses") {
    const auto t = ImageRGB::constant(4, 2, {0.2, 0.2, 0.2});
    CHECK(reconstruction_loss(t, t) == 0.0);
    CHECK(reconstruction_loss(ImageRGB::constant(4, 2, {1, 1, 1}), ImageRGB::constant(4, 2, {0, 0, 0})) == 1.0);
    auto half = t;
    for (Eigen::Index i = 0; i < 4; ++i) half.pixels().row(i).array() += 0.5;
    CHECK(reconstruction_loss(half, t) == doctest::Approx(0.25));

    CHECK(generator_total_loss(1.0, -2.0, -3.0, {0.01}) == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(generator_total_loss(0.7, 5.0, 9.0, {0.0}) == 0.7);
    CHECK(generator_total_loss(0.0, 0.0, 0.0, {3.0}) == 0.0);
    CHECK_THROWS_AS(generator_total_loss(1.0, 0.0, 0.0, {-1.0}), Error);
    CHECK_THROWS_AS(generator_total_loss(NAN, 0.0, 0.0), Error);

    const auto rep = make_loss_report(1.0, sp({0.0}), sp({0.0}), sp({1.0}), sp({-1.0}));
    CHECK(rep.l_dg == 2.0);
    CHECK(rep.l_dv == 0.0);
    CHECK(rep.l_gg == 0.0);
    CHECK(rep.l_gv == 1.0);
    CHECK(rep.l_g_total == doctest::Approx(1.01));
}

TEST_CASE("grad_check") {
    SUBCASE("linear similarity gradient") {
        const Eigen::VectorXd lb = Eigen::VectorXd::LinSpaced(6, -1.0, 2.0);
        const auto r = grad_check([&](const Eigen::VectorXd& lf) { return domain_similarity(lf, lb); },
                                  [&](const Eigen::VectorXd&) { return Eigen::VectorXd(lb); },
                                  Eigen::VectorXd::LinSpaced(6, 0.3, -0.4), 1e-4);
        CHECK(r.checked == 6);
        CHECK(r.max_relative_error < 1e-8);
    }
    SUBCASE("kink points are excluded") {
        const Eigen::VectorXd x = (Eigen::VectorXd(3) << 1.0, 0.2, -0.5).finished();
        auto f = [](const Eigen::VectorXd& v) {
            std::vector<double> s(v.data(), v.data() + v.size());
            return hinge_d_loss(sp(s), sp({0.0}));
        };
        auto g = [](const Eigen::VectorXd& v) {
            std::vector<double> s(v.data(), v.data() + v.size());
            return hinge_d_grad(sp(s), sp({0.0})).first;
        };
        auto kink = [](const Eigen::VectorXd& v, Eigen::Index i, double h) { return std::abs(1.0 - v[i]) <= h; };
        const auto r = grad_check(f, g, x, 1e-5, kink);
        CHECK(r.excluded == 1);
        CHECK(r.checked == 2);
        CHECK(r.max_relative_error < 1e-3);
    }
    SUBCASE("perturbation bounds") {
        auto f = [](const Eigen::VectorXd& v) { return v.sum(); };
        auto g = [](const Eigen::VectorXd& v) { return Eigen::VectorXd(Eigen::VectorXd::Ones(v.size())); };
        CHECK_THROWS_AS(grad_check(f, g, Eigen::VectorXd::Zero(2), 1e-2), Error);
        CHECK_THROWS_AS(grad_check(f, g, Eigen::VectorXd::Zero(2), 1e-8), Error);
    }
    SUBCASE("generator total partials") {
        const Eigen::Vector3d g = generator_total_grad({0.01});
        CHECK(g == Eigen::Vector3d(1.0, 0.01, 0.01));
    }
}

TEST_CASE("attention_block") {
    const auto enc = random_map(3, 4, 5, 1);
    const auto dec = random_map(2, 4, 5, 2);
    SUBCASE("zero weights halve everything") {
        const auto r = attention_block(enc, dec, ConvWeights<double>::zeros(3, 5, 1, 1), ConvWeights<double>::zeros(2, 5, 1, 1));
        CHECK((r.enc_attention.data().array() == 0.5).all());
        CHECK((r.dec_attention.data().array() == 0.5).all());
        CHECK(r.output.data().topRows(3) == 0.5 * enc.data());
        CHECK(r.output.data().bottomRows(2) == 0.5 * dec.data());
    }
    SUBCASE("maps stay in (0, 1)") {
        const auto r = attention_block(enc, dec, random_weights<double>(3, 5, 1, 1, 3), random_weights<double>(2, 5, 1, 1, 4));
        CHECK((r.enc_attention.data().array() > 0.0).all());
        CHECK((r.enc_attention.data().array() < 1.0).all());
    }
    SUBCASE("large bias saturates") {
        auto we = ConvWeights<double>::zeros(3, 5, 1, 1);
        auto wd = ConvWeights<double>::zeros(2, 5, 1, 1);
        we.bias.setConstant(30.0);
        wd.bias.setConstant(30.0);
        const auto r = attention_block(enc, dec, we, wd);
        CHECK((r.output.data().topRows(3) - enc.data()).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((r.output.data().bottomRows(2) - dec.data()).cwiseAbs().maxCoeff() < 1e-6);
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(attention_block(enc, random_map(2, 3, 5, 1), ConvWeights<double>::zeros(3, 5, 1, 1),
                                        ConvWeights<double>::zeros(2, 5, 1, 1)),
                        Error);
    }
}

TEST_CASE("instance_norm") {
    SUBCASE("constant channel") {
        FeatureMap<double> x(2, 3, 3);
        x.data().setConstant(4.0);
        CHECK(instance_norm(x).data().cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("moments") {
        const auto y = instance_norm(random_map(4, 8, 8, 3));
        for (int c = 0; c < 4; ++c) {
            const double mean = y.data().row(c).mean();
            const double var = (y.data().row(c).array() - mean).square().mean();
            CHECK(std::abs(mean) < 1e-6);
            CHECK(var >= 1.0 - 1e-3);
            CHECK(var <= 1.0);
        }
    }
    SUBCASE("affine invariance") {
        auto x = random_map(3, 6, 6, 4);
        x.data() *= 4.0;
        auto ax = x;
        ax.data() = (2.5 * x.data().array() + 0.7).matrix();
        CHECK((instance_norm(ax).data() - instance_norm(x).data()).cwiseAbs().maxCoeff() < 1e-5);
    }
    CHECK_THROWS_AS(instance_norm(random_map(1, 2, 2, 1), 0.0), Error);
}

TEST_CASE("spectral_normalize") {
    SUBCASE("diag(2, 1)") {
        const Eigen::Matrix2d w = Eigen::Vector2d(2, 1).asDiagonal();
        const auto r = spectral_normalize(w, 50, 1);
        CHECK(r.sigma == doctest::Approx(2.0));
        CHECK((r.weight - Eigen::Matrix2d(Eigen::Vector2d(1, 0.5).asDiagonal())).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("orthonormal input unchanged") {
        const Eigen::Matrix3d q = Eigen::Matrix3d(Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()));
        CHECK((spectral_normalize(q, 20, 2).weight - q).cwiseAbs().maxCoeff() < 1e-4);
    }
    SUBCASE("random 8x8 against SVD") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto w = random_weights<double>(8, 8, 1, 1, s).kernels;
            const auto r = spectral_normalize(w, 50, s);
            const Eigen::JacobiSVD<Eigen::MatrixXd> svd(r.weight);
            CHECK(std::abs(svd.singularValues()[0] - 1.0) < 1e-3);
        }
    }
    SUBCASE("zero matrix") {
        const auto r = spectral_normalize(Eigen::Matrix3d::Zero(), 5, 1);
        CHECK(r.zero_matrix);
        CHECK(r.weight.isZero());
    }
}

TEST_CASE("weight files") {
    const auto dir = testing::scratch_dir("weights");
    auto w = random_weights<float>(4, 3, 3, 3, 9);
    w.bias << 0.5f, -1.25f, 0.0f, 3.0f;
    write_conv_weights(dir / "w.bin", w);
    const auto back = read_conv_weights(dir / "w.bin");
    CHECK(back.out_channels == 4);
    CHECK(back.kernel_w == 3);
    CHECK(back.kernels == w.kernels);
    CHECK(back.bias == w.bias);

    {
        std::ofstream out(dir / "short.bin", std::ios::binary);
        out << "4 3 3 3\n";
        out.write("\0\0\0\0", 4);
    }
    CHECK_THROWS_AS(read_conv_weights(dir / "short.bin"), Error);
    CHECK_THROWS_AS(read_conv_weights(dir / "missing.bin"), Error);
}

TEST_CASE("kernel check suite") {
    for (const auto& c : run_kernel_checks(7)) CHECK_MESSAGE(c.pass, c.name << " value=" << c.value);
}
