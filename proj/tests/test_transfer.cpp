#include <doctest.h>

#include "harmony/transfer/color_transfer.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace harmony;
using namespace harmony::transfer;

namespace {

std::span<const double> view(const std::vector<double>& v) { return {v.data(), v.size()}; }

ChannelStats<double> lab_moments(const ImageRGB& img, const Mask& m) {
    return masked_moments(convert_color_space(img, ColorSpace::LAB), m);
}

}  // namespace

TEST_CASE("method tags") {
    for (Method m : kAllMethods) CHECK(method_from_string(to_string(m)) == m);
    CHECK(to_string(Method::PITIE_IDT) == "PITIE_IDT");
    CHECK_THROWS_AS(method_from_string("nope"), Error);
}

TEST_CASE("transfers leave the background untouched") {
    const auto t = testing::random_image(20, 16, 1);
    const auto r = testing::random_image(20, 16, 2);
    const auto tm = testing::random_mask(20, 16, 3, 0.3);
    const auto rm = testing::random_mask(20, 16, 4, 0.6);
    for (Method m : kAllMethods) {
        const auto out = apply(m, t, tm, r, rm, 9).image;
        for (Eigen::Index i = 0; i < tm.size(); ++i) {
            if (!tm[i]) CHECK(out.pixels().row(i) == t.pixels().row(i));
        }
        CHECK(out.pixels().minCoeff() >= 0.0);
        CHECK(out.pixels().maxCoeff() <= 1.0);
    }
}

TEST_CASE("inputs are validated") {
    const auto t = testing::random_image(8, 8, 1);
    const auto m = testing::random_mask(8, 8, 2);
    CHECK_THROWS_AS(transfer_reinhard(t, Mask(8, 8), t, m), Error);
    CHECK_THROWS_AS(transfer_xiao(t, m, t, Mask(8, 8)), Error);
    CHECK_THROWS_AS(transfer_fecker(t, m, t, m, 8), Error);
    CHECK_THROWS_AS(transfer_reinhard(t, Mask(7, 8, 1), t, m), Error);
    CHECK_THROWS_AS(transfer_pitie(t, m, t, m, 0), Error);
}

TEST_CASE("Reinhard: identity, constant and moment matching") {
    const auto img = testing::cast_image(24, 20, 5);
    const auto m = testing::rect_mask(24, 20, 4, 3, 18, 15);
    SUBCASE("reference = target") {
        const auto out = transfer_reinhard(img, m, img, m).image;
        CHECK((out.pixels() - img.pixels()).cwiseAbs().maxCoeff() < 1e-3);
    }
    SUBCASE("constant foregrounds") {
        auto t = img;
        auto r = testing::cast_image(24, 20, 6);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            if (m[i]) {
                t.pixels().row(i) << 0.3, 0.3, 0.3;
                r.pixels().row(i) << 0.7, 0.4, 0.2;
            }
        }
        const auto out = transfer_reinhard(t, m, r, m).image;
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            if (m[i]) CHECK((out.pixels().row(i) - Eigen::RowVector3d(0.7, 0.4, 0.2)).cwiseAbs().maxCoeff() < 1e-3);
        }
    }
    SUBCASE("two-tone target against a scaled reference") {
        auto t = img;
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            if (m[i]) t.pixels().row(i) = (i % 2) ? Eigen::RowVector3d(0.35, 0.45, 0.5) : Eigen::RowVector3d(0.5, 0.4, 0.3);
        }
        auto r = testing::cast_image(24, 20, 7);
        r.pixels() = (r.pixels().array() * 0.8 + 0.1).matrix();
        const auto res = transfer_reinhard(t, m, r, m);
        REQUIRE(res.clamp_fraction == 0.0);
        const auto got = lab_moments(res.image, m);
        const auto want = lab_moments(r, m);
        CHECK((got.mean - want.mean).cwiseAbs().maxCoeff() < 1e-3);
        CHECK((got.std - want.std).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("Xiao: principal frame and covariance matching") {
    SUBCASE("principal frame is orthonormal and sign-normalized") {
        const auto s = masked_moments(testing::cast_image(16, 16, 8), Mask(16, 16, 1));
        const auto f = principal_frame(s);
        const Eigen::Matrix3d R = f.rotate.topLeftCorner<3, 3>();
        CHECK((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        for (int k = 0; k < 3; ++k) {
            Eigen::Index arg;
            R.col(k).cwiseAbs().maxCoeff(&arg);
            CHECK(R(arg, k) > 0);
        }
        CHECK(f.scale(0, 0) <= f.scale(1, 1));
        CHECK(f.scale(1, 1) <= f.scale(2, 2));
    }
    SUBCASE("reference = target") {
        const auto img = testing::cast_image(20, 20, 9);
        const auto m = testing::random_mask(20, 20, 10);
        const auto out = transfer_xiao(img, m, img, m).image;
        CHECK((out.pixels() - img.pixels()).cwiseAbs().maxCoeff() < 1e-3);
    }
    SUBCASE("covariance of the output matches the reference") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto t = testing::cast_image(30, 30, 100 + seed);
            const auto r = testing::cast_image(30, 30, 200 + seed);
            const auto tm = testing::random_mask(30, 30, 300 + seed);
            const auto rm = testing::random_mask(30, 30, 400 + seed);
            const auto res = transfer_xiao(t, tm, r, rm);
            if (res.clamp_fraction > 0) continue;
            const auto got = masked_moments(res.image, tm);
            const auto want = masked_moments(r, rm);
            CHECK((got.covariance - want.covariance).norm() < 1e-2);
            CHECK((got.mean - want.mean).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
    SUBCASE("independent channels reduce to per-channel scaling") {
        // Factorial grid: channels are uncorrelated and their variance order
        // is the same in both images.
        const int n = 6;
        ImageRGB t(n * n, n), r(n * n, n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c) {
                    const Eigen::Index i = (Eigen::Index(a) * n + b) * n + c;
                    t.pixels().row(i) << 0.40 + 0.02 * a, 0.40 + 0.04 * b, 0.30 + 0.06 * c;
                    r.pixels().row(i) << 0.50 + 0.03 * a, 0.35 + 0.05 * b, 0.20 + 0.07 * c;
                }
        const Mask m(n * n, n, 1);
        const auto out = transfer_xiao(t, m, r, m).image;
        const auto ts = masked_moments(t, m), rs = masked_moments(r, m);
        for (Eigen::Index i = 0; i < t.pixel_count(); ++i) {
            for (int c = 0; c < 3; ++c) {
                const double want = (t.pixels()(i, c) - ts.mean[c]) * rs.std[c] / ts.std[c] + rs.mean[c];
                CHECK(std::abs(out.pixels()(i, c) - want) < 1e-3);
            }
        }
    }
}

TEST_CASE("CDF lookup table and 1-D histogram matching") {
    SUBCASE("two-level hand example") {
        const std::vector<double> src{0.0, 1.0, 0.0, 1.0};
        const std::vector<double> ref{0.25, 0.75, 0.75, 0.25};
        const auto out = histogram_match_1d(view(src), view(ref), 0.0, 1.0, 256);
        CHECK(out[0] == 0.25);
        CHECK(out[1] == 0.75);
        CHECK(out[2] == 0.25);
        CHECK(out[3] == 0.75);
    }
    SUBCASE("identical distributions give the identity table") {
        harmony::SplitMix rng(3);
        std::vector<double> v(500);
        for (auto& x : v) x = rng.uniform();
        const auto lut = cdf_lookup_table(view(v), view(v), 0.0, 1.0, 256);
        std::vector<char> occupied(256, 0);
        for (double x : v) occupied[static_cast<std::size_t>(level_of(x, 0.0, 1.0, 256))] = 1;
        for (int l = 0; l < 256; ++l) {
            if (occupied[static_cast<std::size_t>(l)]) CHECK(lut[static_cast<std::size_t>(l)] == l);
        }
    }
    SUBCASE("levels") {
        CHECK(level_of(0.0, 0.0, 1.0, 256) == 0);
        CHECK(level_of(1.0, 0.0, 1.0, 256) == 255);
        CHECK(level_of(-1.0, 0.0, 1.0, 256) == 0);
        CHECK(level_of(0.5, 0.0, 1.0, 256) == 128);
    }
    SUBCASE("quantile matching gives equal inputs equal outputs") {
        const std::vector<double> src{0.5, 0.5, 0.1, 0.5};
        const std::vector<double> ref{1.0, 2.0, 3.0, 4.0};
        const auto out = quantile_match_1d(view(src), view(ref));
        CHECK(out[2] == 1.0);
        CHECK(out[0] == 3.0);
        CHECK(out[1] == 3.0);
        CHECK(out[3] == 3.0);
    }
    SUBCASE("quantile matching") {
        const std::vector<double> src{3.0, 1.0, 2.0};
        const std::vector<double> ref{10.0, 20.0, 30.0};
        const auto out = quantile_match_1d(view(src), view(ref));
        CHECK(out[0] == 30.0);
        CHECK(out[1] == 10.0);
        CHECK(out[2] == 20.0);
    }
}

TEST_CASE("Fecker: identity and KS distance") {
    SUBCASE("reference = target") {
        const auto img = testing::cast_image(20, 18, 11);
        const auto m = testing::random_mask(20, 18, 12);
        const auto out = transfer_fecker(img, m, img, m).image;
        const auto out_y = convert_color_space(out, ColorSpace::YCBCR).pixels();
        const auto img_y = convert_color_space(img, ColorSpace::YCBCR).pixels();
        CHECK((out_y - img_y).cwiseAbs().maxCoeff() < 1.0 / 256.0);
    }
    SUBCASE("output histograms follow the reference") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto t = testing::random_image(128, 128, 20 + seed);
            const auto r = testing::random_image(128, 128, 40 + seed);
            const auto tm = testing::random_mask(128, 128, 60 + seed);
            const auto rm = testing::random_mask(128, 128, 80 + seed);
            const auto res = transfer_fecker(t, tm, r, rm);
            const auto out_y = gather(convert_color_space(res.image, ColorSpace::YCBCR).pixels(), tm);
            const auto ref_y = gather(convert_color_space(r, ColorSpace::YCBCR).pixels(), rm);
            for (int c = 0; c < 3; ++c) CHECK(testing::ks_distance(out_y.col(c), ref_y.col(c), 256) < 2.0 / 256.0);
        }
    }
}

TEST_CASE("Pitie: identity and reduction to per-channel matching") {
    SUBCASE("reference = target") {
        const auto img = testing::cast_image(20, 20, 13);
        const auto m = testing::random_mask(20, 20, 14);
        for (int iters : {1, 3, 10}) {
            const auto out = transfer_pitie(img, m, img, m, iters, 5).image;
            CHECK((out.pixels() - img.pixels()).cwiseAbs().maxCoeff() < 1e-2);
        }
    }
    SUBCASE("identity rotation, one iteration") {
        const auto t = testing::cast_image(32, 32, 15);
        const auto r = testing::cast_image(32, 32, 16);
        const auto tm = testing::random_mask(32, 32, 17);
        const auto rm = testing::random_mask(32, 32, 18);
        const std::vector<Eigen::Matrix3d> rot{Eigen::Matrix3d::Identity()};
        const auto a = transfer_pitie_with_rotations(t, tm, r, rm, rot).image;
        const auto b = histogram_transfer(t, tm, r, rm, 256, ColorSpace::RGB).image;
        CHECK((a.pixels() - b.pixels()).cwiseAbs().maxCoeff() <= 2.0 / 255.0 + 1e-12);
        const Eigen::ArrayXXd diff = (a.pixels() - b.pixels()).cwiseAbs().array() * 255.0;
        CHECK((diff > 1.0 + 1e-9).count() < diff.size() / 50);
    }
    SUBCASE("seeded rotations are orthonormal and reproducible") {
        const auto rots = random_rotations(10, 3);
        CHECK(rots.size() == 10);
        for (const auto& R : rots) {
            CHECK((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
            CHECK(std::abs(R.determinant()) == doctest::Approx(1.0));
        }
        CHECK(random_rotations(10, 3)[7] == rots[7]);
    }
    SUBCASE("trace records one cloud per iteration") {
        const auto t = testing::cast_image(16, 16, 19);
        const auto r = testing::cast_image(16, 16, 20);
        const Mask m(16, 16, 1);
        std::vector<Eigen::MatrixX3d> trace;
        const auto rots = random_rotations(4, 1);
        transfer_pitie_with_rotations(t, m, r, m, rots, &trace);
        CHECK(trace.size() == 4);
        const auto tr0 = testing::sliced_wasserstein(gather(t.pixels(), m), gather(r.pixels(), m),
                                                     testing::probe_directions(20, 1));
        const auto tr4 = testing::sliced_wasserstein(trace.back(), gather(r.pixels(), m), testing::probe_directions(20, 1));
        CHECK(tr4 < tr0);
    }
}

TEST_CASE("random_transfer: determinism, balance and provenance") {
    const auto t = testing::cast_image(16, 12, 21);
    const auto r = testing::cast_image(16, 12, 22);
    const auto tm = testing::random_mask(16, 12, 23);
    const auto rm = testing::random_mask(16, 12, 24);
    const auto a = random_transfer(t, tm, r, rm, 77);
    const auto b = random_transfer(t, tm, r, rm, 77);
    CHECK(a.method == b.method);
    CHECK(a.result.image == b.result.image);
    CHECK(apply(a.method, t, tm, r, rm, 77).image == a.result.image);

    int counts[4] = {};
    for (std::uint64_t s = 0; s < 4000; ++s) counts[static_cast<int>(choose_method(splitmix64(s)))] += 1;
    for (int c : counts) CHECK(std::abs(c - 1000) <= 100);
}
