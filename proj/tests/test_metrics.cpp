#include <doctest.h>

#include <json.hpp>

#include "harmony/error.hpp"
#include "harmony/imgcore/io.hpp"
#include "harmony/metrics/metrics.hpp"
#include "support.hpp"

using namespace harmony;
using namespace harmony::metrics;
namespace fs = std::filesystem;

TEST_CASE("mse closed forms") {
    const auto zeros = ImageRGB::constant(3, 2, {0, 0, 0});
    const auto ones = ImageRGB::constant(3, 2, {1, 1, 1});
    CHECK(mse(zeros, zeros) == 0.0);
    CHECK(mse(zeros, ones) == 65025.0);

    auto b = ImageRGB::constant(2, 2, {0, 0, 0});
    const auto a = b;
    b.pixels()(3, 1) = 1.0;
    CHECK(mse(a, b) == 5418.75);
    CHECK(mse(b, a) == mse(a, b));

    CHECK_THROWS_AS(mse(zeros, a), Error);
}

TEST_CASE("psnr closed forms") {
    const auto img = testing::random_image(5, 5, 1);
    CHECK(psnr(img, img) == 100.0);
    CHECK(psnr_from_mse(65025.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(psnr_from_mse(172.47) == doctest::Approx(25.76).epsilon(1e-3));
    CHECK(psnr_from_mse(100.0) == doctest::Approx(28.1308).epsilon(1e-4));
    CHECK(psnr_from_mse(65025.0 * 1e-11) == 100.0);
    double prev = psnr_from_mse(1e-3);
    for (double m : {1e-2, 1.0, 10.0, 1000.0, 65025.0}) {
        CHECK(psnr_from_mse(m) < prev);
        prev = psnr_from_mse(m);
    }
}

TEST_CASE("fmse closed forms") {
    auto a = ImageRGB::constant(4, 4, {0.2, 0.4, 0.6});
    Mask one(4, 4);
    one.set(1, 2, true);

    CHECK(fmse(a, a, one) == 0.0);

    auto bg = a;
    bg.pixels()(0, 0) = 1.0;
    CHECK(fmse(a, bg, one) == 0.0);

    auto fg = ImageRGB::constant(4, 4, {0, 0, 0});
    auto fg2 = fg;
    fg2.pixels()(2 * 4 + 1, 2) = 1.0;
    CHECK(fmse(fg, fg2, one) == 21675.0);

    const auto r1 = testing::random_image(6, 5, 2), r2 = testing::random_image(6, 5, 3);
    CHECK(fmse(r1, r2, Mask(6, 5, 1)) == doctest::Approx(mse(r1, r2)).epsilon(1e-12));
    CHECK_THROWS_AS(fmse(a, a, Mask(4, 4)), Error);
}

TEST_CASE("foreground ratio buckets") {
    const auto edges = default_bucket_edges();
    CHECK(edges == std::vector<double>{0.0, 0.05, 0.15, 1.0});
    CHECK(bucket_index(0.03, edges) == 0);
    CHECK(bucket_index(0.05, edges) == 1);
    CHECK(bucket_index(0.15, edges) == 2);
    CHECK(bucket_index(0.50, edges) == 2);
    CHECK(bucket_index(1.0, edges) == 2);
    CHECK(bucket_index(0.0, edges) == 0);
    CHECK(bucket_label(edges, 0) == "0%~5%");
    CHECK(bucket_label(edges, 1) == "5%~15%");
    CHECK_THROWS_AS(bucket_index(1.5, edges), Error);
    CHECK_THROWS_AS(bucket_index(0.1, {0.0, 0.5, 0.4, 1.0}), Error);

    std::vector<ImagePairEval> evals;
    for (int i = 0; i < 30; ++i) {
        ImagePairEval e;
        e.id = "r" + std::to_string(i);
        e.foreground_ratio = i / 30.0;
        e.mse = i;
        evals.push_back(e);
    }
    const auto report = bucket_by_ratio(evals, edges);
    std::size_t total = 0;
    for (const auto& b : report.buckets) total += b.count;
    CHECK(total == 30);
    CHECK(report.overall.mse == doctest::Approx(14.5));
}

TEST_CASE("aggregate means") {
    ImagePairEval a, b;
    a.id = "a";
    a.mse = 0.0;
    a.psnr = psnr_from_mse(0.0);
    b.id = "b";
    b.mse = 100.0;
    b.psnr = psnr_from_mse(100.0);
    const auto agg = aggregate({b, a});
    CHECK(agg.count == 2);
    CHECK(agg.mse == 50.0);
    CHECK(agg.psnr == doctest::Approx(64.07).epsilon(1e-4));
}

TEST_CASE("evaluate_set") {
    const auto dir = testing::scratch_dir("eval_set");
    synth::Manifest m;
    for (int i = 0; i < 6; ++i) {
        const std::string id = "s" + std::to_string(i);
        const auto real = quantize(testing::random_image(40 + i, 30, 10 + i));
        const auto mask = testing::random_mask(40 + i, 30, 20 + i);
        auto comp = real;
        for (Eigen::Index k = 0; k < mask.size(); ++k) {
            if (mask[k]) comp.pixels().row(k) = Eigen::RowVector3d(1, 0, 0);
        }
        write_png(dir / "real" / (id + ".png"), real);
        write_png(dir / "composite" / (id + "-0.png"), comp);
        write_mask_png(dir / "mask" / (id + ".png"), mask);
        synth::CompositeRecord r;
        r.id = id + "-0";
        r.target_id = id;
        r.real_path = "real/" + id + ".png";
        r.composite_path = "composite/" + id + "-0.png";
        r.mask_path = "mask/" + id + ".png";
        r.method = "REINHARD_LAB";
        r.category_label = i % 2 ? "cat" : "dog";
        r.split = "test";
        m.records.push_back(r);
    }

    SUBCASE("real images as candidates") {
        const auto report = evaluate_set(m, dir, dir / "real");
        CHECK(report.per_image.size() == 6);
        CHECK(report.missing == 0);
        for (const auto& e : report.per_image) {
            CHECK(e.mse == 0.0);
            CHECK(e.psnr == 100.0);
            CHECK(e.fmse == 0.0);
        }
        CHECK(report.overall.mse == 0.0);
        CHECK(report.by_category.size() == 2);
    }
    SUBCASE("composites as candidates") {
        const auto report = evaluate_set(m, dir, dir / "composite");
        CHECK(report.label == "Input composite");
        CHECK(report.overall.mse > 0.0);
        const auto j = nlohmann::json::parse(report_json(report));
        CHECK(j.contains("overall"));
        CHECK(buckets_csv(report).find("range") != std::string::npos);
        CHECK_FALSE(format_table(report).empty());
    }
    SUBCASE("missing candidates are counted") {
        fs::create_directories(dir / "empty");
        const auto report = evaluate_set(m, dir, dir / "empty");
        CHECK(report.missing == 6);
        CHECK(report.per_image.empty());
    }
}
