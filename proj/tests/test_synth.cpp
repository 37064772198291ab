#include <doctest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "harmony/error.hpp"
#include "harmony/imgcore/io.hpp"
#include "harmony/imgcore/masked_stats.hpp"
#include "harmony/rng.hpp"
#include "harmony/synth/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace harmony;
using namespace harmony::synth;
namespace fs = std::filesystem;

namespace {

SourceRecord src(std::string id, std::string category, std::string scene = {}) {
    return {std::move(id), {}, {}, std::move(category), std::move(scene)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CompositeRecord rec(const std::string& target, int k) {
    CompositeRecord r;
    r.id = target + "-" + std::to_string(k);
    r.target_id = target;
    r.real_path = "real/" + target + ".png";
    r.composite_path = "composite/" + r.id + ".png";
    r.mask_path = "mask/" + target + ".png";
    r.method = "REINHARD_LAB";
    return r;
}

}  // namespace

TEST_CASE("select_reference") {
    SUBCASE("single same-category candidate") {
        const std::vector<SourceRecord> pool{src("a", "dog"), src("b", "cat"), src("c", "dog")};
        for (std::uint64_t s = 0; s < 20; ++s) CHECK(select_reference(pool, pool[0], s).id == "c");
    }
    SUBCASE("fixed seed is deterministic") {
        std::vector<SourceRecord> pool;
        for (int i = 0; i < 10; ++i) pool.push_back(src("s" + std::to_string(i), "dog"));
        CHECK(select_reference(pool, pool[3], 99).id == select_reference(pool, pool[3], 99).id);
    }
    SUBCASE("aligned scene picks a sibling capture") {
        const std::vector<SourceRecord> pool{src("x0", "room", "sc"), src("x1", "room", "sc"),
                                             src("x2", "room", "sc"), src("x3", "room", "sc"),
                                             src("y0", "room", "other"), src("z", "room")};
        std::set<std::string> seen;
        for (std::uint64_t s = 0; s < 100; ++s) seen.insert(select_reference(pool, pool[0], s).id);
        CHECK(seen == std::set<std::string>{"x1", "x2", "x3"});
    }
    SUBCASE("no candidate") {
        const std::vector<SourceRecord> pool{src("a", "dog"), src("b", "cat")};
        CHECK_THROWS_AS(select_reference(pool, pool[0], 1), Error);
    }
}

TEST_CASE("make_composite") {
    const auto t = testing::random_image(24, 20, 1);
    const auto r = testing::random_image(24, 20, 2);
    const auto tm = testing::random_mask(24, 20, 3);
    const auto rm = testing::random_mask(24, 20, 4);

    SUBCASE("overlay with reference = target is the real image") {
        const auto c = make_composite(t, tm, t, tm, CompositeMode::OVERLAY, 5);
        CHECK(c.method == "OVERLAY");
        CHECK(c.image.pixels() == t.pixels());
    }
    SUBCASE("background untouched in both modes") {
        for (auto mode : {CompositeMode::OVERLAY, CompositeMode::TRANSFER}) {
            for (std::uint64_t seed = 0; seed < 12; ++seed) {
                const auto c = make_composite(t, tm, r, rm, mode, seed);
                for (Eigen::Index i = 0; i < tm.size(); ++i) {
                    if (!tm[i]) REQUIRE(c.image.pixels().row(i) == t.pixels().row(i));
                }
            }
        }
    }
    SUBCASE("replay from method tag and seed is bit-exact") {
        for (std::uint64_t seed = 0; seed < 12; ++seed) {
            const auto c = make_composite(t, tm, r, rm, CompositeMode::TRANSFER, seed);
            const auto again = replay_composite(t, tm, r, rm, c.method, seed);
            CHECK(again.image.pixels() == c.image.pixels());
        }
    }
}

TEST_CASE("heuristic_filter") {
    const SynthConfig cfg;
    const auto real = testing::cast_image(32, 32, 7);
    const auto mask = testing::rect_mask(32, 32, 4, 4, 20, 20);

    SUBCASE("composite = real passes everything") {
        for (const auto& v : heuristic_filter(real, real, mask, cfg)) {
            CHECK_MESSAGE(v.pass, v.filter_name);
        }
    }
    SUBCASE("120 degree hue rotation fails the hue filter") {
        ImageRGB comp = real;
        for (Eigen::Index i = 0; i < mask.size(); ++i) {
            if (!mask[i]) continue;
            const Eigen::RowVector3d p = real.pixels().row(i);
            comp.pixels().row(i) << p(2), p(0), p(1);
        }
        const auto v = heuristic_filter(comp, real, mask, cfg);
        CHECK(v[1].filter_name == "hue_shift");
        CHECK_FALSE(v[1].pass);
        CHECK(v[1].score == doctest::Approx(120.0).epsilon(1e-6));
        CHECK(v[0].pass);
    }
    SUBCASE("ratio 0.005 fails the ratio filter") {
        const auto big = testing::cast_image(40, 50, 8);
        const auto tiny = testing::rect_mask(40, 50, 0, 0, 10, 1);
        CHECK(foreground_ratio(tiny) == doctest::Approx(0.005));
        const auto v = heuristic_filter(big, big, tiny, cfg);
        CHECK(v[0].filter_name == "ratio_bounds");
        CHECK_FALSE(v[0].pass);
    }
    SUBCASE("clipped foreground fails the clip filter") {
        ImageRGB comp = real;
        for (Eigen::Index i = 0; i < mask.size(); ++i) {
            if (mask[i]) comp.pixels()(i, 0) = 1.0;
        }
        const auto v = heuristic_filter(comp, real, mask, cfg);
        CHECK(v[2].filter_name == "clip");
        CHECK_FALSE(v[2].pass);
        CHECK(v[2].score == doctest::Approx(1.0));
    }
    SUBCASE("hue helpers") {
        CHECK(hue_distance(350.0, 10.0) == doctest::Approx(20.0));
        CHECK(hue_distance(0.0, 180.0) == doctest::Approx(180.0));
        const ImageRGB grey = testing::random_image(4, 4, 1, 0.5, 0.5);
        CHECK_FALSE(circular_mean_hue(grey, Mask(4, 4, 1), 0.1).has_value());
    }
}

TEST_CASE("build_manifest") {
    std::vector<CompositeRecord> records;
    for (int t = 0; t < 10; ++t)
        for (int k = 0; k < 2; ++k) records.push_back(rec("img" + std::to_string(t), k));

    SUBCASE("0.8 split keeps groups whole") {
        const auto m = build_manifest(records, 0.8, 11);
        std::map<std::string, std::set<std::string>> splits;
        std::size_t train = 0, test = 0;
        for (const auto& r : m.records) {
            splits[r.real_path].insert(r.split);
            (r.split == "train" ? train : test) += 1;
        }
        CHECK(train == 16);
        CHECK(test == 4);
        for (const auto& [group, s] : splits) CHECK(s.size() == 1);
        CHECK(std::is_sorted(m.records.begin(), m.records.end(),
                             [](const auto& a, const auto& b) { return a.id < b.id; }));
    }
    SUBCASE("1.0 split puts everything in train") {
        const auto m = build_manifest(records, 1.0, 3);
        for (const auto& r : m.records) CHECK(r.split == "train");
    }
    SUBCASE("same seed, same text") {
        auto shuffled = records;
        std::reverse(shuffled.begin(), shuffled.end());
        CHECK(manifest_text(build_manifest(records, 0.8, 5)) == manifest_text(build_manifest(shuffled, 0.8, 5)));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(build_manifest({}, 0.8, 1), Error);
        CHECK_THROWS_AS(build_manifest(records, 1.5, 1), Error);
    }
}

TEST_CASE("manifest records round-trip through JSON") {
    CompositeRecord r = rec("img0", 1);
    r.category_label = "dog";
    r.sub_dataset = "synthetic";
    r.reference_id = "img3";
    r.seed = 0xfedcba9876543210ull;
    r.filter_verdicts = {{"ratio_bounds", true, 0.25}, {"hue_shift", false, 75.5}};
    r.human_verdict = HumanVerdict{false, RejectReason::hue_change};
    r.split = "test";
    const auto back = record_from_json(to_json(r));
    CHECK(to_json(back) == to_json(r));
    CHECK(back.seed == r.seed);
    CHECK_FALSE(back.passes_filters());

    const auto dir = testing::scratch_dir("manifest_rt");
    write_manifest(dir / "m.jsonl", Manifest{{r, rec("img1", 0)}});
    const auto m = read_manifest(dir / "m.jsonl");
    REQUIRE(m.records.size() == 2);
    CHECK(m.records[1].id == "img1-0");
}

TEST_CASE("run_synth") {
    const auto dir = testing::scratch_dir("synth_run");
    const auto sources = make_demo_sources(dir / "src", 12, 3);
    SynthConfig cfg;
    cfg.seed = 42;

    const auto a = run_synth(sources, dir / "a", cfg);
    cfg.workers = 4;
    const auto b = run_synth(sources, dir / "b", cfg);

    REQUIRE_FALSE(a.manifest.records.empty());
    CHECK(slurp(dir / "a" / "manifest.jsonl") == slurp(dir / "b" / "manifest.jsonl"));
    CHECK(slurp(dir / "a" / "rejected.jsonl") == slurp(dir / "b" / "rejected.jsonl"));

    std::map<std::string, std::set<std::string>> splits;
    for (const auto& r : a.manifest.records) {
        CHECK(slurp(dir / "a" / r.composite_path) == slurp(dir / "b" / r.composite_path));
        const auto comp = read_png(dir / "a" / r.composite_path);
        const auto real = read_png(dir / "a" / r.real_path);
        const auto mask = read_mask_png(dir / "a" / r.mask_path);
        for (Eigen::Index i = 0; i < mask.size(); ++i) {
            if (!mask[i]) REQUIRE(comp.pixels().row(i) == real.pixels().row(i));
        }
        CHECK(r.passes_filters());
        splits[r.real_path].insert(r.split);
        if (r.method == "OVERLAY") {
            const auto t = std::find_if(sources.begin(), sources.end(), [&](const auto& s) { return s.id == r.target_id; });
            const auto f = std::find_if(sources.begin(), sources.end(), [&](const auto& s) { return s.id == r.reference_id; });
            REQUIRE(t != sources.end());
            REQUIRE(f != sources.end());
            CHECK(t->scene_id == f->scene_id);
            CHECK_FALSE(t->scene_id.empty());
        }
    }
    for (const auto& [group, s] : splits) CHECK(s.size() == 1);
    CHECK(fs::exists(dir / "a" / "effective_config.txt"));
}
