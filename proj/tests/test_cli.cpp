#include <doctest.h>

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "harmony/cli/cli.hpp"
#include "harmony/config.hpp"
#include "harmony/synth/records.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using harmony::cli::run;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome call(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(call({}).code == harmony::cli::kUsage);
    CHECK(call({"frobnicate"}).code == harmony::cli::kUsage);
    CHECK(call({"eval", "--no-such-flag"}).code == harmony::cli::kUsage);
    CHECK(call({"eval", "--candidates", "x"}).code == harmony::cli::kUsage);
    CHECK(call({"synth", "--out", "x", "--demo-sources", "1"}).code == harmony::cli::kUsage);
    CHECK(call({"kernels-check", "--lambda", "-1"}).code == harmony::cli::kUsage);
    CHECK(call({"serve", "--log", "x.jsonl", "--port", "70000"}).code == harmony::cli::kUsage);
}

TEST_CASE("help exits 0") {
    const auto r = call({"--help"});
    CHECK(r.code == harmony::cli::kOk);
    CHECK(r.out.find("synth") != std::string::npos);
    CHECK(call({"bt-fit", "--help"}).code == harmony::cli::kOk);
}

TEST_CASE("kernels-check") {
    const auto r = call({"kernels-check", "--seed", "7"});
    CHECK(r.code == harmony::cli::kOk);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("partial_conv_no_leak") != std::string::npos);
}

TEST_CASE("synth, filter and eval") {
    const auto dir = testing::scratch_dir("cli_pipeline");
    const std::string root = dir.string();

    const std::vector<std::string> base{"synth", "--root", root, "--demo-sources", "12", "--seed", "5", "--workers", "2"};
    auto a = base;
    a.insert(a.end(), {"--out", "a"});
    auto b = base;
    b.insert(b.end(), {"--out", "b"});
    REQUIRE(call(a).code == 0);
    REQUIRE(call(b).code == 0);
    CHECK(slurp(dir / "a" / "manifest.jsonl") == slurp(dir / "b" / "manifest.jsonl"));
    for (const auto& r : harmony::synth::read_manifest(dir / "a" / "manifest.jsonl").records) {
        CHECK(slurp(dir / "a" / r.composite_path) == slurp(dir / "b" / r.composite_path));
    }

    SUBCASE("identity evaluation") {
        const auto r = call({"eval", "--root", root, "--manifest", "a/manifest.jsonl", "--candidates", "a/real",
                             "--split", "all", "--out", "rep"});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(slurp(dir / "rep" / "report.json"));
        CHECK(j["overall"]["mse"] == 0.0);
        CHECK(j["overall"]["psnr"] == 100.0);
        CHECK(j["overall"]["fmse"] == 0.0);
        CHECK(fs::exists(dir / "rep" / "buckets.csv"));
        CHECK(fs::exists(dir / "rep" / "effective_config.txt"));
    }
    SUBCASE("composite evaluation") {
        const auto r = call({"eval", "--root", root, "--manifest", "a/manifest.jsonl", "--candidates", "a/composite",
                             "--split", "all"});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("Input composite") != std::string::npos);
    }
    SUBCASE("filter") {
        const auto r = call({"filter", "--root", root, "--manifest", "a/manifest.jsonl", "--hue-threshold", "1"});
        REQUIRE(r.code == 0);
        const auto all = harmony::synth::read_manifest(dir / "a" / "manifest.jsonl");
        const auto kept = harmony::synth::read_manifest(dir / "a" / "filtered.jsonl");
        CHECK(kept.records.size() <= all.records.size());
        const auto cfg = harmony::KeyValueConfig::load(dir / "a" / "filtered.config.txt");
        CHECK(cfg.get("hue_threshold_deg", "") == "1");
    }
    SUBCASE("missing inputs are pipeline failures") {
        const auto r = call({"eval", "--root", root, "--manifest", "nope.jsonl", "--candidates", "a/real"});
        CHECK(r.code == harmony::cli::kFailure);
        CHECK(r.err.find("error[") != std::string::npos);
    }
}

TEST_CASE("config file and flag precedence") {
    const auto dir = testing::scratch_dir("cli_config");
    {
        std::ofstream cfg(dir / "synth.cfg");
        cfg << "# demo\ndemo_sources = 6\nseed = 11\nout = from_file\nsplit_fraction = 0.5\n";
    }
    const auto r = call({"synth", "--root", dir.string(), "--config", "synth.cfg", "--seed", "12"});
    REQUIRE(r.code == 0);
    const auto eff = harmony::KeyValueConfig::load(dir / "from_file" / "effective_config.txt");
    CHECK(eff.get("seed", "") == "12");
    CHECK(eff.get("split_fraction", "") == "0.5");
}

TEST_CASE("bt-fit") {
    const auto dir = testing::scratch_dir("cli_btfit");
    {
        std::ofstream csv(dir / "cmp.csv");
        csv << "method_a,method_b,winner,count\nA,B,A,75\nA,B,B,25\n";
    }
    const auto r = call({"bt-fit", "--root", dir.string(), "--comparisons", "cmp.csv", "--out", "scores.json"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "scores.json"));
    CHECK(j["normalization"] == "zero_mean_log_worth");
    CHECK(fs::exists(dir / "scores.config.txt"));
    CHECK(r.out.find("A") != std::string::npos);

    {
        std::ofstream csv(dir / "split.csv");
        csv << "A,B,A\nB,A,B\nC,D,C\nD,C,D\n";
    }
    const auto bad = call({"bt-fit", "--root", dir.string(), "--comparisons", "split.csv"});
    CHECK(bad.code == harmony::cli::kFailure);
    CHECK(bad.err.find("disconnected") != std::string::npos);
}
