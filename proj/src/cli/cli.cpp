#include "harmony/cli/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "harmony/btrank/bradley_terry.hpp"
#include "harmony/config.hpp"
#include "harmony/dove/grad_check.hpp"
#include "harmony/dove/weights_io.hpp"
#include "harmony/error.hpp"
#include "harmony/metrics/metrics.hpp"
#include "harmony/review/http.hpp"
#include "harmony/review/service.hpp"
#include "harmony/synth/pipeline.hpp"

namespace harmony::cli {

namespace fs = std::filesystem;

namespace {

/// Thrown for invalid flag values found after parsing; reported as usage errors.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A flag that may also come from the config file under `key`.
struct Setting {
    std::string flag;
    std::string key;
    std::string help;
    std::string value;
    CLI::Option* option = nullptr;
};

class Command {
public:
    Command(CLI::App& app, std::string name, std::string help) : sub_(app.add_subcommand(std::move(name), std::move(help))) {
        sub_->add_option("--config", config_path_, "key=value config file; flags override it");
        sub_->add_option("--root", root_, "base directory for relative paths (default: $HARMONIZE_ROOT or .)");
    }

    CLI::App* app() { return sub_; }

    void setting(const std::string& flag, const std::string& key, const std::string& help) {
        auto s = std::make_unique<Setting>(Setting{flag, key, help, {}, nullptr});
        s->option = sub_->add_option(flag, s->value, help);
        settings_.push_back(std::move(s));
    }

    /// File values overridden by explicitly given flags.
    KeyValueConfig effective() const {
        KeyValueConfig cfg;
        if (!config_path_.empty()) cfg = KeyValueConfig::load(resolve(config_path_));
        for (const auto& s : settings_) {
            if (s->option->count() > 0) cfg.set(s->key, s->value);
        }
        return cfg;
    }

    fs::path root() const {
        if (!root_.empty()) return root_;
        if (const char* env = std::getenv("HARMONIZE_ROOT"); env && *env) return env;
        return ".";
    }

    fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : root() / p; }

private:
    CLI::App* sub_;
    std::string config_path_;
    std::string root_;
    std::vector<std::unique_ptr<Setting>> settings_;
};

std::string require(const KeyValueConfig& cfg, const std::string& key, const std::string& flag) {
    const std::string v = cfg.get(key, "");
    if (v.empty()) throw UsageError("missing required " + flag + " (or `" + key + "` in the config file)");
    return v;
}

template <typename Fn>
auto usage_checked(Fn fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.code() == Errc::invalid_argument || e.code() == Errc::parse) throw UsageError(e.what());
        throw;
    }
}

std::vector<double> parse_edges(const std::string& text) {
    std::vector<double> edges;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            edges.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw UsageError("bucket edges must be comma-separated numbers: " + text);
        }
    }
    if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0 ||
        !std::is_sorted(edges.begin(), edges.end(), std::less_equal<>()) ||
        std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
        throw UsageError("bucket edges must increase strictly from 0 to 1: " + text);
    }
    return edges;
}

std::string join_edges(const std::vector<double>& edges) {
    std::string s;
    for (std::size_t i = 0; i < edges.size(); ++i) s += (i ? "," : "") + format_number(edges[i]);
    return s;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

// ---- synth ----------------------------------------------------------------

void add_synth_settings(Command& c) {
    c.setting("--sources", "sources", "sources.jsonl listing real images and masks");
    c.setting("--demo-sources", "demo_sources", "generate this many synthetic sources instead of --sources");
    c.setting("--out", "out", "output dataset directory");
    c.setting("--seed", "seed", "global seed");
    c.setting("--ratio-min", "ratio_min", "minimum foreground ratio");
    c.setting("--ratio-max", "ratio_max", "maximum foreground ratio");
    c.setting("--hue-threshold", "hue_threshold_deg", "maximum foreground hue shift in degrees");
    c.setting("--clip-threshold", "clip_threshold", "maximum fraction of clipped foreground pixels");
    c.setting("--split", "split_fraction", "fraction of real-image groups assigned to train");
    c.setting("--per-target", "composites_per_target", "composites generated per target");
    c.setting("--pitie-iters", "pitie_iters", "iterations of the N-dimensional PDF transfer");
    c.setting("--workers", "workers", "worker threads");
}

int run_synth_cmd(const Command& c, std::ostream& out, std::ostream& err) {
    const auto cfg = c.effective();
    const auto config = usage_checked([&] { return synth::SynthConfig::from(cfg); });
    const fs::path dir = c.resolve(require(cfg, "out", "--out"));
    const bool demo = cfg.has("demo_sources");
    if (demo == cfg.has("sources")) throw UsageError("give exactly one of --sources or --demo-sources");

    std::vector<synth::SourceRecord> sources;
    if (demo) {
        const long long n = usage_checked([&] { return cfg.get_int("demo_sources", 0); });
        if (n < 2) throw UsageError("--demo-sources must be >= 2");
        err << "writing " << n << " demo sources\n";
        sources = synth::make_demo_sources(dir / "sources", static_cast<int>(n), config.seed);
    } else {
        sources = synth::read_sources(c.resolve(cfg.get("sources", "")));
    }
    err << "synthesizing from " << sources.size() << " sources with " << config.workers << " workers\n";
    const auto summary = synth::run_synth(sources, dir, config);
    std::size_t train = 0, test = 0;
    for (const auto& r : summary.manifest.records) (r.split == "train" ? train : test) += 1;
    out << "records " << summary.manifest.records.size() << " train " << train << " test " << test << " rejected "
        << summary.rejected.size() << " skipped_sources " << summary.skipped_sources << "\n";
    out << "manifest " << (dir / "manifest.jsonl").lexically_normal().string() << "\n";
    return kOk;
}

// ---- filter ---------------------------------------------------------------

void add_filter_settings(Command& c) {
    c.setting("--manifest", "manifest", "manifest.jsonl to filter");
    c.setting("--reviews", "reviews", "review-service event log; rejected records are dropped");
    c.setting("--out", "filtered_name", "output file name, written next to the manifest (default filtered.jsonl)");
    c.setting("--ratio-min", "ratio_min", "minimum foreground ratio");
    c.setting("--ratio-max", "ratio_max", "maximum foreground ratio");
    c.setting("--hue-threshold", "hue_threshold_deg", "maximum foreground hue shift in degrees");
    c.setting("--clip-threshold", "clip_threshold", "maximum fraction of clipped foreground pixels");
}

int run_filter_cmd(const Command& c, std::ostream& out, std::ostream& err) {
    const auto cfg = c.effective();
    const auto config = usage_checked([&] { return synth::SynthConfig::from(cfg); });
    const fs::path manifest_path = c.resolve(require(cfg, "manifest", "--manifest"));
    const std::string name = cfg.get("filtered_name", "filtered.jsonl");
    if (fs::path(name).has_parent_path() || name.empty()) throw UsageError("--out must be a plain file name");
    const fs::path root = manifest_path.parent_path();

    auto manifest = synth::read_manifest(manifest_path);
    if (cfg.has("reviews")) manifest = review::annotate(review::replay(c.resolve(cfg.get("reviews", ""))), manifest);
    synth::Manifest kept;
    std::size_t auto_rejected = 0, human_rejected = 0;
    for (auto rec : manifest.records) {
        rec.filter_verdicts = synth::heuristic_filter(rec, root, config);
        if (!rec.passes_filters()) {
            ++auto_rejected;
            continue;
        }
        if (rec.human_verdict && !rec.human_verdict->accept) {
            ++human_rejected;
            continue;
        }
        kept.records.push_back(std::move(rec));
    }
    err << "filtered " << manifest.records.size() << " records\n";
    synth::write_manifest(root / name, kept);
    auto snap = config.snapshot();
    snap.set("manifest", manifest_path.string());
    if (cfg.has("reviews")) snap.set("reviews", c.resolve(cfg.get("reviews", "")).string());
    snap.save(root / (fs::path(name).stem().string() + ".config.txt"));
    out << "kept " << kept.records.size() << " filter_rejected " << auto_rejected << " human_rejected "
        << human_rejected << "\n";
    return kOk;
}

// ---- eval -----------------------------------------------------------------

void add_eval_settings(Command& c) {
    c.setting("--manifest", "manifest", "manifest.jsonl with real images and masks");
    c.setting("--candidates", "candidates", "directory of harmonized outputs named <record id>.png");
    c.setting("--split", "split", "train, test or all (default test)");
    c.setting("--label", "label", "row label for the report");
    c.setting("--buckets", "buckets", "foreground-ratio bucket edges (default 0,0.05,0.15,1)");
    c.setting("--out", "report_dir", "directory for report.json, buckets.csv and the config snapshot");
    c.setting("--workers", "workers", "worker threads");
}

int run_eval_cmd(const Command& c, std::ostream& out, std::ostream& err) {
    const auto cfg = c.effective();
    const fs::path manifest_path = c.resolve(require(cfg, "manifest", "--manifest"));
    fs::path cand = require(cfg, "candidates", "--candidates");
    cand = c.resolve(cand);
    metrics::EvalOptions opt;
    opt.split = cfg.get("split", opt.split);
    if (opt.split != "train" && opt.split != "test" && opt.split != "all") {
        throw UsageError("--split must be train, test or all");
    }
    opt.label = cfg.get("label", "");
    if (cfg.has("buckets")) opt.bucket_edges = parse_edges(cfg.get("buckets", ""));
    opt.workers = static_cast<int>(usage_checked([&] { return cfg.get_int("workers", 1); }));
    if (opt.workers < 1) throw UsageError("--workers must be >= 1");

    const auto manifest = synth::read_manifest(manifest_path);
    err << "evaluating " << cand.string() << "\n";
    const auto report = metrics::evaluate_set(manifest, manifest_path.parent_path(), cand, opt);
    out << metrics::format_table(report);
    if (cfg.has("report_dir")) {
        const fs::path dir = c.resolve(cfg.get("report_dir", ""));
        write_text(dir / "report.json", metrics::report_json(report));
        write_text(dir / "buckets.csv", metrics::buckets_csv(report));
        KeyValueConfig snap;
        snap.set("manifest", manifest_path.string());
        snap.set("candidates", cand.string());
        snap.set("split", opt.split);
        snap.set("label", report.label);
        snap.set("buckets", join_edges(opt.bucket_edges));
        snap.set("eval_size", "256x256");
        snap.set("eval_resample", "bilinear");
        snap.set("eval_quantization", "8bit");
        snap.save(dir / "effective_config.txt");
    }
    return kOk;
}

// ---- kernels-check --------------------------------------------------------

void add_kernels_settings(Command& c) {
    c.setting("--seed", "seed", "seed for the randomized suites (default 7)");
    c.setting("--lambda", "lambda", "adversarial loss weight (default 0.01)");
    c.setting("--weights", "weights", "weight file to run through the exhaustive partial-conv leak check");
}

int run_kernels_cmd(const Command& c, std::ostream& out, std::ostream& err) {
    const auto cfg = c.effective();
    const auto seed = usage_checked([&] { return cfg.get_uint("seed", 7); });
    dove::LossConfig loss;
    loss.lambda = usage_checked([&] { return cfg.get_double("lambda", loss.lambda); });
    usage_checked([&] {
        loss.validate();
        return 0;
    });
    auto checks = dove::run_kernel_checks(seed, loss);
    if (cfg.has("weights")) {
        const auto wf = dove::read_conv_weights(c.resolve(cfg.get("weights", "")));
        if (wf.kernel_h % 2 == 0 || wf.kernel_w % 2 == 0) throw Error(Errc::invalid_argument, "weight kernels must be odd-sized");
        dove::ConvWeights<double> wd{wf.out_channels, wf.in_channels, wf.kernel_h, wf.kernel_w,
                                     wf.kernels.cast<double>(), wf.bias.cast<double>()};
        auto check = dove::check_partial_conv_no_leak(wd, splitmix64(seed));
        check.name += "[weights]";
        checks.push_back(check);
    }
    double max_fd = 0.0;
    bool ok = true;
    for (const auto& k : checks) {
        char line[160];
        std::snprintf(line, sizeof line, "%-4s %-26s value=%.3e tol=%.0e\n", k.pass ? "PASS" : "FAIL", k.name.c_str(),
                      k.value, k.tolerance);
        out << line;
        if (k.name.rfind("grad_", 0) == 0) max_fd = std::max(max_fd, k.value);
        ok = ok && k.pass;
    }
    char line[96];
    std::snprintf(line, sizeof line, "max finite-difference error: %.3e\n", max_fd);
    out << line;
    if (!ok) {
        err << "error[kernels]: " << std::count_if(checks.begin(), checks.end(), [](auto& k) { return !k.pass; })
            << " kernel check(s) failed\n";
        return kFailure;
    }
    return kOk;
}

// ---- bt-fit ---------------------------------------------------------------

void add_btfit_settings(Command& c) {
    c.setting("--comparisons", "comparisons", "comparison export (method_a,method_b,winner[,count])");
    c.setting("--out", "scores", "machine-readable scores file (JSON)");
    c.setting("--max-iters", "max_iters", "iteration limit (default 10000)");
    c.setting("--tol", "tol", "convergence tolerance on log-worth change (default 1e-10)");
}

int run_btfit_cmd(const Command& c, std::ostream& out, std::ostream& err) {
    const auto cfg = c.effective();
    const fs::path in = c.resolve(require(cfg, "comparisons", "--comparisons"));
    const int iters = static_cast<int>(usage_checked([&] { return cfg.get_int("max_iters", 10000); }));
    const double tol = usage_checked([&] { return cfg.get_double("tol", 1e-10); });
    if (iters < 1 || !(tol > 0)) throw UsageError("--max-iters must be >= 1 and --tol > 0");
    const auto m = btrank::read_comparisons(in);
    if (m.total() == 0) throw Error(Errc::not_found, "no comparisons in " + in.string());
    const auto s = btrank::fit_bradley_terry(m, iters, tol);
    if (!s.converged) err << "warning: not converged after " << s.iterations << " iterations\n";
    out << btrank::ranked_table(s);
    if (cfg.has("scores")) {
        const fs::path path = c.resolve(cfg.get("scores", ""));
        write_text(path, btrank::scores_json(s));
        KeyValueConfig snap;
        snap.set("comparisons", in.string());
        snap.set("max_iters", std::to_string(iters));
        snap.set("tol", format_number(tol));
        snap.set("pseudo_count", "0.5");
        snap.set("normalization", s.normalization);
        snap.save(path.parent_path() / (path.stem().string() + ".config.txt"));
    }
    return kOk;
}

// ---- serve ----------------------------------------------------------------

void add_serve_settings(Command& c) {
    c.setting("--log", "log", "event log file (created if missing)");
    c.setting("--manifest", "manifest", "manifest whose records are queued for review");
    c.setting("--study", "study", "directory of <method>/<composite id>.png outputs for pairwise comparison");
    c.setting("--results-per-pair", "results_per_pair", "results collected per method pair (default 25)");
    c.setting("--host", "host", "listen address (default 127.0.0.1)");
    c.setting("--port", "port", "listen port (default 8080, 0 picks a free one)");
    c.setting("--port-file", "port_file", "write the bound port to this file");
    c.setting("--ui", "ui", "directory of static client assets");
    c.setting("--seed", "seed", "seed for left/right placement (default random)");
}

int run_serve_cmd(const Command& c, std::ostream& out, std::ostream& err) {
    const auto cfg = c.effective();
    const fs::path log = c.resolve(require(cfg, "log", "--log"));
    const int per_pair = static_cast<int>(usage_checked([&] { return cfg.get_int("results_per_pair", 25); }));
    const long long port = usage_checked([&] { return cfg.get_int("port", 8080); });
    if (per_pair < 1) throw UsageError("--results-per-pair must be >= 1");
    if (port < 0 || port > 65535) throw UsageError("--port must lie in [0, 65535]");
    const std::string host = cfg.get("host", "127.0.0.1");

    review::ServiceOptions opt;
    opt.log_path = log;
    opt.seed = usage_checked([&] { return cfg.get_uint("seed", 0); });
    review::ReviewService service(opt);
    if (service.dropped_bytes()) err << "dropped " << service.dropped_bytes() << " bytes of a torn log tail\n";
    if (cfg.has("manifest")) {
        const auto r = service.enqueue_from_manifest(c.resolve(cfg.get("manifest", "")));
        err << "queued " << r.added << " new items, " << r.pending << " pending\n";
    }
    if (cfg.has("study")) {
        const auto n = service.create_study(c.resolve(cfg.get("study", "")), per_pair);
        err << "created " << n << " comparison tasks\n";
    }
    auto snap = cfg;
    snap.set("log", log.string());
    snap.set("results_per_pair", std::to_string(per_pair));
    snap.set("host", host);
    snap.set("port", std::to_string(port));
    snap.save(log.parent_path() / (log.stem().string() + ".config.txt"));

    review::ReviewServer server(service, cfg.has("ui") ? c.resolve(cfg.get("ui", "")) : fs::path{});
    const int bound = server.bind(host, static_cast<int>(port));
    if (cfg.has("port_file")) write_text(c.resolve(cfg.get("port_file", "")), std::to_string(bound) + "\n");
    out << "listening on http://" << host << ":" << bound << std::endl;

    sigset_t set, previous;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, &previous);
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    });
    server.listen();
    // listen() also returns on bind loss; wake the waiter in that case.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    err << "stopped\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Image harmonization dataset tools", "harmonize"};
    app.require_subcommand(1, 1);

    using Runner = std::function<int(const Command&, std::ostream&, std::ostream&)>;
    std::vector<std::pair<std::unique_ptr<Command>, Runner>> commands;
    auto add = [&](const char* name, const char* help, void (*settings)(Command&), Runner r) {
        auto cmd = std::make_unique<Command>(app, name, help);
        settings(*cmd);
        commands.emplace_back(std::move(cmd), std::move(r));
    };
    add("synth", "generate composites, filter them and write a split manifest", add_synth_settings, run_synth_cmd);
    add("filter", "re-apply automatic filters and human verdicts to a manifest", add_filter_settings, run_filter_cmd);
    add("eval", "MSE / PSNR / fMSE of candidate images against the real images", add_eval_settings, run_eval_cmd);
    add("kernels-check", "run the partial-conv, loss and normalization checks", add_kernels_settings,
        run_kernels_cmd);
    add("bt-fit", "fit Bradley-Terry scores to pairwise comparisons", add_btfit_settings, run_btfit_cmd);
    add("serve", "run the review and comparison HTTP service", add_serve_settings, run_serve_cmd);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kOk;
        }
        err << "error[usage]: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    for (auto& [cmd, runner] : commands) {
        if (!cmd->app()->parsed()) continue;
        try {
            return runner(*cmd, out, err);
        } catch (const UsageError& e) {
            err << "error[usage]: " << e.what() << "\n\n" << cmd->app()->help();
            return kUsage;
        } catch (const Error& e) {
            err << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
            return kFailure;
        } catch (const std::exception& e) {
            err << "error[internal]: " << e.what() << "\n";
            return kFailure;
        }
    }
    err << "error[usage]: no subcommand\n\n" << app.help();
    return kUsage;
}

}  // namespace harmony::cli
