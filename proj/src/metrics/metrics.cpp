#include "harmony/metrics/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "harmony/imgcore/io.hpp"
#include "harmony/imgcore/masked_stats.hpp"
#include "harmony/parallel.hpp"

namespace harmony::metrics {

namespace fs = std::filesystem;

std::vector<double> default_bucket_edges() { return {0.0, 0.05, 0.15, 1.0}; }

namespace {

void check_edges(const std::vector<double>& edges) {
    if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0) {
        throw Error(Errc::invalid_argument, "bucket edges must start at 0 and end at 1");
    }
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) throw Error(Errc::invalid_argument, "bucket edges must be strictly increasing");
    }
}

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g%%", v * 100.0);
    return buf;
}

}  // namespace

std::size_t bucket_index(double ratio, const std::vector<double>& edges) {
    check_edges(edges);
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(Errc::invalid_argument, "foreground ratio outside [0, 1]");
    const auto it = std::upper_bound(edges.begin(), edges.end(), ratio);
    const auto idx = static_cast<std::size_t>(it - edges.begin());
    return std::min(idx, edges.size() - 1) - 1;
}

std::string bucket_label(const std::vector<double>& edges, std::size_t index) {
    return percent(edges.at(index)) + "~" + percent(edges.at(index + 1));
}

Aggregate aggregate(std::vector<ImagePairEval> evals) {
    std::sort(evals.begin(), evals.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    Aggregate agg;
    agg.count = evals.size();
    if (evals.empty()) return agg;
    for (const auto& e : evals) {
        agg.mse += e.mse;
        agg.psnr += e.psnr;
        agg.fmse += e.fmse;
    }
    const double n = static_cast<double>(evals.size());
    agg.mse /= n;
    agg.psnr /= n;
    agg.fmse /= n;
    return agg;
}

MetricsReport bucket_by_ratio(std::vector<ImagePairEval> evals, const std::vector<double>& edges) {
    check_edges(edges);
    std::sort(evals.begin(), evals.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    MetricsReport report;
    report.bucket_edges = edges;
    std::vector<std::vector<ImagePairEval>> buckets(edges.size() - 1);
    std::map<std::string, std::vector<ImagePairEval>> methods, categories, subsets;
    for (const auto& e : evals) {
        buckets[bucket_index(e.foreground_ratio, edges)].push_back(e);
        methods[e.method].push_back(e);
        categories[e.category].push_back(e);
        subsets[e.sub_dataset].push_back(e);
    }
    report.overall = aggregate(evals);
    for (auto& b : buckets) report.buckets.push_back(aggregate(std::move(b)));
    for (auto& [k, v] : methods) report.by_method[k] = aggregate(std::move(v));
    for (auto& [k, v] : categories) report.by_category[k] = aggregate(std::move(v));
    for (auto& [k, v] : subsets) report.by_sub_dataset[k] = aggregate(std::move(v));
    report.per_image = std::move(evals);
    return report;
}

ImagePairEval evaluate_pair(const ImageRGB& candidate, const ImageRGB& real, const Mask& mask) {
    require_same_shape(real, mask);
    const ImageRGB a = quantize(resize_bilinear(candidate, kEvalSize, kEvalSize));
    const ImageRGB b = quantize(resize_bilinear(real, kEvalSize, kEvalSize));
    const Mask m = resize_nearest(mask, kEvalSize, kEvalSize);
    ImagePairEval e;
    e.mse = mse(a, b);
    e.psnr = psnr_from_mse(e.mse);
    e.fmse = fmse(a, b, m);
    e.foreground_ratio = foreground_ratio(m);
    return e;
}

MetricsReport evaluate_set(const synth::Manifest& manifest, const fs::path& root, const fs::path& candidate_dir,
                           const EvalOptions& options) {
    std::vector<const synth::CompositeRecord*> selected;
    for (const auto& r : manifest.records) {
        if (options.split == "all" || r.split == options.split) selected.push_back(&r);
    }
    std::vector<std::optional<ImagePairEval>> slots(selected.size());
    parallel_for(selected.size(), options.workers, [&](std::size_t i) {
        const auto& r = *selected[i];
        fs::path cand = candidate_dir / (r.id + ".png");
        if (!fs::exists(cand)) cand = candidate_dir / fs::path(r.real_path).filename();
        if (!fs::exists(cand)) return;
        ImagePairEval e = evaluate_pair(read_image(cand), read_image(root / r.real_path), read_mask_png(root / r.mask_path));
        e.id = r.id;
        e.method = r.method;
        e.category = r.category_label;
        e.sub_dataset = r.sub_dataset.empty() ? "all" : r.sub_dataset;
        slots[i] = e;
    });
    std::vector<ImagePairEval> evals;
    std::size_t missing = 0;
    for (auto& s : slots) {
        if (s) {
            evals.push_back(std::move(*s));
        } else {
            ++missing;
        }
    }
    MetricsReport report = bucket_by_ratio(std::move(evals), options.bucket_edges);
    report.missing = missing;
    if (!options.label.empty()) {
        report.label = options.label;
    } else {
        const auto name = fs::path(candidate_dir).lexically_normal().filename().string().empty()
                              ? fs::path(candidate_dir).lexically_normal().parent_path().filename().string()
                              : fs::path(candidate_dir).lexically_normal().filename().string();
        report.label = name == "composite" ? "Input composite" : name;
    }
    return report;
}

namespace {

std::string row(const std::string& name, const Aggregate& a) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-28s %6zu %12.2f %9.2f %12.2f\n", name.c_str(), a.count, a.mse, a.psnr, a.fmse);
    return buf;
}

nlohmann::json agg_json(const Aggregate& a) {
    return {{"count", a.count}, {"mse", a.mse}, {"psnr", a.psnr}, {"fmse", a.fmse}};
}

}  // namespace

std::string format_table(const MetricsReport& report) {
    std::string out = "== " + report.label + " ==\n";
    char head[160];
    std::snprintf(head, sizeof head, "%-28s %6s %12s %9s %12s\n", "group", "n", "MSE", "PSNR", "fMSE");
    out += head;
    out += row("All", report.overall);
    for (std::size_t i = 0; i < report.buckets.size(); ++i) {
        out += row("ratio " + bucket_label(report.bucket_edges, i), report.buckets[i]);
    }
    for (const auto& [k, v] : report.by_sub_dataset) out += row("subset " + k, v);
    for (const auto& [k, v] : report.by_method) out += row("method " + k, v);
    for (const auto& [k, v] : report.by_category) out += row("category " + k, v);
    if (report.missing) out += "missing candidates: " + std::to_string(report.missing) + "\n";
    return out;
}

std::string report_json(const MetricsReport& report) {
    nlohmann::json j;
    j["label"] = report.label;
    j["overall"] = agg_json(report.overall);
    j["bucket_edges"] = report.bucket_edges;
    j["buckets"] = nlohmann::json::array();
    for (std::size_t i = 0; i < report.buckets.size(); ++i) {
        auto b = agg_json(report.buckets[i]);
        b["range"] = bucket_label(report.bucket_edges, i);
        j["buckets"].push_back(b);
    }
    for (const auto& [k, v] : report.by_method) j["by_method"][k] = agg_json(v);
    for (const auto& [k, v] : report.by_category) j["by_category"][k] = agg_json(v);
    for (const auto& [k, v] : report.by_sub_dataset) j["by_sub_dataset"][k] = agg_json(v);
    j["per_image"] = nlohmann::json::array();
    for (const auto& e : report.per_image) {
        j["per_image"].push_back({{"id", e.id},
                                  {"mse", e.mse},
                                  {"psnr", e.psnr},
                                  {"fmse", e.fmse},
                                  {"foreground_ratio", e.foreground_ratio},
                                  {"method", e.method},
                                  {"category", e.category},
                                  {"sub_dataset", e.sub_dataset}});
    }
    j["missing"] = report.missing;
    return j.dump(2) + "\n";
}

std::string buckets_csv(const MetricsReport& report) {
    std::ostringstream os;
    os.precision(10);
    os << "label,range,count,mse,psnr,fmse\n";
    for (std::size_t i = 0; i < report.buckets.size(); ++i) {
        const auto& b = report.buckets[i];
        os << report.label << ',' << bucket_label(report.bucket_edges, i) << ',' << b.count << ',' << b.mse << ','
           << b.psnr << ',' << b.fmse << '\n';
    }
    os << report.label << ",0%~100%," << report.overall.count << ',' << report.overall.mse << ','
       << report.overall.psnr << ',' << report.overall.fmse << '\n';
    return os.str();
}

}  // namespace harmony::metrics
