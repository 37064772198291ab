#include "harmony/synth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "harmony/imgcore/color_space.hpp"
#include "harmony/imgcore/io.hpp"
#include "harmony/imgcore/masked_stats.hpp"
#include "harmony/parallel.hpp"
#include "harmony/rng.hpp"

namespace harmony::synth {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kReferenceStream = 0x7265666572656e63ULL;

}  // namespace

// ---------------------------------------------------------------------------
// Config

SynthConfig SynthConfig::from(const KeyValueConfig& cfg) {
    SynthConfig c;
    c.ratio_min = cfg.get_double("ratio_min", c.ratio_min);
    c.ratio_max = cfg.get_double("ratio_max", c.ratio_max);
    c.hue_threshold_deg = cfg.get_double("hue_threshold_deg", c.hue_threshold_deg);
    c.hue_min_saturation = cfg.get_double("hue_min_saturation", c.hue_min_saturation);
    c.clip_threshold = cfg.get_double("clip_threshold", c.clip_threshold);
    c.split_fraction = cfg.get_double("split_fraction", c.split_fraction);
    c.composites_per_target = static_cast<int>(cfg.get_int("composites_per_target", c.composites_per_target));
    c.seed = cfg.get_uint("seed", c.seed);
    c.transfer.pitie_iters = static_cast<int>(cfg.get_int("pitie_iters", c.transfer.pitie_iters));
    c.transfer.fecker_bins = static_cast<int>(cfg.get_int("fecker_bins", c.transfer.fecker_bins));
    c.sub_dataset = cfg.get("sub_dataset", c.sub_dataset);
    c.workers = static_cast<int>(cfg.get_int("workers", c.workers));
    c.validate();
    return c;
}

KeyValueConfig SynthConfig::snapshot() const {
    KeyValueConfig k;
    k.set("ratio_min", format_number(ratio_min));
    k.set("ratio_max", format_number(ratio_max));
    k.set("hue_threshold_deg", format_number(hue_threshold_deg));
    k.set("hue_min_saturation", format_number(hue_min_saturation));
    k.set("clip_threshold", format_number(clip_threshold));
    k.set("split_fraction", format_number(split_fraction));
    k.set("composites_per_target", std::to_string(composites_per_target));
    k.set("seed", std::to_string(seed));
    k.set("pitie_iters", std::to_string(transfer.pitie_iters));
    k.set("fecker_bins", std::to_string(transfer.fecker_bins));
    k.set("sub_dataset", sub_dataset);
    k.set("filters", "ratio_bounds,hue_shift,clip");
    k.set("transfer_statistics", "foreground_region");
    k.set("statistics_encoding", "stored_8bit_srgb");
    return k;
}

void SynthConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(Errc::invalid_argument, msg); };
    if (!(ratio_min >= 0.0 && ratio_min < ratio_max && ratio_max <= 1.0)) fail("ratio bounds must satisfy 0 <= min < max <= 1");
    if (!(hue_threshold_deg >= 0.0 && hue_threshold_deg <= 180.0)) fail("hue threshold must lie in [0, 180] degrees");
    if (!(clip_threshold >= 0.0 && clip_threshold <= 1.0)) fail("clip threshold must lie in [0, 1]");
    if (!(split_fraction >= 0.0 && split_fraction <= 1.0)) fail("split fraction must lie in [0, 1]");
    if (composites_per_target < 1) fail("composites_per_target must be >= 1");
    if (transfer.pitie_iters < 1) fail("pitie_iters must be >= 1");
    if (transfer.fecker_bins < 64 || transfer.fecker_bins > 65536) fail("fecker_bins must lie in [64, 65536]");
    if (workers < 1) fail("workers must be >= 1");
}

// ---------------------------------------------------------------------------
// Reference selection and composite generation

const SourceRecord& select_reference(std::span<const SourceRecord> pool, const SourceRecord& target,
                                     std::uint64_t seed) {
    std::vector<const SourceRecord*> candidates;
    for (const auto& s : pool) {
        if (s.id == target.id) continue;
        if (!target.scene_id.empty()) {
            if (s.scene_id == target.scene_id) candidates.push_back(&s);
        } else if (s.category_label == target.category_label) {
            candidates.push_back(&s);
        }
    }
    if (candidates.empty()) {
        throw Error(Errc::not_found, target.scene_id.empty()
                                         ? "no same-category reference for " + target.id
                                         : "no sibling capture for " + target.id + " in scene " + target.scene_id);
    }
    SplitMix rng(seed);
    return *candidates[rng.below(candidates.size())];
}

CompositeImage make_composite(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                              const Mask& r_mask, CompositeMode mode, std::uint64_t seed,
                              const transfer::Params& params) {
    if (mode == CompositeMode::OVERLAY) {
        return {overlay_composite(target, reference, t_mask), kOverlayMethod, 0.0};
    }
    auto rt = transfer::random_transfer(target, t_mask, reference, r_mask, seed, params);
    return {std::move(rt.result.image), std::string(transfer::to_string(rt.method)), rt.result.clamp_fraction};
}

CompositeImage replay_composite(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                                const Mask& r_mask, const std::string& method, std::uint64_t seed,
                                const transfer::Params& params) {
    if (method == kOverlayMethod) return {overlay_composite(target, reference, t_mask), method, 0.0};
    auto r = transfer::apply(transfer::method_from_string(method), target, t_mask, reference, r_mask, seed, params);
    return {std::move(r.image), method, r.clamp_fraction};
}

namespace {

std::string real_rel(const std::string& id) { return "real/" + id + ".png"; }
std::string mask_rel(const std::string& id) { return "mask/" + id + ".png"; }
std::string composite_rel(const std::string& id) { return "composite/" + id + ".png"; }

}  // namespace

CompositeRecord generate_composite(const SourceRecord& target, const SourceRecord& reference, CompositeMode mode,
                                   std::uint64_t seed, const std::string& record_id, const fs::path& root,
                                   const SynthConfig& config) {
    const ImageRGB t_img = read_image(target.image_path);
    const Mask t_mask = read_mask_png(target.mask_path);
    const ImageRGB r_img = read_image(reference.image_path);
    const Mask r_mask = read_mask_png(reference.mask_path);
    if (mode == CompositeMode::OVERLAY && (!t_img.same_shape(r_img) || target.scene_id != reference.scene_id)) {
        throw Error(Errc::dimension_mismatch, "overlay needs pixel-aligned captures of one scene: " + target.id +
                                                  " / " + reference.id);
    }
    const CompositeImage comp = make_composite(t_img, t_mask, r_img, r_mask, mode, seed, config.transfer);

    CompositeRecord rec;
    rec.id = record_id;
    rec.target_id = target.id;
    rec.category_label = target.category_label;
    rec.sub_dataset = config.sub_dataset;
    rec.composite_path = composite_rel(record_id);
    rec.real_path = real_rel(target.id);
    rec.mask_path = mask_rel(target.id);
    rec.method = comp.method;
    rec.reference_id = reference.id;
    rec.seed = seed;

    write_png(root / rec.composite_path, comp.image);
    if (!fs::exists(root / rec.real_path)) write_png(root / rec.real_path, t_img);
    if (!fs::exists(root / rec.mask_path)) write_mask_png(root / rec.mask_path, t_mask);
    return rec;
}

// ---------------------------------------------------------------------------
// Filters

double hue_distance(double a, double b) {
    double d = std::fmod(std::abs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

std::optional<double> circular_mean_hue(const ImageRGB& img, const Mask& mask, double min_saturation) {
    require_same_shape(img, mask);
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const auto p = img.pixels().row(i);
        const auto [hue, sat] = hue_saturation(p(0), p(1), p(2));
        if (sat <= min_saturation) continue;
        const double rad = hue * M_PI / 180.0;
        sx += std::cos(rad);
        sy += std::sin(rad);
        ++n;
    }
    if (n == 0 || (sx == 0.0 && sy == 0.0)) return std::nullopt;
    double deg = std::atan2(sy, sx) * 180.0 / M_PI;
    if (deg < 0) deg += 360.0;
    return deg;
}

std::vector<FilterVerdict> heuristic_filter(const ImageRGB& composite, const ImageRGB& real, const Mask& mask,
                                            const SynthConfig& config) {
    require_same_shape(composite, real);
    require_same_shape(composite, mask);
    std::vector<FilterVerdict> out;

    const double ratio = foreground_ratio(mask);
    out.push_back({"ratio_bounds", ratio >= config.ratio_min && ratio <= config.ratio_max, ratio});

    const auto hc = circular_mean_hue(composite, mask, config.hue_min_saturation);
    const auto hr = circular_mean_hue(real, mask, config.hue_min_saturation);
    const double shift = hc && hr ? hue_distance(*hc, *hr) : 0.0;
    out.push_back({"hue_shift", shift <= config.hue_threshold_deg, shift});

    // A foreground pixel counts as clipped when some channel sits at the gamut
    // boundary in the composite but not in the real image.
    const ImageRGB qc = quantize(composite);
    const ImageRGB qr = quantize(real);
    Eigen::Index fg = 0, clipped = 0;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        ++fg;
        for (int c = 0; c < 3; ++c) {
            const double v = qc.pixels()(i, c);
            const double r = qr.pixels()(i, c);
            if ((v == 0.0 || v == 1.0) && v != r) {
                ++clipped;
                break;
            }
        }
    }
    const double clip_fraction = fg ? static_cast<double>(clipped) / static_cast<double>(fg) : 0.0;
    out.push_back({"clip", clip_fraction <= config.clip_threshold, clip_fraction});
    return out;
}

std::vector<FilterVerdict> heuristic_filter(const CompositeRecord& record, const fs::path& root,
                                            const SynthConfig& config) {
    return heuristic_filter(read_image(root / record.composite_path), read_image(root / record.real_path),
                            read_mask_png(root / record.mask_path), config);
}

// ---------------------------------------------------------------------------
// Split

Manifest build_manifest(std::vector<CompositeRecord> records, double split_fraction, std::uint64_t seed) {
    if (records.empty()) throw Error(Errc::invalid_argument, "cannot build a manifest from zero records");
    if (!(split_fraction >= 0.0 && split_fraction <= 1.0)) {
        throw Error(Errc::invalid_argument, "split fraction must lie in [0, 1]");
    }
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].real_path].push_back(i);

    std::vector<const std::vector<std::size_t>*> order;
    for (const auto& [key, members] : groups) order.push_back(&members);
    SplitMix rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    const auto n_train = static_cast<std::size_t>(std::llround(split_fraction * static_cast<double>(order.size())));
    for (std::size_t g = 0; g < order.size(); ++g) {
        for (std::size_t idx : *order[g]) records[idx].split = g < n_train ? "train" : "test";
    }
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return Manifest{std::move(records)};
}

// ---------------------------------------------------------------------------
// Pipeline

SynthSummary run_synth(const std::vector<SourceRecord>& sources, const fs::path& root, const SynthConfig& config) {
    config.validate();
    SynthSummary summary;

    std::vector<SourceRecord> pool;
    for (const auto& s : sources) {
        const double ratio = foreground_ratio(read_mask_png(s.mask_path));
        if (ratio < config.ratio_min || ratio > config.ratio_max) {
            ++summary.skipped_sources;
            continue;
        }
        pool.push_back(s);
    }
    std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    struct Job {
        const SourceRecord* target;
        const SourceRecord* reference;
        CompositeMode mode;
        std::string id;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    std::vector<const SourceRecord*> targets;
    for (const auto& t : pool) {
        bool usable = true;
        std::vector<Job> mine;
        for (int k = 0; k < config.composites_per_target; ++k) {
            const std::string id = t.id + "-" + std::to_string(k);
            const std::uint64_t seed = derive_seed(config.seed, id);
            try {
                const SourceRecord& ref = select_reference(pool, t, splitmix64(seed ^ kReferenceStream));
                mine.push_back({&t, &ref, t.scene_id.empty() ? CompositeMode::TRANSFER : CompositeMode::OVERLAY, id,
                                seed});
            } catch (const Error& e) {
                if (e.code() != Errc::not_found) throw;
                usable = false;
                break;
            }
        }
        if (!usable) {
            ++summary.skipped_sources;
            continue;
        }
        targets.push_back(&t);
        jobs.insert(jobs.end(), mine.begin(), mine.end());
    }

    // Real images and masks first, so composite jobs never race on them.
    parallel_for(targets.size(), config.workers, [&](std::size_t i) {
        const SourceRecord& t = *targets[i];
        write_png(root / real_rel(t.id), read_image(t.image_path));
        write_mask_png(root / mask_rel(t.id), read_mask_png(t.mask_path));
    });

    std::vector<CompositeRecord> records(jobs.size());
    parallel_for(jobs.size(), config.workers, [&](std::size_t i) {
        const Job& j = jobs[i];
        CompositeRecord rec = generate_composite(*j.target, *j.reference, j.mode, j.seed, j.id, root, config);
        rec.filter_verdicts = heuristic_filter(rec, root, config);
        records[i] = std::move(rec);
    });

    std::vector<CompositeRecord> passed;
    for (auto& r : records) {
        if (r.passes_filters()) {
            passed.push_back(std::move(r));
        } else {
            summary.rejected.push_back(std::move(r));
        }
    }
    std::sort(summary.rejected.begin(), summary.rejected.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    if (!passed.empty()) summary.manifest = build_manifest(std::move(passed), config.split_fraction, config.seed);

    write_manifest(root / "manifest.jsonl", summary.manifest);
    write_manifest(root / "rejected.jsonl", Manifest{summary.rejected});
    config.snapshot().save(root / "effective_config.txt");
    return summary;
}

// ---------------------------------------------------------------------------
// Demo data

std::vector<SourceRecord> make_demo_sources(const fs::path& dir, int count, std::uint64_t seed) {
    if (count < 2) throw Error(Errc::invalid_argument, "demo needs at least two sources");
    const int w = 48, h = 40;
    const char* categories[] = {"apple", "car", "person"};
    const double base_hues[] = {10.0, 215.0, 35.0};
    SplitMix rng(seed);
    std::vector<SourceRecord> out;

    auto hsv = [](double hue, double s, double v) {
        const double c = v * s;
        const double hp = std::fmod(hue / 60.0, 6.0);
        const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
        double r = 0, g = 0, b = 0;
        if (hp < 1) { r = c; g = x; } else if (hp < 2) { r = x; g = c; } else if (hp < 3) { g = c; b = x; }
        else if (hp < 4) { g = x; b = c; } else if (hp < 5) { r = x; b = c; } else { r = c; b = x; }
        const double m = v - c;
        return Eigen::RowVector3d(r + m, g + m, b + m);
    };

    // Scene geometry drawn once; captures differ by a global illumination change.
    auto render = [&](const std::string& id, double cx, double cy, double rx, double ry, double fg_hue,
                      Eigen::RowVector3d bg_a, Eigen::RowVector3d bg_b, Eigen::RowVector3d gain, std::uint64_t tex_seed,
                      const std::string& category, const std::string& scene) {
        ImageRGB img(w, h);
        Mask mask(w, h);
        SplitMix tex(tex_seed);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double dx = (x - cx) / rx, dy = (y - cy) / ry;
                const bool fg = dx * dx + dy * dy <= 1.0;
                const double t = (x + y) / double(w + h);
                const double noise = tex.uniform() - 0.5;
                Eigen::RowVector3d p;
                if (fg) {
                    p = hsv(fg_hue + 12.0 * noise, 0.55 + 0.2 * std::abs(dy), 0.45 + 0.35 * (1.0 - std::abs(dx)));
                } else {
                    p = (1 - t) * bg_a + t * bg_b + Eigen::RowVector3d::Constant(0.04 * noise);
                }
                img.pixel(x, y) = p.cwiseProduct(gain).cwiseMax(0.0).cwiseMin(1.0);
                mask.set(x, y, fg);
            }
        }
        SourceRecord s{id, "images/" + id + ".png", "masks/" + id + ".png", category, scene};
        write_png(dir / s.image_path, img);
        write_mask_png(dir / s.mask_path, mask);
        out.push_back(s);
    };

    const int scenes = std::max(1, count / 6);
    const int aligned = std::min(count - 2, scenes * 3);
    const int unaligned = count - aligned;
    for (int i = 0; i < unaligned; ++i) {
        const int c = i % 3;
        char id[32];
        std::snprintf(id, sizeof id, "src%03d", i);
        const Eigen::RowVector3d bg_a(0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform());
        const Eigen::RowVector3d bg_b(0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform());
        render(id, 14 + 20 * rng.uniform(), 12 + 16 * rng.uniform(), 6 + 8 * rng.uniform(), 5 + 7 * rng.uniform(),
               base_hues[c] + 25.0 * (rng.uniform() - 0.5), bg_a, bg_b, Eigen::RowVector3d::Ones(), rng.next(),
               categories[c], "");
    }
    for (int i = 0; i < aligned; ++i) {
        const int scene = i / 3;
        char id[32], scene_id[32];
        std::snprintf(id, sizeof id, "scene%02d_cap%d", scene, i % 3);
        std::snprintf(scene_id, sizeof scene_id, "scene%02d", scene);
        SplitMix geo(seed ^ splitmix64(1000 + scene));
        const double cx = 14 + 20 * geo.uniform(), cy = 12 + 16 * geo.uniform();
        const double rx = 7 + 6 * geo.uniform(), ry = 6 + 6 * geo.uniform();
        const double hue = 360.0 * geo.uniform();
        const Eigen::RowVector3d bg_a(0.3 + 0.4 * geo.uniform(), 0.3 + 0.4 * geo.uniform(), 0.3 + 0.4 * geo.uniform());
        const Eigen::RowVector3d bg_b(0.3 + 0.4 * geo.uniform(), 0.3 + 0.4 * geo.uniform(), 0.3 + 0.4 * geo.uniform());
        const std::uint64_t tex = geo.next();
        const Eigen::RowVector3d gain(0.6 + 0.5 * rng.uniform(), 0.6 + 0.5 * rng.uniform(), 0.6 + 0.5 * rng.uniform());
        render(id, cx, cy, rx, ry, hue, bg_a, bg_b, gain, tex, "scene", scene_id);
    }
    write_sources(dir / "sources.jsonl", out);
    for (auto& s : out) {
        s.image_path = dir / s.image_path;
        s.mask_path = dir / s.mask_path;
    }
    return out;
}

}  // namespace harmony::synth
