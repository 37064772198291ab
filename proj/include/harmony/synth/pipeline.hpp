#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "harmony/config.hpp"
#include "harmony/imgcore/image.hpp"
#include "harmony/synth/records.hpp"
#include "harmony/transfer/color_transfer.hpp"

namespace harmony::synth {

struct SynthConfig {
    double ratio_min = 0.01;
    double ratio_max = 0.80;
    double hue_threshold_deg = 60.0;
    double hue_min_saturation = 0.1;
    double clip_threshold = 0.10;
    double split_fraction = 0.8;
    int composites_per_target = 4;
    std::uint64_t seed = 0;
    transfer::Params transfer;
    std::string sub_dataset = "synthetic";
    int workers = 1;

    static SynthConfig from(const KeyValueConfig& cfg);
    /// Snapshot of every effective value, including the statistics conventions.
    KeyValueConfig snapshot() const;
    void validate() const;
};

enum class CompositeMode { TRANSFER, OVERLAY };

/// Seeded uniform choice among records sharing the target's category, or,
/// for aligned-capture targets, among the other captures of its scene.
const SourceRecord& select_reference(std::span<const SourceRecord> pool, const SourceRecord& target,
                                     std::uint64_t seed);

struct CompositeImage {
    ImageRGB image;
    std::string method;
    double clamp_fraction = 0.0;
};

/// In-memory composite: color transfer from the reference foreground onto the
/// target foreground, or region substitution for aligned captures.
CompositeImage make_composite(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                              const Mask& r_mask, CompositeMode mode, std::uint64_t seed,
                              const transfer::Params& params = {});

/// Re-runs a recorded transfer (method tag + seed) without a random choice.
CompositeImage replay_composite(const ImageRGB& target, const Mask& t_mask, const ImageRGB& reference,
                                const Mask& r_mask, const std::string& method, std::uint64_t seed,
                                const transfer::Params& params = {});

/// Generates one composite and writes `<root>/{real,composite,mask}/<id>.png`.
CompositeRecord generate_composite(const SourceRecord& target, const SourceRecord& reference, CompositeMode mode,
                                   std::uint64_t seed, const std::string& record_id,
                                   const std::filesystem::path& root, const SynthConfig& config);

/// Automatic filters: foreground-ratio bounds, circular-mean hue shift, and
/// fraction of clipped foreground pixels.
std::vector<FilterVerdict> heuristic_filter(const ImageRGB& composite, const ImageRGB& real, const Mask& mask,
                                            const SynthConfig& config);
std::vector<FilterVerdict> heuristic_filter(const CompositeRecord& record, const std::filesystem::path& root,
                                            const SynthConfig& config);

/// Circular mean HSV hue (degrees) over foreground pixels with saturation
/// above `min_saturation`; nullopt when no pixel qualifies.
std::optional<double> circular_mean_hue(const ImageRGB& img, const Mask& mask, double min_saturation);
/// Smallest angle between two hues, in [0, 180].
double hue_distance(double a, double b);

/// Groups records by real image and assigns whole groups to train/test by a
/// seeded shuffle. Records come back sorted by id.
Manifest build_manifest(std::vector<CompositeRecord> records, double split_fraction, std::uint64_t seed);

struct SynthSummary {
    Manifest manifest;
    std::vector<CompositeRecord> rejected;
    std::size_t skipped_sources = 0;
};

/// Full pipeline: generation for every valid source, filtering, splitting,
/// and persistence of manifest.jsonl, rejected.jsonl and effective_config.txt.
SynthSummary run_synth(const std::vector<SourceRecord>& sources, const std::filesystem::path& root,
                       const SynthConfig& config);

/// Writes `count` synthetic sources (images, masks, sources.jsonl) into `dir`:
/// unaligned sources in a few categories plus aligned-capture scene groups.
std::vector<SourceRecord> make_demo_sources(const std::filesystem::path& dir, int count, std::uint64_t seed);

}  // namespace harmony::synth
