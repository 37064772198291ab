#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace harmony::synth {

/// One real image with a segmented foreground, usable as target or reference.
struct SourceRecord {
    std::string id;
    std::filesystem::path image_path;
    std::filesystem::path mask_path;
    std::string category_label;
    /// Shared by pixel-aligned captures of one scene (retouch renditions,
    /// time-lapse frames); empty for unaligned sources.
    std::string scene_id;
};

/// Reason codes for manual rejection.
enum class RejectReason { occluded_foreground, hue_change, object_change, unrealistic };

std::string_view to_string(RejectReason reason);
RejectReason reject_reason_from_string(std::string_view tag);

struct HumanVerdict {
    bool accept = true;
    std::optional<RejectReason> reason;
};

struct FilterVerdict {
    std::string filter_name;
    bool pass = true;
    double score = 0.0;
};

inline constexpr const char* kOverlayMethod = "OVERLAY";

struct CompositeRecord {
    std::string id;
    std::string target_id;
    std::string category_label;
    std::string sub_dataset;
    /// Paths are relative to the dataset root.
    std::string composite_path;
    std::string real_path;
    std::string mask_path;
    /// Transfer method tag, or OVERLAY for aligned-capture composites.
    std::string method;
    std::string reference_id;
    std::uint64_t seed = 0;
    std::vector<FilterVerdict> filter_verdicts;
    std::optional<HumanVerdict> human_verdict;
    /// "train", "test", or empty before splitting.
    std::string split;

    bool passes_filters() const;
};

struct Manifest {
    std::vector<CompositeRecord> records;
};

nlohmann::json to_json(const CompositeRecord& record);
CompositeRecord record_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SourceRecord& source);
/// Relative paths in the JSON are resolved against `base`.
SourceRecord source_from_json(const nlohmann::json& j, const std::filesystem::path& base);

/// One record per line, UTF-8 JSON objects.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);
std::string manifest_text(const Manifest& manifest);

std::vector<SourceRecord> read_sources(const std::filesystem::path& path);
void write_sources(const std::filesystem::path& path, const std::vector<SourceRecord>& sources);

}  // namespace harmony::synth
