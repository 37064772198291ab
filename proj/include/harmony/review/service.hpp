#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

#include "harmony/review/event_log.hpp"
#include "harmony/review/state.hpp"
#include "harmony/synth/records.hpp"

namespace harmony::review {

struct ServiceOptions {
    std::filesystem::path log_path;
    /// Seeds left/right placement; 0 draws one from std::random_device.
    std::uint64_t seed = 0;
    /// Milliseconds since the epoch, stamped on each event.
    std::function<std::int64_t()> clock;
    /// Produces session tokens; defaults to 128 random bits in hex.
    std::function<std::string()> token_source;
};

/// What a rater sees for one duel. Method names are deliberately absent.
struct ServedDuel {
    std::string duel_id;
    std::string session;
    std::string image_left;
    std::string image_right;
    int completed = 0;
};

struct EnqueueResult {
    std::size_t added = 0;
    std::size_t pending = 0;
};

/// Human review state backed by an event log. Every mutation is appended
/// durably before it is applied and acknowledged; constructing a service on an
/// existing log replays it. Methods are safe to call from many threads.
class ReviewService {
public:
    explicit ReviewService(ServiceOptions options);

    /// Adds a pending item for every record that passed the automatic filters
    /// and is not already known. Paths are resolved against `root`.
    EnqueueResult enqueue_from_manifest(const synth::Manifest& manifest, const std::filesystem::path& root);
    EnqueueResult enqueue_from_manifest(const std::filesystem::path& manifest_path);

    /// First pending item in enqueue order.
    std::optional<ReviewItem> next_item() const;
    ReviewItem submit_verdict(const std::string& item_id, const synth::HumanVerdict& verdict);

    std::string mint_session();

    /// Creates a task for every method pair with an output for the same
    /// composite under `methods_root/<method>/<composite_id>.png`. Idempotent.
    /// Returns the number of new tasks.
    std::size_t create_study(const std::filesystem::path& methods_root, int results_per_pair);
    /// Returns false when the task already exists.
    bool add_task(const std::string& composite_id, const std::string& method_a, const std::string& image_a,
                  const std::string& method_b, const std::string& image_b, int results_per_pair);

    /// The session's open duel if it has one; otherwise serves the least-served
    /// unfinished task this session has not seen (ties in creation order) with
    /// a random left/right placement. Errc::exhausted when nothing is left.
    ServedDuel next_comparison(const std::string& session);
    void submit_comparison(const std::string& session, const std::string& duel_id, Side winner);

    /// Results in the bt-rank input format. Errc::not_found without results.
    std::string export_comparisons() const;

    /// Copies of the records with human verdicts filled in from the log.
    synth::Manifest annotate(const synth::Manifest& manifest) const;

    /// Path of an image by kind (composite, real, mask) and item id, or of a
    /// duel image by "<duel_id>-a" / "<duel_id>-b".
    std::filesystem::path image_path(const std::string& kind, const std::string& id) const;

    ReviewState snapshot() const;
    const std::filesystem::path& log_path() const { return log_.path(); }
    std::uintmax_t dropped_bytes() const { return log_.dropped_bytes(); }

private:
    void commit(nlohmann::json event);

    ServiceOptions options_;
    EventLog log_;
    ReviewState state_;
    mutable std::shared_mutex mutex_;
};

/// State rebuilt from a log file without opening it for writing.
ReviewState replay(const std::filesystem::path& log_path);

/// Copies of the records with human verdicts filled in from `state`.
synth::Manifest annotate(const ReviewState& state, const synth::Manifest& manifest);

/// Keeps only records not rejected by a reviewer.
synth::Manifest without_rejected(const synth::Manifest& manifest);

}  // namespace harmony::review
