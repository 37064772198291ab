#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "harmony/btrank/bradley_terry.hpp"
#include "harmony/synth/records.hpp"

namespace harmony::review {

enum class ItemStatus { pending, accepted, rejected };
std::string_view to_string(ItemStatus s);

struct ReviewItem {
    std::string item_id;
    std::string composite_path;
    std::string real_path;
    std::string mask_path;
    ItemStatus status = ItemStatus::pending;
    std::optional<synth::RejectReason> reason;

    bool operator==(const ReviewItem&) const = default;
};

/// One method pair on one source composite. Served many times, to distinct
/// sessions, until it has collected `target` results.
struct ComparisonTask {
    std::string task_id;
    std::string composite_id;
    std::string method_a;
    std::string method_b;
    std::string image_a;
    std::string image_b;
    int target = 0;
    int served = 0;
    int results = 0;

    bool operator==(const ComparisonTask&) const = default;
};

/// Which of the two served images the rater picked: `a` is the left image.
enum class Side { a, b };
std::string_view to_string(Side s);
Side side_from_string(std::string_view s);

/// One serving of a task to a session. `swapped` means method_b is shown on
/// the left.
struct Duel {
    std::string duel_id;
    std::string task_id;
    std::string session;
    bool swapped = false;
    std::optional<Side> winner;

    bool operator==(const Duel&) const = default;
};

struct SessionState {
    std::set<std::string> seen_tasks;
    std::optional<std::string> open_duel;
    int completed = 0;

    bool operator==(const SessionState&) const = default;
};

/// Service state as a pure function of the event sequence. `apply` validates
/// each event against the current state and throws on inconsistency, so the
/// live path and replay share one set of rules.
class ReviewState {
public:
    void apply(const nlohmann::json& event);

    std::uint64_t last_seq() const { return last_seq_; }

    const std::map<std::string, ReviewItem>& items() const { return items_; }
    const std::vector<std::string>& item_order() const { return item_order_; }
    const std::map<std::string, ComparisonTask>& tasks() const { return tasks_; }
    const std::vector<std::string>& task_order() const { return task_order_; }
    const std::vector<Duel>& duels() const { return duels_; }
    const std::map<std::string, SessionState>& sessions() const { return sessions_; }
    const btrank::ComparisonMatrix& matrix() const { return matrix_; }

    const ReviewItem* find_item(const std::string& id) const;
    const Duel* find_duel(const std::string& id) const;
    std::size_t pending_count() const;
    std::size_t result_count() const;

    /// Canonical dump of every field; equal states give equal strings.
    nlohmann::json to_json() const;

    bool operator==(const ReviewState&) const = default;

private:
    std::uint64_t last_seq_ = 0;
    std::map<std::string, ReviewItem> items_;
    std::vector<std::string> item_order_;
    std::map<std::string, ComparisonTask> tasks_;
    std::vector<std::string> task_order_;
    std::vector<Duel> duels_;
    std::map<std::string, SessionState> sessions_;
    btrank::ComparisonMatrix matrix_;
};

}  // namespace harmony::review
