#include "harmony/review/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <random>

#include "harmony/error.hpp"
#include "harmony/rng.hpp"

namespace harmony::review {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::int64_t wall_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string random_token() {
    std::random_device rd;
    char buf[33];
    std::snprintf(buf, sizeof buf, "%08x%08x%08x%08x", rd(), rd(), rd(), rd());
    return buf;
}

std::string task_key(const std::string& composite_id, const std::string& a, const std::string& b) {
    return composite_id + ":" + a + ":" + b;
}

}  // namespace

ReviewService::ReviewService(ServiceOptions options) : options_(std::move(options)), log_(options_.log_path) {
    if (!options_.clock) options_.clock = wall_clock_ms;
    if (!options_.token_source) options_.token_source = random_token;
    if (options_.seed == 0) {
        std::random_device rd;
        options_.seed = (std::uint64_t(rd()) << 32) | rd();
    }
    for (const auto& e : log_.recovered()) state_.apply(e);
}

void ReviewService::commit(json event) {
    event["seq"] = state_.last_seq() + 1;
    event["ts"] = options_.clock();
    log_.append(event);
    state_.apply(event);
}

EnqueueResult ReviewService::enqueue_from_manifest(const synth::Manifest& manifest, const fs::path& root) {
    std::unique_lock lock(mutex_);
    EnqueueResult r;
    for (const auto& rec : manifest.records) {
        if (!rec.passes_filters() || state_.find_item(rec.id)) continue;
        commit({{"type", "item_enqueued"},
                {"item_id", rec.id},
                {"composite_path", (root / rec.composite_path).lexically_normal().string()},
                {"real_path", (root / rec.real_path).lexically_normal().string()},
                {"mask_path", (root / rec.mask_path).lexically_normal().string()}});
        ++r.added;
    }
    r.pending = state_.pending_count();
    return r;
}

EnqueueResult ReviewService::enqueue_from_manifest(const fs::path& manifest_path) {
    const auto manifest = synth::read_manifest(manifest_path);
    return enqueue_from_manifest(manifest, manifest_path.parent_path());
}

std::optional<ReviewItem> ReviewService::next_item() const {
    std::shared_lock lock(mutex_);
    for (const auto& id : state_.item_order()) {
        const auto& item = state_.items().at(id);
        if (item.status == ItemStatus::pending) return item;
    }
    return std::nullopt;
}

ReviewItem ReviewService::submit_verdict(const std::string& item_id, const synth::HumanVerdict& verdict) {
    std::unique_lock lock(mutex_);
    const ReviewItem* item = state_.find_item(item_id);
    if (!item) throw Error(Errc::not_found, "unknown item " + item_id);
    if (item->status != ItemStatus::pending) {
        throw Error(Errc::conflict, "item " + item_id + " is already " + std::string(to_string(item->status)));
    }
    json e{{"type", "verdict"}, {"item_id", item_id}, {"verdict", verdict.accept ? "accept" : "reject"}};
    if (!verdict.accept) {
        if (!verdict.reason) throw Error(Errc::invalid_argument, "a rejection needs a reason");
        e["reason"] = synth::to_string(*verdict.reason);
    }
    commit(std::move(e));
    return *state_.find_item(item_id);
}

std::string ReviewService::mint_session() {
    std::unique_lock lock(mutex_);
    std::string token;
    do {
        token = options_.token_source();
    } while (state_.sessions().count(token));
    commit({{"type", "session_minted"}, {"session", token}});
    return token;
}

bool ReviewService::add_task(const std::string& composite_id, const std::string& method_a, const std::string& image_a,
                             const std::string& method_b, const std::string& image_b, int results_per_pair) {
    if (method_a == method_b) throw Error(Errc::invalid_argument, "a task needs two different methods");
    if (results_per_pair < 1) throw Error(Errc::invalid_argument, "results per pair must be >= 1");
    std::unique_lock lock(mutex_);
    const auto id = task_key(composite_id, method_a, method_b);
    if (state_.tasks().count(id)) return false;
    commit({{"type", "task_created"},
            {"task_id", id},
            {"composite_id", composite_id},
            {"method_a", method_a},
            {"method_b", method_b},
            {"image_a", image_a},
            {"image_b", image_b},
            {"target", results_per_pair}});
    return true;
}

std::size_t ReviewService::create_study(const fs::path& methods_root, int results_per_pair) {
    if (!fs::is_directory(methods_root)) throw Error(Errc::io, "not a directory: " + methods_root.string());
    std::vector<std::string> methods;
    for (const auto& entry : fs::directory_iterator(methods_root)) {
        if (entry.is_directory()) methods.push_back(entry.path().filename().string());
    }
    std::sort(methods.begin(), methods.end());
    std::map<std::string, std::vector<std::string>> by_composite;
    for (const auto& m : methods) {
        std::vector<std::string> ids;
        for (const auto& entry : fs::directory_iterator(methods_root / m)) {
            if (entry.is_regular_file() && entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
        }
        for (auto& id : ids) by_composite[id].push_back(m);
    }
    std::size_t added = 0;
    for (const auto& [cid, ms] : by_composite) {
        for (std::size_t i = 0; i < ms.size(); ++i) {
            for (std::size_t j = i + 1; j < ms.size(); ++j) {
                const auto ia = (methods_root / ms[i] / (cid + ".png")).lexically_normal().string();
                const auto ib = (methods_root / ms[j] / (cid + ".png")).lexically_normal().string();
                added += add_task(cid, ms[i], ia, ms[j], ib, results_per_pair);
            }
        }
    }
    return added;
}

ServedDuel ReviewService::next_comparison(const std::string& session) {
    std::unique_lock lock(mutex_);
    auto sess = state_.sessions().find(session);
    if (sess == state_.sessions().end()) throw Error(Errc::not_found, "unknown session");

    auto served_view = [&](const Duel& d) {
        const auto& t = state_.tasks().at(d.task_id);
        ServedDuel s{d.duel_id, d.session, d.swapped ? t.image_b : t.image_a, d.swapped ? t.image_a : t.image_b,
                     state_.sessions().at(d.session).completed};
        return s;
    };
    if (sess->second.open_duel) return served_view(*state_.find_duel(*sess->second.open_duel));

    const ComparisonTask* best = nullptr;
    for (const auto& id : state_.task_order()) {
        const auto& t = state_.tasks().at(id);
        if (t.served >= t.target || sess->second.seen_tasks.count(id)) continue;
        if (!best || t.served < best->served) best = &t;
    }
    if (!best) throw Error(Errc::exhausted, "no comparisons left for this session");

    const std::size_t n = state_.duels().size() + 1;
    const bool swapped = (splitmix64(options_.seed ^ splitmix64(n)) >> 63) != 0;
    commit({{"type", "duel_served"},
            {"duel_id", "d" + std::to_string(n)},
            {"task_id", best->task_id},
            {"session", session},
            {"swapped", swapped}});
    return served_view(state_.duels().back());
}

void ReviewService::submit_comparison(const std::string& session, const std::string& duel_id, Side winner) {
    std::unique_lock lock(mutex_);
    const Duel* d = state_.find_duel(duel_id);
    if (!d || d->session != session) throw Error(Errc::not_found, "unknown or expired duel " + duel_id);
    if (d->winner) throw Error(Errc::conflict, "duel " + duel_id + " already answered");
    commit({{"type", "comparison"}, {"duel_id", duel_id}, {"session", session}, {"winner", to_string(winner)}});
}

std::string ReviewService::export_comparisons() const {
    std::shared_lock lock(mutex_);
    if (state_.result_count() == 0) throw Error(Errc::not_found, "no comparison results recorded");
    return btrank::comparisons_csv(state_.matrix());
}

synth::Manifest ReviewService::annotate(const synth::Manifest& manifest) const {
    std::shared_lock lock(mutex_);
    return review::annotate(state_, manifest);
}

fs::path ReviewService::image_path(const std::string& kind, const std::string& id) const {
    std::shared_lock lock(mutex_);
    if (kind == "duel") {
        const auto dash = id.rfind('-');
        if (dash == std::string::npos) throw Error(Errc::not_found, "unknown duel image " + id);
        const Duel* d = state_.find_duel(id.substr(0, dash));
        const std::string slot = id.substr(dash + 1);
        if (!d || (slot != "a" && slot != "b")) throw Error(Errc::not_found, "unknown duel image " + id);
        const auto& t = state_.tasks().at(d->task_id);
        const bool left = slot == "a";
        return left != d->swapped ? t.image_a : t.image_b;
    }
    const ReviewItem* item = state_.find_item(id);
    if (!item) throw Error(Errc::not_found, "unknown item " + id);
    if (kind == "composite") return item->composite_path;
    if (kind == "real") return item->real_path;
    if (kind == "mask") return item->mask_path;
    throw Error(Errc::not_found, "unknown image kind " + kind);
}

ReviewState ReviewService::snapshot() const {
    std::shared_lock lock(mutex_);
    return state_;
}

ReviewState replay(const fs::path& log_path) {
    if (!fs::exists(log_path)) throw Error(Errc::io, "no event log at " + log_path.string());
    ReviewState state;
    for (const auto& e : EventLog::read(log_path)) state.apply(e);
    return state;
}

synth::Manifest annotate(const ReviewState& state, const synth::Manifest& manifest) {
    synth::Manifest out = manifest;
    for (auto& rec : out.records) {
        const ReviewItem* item = state.find_item(rec.id);
        if (!item || item->status == ItemStatus::pending) continue;
        rec.human_verdict = synth::HumanVerdict{item->status == ItemStatus::accepted, item->reason};
    }
    return out;
}

synth::Manifest without_rejected(const synth::Manifest& manifest) {
    synth::Manifest out;
    for (const auto& rec : manifest.records) {
        if (rec.human_verdict && !rec.human_verdict->accept) continue;
        out.records.push_back(rec);
    }
    return out;
}

}  // namespace harmony::review
