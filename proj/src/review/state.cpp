#include "harmony/review/state.hpp"

#include "harmony/error.hpp"

namespace harmony::review {

using nlohmann::json;

std::string_view to_string(ItemStatus s) {
    switch (s) {
        case ItemStatus::pending: return "pending";
        case ItemStatus::accepted: return "accepted";
        case ItemStatus::rejected: return "rejected";
    }
    return "?";
}

std::string_view to_string(Side s) { return s == Side::a ? "a" : "b"; }

Side side_from_string(std::string_view s) {
    if (s == "a") return Side::a;
    if (s == "b") return Side::b;
    throw Error(Errc::invalid_argument, "winner must be \"a\" or \"b\"");
}

namespace {

std::string str(const json& e, const char* key) {
    auto it = e.find(key);
    if (it == e.end() || !it->is_string()) throw Error(Errc::parse, std::string("event field '") + key + "' missing");
    return it->get<std::string>();
}

}  // namespace

const ReviewItem* ReviewState::find_item(const std::string& id) const {
    auto it = items_.find(id);
    return it == items_.end() ? nullptr : &it->second;
}

const Duel* ReviewState::find_duel(const std::string& id) const {
    // Duel ids are "d<n>" with n the 1-based serving index.
    if (id.size() < 2 || id[0] != 'd') return nullptr;
    std::size_t n = 0;
    for (std::size_t i = 1; i < id.size(); ++i) {
        if (id[i] < '0' || id[i] > '9' || n > duels_.size()) return nullptr;
        n = n * 10 + std::size_t(id[i] - '0');
    }
    if (n == 0 || n > duels_.size() || duels_[n - 1].duel_id != id) return nullptr;
    return &duels_[n - 1];
}

std::size_t ReviewState::pending_count() const {
    std::size_t n = 0;
    for (const auto& [id, item] : items_) n += item.status == ItemStatus::pending;
    return n;
}

std::size_t ReviewState::result_count() const {
    std::size_t n = 0;
    for (const auto& d : duels_) n += d.winner.has_value();
    return n;
}

void ReviewState::apply(const json& e) {
    const auto seq = e.at("seq").get<std::uint64_t>();
    if (seq != last_seq_ + 1) {
        throw Error(Errc::parse, "event sequence gap: expected " + std::to_string(last_seq_ + 1) + ", got " +
                                     std::to_string(seq));
    }
    const std::string type = str(e, "type");

    if (type == "item_enqueued") {
        ReviewItem item{str(e, "item_id"), str(e, "composite_path"), str(e, "real_path"), str(e, "mask_path"),
                        ItemStatus::pending, std::nullopt};
        if (items_.count(item.item_id)) throw Error(Errc::conflict, "item already enqueued: " + item.item_id);
        item_order_.push_back(item.item_id);
        items_.emplace(item.item_id, std::move(item));
    } else if (type == "verdict") {
        auto it = items_.find(str(e, "item_id"));
        if (it == items_.end()) throw Error(Errc::not_found, "unknown item " + str(e, "item_id"));
        if (it->second.status != ItemStatus::pending) throw Error(Errc::conflict, "item already decided: " + it->first);
        const std::string v = str(e, "verdict");
        if (v == "accept") {
            it->second.status = ItemStatus::accepted;
        } else if (v == "reject") {
            const auto reason = synth::reject_reason_from_string(str(e, "reason"));
            it->second.status = ItemStatus::rejected;
            it->second.reason = reason;
        } else {
            throw Error(Errc::invalid_argument, "verdict must be accept or reject");
        }
    } else if (type == "session_minted") {
        const std::string s = str(e, "session");
        if (!sessions_.emplace(s, SessionState{}).second) throw Error(Errc::conflict, "session minted twice");
    } else if (type == "task_created") {
        ComparisonTask t{str(e, "task_id"), str(e, "composite_id"), str(e, "method_a"), str(e, "method_b"),
                         str(e, "image_a"),  str(e, "image_b"),      e.at("target").get<int>()};
        if (t.method_a == t.method_b) throw Error(Errc::invalid_argument, "task compares a method with itself");
        if (t.target < 1) throw Error(Errc::invalid_argument, "task target must be >= 1");
        if (tasks_.count(t.task_id)) throw Error(Errc::conflict, "task already exists: " + t.task_id);
        matrix_.ensure(t.method_a);
        matrix_.ensure(t.method_b);
        task_order_.push_back(t.task_id);
        tasks_.emplace(t.task_id, std::move(t));
    } else if (type == "duel_served") {
        Duel d{str(e, "duel_id"), str(e, "task_id"), str(e, "session"), e.at("swapped").get<bool>(), std::nullopt};
        if (d.duel_id != "d" + std::to_string(duels_.size() + 1)) throw Error(Errc::parse, "duel ids out of order");
        auto task = tasks_.find(d.task_id);
        auto sess = sessions_.find(d.session);
        if (task == tasks_.end()) throw Error(Errc::not_found, "unknown task " + d.task_id);
        if (sess == sessions_.end()) throw Error(Errc::not_found, "unknown session");
        if (sess->second.open_duel) throw Error(Errc::conflict, "session already has an open duel");
        if (!sess->second.seen_tasks.insert(d.task_id).second) throw Error(Errc::conflict, "task served twice to a session");
        sess->second.open_duel = d.duel_id;
        task->second.served += 1;
        duels_.push_back(std::move(d));
    } else if (type == "comparison") {
        const Duel* found = find_duel(str(e, "duel_id"));
        if (!found) throw Error(Errc::not_found, "unknown duel " + str(e, "duel_id"));
        Duel& d = duels_[static_cast<std::size_t>(found - duels_.data())];
        if (d.session != str(e, "session")) throw Error(Errc::not_found, "duel " + d.duel_id + " is not open for this session");
        if (d.winner) throw Error(Errc::conflict, "duel already answered: " + d.duel_id);
        const Side side = side_from_string(str(e, "winner"));
        auto& task = tasks_.at(d.task_id);
        const bool a_wins = (side == Side::a) != d.swapped;
        const auto& winner = a_wins ? task.method_a : task.method_b;
        const auto& loser = a_wins ? task.method_b : task.method_a;
        d.winner = side;
        matrix_.add(winner, loser);
        task.results += 1;
        auto& sess = sessions_.at(d.session);
        sess.open_duel.reset();
        sess.completed += 1;
    } else {
        throw Error(Errc::parse, "unknown event type " + type);
    }
    last_seq_ = seq;
}

json ReviewState::to_json() const {
    json j;
    j["last_seq"] = last_seq_;
    auto& items = j["items"] = json::array();
    for (const auto& id : item_order_) {
        const auto& it = items_.at(id);
        items.push_back({{"item_id", it.item_id},
                         {"composite_path", it.composite_path},
                         {"real_path", it.real_path},
                         {"mask_path", it.mask_path},
                         {"status", to_string(it.status)},
                         {"reason", it.reason ? json(synth::to_string(*it.reason)) : json(nullptr)}});
    }
    auto& tasks = j["tasks"] = json::array();
    for (const auto& id : task_order_) {
        const auto& t = tasks_.at(id);
        tasks.push_back({{"task_id", t.task_id},
                         {"composite_id", t.composite_id},
                         {"method_a", t.method_a},
                         {"method_b", t.method_b},
                         {"image_a", t.image_a},
                         {"image_b", t.image_b},
                         {"target", t.target},
                         {"served", t.served},
                         {"results", t.results}});
    }
    auto& duels = j["duels"] = json::array();
    for (const auto& d : duels_) {
        duels.push_back({{"duel_id", d.duel_id},
                         {"task_id", d.task_id},
                         {"session", d.session},
                         {"swapped", d.swapped},
                         {"winner", d.winner ? json(to_string(*d.winner)) : json(nullptr)}});
    }
    auto& sessions = j["sessions"] = json::object();
    for (const auto& [s, st] : sessions_) {
        sessions[s] = {{"seen_tasks", st.seen_tasks},
                       {"open_duel", st.open_duel ? json(*st.open_duel) : json(nullptr)},
                       {"completed", st.completed}};
    }
    j["methods"] = matrix_.methods;
    auto& wins = j["wins"] = json::array();
    for (Eigen::Index r = 0; r < matrix_.wins.rows(); ++r) {
        auto& row = wins.emplace_back(json::array());
        for (Eigen::Index c = 0; c < matrix_.wins.cols(); ++c) row.push_back(static_cast<long long>(matrix_.wins(r, c)));
    }
    return j;
}

}  // namespace harmony::review
