#include "harmony/synth/records.hpp"

#include <fstream>
#include <sstream>

#include "harmony/error.hpp"

namespace harmony::synth {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::occluded_foreground: return "occluded_foreground";
        case RejectReason::hue_change: return "hue_change";
        case RejectReason::object_change: return "object_change";
        case RejectReason::unrealistic: return "unrealistic";
    }
    return "?";
}

RejectReason reject_reason_from_string(std::string_view tag) {
    for (auto r : {RejectReason::occluded_foreground, RejectReason::hue_change, RejectReason::object_change,
                   RejectReason::unrealistic}) {
        if (to_string(r) == tag) return r;
    }
    throw Error(Errc::parse, "unknown reject reason: " + std::string(tag));
}

bool CompositeRecord::passes_filters() const {
    for (const auto& v : filter_verdicts) {
        if (!v.pass) return false;
    }
    return true;
}

json to_json(const CompositeRecord& r) {
    json verdicts = json::array();
    for (const auto& v : r.filter_verdicts) {
        verdicts.push_back({{"filter_name", v.filter_name}, {"pass", v.pass}, {"score", v.score}});
    }
    json human = nullptr;
    if (r.human_verdict) {
        human = {{"verdict", r.human_verdict->accept ? "accept" : "reject"}};
        if (r.human_verdict->reason) human["reason"] = std::string(to_string(*r.human_verdict->reason));
    }
    return {{"id", r.id},
            {"target_id", r.target_id},
            {"category_label", r.category_label},
            {"sub_dataset", r.sub_dataset},
            {"composite_path", r.composite_path},
            {"real_path", r.real_path},
            {"mask_path", r.mask_path},
            {"method", r.method},
            {"reference_id", r.reference_id},
            {"seed", r.seed},
            {"filter_verdicts", verdicts},
            {"human_verdict", human},
            {"split", r.split}};
}

CompositeRecord record_from_json(const json& j) {
    try {
        CompositeRecord r;
        r.id = j.at("id").get<std::string>();
        r.target_id = j.value("target_id", std::string{});
        r.category_label = j.value("category_label", std::string{});
        r.sub_dataset = j.value("sub_dataset", std::string{});
        r.composite_path = j.at("composite_path").get<std::string>();
        r.real_path = j.at("real_path").get<std::string>();
        r.mask_path = j.at("mask_path").get<std::string>();
        r.method = j.at("method").get<std::string>();
        r.reference_id = j.value("reference_id", std::string{});
        r.seed = j.value("seed", std::uint64_t{0});
        for (const auto& v : j.value("filter_verdicts", json::array())) {
            r.filter_verdicts.push_back(
                {v.at("filter_name").get<std::string>(), v.at("pass").get<bool>(), v.value("score", 0.0)});
        }
        if (j.contains("human_verdict") && !j.at("human_verdict").is_null()) {
            const auto& h = j.at("human_verdict");
            HumanVerdict hv;
            hv.accept = h.at("verdict").get<std::string>() == "accept";
            if (h.contains("reason")) hv.reason = reject_reason_from_string(h.at("reason").get<std::string>());
            r.human_verdict = hv;
        }
        r.split = j.value("split", std::string{});
        return r;
    } catch (const json::exception& e) {
        throw Error(Errc::parse, std::string("malformed composite record: ") + e.what());
    }
}

json to_json(const SourceRecord& s) {
    json j = {{"id", s.id},
              {"image_path", s.image_path.generic_string()},
              {"mask_path", s.mask_path.generic_string()},
              {"category_label", s.category_label}};
    if (!s.scene_id.empty()) j["scene_id"] = s.scene_id;
    return j;
}

SourceRecord source_from_json(const json& j, const fs::path& base) {
    try {
        SourceRecord s;
        s.id = j.at("id").get<std::string>();
        s.image_path = j.at("image_path").get<std::string>();
        s.mask_path = j.at("mask_path").get<std::string>();
        if (s.image_path.is_relative()) s.image_path = base / s.image_path;
        if (s.mask_path.is_relative()) s.mask_path = base / s.mask_path;
        s.category_label = j.at("category_label").get<std::string>();
        if (j.contains("scene_id") && !j.at("scene_id").is_null()) s.scene_id = j.at("scene_id").get<std::string>();
        return s;
    } catch (const json::exception& e) {
        throw Error(Errc::parse, std::string("malformed source record: ") + e.what());
    }
}

namespace {

template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot read " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(Errc::parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        fn(j);
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    out << text;
}

}  // namespace

std::string manifest_text(const Manifest& manifest) {
    std::string out;
    for (const auto& r : manifest.records) out += to_json(r).dump() + "\n";
    return out;
}

void write_manifest(const fs::path& path, const Manifest& manifest) { write_text(path, manifest_text(manifest)); }

Manifest read_manifest(const fs::path& path) {
    Manifest m;
    for_each_line(path, [&](const json& j) { m.records.push_back(record_from_json(j)); });
    return m;
}

std::vector<SourceRecord> read_sources(const fs::path& path) {
    std::vector<SourceRecord> out;
    const fs::path base = path.parent_path();
    for_each_line(path, [&](const json& j) { out.push_back(source_from_json(j, base)); });
    return out;
}

void write_sources(const fs::path& path, const std::vector<SourceRecord>& sources) {
    std::string text;
    for (const auto& s : sources) text += to_json(s).dump() + "\n";
    write_text(path, text);
}

}  // namespace harmony::synth
