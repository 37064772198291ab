#include "harmony/review/event_log.hpp"

#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "harmony/error.hpp"

namespace harmony::review {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read event log " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<nlohmann::json> parse_lines(const std::string& text, std::size_t complete, const fs::path& path) {
    std::vector<nlohmann::json> events;
    std::size_t start = 0;
    int lineno = 0;
    while (start < complete) {
        const std::size_t end = text.find('\n', start);
        ++lineno;
        const std::string line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        try {
            events.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return events;
}

}  // namespace

std::vector<nlohmann::json> EventLog::read(const fs::path& path) {
    if (!fs::exists(path)) return {};
    const std::string text = slurp(path);
    const std::size_t last_nl = text.rfind('\n');
    const std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
    return parse_lines(text, complete, path);
}

EventLog::EventLog(fs::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    if (fs::exists(path_)) {
        const std::string text = slurp(path_);
        const std::size_t last_nl = text.rfind('\n');
        const std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
        recovered_ = parse_lines(text, complete, path_);
        if (complete < text.size()) {
            dropped_ = text.size() - complete;
            fs::resize_file(path_, complete);
        }
    }
    file_ = std::fopen(path_.c_str(), "ab");
    if (!file_) throw Error(Errc::io, "cannot open event log " + path_.string() + ": " + std::strerror(errno));
}

EventLog::~EventLog() {
    if (file_) std::fclose(file_);
}

void EventLog::append(const nlohmann::json& event) {
    const std::string line = event.dump() + "\n";
    const long before = std::ftell(file_);
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0 ||
        ::fsync(::fileno(file_)) != 0) {
        const std::string reason = std::strerror(errno);
        std::clearerr(file_);
        if (before >= 0 && ::ftruncate(::fileno(file_), before) == 0) std::fseek(file_, before, SEEK_SET);
        throw Error(Errc::io, "event log append failed: " + reason);
    }
}

}  // namespace harmony::review
