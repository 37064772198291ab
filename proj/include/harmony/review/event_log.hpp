#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <vector>

namespace harmony::review {

/// Append-only JSON-lines file. Every append is flushed and fsync'd before it
/// returns. Opening an existing log drops a torn final line (no trailing
/// newline) left by a crash mid-write.
class EventLog {
public:
    explicit EventLog(std::filesystem::path path);
    ~EventLog();
    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    /// Events present when the log was opened, in file order.
    const std::vector<nlohmann::json>& recovered() const { return recovered_; }
    /// Bytes dropped from a torn tail on open.
    std::uintmax_t dropped_bytes() const { return dropped_; }

    void append(const nlohmann::json& event);
    const std::filesystem::path& path() const { return path_; }

    /// Reads all complete lines; throws Errc::parse on a malformed complete line.
    static std::vector<nlohmann::json> read(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    std::FILE* file_ = nullptr;
    std::vector<nlohmann::json> recovered_;
    std::uintmax_t dropped_ = 0;
};

}  // namespace harmony::review
