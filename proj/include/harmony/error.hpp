#pragma once

#include <stdexcept>
#include <string>

namespace harmony {

enum class Errc {
    invalid_argument,
    dimension_mismatch,
    empty_mask,
    unsupported,
    non_finite,
    io,
    parse,
    not_found,
    conflict,
    exhausted,
    disconnected,
};

constexpr const char* to_string(Errc code) {
    switch (code) {
        case Errc::invalid_argument: return "invalid_argument";
        case Errc::dimension_mismatch: return "dimension_mismatch";
        case Errc::empty_mask: return "empty_mask";
        case Errc::unsupported: return "unsupported";
        case Errc::non_finite: return "non_finite";
        case Errc::io: return "io";
        case Errc::parse: return "parse";
        case Errc::not_found: return "not_found";
        case Errc::conflict: return "conflict";
        case Errc::exhausted: return "exhausted";
        case Errc::disconnected: return "disconnected";
    }
    return "unknown";
}

/// Library-wide exception. The code is the machine-readable category used by
/// the CLI error line and the HTTP error tag.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace harmony
