#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "harmony/error.hpp"
#include "harmony/review/service.hpp"

namespace harmony::review {

/// HTTP status for an error category.
int http_status(Errc code);

/// JSON API over a ReviewService, plus static files from `ui_dir` when set.
/// Routes are listed in docs/api.md.
class ReviewServer {
public:
    explicit ReviewServer(ReviewService& service, std::filesystem::path ui_dir = {});
    ~ReviewServer();
    ReviewServer(const ReviewServer&) = delete;
    ReviewServer& operator=(const ReviewServer&) = delete;

    /// Binds to `port`, or to a free port when 0. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Blocks serving requests until stop().
    void listen();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace harmony::review
