#include "harmony/review/http.hpp"

#include <httplib.h>

#include <fstream>
#include <sstream>

#include "harmony/error.hpp"

namespace harmony::review {

using nlohmann::json;

int http_status(Errc code) {
    switch (code) {
        case Errc::invalid_argument:
        case Errc::parse:
        case Errc::dimension_mismatch:
        case Errc::unsupported: return 400;
        case Errc::not_found:
        case Errc::exhausted: return 404;
        case Errc::conflict: return 409;
        default: return 500;
    }
}

namespace {

constexpr const char* kSessionHeader = "X-Session";

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump() + "\n", "application/json");
}

void send_error(httplib::Response& res, Errc code, const std::string& message) {
    send_json(res, http_status(code), {{"error", to_string(code)}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
    try {
        json j = json::parse(req.body);
        if (!j.is_object()) throw Error(Errc::parse, "request body must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw Error(Errc::parse, std::string("malformed JSON body: ") + e.what());
    }
}

std::string session_of(const httplib::Request& req) {
    if (req.has_header(kSessionHeader)) return req.get_header_value(kSessionHeader);
    if (req.has_param("session")) return req.get_param_value("session");
    return {};
}

json item_json(const ReviewItem& item, std::size_t pending) {
    return {{"item_id", item.item_id},
            {"status", to_string(item.status)},
            {"images",
             {{"composite", "/img/composite/" + item.item_id},
              {"real", "/img/real/" + item.item_id},
              {"mask", "/img/mask/" + item.item_id}}},
            {"pending", pending}};
}

std::string content_type(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".png") return "image/png";
    if (ext == ".ppm") return "image/x-portable-pixmap";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    return "application/octet-stream";
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, e.code(), e.what());
        } catch (const std::exception& e) {
            send_error(res, Errc::io, e.what());
        }
    };
}

}  // namespace

struct ReviewServer::Impl {
    ReviewService& service;
    httplib::Server server;

    explicit Impl(ReviewService& s) : service(s) {}
};

ReviewServer::ReviewServer(ReviewService& service, std::filesystem::path ui_dir)
    : impl_(std::make_unique<Impl>(service)) {
    auto& svr = impl_->server;
    auto& svc = impl_->service;

    svr.Get("/api/review/next", guarded([&svc](const httplib::Request&, httplib::Response& res) {
        const auto item = svc.next_item();
        if (!item) throw Error(Errc::exhausted, "no pending items");
        send_json(res, 200, item_json(*item, svc.snapshot().pending_count()));
    }));

    svr.Post(R"(/api/review/([^/]+)/verdict)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        synth::HumanVerdict v;
        const std::string verdict = body.value("verdict", "");
        if (verdict == "accept") {
            v.accept = true;
        } else if (verdict == "reject") {
            v.accept = false;
            if (!body.contains("reason") || !body["reason"].is_string()) {
                throw Error(Errc::invalid_argument, "a rejection needs a reason");
            }
            v.reason = synth::reject_reason_from_string(body["reason"].get<std::string>());
        } else {
            throw Error(Errc::invalid_argument, "verdict must be \"accept\" or \"reject\"");
        }
        const auto item = svc.submit_verdict(req.matches[1], v);
        json out{{"item_id", item.item_id}, {"status", to_string(item.status)}};
        if (item.reason) out["reason"] = synth::to_string(*item.reason);
        send_json(res, 200, out);
    }));

    svr.Post("/api/session", guarded([&svc](const httplib::Request&, httplib::Response& res) {
        send_json(res, 201, {{"session", svc.mint_session()}});
    }));

    svr.Get("/api/compare/next", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        std::string session = session_of(req);
        if (session.empty()) session = svc.mint_session();
        const auto d = svc.next_comparison(session);
        send_json(res, 200,
                  {{"duel_id", d.duel_id},
                   {"session", d.session},
                   {"images", {{"a", "/img/duel/" + d.duel_id + "-a"}, {"b", "/img/duel/" + d.duel_id + "-b"}}},
                   {"completed", d.completed}});
    }));

    svr.Post(R"(/api/compare/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const std::string session = session_of(req).empty() ? body.value("session", "") : session_of(req);
        if (session.empty()) throw Error(Errc::invalid_argument, "missing session");
        if (!body.contains("winner") || !body["winner"].is_string()) {
            throw Error(Errc::invalid_argument, "winner must be \"a\" or \"b\"");
        }
        const Side side = side_from_string(body["winner"].get<std::string>());
        const std::string duel_id = req.matches[1];
        svc.submit_comparison(session, duel_id, side);
        send_json(res, 200, {{"duel_id", duel_id}, {"recorded", true}});
    }));

    svr.Get("/api/export/comparisons", guarded([&svc](const httplib::Request&, httplib::Response& res) {
        res.status = 200;
        res.set_content(svc.export_comparisons(), "text/csv");
    }));

    svr.Get("/api/status", guarded([&svc](const httplib::Request&, httplib::Response& res) {
        const auto st = svc.snapshot();
        send_json(res, 200,
                  {{"items", st.items().size()},
                   {"pending", st.pending_count()},
                   {"tasks", st.tasks().size()},
                   {"results", st.result_count()},
                   {"events", st.last_seq()}});
    }));

    svr.Get(R"(/img/(composite|real|mask|duel)/([^/]+))",
            guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const auto path = svc.image_path(req.matches[1], req.matches[2]);
                std::ifstream in(path, std::ios::binary);
                if (!in) throw Error(Errc::not_found, "image file missing");
                std::ostringstream ss;
                ss << in.rdbuf();
                res.status = 200;
                res.set_content(ss.str(), content_type(path));
            }));

    if (!ui_dir.empty()) {
        if (!svr.set_mount_point("/", ui_dir.string())) {
            throw Error(Errc::io, "cannot serve UI directory " + ui_dir.string());
        }
    }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
    auto& svr = impl_->server;
    if (port == 0) {
        const int p = svr.bind_to_any_port(host);
        if (p < 0) throw Error(Errc::io, "cannot bind " + host);
        return p;
    }
    if (!svr.bind_to_port(host, port)) throw Error(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void ReviewServer::listen() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void ReviewServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace harmony::review
