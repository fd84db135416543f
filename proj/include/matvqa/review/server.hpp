#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "httplib.h"
#include "matvqa/common/error.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/review/queue.hpp"

namespace matvqa::review {

struct FigureBytes {
    std::string bytes;
    std::string media_type;
};

/// Returns the image for a content hash, or nullopt.
using FigureSource = std::function<std::optional<FigureBytes>(const std::string &sha256)>;

inline int http_status(ErrorCode code) {
    switch(code) {
        case ErrorCode::not_found: return 404;
        case ErrorCode::conflict: return 409;
        case ErrorCode::forbidden: return 403;
        case ErrorCode::validation: return 422;
        case ErrorCode::usage:
        case ErrorCode::parse:
        case ErrorCode::precondition: return 400;
        default: return 500;
    }
}

/// Task payload for clients: the item snapshot plus a figure URL.
inline json task_payload(const ReviewTask &t) {
    json j = t;
    j["figure_url"] = "/api/figures/" + t.item.image_hash;
    return j;
}

/// HTTP front end for a ReviewQueue:
///   GET  /api/tasks/next?reviewer=ID   (or X-Reviewer-Id header)
///   GET  /api/tasks/{id}
///   GET  /api/figures/{sha256}
///   POST /api/tasks/{id}/review        ReviewScore body; ?supersede=true to replace
///   GET  /api/report
/// Errors are {"error": {"code": ..., "message": ...}}.
class ReviewServer {
public:
    ReviewServer(std::shared_ptr<ReviewQueue> queue, FigureSource figures)
        : m_queue(std::move(queue)), m_figures(std::move(figures)) {
        routes();
    }

    httplib::Server &http() { return m_server; }

    int bind_any_port(const std::string &host = "127.0.0.1") { return m_server.bind_to_any_port(host); }
    bool bind(const std::string &host, int port) { return m_server.bind_to_port(host, port); }
    bool listen_after_bind() { return m_server.listen_after_bind(); }
    void stop() { m_server.stop(); }
    void wait_until_ready() const { m_server.wait_until_ready(); }

private:
    static void send_json(httplib::Response &res, int status, const json &body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void send_error(httplib::Response &res, ErrorCode code, const std::string &message) {
        send_json(res, http_status(code), {{"error", {{"code", std::string(to_string(code))}, {"message", message}}}});
    }

    template <typename Fn>
    static httplib::Server::Handler guarded(Fn fn) {
        return [fn](const httplib::Request &req, httplib::Response &res) {
            try {
                fn(req, res);
            } catch(const Error &e) {
                send_error(res, e.code(), e.what());
            } catch(const json::exception &e) {
                send_error(res, ErrorCode::parse, e.what());
            }
        };
    }

    static std::string reviewer_of(const httplib::Request &req) {
        if(req.has_param("reviewer")) return req.get_param_value("reviewer");
        return req.get_header_value("X-Reviewer-Id");
    }

    void routes() {
        m_server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                      {"Access-Control-Allow-Headers", "Content-Type, X-Reviewer-Id"},
                                      {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
        m_server.Options(R"(/api/.*)", [](const httplib::Request &, httplib::Response &res) { res.status = 204; });

        m_server.Get("/api/tasks/next", guarded([this](const httplib::Request &req, httplib::Response &res) {
            auto task = m_queue->next_task(reviewer_of(req));
            send_json(res, 200, {{"task", task ? task_payload(*task) : json(nullptr)}});
        }));

        m_server.Get(R"(/api/tasks/([^/]+))", guarded([this](const httplib::Request &req, httplib::Response &res) {
            send_json(res, 200, {{"task", task_payload(m_queue->get(req.matches[1]))}});
        }));

        m_server.Post(R"(/api/tasks/([^/]+)/review)",
                      guarded([this](const httplib::Request &req, httplib::Response &res) {
                          json body;
                          try {
                              body = json::parse(req.body);
                          } catch(const json::parse_error &e) {
                              throw Error(ErrorCode::parse, std::string("review body is not valid JSON: ") + e.what());
                          }
                          auto score = score_from_json(body);
                          if(score.reviewer.empty()) score.reviewer = reviewer_of(req);
                          bool supersede = req.has_param("supersede") && req.get_param_value("supersede") == "true";
                          auto task = m_queue->submit_review(req.matches[1], score, supersede);
                          send_json(res, 200, {{"task", task_payload(task)}});
                      }));

        m_server.Get(R"(/api/figures/([0-9a-f]{64}))",
                     guarded([this](const httplib::Request &req, httplib::Response &res) {
                         auto fig = m_figures ? m_figures(req.matches[1]) : std::nullopt;
                         if(!fig) throw Error(ErrorCode::not_found, "no figure " + std::string(req.matches[1]));
                         res.status = 200;
                         res.set_content(fig->bytes, fig->media_type);
                     }));

        m_server.Get("/api/report", guarded([this](const httplib::Request &, httplib::Response &res) {
            if(!m_queue->has_reviews()) {
                send_json(res, 409, {{"error", {{"code", "no_completed_reviews"},
                                                {"message", "the audit report needs at least one completed review"}}}});
                return;
            }
            send_json(res, 200, json(m_queue->audit_report()));
        }));
    }

    std::shared_ptr<ReviewQueue> m_queue;
    FigureSource m_figures;
    httplib::Server m_server;
};

} // namespace matvqa::review
