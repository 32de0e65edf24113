#include "crowdtrend/http_service.hpp"

#include <httplib.h>

#include <thread>

namespace crowdtrend {

using json = nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                json extra = json::object()) {
    json err{{"code", code}, {"message", message}};
    for (auto& [k, v] : extra.items()) err[k] = v;
    send_json(res, status, json{{"error", std::move(err)}});
}

json question_json(const Question& q) {
    json answers = json::array();
    for (const auto& a : q.answers) answers.push_back({{"id", a.id}, {"label", a.label}});
    return {{"id", q.id}, {"prompt", q.prompt}, {"answers", std::move(answers)}};
}

json class_object(const auto& values) {
    json out = json::object();
    for (auto c : kAllTrendClasses) out[std::string(to_string(c))] = values[index_of(c)];
    return out;
}

json trend_point_json(const TrendPoint& p) {
    return {{"bucket_start", format_timestamp(p.bucket_start)},
            {"counts", class_object(p.counts)},
            {"ma_1d", class_object(p.ma_short)},
            {"ma_7d", class_object(p.ma_long)},
            {"r", p.r},
            {"index", p.index},
            {"consensus", class_object(p.consensus)}};
}

json queue_json(const QueueSnapshot& s) {
    json items = json::array();
    for (const auto& i : s.items) {
        items.push_back({{"doc_id", i.doc_id},
                         {"priority", i.priority},
                         {"uncertainty", i.uncertainty},
                         {"labels_received", i.labels_received},
                         {"in_flight", i.in_flight}});
    }
    return {{"size", s.size},
            {"capacity", s.capacity},
            {"min_priority", s.min_priority ? json(*s.min_priority) : json(nullptr)},
            {"max_priority", s.max_priority ? json(*s.max_priority) : json(nullptr)},
            {"items", std::move(items)}};
}

int status_for(AnnotationError::Code code) {
    switch (code) {
        case AnnotationError::Code::OutOfOrder: return 409;
        case AnnotationError::Code::NoCompletedSessions: return 409;
        case AnnotationError::Code::LeaseExpired: return 410;
        case AnnotationError::Code::UnknownSession: return 410;
        case AnnotationError::Code::UnknownAnswer: return 422;
    }
    return 400;
}

// Maps exceptions thrown by a handler onto error responses.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const NotFound& e) {
        send_error(res, 404, "not_found", e.what());
    } catch (const ProjectConfigError& e) {
        json details = json::array();
        std::optional<std::size_t> first_offset;
        for (const auto& item : e.items()) {
            json d{{"field", item.field}, {"message", item.message}};
            if (item.offset) {
                d["offset"] = *item.offset;
                if (!first_offset) first_offset = item.offset;
            }
            details.push_back(std::move(d));
        }
        json extra{{"details", std::move(details)}};
        if (first_offset) extra["offset"] = *first_offset;
        send_error(res, 422, "invalid_config", e.what(), std::move(extra));
    } catch (const AnnotationError& e) {
        send_error(res, status_for(e.code()), to_string(e.code()), e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, "malformed_json", e.what());
    } catch (const std::invalid_argument& e) {
        send_error(res, 422, "invalid_argument", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

}  // namespace

std::pair<std::string, int> parse_listen_address(const std::string& text) {
    std::string host = "127.0.0.1";
    int port = 8080;
    if (text.empty()) return {host, port};
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) {
        host = text;
    } else {
        if (colon > 0) host = text.substr(0, colon);
        const auto p = text.substr(colon + 1);
        if (!p.empty()) {
            std::size_t used = 0;
            port = std::stoi(p, &used);
            if (used != p.size() || port < 0 || port > 65535) throw std::invalid_argument("bad port in '" + text + "'");
        }
    }
    return {host, port};
}

struct HttpService::Impl {
    explicit Impl(Platform& p) : platform(p) { routes(); }

    void routes() {
        server.Post("/v1/projects", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto body = json::parse(req.body);
                auto result = platform.create_project(body);
                send_json(res, result.created ? 201 : 200, describe_project(*result.project));
            });
        });
        server.Get("/v1/projects", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                json out = json::array();
                for (const auto& id : platform.project_ids()) {
                    auto p = platform.project(id);
                    out.push_back({{"id", p->id}, {"title", p->title}, {"sequence_version", p->sequence_version}});
                }
                send_json(res, 200, out);
            });
        });
        server.Get(R"(/v1/projects/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, describe_project(*platform.project(req.matches[1]))); });
        });
        server.Get(R"(/v1/projects/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string id = req.matches[1];
                const auto user = req.get_param_value("user");
                if (user.empty()) throw std::invalid_argument("query parameter 'user' is required");
                auto session = platform.next(id, user);
                if (!session) {
                    res.status = 204;
                    return;
                }
                send_json(res, 200,
                          {{"doc_id", session->doc_id},
                           {"text", platform.document_text(id, session->doc_id).value_or("")},
                           {"session_id", session->session_id},
                           {"question", question_json(*session->question)}});
            });
        });
        server.Post(R"(/v1/projects/([^/]+)/answers)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string id = req.matches[1];
                auto body = json::parse(req.body);
                for (const char* k : {"user", "doc", "question", "answer"}) {
                    if (!body.contains(k) || !body[k].is_string())
                        throw std::invalid_argument(std::string("body field '") + k + "' must be a string");
                }
                auto out = platform.answer(id, body["user"], body["doc"], body["question"], body["answer"]);
                json reply{{"row", to_json(out.row)}, {"completed", out.completed}};
                reply["next_question"] = out.next_question ? question_json(*out.next_question) : json(nullptr);
                if (out.consensus) reply["consensus"] = to_json(*out.consensus);
                send_json(res, 200, reply);
            });
        });
        server.Get(R"(/v1/projects/([^/]+)/trends)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string id = req.matches[1];
                std::vector<TrendPoint> points;
                if (!req.has_param("from") && !req.has_param("to")) {
                    points = platform.trends_all(id);
                } else {
                    auto from = parse_timestamp(req.get_param_value("from"));
                    auto to = parse_timestamp(req.get_param_value("to"));
                    if (!from || !to) throw std::invalid_argument("'from' and 'to' must be RFC 3339 timestamps");
                    points = platform.trends(id, *from, *to);
                }
                json out = json::array();
                for (const auto& p : points) out.push_back(trend_point_json(p));
                send_json(res, 200, out);
            });
        });
        server.Get(R"(/v1/projects/([^/]+)/queue)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, queue_json(platform.queue_snapshot(req.matches[1]))); });
        });
        server.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, platform.metrics()); });
        });
        server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}});
        });
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.status == 404 && res.body.empty()) send_error(res, 404, "not_found", "no such route");
        });
    }

    Platform& platform;
    httplib::Server server;
    std::thread thread;
    int port = -1;
};

HttpService::HttpService(Platform& platform) : impl_(std::make_unique<Impl>(platform)) {}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
    if (impl_->thread.joinable()) throw std::logic_error("service already running");
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
    impl_->port = bound;
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

bool HttpService::running() const { return impl_->server.is_running(); }

}  // namespace crowdtrend
