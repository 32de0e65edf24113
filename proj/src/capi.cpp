#include "crowdtrend.h"

#include "crowdtrend/filterlang.hpp"
#include "crowdtrend/http_service.hpp"
#include "crowdtrend/platform.hpp"
#include "crowdtrend/scripted.hpp"
#include "crowdtrend/simulation.hpp"

#include <cstring>
#include <memory>
#include <string>

using namespace crowdtrend;
using json = nlohmann::json;

struct ct_query {
    FilterQuery query;
};

struct ct_platform {
    std::shared_ptr<ManualClock> manual;
    std::unique_ptr<Platform> platform;
    std::unique_ptr<HttpService> http;
};

namespace {

thread_local std::string last_error;
thread_local std::int64_t last_offset = -1;

ct_status fail(ct_status status, std::string message, std::int64_t offset = -1) {
    last_error = std::move(message);
    last_offset = offset;
    return status;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

ct_status put(char** out, const std::string& s) {
    if (out) *out = dup_string(s);
    return CT_OK;
}

template <typename Fn>
ct_status guard(Fn&& fn) {
    last_error.clear();
    last_offset = -1;
    try {
        return fn();
    } catch (const QueryParseError& e) {
        return fail(CT_ERR_PARSE, e.what(), static_cast<std::int64_t>(e.offset()));
    } catch (const ProjectConfigError& e) {
        std::int64_t offset = -1;
        std::string msg;
        for (const auto& item : e.items()) {
            if (!msg.empty()) msg += "; ";
            msg += item.field + ": " + item.message;
            if (item.offset && offset < 0) offset = static_cast<std::int64_t>(*item.offset);
        }
        return fail(CT_ERR_CONFIG, msg, offset);
    } catch (const NotFound& e) {
        return fail(CT_ERR_NOT_FOUND, e.what());
    } catch (const AnnotationError& e) {
        switch (e.code()) {
            case AnnotationError::Code::OutOfOrder:
            case AnnotationError::Code::NoCompletedSessions: return fail(CT_ERR_CONFLICT, e.what());
            case AnnotationError::Code::LeaseExpired:
            case AnnotationError::Code::UnknownSession: return fail(CT_ERR_GONE, e.what());
            case AnnotationError::Code::UnknownAnswer: return fail(CT_ERR_INVALID_ARGUMENT, e.what());
        }
        return fail(CT_ERR_INTERNAL, e.what());
    } catch (const json::exception& e) {
        return fail(CT_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(CT_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(CT_ERR_IO, e.what());
    } catch (const std::runtime_error& e) {
        return fail(CT_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(CT_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(CT_ERR_INTERNAL, "unknown error");
    }
}

#define CT_REQUIRE(cond, what) \
    if (!(cond)) return fail(CT_ERR_INVALID_ARGUMENT, what)

json question_json(const Question& q) {
    json answers = json::array();
    for (const auto& a : q.answers) answers.push_back({{"id", a.id}, {"label", a.label}});
    return {{"id", q.id}, {"prompt", q.prompt}, {"answers", std::move(answers)}};
}

}  // namespace

extern "C" {

const char* ct_version(void) { return "0.1.0"; }
const char* ct_last_error(void) { return last_error.c_str(); }
int64_t ct_last_error_offset(void) { return last_offset; }
void ct_string_free(char* s) { std::free(s); }

ct_status ct_query_parse(const char* source, ct_query** out) {
    return guard([&] {
        CT_REQUIRE(source && out, "source and out are required");
        *out = new ct_query{parse_query(source)};
        return CT_OK;
    });
}

ct_status ct_query_print(const ct_query* query, char** out) {
    return guard([&] {
        CT_REQUIRE(query && out, "query and out are required");
        return put(out, print_query(query->query));
    });
}

ct_status ct_query_matches(const ct_query* query, const char* text, int* out) {
    return guard([&] {
        CT_REQUIRE(query && text && out, "query, text and out are required");
        *out = matches(query->query, tokenize(text)) ? 1 : 0;
        return CT_OK;
    });
}

void ct_query_free(ct_query* query) { delete query; }

ct_status ct_platform_open(const ct_platform_options* options, ct_platform** out) {
    return guard([&] {
        CT_REQUIRE(options && out && options->data_dir, "options.data_dir and out are required");
        auto handle = std::make_unique<ct_platform>();
        PlatformOptions po;
        po.data_dir = options->data_dir;
        po.workers = options->workers ? options->workers : 1;
        po.sync = options->sync == CT_SYNC_NONE    ? SyncMode::None
                  : options->sync == CT_SYNC_FLUSH ? SyncMode::Flush
                                                   : SyncMode::Fsync;
        if (options->simulated_clock) {
            Timestamp start{};
            if (options->clock_start && *options->clock_start) {
                auto t = parse_timestamp(options->clock_start);
                CT_REQUIRE(t, "clock_start must be an RFC 3339 timestamp");
                start = *t;
            }
            handle->manual = std::make_shared<ManualClock>(start);
            po.clock = handle->manual;
        }
        handle->platform = std::make_unique<Platform>(std::move(po));
        *out = handle.release();
        return CT_OK;
    });
}

void ct_platform_close(ct_platform* platform) {
    if (!platform) return;
    guard([&] {
        if (platform->http) platform->http->stop();
        platform->platform->close();
        return CT_OK;
    });
    delete platform;
}

ct_status ct_platform_set_time(ct_platform* platform, const char* rfc3339) {
    return guard([&] {
        CT_REQUIRE(platform && rfc3339, "platform and time are required");
        CT_REQUIRE(platform->manual, "platform was not opened with a simulated clock");
        auto t = parse_timestamp(rfc3339);
        CT_REQUIRE(t, "time must be an RFC 3339 timestamp");
        platform->manual->set(*t);
        return CT_OK;
    });
}

ct_status ct_project_create(ct_platform* platform, const char* config_json, char** id_out) {
    return guard([&] {
        CT_REQUIRE(platform && config_json, "platform and config are required");
        auto result = platform->platform->create_project(json::parse(config_json));
        return put(id_out, result.project->id);
    });
}

ct_status ct_project_describe(ct_platform* platform, const char* project_id, char** json_out) {
    return guard([&] {
        CT_REQUIRE(platform && project_id && json_out, "platform, project and out are required");
        return put(json_out, describe_project(*platform->platform->project(project_id)).dump());
    });
}

ct_status ct_ingest_file(ct_platform* platform, const char* project_id, const char* path, double speedup,
                         char** stats_json) {
    return guard([&] {
        CT_REQUIRE(platform && project_id && path, "platform, project and path are required");
        StreamSourceConfig source;
        source.kind = StreamSourceConfig::Kind::FileReplay;
        source.path = path;
        source.speedup = speedup;
        auto stream = open_stream(source);
        auto stats = platform->platform->ingest(project_id, *stream);
        return put(stats_json,
                   json{{"accepted", stats.accepted}, {"rejected", stats.rejected}, {"duplicates", stats.duplicates}}.dump());
    });
}

ct_status ct_run_scripted(ct_platform* platform, const ct_scripted_options* options, char** report_json) {
    return guard([&] {
        CT_REQUIRE(platform && options && options->project_id && options->source_path,
                   "platform, project and source are required");
        ScriptedRunOptions so;
        so.project_id = options->project_id;
        so.source.kind = StreamSourceConfig::Kind::FileReplay;
        so.source.path = options->source_path;
        so.source.speedup = options->speedup;
        so.annotators.clear();
        const unsigned n = options->annotators ? options->annotators : 3;
        for (unsigned i = 1; i <= n; ++i) so.annotators.push_back("annotator-" + std::to_string(i));
        if (options->round_every) so.round_every = options->round_every;
        if (options->labels_per_round) so.labels_per_round = options->labels_per_round;
        so.max_retrains = options->max_retrains;
        so.simulated_clock = platform->manual != nullptr;
        auto report = run_scripted(*platform->platform, so);
        return put(report_json, report.to_json().dump());
    });
}

ct_status ct_next(ct_platform* platform, const char* project_id, const char* user, char** session_json) {
    return guard([&] {
        CT_REQUIRE(platform && project_id && user && session_json, "platform, project, user and out are required");
        auto session = platform->platform->next(project_id, user);
        if (!session) return fail(CT_ERR_EMPTY, "nothing to label");
        json j{{"doc_id", session->doc_id},
               {"text", platform->platform->document_text(project_id, session->doc_id).value_or("")},
               {"session_id", session->session_id},
               {"question", question_json(*session->question)}};
        return put(session_json, j.dump());
    });
}

ct_status ct_answer(ct_platform* platform, const char* project_id, const char* user, const char* doc_id,
                    const char* question_id, const char* answer_id, char** outcome_json) {
    return guard([&] {
        CT_REQUIRE(platform && project_id && user && doc_id && question_id && answer_id, "all ids are required");
        auto out = platform->platform->answer(project_id, user, doc_id, question_id, answer_id);
        json j{{"row", to_json(out.row)}, {"completed", out.completed}};
        j["next_question"] = out.next_question ? question_json(*out.next_question) : json(nullptr);
        if (out.consensus) j["consensus"] = to_json(*out.consensus);
        return put(outcome_json, j.dump());
    });
}

ct_status ct_trends_csv(ct_platform* platform, const char* project_id, int recompute, char** csv) {
    return guard([&] {
        CT_REQUIRE(platform && project_id && csv, "platform, project and out are required");
        return put(csv, trends_to_csv(platform->platform->trends_all(project_id, recompute != 0)));
    });
}

ct_status ct_tick(ct_platform* platform, int allow_retrain, unsigned* retrains) {
    return guard([&] {
        CT_REQUIRE(platform, "platform is required");
        const auto n = platform->platform->tick(allow_retrain != 0);
        if (retrains) *retrains = static_cast<unsigned>(n);
        return CT_OK;
    });
}

ct_status ct_retrain(ct_platform* platform, const char* project_id, uint64_t* version) {
    return guard([&] {
        CT_REQUIRE(platform && project_id, "platform and project are required");
        auto result = platform->platform->retrain(project_id);
        if (!result) return fail(CT_ERR_EMPTY, "need decided labels from at least two classes");
        if (version) *version = result->version;
        return CT_OK;
    });
}

ct_status ct_metrics(ct_platform* platform, char** json_out) {
    return guard([&] {
        CT_REQUIRE(platform && json_out, "platform and out are required");
        return put(json_out, platform->platform->metrics().dump());
    });
}

ct_status ct_state(ct_platform* platform, char** json_out) {
    return guard([&] {
        CT_REQUIRE(platform && json_out, "platform and out are required");
        return put(json_out, platform->platform->state().dump());
    });
}

ct_status ct_serve_start(ct_platform* platform, const char* host, int port, int* bound_port) {
    return guard([&] {
        CT_REQUIRE(platform, "platform is required");
        if (!platform->http) platform->http = std::make_unique<HttpService>(*platform->platform);
        const int bound = platform->http->start(host && *host ? host : "127.0.0.1", port);
        if (bound_port) *bound_port = bound;
        return CT_OK;
    });
}

ct_status ct_serve_stop(ct_platform* platform) {
    return guard([&] {
        CT_REQUIRE(platform, "platform is required");
        if (platform->http) platform->http->stop();
        return CT_OK;
    });
}

ct_status ct_replay_check(const char* data_dir, uint64_t* events, char** report) {
    return guard([&] {
        CT_REQUIRE(data_dir, "data_dir is required");
        auto r = replay_check(data_dir);
        if (events) *events = r.events;
        std::string text;
        for (const auto& w : r.warnings) text += "warning: " + w + "\n";
        for (const auto& p : r.problems) text += "mismatch: " + p + "\n";
        text += std::to_string(r.events) + " events, " + (r.ok ? "OK" : "FAILED");
        put(report, text);
        return r.ok ? CT_OK : fail(CT_ERR_CHECK_FAILED, "replay check found differences");
    });
}

ct_status ct_simulate(unsigned seeds, const char* strategy, char** csv) {
    return guard([&] {
        CT_REQUIRE(strategy && csv && seeds > 0, "seeds > 0, strategy and out are required");
        std::vector<SimulationResult> results;
        std::vector<SelectionStrategy> strategies;
        if (std::string_view(strategy) == "both") {
            strategies = {SelectionStrategy::Uncertainty, SelectionStrategy::Random};
        } else {
            auto s = strategy_from_string(strategy);
            CT_REQUIRE(s, "strategy must be uncertainty, random or both");
            strategies = {*s};
        }
        SimulationOptions base;
        for (auto s : strategies) {
            for (unsigned seed = 1; seed <= seeds; ++seed) {
                SimulationOptions o = base;
                o.strategy = s;
                o.seed = seed;
                results.push_back(run_simulation(o));
            }
        }
        return put(csv, simulation_csv(results, base.budget));
    });
}

}  // extern "C"
