#include <doctest.h>

#include "crowdtrend/http_service.hpp"

#include <httplib.h>

#include <filesystem>
#include <fstream>

using namespace crowdtrend;
using namespace std::chrono_literals;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const Timestamp T0 = from_millis(1'614'556'800'000);

std::string config_text() {
    std::ifstream in(CT_SOURCE_DIR "/config/vaccine_project.json");
    json c = json::parse(in);
    c["queue"]["consensus_k"] = 1;
    return c.dump();
}

struct Server {
    fs::path dir;
    std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>(T0);
    std::unique_ptr<Platform> platform;
    std::unique_ptr<HttpService> service;
    std::unique_ptr<httplib::Client> client;

    Server() {
        dir = fs::temp_directory_path() / ("ct-http-" + std::to_string(::getpid()));
        fs::remove_all(dir);
        platform = std::make_unique<Platform>(
            PlatformOptions{.data_dir = dir, .workers = 1, .sync = SyncMode::None, .clock = clock});
        service = std::make_unique<HttpService>(*platform);
        const int port = service->start("127.0.0.1", 0);
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
    }
    ~Server() {
        service->stop();
        platform->close();
    }

    httplib::Result post(const std::string& path, const std::string& body) {
        return client->Post(path, body, "application/json");
    }
};

json body(const httplib::Result& r) { return json::parse(r->body); }

}  // namespace

TEST_CASE("listen address parsing") {
    CHECK(parse_listen_address("") == std::pair<std::string, int>{"127.0.0.1", 8080});
    CHECK(parse_listen_address(":9000") == std::pair<std::string, int>{"127.0.0.1", 9000});
    CHECK(parse_listen_address("0.0.0.0:0") == std::pair<std::string, int>{"0.0.0.0", 0});
    CHECK_THROWS_AS(parse_listen_address("h:12x"), std::invalid_argument);
}

TEST_CASE("the /v1 API end to end") {
    Server s;
    auto& c = *s.client;

    auto health = c.Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(body(health) == json{{"status", "ok"}});

    auto created = s.post("/v1/projects", config_text());
    REQUIRE(created);
    CHECK(created->status == 201);
    CHECK(body(created)["id"] == "vaccine-sentiment");
    auto again = s.post("/v1/projects", config_text());
    CHECK(again->status == 200);

    json bad = json::parse(config_text());
    bad["query"] = "vaccine AND";
    auto invalid = s.post("/v1/projects", bad.dump());
    CHECK(invalid->status == 422);
    CHECK(body(invalid)["error"]["code"] == "invalid_config");
    CHECK(body(invalid)["error"]["offset"] == 11);

    CHECK(s.post("/v1/projects", "{not json")->status == 400);
    CHECK(body(s.post("/v1/projects", "{not json"))["error"]["code"] == "malformed_json");
    CHECK(c.Get("/v1/projects/nope")->status == 404);
    CHECK(c.Get("/v1/projects/nope/next?user=a")->status == 404);
    CHECK(c.Get("/v1/nothing-here")->status == 404);

    auto list = c.Get("/v1/projects");
    CHECK(body(list).size() == 1);

    CHECK(c.Get("/v1/projects/vaccine-sentiment/next?user=alice")->status == 204);
    CHECK(c.Get("/v1/projects/vaccine-sentiment/next")->status == 422);

    s.platform->submit("vaccine-sentiment",
                       Document{"d1", "I love the vaccine", s.clock->now(), "en", {}, "test", ""});
    s.platform->drain();

    auto queue = c.Get("/v1/projects/vaccine-sentiment/queue");
    CHECK(body(queue)["size"] == 1);

    auto next = c.Get("/v1/projects/vaccine-sentiment/next?user=alice");
    REQUIRE(next);
    CHECK(next->status == 200);
    const auto session = body(next);
    CHECK(session["doc_id"] == "d1");
    CHECK(session["text"] == "I love the vaccine");
    CHECK(session["question"]["id"] == "relevant");

    auto answer = [&](const std::string& user, const std::string& q, const std::string& a) {
        return s.post("/v1/projects/vaccine-sentiment/answers",
                      json{{"user", user}, {"doc", "d1"}, {"question", q}, {"answer", a}}.dump());
    };
    CHECK(answer("alice", "sentiment", "positive")->status == 409);
    CHECK(answer("mallory", "relevant", "yes")->status == 410);
    CHECK(answer("alice", "relevant", "maybe")->status == 422);
    auto first = answer("alice", "relevant", "yes");
    CHECK(first->status == 200);
    CHECK(body(first)["completed"] == false);
    CHECK(body(first)["next_question"]["id"] == "sentiment");
    auto last = answer("alice", "sentiment", "positive");
    CHECK(last->status == 200);
    CHECK(body(last)["completed"] == true);
    CHECK(body(last).contains("consensus"));
    CHECK(s.post("/v1/projects/vaccine-sentiment/answers", R"({"user":"alice"})")->status == 422);

    // Trends count predicted labels, so train a model first.
    s.platform->submit("vaccine-sentiment",
                       Document{"d2", "the vaccine scares me", s.clock->now(), "en", {}, "test", ""});
    s.platform->drain();
    REQUIRE(s.platform->next("vaccine-sentiment", "alice"));
    s.platform->answer("vaccine-sentiment", "alice", "d2", "relevant", "yes");
    s.platform->answer("vaccine-sentiment", "alice", "d2", "sentiment", "negative");
    REQUIRE(s.platform->retrain("vaccine-sentiment"));
    s.clock->advance(1min);
    s.platform->submit("vaccine-sentiment",
                       Document{"d3", "love my vaccine", s.clock->now(), "en", {}, "test", ""});
    s.platform->drain();
    s.clock->advance(2h);
    s.platform->tick(false);
    auto trends = c.Get("/v1/projects/vaccine-sentiment/trends");
    REQUIRE(trends);
    CHECK(trends->status == 200);
    const auto points = body(trends);
    REQUIRE(points.size() >= 1);
    for (const char* k : {"bucket_start", "counts", "ma_1d", "ma_7d", "r", "index", "consensus"})
        CHECK(points[0].contains(k));
    CHECK(c.Get("/v1/projects/vaccine-sentiment/trends?from=garbage&to=x")->status == 422);

    auto metrics = c.Get("/v1/metrics");
    CHECK(body(metrics)["projects"]["vaccine-sentiment"]["stored"] == 3);
}
