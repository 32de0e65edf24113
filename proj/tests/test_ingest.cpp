#include <doctest.h>

#include "crowdtrend/ingest.hpp"

#include <filesystem>
#include <fstream>

using namespace crowdtrend;

namespace {

struct CollectingSink : DocumentSink {
    std::vector<Document> docs;
    bool submit(Document doc) override {
        docs.push_back(std::move(doc));
        return true;
    }
};

std::filesystem::path write_file(const std::string& name, const std::string& body) {
    auto p = std::filesystem::temp_directory_path() / ("ct-ingest-" + name);
    std::ofstream(p, std::ios::binary) << body;
    return p;
}

}  // namespace

TEST_CASE("parse_document accepts a minimal record") {
    auto parsed = parse_document(R"({"doc_id":"1","text":"hello","created_at":"2020-01-01T00:00:00Z"})");
    REQUIRE(std::holds_alternative<Document>(parsed));
    const auto& d = std::get<Document>(parsed);
    CHECK(d.doc_id == "1");
    CHECK(d.text == "hello");
    CHECK(format_timestamp(d.created_at) == "2020-01-01T00:00:00.000Z");
}

TEST_CASE("parse_document rejections are typed") {
    auto reason = [](std::string_view line) {
        auto parsed = parse_document(line);
        REQUIRE(std::holds_alternative<Rejection>(parsed));
        return std::get<Rejection>(parsed).reason;
    };
    CHECK(reason(R"({"doc_id":"1","text":""})") == RejectReason::EmptyText);
    CHECK(reason(R"({"doc_id":"1","text":"  ","created_at":"2020-01-01T00:00:00Z"})") == RejectReason::EmptyText);
    CHECK(reason("{not json") == RejectReason::MalformedJson);
    CHECK(reason(R"({"text":"x","created_at":"2020-01-01T00:00:00Z"})") == RejectReason::MissingField);
    CHECK(reason(R"({"doc_id":"1","text":"x","created_at":"yesterday"})") == RejectReason::BadTimestamp);
    CHECK(reason("{\"doc_id\":\"1\",\"text\":\"\xff\xfe\",\"created_at\":\"2020-01-01T00:00:00Z\"}") ==
          RejectReason::InvalidUtf8);
}

TEST_CASE("text is NFC-normalized and unknown fields survive in raw") {
    auto parsed = parse_document(
        "{\"doc_id\":\"2\",\"text\":\"caf\x65\xcc\x81\",\"created_at\":\"2020-01-01T00:00:00Z\",\"extra\":7}");
    REQUIRE(std::holds_alternative<Document>(parsed));
    const auto& d = std::get<Document>(parsed);
    CHECK(d.text == "caf\xc3\xa9");
    CHECK(d.raw.find("\"extra\"") != std::string::npos);
    auto again = parse_document(to_ndjson(d));
    REQUIRE(std::holds_alternative<Document>(again));
    CHECK(std::get<Document>(again).text == d.text);
}

TEST_CASE("file replay yields records in file order") {
    auto path = write_file("three.ndjson",
                           R"({"doc_id":"a","text":"one","created_at":"2020-01-01T00:00:00Z"}
{"doc_id":"b","text":"two","created_at":"2020-01-01T00:00:05Z"}
{"doc_id":"c","text":"three","created_at":"2020-01-01T00:00:01Z"}
)");
    auto stream = open_stream({.kind = StreamSourceConfig::Kind::FileReplay, .path = path.string()});
    std::vector<std::string> ids;
    while (auto item = stream->next()) ids.push_back(std::get<Document>(item->value).doc_id);
    CHECK(ids == std::vector<std::string>{"a", "b", "c"});
    CHECK_FALSE(stream->next().has_value());
}

TEST_CASE("replay pacing follows created_at gaps and speedup") {
    auto path = write_file("paced.ndjson",
                           R"({"doc_id":"a","text":"one","created_at":"2020-01-01T00:00:00Z"}
{"doc_id":"b","text":"two","created_at":"2020-01-01T00:00:10Z"}
{"doc_id":"c","text":"three","created_at":"2020-01-01T00:00:04Z"}
{"doc_id":"d","text":"four","created_at":"2020-01-01T00:00:30Z"}
)");
    for (double speedup : {0.0, 1.0, 10.0}) {
        std::vector<Duration> sleeps;
        auto stream = open_stream({.kind = StreamSourceConfig::Kind::FileReplay, .path = path.string(), .speedup = speedup},
                                  [&](Duration d) { sleeps.push_back(d); });
        while (stream->next()) {
        }
        if (speedup == 0.0) {
            CHECK(sleeps.empty());
        } else {
            // Out-of-order records do not sleep; the clock never goes back.
            REQUIRE(sleeps.size() == 2);
            CHECK(sleeps[0] == Duration{static_cast<long>(10'000 / speedup)});
            CHECK(sleeps[1] == Duration{static_cast<long>(20'000 / speedup)});
        }
    }
}

TEST_CASE("open_stream errors") {
    CHECK_THROWS_AS(open_stream({.kind = StreamSourceConfig::Kind::FileReplay, .path = "/nonexistent/x.ndjson"}),
                    std::runtime_error);
    CHECK_THROWS_AS(open_stream({.kind = StreamSourceConfig::Kind::FileReplay, .path = ""}), std::invalid_argument);
    CHECK_THROWS_AS(open_stream({.kind = StreamSourceConfig::Kind::Generated, .speedup = -1}), std::invalid_argument);
}

TEST_CASE("ingest_batch counts accepted, rejected and duplicates") {
    auto path = write_file("five.ndjson",
                           R"({"doc_id":"1","text":"a","created_at":"2020-01-01T00:00:00Z"}
{"doc_id":"2","text":"b","created_at":"2020-01-01T00:00:01Z"}
{broken
{"doc_id":"1","text":"again","created_at":"2020-01-01T00:00:02Z"}
{"doc_id":"3","text":"c","created_at":"2020-01-01T00:00:03Z"}
)");
    Ingestor ingestor;
    CollectingSink sink;
    auto stream = open_stream({.kind = StreamSourceConfig::Kind::FileReplay, .path = path.string()});
    auto stats = ingestor.ingest_batch(*stream, sink);
    CHECK(stats == IngestStats{3, 1, 1});
    CHECK(sink.docs.size() == 3);

    auto second = open_stream({.kind = StreamSourceConfig::Kind::FileReplay, .path = path.string()});
    auto again = ingestor.ingest_batch(*second, sink);
    CHECK(again.accepted == 0);
    CHECK(again.duplicates == 4);
    CHECK(again.total() == 5);

    auto empty = write_file("empty.ndjson", "");
    Ingestor fresh;
    auto none = open_stream({.kind = StreamSourceConfig::Kind::FileReplay, .path = empty.string()});
    CHECK(fresh.ingest_batch(*none, sink) == IngestStats{});
}

TEST_CASE("generated streams are deterministic per seed") {
    auto collect = [](std::uint64_t seed) {
        auto s = open_stream({.kind = StreamSourceConfig::Kind::Generated, .seed = seed, .generated_count = 200});
        std::vector<Document> out;
        while (auto item = s->next()) out.push_back(std::get<Document>(item->value));
        return out;
    };
    const auto a = collect(42), b = collect(42), c = collect(43);
    CHECK(a.size() == 200);
    CHECK(a == b);
    CHECK(a != c);
    for (const auto& d : a) CHECK_FALSE(d.text.empty());
    std::size_t with_truth = 0;
    for (const auto& d : a) with_truth += SyntheticGenerator::truth_of(d).has_value();
    CHECK(with_truth == a.size());
}

TEST_CASE("conservation over random mixes") {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 20; ++round) {
        std::string body;
        std::size_t lines = 1 + rng() % 40;
        for (std::size_t i = 0; i < lines; ++i) {
            switch (rng() % 4) {
                case 0: body += "garbage\n"; break;
                case 1: body += R"({"doc_id":"x","text":"")" "\n"; break;
                default:
                    body += R"({"doc_id":")" + std::to_string(rng() % 10) +
                            R"(","text":"t","created_at":"2020-01-01T00:00:00Z"})" "\n";
            }
        }
        auto path = write_file("mix.ndjson", body);
        Ingestor ingestor;
        CollectingSink sink;
        auto stream = open_stream({.kind = StreamSourceConfig::Kind::FileReplay, .path = path.string()});
        auto stats = ingestor.ingest_batch(*stream, sink);
        CHECK(stats.total() == lines);
        CHECK(sink.docs.size() == stats.accepted);
    }
}
