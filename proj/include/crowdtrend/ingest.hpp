#pragma once

#include "crowdtrend/time.hpp"
#include "crowdtrend/trend_class.hpp"

#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>

namespace crowdtrend {

struct Document {
    std::string doc_id;
    std::string text;  // NFC
    Timestamp created_at;
    std::string lang;
    std::optional<std::string> geo;
    std::string source;
    std::string raw;  // the original record, unknown fields included

    friend bool operator==(const Document&, const Document&) = default;
};

enum class RejectReason { MalformedJson, MissingField, EmptyText, BadTimestamp, InvalidUtf8 };

struct Rejection {
    RejectReason reason;
    std::string detail;
};

const char* to_string(RejectReason r);

using ParsedLine = std::variant<Document, Rejection>;

/// Parses one NDJSON record. Required fields: doc_id, text, created_at.
ParsedLine parse_document(std::string_view line, std::string_view source = "file");

/// Serializes a document back to one NDJSON line (no trailing newline).
std::string to_ndjson(const Document& doc);

struct StreamSourceConfig {
    enum class Kind { FileReplay, Generated };
    Kind kind = Kind::FileReplay;
    std::string path;
    double speedup = 0.0;  // 0 = as fast as possible, 1 = real time
    std::uint64_t seed = 0;
    std::size_t generated_count = 1000;
};

/// One item pulled from a stream.
struct StreamItem {
    std::variant<Document, Rejection> value;
};

/// Pull-based, single-consumer document stream. next() returns nullopt at
/// end of stream.
class DocumentStream {
public:
    virtual ~DocumentStream() = default;
    virtual std::optional<StreamItem> next() = 0;
};

/// Sleeps for replay pacing; injectable so tests can observe delays.
using Sleeper = std::function<void(Duration)>;

/// Opens a stream. Throws std::invalid_argument on a malformed config and
/// std::runtime_error when the replay file cannot be read.
std::unique_ptr<DocumentStream> open_stream(const StreamSourceConfig& config, Sleeper sleeper = {});

/// Receives accepted documents. Implementations block for backpressure and
/// return false only when permanently closed.
class DocumentSink {
public:
    virtual ~DocumentSink() = default;
    virtual bool submit(Document doc) = 0;
};

struct IngestStats {
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    std::uint64_t duplicates = 0;

    std::uint64_t total() const { return accepted + rejected + duplicates; }
    friend bool operator==(const IngestStats&, const IngestStats&) = default;
};

/// Deduplicates doc_ids for the lifetime of one run.
class Ingestor {
public:
    IngestStats ingest_batch(DocumentStream& stream, DocumentSink& sink);
    bool seen(const std::string& doc_id) const { return seen_.contains(doc_id); }
    std::size_t seen_count() const { return seen_.size(); }

private:
    std::unordered_set<std::string> seen_;
};

// ---------------------------------------------------------------------------
// Synthetic stream

/// Deterministic generator of vaccine-themed short posts with a known class.
/// The class is recorded in the raw record under "truth". A fraction of
/// posts carry no vaccine keyword at all (off-topic noise).
class SyntheticGenerator {
public:
    struct Options {
        std::uint64_t seed = 0;
        Timestamp start = Timestamp{};
        Duration mean_gap = Duration{60'000};
        // Class mix as a function of time; uniform when unset.
        std::function<std::array<double, kTrendClassCount>(Timestamp)> class_weights;
        double off_topic_rate = 0.1;
        std::string id_prefix = "g";
    };

    explicit SyntheticGenerator(Options opts);

    Document next();
    static std::optional<TrendClass> truth_of(const Document& doc);

private:
    Options opts_;
    std::mt19937_64 rng_;
    Timestamp cursor_;
    std::uint64_t counter_ = 0;
};

}  // namespace crowdtrend
