#include "crowdtrend/ingest.hpp"

#include "crowdtrend/random.hpp"
#include "crowdtrend/text.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <stdexcept>
#include <thread>

namespace crowdtrend {

using json = nlohmann::json;

const char* to_string(RejectReason r) {
    switch (r) {
        case RejectReason::MalformedJson: return "malformed_json";
        case RejectReason::MissingField: return "missing_field";
        case RejectReason::EmptyText: return "empty_text";
        case RejectReason::BadTimestamp: return "bad_timestamp";
        case RejectReason::InvalidUtf8: return "invalid_utf8";
    }
    return "unknown";
}

namespace {

std::optional<std::string> string_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer() || it->is_number_unsigned()) return it->dump();
    return std::nullopt;
}

}  // namespace

ParsedLine parse_document(std::string_view line, std::string_view source) {
    // The JSON parser would report raw invalid bytes as malformed JSON.
    if (!text::valid_utf8(line)) return Rejection{RejectReason::InvalidUtf8, "line"};
    json obj = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded() || !obj.is_object()) return Rejection{RejectReason::MalformedJson, "not a JSON object"};

    auto id = string_field(obj, "doc_id");
    if (!id || id->empty()) return Rejection{RejectReason::MissingField, "doc_id"};
    auto raw_text = string_field(obj, "text");
    if (!raw_text) return Rejection{RejectReason::MissingField, "text"};

    auto normalized = text::nfc_normalize(*raw_text);
    if (!normalized) return Rejection{RejectReason::InvalidUtf8, "text"};
    if (text::is_blank(*normalized)) return Rejection{RejectReason::EmptyText, "text"};

    auto created = string_field(obj, "created_at");
    if (!created) return Rejection{RejectReason::MissingField, "created_at"};
    auto ts = parse_timestamp(*created);
    if (!ts) return Rejection{RejectReason::BadTimestamp, *created};

    Document doc;
    doc.doc_id = std::move(*id);
    doc.text = std::move(*normalized);
    doc.created_at = *ts;
    doc.lang = string_field(obj, "lang").value_or("");
    doc.geo = string_field(obj, "geo");
    doc.source = std::string(source);
    doc.raw = obj.dump();
    return doc;
}

std::string to_ndjson(const Document& doc) {
    json obj = doc.raw.empty() ? json::object() : json::parse(doc.raw);
    obj["doc_id"] = doc.doc_id;
    obj["text"] = doc.text;
    obj["created_at"] = format_timestamp(doc.created_at);
    if (!doc.lang.empty()) obj["lang"] = doc.lang;
    if (doc.geo) obj["geo"] = *doc.geo;
    return obj.dump();
}

// ---------------------------------------------------------------------------
// Streams

namespace {

class FileReplayStream final : public DocumentStream {
public:
    FileReplayStream(const std::string& path, double speedup, Sleeper sleeper)
        : in_(path), source_(std::filesystem::path(path).filename().string()), speedup_(speedup),
          sleeper_(std::move(sleeper)) {
        if (!in_) throw std::runtime_error("cannot read replay file: " + path);
    }

    std::optional<StreamItem> next() override {
        std::string line;
        while (std::getline(in_, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (text::is_blank(line)) continue;
            ParsedLine parsed = parse_document(line, source_);
            if (auto* doc = std::get_if<Document>(&parsed)) pace(doc->created_at);
            return StreamItem{std::move(parsed)};
        }
        return std::nullopt;
    }

private:
    void pace(Timestamp created) {
        if (speedup_ > 0.0 && last_ && created > *last_) {
            auto gap = static_cast<double>((created - *last_).count()) / speedup_;
            sleeper_(Duration{static_cast<Duration::rep>(gap)});
        }
        if (!last_ || created > *last_) last_ = created;
    }

    std::ifstream in_;
    std::string source_;
    double speedup_;
    Sleeper sleeper_;
    std::optional<Timestamp> last_;
};

class GeneratedStream final : public DocumentStream {
public:
    GeneratedStream(std::uint64_t seed, std::size_t count)
        : gen_(SyntheticGenerator::Options{.seed = seed,
                                           .start = from_millis(1'577'836'800'000),  // 2020-01-01
                                           .mean_gap = Duration{60'000},
                                           .class_weights = {},
                                           .off_topic_rate = 0.1,
                                           .id_prefix = "g" + std::to_string(seed) + "-"}),
          remaining_(count) {}

    std::optional<StreamItem> next() override {
        if (remaining_ == 0) return std::nullopt;
        --remaining_;
        return StreamItem{gen_.next()};
    }

private:
    SyntheticGenerator gen_;
    std::size_t remaining_;
};

}  // namespace

std::unique_ptr<DocumentStream> open_stream(const StreamSourceConfig& config, Sleeper sleeper) {
    if (!(config.speedup >= 0.0)) throw std::invalid_argument("speedup must be >= 0");
    if (!sleeper) sleeper = [](Duration d) { std::this_thread::sleep_for(d); };
    switch (config.kind) {
        case StreamSourceConfig::Kind::FileReplay:
            if (config.path.empty()) throw std::invalid_argument("file_replay needs a path");
            return std::make_unique<FileReplayStream>(config.path, config.speedup, std::move(sleeper));
        case StreamSourceConfig::Kind::Generated:
            return std::make_unique<GeneratedStream>(config.seed, config.generated_count);
    }
    throw std::invalid_argument("unknown stream kind");
}

IngestStats Ingestor::ingest_batch(DocumentStream& stream, DocumentSink& sink) {
    IngestStats stats;
    while (auto item = stream.next()) {
        auto* doc = std::get_if<Document>(&item->value);
        if (!doc) {
            ++stats.rejected;
            continue;
        }
        if (!seen_.insert(doc->doc_id).second) {
            ++stats.duplicates;
            continue;
        }
        if (!sink.submit(std::move(*doc))) throw std::runtime_error("document sink closed during ingest");
        ++stats.accepted;
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

constexpr std::array<std::string_view, 7> kVaccineKeywords = {
    "vaccine", "vaccination", "vaxxer", "vaxxed", "vaccinated", "vaccinating", "vacine"};

constexpr std::array<std::array<std::string_view, 10>, kTrendClassCount> kClassWords = {{
    {"protect", "safe", "grateful", "science", "effective", "immunity", "thankful", "lifesaving", "recommend",
     "healthy"},
    {"dangerous", "toxic", "injury", "poison", "refuse", "autism", "mandate", "harm", "scam", "distrust"},
    {"clinic", "appointment", "schedule", "report", "study", "news", "announced", "data", "county", "update"},
    {"game", "movie", "joke", "meme", "song", "band", "album", "fans", "lyrics", "episode"},
}};

constexpr std::array<std::string_view, 14> kFiller = {"the", "a",      "my",     "today", "just", "about", "this",
                                                      "really", "people", "week", "is",  "for",  "and",   "so"};

constexpr std::array<std::string_view, 8> kOffTopic = {"weather", "rain",  "coffee", "traffic",
                                                       "lunch",   "sunny", "train",  "weekend"};

}  // namespace

SyntheticGenerator::SyntheticGenerator(Options opts)
    : opts_(std::move(opts)), rng_(opts_.seed), cursor_(opts_.start) {}

Document SyntheticGenerator::next() {
    cursor_ += Duration{static_cast<Duration::rep>(rnd::exponential(rng_, static_cast<double>(opts_.mean_gap.count())))};

    std::array<double, kTrendClassCount> weights{1, 1, 1, 1};
    if (opts_.class_weights) weights = opts_.class_weights(cursor_);
    const bool off_topic = rnd::bernoulli(rng_, opts_.off_topic_rate);
    const auto cls = off_topic ? TrendClass::Irrelevant : static_cast<TrendClass>(rnd::weighted(rng_, weights));

    std::vector<std::string> words;
    if (off_topic) {
        for (int i = 0; i < 3; ++i) words.emplace_back(kOffTopic[rnd::index(rng_, kOffTopic.size())]);
    } else {
        words.emplace_back(kVaccineKeywords[rnd::index(rng_, kVaccineKeywords.size())]);
        const auto& vocab = kClassWords[index_of(cls)];
        const std::size_t n_class = 2 + rnd::index(rng_, 2);
        for (std::size_t i = 0; i < n_class; ++i) words.emplace_back(vocab[rnd::index(rng_, vocab.size())]);
        // Occasional cross-class word keeps the task from being trivial.
        if (rnd::bernoulli(rng_, 0.2)) {
            const auto& other = kClassWords[rnd::index(rng_, kTrendClassCount)];
            words.emplace_back(other[rnd::index(rng_, other.size())]);
        }
    }
    const std::size_t n_filler = 2 + rnd::index(rng_, 4);
    for (std::size_t i = 0; i < n_filler; ++i) words.emplace_back(kFiller[rnd::index(rng_, kFiller.size())]);
    rnd::shuffle(words, rng_);

    std::string body;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) body += ' ';
        if (i == 0 && !words[i].empty()) words[i][0] = static_cast<char>(std::toupper(words[i][0]));
        body += words[i];
    }
    body += rnd::bernoulli(rng_, 0.3) ? "!" : ".";

    Document doc;
    doc.doc_id = opts_.id_prefix + std::to_string(++counter_);
    doc.text = body;
    doc.created_at = cursor_;
    doc.lang = "en";
    doc.source = "generated";
    json raw{{"doc_id", doc.doc_id},
             {"text", doc.text},
             {"created_at", format_timestamp(doc.created_at)},
             {"lang", doc.lang},
             {"truth", std::string(to_string(cls))}};
    doc.raw = raw.dump();
    return doc;
}

std::optional<TrendClass> SyntheticGenerator::truth_of(const Document& doc) {
    if (doc.raw.empty()) return std::nullopt;
    json raw = json::parse(doc.raw, nullptr, false);
    if (raw.is_discarded() || !raw.contains("truth") || !raw["truth"].is_string()) return std::nullopt;
    return trend_class_from_string(raw["truth"].get<std::string>());
}

}  // namespace crowdtrend
