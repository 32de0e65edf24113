#include "crowdtrend/platform.hpp"

#include "crowdtrend/text.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <regex>

namespace crowdtrend {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kLogFile = "events.log";
constexpr const char* kSnapshotDir = "snapshots";
constexpr const char* kProjectDir = "projects";

struct SeedLabel {
    std::string text;
    TrendClass label;
};

std::vector<SeedLabel> load_seed_labels(const std::string& path) {
    std::vector<SeedLabel> out;
    if (path.empty()) return out;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read seed labels " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("text") || !j.contains("label"))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected {text, label}");
        auto label = trend_class_from_string(j["label"].get<std::string>());
        if (!label) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown label");
        out.push_back({j["text"].get<std::string>(), *label});
    }
    return out;
}

std::string version_file(std::uint32_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "v%06u.json", v);
    return buf;
}

json counts_json(const ClassCounts& c) { return json(std::vector<std::uint64_t>(c.begin(), c.end())); }

}  // namespace

struct Platform::Runtime {
    struct StoredDoc {
        std::string text;
        Timestamp created_at;
        std::optional<TrendClass> predicted;
    };

    Runtime(Platform& owner, std::shared_ptr<const Project> p)
        : platform(owner),
          project(p),
          queue(p->queue),
          book(p, queue,
               AnnotationSink{[this](const AnnotationRow& row) { on_row(row); },
                              [this](const ConsensusLabel& c) { on_consensus(c); }}) {}

    void on_row(const AnnotationRow& row) {
        platform.log_->append(EventKind::AnnotationRow, to_json(row), platform.clock_->now());
    }

    void on_consensus(const ConsensusLabel& c) {
        platform.log_->append(EventKind::Consensus, to_json(c), platform.clock_->now());
        apply_consensus(c);
    }

    void apply_consensus(const ConsensusLabel& c) {
        std::lock_guard lock(mu);
        if (!c.label) return;
        ++decided;
        if (!first_label) first_label = c.resolved_at;
        if (auto it = docs.find(c.doc_id); it != docs.end()) trends.record_consensus(it->second.created_at, *c.label);
    }

    std::shared_ptr<const Project> current() const {
        std::lock_guard lock(mu);
        return project;
    }

    Platform& platform;
    mutable std::mutex mu;  // guards the fields below up to `train_mu`
    std::shared_ptr<const Project> project;
    std::map<std::string, StoredDoc> docs;
    std::vector<std::string> doc_order;
    std::vector<SeedLabel> seed;
    std::size_t decided = 0;          // decided consensus labels so far
    std::size_t trained_decided = 0;  // decided labels behind the current model
    std::optional<Timestamp> first_label;
    std::optional<Timestamp> last_train;
    std::uint64_t version = 0;
    std::uint64_t retrains = 0;

    std::mutex train_mu;  // one retrain at a time
    LabelQueue queue;
    AnnotationBook book;
    TrendAccumulator trends;
    ModelHolder model;
    PipelineCounters counters;
};

Platform::Platform(PlatformOptions options) : options_(std::move(options)) {
    if (options_.data_dir.empty()) throw std::invalid_argument("data directory is required");
    if (options_.workers == 0) throw std::invalid_argument("worker count must be at least 1");
    clock_ = options_.clock ? options_.clock : std::make_shared<SystemClock>();
    fs::create_directories(options_.data_dir);
    log_ = std::make_unique<EventLog>(options_.data_dir / kLogFile, options_.sync);
    for (const auto& w : log_->warnings()) warnings_.push_back(w);
    load_projects();
    rebuild();
    pipeline_ = std::make_unique<Pipeline>(options_.workers, options_.intake_capacity,
                                           [this](const Job& job) { handle(job); });
}

Platform::~Platform() {
    try {
        close();
    } catch (const std::exception& e) {
        std::cerr << "platform close failed: " << e.what() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Projects

Platform::Runtime& Platform::runtime(const std::string& id) const {
    std::shared_lock lock(projects_mu_);
    auto it = runtimes_.find(id);
    if (it == runtimes_.end()) throw NotFound("unknown project '" + id + "'");
    return *it->second;
}

Platform::Runtime& Platform::install(std::shared_ptr<const Project> project) {
    auto seed = load_seed_labels(project->classifier.seed_labels);
    auto it = runtimes_.find(project->id);
    if (it == runtimes_.end()) {
        auto rt = std::make_unique<Runtime>(*this, project);
        rt->seed = std::move(seed);
        it = runtimes_.emplace(project->id, std::move(rt)).first;
    } else {
        Runtime& rt = *it->second;
        rt.book.update_project(project);
        std::lock_guard lock(rt.mu);
        rt.project = project;
        rt.seed = std::move(seed);
    }
    return *it->second;
}

void Platform::persist_project_version(const Project& project) {
    const fs::path dir = options_.data_dir / kProjectDir / project.id;
    fs::create_directories(dir);
    const fs::path final_path = dir / version_file(project.sequence_version);
    const fs::path tmp = final_path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << project.source.dump(2) << '\n';
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, final_path);
}

void Platform::load_projects() {
    const fs::path root = options_.data_dir / kProjectDir;
    if (!fs::is_directory(root)) return;
    static const std::regex pattern(R"(v(\d{6})\.json)");
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        std::vector<std::pair<std::uint32_t, fs::path>> versions;
        for (const auto& e : fs::directory_iterator(dir)) {
            std::smatch m;
            const auto name = e.path().filename().string();
            if (std::regex_match(name, m, pattern)) versions.emplace_back(std::stoul(m[1]), e.path());
        }
        std::sort(versions.begin(), versions.end());
        for (const auto& [v, path] : versions) {
            std::ifstream in(path);
            json config = json::parse(in);
            auto project = std::make_shared<Project>(parse_project(config));
            project->sequence_version = v;
            install(std::move(project));
        }
    }
}

CreateResult Platform::create_project(const json& config) {
    auto parsed = std::make_shared<Project>(parse_project(config));
    std::unique_lock lock(projects_mu_);
    auto it = runtimes_.find(parsed->id);
    const bool created = it == runtimes_.end();
    if (!created) parsed->sequence_version = it->second->current()->sequence_version + 1;
    if (options_.read_only) throw std::runtime_error("platform is read-only");
    persist_project_version(*parsed);
    std::shared_ptr<const Project> project = parsed;
    Runtime& rt = install(project);
    lock.unlock();

    if (created && !rt.seed.empty()) {
        std::lock_guard train(rt.train_mu);
        retrain_locked(rt, clock_->now());
    }
    return {project, created};
}

std::vector<std::string> Platform::project_ids() const {
    std::shared_lock lock(projects_mu_);
    std::vector<std::string> out;
    for (const auto& [id, rt] : runtimes_) out.push_back(id);
    return out;
}

std::shared_ptr<const Project> Platform::project(const std::string& id) const { return runtime(id).current(); }

std::optional<std::string> Platform::document_text(const std::string& project_id, const std::string& doc_id) const {
    Runtime& rt = runtime(project_id);
    std::lock_guard lock(rt.mu);
    auto it = rt.docs.find(doc_id);
    if (it == rt.docs.end()) return std::nullopt;
    return it->second.text;
}

// ---------------------------------------------------------------------------
// Rebuild

void Platform::rebuild() {
    std::size_t orphans = 0;
    log_->for_each(0, [&](const EventRecord& rec) {
        const auto project_id = rec.payload.value("project_id", "");
        auto it = runtimes_.find(project_id);
        if (it == runtimes_.end()) {
            ++orphans;
            return;
        }
        Runtime& rt = *it->second;
        switch (rec.kind) {
            case EventKind::DocumentStored: {
                auto pd = processed_from_json(rec.payload);
                {
                    std::lock_guard lock(rt.mu);
                    if (rt.docs.contains(pd.document.doc_id)) break;
                    rt.docs.emplace(pd.document.doc_id,
                                    Runtime::StoredDoc{pd.document.text, pd.document.created_at, pd.predicted_label});
                    rt.doc_order.push_back(pd.document.doc_id);
                }
                ++rt.counters.stored;
                if (pd.predicted_label) rt.trends.record(pd.document.created_at, *pd.predicted_label);
                break;
            }
            case EventKind::AnnotationRow:
                rt.book.replay_row(annotation_row_from_json(rec.payload));
                break;
            case EventKind::Consensus: {
                auto c = consensus_from_json(rec.payload);
                rt.book.replay_consensus(c);
                rt.apply_consensus(c);
                break;
            }
            case EventKind::ModelPublished: {
                auto model = std::make_shared<const Model>(Model::from_json(rec.payload.at("model").dump()));
                auto trained_at = parse_timestamp(rec.payload.value("trained_at", ""));
                publish_model(rt, model, rec.payload.value("consensus_labels", std::size_t{0}),
                              trained_at.value_or(rec.written_at), false);
                break;
            }
            case EventKind::BucketClosed: {
                ClassCounts counts{};
                const auto& arr = rec.payload.at("counts");
                for (std::size_t c = 0; c < kTrendClassCount; ++c) counts[c] = arr.at(c).get<std::uint64_t>();
                rt.trends.apply_closed(rec.payload.at("bucket").get<std::int64_t>(), counts);
                break;
            }
        }
    });
    if (orphans) warnings_.push_back(std::to_string(orphans) + " events reference unknown projects");
    if (options_.read_only) return;

    // The label queue is a cache: repopulate it from unresolved documents.
    const Timestamp now = clock_->now();
    for (auto& [id, rtp] : runtimes_) {
        Runtime& rt = *rtp;
        auto model = rt.model.get();
        std::vector<std::pair<std::string, Runtime::StoredDoc>> pending;
        {
            std::lock_guard lock(rt.mu);
            for (const auto& doc_id : rt.doc_order) pending.emplace_back(doc_id, rt.docs.at(doc_id));
        }
        for (const auto& [doc_id, doc] : pending) {
            if (rt.book.resolved(doc_id)) continue;
            double u = 1.0;
            if (model) u = uncertainty(model->predict(featurize(doc.text, model->dim())), rt.current()->classifier.measure);
            rt.queue.offer(doc_id, doc.created_at, u, now);
            bool ready = false;
            for (const auto& user : rt.book.completed_users(doc_id)) ready = rt.queue.restore_completion(user, doc_id) || ready;
            if (ready) rt.book.resolve_consensus(doc_id, now);
        }
    }
}

// ---------------------------------------------------------------------------
// Ingest

void Platform::handle(const Job& job) {
    Runtime& rt = runtime(job.project_id);
    {
        std::lock_guard lock(rt.mu);
        if (rt.docs.contains(job.document.doc_id)) {
            ++ingest_duplicates_;
            return;
        }
    }
    ProjectContext ctx;
    ctx.project = rt.current();
    ctx.model = &rt.model;
    ctx.queue = &rt.queue;
    ctx.trends = &rt.trends;
    ctx.counters = &rt.counters;
    ctx.persist = [&](const ProcessedDocument& pd) {
        // The job's submit time, so simulated runs write identical logs.
        log_->append(EventKind::DocumentStored, to_json(pd), job.submitted_at);
    };
    ctx.on_stored = [&](const ProcessedDocument& pd) {
        std::lock_guard lock(rt.mu);
        rt.docs.emplace(pd.document.doc_id, Runtime::StoredDoc{pd.document.text, pd.document.created_at, pd.predicted_label});
        rt.doc_order.push_back(pd.document.doc_id);
    };
    process_document(job.document, ctx, job.submitted_at, options_.persist_retry);
}

bool Platform::submit(const std::string& project_id, Document doc) {
    runtime(project_id);  // unknown ids fail here rather than in a worker
    return pipeline_->submit(Job{project_id, std::move(doc), clock_->now()});
}

void Platform::drain() { pipeline_->drain(); }

IngestStats Platform::ingest(const std::string& project_id, DocumentStream& stream) {
    struct Sink final : DocumentSink {
        Platform& p;
        const std::string& id;
        Sink(Platform& p, const std::string& id) : p(p), id(id) {}
        bool submit(Document doc) override { return p.submit(id, std::move(doc)); }
    } sink(*this, project_id);
    runtime(project_id);
    Ingestor ingestor;
    auto stats = ingestor.ingest_batch(stream, sink);
    ingest_rejected_ += stats.rejected;
    ingest_duplicates_ += stats.duplicates;
    drain();
    return stats;
}

// ---------------------------------------------------------------------------
// Annotation

std::optional<SessionStart> Platform::next(const std::string& project_id, const std::string& user_id) {
    return runtime(project_id).book.start_session(user_id, clock_->now());
}

AnswerOutcome Platform::answer(const std::string& project_id, const std::string& user_id, const std::string& doc_id,
                               const std::string& question_id, const std::string& answer_id) {
    return runtime(project_id).book.submit_answer(user_id, doc_id, question_id, answer_id, clock_->now());
}

std::vector<ConsensusLabel> Platform::close_annotations(const std::string& project_id) {
    return runtime(project_id).book.resolve_pending(clock_->now());
}

// ---------------------------------------------------------------------------
// Trends

std::vector<TrendPoint> Platform::trends(const std::string& project_id, Timestamp from, Timestamp to) const {
    Runtime& rt = runtime(project_id);
    IndexParams params;
    params.epsilon = rt.current()->trends.epsilon;
    return rt.trends.query(from, to, clock_->now(), params);
}

std::vector<TrendPoint> Platform::trends_all(const std::string& project_id, bool recompute) const {
    Runtime& rt = runtime(project_id);
    const auto closed = rt.trends.closed_buckets();
    if (closed.empty()) return {};
    const auto all = rt.trends.all_counts();
    const Timestamp from = bucket_start(all.empty() ? *closed.begin() : std::min(all.begin()->first, *closed.begin()));
    const Timestamp to = bucket_start(*closed.rbegin() + 1);
    IndexParams params;
    params.epsilon = rt.current()->trends.epsilon;
    if (!recompute) return rt.trends.query(from, to, to, params);

    auto model = rt.model.get();
    TrendAccumulator fresh;
    {
        std::lock_guard lock(rt.mu);
        for (const auto& doc_id : rt.doc_order) {
            const auto& doc = rt.docs.at(doc_id);
            std::optional<TrendClass> label = doc.predicted;
            if (model) label = model->argmax_class(model->predict(featurize(doc.text, model->dim())));
            if (label) fresh.record(doc.created_at, *label);
        }
    }
    return fresh.query(from, to, to, params);
}

QueueSnapshot Platform::queue_snapshot(const std::string& project_id) const {
    return runtime(project_id).queue.snapshot();
}

json Platform::metrics() const {
    json projects = json::object();
    std::shared_lock lock(projects_mu_);
    for (const auto& [id, rt] : runtimes_) {
        json m = rt->counters.to_json();
        m["late"] = rt->trends.late();
        m["queue_size"] = rt->queue.size();
        m["annotation_rows"] = rt->book.row_count();
        std::lock_guard l(rt->mu);
        m["decided_labels"] = rt->decided;
        m["model_version"] = rt->version;
        m["retrains"] = rt->retrains;
        projects[id] = std::move(m);
    }
    return {{"projects", std::move(projects)},
            {"pipeline",
             {{"workers", pipeline_ ? pipeline_->worker_count() : 0},
              {"handled", pipeline_ ? pipeline_->handled() : 0},
              {"failures", pipeline_ ? pipeline_->failures() : 0}}},
            {"ingest", {{"rejected", ingest_rejected_.load()}, {"duplicates", ingest_duplicates_.load()}}},
            {"store", {{"next_sequence", log_->next_sequence()}, {"recovered_bytes", log_->recovered_bytes()}}}};
}

// ---------------------------------------------------------------------------
// Training

std::vector<LabelledExample> Platform::training_set(const Runtime& rt) const {
    // Book first, then the doc index: never hold rt.mu while calling the book.
    const auto labels = rt.book.consensus_labels();
    std::lock_guard lock(rt.mu);
    const auto dim = rt.project->classifier.feature_dim;
    std::vector<LabelledExample> out;
    for (const auto& s : rt.seed) out.push_back({"", featurize(s.text, dim), s.label, 1.0});
    for (const auto& [doc_id, c] : labels) {
        if (!c.label) continue;
        auto it = rt.docs.find(doc_id);
        if (it == rt.docs.end()) continue;
        out.push_back({doc_id, featurize(it->second.text, dim), *c.label, 1.0});
    }
    return out;
}

std::optional<RetrainResult> Platform::retrain_locked(Runtime& rt, Timestamp now) {
    auto examples = training_set(rt);
    std::set<TrendClass> classes;
    for (const auto& e : examples) classes.insert(e.label);
    if (classes.size() < 2) return std::nullopt;
    std::size_t decided = 0;
    for (const auto& e : examples) decided += e.doc_id.empty() ? 0 : 1;

    const auto project = rt.current();
    std::uint64_t version;
    {
        std::lock_guard lock(rt.mu);
        version = rt.version + 1;
    }
    auto model = std::make_shared<const Model>(train(examples, project->classifier.hyperparams,
                                                     project->classifier.seed + version, version,
                                                     project->classifier.feature_dim));
    publish_model(rt, model, decided, now, true);

    RetrainResult result{version, examples.size(), 0};
    result.reprioritized = rt.queue.reprioritize(now, [&](const std::string& doc_id) -> std::optional<double> {
        std::lock_guard lock(rt.mu);
        auto it = rt.docs.find(doc_id);
        if (it == rt.docs.end()) return std::nullopt;
        return uncertainty(model->predict(featurize(it->second.text, model->dim())), project->classifier.measure);
    });
    return result;
}

void Platform::publish_model(Runtime& rt, std::shared_ptr<const Model> model, std::size_t decided, Timestamp now,
                             bool persist) {
    if (persist) {
        json payload{{"project_id", rt.current()->id},
                     {"version", model->version()},
                     {"trained_at", format_timestamp(now)},
                     {"consensus_labels", decided},
                     {"model", json::parse(model->to_json())}};
        log_->append(EventKind::ModelPublished, std::move(payload), clock_->now());
    }
    rt.model.publish(model);
    std::lock_guard lock(rt.mu);
    rt.version = model->version();
    rt.trained_decided = decided;
    rt.last_train = now;
    ++rt.retrains;
}

std::optional<RetrainResult> Platform::retrain(const std::string& project_id) {
    Runtime& rt = runtime(project_id);
    std::lock_guard train(rt.train_mu);
    return retrain_locked(rt, clock_->now());
}

std::optional<std::uint64_t> Platform::model_version(const std::string& project_id) const {
    auto model = runtime(project_id).model.get();
    if (!model) return std::nullopt;
    return model->version();
}

bool Platform::due_locked(Runtime& rt, Timestamp now) const {
    const auto project = rt.current();
    std::lock_guard lock(rt.mu);
    const std::size_t fresh = rt.decided - std::min(rt.decided, rt.trained_decided);
    const auto anchor = rt.last_train ? rt.last_train : rt.first_label;
    const Duration since = anchor ? now - *anchor : Duration{0};
    return retrain_trigger(fresh, since, project->classifier.retrain) == RetrainDecision::RetrainNow;
}

bool Platform::retrain_due(const std::string& project_id) const {
    return due_locked(runtime(project_id), clock_->now());
}

std::size_t Platform::tick_runtime(Runtime& rt, Timestamp now, bool allow_retrain) {
    const auto project = rt.current();
    for (const auto& [bucket, counts] : rt.trends.close_through(now - project->trends.close_grace)) {
        log_->append(EventKind::BucketClosed,
                     json{{"project_id", project->id},
                          {"bucket", bucket},
                          {"bucket_start", format_timestamp(bucket_start(bucket))},
                          {"counts", counts_json(counts)}},
                     clock_->now());
    }
    if (!allow_retrain) return 0;
    std::lock_guard train(rt.train_mu);
    if (!due_locked(rt, now)) return 0;
    return retrain_locked(rt, now) ? 1 : 0;
}

std::size_t Platform::tick(bool allow_retrain) {
    const Timestamp now = clock_->now();
    std::vector<Runtime*> all;
    {
        std::shared_lock lock(projects_mu_);
        for (auto& [id, rt] : runtimes_) all.push_back(rt.get());
    }
    std::size_t n = 0;
    for (Runtime* rt : all) n += tick_runtime(*rt, now, allow_retrain);
    return n;
}

// ---------------------------------------------------------------------------
// State

json Platform::state() const {
    json projects = json::object();
    std::shared_lock lock(projects_mu_);
    for (const auto& [id, rt] : runtimes_) {
        json consensus = json::object();
        for (const auto& [doc, c] : rt->book.consensus_labels())
            consensus[doc] = c.label ? json(std::string(to_string(*c.label))) : json(nullptr);
        json closed = json::object();
        for (auto b : rt->trends.closed_buckets()) closed[std::to_string(b)] = counts_json(rt->trends.counts(b));
        json p{{"consensus", std::move(consensus)},
               {"closed_buckets", std::move(closed)},
               {"annotation_rows", rt->book.row_count()},
               {"late", rt->trends.late()},
               {"queue_size", rt->queue.size()}};
        std::lock_guard l(rt->mu);
        p["model_version"] = rt->version;
        p["documents"] = rt->docs.size();
        projects[id] = std::move(p);
    }
    return {{"projects", std::move(projects)}, {"next_sequence", log_->next_sequence()}};
}

void Platform::write_snapshot() {
    if (options_.read_only) return;
    Snapshot snap;
    snap.next_sequence = log_->next_sequence();
    snap.taken_at = clock_->now();
    snap.state = state();
    crowdtrend::write_snapshot(options_.data_dir / kSnapshotDir, snap);
}

void Platform::close() {
    std::lock_guard lock(close_mu_);
    if (closed_) return;
    closed_ = true;
    if (pipeline_) {
        pipeline_->drain();
        pipeline_->shutdown();
    }
    if (options_.snapshot_on_close) write_snapshot();
}

// ---------------------------------------------------------------------------
// Replay verification

json comparable_state(const json& state) {
    json out = json::object();
    for (const auto& [id, p] : state.at("projects").items()) {
        out[id] = json{{"consensus", p.at("consensus")},
                       {"closed_buckets", p.at("closed_buckets")},
                       {"annotation_rows", p.at("annotation_rows")},
                       {"late", p.at("late")},
                       {"model_version", p.at("model_version")},
                       {"documents", p.at("documents")}};
    }
    return out;
}

json reduce_events(std::span<const EventRecord> records) {
    struct Fold {
        std::map<std::string, json> consensus;
        std::map<std::int64_t, std::array<std::uint64_t, 4>> open;
        std::map<std::int64_t, std::array<std::uint64_t, 4>> closed;
        std::set<std::string> docs;
        std::int64_t watermark = INT64_MIN;
        std::uint64_t rows = 0, late = 0, model_version = 0;
    };
    constexpr std::int64_t hour_ms = 3'600'000;
    std::map<std::string, Fold> folds;
    for (const auto& rec : records) {
        const auto& p = rec.payload;
        Fold& f = folds[p.at("project_id").get<std::string>()];
        switch (rec.kind) {
            case EventKind::DocumentStored: {
                f.docs.insert(p.at("doc_id").get<std::string>());
                if (!p.contains("predicted_label")) break;
                const auto ms = to_millis(*parse_timestamp(p.at("created_at").get<std::string>()));
                const std::int64_t bucket = ms >= 0 ? ms / hour_ms : -((-ms + hour_ms - 1) / hour_ms);
                if (bucket < f.watermark) {
                    ++f.late;
                    break;
                }
                const auto label = p.at("predicted_label").get<std::string>();
                const char* names[] = {"positive", "negative", "neutral", "irrelevant"};
                for (int c = 0; c < 4; ++c) {
                    if (label == names[c]) ++f.open[bucket][c];
                }
                break;
            }
            case EventKind::AnnotationRow: ++f.rows; break;
            case EventKind::Consensus:
                f.consensus[p.at("doc_id").get<std::string>()] = p.at("label");
                break;
            case EventKind::ModelPublished:
                f.model_version = p.at("model").at("version").get<std::uint64_t>();
                break;
            case EventKind::BucketClosed: {
                // Closed counts come from this fold's own tally, not the
                // payload, so a disagreement shows up in the comparison.
                const auto b = p.at("bucket").get<std::int64_t>();
                f.closed[b] = f.open[b];
                f.watermark = std::max(f.watermark, b + 1);
                break;
            }
        }
    }
    json out = json::object();
    for (const auto& [id, f] : folds) {
        json closed = json::object();
        for (const auto& [b, c] : f.closed) closed[std::to_string(b)] = json(std::vector<std::uint64_t>(c.begin(), c.end()));
        json consensus = json::object();
        for (const auto& [doc, label] : f.consensus) consensus[doc] = label;
        out[id] = json{{"consensus", std::move(consensus)},
                       {"closed_buckets", std::move(closed)},
                       {"annotation_rows", f.rows},
                       {"late", f.late},
                       {"model_version", f.model_version},
                       {"documents", f.docs.size()}};
    }
    return out;
}

namespace {

void diff_states(const json& expected, const json& actual, const std::string& what, std::vector<std::string>& out) {
    std::set<std::string> ids;
    for (const auto& [id, v] : expected.items()) ids.insert(id);
    for (const auto& [id, v] : actual.items()) ids.insert(id);
    for (const auto& id : ids) {
        const json e = expected.value(id, json::object());
        const json a = actual.value(id, json::object());
        for (const char* key : {"consensus", "closed_buckets", "annotation_rows", "late", "model_version", "documents"}) {
            const json ev = e.value(key, json());
            const json av = a.value(key, json());
            // An empty fold and an absent project are the same state.
            const bool both_empty = (ev.is_null() || ev.empty() || ev == 0) && (av.is_null() || av.empty() || av == 0);
            if (ev != av && !both_empty) out.push_back(what + ": project '" + id + "' differs in " + key);
        }
    }
}

}  // namespace

ReplayReport replay_check(const fs::path& data_dir) {
    ReplayReport report;
    PlatformOptions opts;
    opts.data_dir = data_dir;
    opts.read_only = true;
    opts.snapshot_on_close = false;
    Platform platform(opts);
    report.warnings = platform.warnings();

    const auto records = platform.log().replay(0);
    report.events = records.size();
    diff_states(reduce_events(records), comparable_state(platform.state()), "rebuild vs log fold", report.problems);

    if (auto snap = load_latest_snapshot(data_dir / kSnapshotDir)) {
        if (snap->next_sequence > records.size()) {
            report.problems.push_back("snapshot covers " + std::to_string(snap->next_sequence) +
                                      " events but the log holds " + std::to_string(records.size()));
        } else {
            std::span<const EventRecord> prefix(records.data(), snap->next_sequence);
            diff_states(reduce_events(prefix), comparable_state(snap->state), "snapshot vs log fold", report.problems);
        }
    }
    report.ok = report.problems.empty();
    return report;
}

}  // namespace crowdtrend
