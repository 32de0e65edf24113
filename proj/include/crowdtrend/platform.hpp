#pragma once

#include "crowdtrend/annotations.hpp"
#include "crowdtrend/ingest.hpp"
#include "crowdtrend/pipeline.hpp"
#include "crowdtrend/store.hpp"
#include "crowdtrend/trends.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace crowdtrend {

class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PlatformOptions {
    std::filesystem::path data_dir;
    std::size_t workers = 1;
    std::size_t intake_capacity = 10'000;
    SyncMode sync = SyncMode::Fsync;
    std::shared_ptr<Clock> clock;  // SystemClock when null
    RetryPolicy persist_retry{};
    bool snapshot_on_close = true;
    /// Rebuild only: no queue repopulation side effects, no snapshot.
    bool read_only = false;
};

struct CreateResult {
    std::shared_ptr<const Project> project;
    bool created = false;  // false: an existing project got a new sequence version
};

struct RetrainResult {
    std::uint64_t version = 0;
    std::size_t examples = 0;
    std::size_t reprioritized = 0;
};

/// Everything behind the service: project registry, ingest pipeline, label
/// queues, annotation books, trend accumulators, models, and the event log.
/// State is rebuilt from the log when the platform opens.
class Platform {
public:
    explicit Platform(PlatformOptions options);
    ~Platform();
    Platform(const Platform&) = delete;
    Platform& operator=(const Platform&) = delete;

    Clock& clock() { return *clock_; }
    const std::filesystem::path& data_dir() const { return options_.data_dir; }
    EventLog& log() { return *log_; }

    // Projects. create_project throws ProjectConfigError.
    CreateResult create_project(const nlohmann::json& config);
    std::vector<std::string> project_ids() const;
    std::shared_ptr<const Project> project(const std::string& id) const;
    std::optional<std::string> document_text(const std::string& project_id, const std::string& doc_id) const;

    // Ingest. submit() blocks for backpressure.
    bool submit(const std::string& project_id, Document doc);
    void drain();
    IngestStats ingest(const std::string& project_id, DocumentStream& stream);

    // Annotation.
    std::optional<SessionStart> next(const std::string& project_id, const std::string& user_id);
    AnswerOutcome answer(const std::string& project_id, const std::string& user_id, const std::string& doc_id,
                         const std::string& question_id, const std::string& answer_id);
    std::vector<ConsensusLabel> close_annotations(const std::string& project_id);

    // Trends.
    std::vector<TrendPoint> trends(const std::string& project_id, Timestamp from, Timestamp to) const;
    /// Whole data range through the last closed bucket; `recompute`
    /// re-predicts every stored document with the latest model first.
    std::vector<TrendPoint> trends_all(const std::string& project_id, bool recompute = false) const;

    QueueSnapshot queue_snapshot(const std::string& project_id) const;
    nlohmann::json metrics() const;

    /// Closes buckets past the grace period and retrains where the policy
    /// says so. Returns the number of retrains run.
    std::size_t tick(bool allow_retrain = true);
    /// True when the retrain policy would fire now.
    bool retrain_due(const std::string& project_id) const;
    /// Manual retrain; nullopt when there is nothing to train on.
    std::optional<RetrainResult> retrain(const std::string& project_id);
    std::optional<std::uint64_t> model_version(const std::string& project_id) const;

    /// Consensus labels, model versions, closed buckets and counters per project.
    nlohmann::json state() const;
    void write_snapshot();
    /// Drains the pipeline, stops workers and writes a snapshot.
    void close();

    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    struct Runtime;

    Runtime& runtime(const std::string& id) const;
    Runtime& install(std::shared_ptr<const Project> project);
    void persist_project_version(const Project& project);
    void load_projects();
    void rebuild();
    void handle(const Job& job);
    std::optional<RetrainResult> retrain_locked(Runtime& rt, Timestamp now);
    void publish_model(Runtime& rt, std::shared_ptr<const Model> model, std::size_t examples, Timestamp now,
                       bool persist);
    std::vector<LabelledExample> training_set(const Runtime& rt) const;
    std::size_t tick_runtime(Runtime& rt, Timestamp now, bool allow_retrain);
    bool due_locked(Runtime& rt, Timestamp now) const;

    PlatformOptions options_;
    std::shared_ptr<Clock> clock_;
    std::unique_ptr<EventLog> log_;
    mutable std::shared_mutex projects_mu_;
    std::map<std::string, std::unique_ptr<Runtime>> runtimes_;
    std::unique_ptr<Pipeline> pipeline_;
    std::vector<std::string> warnings_;
    std::atomic<std::uint64_t> ingest_rejected_{0};
    std::atomic<std::uint64_t> ingest_duplicates_{0};
    bool closed_ = false;
    std::mutex close_mu_;
};

/// Folds raw log records into the same shape as Platform::state(), without
/// touching any platform code paths. Used by replay verification.
nlohmann::json reduce_events(std::span<const EventRecord> records);

/// The subset of state() that is a pure function of the log.
nlohmann::json comparable_state(const nlohmann::json& state);

struct ReplayReport {
    std::uint64_t events = 0;
    bool ok = true;
    std::vector<std::string> problems;
    std::vector<std::string> warnings;
};

/// Recovers the log tail, rebuilds state, and checks it against an
/// independent fold of the log and against the newest snapshot.
ReplayReport replay_check(const std::filesystem::path& data_dir);

}  // namespace crowdtrend
