#pragma once

#include "crowdtrend/classifier.hpp"
#include "crowdtrend/filterlang.hpp"
#include "crowdtrend/labelqueue.hpp"
#include "crowdtrend/time.hpp"
#include "crowdtrend/trend_class.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace crowdtrend {

// ---------------------------------------------------------------------------
// Question sequences

struct Answer {
    std::string id;
    std::string label;
};

struct Question {
    std::string id;
    std::string prompt;
    std::vector<Answer> answers;

    bool has_answer(const std::string& answer_id) const;
};

/// Questions connected by answer-driven transitions. A (question, answer)
/// pair without a transition ends the sequence.
struct QuestionSequence {
    std::vector<Question> questions;
    std::map<std::pair<std::string, std::string>, std::string> transitions;
    std::string start;

    const Question* find(const std::string& question_id) const;
    std::optional<std::string> next(const std::string& question_id, const std::string& answer_id) const;
};

struct SequenceViolation {
    enum class Kind {
        MissingStart,
        DuplicateQuestion,
        DuplicateAnswer,
        NoAnswers,
        DanglingTransition,
        UnknownAnswer,
        Cycle,
        Unreachable
    };
    Kind kind;
    std::string detail;
};

const char* to_string(SequenceViolation::Kind k);

/// Reports every violation found; an empty result means the sequence is valid.
std::vector<SequenceViolation> validate_sequence(const QuestionSequence& seq);

// ---------------------------------------------------------------------------
// Projects

struct ClassifierSettings {
    Hyperparams hyperparams{};
    RetrainPolicy retrain{};
    UncertaintyMeasure measure = UncertaintyMeasure::LeastConfidence;
    std::uint64_t seed = 1;
    std::uint32_t feature_dim = kDefaultFeatureDim;
    std::string seed_labels;  // optional NDJSON of {text, label}
};

struct TrendSettings {
    double epsilon = 1.0;
    Duration close_grace = std::chrono::hours{1};
};

struct Project {
    std::string id;
    std::string title;
    std::string query_source;
    std::vector<std::string> keywords;
    FilterQuery filter;
    QuestionSequence sequence;
    std::uint32_t sequence_version = 1;
    std::string sentiment_question;
    std::map<std::pair<std::string, std::string>, TrendClass> class_map;
    QueueConfig queue{};
    ClassifierSettings classifier{};
    TrendSettings trends{};
    nlohmann::json source;  // the config as submitted
};

/// Config validation failure. `errors` lists every problem; query parse
/// errors also carry the byte offset.
class ProjectConfigError : public std::runtime_error {
public:
    struct Item {
        std::string field;
        std::string message;
        std::optional<std::size_t> offset;
    };
    explicit ProjectConfigError(std::vector<Item> items);
    const std::vector<Item>& items() const { return items_; }

private:
    std::vector<Item> items_;
};

Project parse_project(const nlohmann::json& config);
nlohmann::json describe_project(const Project& project);

// ---------------------------------------------------------------------------
// Annotation records

struct AnnotationRow {
    std::string user_id;
    std::string doc_id;
    std::string project_id;
    std::string question_id;
    std::string answer_id;
    Timestamp answered_at;
    std::string session_id;
    std::uint32_t sequence_version = 1;

    friend bool operator==(const AnnotationRow&, const AnnotationRow&) = default;
};

nlohmann::json to_json(const AnnotationRow& row);
AnnotationRow annotation_row_from_json(const nlohmann::json& j);

/// Consensus outcome; `label` is empty when the vote was undecided.
struct ConsensusLabel {
    std::string doc_id;
    std::string project_id;
    std::optional<TrendClass> label;
    std::size_t support = 0;
    std::size_t total = 0;
    Timestamp resolved_at;

    bool decided() const { return label.has_value(); }
    friend bool operator==(const ConsensusLabel&, const ConsensusLabel&) = default;
};

nlohmann::json to_json(const ConsensusLabel& c);
ConsensusLabel consensus_from_json(const nlohmann::json& j);

struct MajorityResult {
    std::optional<TrendClass> winner;
    std::size_t support = 0;
    std::size_t total = 0;
};

/// Strict majority over all votes; ties and pluralities are undecided.
MajorityResult strict_majority(std::span<const TrendClass> votes);

/// The vote a completed session casts: the last answered pair that appears
/// in the class map, if any.
std::optional<TrendClass> session_vote(const Project& project, std::span<const AnnotationRow> rows);

/// True when the rows trace start → ... → terminal pair in the sequence.
bool is_complete_path(const QuestionSequence& seq, std::span<const AnnotationRow> rows);

// ---------------------------------------------------------------------------
// Sessions

class AnnotationError : public std::runtime_error {
public:
    enum class Code { UnknownSession, OutOfOrder, LeaseExpired, UnknownAnswer, NoCompletedSessions };
    AnnotationError(Code code, const std::string& message) : std::runtime_error(message), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

const char* to_string(AnnotationError::Code c);

struct SessionStart {
    std::string doc_id;
    std::string session_id;
    const Question* question;
};

struct AnswerOutcome {
    AnnotationRow row;
    const Question* next_question = nullptr;  // null when the sequence completed
    bool completed = false;
    std::optional<ConsensusLabel> consensus;  // set when this completion resolved the doc
};

/// Receives every durable fact produced by a book; the platform persists them.
struct AnnotationSink {
    std::function<void(const AnnotationRow&)> on_row;
    std::function<void(const ConsensusLabel&)> on_consensus;
};

/// Session traversal, relabel prevention and consensus for one project.
class AnnotationBook {
public:
    AnnotationBook(std::shared_ptr<const Project> project, LabelQueue& queue, AnnotationSink sink);

    /// Installs a new sequence version. Sessions already running keep the
    /// version they started with.
    void update_project(std::shared_ptr<const Project> project);
    std::shared_ptr<const Project> project() const;

    std::optional<SessionStart> start_session(const std::string& user_id, Timestamp now);

    AnswerOutcome submit_answer(const std::string& user_id, const std::string& doc_id,
                                const std::string& question_id, const std::string& answer_id, Timestamp now);

    /// Majority over completed sessions; idempotent per document.
    ConsensusLabel resolve_consensus(const std::string& doc_id, Timestamp now);

    /// Resolves every document with completed sessions that has not been
    /// resolved yet (project close).
    std::vector<ConsensusLabel> resolve_pending(Timestamp now);

    /// Rebuild path: feeds back a persisted row / consensus.
    void replay_row(const AnnotationRow& row);
    void replay_consensus(const ConsensusLabel& label);

    bool user_completed(const std::string& user_id, const std::string& doc_id) const;
    std::vector<std::string> completed_users(const std::string& doc_id) const;
    std::map<std::string, ConsensusLabel> consensus_labels() const;
    std::size_t row_count() const;
    bool resolved(const std::string& doc_id) const;

private:
    struct Session {
        std::string session_id;
        std::shared_ptr<const Project> project;
        std::string current_question;
        std::vector<AnnotationRow> rows;
    };
    struct DocState {
        std::vector<std::pair<std::string, std::vector<AnnotationRow>>> completed;  // (user, rows)
        std::set<std::string> completed_users;
        std::optional<ConsensusLabel> consensus;
        std::size_t attempts = 0;
    };

    ConsensusLabel resolve_locked(const std::string& doc_id, Timestamp now);
    void record_completion(const std::string& user_id, const std::string& doc_id, std::vector<AnnotationRow> rows);

    const Project& version(std::uint32_t v) const;

    std::shared_ptr<const Project> current_;
    std::map<std::uint32_t, std::shared_ptr<const Project>> versions_;
    LabelQueue& queue_;
    AnnotationSink sink_;
    mutable std::mutex mu_;
    std::map<std::pair<std::string, std::string>, Session> live_;  // (user, doc)
    std::map<std::string, DocState> docs_;
    std::map<std::string, std::vector<AnnotationRow>> replay_sessions_;
    std::size_t rows_ = 0;
};

}  // namespace crowdtrend
