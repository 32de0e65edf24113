#include "crowdtrend/annotations.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>

namespace crowdtrend {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Sequences

bool Question::has_answer(const std::string& answer_id) const {
    return std::any_of(answers.begin(), answers.end(), [&](const Answer& a) { return a.id == answer_id; });
}

const Question* QuestionSequence::find(const std::string& question_id) const {
    auto it = std::find_if(questions.begin(), questions.end(), [&](const Question& q) { return q.id == question_id; });
    return it == questions.end() ? nullptr : &*it;
}

std::optional<std::string> QuestionSequence::next(const std::string& question_id, const std::string& answer_id) const {
    auto it = transitions.find({question_id, answer_id});
    if (it == transitions.end()) return std::nullopt;
    return it->second;
}

const char* to_string(SequenceViolation::Kind k) {
    using K = SequenceViolation::Kind;
    switch (k) {
        case K::MissingStart: return "missing_start";
        case K::DuplicateQuestion: return "duplicate_question";
        case K::DuplicateAnswer: return "duplicate_answer";
        case K::NoAnswers: return "no_answers";
        case K::DanglingTransition: return "dangling_transition";
        case K::UnknownAnswer: return "unknown_answer";
        case K::Cycle: return "cycle";
        case K::Unreachable: return "unreachable";
    }
    return "unknown";
}

std::vector<SequenceViolation> validate_sequence(const QuestionSequence& seq) {
    using K = SequenceViolation::Kind;
    std::vector<SequenceViolation> out;

    std::map<std::string, const Question*> by_id;
    for (const auto& q : seq.questions) {
        if (!by_id.emplace(q.id, &q).second) out.push_back({K::DuplicateQuestion, q.id});
        if (q.answers.empty()) out.push_back({K::NoAnswers, q.id});
        std::set<std::string> seen;
        for (const auto& a : q.answers) {
            if (!seen.insert(a.id).second) out.push_back({K::DuplicateAnswer, q.id + "/" + a.id});
        }
    }
    if (!by_id.contains(seq.start)) out.push_back({K::MissingStart, seq.start});

    std::map<std::string, std::vector<std::string>> edges;
    for (const auto& [key, target] : seq.transitions) {
        const auto& [from, answer] = key;
        auto src = by_id.find(from);
        if (src == by_id.end()) {
            out.push_back({K::DanglingTransition, from + "/" + answer + " -> " + target + ": unknown source question"});
            continue;
        }
        if (!src->second->has_answer(answer)) out.push_back({K::UnknownAnswer, from + "/" + answer});
        if (!by_id.contains(target)) {
            out.push_back({K::DanglingTransition, from + "/" + answer + " -> " + target + ": unknown target question"});
            continue;
        }
        edges[from].push_back(target);
    }

    // Cycle detection: iterative DFS with colours.
    std::map<std::string, int> colour;  // 0 white, 1 grey, 2 black
    std::set<std::string> reported;
    for (const auto& q : seq.questions) {
        if (colour[q.id] != 0) continue;
        std::vector<std::pair<std::string, std::size_t>> stack{{q.id, 0}};
        colour[q.id] = 1;
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            const auto& next = edges[node];
            if (idx < next.size()) {
                const std::string target = next[idx++];
                if (colour[target] == 1) {
                    if (reported.insert(node + "->" + target).second)
                        out.push_back({K::Cycle, node + " -> " + target});
                } else if (colour[target] == 0) {
                    colour[target] = 1;
                    stack.emplace_back(target, 0);
                }
            } else {
                colour[node] = 2;
                stack.pop_back();
            }
        }
    }

    if (by_id.contains(seq.start)) {
        std::set<std::string> reached{seq.start};
        std::deque<std::string> todo{seq.start};
        while (!todo.empty()) {
            auto node = todo.front();
            todo.pop_front();
            for (const auto& t : edges[node]) {
                if (reached.insert(t).second) todo.push_back(t);
            }
        }
        for (const auto& q : seq.questions) {
            if (!reached.contains(q.id)) out.push_back({K::Unreachable, q.id});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Project config

ProjectConfigError::ProjectConfigError(std::vector<Item> items)
    : std::runtime_error([&] {
          std::string msg = "invalid project config";
          for (const auto& i : items) msg += "; " + i.field + ": " + i.message;
          return msg;
      }()),
      items_(std::move(items)) {}

namespace {

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    return it->get<T>();
}

std::optional<UncertaintyMeasure> measure_from_string(std::string_view s) {
    if (s == "least_confidence") return UncertaintyMeasure::LeastConfidence;
    if (s == "margin") return UncertaintyMeasure::Margin;
    if (s == "entropy") return UncertaintyMeasure::Entropy;
    return std::nullopt;
}

const char* measure_name(UncertaintyMeasure m) {
    switch (m) {
        case UncertaintyMeasure::LeastConfidence: return "least_confidence";
        case UncertaintyMeasure::Margin: return "margin";
        case UncertaintyMeasure::Entropy: return "entropy";
    }
    return "least_confidence";
}

}  // namespace

Project parse_project(const json& config) {
    using Item = ProjectConfigError::Item;
    std::vector<Item> errors;
    if (!config.is_object()) throw ProjectConfigError({{"", "config must be a JSON object", std::nullopt}});

    auto guarded = [&](const char* field, auto&& fn) {
        try {
            fn();
        } catch (const ProjectConfigError&) {
            throw;
        } catch (const json::exception& e) {
            errors.push_back({field, e.what(), std::nullopt});
        } catch (const std::invalid_argument& e) {
            errors.push_back({field, e.what(), std::nullopt});
        }
    };

    std::string id = get_or<std::string>(config, "id", "");
    if (id.empty()) errors.push_back({"id", "project id is required", std::nullopt});
    if (id.find_first_of("/?#& ") != std::string::npos) errors.push_back({"id", "id may not contain / ? # & or spaces", std::nullopt});

    std::string query_source;
    std::vector<std::string> keywords;
    std::optional<FilterQuery> filter;
    guarded("query", [&] {
        query_source = get_or<std::string>(config, "query", "");
        keywords = get_or<std::vector<std::string>>(config, "keywords", {});
        try {
            filter = compile_filter(query_source, keywords);
        } catch (const QueryParseError& e) {
            errors.push_back({"query", e.detail(), e.offset()});
        }
    });

    QuestionSequence seq;
    guarded("questions", [&] {
        for (const auto& q : config.at("questions")) {
            Question question{q.at("id").get<std::string>(), get_or<std::string>(q, "prompt", ""), {}};
            for (const auto& a : q.at("answers")) {
                question.answers.push_back({a.at("id").get<std::string>(), get_or<std::string>(a, "label", "")});
            }
            seq.questions.push_back(std::move(question));
        }
        for (const auto& t : get_or<json>(config, "transitions", json::array())) {
            auto key = std::pair{t.at("from").get<std::string>(), t.at("answer").get<std::string>()};
            if (!seq.transitions.emplace(key, t.at("to").get<std::string>()).second)
                errors.push_back({"transitions", "duplicate transition for " + key.first + "/" + key.second, std::nullopt});
        }
        seq.start = get_or<std::string>(config, "start", seq.questions.empty() ? "" : seq.questions.front().id);
        for (const auto& v : validate_sequence(seq)) {
            errors.push_back({"questions", std::string(to_string(v.kind)) + ": " + v.detail, std::nullopt});
        }
    });

    std::string sentiment_question = get_or<std::string>(config, "sentiment_question", "");
    std::map<std::pair<std::string, std::string>, TrendClass> class_map;
    guarded("class_map", [&] {
        for (const auto& m : config.at("class_map")) {
            auto cls = trend_class_from_string(m.at("class").get<std::string>());
            auto key = std::pair{m.at("question").get<std::string>(), m.at("answer").get<std::string>()};
            if (!cls) {
                errors.push_back({"class_map", "unknown class '" + m.at("class").get<std::string>() + "'", std::nullopt});
                continue;
            }
            const Question* q = seq.find(key.first);
            if (!q || !q->has_answer(key.second)) {
                errors.push_back({"class_map", "no such answer " + key.first + "/" + key.second, std::nullopt});
                continue;
            }
            class_map[key] = *cls;
        }
        const Question* sq = seq.find(sentiment_question);
        if (!sq) {
            errors.push_back({"sentiment_question", "unknown question '" + sentiment_question + "'", std::nullopt});
        } else {
            for (const auto& a : sq->answers) {
                if (!class_map.contains({sq->id, a.id}))
                    errors.push_back({"class_map", "answer " + sq->id + "/" + a.id + " has no class", std::nullopt});
            }
        }
    });

    QueueConfig queue;
    guarded("queue", [&] {
        const json q = get_or<json>(config, "queue", json::object());
        queue.capacity = get_or<std::size_t>(q, "capacity", queue.capacity);
        queue.alpha = get_or<double>(q, "alpha", queue.alpha);
        queue.recency_halflife = std::chrono::duration_cast<Duration>(
            std::chrono::duration<double, std::ratio<3600>>(get_or<double>(q, "recency_halflife_hours", 24.0)));
        queue.consensus_k = get_or<std::size_t>(q, "consensus_k", queue.consensus_k);
        queue.lease = std::chrono::duration_cast<Duration>(
            std::chrono::duration<double, std::ratio<60>>(get_or<double>(q, "lease_minutes", 10.0)));
        queue.validate();
    });

    ClassifierSettings cls;
    guarded("classifier", [&] {
        const json c = get_or<json>(config, "classifier", json::object());
        cls.hyperparams.learning_rate = get_or<double>(c, "learning_rate", cls.hyperparams.learning_rate);
        cls.hyperparams.epochs = get_or<int>(c, "epochs", cls.hyperparams.epochs);
        cls.hyperparams.l2 = get_or<double>(c, "l2", cls.hyperparams.l2);
        cls.hyperparams.batch_size = get_or<std::size_t>(c, "batch_size", cls.hyperparams.batch_size);
        cls.hyperparams.inverse_frequency_weighting =
            get_or<bool>(c, "inverse_frequency_weighting", cls.hyperparams.inverse_frequency_weighting);
        cls.retrain.batch_threshold = get_or<std::size_t>(c, "retrain_batch", cls.retrain.batch_threshold);
        cls.retrain.max_interval = std::chrono::duration_cast<Duration>(
            std::chrono::duration<double, std::ratio<3600>>(get_or<double>(c, "retrain_interval_hours", 24.0)));
        auto m = measure_from_string(get_or<std::string>(c, "uncertainty", "least_confidence"));
        if (!m) throw std::invalid_argument("uncertainty must be least_confidence, margin or entropy");
        cls.measure = *m;
        cls.seed = get_or<std::uint64_t>(c, "seed", cls.seed);
        cls.feature_dim = get_or<std::uint32_t>(c, "feature_dim", cls.feature_dim);
        cls.seed_labels = get_or<std::string>(c, "seed_labels", "");
        if (cls.feature_dim == 0) throw std::invalid_argument("feature_dim must be positive");
        if (cls.hyperparams.learning_rate <= 0 || cls.hyperparams.epochs < 1 || cls.hyperparams.l2 < 0)
            throw std::invalid_argument("learning_rate > 0, epochs >= 1 and l2 >= 0 required");
        if (cls.retrain.batch_threshold == 0) throw std::invalid_argument("retrain_batch must be positive");
    });

    TrendSettings trends;
    guarded("trends", [&] {
        const json t = get_or<json>(config, "trends", json::object());
        trends.epsilon = get_or<double>(t, "epsilon", trends.epsilon);
        trends.close_grace = std::chrono::duration_cast<Duration>(
            std::chrono::duration<double, std::ratio<60>>(get_or<double>(t, "close_grace_minutes", 60.0)));
        if (!(trends.epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
    });

    if (!errors.empty() || !filter) {
        if (errors.empty()) errors.push_back({"query", "no filter", std::nullopt});
        throw ProjectConfigError(std::move(errors));
    }

    Project p{.id = std::move(id),
              .title = get_or<std::string>(config, "title", ""),
              .query_source = std::move(query_source),
              .keywords = std::move(keywords),
              .filter = std::move(*filter),
              .sequence = std::move(seq),
              .sequence_version = 1,
              .sentiment_question = std::move(sentiment_question),
              .class_map = std::move(class_map),
              .queue = queue,
              .classifier = cls,
              .trends = trends,
              .source = config};
    return p;
}

json describe_project(const Project& p) {
    json questions = json::array();
    for (const auto& q : p.sequence.questions) {
        json answers = json::array();
        for (const auto& a : q.answers) answers.push_back({{"id", a.id}, {"label", a.label}});
        questions.push_back({{"id", q.id}, {"prompt", q.prompt}, {"answers", answers}});
    }
    json transitions = json::array();
    for (const auto& [k, to] : p.sequence.transitions) {
        transitions.push_back({{"from", k.first}, {"answer", k.second}, {"to", to}});
    }
    json class_map = json::array();
    for (const auto& [k, c] : p.class_map) {
        class_map.push_back({{"question", k.first}, {"answer", k.second}, {"class", std::string(to_string(c))}});
    }
    return {{"id", p.id},
            {"title", p.title},
            {"query", p.query_source},
            {"keywords", p.keywords},
            {"filter", print_query(p.filter)},
            {"questions", questions},
            {"transitions", transitions},
            {"start", p.sequence.start},
            {"sequence_version", p.sequence_version},
            {"sentiment_question", p.sentiment_question},
            {"class_map", class_map},
            {"queue",
             {{"capacity", p.queue.capacity},
              {"alpha", p.queue.alpha},
              {"recency_halflife_hours", std::chrono::duration<double, std::ratio<3600>>(p.queue.recency_halflife).count()},
              {"consensus_k", p.queue.consensus_k},
              {"lease_minutes", std::chrono::duration<double, std::ratio<60>>(p.queue.lease).count()}}},
            {"classifier",
             {{"learning_rate", p.classifier.hyperparams.learning_rate},
              {"epochs", p.classifier.hyperparams.epochs},
              {"l2", p.classifier.hyperparams.l2},
              {"batch_size", p.classifier.hyperparams.batch_size},
              {"inverse_frequency_weighting", p.classifier.hyperparams.inverse_frequency_weighting},
              {"retrain_batch", p.classifier.retrain.batch_threshold},
              {"retrain_interval_hours",
               std::chrono::duration<double, std::ratio<3600>>(p.classifier.retrain.max_interval).count()},
              {"uncertainty", measure_name(p.classifier.measure)},
              {"seed", p.classifier.seed},
              {"feature_dim", p.classifier.feature_dim}}},
            {"trends", {{"epsilon", p.trends.epsilon}}}};
}

// ---------------------------------------------------------------------------
// Rows and consensus records

json to_json(const AnnotationRow& r) {
    return {{"user_id", r.user_id},         {"doc_id", r.doc_id},
            {"project_id", r.project_id},   {"question_id", r.question_id},
            {"answer_id", r.answer_id},     {"answered_at", format_timestamp(r.answered_at)},
            {"session_id", r.session_id},   {"sequence_version", r.sequence_version}};
}

AnnotationRow annotation_row_from_json(const json& j) {
    AnnotationRow r;
    r.user_id = j.at("user_id").get<std::string>();
    r.doc_id = j.at("doc_id").get<std::string>();
    r.project_id = j.at("project_id").get<std::string>();
    r.question_id = j.at("question_id").get<std::string>();
    r.answer_id = j.at("answer_id").get<std::string>();
    auto ts = parse_timestamp(j.at("answered_at").get<std::string>());
    if (!ts) throw std::invalid_argument("bad answered_at");
    r.answered_at = *ts;
    r.session_id = j.at("session_id").get<std::string>();
    r.sequence_version = j.value("sequence_version", 1u);
    return r;
}

json to_json(const ConsensusLabel& c) {
    return {{"doc_id", c.doc_id},
            {"project_id", c.project_id},
            {"label", c.label ? json(std::string(to_string(*c.label))) : json(nullptr)},
            {"support", c.support},
            {"total", c.total},
            {"resolved_at", format_timestamp(c.resolved_at)}};
}

ConsensusLabel consensus_from_json(const json& j) {
    ConsensusLabel c;
    c.doc_id = j.at("doc_id").get<std::string>();
    c.project_id = j.at("project_id").get<std::string>();
    if (!j.at("label").is_null()) {
        c.label = trend_class_from_string(j.at("label").get<std::string>());
        if (!c.label) throw std::invalid_argument("bad consensus label");
    }
    c.support = j.at("support").get<std::size_t>();
    c.total = j.at("total").get<std::size_t>();
    auto ts = parse_timestamp(j.at("resolved_at").get<std::string>());
    if (!ts) throw std::invalid_argument("bad resolved_at");
    c.resolved_at = *ts;
    return c;
}

MajorityResult strict_majority(std::span<const TrendClass> votes) {
    MajorityResult r;
    r.total = votes.size();
    std::array<std::size_t, kTrendClassCount> counts{};
    for (auto v : votes) ++counts[index_of(v)];
    for (auto c : kAllTrendClasses) {
        if (2 * counts[index_of(c)] > r.total) {
            r.winner = c;
            r.support = counts[index_of(c)];
        }
    }
    if (!r.winner) r.support = r.total == 0 ? 0 : *std::max_element(counts.begin(), counts.end());
    return r;
}

std::optional<TrendClass> session_vote(const Project& project, std::span<const AnnotationRow> rows) {
    std::optional<TrendClass> vote;
    for (const auto& r : rows) {
        auto it = project.class_map.find({r.question_id, r.answer_id});
        if (it != project.class_map.end()) vote = it->second;
    }
    return vote;
}

bool is_complete_path(const QuestionSequence& seq, std::span<const AnnotationRow> rows) {
    if (rows.empty()) return false;
    std::string expected = seq.start;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.question_id != expected) return false;
        const Question* q = seq.find(r.question_id);
        if (!q || !q->has_answer(r.answer_id)) return false;
        auto next = seq.next(r.question_id, r.answer_id);
        if (!next) return i + 1 == rows.size();
        expected = *next;
    }
    return false;
}

// ---------------------------------------------------------------------------
// AnnotationBook

const char* to_string(AnnotationError::Code c) {
    switch (c) {
        case AnnotationError::Code::UnknownSession: return "unknown_session";
        case AnnotationError::Code::OutOfOrder: return "out_of_order";
        case AnnotationError::Code::LeaseExpired: return "lease_expired";
        case AnnotationError::Code::UnknownAnswer: return "unknown_answer";
        case AnnotationError::Code::NoCompletedSessions: return "no_completed_sessions";
    }
    return "unknown";
}

AnnotationBook::AnnotationBook(std::shared_ptr<const Project> project, LabelQueue& queue, AnnotationSink sink)
    : current_(std::move(project)), queue_(queue), sink_(std::move(sink)) {
    versions_[current_->sequence_version] = current_;
}

void AnnotationBook::update_project(std::shared_ptr<const Project> project) {
    std::lock_guard lock(mu_);
    versions_[project->sequence_version] = project;
    current_ = std::move(project);
}

std::shared_ptr<const Project> AnnotationBook::project() const {
    std::lock_guard lock(mu_);
    return current_;
}

const Project& AnnotationBook::version(std::uint32_t v) const {
    auto it = versions_.find(v);
    return it == versions_.end() ? *current_ : *it->second;
}

std::optional<SessionStart> AnnotationBook::start_session(const std::string& user_id, Timestamp now) {
    std::lock_guard lock(mu_);
    auto doc = queue_.next_for_user(user_id, now);
    if (!doc) return std::nullopt;
    auto& state = docs_[*doc];
    Session s;
    s.session_id = *doc + "/" + user_id + "/" + std::to_string(++state.attempts);
    s.project = current_;
    s.current_question = current_->sequence.start;
    live_[{user_id, *doc}] = s;
    return SessionStart{*doc, s.session_id, current_->sequence.find(s.current_question)};
}

AnswerOutcome AnnotationBook::submit_answer(const std::string& user_id, const std::string& doc_id,
                                            const std::string& question_id, const std::string& answer_id,
                                            Timestamp now) {
    std::lock_guard lock(mu_);
    auto it = live_.find({user_id, doc_id});
    if (it == live_.end())
        throw AnnotationError(AnnotationError::Code::UnknownSession, "no open session for this user and document");
    Session& s = it->second;
    if (!queue_.holds_lease(user_id, doc_id, now)) {
        // Partial rows stay in the log; without a terminal pair they never count.
        live_.erase(it);
        throw AnnotationError(AnnotationError::Code::LeaseExpired, "assignment lease expired");
    }
    if (question_id != s.current_question)
        throw AnnotationError(AnnotationError::Code::OutOfOrder,
                              "expected an answer to '" + s.current_question + "', got '" + question_id + "'");
    const auto& seq = s.project->sequence;
    const Question* q = seq.find(question_id);
    if (!q || !q->has_answer(answer_id))
        throw AnnotationError(AnnotationError::Code::UnknownAnswer, "'" + answer_id + "' is not an answer of '" + question_id + "'");

    AnswerOutcome out;
    out.row = AnnotationRow{user_id, doc_id, s.project->id, question_id, answer_id, now, s.session_id,
                            s.project->sequence_version};
    if (sink_.on_row) sink_.on_row(out.row);
    ++rows_;
    s.rows.push_back(out.row);

    if (auto next = seq.next(question_id, answer_id)) {
        s.current_question = *next;
        out.next_question = seq.find(*next);
        return out;
    }

    out.completed = true;
    auto rows = std::move(s.rows);
    live_.erase(it);
    const auto status = queue_.complete(user_id, doc_id, now);
    record_completion(user_id, doc_id, std::move(rows));
    if (status == CompleteStatus::ConsensusReady) out.consensus = resolve_locked(doc_id, now);
    return out;
}

void AnnotationBook::record_completion(const std::string& user_id, const std::string& doc_id,
                                       std::vector<AnnotationRow> rows) {
    auto& state = docs_[doc_id];
    if (!state.completed_users.insert(user_id).second) return;
    state.completed.emplace_back(user_id, std::move(rows));
}

ConsensusLabel AnnotationBook::resolve_locked(const std::string& doc_id, Timestamp now) {
    auto it = docs_.find(doc_id);
    if (it == docs_.end() || it->second.completed.empty())
        throw AnnotationError(AnnotationError::Code::NoCompletedSessions, "document has no completed sessions");
    auto& state = it->second;
    if (state.consensus) return *state.consensus;

    std::vector<TrendClass> votes;
    for (const auto& [user, rows] : state.completed) {
        if (rows.empty()) continue;
        if (auto v = session_vote(version(rows.front().sequence_version), rows)) votes.push_back(*v);
    }
    auto majority = strict_majority(votes);
    ConsensusLabel label{doc_id, current_->id, majority.winner, majority.support, majority.total, now};
    state.consensus = label;
    if (sink_.on_consensus) sink_.on_consensus(label);
    return label;
}

ConsensusLabel AnnotationBook::resolve_consensus(const std::string& doc_id, Timestamp now) {
    std::lock_guard lock(mu_);
    return resolve_locked(doc_id, now);
}

std::vector<ConsensusLabel> AnnotationBook::resolve_pending(Timestamp now) {
    std::lock_guard lock(mu_);
    std::vector<ConsensusLabel> out;
    for (auto& [doc, state] : docs_) {
        if (!state.consensus && !state.completed.empty()) out.push_back(resolve_locked(doc, now));
    }
    return out;
}

void AnnotationBook::replay_row(const AnnotationRow& row) {
    std::lock_guard lock(mu_);
    ++rows_;
    auto& rows = replay_sessions_[row.session_id];
    rows.push_back(row);
    auto& state = docs_[row.doc_id];
    state.attempts = std::max<std::size_t>(state.attempts, [&] {
        // session ids end in "/<attempt>"
        auto pos = row.session_id.rfind('/');
        try {
            return pos == std::string::npos ? std::size_t{0} : std::stoul(row.session_id.substr(pos + 1));
        } catch (const std::exception&) {
            return std::size_t{0};
        }
    }());
    if (is_complete_path(version(row.sequence_version).sequence, rows)) {
        record_completion(row.user_id, row.doc_id, std::move(rows));
        replay_sessions_.erase(row.session_id);
    }
}

void AnnotationBook::replay_consensus(const ConsensusLabel& label) {
    std::lock_guard lock(mu_);
    docs_[label.doc_id].consensus = label;
}

bool AnnotationBook::user_completed(const std::string& user_id, const std::string& doc_id) const {
    std::lock_guard lock(mu_);
    auto it = docs_.find(doc_id);
    return it != docs_.end() && it->second.completed_users.contains(user_id);
}

std::vector<std::string> AnnotationBook::completed_users(const std::string& doc_id) const {
    std::lock_guard lock(mu_);
    auto it = docs_.find(doc_id);
    if (it == docs_.end()) return {};
    std::vector<std::string> out;
    for (const auto& [user, rows] : it->second.completed) out.push_back(user);
    return out;
}

std::map<std::string, ConsensusLabel> AnnotationBook::consensus_labels() const {
    std::lock_guard lock(mu_);
    std::map<std::string, ConsensusLabel> out;
    for (const auto& [doc, state] : docs_) {
        if (state.consensus) out.emplace(doc, *state.consensus);
    }
    return out;
}

std::size_t AnnotationBook::row_count() const {
    std::lock_guard lock(mu_);
    return rows_;
}

bool AnnotationBook::resolved(const std::string& doc_id) const {
    std::lock_guard lock(mu_);
    auto it = docs_.find(doc_id);
    return it != docs_.end() && it->second.consensus.has_value();
}

}  // namespace crowdtrend
