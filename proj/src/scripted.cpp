#include "crowdtrend/scripted.hpp"

#include <functional>
#include <unordered_map>

namespace crowdtrend {

using json = nlohmann::json;

std::vector<std::pair<std::string, std::string>> path_for_class(const Project& project, TrendClass target) {
    std::vector<std::pair<std::string, std::string>> path;
    // Depth-first over the (acyclic) sequence; the vote is the last mapped pair.
    std::function<bool(const std::string&, std::optional<TrendClass>)> walk = [&](const std::string& qid,
                                                                                 std::optional<TrendClass> vote) {
        const Question* q = project.sequence.find(qid);
        if (!q) return false;
        for (const auto& a : q->answers) {
            auto v = vote;
            if (auto it = project.class_map.find({qid, a.id}); it != project.class_map.end()) v = it->second;
            path.emplace_back(qid, a.id);
            if (auto next = project.sequence.next(qid, a.id)) {
                if (walk(*next, v)) return true;
            } else if (v == target) {
                return true;
            }
            path.pop_back();
        }
        return false;
    };
    if (!walk(project.sequence.start, std::nullopt)) path.clear();
    return path;
}

json ScriptedRunReport::to_json() const {
    return {{"accepted", ingest.accepted},
            {"rejected", ingest.rejected},
            {"duplicates", ingest.duplicates},
            {"rounds", rounds},
            {"sessions", sessions},
            {"retrains", retrains},
            {"skipped_no_truth", skipped_no_truth}};
}

ScriptedRunReport run_scripted(Platform& platform, const ScriptedRunOptions& options, Sleeper sleeper) {
    ManualClock* manual = nullptr;
    if (options.simulated_clock) {
        manual = dynamic_cast<ManualClock*>(&platform.clock());
        if (!manual) throw std::invalid_argument("simulated clock mode needs a platform opened with a manual clock");
    }
    if (options.round_every == 0) throw std::invalid_argument("round_every must be positive");
    platform.project(options.project_id);  // NotFound for unknown ids

    ScriptedRunReport report;
    std::unordered_map<std::string, TrendClass> truth;

    auto round = [&] {
        platform.drain();
        ++report.rounds;
        const auto project = platform.project(options.project_id);
        for (const auto& user : options.annotators) {
            for (std::size_t i = 0; i < options.labels_per_round; ++i) {
                auto session = platform.next(options.project_id, user);
                if (!session) break;
                auto it = truth.find(session->doc_id);
                if (it == truth.end()) {
                    ++report.skipped_no_truth;
                    break;
                }
                const auto path = path_for_class(*project, it->second);
                if (path.empty()) {
                    ++report.skipped_no_truth;
                    break;
                }
                for (const auto& [q, a] : path) platform.answer(options.project_id, user, session->doc_id, q, a);
                ++report.sessions;
            }
        }
        platform.tick(false);
        if (report.retrains < options.max_retrains && platform.retrain_due(options.project_id)) {
            if (platform.retrain(options.project_id)) ++report.retrains;
        }
    };

    Ingestor ingestor;
    struct Sink final : DocumentSink {
        std::function<bool(Document)> fn;
        bool submit(Document doc) override { return fn(std::move(doc)); }
    } sink;
    std::size_t since_round = 0;
    Timestamp last_seen{};
    sink.fn = [&](Document doc) {
        if (auto t = SyntheticGenerator::truth_of(doc)) truth.emplace(doc.doc_id, *t);
        if (manual) manual->advance_to(doc.created_at);
        last_seen = std::max(last_seen, doc.created_at);
        const bool ok = platform.submit(options.project_id, std::move(doc));
        if (++since_round == options.round_every) {
            since_round = 0;
            round();
        }
        return ok;
    };

    auto stream = open_stream(options.source, std::move(sleeper));
    report.ingest = ingestor.ingest_batch(*stream, sink);
    round();
    if (manual) {
        // Let the final buckets age past the grace period.
        const auto grace = platform.project(options.project_id)->trends.close_grace;
        manual->advance_to(last_seen + grace + kBucketWidth);
        platform.tick(false);
    }
    return report;
}

}  // namespace crowdtrend
