#pragma once

#include "crowdtrend/platform.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace crowdtrend {

/// Answers that make a session vote for `target`, or empty when no path
/// through the sequence does. Prefers the first answer in declared order.
std::vector<std::pair<std::string, std::string>> path_for_class(const Project& project, TrendClass target);

struct ScriptedRunOptions {
    std::string project_id;
    StreamSourceConfig source;
    std::vector<std::string> annotators{"annotator-1", "annotator-2", "annotator-3"};
    std::size_t round_every = 200;       // documents between annotation rounds
    std::size_t labels_per_round = 10;   // sessions each annotator completes per round
    std::size_t max_retrains = 2;
    bool simulated_clock = true;         // clock follows document timestamps
};

struct ScriptedRunReport {
    IngestStats ingest;
    std::size_t rounds = 0;
    std::size_t sessions = 0;
    std::size_t retrains = 0;
    std::size_t skipped_no_truth = 0;

    nlohmann::json to_json() const;
};

/// Replays a document stream into a project while scripted annotators answer
/// according to each document's recorded truth. With a simulated clock the
/// platform's clock must be a ManualClock.
ScriptedRunReport run_scripted(Platform& platform, const ScriptedRunOptions& options, Sleeper sleeper = {});

}  // namespace crowdtrend
