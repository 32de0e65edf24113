#pragma once

#include "crowdtrend/classifier.hpp"
#include "crowdtrend/ingest.hpp"
#include "crowdtrend/labelqueue.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace crowdtrend {

enum class SelectionStrategy { Uncertainty, Random };

const char* to_string(SelectionStrategy s);
std::optional<SelectionStrategy> strategy_from_string(std::string_view s);

/// Stream whose class vocabularies slide over time: at stream position
/// tau in [0, 1] each class draws from a window of `active_words` words that
/// starts tau·(pool_words − active_words) into its pool.
class DriftingStream {
public:
    struct Options {
        std::uint64_t seed = 0;
        std::size_t length = 4000;
        Timestamp start = Timestamp{};
        Duration gap = std::chrono::minutes{5};
        std::size_t pool_words = 60;
        std::size_t active_words = 12;
        std::size_t class_words = 3;
        double cross_class_rate = 0.3;
        std::size_t filler_words = 3;
    };

    explicit DriftingStream(Options opts);

    bool done() const { return emitted_ >= opts_.length; }
    /// Next labelled document; `truth` receives its class.
    Document next(TrendClass& truth);
    /// A document drawn from the distribution at position tau with a caller RNG.
    std::string sample_text(double tau, TrendClass cls, std::mt19937_64& rng) const;
    double position() const;

private:
    Options opts_;
    std::mt19937_64 rng_;
    std::size_t emitted_ = 0;
};

struct SimulationOptions {
    SelectionStrategy strategy = SelectionStrategy::Uncertainty;
    std::uint64_t seed = 0;
    DriftingStream::Options stream{};
    std::size_t label_every = 4;     // one label per this many arrivals
    std::size_t retrain_every = 10;  // labels between retrains
    std::size_t budget = 600;        // labels before giving up
    double target_accuracy = 0.9;
    std::size_t test_size = 300;
    std::size_t annotators = 3;
    QueueConfig queue{.capacity = 200, .alpha = 0.5, .recency_halflife = std::chrono::hours{12}, .consensus_k = 1};
    Hyperparams hyperparams{.learning_rate = 0.5, .epochs = 10, .l2 = 1e-4, .batch_size = 16};
    std::uint32_t feature_dim = 1u << 14;
};

struct SimulationResult {
    std::uint64_t seed = 0;
    SelectionStrategy strategy = SelectionStrategy::Uncertainty;
    std::optional<std::size_t> labels_to_target;  // empty when the budget ran out
    std::size_t labels_used = 0;
    double final_accuracy = 0;
    std::vector<std::pair<std::size_t, double>> curve;  // (labels, accuracy) after each retrain
};

SimulationResult run_simulation(const SimulationOptions& options);

/// One row per result: seed,strategy,labels_to_target,reached,final_accuracy.
/// Runs that never reached the target report budget + 1.
std::string simulation_csv(const std::vector<SimulationResult>& results, std::size_t budget);

/// Median of labels-to-target with budget + 1 standing in for misses.
double median_labels(const std::vector<SimulationResult>& results, std::size_t budget);

}  // namespace crowdtrend
