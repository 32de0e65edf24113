#pragma once

#include "crowdtrend/time.hpp"
#include "crowdtrend/trend_class.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace crowdtrend {

inline constexpr std::uint32_t kDefaultFeatureDim = 1u << 18;
inline constexpr std::uint64_t kFeatureHashSeed = 0x9e3779b97f4a7c15ULL;

/// Sparse bag of hashed unigrams and bigrams, sorted by index.
struct FeatureVector {
    std::vector<std::pair<std::uint32_t, double>> entries;

    bool empty() const { return entries.empty(); }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Seeded 64-bit FNV-1a followed by a splitmix finalizer.
std::uint64_t feature_hash(std::string_view key, std::uint64_t seed = kFeatureHashSeed);

/// Tokens plus adjacent bigrams ("a b"), hashed modulo dim. Collisions add up.
FeatureVector featurize(std::string_view text, std::uint32_t dim = kDefaultFeatureDim);

struct Hyperparams {
    double learning_rate = 0.5;
    int epochs = 20;
    double l2 = 1e-4;
    std::size_t batch_size = 16;  // 0 = full batch
    bool inverse_frequency_weighting = false;

    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct LabelledExample {
    std::string doc_id;
    FeatureVector features;
    TrendClass label;
    double weight = 1.0;
};

/// Multinomial logistic regression over hashed features. Immutable once
/// published; the trainer is the only writer.
class Model {
public:
    Model(std::uint64_t version, std::uint32_t dim, std::vector<TrendClass> classes);

    std::uint64_t version() const { return version_; }
    std::uint32_t dim() const { return dim_; }
    std::size_t class_count() const { return classes_.size(); }
    std::span<const TrendClass> classes() const { return classes_; }
    std::uint64_t trained_on() const { return trained_on_; }
    const Hyperparams& hyperparams() const { return hyperparams_; }

    double weight(std::size_t cls, std::uint32_t feature) const { return weights_[cls * dim_ + feature]; }
    double bias(std::size_t cls) const { return biases_[cls]; }
    std::span<double> mutable_weights() { return weights_; }
    std::span<double> mutable_biases() { return biases_; }
    std::span<const double> weights() const { return weights_; }
    std::span<const double> biases() const { return biases_; }
    void set_training_info(std::uint64_t trained_on, const Hyperparams& hp);

    std::vector<double> logits(const FeatureVector& x) const;
    /// Softmax probabilities aligned with classes().
    std::vector<double> predict(const FeatureVector& x) const;
    TrendClass argmax_class(std::span<const double> probabilities) const;

    std::string to_json() const;
    static Model from_json(std::string_view text);
    void save(const std::string& path) const;
    static Model load(const std::string& path);

    friend bool operator==(const Model&, const Model&) = default;

private:
    std::uint64_t version_;
    std::uint32_t dim_;
    std::vector<TrendClass> classes_;
    std::vector<double> weights_;  // class-major, classes × dim
    std::vector<double> biases_;
    std::uint64_t trained_on_ = 0;
    Hyperparams hyperparams_{};
};

struct LossGradient {
    double loss = 0;
    std::vector<double> weights;  // classes × dim
    std::vector<double> biases;
};

/// Weighted mean cross-entropy plus (l2 / 2)·||W||² (biases unregularized).
LossGradient loss_and_gradient(const Model& model, std::span<const LabelledExample> examples, double l2);

/// Mini-batch gradient descent from zero weights. Classes are the distinct
/// labels present, in canonical order. Throws std::invalid_argument when
/// fewer than two classes are present.
Model train(std::span<const LabelledExample> examples, const Hyperparams& hp, std::uint64_t seed,
            std::uint64_t version, std::uint32_t dim = kDefaultFeatureDim);

enum class UncertaintyMeasure { LeastConfidence, Margin, Entropy };

/// In [0, 1]; least confidence is 1 − max p.
double uncertainty(std::span<const double> probabilities,
                   UncertaintyMeasure measure = UncertaintyMeasure::LeastConfidence);

struct RetrainPolicy {
    std::size_t batch_threshold = 50;
    Duration max_interval = std::chrono::hours{24};
};

enum class RetrainDecision { RetrainNow, Wait };

RetrainDecision retrain_trigger(std::size_t new_consensus_count, Duration since_last_train,
                                const RetrainPolicy& policy);

}  // namespace crowdtrend
