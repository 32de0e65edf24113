#include "crowdtrend/classifier.hpp"

#include "crowdtrend/filterlang.hpp"
#include "crowdtrend/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace crowdtrend {

using json = nlohmann::json;

std::uint64_t feature_hash(std::string_view key, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char c : key) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

FeatureVector featurize(std::string_view input, std::uint32_t dim) {
    if (dim == 0) throw std::invalid_argument("feature dimension must be positive");
    const auto tokens = tokenize(input).tokens;
    std::map<std::uint32_t, double> counts;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        counts[static_cast<std::uint32_t>(feature_hash(tokens[i]) % dim)] += 1.0;
        if (i + 1 < tokens.size()) {
            std::string bigram = tokens[i] + ' ' + tokens[i + 1];
            counts[static_cast<std::uint32_t>(feature_hash(bigram) % dim)] += 1.0;
        }
    }
    FeatureVector fv;
    fv.entries.assign(counts.begin(), counts.end());
    return fv;
}

// ---------------------------------------------------------------------------
// Model

Model::Model(std::uint64_t version, std::uint32_t dim, std::vector<TrendClass> classes)
    : version_(version), dim_(dim), classes_(std::move(classes)) {
    if (dim_ == 0) throw std::invalid_argument("model dimension must be positive");
    if (classes_.size() < 2) throw std::invalid_argument("model needs at least two classes");
    weights_.assign(classes_.size() * dim_, 0.0);
    biases_.assign(classes_.size(), 0.0);
}

void Model::set_training_info(std::uint64_t trained_on, const Hyperparams& hp) {
    trained_on_ = trained_on;
    hyperparams_ = hp;
}

std::vector<double> Model::logits(const FeatureVector& x) const {
    std::vector<double> z(biases_);
    for (std::size_t c = 0; c < classes_.size(); ++c) {
        const double* row = weights_.data() + c * dim_;
        for (const auto& [j, v] : x.entries) {
            if (j < dim_) z[c] += row[j] * v;
        }
    }
    return z;
}

namespace {

void softmax_inplace(std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (double& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

}  // namespace

std::vector<double> Model::predict(const FeatureVector& x) const {
    auto z = logits(x);
    softmax_inplace(z);
    return z;
}

TrendClass Model::argmax_class(std::span<const double> p) const {
    if (p.size() != classes_.size()) throw std::invalid_argument("probability vector size mismatch");
    return classes_[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
}

std::string Model::to_json() const {
    json j;
    j["format"] = "crowdtrend-model";
    j["format_version"] = 1;
    j["version"] = version_;
    j["dim"] = dim_;
    j["hash_seed"] = kFeatureHashSeed;
    json cls = json::array();
    for (auto c : classes_) cls.push_back(std::string(to_string(c)));
    j["classes"] = cls;
    j["biases"] = biases_;
    json w = json::array();
    for (std::size_t c = 0; c < classes_.size(); ++c) {
        for (std::uint32_t f = 0; f < dim_; ++f) {
            double v = weights_[c * dim_ + f];
            if (v != 0.0) w.push_back(json::array({c, f, v}));
        }
    }
    j["weights"] = std::move(w);
    j["trained_on"] = trained_on_;
    j["hyperparams"] = {{"learning_rate", hyperparams_.learning_rate},
                        {"epochs", hyperparams_.epochs},
                        {"l2", hyperparams_.l2},
                        {"batch_size", hyperparams_.batch_size},
                        {"inverse_frequency_weighting", hyperparams_.inverse_frequency_weighting}};
    return j.dump();
}

Model Model::from_json(std::string_view text) {
    json j = json::parse(text);
    if (j.value("format", "") != "crowdtrend-model") throw std::runtime_error("not a model file");
    if (j.at("format_version").get<int>() != 1) throw std::runtime_error("unsupported model format version");
    if (j.at("hash_seed").get<std::uint64_t>() != kFeatureHashSeed)
        throw std::runtime_error("model was trained with a different feature hash seed");
    std::vector<TrendClass> classes;
    for (const auto& c : j.at("classes")) {
        auto tc = trend_class_from_string(c.get<std::string>());
        if (!tc) throw std::runtime_error("unknown class in model file");
        classes.push_back(*tc);
    }
    Model m(j.at("version").get<std::uint64_t>(), j.at("dim").get<std::uint32_t>(), std::move(classes));
    auto biases = j.at("biases").get<std::vector<double>>();
    if (biases.size() != m.class_count()) throw std::runtime_error("bias count mismatch");
    m.biases_ = std::move(biases);
    for (const auto& e : j.at("weights")) {
        auto c = e.at(0).get<std::size_t>();
        auto f = e.at(1).get<std::uint32_t>();
        if (c >= m.class_count() || f >= m.dim_) throw std::runtime_error("weight index out of range");
        m.weights_[c * m.dim_ + f] = e.at(2).get<double>();
    }
    const auto& hp = j.at("hyperparams");
    m.hyperparams_.learning_rate = hp.at("learning_rate").get<double>();
    m.hyperparams_.epochs = hp.at("epochs").get<int>();
    m.hyperparams_.l2 = hp.at("l2").get<double>();
    m.hyperparams_.batch_size = hp.at("batch_size").get<std::size_t>();
    m.hyperparams_.inverse_frequency_weighting = hp.at("inverse_frequency_weighting").get<bool>();
    m.trained_on_ = j.at("trained_on").get<std::uint64_t>();
    return m;
}

void Model::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << to_json() << '\n';
    if (!out) throw std::runtime_error("failed writing model file: " + path);
}

Model Model::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read model file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Loss and training

namespace {

std::size_t class_slot(const Model& m, TrendClass c) {
    auto cls = m.classes();
    auto it = std::find(cls.begin(), cls.end(), c);
    if (it == cls.end()) throw std::invalid_argument("example label not in model classes");
    return static_cast<std::size_t>(it - cls.begin());
}

}  // namespace

LossGradient loss_and_gradient(const Model& model, std::span<const LabelledExample> examples, double l2) {
    const std::size_t C = model.class_count();
    const std::uint32_t D = model.dim();
    LossGradient out;
    out.weights.assign(C * D, 0.0);
    out.biases.assign(C, 0.0);

    double total_weight = 0;
    for (const auto& ex : examples) total_weight += ex.weight;
    if (total_weight <= 0) throw std::invalid_argument("examples carry no weight");

    for (const auto& ex : examples) {
        const std::size_t y = class_slot(model, ex.label);
        auto p = model.predict(ex.features);
        const double coef = ex.weight / total_weight;
        out.loss -= coef * std::log(std::max(p[y], 1e-300));
        for (std::size_t c = 0; c < C; ++c) {
            const double r = coef * (p[c] - (c == y ? 1.0 : 0.0));
            out.biases[c] += r;
            for (const auto& [j, v] : ex.features.entries) out.weights[c * D + j] += r * v;
        }
    }
    auto w = model.weights();
    double sq = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        sq += w[i] * w[i];
        out.weights[i] += l2 * w[i];
    }
    out.loss += 0.5 * l2 * sq;
    return out;
}

Model train(std::span<const LabelledExample> examples, const Hyperparams& hp, std::uint64_t seed,
            std::uint64_t version, std::uint32_t dim) {
    if (examples.empty()) throw std::invalid_argument("cannot train on an empty example list");
    if (hp.learning_rate <= 0 || hp.epochs < 0 || hp.l2 < 0 || hp.learning_rate * hp.l2 >= 1.0)
        throw std::invalid_argument("invalid hyperparameters");

    std::array<std::size_t, kTrendClassCount> freq{};
    for (const auto& ex : examples) ++freq[index_of(ex.label)];
    std::vector<TrendClass> classes;
    for (auto c : kAllTrendClasses) {
        if (freq[index_of(c)] > 0) classes.push_back(c);
    }
    if (classes.size() < 2) throw std::invalid_argument("training needs at least two classes");

    Model model(version, dim, classes);
    const std::size_t C = classes.size();
    std::vector<std::size_t> slot(examples.size());
    std::vector<double> weight(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (examples[i].weight <= 0) throw std::invalid_argument("example weights must be positive");
        for (const auto& [j, v] : examples[i].features.entries) {
            if (j >= dim) throw std::invalid_argument("feature index exceeds model dimension");
        }
        slot[i] = class_slot(model, examples[i].label);
        weight[i] = examples[i].weight;
        if (hp.inverse_frequency_weighting) {
            weight[i] *= static_cast<double>(examples.size()) /
                         (static_cast<double>(C) * static_cast<double>(freq[index_of(examples[i].label)]));
        }
    }

    // Effective weights are scale * raw; the L2 shrink touches only the scale.
    std::vector<double> raw(C * dim, 0.0);
    double scale = 1.0;
    std::vector<double> bias(C, 0.0);

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    const std::size_t batch = hp.batch_size == 0 ? examples.size() : std::min(hp.batch_size, examples.size());

    std::vector<double> residuals;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        rnd::shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            double batch_weight = 0;
            for (std::size_t k = start; k < end; ++k) batch_weight += weight[order[k]];

            residuals.assign((end - start) * C, 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const auto& ex = examples[order[k]];
                std::vector<double> z(bias);
                for (std::size_t c = 0; c < C; ++c) {
                    const double* row = raw.data() + c * dim;
                    double acc = 0;
                    for (const auto& [j, v] : ex.features.entries) acc += row[j] * v;
                    z[c] += scale * acc;
                }
                softmax_inplace(z);
                const double coef = weight[order[k]] / batch_weight;
                for (std::size_t c = 0; c < C; ++c) {
                    residuals[(k - start) * C + c] = coef * (z[c] - (c == slot[order[k]] ? 1.0 : 0.0));
                }
            }

            scale *= 1.0 - hp.learning_rate * hp.l2;
            const double step = hp.learning_rate / scale;
            for (std::size_t k = start; k < end; ++k) {
                const auto& ex = examples[order[k]];
                for (std::size_t c = 0; c < C; ++c) {
                    const double r = residuals[(k - start) * C + c];
                    bias[c] -= hp.learning_rate * r;
                    double* row = raw.data() + c * dim;
                    for (const auto& [j, v] : ex.features.entries) row[j] -= step * r * v;
                }
            }
            if (scale < 1e-6) {
                for (double& v : raw) v *= scale;
                scale = 1.0;
            }
        }
    }

    auto w = model.mutable_weights();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = raw[i] * scale;
    std::copy(bias.begin(), bias.end(), model.mutable_biases().begin());
    model.set_training_info(examples.size(), hp);
    return model;
}

double uncertainty(std::span<const double> p, UncertaintyMeasure measure) {
    if (p.empty()) return 0.0;
    double result = 0;
    switch (measure) {
        case UncertaintyMeasure::LeastConfidence:
            result = 1.0 - *std::max_element(p.begin(), p.end());
            break;
        case UncertaintyMeasure::Margin: {
            if (p.size() < 2) return 0.0;
            std::vector<double> sorted(p.begin(), p.end());
            std::partial_sort(sorted.begin(), sorted.begin() + 2, sorted.end(), std::greater<>());
            result = 1.0 - (sorted[0] - sorted[1]);
            break;
        }
        case UncertaintyMeasure::Entropy: {
            if (p.size() < 2) return 0.0;
            double h = 0;
            for (double v : p) {
                if (v > 0) h -= v * std::log(v);
            }
            result = h / std::log(static_cast<double>(p.size()));
            break;
        }
    }
    return std::clamp(result, 0.0, 1.0);
}

RetrainDecision retrain_trigger(std::size_t new_consensus_count, Duration since_last_train,
                                const RetrainPolicy& policy) {
    if (new_consensus_count == 0) return RetrainDecision::Wait;
    if (new_consensus_count >= policy.batch_threshold) return RetrainDecision::RetrainNow;
    if (since_last_train >= policy.max_interval) return RetrainDecision::RetrainNow;
    return RetrainDecision::Wait;
}

}  // namespace crowdtrend
