#include "crowdtrend/simulation.hpp"

#include "crowdtrend/random.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <unordered_map>

namespace crowdtrend {

namespace {

std::string word(std::size_t cls, std::size_t k) {
    static constexpr const char* kStems[] = {"bright", "grim", "plain", "noise"};
    return std::string(kStems[cls]) + std::to_string(k);
}

}  // namespace

const char* to_string(SelectionStrategy s) {
    return s == SelectionStrategy::Uncertainty ? "uncertainty" : "random";
}

std::optional<SelectionStrategy> strategy_from_string(std::string_view s) {
    if (s == "uncertainty") return SelectionStrategy::Uncertainty;
    if (s == "random") return SelectionStrategy::Random;
    return std::nullopt;
}

DriftingStream::DriftingStream(Options opts) : opts_(opts), rng_(opts.seed) {
    if (opts_.active_words == 0 || opts_.active_words > opts_.pool_words)
        throw std::invalid_argument("active_words must be in [1, pool_words]");
}

double DriftingStream::position() const {
    return opts_.length <= 1 ? 0.0 : static_cast<double>(emitted_) / static_cast<double>(opts_.length - 1);
}

std::string DriftingStream::sample_text(double tau, TrendClass cls, std::mt19937_64& rng) const {
    const auto span = opts_.pool_words - opts_.active_words;
    const auto offset = static_cast<std::size_t>(std::clamp(tau, 0.0, 1.0) * static_cast<double>(span));
    std::vector<std::string> words;
    const auto c = index_of(cls);
    for (std::size_t i = 0; i < opts_.class_words; ++i) words.push_back(word(c, offset + rnd::index(rng, opts_.active_words)));
    if (rnd::bernoulli(rng, opts_.cross_class_rate)) {
        const auto other = rnd::index(rng, kTrendClassCount);
        words.push_back(word(other, offset + rnd::index(rng, opts_.active_words)));
    }
    for (std::size_t i = 0; i < opts_.filler_words; ++i) words.push_back("filler" + std::to_string(rnd::index(rng, 30)));
    rnd::shuffle(words, rng);
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

Document DriftingStream::next(TrendClass& truth) {
    const double tau = position();
    truth = static_cast<TrendClass>(rnd::index(rng_, kTrendClassCount));
    Document doc;
    doc.doc_id = "d" + std::to_string(emitted_);
    doc.text = sample_text(tau, truth, rng_);
    doc.created_at = opts_.start + opts_.gap * static_cast<Duration::rep>(emitted_);
    doc.source = "simulation";
    ++emitted_;
    return doc;
}

SimulationResult run_simulation(const SimulationOptions& o) {
    SimulationResult result;
    result.seed = o.seed;
    result.strategy = o.strategy;

    DriftingStream::Options so = o.stream;
    so.seed = o.seed;
    DriftingStream stream(so);
    // Independent generators so both strategies see the same stream and tests.
    std::mt19937_64 pick_rng(o.seed ^ 0x5eed5eedULL);
    std::mt19937_64 test_rng(o.seed ^ 0x7e577e57ULL);

    QueueConfig qc = o.queue;
    if (o.strategy == SelectionStrategy::Random) qc.alpha = 1.0;  // priority = the random draw
    LabelQueue queue(qc);

    std::unordered_map<std::string, std::pair<std::string, TrendClass>> pool;  // doc -> (text, truth)
    std::vector<LabelledExample> labelled;
    std::shared_ptr<const Model> model;
    std::uint64_t version = 0;
    std::size_t arrivals = 0;
    std::size_t next_annotator = 0;

    auto uncertainty_of = [&](const std::string& text) {
        if (!model) return 1.0;
        return uncertainty(model->predict(featurize(text, o.feature_dim)));
    };

    auto evaluate = [&](double tau) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < o.test_size; ++i) {
            const auto cls = static_cast<TrendClass>(rnd::index(test_rng, kTrendClassCount));
            const auto text = stream.sample_text(tau, cls, test_rng);
            if (model->argmax_class(model->predict(featurize(text, o.feature_dim))) == cls) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(o.test_size);
    };

    while (!stream.done() && labelled.size() < o.budget) {
        TrendClass truth;
        Document doc = stream.next(truth);
        const Timestamp now = doc.created_at;
        const double u = o.strategy == SelectionStrategy::Random ? rnd::uniform01(pick_rng) : uncertainty_of(doc.text);
        auto offer = queue.offer(doc.doc_id, doc.created_at, u, now);
        if (offer.status != OfferStatus::Rejected) pool[doc.doc_id] = {doc.text, truth};
        if (offer.evicted) pool.erase(*offer.evicted);

        if (++arrivals % o.label_every != 0) continue;
        const std::string user = "sim-" + std::to_string(next_annotator++ % std::max<std::size_t>(1, o.annotators));
        auto picked = queue.next_for_user(user, now);
        if (!picked) continue;
        queue.complete(user, *picked, now);
        const auto& [text, label] = pool.at(*picked);
        labelled.push_back({*picked, featurize(text, o.feature_dim), label, 1.0});
        pool.erase(*picked);

        if (labelled.size() % o.retrain_every != 0) continue;
        std::set<TrendClass> classes;
        for (const auto& e : labelled) classes.insert(e.label);
        if (classes.size() < 2) continue;
        ++version;
        model = std::make_shared<const Model>(train(labelled, o.hyperparams, o.seed + version - 1, version, o.feature_dim));
        if (o.strategy == SelectionStrategy::Uncertainty) {
            queue.reprioritize(now, [&](const std::string& id) -> std::optional<double> {
                auto it = pool.find(id);
                if (it == pool.end()) return std::nullopt;
                return uncertainty_of(it->second.first);
            });
        }
        const double acc = evaluate(stream.position());
        result.curve.emplace_back(labelled.size(), acc);
        result.final_accuracy = acc;
        if (!result.labels_to_target && acc >= o.target_accuracy) {
            result.labels_to_target = labelled.size();
            break;
        }
    }
    result.labels_used = labelled.size();
    return result;
}

std::string simulation_csv(const std::vector<SimulationResult>& results, std::size_t budget) {
    std::string out = "seed,strategy,labels_to_target,reached,final_accuracy\n";
    char buf[160];
    for (const auto& r : results) {
        std::snprintf(buf, sizeof buf, "%llu,%s,%zu,%d,%.6f\n", static_cast<unsigned long long>(r.seed),
                      to_string(r.strategy), r.labels_to_target.value_or(budget + 1), r.labels_to_target ? 1 : 0,
                      r.final_accuracy);
        out += buf;
    }
    return out;
}

double median_labels(const std::vector<SimulationResult>& results, std::size_t budget) {
    if (results.empty()) return 0;
    std::vector<double> v;
    for (const auto& r : results) v.push_back(static_cast<double>(r.labels_to_target.value_or(budget + 1)));
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace crowdtrend
