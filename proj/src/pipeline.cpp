#include "crowdtrend/pipeline.hpp"

#include <iostream>

namespace crowdtrend {

using json = nlohmann::json;

json to_json(const ProcessedDocument& p) {
    json j{{"project_id", p.project_id},
           {"doc_id", p.document.doc_id},
           {"text", p.document.text},
           {"created_at", format_timestamp(p.document.created_at)},
           {"lang", p.document.lang},
           {"source", p.document.source},
           {"raw", p.document.raw},
           {"matched", p.matched}};
    if (p.document.geo) j["geo"] = *p.document.geo;
    if (p.predicted_label) {
        j["predicted_label"] = std::string(to_string(*p.predicted_label));
        j["class_probabilities"] = *p.class_probabilities;
        j["uncertainty"] = *p.uncertainty;
        j["model_version"] = *p.model_version;
    }
    return j;
}

ProcessedDocument processed_from_json(const json& j) {
    ProcessedDocument p;
    p.project_id = j.at("project_id").get<std::string>();
    p.document.doc_id = j.at("doc_id").get<std::string>();
    p.document.text = j.at("text").get<std::string>();
    auto ts = parse_timestamp(j.at("created_at").get<std::string>());
    if (!ts) throw std::invalid_argument("bad created_at in stored document");
    p.document.created_at = *ts;
    p.document.lang = j.value("lang", "");
    p.document.source = j.value("source", "");
    p.document.raw = j.value("raw", "");
    if (j.contains("geo")) p.document.geo = j["geo"].get<std::string>();
    p.matched = j.value("matched", true);
    if (j.contains("predicted_label")) {
        p.predicted_label = trend_class_from_string(j["predicted_label"].get<std::string>());
        p.class_probabilities = j.at("class_probabilities").get<std::vector<double>>();
        p.uncertainty = j.at("uncertainty").get<double>();
        p.model_version = j.at("model_version").get<std::uint64_t>();
    }
    return p;
}

std::shared_ptr<const Model> ModelHolder::get() const {
    std::lock_guard lock(mu_);
    return model_;
}

void ModelHolder::publish(std::shared_ptr<const Model> model) {
    std::lock_guard lock(mu_);
    model_ = std::move(model);
}

json PipelineCounters::to_json() const {
    return {{"processed", processed.load()},
            {"matched", matched.load()},
            {"discarded", discarded.load()},
            {"stored", stored.load()},
            {"dead_lettered", dead_lettered.load()},
            {"persist_retries", persist_retries.load()},
            {"failed", failed.load()},
            {"queue_accepted", queue_accepted.load()},
            {"queue_rejected", queue_rejected.load()},
            {"queue_evictions", queue_evictions.load()}};
}

ProcessedDocument process_document(const Document& doc, ProjectContext& ctx, Timestamp now, const RetryPolicy& retry) {
    const Project& project = *ctx.project;
    ProcessedDocument out;
    out.document = doc;
    out.project_id = project.id;
    ++ctx.counters->processed;

    out.matched = matches(project.filter, tokenize(doc.text));
    if (!out.matched) {
        ++ctx.counters->discarded;
        return out;
    }
    ++ctx.counters->matched;

    if (auto model = ctx.model ? ctx.model->get() : nullptr) {
        auto probs = model->predict(featurize(doc.text, model->dim()));
        out.predicted_label = model->argmax_class(probs);
        out.uncertainty = uncertainty(probs, project.classifier.measure);
        out.class_probabilities = std::move(probs);
        out.model_version = model->version();
    }

    Duration backoff = retry.base_backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            ctx.persist(out);
            break;
        } catch (const std::exception& e) {
            if (attempt >= retry.max_retries) {
                ++ctx.counters->dead_lettered;
                std::cerr << "dead-lettered " << doc.doc_id << ": " << e.what() << '\n';
                return out;
            }
            ++ctx.counters->persist_retries;
            if (retry.sleeper) {
                retry.sleeper(backoff);
            } else {
                std::this_thread::sleep_for(backoff);
            }
            backoff *= 2;
        }
    }
    ++ctx.counters->stored;
    if (ctx.on_stored) ctx.on_stored(out);
    if (out.predicted_label && ctx.trends) ctx.trends->record(doc.created_at, *out.predicted_label);

    const auto offer = ctx.queue->offer(doc.doc_id, doc.created_at, out.uncertainty.value_or(1.0), now);
    switch (offer.status) {
        case OfferStatus::Accepted: ++ctx.counters->queue_accepted; break;
        case OfferStatus::AcceptedWithEviction:
            ++ctx.counters->queue_accepted;
            ++ctx.counters->queue_evictions;
            break;
        case OfferStatus::Rejected: ++ctx.counters->queue_rejected; break;
    }
    return out;
}

// ---------------------------------------------------------------------------

Pipeline::Pipeline(std::size_t workers, std::size_t capacity, Handler handler)
    : intake_(capacity), handler_(std::move(handler)) {
    if (workers == 0) throw std::invalid_argument("pipeline needs at least one worker");
    workers_.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) workers_.emplace_back([this] { run(); });
}

Pipeline::~Pipeline() { shutdown(); }

bool Pipeline::submit(Job job) {
    {
        std::lock_guard lock(mu_);
        ++submitted_;
    }
    if (intake_.push(std::move(job))) return true;
    std::lock_guard lock(mu_);
    --submitted_;
    idle_.notify_all();
    return false;
}

void Pipeline::drain() {
    std::unique_lock lock(mu_);
    idle_.wait(lock, [&] { return finished_ == submitted_; });
}

void Pipeline::shutdown() {
    std::call_once(shutdown_once_, [&] {
        intake_.close();
        for (auto& t : workers_) {
            if (t.joinable()) t.join();
        }
    });
}

void Pipeline::run() {
    while (auto job = intake_.pop()) {
        try {
            handler_(*job);
            ++handled_;
        } catch (const std::exception& e) {
            ++failures_;
            std::cerr << "pipeline worker failed on " << job->document.doc_id << ": " << e.what() << '\n';
        } catch (...) {
            ++failures_;
        }
        std::lock_guard lock(mu_);
        ++finished_;
        idle_.notify_all();
    }
}

}  // namespace crowdtrend
