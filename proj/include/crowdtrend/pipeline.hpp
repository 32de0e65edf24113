#pragma once

#include "crowdtrend/annotations.hpp"
#include "crowdtrend/classifier.hpp"
#include "crowdtrend/ingest.hpp"
#include "crowdtrend/labelqueue.hpp"
#include "crowdtrend/trends.hpp"

#include <json.hpp>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace crowdtrend {

/// Bounded multi-producer multi-consumer FIFO. push() blocks while full.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw std::invalid_argument("queue capacity must be positive");
    }

    /// False once closed.
    bool push(T item) {
        std::unique_lock lock(mu_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) return false;
        items_.push_back(std::move(item));
        not_empty_.notify_one();
        return true;
    }

    /// Blocks until an item arrives; nullopt when closed and drained.
    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        not_full_.notify_all();
        not_empty_.notify_all();
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return items_.size();
    }
    std::size_t capacity() const { return capacity_; }
    bool closed() const {
        std::lock_guard lock(mu_);
        return closed_;
    }

private:
    const std::size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<T> items_;
    bool closed_ = false;
};

struct ProcessedDocument {
    Document document;
    std::string project_id;
    bool matched = false;
    std::optional<TrendClass> predicted_label;
    std::optional<std::vector<double>> class_probabilities;
    std::optional<double> uncertainty;
    std::optional<std::uint64_t> model_version;
};

nlohmann::json to_json(const ProcessedDocument& p);
ProcessedDocument processed_from_json(const nlohmann::json& j);

/// Current model snapshot; publication is an atomic swap.
class ModelHolder {
public:
    std::shared_ptr<const Model> get() const;
    void publish(std::shared_ptr<const Model> model);

private:
    mutable std::mutex mu_;
    std::shared_ptr<const Model> model_;
};

struct PipelineCounters {
    std::atomic<std::uint64_t> processed{0};
    std::atomic<std::uint64_t> matched{0};
    std::atomic<std::uint64_t> discarded{0};
    std::atomic<std::uint64_t> stored{0};
    std::atomic<std::uint64_t> dead_lettered{0};
    std::atomic<std::uint64_t> persist_retries{0};
    std::atomic<std::uint64_t> failed{0};
    std::atomic<std::uint64_t> queue_accepted{0};
    std::atomic<std::uint64_t> queue_rejected{0};
    std::atomic<std::uint64_t> queue_evictions{0};

    nlohmann::json to_json() const;
};

struct RetryPolicy {
    int max_retries = 3;
    Duration base_backoff{10};
    std::function<void(Duration)> sleeper;  // defaults to sleep_for
};

/// Everything one project's processing step touches.
struct ProjectContext {
    std::shared_ptr<const Project> project;
    const ModelHolder* model = nullptr;
    LabelQueue* queue = nullptr;
    TrendAccumulator* trends = nullptr;
    PipelineCounters* counters = nullptr;
    /// Persists a matched document; throws on failure.
    std::function<void(const ProcessedDocument&)> persist;
    /// Called after a document is stored (for in-memory indexes).
    std::function<void(const ProcessedDocument&)> on_stored;
};

/// Filter, predict, persist, count, and offer for labelling.
ProcessedDocument process_document(const Document& doc, ProjectContext& ctx, Timestamp now,
                                   const RetryPolicy& retry = {});

struct Job {
    std::string project_id;
    Document document;
    Timestamp submitted_at;
};

/// Worker pool draining a bounded intake.
class Pipeline {
public:
    using Handler = std::function<void(const Job&)>;

    Pipeline(std::size_t workers, std::size_t capacity, Handler handler);
    ~Pipeline();
    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    /// Blocks for backpressure; false after shutdown.
    bool submit(Job job);
    /// Waits until every submitted job has been handled.
    void drain();
    /// Stops intake, finishes queued and in-flight jobs, joins workers.
    void shutdown();

    std::uint64_t handled() const { return handled_.load(); }
    std::uint64_t failures() const { return failures_.load(); }
    std::size_t worker_count() const { return workers_.size(); }

private:
    void run();

    BoundedQueue<Job> intake_;
    Handler handler_;
    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable idle_;
    std::uint64_t submitted_ = 0;
    std::uint64_t finished_ = 0;
    std::atomic<std::uint64_t> handled_{0};
    std::atomic<std::uint64_t> failures_{0};
    std::once_flag shutdown_once_;
};

}  // namespace crowdtrend
