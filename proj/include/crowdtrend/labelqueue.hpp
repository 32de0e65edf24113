#pragma once

#include "crowdtrend/time.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace crowdtrend {

struct QueueConfig {
    std::size_t capacity = 1000;
    double alpha = 0.5;  // weight of uncertainty against recency
    Duration recency_halflife = std::chrono::hours{24};
    std::size_t consensus_k = 3;
    Duration lease = std::chrono::minutes{10};

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

/// alpha·uncertainty + (1 − alpha)·2^(−age / halflife). Negative ages clamp to 0.
double priority_score(double uncertainty, Timestamp created_at, Timestamp now, const QueueConfig& config);

struct QueueEntry {
    std::string doc_id;
    Timestamp enqueue_time;
    Timestamp created_at;
    double uncertainty = 1.0;
    double priority = 0.0;  // cached; refreshed by reprioritize()
    std::size_t labels_received = 0;
    std::set<std::string> users_assigned;
    std::set<std::string> users_completed;
    std::map<std::string, Timestamp> leases;  // user -> expiry
};

enum class OfferStatus { Accepted, Rejected, AcceptedWithEviction };

struct OfferResult {
    OfferStatus status;
    std::optional<std::string> evicted;
};

enum class CompleteStatus { Pending, ConsensusReady, Rejected };

struct QueueSnapshot {
    struct Item {
        std::string doc_id;
        double priority;
        double uncertainty;
        std::size_t labels_received;
        std::size_t in_flight;
    };
    std::size_t size = 0;
    std::size_t capacity = 0;
    std::optional<double> min_priority;
    std::optional<double> max_priority;
    std::vector<Item> items;  // highest cached priority first
};

/// Bounded pool of documents awaiting labels. Every public operation is
/// linearizable (one internal mutex).
class LabelQueue {
public:
    explicit LabelQueue(QueueConfig config);

    const QueueConfig& config() const { return config_; }

    /// Priority is computed at `now`, which also becomes the enqueue time.
    OfferResult offer(const std::string& doc_id, Timestamp created_at, double uncertainty, Timestamp now);

    /// Highest priority (recomputed at `now`) entry the user may still label.
    /// Records an assignment lease. Equal priorities favour the newer entry.
    std::optional<std::string> next_for_user(const std::string& user_id, Timestamp now);

    CompleteStatus complete(const std::string& user_id, const std::string& doc_id, Timestamp now);

    bool holds_lease(const std::string& user_id, const std::string& doc_id, Timestamp now) const;

    /// Refreshes uncertainty (when the callback yields a value) and cached
    /// priority for every entry. Returns the number of entries refreshed.
    std::size_t reprioritize(Timestamp now, const std::function<std::optional<double>(const std::string&)>& uncertainty_of);

    /// Rebuild path: credits a completed label without a lease. Returns true
    /// when the entry reached consensus and left the queue.
    bool restore_completion(const std::string& user_id, const std::string& doc_id);

    bool contains(const std::string& doc_id) const;
    std::size_t size() const;
    std::optional<QueueEntry> entry(const std::string& doc_id) const;
    QueueSnapshot snapshot() const;

private:
    struct Key {
        double priority;
        Timestamp enqueue_time;
        std::uint64_t seq;
        auto operator<=>(const Key&) const = default;
    };
    struct Slot {
        QueueEntry entry;
        std::uint64_t seq;
        Key key() const { return {entry.priority, entry.enqueue_time, seq}; }
    };

    void expire_leases(Slot& slot, Timestamp now);
    void remove(const std::string& doc_id);

    QueueConfig config_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, Slot> slots_;
    std::map<Key, std::string> by_priority_;  // ascending; begin() is the eviction victim
    std::uint64_t next_seq_ = 0;
};

}  // namespace crowdtrend
