#include "crowdtrend/labelqueue.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crowdtrend {

void QueueConfig::validate() const {
    if (capacity == 0) throw std::invalid_argument("queue capacity must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0, 1]");
    if (recency_halflife <= Duration::zero()) throw std::invalid_argument("recency halflife must be positive");
    if (consensus_k == 0) throw std::invalid_argument("consensus_k must be positive");
    if (lease <= Duration::zero()) throw std::invalid_argument("lease must be positive");
}

double priority_score(double uncertainty, Timestamp created_at, Timestamp now, const QueueConfig& config) {
    const double u = std::clamp(uncertainty, 0.0, 1.0);
    const auto age = std::max(Duration::zero(), now - created_at);
    const double halflives =
        static_cast<double>(age.count()) / static_cast<double>(config.recency_halflife.count());
    const double recency = std::exp2(-halflives);
    return std::clamp(config.alpha * u + (1.0 - config.alpha) * recency, 0.0, 1.0);
}

LabelQueue::LabelQueue(QueueConfig config) : config_(config) { config_.validate(); }

OfferResult LabelQueue::offer(const std::string& doc_id, Timestamp created_at, double uncertainty, Timestamp now) {
    std::lock_guard lock(mu_);
    if (slots_.contains(doc_id)) return {OfferStatus::Rejected, std::nullopt};

    Slot slot;
    slot.entry.doc_id = doc_id;
    slot.entry.enqueue_time = now;
    slot.entry.created_at = created_at;
    slot.entry.uncertainty = std::clamp(uncertainty, 0.0, 1.0);
    slot.entry.priority = priority_score(slot.entry.uncertainty, created_at, now, config_);
    slot.seq = next_seq_++;

    std::optional<std::string> evicted;
    if (slots_.size() >= config_.capacity) {
        auto victim = by_priority_.begin();
        if (!(slot.entry.priority > victim->first.priority)) return {OfferStatus::Rejected, std::nullopt};
        evicted = victim->second;
        slots_.erase(victim->second);
        by_priority_.erase(victim);
    }
    by_priority_.emplace(slot.key(), doc_id);
    slots_.emplace(doc_id, std::move(slot));
    return {evicted ? OfferStatus::AcceptedWithEviction : OfferStatus::Accepted, std::move(evicted)};
}

void LabelQueue::expire_leases(Slot& slot, Timestamp now) {
    auto& e = slot.entry;
    for (auto it = e.leases.begin(); it != e.leases.end();) {
        if (it->second <= now) {
            e.users_assigned.erase(it->first);
            it = e.leases.erase(it);
        } else {
            ++it;
        }
    }
}

std::optional<std::string> LabelQueue::next_for_user(const std::string& user_id, Timestamp now) {
    std::lock_guard lock(mu_);
    Slot* best = nullptr;
    double best_priority = -1.0;
    for (auto& [id, slot] : slots_) {
        expire_leases(slot, now);
        const auto& e = slot.entry;
        if (e.users_assigned.contains(user_id)) continue;
        if (e.labels_received + e.leases.size() >= config_.consensus_k) continue;
        const double p = priority_score(e.uncertainty, e.created_at, now, config_);
        const bool better = best == nullptr || p > best_priority ||
                            (p == best_priority && std::pair(e.enqueue_time, slot.seq) >
                                                       std::pair(best->entry.enqueue_time, best->seq));
        if (better) {
            best = &slot;
            best_priority = p;
        }
    }
    if (!best) return std::nullopt;
    best->entry.users_assigned.insert(user_id);
    best->entry.leases[user_id] = now + config_.lease;
    return best->entry.doc_id;
}

CompleteStatus LabelQueue::complete(const std::string& user_id, const std::string& doc_id, Timestamp now) {
    std::lock_guard lock(mu_);
    auto it = slots_.find(doc_id);
    if (it == slots_.end()) return CompleteStatus::Rejected;
    auto& slot = it->second;
    expire_leases(slot, now);
    auto& e = slot.entry;
    if (!e.leases.erase(user_id)) return CompleteStatus::Rejected;
    e.users_completed.insert(user_id);
    e.labels_received = e.users_completed.size();
    if (e.labels_received >= config_.consensus_k) {
        remove(doc_id);
        return CompleteStatus::ConsensusReady;
    }
    return CompleteStatus::Pending;
}

bool LabelQueue::holds_lease(const std::string& user_id, const std::string& doc_id, Timestamp now) const {
    std::lock_guard lock(mu_);
    auto it = slots_.find(doc_id);
    if (it == slots_.end()) return false;
    auto lease = it->second.entry.leases.find(user_id);
    return lease != it->second.entry.leases.end() && lease->second > now;
}

std::size_t LabelQueue::reprioritize(Timestamp now,
                                     const std::function<std::optional<double>(const std::string&)>& uncertainty_of) {
    std::lock_guard lock(mu_);
    by_priority_.clear();
    for (auto& [id, slot] : slots_) {
        if (uncertainty_of) {
            if (auto u = uncertainty_of(id)) slot.entry.uncertainty = std::clamp(*u, 0.0, 1.0);
        }
        slot.entry.priority = priority_score(slot.entry.uncertainty, slot.entry.created_at, now, config_);
        by_priority_.emplace(slot.key(), id);
    }
    return slots_.size();
}

bool LabelQueue::restore_completion(const std::string& user_id, const std::string& doc_id) {
    std::lock_guard lock(mu_);
    auto it = slots_.find(doc_id);
    if (it == slots_.end()) return false;
    auto& e = it->second.entry;
    e.users_assigned.insert(user_id);
    e.users_completed.insert(user_id);
    e.labels_received = e.users_completed.size();
    if (e.labels_received >= config_.consensus_k) {
        remove(doc_id);
        return true;
    }
    return false;
}

void LabelQueue::remove(const std::string& doc_id) {
    auto it = slots_.find(doc_id);
    if (it == slots_.end()) return;
    by_priority_.erase(it->second.key());
    slots_.erase(it);
}

bool LabelQueue::contains(const std::string& doc_id) const {
    std::lock_guard lock(mu_);
    return slots_.contains(doc_id);
}

std::size_t LabelQueue::size() const {
    std::lock_guard lock(mu_);
    return slots_.size();
}

std::optional<QueueEntry> LabelQueue::entry(const std::string& doc_id) const {
    std::lock_guard lock(mu_);
    auto it = slots_.find(doc_id);
    if (it == slots_.end()) return std::nullopt;
    return it->second.entry;
}

QueueSnapshot LabelQueue::snapshot() const {
    std::lock_guard lock(mu_);
    QueueSnapshot snap;
    snap.size = slots_.size();
    snap.capacity = config_.capacity;
    if (!by_priority_.empty()) {
        snap.min_priority = by_priority_.begin()->first.priority;
        snap.max_priority = by_priority_.rbegin()->first.priority;
    }
    for (auto it = by_priority_.rbegin(); it != by_priority_.rend(); ++it) {
        const auto& e = slots_.at(it->second).entry;
        snap.items.push_back({e.doc_id, e.priority, e.uncertainty, e.labels_received, e.leases.size()});
    }
    return snap;
}

}  // namespace crowdtrend
