#pragma once

// Test-side reference implementations. These are deliberately naive and
// share no code with the library beyond plain data types.

#include "crowdtrend/time.hpp"
#include "crowdtrend/trend_class.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Boolean keyword queries

struct QNode {
    enum Kind { Kw, And, Or, Not } kind = Kw;
    std::vector<std::string> phrase;
    std::vector<QNode> kids;
};

inline bool contains_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
    if (phrase.size() > tokens.size()) return false;
    for (std::size_t start = 0; start + phrase.size() <= tokens.size(); ++start) {
        bool all = true;
        for (std::size_t i = 0; i < phrase.size(); ++i) {
            if (tokens[start + i] != phrase[i]) {
                all = false;
                break;
            }
        }
        if (all) return true;
    }
    return false;
}

inline bool eval(const QNode& q, const std::vector<std::string>& tokens) {
    switch (q.kind) {
        case QNode::Kw: return contains_phrase(tokens, q.phrase);
        case QNode::Not: return !eval(q.kids[0], tokens);
        case QNode::And:
            for (const auto& k : q.kids)
                if (!eval(k, tokens)) return false;
            return true;
        case QNode::Or:
            for (const auto& k : q.kids)
                if (eval(k, tokens)) return true;
            return false;
    }
    return false;
}

/// Canonical text: every And/Or/Not in parentheses, phrases quoted.
inline std::string print(const QNode& q) {
    switch (q.kind) {
        case QNode::Kw: {
            if (q.phrase.size() == 1) return q.phrase[0];
            std::string s = "\"";
            for (std::size_t i = 0; i < q.phrase.size(); ++i) s += (i ? " " : "") + q.phrase[i];
            return s + "\"";
        }
        case QNode::Not: return "(NOT " + print(q.kids[0]) + ")";
        case QNode::And:
        case QNode::Or: {
            std::string s = "(";
            for (std::size_t i = 0; i < q.kids.size(); ++i) {
                if (i) s += q.kind == QNode::And ? " AND " : " OR ";
                s += print(q.kids[i]);
            }
            return s + ")";
        }
    }
    return {};
}

inline const std::vector<std::string>& alphabet() {
    static const std::vector<std::string> a{"a", "b", "c", "d", "e"};
    return a;
}

inline QNode random_query(std::mt19937_64& rng, int depth_left) {
    QNode q;
    const auto roll = rng() % 100;
    if (depth_left <= 1 || roll < 35) {
        q.kind = QNode::Kw;
        const std::size_t len = rng() % 5 == 0 ? 2 : 1;
        for (std::size_t i = 0; i < len; ++i) q.phrase.push_back(alphabet()[rng() % 5]);
        return q;
    }
    if (roll < 50) {
        q.kind = QNode::Not;
        q.kids.push_back(random_query(rng, depth_left - 1));
        return q;
    }
    q.kind = roll < 75 ? QNode::And : QNode::Or;
    const std::size_t n = 2 + rng() % 2;
    for (std::size_t i = 0; i < n; ++i) q.kids.push_back(random_query(rng, depth_left - 1));
    return q;
}

inline int depth(const QNode& q) {
    int d = 0;
    for (const auto& k : q.kids) d = std::max(d, depth(k));
    return d + 1;
}

inline std::vector<std::string> random_tokens(std::mt19937_64& rng) {
    std::vector<std::string> t(rng() % 9);
    for (auto& s : t) s = alphabet()[rng() % 5];
    return t;
}

// ---------------------------------------------------------------------------
// Label queue

struct RefQueue {
    struct Entry {
        std::string doc;
        std::int64_t created_ms;
        std::int64_t enqueue_ms;
        std::uint64_t order;
        double u;
        double priority;
        std::set<std::string> assigned;
        std::set<std::string> completed;
        std::map<std::string, std::int64_t> lease_until;
    };

    std::size_t capacity;
    double alpha;
    std::int64_t halflife_ms;
    std::size_t k;
    std::int64_t lease_ms;
    std::vector<Entry> entries;
    std::uint64_t counter = 0;

    double score(double u, std::int64_t created_ms, std::int64_t now_ms) const {
        double age = static_cast<double>(std::max<std::int64_t>(0, now_ms - created_ms));
        double v = alpha * u + (1 - alpha) * std::exp2(-age / static_cast<double>(halflife_ms));
        return std::min(1.0, std::max(0.0, v));
    }

    // "accepted", "rejected" or "evicted:<doc>".
    std::string offer(const std::string& doc, std::int64_t created_ms, double u, std::int64_t now_ms) {
        for (const auto& e : entries)
            if (e.doc == doc) return "rejected";
        Entry n{doc, created_ms, now_ms, counter++, u, score(u, created_ms, now_ms), {}, {}, {}};
        if (entries.size() < capacity) {
            entries.push_back(n);
            return "accepted";
        }
        std::size_t m = 0;
        for (std::size_t i = 1; i < entries.size(); ++i) {
            const auto& a = entries[i];
            const auto& b = entries[m];
            bool lower = a.priority < b.priority ||
                         (a.priority == b.priority &&
                          (a.enqueue_ms < b.enqueue_ms || (a.enqueue_ms == b.enqueue_ms && a.order < b.order)));
            if (lower) m = i;
        }
        if (n.priority > entries[m].priority) {
            std::string victim = entries[m].doc;
            entries.erase(entries.begin() + static_cast<std::ptrdiff_t>(m));
            entries.push_back(n);
            return "evicted:" + victim;
        }
        return "rejected";
    }

    void expire(Entry& e, std::int64_t now_ms) {
        std::vector<std::string> gone;
        for (const auto& [user, until] : e.lease_until)
            if (until <= now_ms) gone.push_back(user);
        for (const auto& user : gone) {
            e.lease_until.erase(user);
            e.assigned.erase(user);
        }
    }

    std::optional<std::string> next(const std::string& user, std::int64_t now_ms) {
        Entry* best = nullptr;
        double best_p = -1;
        for (auto& e : entries) {
            expire(e, now_ms);
            if (e.assigned.count(user)) continue;
            if (e.completed.size() + e.lease_until.size() >= k) continue;
            double p = score(e.u, e.created_ms, now_ms);
            // Equal priority: the newer entry is served first.
            bool take = !best || p > best_p ||
                        (p == best_p && (e.enqueue_ms > best->enqueue_ms ||
                                         (e.enqueue_ms == best->enqueue_ms && e.order > best->order)));
            if (take) {
                best = &e;
                best_p = p;
            }
        }
        if (!best) return std::nullopt;
        best->assigned.insert(user);
        best->lease_until[user] = now_ms + lease_ms;
        return best->doc;
    }

    // "pending", "ready" or "rejected".
    std::string complete(const std::string& user, const std::string& doc, std::int64_t now_ms) {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            auto& e = entries[i];
            if (e.doc != doc) continue;
            expire(e, now_ms);
            if (!e.lease_until.count(user)) return "rejected";
            e.lease_until.erase(user);
            e.completed.insert(user);
            if (e.completed.size() >= k) {
                entries.erase(entries.begin() + static_cast<std::ptrdiff_t>(i));
                return "ready";
            }
            return "pending";
        }
        return "rejected";
    }
};

// ---------------------------------------------------------------------------
// Classifier loss

/// Dense C×D weights, class-major. Examples are (sparse features, class index, weight).
struct DenseExample {
    std::vector<std::pair<std::uint32_t, double>> x;
    std::size_t y;
    double w;
};

inline double loss(const std::vector<double>& W, const std::vector<double>& b, std::size_t C, std::size_t D,
                   const std::vector<DenseExample>& data, double l2) {
    double total = 0, wsum = 0;
    for (const auto& ex : data) {
        std::vector<double> z(C);
        for (std::size_t c = 0; c < C; ++c) {
            z[c] = b[c];
            for (auto [j, v] : ex.x) z[c] += W[c * D + j] * v;
        }
        double mx = *std::max_element(z.begin(), z.end());
        double s = 0;
        for (double zc : z) s += std::exp(zc - mx);
        double log_p = z[ex.y] - mx - std::log(s);
        total += -ex.w * log_p;
        wsum += ex.w;
    }
    double reg = 0;
    for (double w : W) reg += w * w;
    return total / wsum + 0.5 * l2 * reg;
}

// ---------------------------------------------------------------------------
// Trends

inline double trailing_mean(const std::vector<double>& s, std::size_t window, std::size_t at) {
    double sum = 0;
    for (std::size_t i = 0; i < window; ++i) {
        if (at >= i) sum += s[at - i];
    }
    return sum / static_cast<double>(window);
}

inline double ratio(double pos, double neg, double eps) { return (pos + eps) / (neg + eps); }

inline std::vector<double> standardize(const std::vector<double>& r) {
    double mean = 0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(r.size());
    double var = 0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(r.size());
    double sd = std::sqrt(var);
    std::vector<double> out(r.size(), 0.0);
    if (sd < 1e-12) return out;
    for (std::size_t i = 0; i < r.size(); ++i) out[i] = (r[i] - mean) / sd;
    return out;
}

// ---------------------------------------------------------------------------
// Consensus

inline std::optional<crowdtrend::TrendClass> majority(const std::vector<crowdtrend::TrendClass>& votes) {
    for (auto c : crowdtrend::kAllTrendClasses) {
        std::size_t n = 0;
        for (auto v : votes) n += v == c;
        if (2 * n > votes.size()) return c;
    }
    return std::nullopt;
}

}  // namespace oracle
