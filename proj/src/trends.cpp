#include "crowdtrend/trends.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace crowdtrend {

std::int64_t bucket_of(Timestamp t) {
    const auto ms = to_millis(t);
    const auto width = kBucketWidth.count();
    return ms >= 0 ? ms / width : -((-ms + width - 1) / width);
}

Timestamp bucket_start(std::int64_t bucket) { return from_millis(bucket * kBucketWidth.count()); }

ClassCounts bucket_counts(std::span<const PredictedDocument> docs, Timestamp start) {
    ClassCounts out{};
    const Timestamp end = start + kBucketWidth;
    for (const auto& d : docs) {
        if (d.created_at >= start && d.created_at < end) ++out[index_of(d.predicted)];
    }
    return out;
}

double moving_average(std::span<const double> series, std::size_t window, std::size_t at) {
    if (window == 0) throw std::invalid_argument("window must be positive");
    if (at >= series.size()) throw std::out_of_range("moving_average index past series end");
    const std::size_t first = at + 1 >= window ? at + 1 - window : 0;
    double sum = 0;
    for (std::size_t i = first; i <= at; ++i) sum += series[i];
    return sum / static_cast<double>(window);
}

double sentiment_ratio(double pos_ma, double neg_ma, double epsilon) {
    if (pos_ma < 0 || neg_ma < 0) throw std::invalid_argument("moving averages must be nonnegative");
    if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
    return (pos_ma + epsilon) / (neg_ma + epsilon);
}

std::vector<double> sentiment_index(std::span<const double> r) {
    std::vector<double> out(r.size(), 0.0);
    if (r.empty()) return out;
    const double n = static_cast<double>(r.size());
    const double mu = std::accumulate(r.begin(), r.end(), 0.0) / n;
    double var = 0;
    for (double v : r) var += (v - mu) * (v - mu);
    const double sigma = std::sqrt(var / n);
    if (sigma < 1e-12) return out;
    for (std::size_t i = 0; i < r.size(); ++i) out[i] = (r[i] - mu) / sigma;
    return out;
}

// ---------------------------------------------------------------------------

bool TrendAccumulator::record(Timestamp created_at, TrendClass predicted) {
    std::lock_guard lock(mu_);
    const auto b = bucket_of(created_at);
    if (b < closed_through_) {
        ++late_;
        return false;
    }
    ++counts_[b][index_of(predicted)];
    return true;
}

void TrendAccumulator::record_consensus(Timestamp created_at, TrendClass label) {
    std::lock_guard lock(mu_);
    ++consensus_[bucket_of(created_at)][index_of(label)];
}

std::vector<std::pair<std::int64_t, ClassCounts>> TrendAccumulator::close_through(Timestamp cutoff) {
    std::lock_guard lock(mu_);
    std::vector<std::pair<std::int64_t, ClassCounts>> out;
    const auto through = bucket_of(cutoff);
    if (through <= closed_through_) return out;
    // The watermark only moves past buckets that produced an event, so a
    // rebuild from closed-bucket records lands on the same watermark.
    for (auto it = counts_.lower_bound(closed_through_); it != counts_.end() && it->first < through; ++it) {
        closed_.insert(it->first);
        out.emplace_back(it->first, it->second);
        closed_through_ = it->first + 1;
    }
    return out;
}

void TrendAccumulator::apply_closed(std::int64_t bucket, const ClassCounts& counts) {
    std::lock_guard lock(mu_);
    counts_[bucket] = counts;
    closed_.insert(bucket);
    if (bucket + 1 > closed_through_) closed_through_ = bucket + 1;
}

ClassCounts TrendAccumulator::counts(std::int64_t bucket) const {
    std::lock_guard lock(mu_);
    auto it = counts_.find(bucket);
    return it == counts_.end() ? ClassCounts{} : it->second;
}

std::map<std::int64_t, ClassCounts> TrendAccumulator::all_counts() const {
    std::lock_guard lock(mu_);
    return counts_;
}

std::set<std::int64_t> TrendAccumulator::closed_buckets() const {
    std::lock_guard lock(mu_);
    return closed_;
}

std::uint64_t TrendAccumulator::late() const {
    std::lock_guard lock(mu_);
    return late_;
}

std::uint64_t TrendAccumulator::total() const {
    std::lock_guard lock(mu_);
    std::uint64_t t = 0;
    for (const auto& [b, c] : counts_) t += std::accumulate(c.begin(), c.end(), std::uint64_t{0});
    return t;
}

void TrendAccumulator::clear_counts() {
    std::lock_guard lock(mu_);
    counts_.clear();
    closed_.clear();
    closed_through_ = INT64_MIN;
    late_ = 0;
}

std::vector<TrendPoint> TrendAccumulator::query(Timestamp from, Timestamp to, Timestamp now,
                                                const IndexParams& params) const {
    if (!(from < to)) throw std::invalid_argument("trend range must satisfy from < to");
    if (params.short_window_buckets == 0 || params.long_window_buckets == 0)
        throw std::invalid_argument("windows must be positive");

    std::int64_t first = bucket_of(from);
    if (bucket_start(first) < from) ++first;
    const Timestamp limit = std::min(to, now);
    const std::int64_t end = bucket_of(limit);  // exclusive: bucket_start(end) <= limit
    std::vector<TrendPoint> out;
    if (end <= first) return out;

    const auto longest = static_cast<std::int64_t>(std::max(params.short_window_buckets, params.long_window_buckets));
    const std::int64_t origin = first - longest + 1;
    const auto n = static_cast<std::size_t>(end - origin);

    // Integer prefix sums keep the window means exact.
    std::vector<ClassCounts> prefix(n + 1, ClassCounts{});
    std::vector<ClassCounts> consensus(static_cast<std::size_t>(end - first), ClassCounts{});
    {
        std::lock_guard lock(mu_);
        for (std::size_t i = 0; i < n; ++i) {
            prefix[i + 1] = prefix[i];
            auto it = counts_.find(origin + static_cast<std::int64_t>(i));
            if (it != counts_.end()) {
                for (std::size_t c = 0; c < kTrendClassCount; ++c) prefix[i + 1][c] += it->second[c];
            }
        }
        for (auto it = consensus_.lower_bound(first); it != consensus_.end() && it->first < end; ++it) {
            consensus[static_cast<std::size_t>(it->first - first)] = it->second;
        }
    }

    auto window_mean = [&](std::size_t at, std::size_t window, std::size_t c) {
        const std::size_t lo = at + 1 >= window ? at + 1 - window : 0;
        return static_cast<double>(prefix[at + 1][c] - prefix[lo][c]) / static_cast<double>(window);
    };

    std::vector<double> r_series;
    for (std::int64_t b = first; b < end; ++b) {
        const auto at = static_cast<std::size_t>(b - origin);
        TrendPoint p;
        p.bucket_start = bucket_start(b);
        for (std::size_t c = 0; c < kTrendClassCount; ++c) {
            p.counts[c] = prefix[at + 1][c] - prefix[at][c];
            p.ma_short[c] = window_mean(at, params.short_window_buckets, c);
            p.ma_long[c] = window_mean(at, params.long_window_buckets, c);
        }
        p.r = sentiment_ratio(p.ma_long[index_of(TrendClass::Positive)], p.ma_long[index_of(TrendClass::Negative)],
                              params.epsilon);
        p.consensus = consensus[static_cast<std::size_t>(b - first)];
        r_series.push_back(p.r);
        out.push_back(p);
    }
    auto index = sentiment_index(r_series);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].index = index[i];
    return out;
}

std::string trends_to_csv(std::span<const TrendPoint> points) {
    std::string out = "bucket_start";
    for (auto c : kAllTrendClasses) out += ",count_" + std::string(to_string(c));
    for (auto c : kAllTrendClasses) out += ",ma_1d_" + std::string(to_string(c));
    out += ",r,index";
    for (auto c : kAllTrendClasses) out += ",consensus_" + std::string(to_string(c));
    out += '\n';
    char buf[64];
    for (const auto& p : points) {
        out += format_timestamp(p.bucket_start);
        for (auto v : p.counts) out += ',' + std::to_string(v);
        for (auto v : p.ma_short) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            out += buf;
        }
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g", p.r, p.index);
        out += buf;
        for (auto v : p.consensus) out += ',' + std::to_string(v);
        out += '\n';
    }
    return out;
}

}  // namespace crowdtrend
