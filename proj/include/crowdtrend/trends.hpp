#pragma once

#include "crowdtrend/time.hpp"
#include "crowdtrend/trend_class.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace crowdtrend {

inline constexpr Duration kBucketWidth = std::chrono::hours{1};

using ClassCounts = std::array<std::uint64_t, kTrendClassCount>;
using ClassAverages = std::array<double, kTrendClassCount>;

struct IndexParams {
    std::size_t short_window_buckets = 24;  // 1 day
    std::size_t long_window_buckets = 168;  // 7 days
    double epsilon = 1.0;
};

/// Bucket index of the hour containing t (floor division, half-open buckets).
std::int64_t bucket_of(Timestamp t);
Timestamp bucket_start(std::int64_t bucket);

struct PredictedDocument {
    Timestamp created_at;
    TrendClass predicted;
};

/// Per-class counts of documents with created_at in [start, start + 1h).
ClassCounts bucket_counts(std::span<const PredictedDocument> docs, Timestamp start);

/// Mean of the `window` values ending at index `at` inclusive. Indices before
/// the series start count as zero and stay in the denominator.
double moving_average(std::span<const double> series, std::size_t window, std::size_t at);

/// (pos + ε) / (neg + ε).
double sentiment_ratio(double pos_ma, double neg_ma, double epsilon);

/// (r − μ) / σ with population σ; all zeros when σ < 1e-12.
std::vector<double> sentiment_index(std::span<const double> r_series);

struct TrendPoint {
    Timestamp bucket_start;
    ClassCounts counts{};
    ClassAverages ma_short{};
    ClassAverages ma_long{};
    double r = 1.0;
    double index = 0.0;
    ClassCounts consensus{};
};

/// Hourly class counts for one project. Single writer; readers get copies.
class TrendAccumulator {
public:
    /// Adds one predicted document. Returns false (and counts it as late)
    /// when its bucket is already closed.
    bool record(Timestamp created_at, TrendClass predicted);
    void record_consensus(Timestamp created_at, TrendClass label);

    /// Closes every nonempty open bucket whose end is at or before `cutoff`.
    /// Returns the newly closed buckets in order. Empty buckets stay open
    /// until a document lands in them or a later bucket closes.
    std::vector<std::pair<std::int64_t, ClassCounts>> close_through(Timestamp cutoff);

    /// Rebuild path: marks a bucket closed with the persisted counts.
    void apply_closed(std::int64_t bucket, const ClassCounts& counts);

    ClassCounts counts(std::int64_t bucket) const;
    std::map<std::int64_t, ClassCounts> all_counts() const;
    std::set<std::int64_t> closed_buckets() const;
    std::uint64_t late() const;
    std::uint64_t total() const;
    void clear_counts();

    /// Buckets fully inside [from, to) whose end is at or before `now`.
    std::vector<TrendPoint> query(Timestamp from, Timestamp to, Timestamp now, const IndexParams& params) const;

private:
    mutable std::mutex mu_;
    std::map<std::int64_t, ClassCounts> counts_;
    std::map<std::int64_t, ClassCounts> consensus_;
    std::set<std::int64_t> closed_;
    std::int64_t closed_through_ = INT64_MIN;  // every bucket < this is closed
    std::uint64_t late_ = 0;
};

/// CSV with a header row; fixed formatting so identical inputs give identical bytes.
std::string trends_to_csv(std::span<const TrendPoint> points);

}  // namespace crowdtrend
