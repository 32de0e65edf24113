#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace crowdtrend {

using Duration = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<Duration>;

/// Parses an RFC 3339 UTC instant such as "2020-01-01T00:00:00Z" or
/// "2020-01-01T00:00:00.250+02:00". Returns nullopt on any syntax error.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Formats as "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string format_timestamp(Timestamp ts);

inline std::int64_t to_millis(Timestamp ts) { return ts.time_since_epoch().count(); }
inline Timestamp from_millis(std::int64_t ms) { return Timestamp{Duration{ms}}; }

class Clock {
public:
    virtual ~Clock() = default;
    virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
public:
    Timestamp now() const override;
};

/// Simulated clock. Time only moves when told to.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Timestamp start = Timestamp{}) : now_(start) {}

    Timestamp now() const override;
    void set(Timestamp t);
    void advance(Duration d);
    // Moves forward to t if t is later; never moves backwards.
    void advance_to(Timestamp t);

private:
    mutable std::mutex mu_;
    Timestamp now_;
};

}  // namespace crowdtrend
