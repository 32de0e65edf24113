#pragma once

#include "crowdtrend/time.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdtrend {

enum class EventKind { DocumentStored, AnnotationRow, Consensus, ModelPublished, BucketClosed };

const char* to_string(EventKind k);
std::optional<EventKind> event_kind_from_string(std::string_view s);

struct EventRecord {
    std::uint64_t sequence_no = 0;
    EventKind kind = EventKind::DocumentStored;
    nlohmann::json payload;
    Timestamp written_at;
};

class SchemaError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Throws SchemaError when the payload lacks a field its kind requires.
void validate_payload(EventKind kind, const nlohmann::json& payload);

enum class SyncMode { None, Flush, Fsync };

/// Append-only log of length-prefixed JSON records:
///   u32 little-endian byte length | u32 CRC-32 of the bytes | JSON bytes
/// Sequence numbers start at 0 and are gapless. Opening a log with a damaged
/// tail truncates it back to the last intact record.
class EventLog {
public:
    explicit EventLog(std::filesystem::path path, SyncMode sync = SyncMode::Fsync);
    ~EventLog();
    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    /// Durable (per sync mode) before returning. Throws SchemaError for an
    /// invalid payload and std::runtime_error on I/O failure.
    std::uint64_t append(EventKind kind, nlohmann::json payload, Timestamp written_at);

    /// Records with sequence_no >= from, in order.
    std::vector<EventRecord> replay(std::uint64_t from = 0) const;
    void for_each(std::uint64_t from, const std::function<void(const EventRecord&)>& fn) const;

    std::uint64_t next_sequence() const;
    const std::filesystem::path& path() const { return path_; }
    /// Bytes dropped by tail recovery when the log was opened.
    std::uint64_t recovered_bytes() const { return recovered_bytes_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    std::filesystem::path path_;
    SyncMode sync_;
    int fd_ = -1;
    mutable std::mutex mu_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t recovered_bytes_ = 0;
    std::vector<std::string> warnings_;
};

struct ScanResult {
    std::vector<EventRecord> records;
    std::uint64_t valid_bytes = 0;
    std::uint64_t file_bytes = 0;
    std::optional<std::string> problem;  // why scanning stopped early
};

/// Reads a log file without modifying it.
ScanResult scan_log(const std::filesystem::path& path);

/// Versioned state snapshots, written atomically as snapshot-<seq>.json.
struct Snapshot {
    int format_version = 1;
    std::uint64_t next_sequence = 0;  // events [0, next_sequence) are folded in
    Timestamp taken_at;
    nlohmann::json state;
};

void write_snapshot(const std::filesystem::path& dir, const Snapshot& snap);
std::optional<Snapshot> load_latest_snapshot(const std::filesystem::path& dir);

}  // namespace crowdtrend
