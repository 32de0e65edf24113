#include "crowdtrend/store.hpp"

#include <zlib.h>

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

namespace crowdtrend {

using json = nlohmann::json;

namespace {

constexpr std::uint32_t kMaxRecordBytes = 64u << 20;

constexpr std::array<std::pair<EventKind, const char*>, 5> kKindNames = {{
    {EventKind::DocumentStored, "document_stored"},
    {EventKind::AnnotationRow, "annotation_row"},
    {EventKind::Consensus, "consensus"},
    {EventKind::ModelPublished, "model_published"},
    {EventKind::BucketClosed, "bucket_closed"},
}};

std::uint32_t crc_of(const std::string& bytes) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void require(const json& p, std::initializer_list<const char*> keys, EventKind kind) {
    if (!p.is_object()) throw SchemaError(std::string(to_string(kind)) + " payload must be an object");
    for (const char* k : keys) {
        if (!p.contains(k)) throw SchemaError(std::string(to_string(kind)) + " payload missing '" + k + "'");
    }
}

}  // namespace

const char* to_string(EventKind k) {
    for (const auto& [kind, name] : kKindNames) {
        if (kind == k) return name;
    }
    return "unknown";
}

std::optional<EventKind> event_kind_from_string(std::string_view s) {
    for (const auto& [kind, name] : kKindNames) {
        if (s == name) return kind;
    }
    return std::nullopt;
}

void validate_payload(EventKind kind, const json& p) {
    switch (kind) {
        case EventKind::DocumentStored:
            require(p, {"project_id", "doc_id", "text", "created_at"}, kind);
            break;
        case EventKind::AnnotationRow:
            require(p, {"project_id", "user_id", "doc_id", "question_id", "answer_id", "answered_at", "session_id"},
                    kind);
            break;
        case EventKind::Consensus:
            require(p, {"project_id", "doc_id", "label", "support", "total", "resolved_at"}, kind);
            break;
        case EventKind::ModelPublished:
            require(p, {"project_id", "model"}, kind);
            if (!p["model"].is_object()) throw SchemaError("model_published.model must be an object");
            break;
        case EventKind::BucketClosed:
            require(p, {"project_id", "bucket", "counts"}, kind);
            if (!p["counts"].is_array() || p["counts"].size() != 4)
                throw SchemaError("bucket_closed.counts must hold four class counts");
            break;
    }
}

ScanResult scan_log(const std::filesystem::path& path) {
    ScanResult out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    out.file_bytes = data.size();

    std::size_t pos = 0;
    const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
    while (pos < data.size()) {
        if (data.size() - pos < 8) {
            out.problem = "truncated record header at byte " + std::to_string(pos);
            break;
        }
        const std::uint32_t len = get_u32(bytes + pos);
        const std::uint32_t crc = get_u32(bytes + pos + 4);
        if (len == 0 || len > kMaxRecordBytes) {
            out.problem = "implausible record length at byte " + std::to_string(pos);
            break;
        }
        if (data.size() - pos - 8 < len) {
            out.problem = "truncated record body at byte " + std::to_string(pos);
            break;
        }
        std::string body = data.substr(pos + 8, len);
        if (crc_of(body) != crc) {
            out.problem = "checksum mismatch at byte " + std::to_string(pos);
            break;
        }
        json j = json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("seq") || !j.contains("kind") || !j.contains("payload")) {
            out.problem = "unparseable record at byte " + std::to_string(pos);
            break;
        }
        EventRecord rec;
        rec.sequence_no = j["seq"].get<std::uint64_t>();
        auto kind = event_kind_from_string(j["kind"].get<std::string>());
        auto written = parse_timestamp(j.value("written_at", ""));
        if (!kind || !written || rec.sequence_no != out.records.size()) {
            out.problem = "invalid record header fields at byte " + std::to_string(pos);
            break;
        }
        rec.kind = *kind;
        rec.written_at = *written;
        rec.payload = std::move(j["payload"]);
        out.records.push_back(std::move(rec));
        pos += 8 + len;
        out.valid_bytes = pos;
    }
    return out;
}

EventLog::EventLog(std::filesystem::path path, SyncMode sync) : path_(std::move(path)), sync_(sync) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    ScanResult scan = scan_log(path_);
    if (scan.problem) {
        recovered_bytes_ = scan.file_bytes - scan.valid_bytes;
        warnings_.push_back("log tail damaged (" + *scan.problem + "); truncated " +
                            std::to_string(recovered_bytes_) + " bytes");
        std::filesystem::resize_file(path_, scan.valid_bytes);
    }
    next_seq_ = scan.records.size();
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw std::runtime_error("cannot open event log " + path_.string() + ": " + std::strerror(errno));
}

EventLog::~EventLog() {
    if (fd_ >= 0) ::close(fd_);
}

std::uint64_t EventLog::append(EventKind kind, json payload, Timestamp written_at) {
    validate_payload(kind, payload);
    std::lock_guard lock(mu_);
    const std::uint64_t seq = next_seq_;
    json rec{{"seq", seq}, {"kind", to_string(kind)}, {"written_at", format_timestamp(written_at)},
             {"payload", std::move(payload)}};
    const std::string body = rec.dump();
    if (body.size() > kMaxRecordBytes) throw SchemaError("event record too large");
    std::string frame;
    frame.reserve(body.size() + 8);
    put_u32(frame, static_cast<std::uint32_t>(body.size()));
    put_u32(frame, crc_of(body));
    frame += body;

    std::size_t written = 0;
    while (written < frame.size()) {
        ssize_t n = ::write(fd_, frame.data() + written, frame.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw std::runtime_error(std::string("event log write failed: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
    if (sync_ == SyncMode::Fsync && ::fdatasync(fd_) != 0)
        throw std::runtime_error(std::string("event log fsync failed: ") + std::strerror(errno));
    ++next_seq_;
    return seq;
}

std::vector<EventRecord> EventLog::replay(std::uint64_t from) const {
    std::vector<EventRecord> out;
    for_each(from, [&](const EventRecord& r) { out.push_back(r); });
    return out;
}

void EventLog::for_each(std::uint64_t from, const std::function<void(const EventRecord&)>& fn) const {
    ScanResult scan;
    {
        std::lock_guard lock(mu_);
        scan = scan_log(path_);
    }
    for (const auto& r : scan.records) {
        if (r.sequence_no >= from) fn(r);
    }
}

std::uint64_t EventLog::next_sequence() const {
    std::lock_guard lock(mu_);
    return next_seq_;
}

// ---------------------------------------------------------------------------
// Snapshots

void write_snapshot(const std::filesystem::path& dir, const Snapshot& snap) {
    std::filesystem::create_directories(dir);
    char name[64];
    std::snprintf(name, sizeof name, "snapshot-%012llu.json", static_cast<unsigned long long>(snap.next_sequence));
    const auto final_path = dir / name;
    const auto tmp_path = dir / (std::string(name) + ".tmp");
    json j{{"format_version", snap.format_version},
           {"next_sequence", snap.next_sequence},
           {"taken_at", format_timestamp(snap.taken_at)},
           {"state", snap.state}};
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write snapshot " + tmp_path.string());
        out << j.dump() << '\n';
        out.flush();
        if (!out) throw std::runtime_error("failed writing snapshot " + tmp_path.string());
    }
    std::filesystem::rename(tmp_path, final_path);
}

std::optional<Snapshot> load_latest_snapshot(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) return std::nullopt;
    static const std::regex pattern(R"(snapshot-(\d{12})\.json)");
    std::optional<std::filesystem::path> best;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (std::regex_match(name, pattern) && (!best || name > best->filename().string())) best = entry.path();
    }
    if (!best) return std::nullopt;
    std::ifstream in(*best, std::ios::binary);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("corrupt snapshot " + best->string());
    if (j.at("format_version").get<int>() != 1) throw std::runtime_error("unsupported snapshot version");
    Snapshot s;
    s.format_version = 1;
    s.next_sequence = j.at("next_sequence").get<std::uint64_t>();
    auto taken = parse_timestamp(j.at("taken_at").get<std::string>());
    if (!taken) throw std::runtime_error("corrupt snapshot timestamp");
    s.taken_at = *taken;
    s.state = j.at("state");
    return s;
}

}  // namespace crowdtrend
