#pragma once

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace capdr::replay {

using json = nlohmann::json;

enum class RecordKind
{
    config,
    seed,
    cti_cube,
    pred_cube,
    unsat_core,
    candidate_set,
    action_attempt,
    guard_outcome,
    context_hash,
    certificate,
};

const char* to_string(RecordKind kind);
RecordKind record_kind_from_string(const std::string& s);

// One line of the replay log. `digest` covers the canonical payload bytes
// only; `timing` is informational and never compared.
struct Record
{
    std::uint64_t seq = 0;
    RecordKind kind = RecordKind::config;
    json payload;
    std::string digest;
    json timing;
};

// Field-sorted, whitespace-free serialization.
std::string canonical_bytes(const json& payload);
std::string payload_digest(const json& payload);

Record make_record(std::uint64_t seq, RecordKind kind, json payload);

class LogFormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

json to_json(const Record& r);
Record record_from_json(const json& j);

// JSON Lines: one record per line. The first record is the config header.
void write_log(std::ostream& out, const std::vector<Record>& records);
std::vector<Record> read_log(std::istream& in);

enum class DivergenceKind
{
    log_exhausted,
    digest_mismatch,
    guard_outcome_mismatch,
    version_mismatch,
};

const char* to_string(DivergenceKind kind);

class Divergence : public std::runtime_error
{
public:
    Divergence(DivergenceKind kind, std::uint64_t seq, const std::string& detail);

    DivergenceKind kind() const { return _kind; }
    std::uint64_t seq() const { return _seq; }

private:
    DivergenceKind _kind;
    std::uint64_t _seq;
};

// Append-only event journal used by the engine. In record mode every call
// appends. In reuse mode artifacts come from the log without running the
// compute callback. In strict mode artifacts are recomputed and their digests
// compared against the log. Decisions are compared in both replay modes.
class Journal
{
public:
    enum class Mode
    {
        record,
        reuse,
        strict,
    };

    Journal() = default;
    Journal(std::vector<Record> log, Mode mode);

    Mode mode() const { return _mode; }

    json artifact(RecordKind kind, const std::function<json()>& compute);
    void decision(RecordKind kind, const json& payload);
    void certificate(const json& payload, const json& timing);

    // Record mode: what was written. Replay modes: the log being consumed.
    const std::vector<Record>& records() const { return _records; }
    std::uint64_t position() const { return _pos; }
    std::uint64_t computed() const { return _computed; }
    const Record* recorded_certificate() const { return _recorded_certificate; }

    // Replay modes: throws if records other than those consumed remain.
    void finish() const;

private:
    const Record& next(RecordKind kind);
    void append(RecordKind kind, json payload, json timing = nullptr);

    Mode _mode = Mode::record;
    std::vector<Record> _records;
    std::uint64_t _pos = 0;
    std::uint64_t _computed = 0;
    const Record* _recorded_certificate = nullptr;
};

} // namespace capdr::replay
