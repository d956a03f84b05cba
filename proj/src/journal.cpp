#include "capdr/journal.hpp"

#include "capdr/digest.hpp"

#include <istream>
#include <ostream>

namespace capdr::replay {

namespace {

constexpr RecordKind all_kinds[] = {
    RecordKind::config, RecordKind::seed, RecordKind::cti_cube, RecordKind::pred_cube,
    RecordKind::unsat_core, RecordKind::candidate_set, RecordKind::action_attempt,
    RecordKind::guard_outcome, RecordKind::context_hash, RecordKind::certificate,
};

} // namespace

const char* to_string(RecordKind kind)
{
    switch (kind)
    {
    case RecordKind::config: return "config";
    case RecordKind::seed: return "seed";
    case RecordKind::cti_cube: return "cti_cube";
    case RecordKind::pred_cube: return "pred_cube";
    case RecordKind::unsat_core: return "unsat_core";
    case RecordKind::candidate_set: return "candidate_set";
    case RecordKind::action_attempt: return "action_attempt";
    case RecordKind::guard_outcome: return "guard_outcome";
    case RecordKind::context_hash: return "context_hash";
    case RecordKind::certificate: return "certificate";
    }
    return "?";
}

RecordKind record_kind_from_string(const std::string& s)
{
    for (auto k : all_kinds)
        if (s == to_string(k))
            return k;
    throw LogFormatError("unknown record kind '" + s + "'");
}

const char* to_string(DivergenceKind kind)
{
    switch (kind)
    {
    case DivergenceKind::log_exhausted: return "LogExhausted";
    case DivergenceKind::digest_mismatch: return "DigestMismatch";
    case DivergenceKind::guard_outcome_mismatch: return "GuardOutcomeMismatch";
    case DivergenceKind::version_mismatch: return "VersionMismatch";
    }
    return "?";
}

Divergence::Divergence(DivergenceKind kind, std::uint64_t seq, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + " at record " + std::to_string(seq) + ": " + detail)
    , _kind(kind)
    , _seq(seq)
{
}

std::string canonical_bytes(const json& payload)
{
    // nlohmann::json objects are std::map backed, so keys come out sorted.
    return payload.dump();
}

std::string payload_digest(const json& payload)
{
    return sha256_hex(canonical_bytes(payload));
}

Record make_record(std::uint64_t seq, RecordKind kind, json payload)
{
    Record r;
    r.seq = seq;
    r.kind = kind;
    r.digest = payload_digest(payload);
    r.payload = std::move(payload);
    return r;
}

json to_json(const Record& r)
{
    json j = {{"seq", r.seq}, {"kind", to_string(r.kind)}, {"payload", r.payload}, {"digest", r.digest}};
    if (!r.timing.is_null())
        j["timing"] = r.timing;
    return j;
}

Record record_from_json(const json& j)
{
    try
    {
        Record r;
        r.seq = j.at("seq").get<std::uint64_t>();
        r.kind = record_kind_from_string(j.at("kind").get<std::string>());
        r.payload = j.at("payload");
        r.digest = j.at("digest").get<std::string>();
        if (j.contains("timing"))
            r.timing = j.at("timing");
        return r;
    }
    catch (const json::exception& e)
    {
        throw LogFormatError(std::string("malformed record: ") + e.what());
    }
}

void write_log(std::ostream& out, const std::vector<Record>& records)
{
    for (const auto& r : records)
        out << to_json(r).dump() << '\n';
}

std::vector<Record> read_log(std::istream& in)
{
    std::vector<Record> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (line.empty())
            continue;
        json j;
        try
        {
            j = json::parse(line);
        }
        catch (const json::parse_error& e)
        {
            throw LogFormatError("line " + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(record_from_json(j));
        if (out.back().seq != out.size() - 1)
            throw LogFormatError("line " + std::to_string(lineno) + ": sequence numbers must be consecutive from 0");
    }
    return out;
}

Journal::Journal(std::vector<Record> log, Mode mode)
    : _mode(mode)
    , _records(std::move(log))
{
    if (mode == Mode::record)
        _records.clear();
}

void Journal::append(RecordKind kind, json payload, json timing)
{
    auto r = make_record(_records.size(), kind, std::move(payload));
    r.timing = std::move(timing);
    _records.push_back(std::move(r));
}

const Record& Journal::next(RecordKind kind)
{
    if (_pos >= _records.size())
        throw Divergence(DivergenceKind::log_exhausted, _pos, std::string("expected ") + to_string(kind));
    const auto& r = _records[_pos];
    if (payload_digest(r.payload) != r.digest)
        throw Divergence(DivergenceKind::digest_mismatch, r.seq, "stored digest does not match payload");
    if (r.kind != kind)
        throw Divergence(DivergenceKind::digest_mismatch, r.seq,
                         std::string("expected ") + to_string(kind) + " record, log has " + to_string(r.kind));
    ++_pos;
    return r;
}

json Journal::artifact(RecordKind kind, const std::function<json()>& compute)
{
    if (_mode == Mode::record)
    {
        ++_computed;
        auto payload = compute();
        append(kind, payload);
        return payload;
    }
    const auto& r = next(kind);
    if (_mode == Mode::reuse)
        return r.payload;
    ++_computed;
    auto payload = compute();
    if (payload_digest(payload) != r.digest)
        throw Divergence(DivergenceKind::digest_mismatch, r.seq, std::string("recomputed ") + to_string(kind) + " differs from log");
    return payload;
}

void Journal::decision(RecordKind kind, const json& payload)
{
    if (_mode == Mode::record)
    {
        append(kind, payload);
        return;
    }
    const auto& r = next(kind);
    if (payload_digest(payload) != r.digest)
    {
        const auto dk = kind == RecordKind::guard_outcome ? DivergenceKind::guard_outcome_mismatch : DivergenceKind::digest_mismatch;
        throw Divergence(dk, r.seq, std::string(to_string(kind)) + " differs from log");
    }
}

void Journal::certificate(const json& payload, const json& timing)
{
    if (_mode == Mode::record)
    {
        append(RecordKind::certificate, payload, timing);
        return;
    }
    _recorded_certificate = &next(RecordKind::certificate);
}

void Journal::finish() const
{
    if (_mode != Mode::record && _pos < _records.size())
        throw Divergence(DivergenceKind::digest_mismatch, _records[_pos].seq, "log has records the replay did not reach");
}

} // namespace capdr::replay
