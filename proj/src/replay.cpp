#include "capdr/replay.hpp"

#include "capdr/certs.hpp"
#include "capdr/digest.hpp"
#include "capdr/metrics.hpp"

namespace capdr::replay {

namespace {

Cnf cnf_from_json(const json& j)
{
    Cnf out;
    for (const auto& c : j)
        out.push_back(Clause{c.get<std::vector<Lit>>()});
    return out;
}

} // namespace

engine::Options options_from_config(const json& config)
{
    const auto& o = config.at("options");
    engine::Options opt;
    opt.seed = o.at("seed").get<std::uint64_t>();
    if (!o.at("budget_secs").is_null())
        opt.budget_secs = o.at("budget_secs").get<double>();
    opt.max_queries = o.at("max_queries").get<std::uint64_t>();
    opt.conflict_budget = o.at("conflict_budget").get<std::uint64_t>();
    opt.fairness_bound = o.at("fairness_bound").get<std::size_t>();
    opt.cand_budget = o.at("cand_budget").get<std::size_t>();
    opt.cp1 = engine::cp1_mode_from_string(o.at("cp1").get<std::string>());
    opt.minimize = o.at("minimize").get<bool>();
    opt.assert_frame_invariants = o.at("assert_frame_invariants").get<bool>();
    opt.extra = config.value("extra", json::object());
    return opt;
}

ReplayReport replay(const Problem& problem, const std::vector<Record>& log, bool strict)
{
    ReplayReport rep;
    if (log.empty())
    {
        rep.divergence = Divergence(DivergenceKind::log_exhausted, 0, "log is empty");
        return rep;
    }
    const auto& head = log.front();
    if (head.kind != RecordKind::config)
    {
        rep.divergence = Divergence(DivergenceKind::version_mismatch, 0, "first record is not a config header");
        return rep;
    }
    if (payload_digest(head.payload) != head.digest)
    {
        rep.divergence = Divergence(DivergenceKind::digest_mismatch, 0, "stored digest does not match payload");
        return rep;
    }
    const auto& cfg = head.payload;
    if (cfg.value("tool", "") != engine::tool_name || cfg.value("version", "") != engine::tool_version
        || cfg.value("sat", "") != engine::sat_backend)
    {
        rep.divergence = Divergence(DivergenceKind::version_mismatch, 0, "log was written by a different tool version");
        return rep;
    }
    if (cfg.value("circuit_sha256", "") != sha256_hex(problem.source))
    {
        rep.divergence = Divergence(DivergenceKind::version_mismatch, 0, "log was recorded on a different circuit");
        return rep;
    }

    engine::Options opt;
    std::unique_ptr<policy::Scorer> scorer;
    try
    {
        opt = options_from_config(cfg);
        scorer = engine::scorer_from_spec(cfg.at("scorer"));
    }
    catch (const std::exception& e)
    {
        rep.divergence = Divergence(DivergenceKind::version_mismatch, 0, std::string("unusable config: ") + e.what());
        return rep;
    }

    Journal journal(log, strict ? Journal::Mode::strict : Journal::Mode::reuse);
    engine::Engine eng(problem, opt, scorer.get(), &journal);
    try
    {
        auto result = eng.run();
        journal.finish();
        rep.result = std::move(result);
    }
    catch (const Divergence& d)
    {
        rep.divergence = d;
        rep.computed = journal.computed();
        return rep;
    }
    rep.computed = journal.computed();

    const Record* recorded = journal.recorded_certificate();
    const auto& res = *rep.result;
    if (!recorded || !res.certificate())
        return rep;
    const auto& p = recorded->payload;
    if (res.verdict() == engine::Verdict::safe && p.value("verdict", "") == "SAFE")
    {
        const auto& inv = std::get<SafeCertificate>(*res.certificate()).inv;
        rep.delta = metrics::jaccard_distance(cnf_from_json(p.at("inv")), inv);
    }
    else if (res.verdict() == engine::Verdict::unsafe && p.value("verdict", "") == "UNSAFE")
    {
        const auto& trace = std::get<UnsafeCertificate>(*res.certificate()).trace;
        rep.delta = certs::format_unsafe(trace) == p.at("witness").get<std::string>() ? 0.0 : 1.0;
    }
    return rep;
}

} // namespace capdr::replay
