#include "capdr/cli.hpp"

#include "capdr/certs.hpp"
#include "capdr/digest.hpp"
#include "capdr/replay.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace capdr::cli {

using replay::json;
namespace fs = std::filesystem;

namespace {

struct IoError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    return out;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

struct RunFlags
{
    std::uint64_t seed = 0;
    double budget_secs = -1;
    std::uint64_t max_queries = 0;
    std::string policy;
    std::int64_t random_policy = -1;
    double alpha = 1.0;
    double beta = 1e-3;
    double gamma = 1.0;
    std::size_t fairness_bound = 64;
    std::size_t cand_budget = 16;
    std::string cp1 = "core";
    bool minimize = false;
    std::string out_dir = ".";
};

void add_run_flags(CLI::App* cmd, RunFlags& f)
{
    cmd->add_option("--seed", f.seed, "solver seed")->envname("CAPDR_SEED");
    cmd->add_option("--budget-secs", f.budget_secs, "wall-clock budget in seconds (negative = none)")->envname("CAPDR_BUDGET_SECS");
    cmd->add_option("--max-queries", f.max_queries, "SAT query budget (0 = none)")->envname("CAPDR_MAX_QUERIES");
    cmd->add_option("--policy", f.policy, "frozen policy model file")->envname("CAPDR_POLICY");
    cmd->add_option("--random-policy", f.random_policy, "rank with the seeded random control scorer");
    cmd->add_option("--alpha", f.alpha, "weight of solve time")->envname("CAPDR_ALPHA");
    cmd->add_option("--beta", f.beta, "weight of certificate size")->envname("CAPDR_BETA");
    cmd->add_option("--gamma", f.gamma, "weight of checker time")->envname("CAPDR_GAMMA");
    cmd->add_option("--fairness-bound", f.fairness_bound, "max skips before an obligation is served")->envname("CAPDR_FAIRNESS_BOUND");
    cmd->add_option("--cand-budget", f.cand_budget, "literal-deletion candidates per blocker")->envname("CAPDR_CAND_BUDGET");
    cmd->add_option("--cp1", f.cp1, "blocker candidates: core or fallback_only")
        ->check(CLI::IsMember({"core", "fallback_only"}))
        ->envname("CAPDR_CP1");
    cmd->add_flag("--minimize", f.minimize, "shrink SAFE invariants before checking")->envname("CAPDR_MINIMIZE");
    cmd->add_option("--out-dir", f.out_dir, "directory for certificates, logs and metrics")->envname("CAPDR_OUT_DIR");
}

metrics::Weights weights_of(const RunFlags& f) { return {f.alpha, f.beta, f.gamma}; }

engine::Options options_of(const RunFlags& f, const std::string& input)
{
    engine::Options o;
    o.seed = f.seed;
    if (f.budget_secs >= 0)
        o.budget_secs = f.budget_secs;
    o.max_queries = f.max_queries;
    o.fairness_bound = f.fairness_bound;
    o.cand_budget = f.cand_budget;
    o.cp1 = engine::cp1_mode_from_string(f.cp1);
    o.minimize = f.minimize;
    o.extra = {{"input", fs::path(input).filename().string()},
               {"alpha", f.alpha},
               {"beta", f.beta},
               {"gamma", f.gamma},
               {"policy", f.policy},
               {"out_dir", f.out_dir}};
    return o;
}

std::unique_ptr<policy::Scorer> scorer_of(const RunFlags& f)
{
    if (!f.policy.empty())
    {
        std::ifstream in(f.policy);
        if (!in)
            throw IoError("cannot read " + f.policy);
        return std::make_unique<policy::LinearScorer>(policy::read_model(in));
    }
    if (f.random_policy >= 0)
        return std::make_unique<policy::RandomScorer>(std::uint64_t(f.random_policy));
    return nullptr;
}

metrics::CostVector cost_of(const engine::RunResult& r)
{
    metrics::CostVector cv;
    cv.t = r.solve_seconds();
    cv.t_chk = r.check_seconds();
    if (r.certificate())
        cv.size = double(metrics::size_proxy(*r.certificate()));
    return cv;
}

std::string fmt(double v)
{
    std::ostringstream ss;
    ss << std::setprecision(6) << v;
    return ss.str();
}

std::string summary(const std::string& name, const engine::RunResult& r, const metrics::Weights& w)
{
    std::ostringstream ss;
    ss << name << ": " << engine::to_string(r.verdict());
    if (r.verdict() == engine::Verdict::fail)
    {
        ss << " (" << r.fail_reason() << ")";
        return ss.str();
    }
    auto cv = cost_of(r);
    ss << " (checker " << r.check().describe() << ") t=" << fmt(cv.t) << "s size=" << cv.size
       << " t_chk=" << fmt(cv.t_chk) << "s J=" << fmt(metrics::scalarize(cv, w));
    return ss.str();
}

int verdict_exit(const engine::RunResult& r)
{
    switch (r.verdict())
    {
    case engine::Verdict::safe: return exit_safe;
    case engine::Verdict::unsafe: return exit_unsafe;
    case engine::Verdict::fail: return exit_fail;
    }
    return exit_fail;
}

int cmd_solve(const std::string& input, const RunFlags& f, std::ostream& out)
{
    auto problem = Problem::from_aiger(read_file(input));
    auto scorer = scorer_of(f);
    replay::Journal journal;
    engine::Engine eng(problem, options_of(f, input), scorer.get(), &journal);
    auto result = eng.run();

    const fs::path dir(f.out_dir);
    const auto stem = stem_of(input);
    {
        auto o = open_out(dir / (stem + ".replay.jsonl"));
        replay::write_log(o, journal.records());
    }
    if (result.verdict() == engine::Verdict::safe)
    {
        auto o = open_out(dir / (stem + ".inv"));
        certs::write_safe(o, problem.circuit.num_latches(), std::get<SafeCertificate>(*result.certificate()).inv);
    }
    else if (result.verdict() == engine::Verdict::unsafe)
    {
        auto o = open_out(dir / (stem + ".cex"));
        certs::write_unsafe(o, std::get<UnsafeCertificate>(*result.certificate()).trace);
    }
    const auto w = weights_of(f);
    {
        auto o = open_out(dir / (stem + ".metrics.csv"));
        o << metrics::csv_header() << '\n' << metrics::csv_row(stem, engine::to_string(result.verdict()), cost_of(result), w) << '\n';
    }
    {
        auto o = open_out(dir / (stem + ".events.jsonl"));
        for (const auto& e : attach_costs(eng.ranking_events(), eng.ranking_event_times(), result, w))
            o << event_to_json(e).dump() << '\n';
    }
    out << summary(stem, result, w) << '\n';
    return verdict_exit(result);
}

bool looks_safe_file(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
    {
        if (line.empty() || line[0] == 'c')
            continue;
        return line.rfind("p inv", 0) == 0;
    }
    return false;
}

int cmd_check_cert(const std::string& input, const std::string& cert_path, std::ostream& out)
{
    const auto source = read_file(input);
    certs::Checker checker(source);
    const auto text = read_file(cert_path);
    std::istringstream in(text);
    certs::CheckVerdict v;
    if (looks_safe_file(text))
    {
        auto sf = certs::read_safe(in);
        if (sf.num_latches != checker.circuit().num_latches())
        {
            v.failing_condition = certs::Condition::scope;
        }
        else
            v = checker.check_safe(sf.inv);
    }
    else
    {
        auto w = certs::read_unsafe(in);
        try
        {
            v = checker.check_unsafe(certs::expand_witness(checker.circuit(), w));
        }
        catch (const aiger::WidthMismatch&)
        {
            v.failing_condition = certs::Condition::trace_shape;
        }
    }
    out << v.describe() << '\n';
    return v.accepted ? 0 : exit_fail;
}

int cmd_minimize(const std::string& input, const std::string& cert_path, const std::string& output, std::ostream& out)
{
    certs::Checker checker(read_file(input));
    std::istringstream in(read_file(cert_path));
    auto sf = certs::read_safe(in);
    auto before = certs::literal_count(certs::canonicalize(sf.inv));
    auto inv = certs::minimize_invariant(checker.system(), sf.inv);
    auto o = open_out(output);
    certs::write_safe(o, sf.num_latches, inv);
    out << "lit(Inv) " << before << " -> " << certs::literal_count(inv) << " (" << checker.check_safe(inv).describe() << ")\n";
    return 0;
}

int cmd_replay(const std::string& input, const std::string& log_path, bool strict, std::ostream& out)
{
    auto problem = Problem::from_aiger(read_file(input));
    std::ifstream in(log_path);
    if (!in)
        throw IoError("cannot read " + log_path);
    auto log = replay::read_log(in);
    auto rep = replay::replay(problem, log, strict);
    if (rep.divergence)
    {
        out << "DIVERGENCE " << rep.divergence->what() << '\n';
        return exit_fail;
    }
    if (!rep.delta)
    {
        out << "REPLAY CONSISTENT (" << engine::to_string(rep.result->verdict()) << ", no certificate to compare)\n";
        return 0;
    }
    if (*rep.delta == 0.0)
    {
        out << "EXACT REPLAY Δ=0 (" << (strict ? "strict" : "reuse") << ", " << engine::to_string(rep.result->verdict())
            << ", " << rep.computed << " artifacts recomputed)\n";
        return 0;
    }
    out << "REPLAY MISMATCH Δ=" << fmt(*rep.delta) << '\n';
    return exit_fail;
}

int cmd_metrics(const std::vector<std::string>& inputs, const RunFlags& f, std::ostream& out)
{
    const auto w = weights_of(f);
    auto csv = open_out(fs::path(f.out_dir) / "metrics.csv");
    csv << metrics::csv_header() << '\n';
    out << metrics::csv_header() << '\n';
    auto scorer = scorer_of(f);
    for (const auto& input : inputs)
    {
        auto problem = Problem::from_aiger(read_file(input));
        engine::Engine eng(problem, options_of(f, input), scorer.get());
        auto r = eng.run();
        auto row = metrics::csv_row(stem_of(input), engine::to_string(r.verdict()), cost_of(r), w);
        csv << row << '\n';
        out << row << '\n';
    }
    return 0;
}

int cmd_stability(const std::vector<std::string>& inputs, const RunFlags& f, std::size_t seeds, std::ostream& out)
{
    auto csv = open_out(fs::path(f.out_dir) / "stability.csv");
    csv << "instance,safe_runs,pairs,median_delta\n";
    auto scorer = scorer_of(f);
    for (const auto& input : inputs)
    {
        auto problem = Problem::from_aiger(read_file(input));
        std::vector<Cnf> invs;
        for (std::size_t s = 0; s < seeds; ++s)
        {
            auto flags = f;
            flags.seed = s;
            engine::Engine eng(problem, options_of(flags, input), scorer.get());
            auto r = eng.run();
            if (r.verdict() == engine::Verdict::safe)
                invs.push_back(std::get<SafeCertificate>(*r.certificate()).inv);
        }
        std::vector<double> ds;
        for (std::size_t a = 0; a < invs.size(); ++a)
            for (std::size_t b = a + 1; b < invs.size(); ++b)
                ds.push_back(metrics::jaccard_distance(invs[a], invs[b]));
        const auto name = stem_of(input);
        if (ds.empty())
        {
            csv << name << ',' << invs.size() << ",0,\n";
            out << name << ": no SAFE seed pairs (" << invs.size() << " SAFE runs)\n";
            continue;
        }
        const auto med = metrics::median(ds);
        csv << name << ',' << invs.size() << ',' << ds.size() << ',' << fmt(med) << '\n';
        out << name << ": median Δ_seed=" << fmt(med) << " over " << ds.size() << " pairs\n";
    }
    return 0;
}

int cmd_train(const std::vector<std::string>& event_files, const std::string& output, double lambda, std::size_t epochs,
              std::uint64_t seed, std::ostream& out)
{
    std::vector<policy::RankingEvent> events;
    std::string manifest;
    for (const auto& path : event_files)
    {
        const auto text = read_file(path);
        manifest += sha256_hex(text) + "\n";
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line))
            if (!line.empty())
                events.push_back(event_from_json(json::parse(line)));
    }
    auto merged = policy::merge_rollouts(events);
    auto labels = policy::label_pairs(merged);
    auto res = policy::train(labels.pairs, lambda, epochs, seed, sha256_hex(manifest));
    auto o = open_out(output);
    policy::write_model(o, res.model);
    out << "trained on " << labels.pairs.size() << " pairs from " << merged.size() << " events; loss "
        << fmt(res.loss_history.front()) << " -> " << fmt(res.loss_history.back()) << "; model " << res.model.model_id << '\n';
    return 0;
}

} // namespace

json event_to_json(const policy::RankingEvent& e)
{
    json cands = json::array();
    for (const auto& c : e.candidates)
        cands.push_back({{"key", c.key},
                         {"psi", std::vector<double>(c.psi.begin(), c.psi.end())},
                         {"cost", c.cost ? json(*c.cost) : json(nullptr)},
                         {"failed", c.failed}});
    return {{"cp", policy::to_string(e.cp)},
            {"context", e.context_hash},
            {"chosen", e.chosen},
            {"guards", e.guard_outcomes},
            {"candidates", cands}};
}

policy::RankingEvent event_from_json(const json& j)
{
    policy::RankingEvent e;
    const auto cp = j.at("cp").get<std::string>();
    if (cp == policy::to_string(policy::ChoicePoint::cp1))
        e.cp = policy::ChoicePoint::cp1;
    else if (cp == policy::to_string(policy::ChoicePoint::cp2))
        e.cp = policy::ChoicePoint::cp2;
    else if (cp == policy::to_string(policy::ChoicePoint::cp3))
        e.cp = policy::ChoicePoint::cp3;
    else
        throw std::invalid_argument("unknown choice point '" + cp + "'");
    e.context_hash = j.at("context").get<std::string>();
    e.chosen = j.at("chosen").get<std::size_t>();
    e.guard_outcomes = j.value("guards", std::vector<bool>{});
    for (const auto& c : j.at("candidates"))
    {
        policy::CandidateOutcome o;
        o.key = c.at("key").get<std::string>();
        auto psi = c.at("psi").get<std::vector<double>>();
        if (psi.size() != policy::feature_dim)
            throw policy::DimMismatch("event feature vector has " + std::to_string(psi.size()) + " entries");
        std::copy(psi.begin(), psi.end(), o.psi.begin());
        if (!c.at("cost").is_null())
            o.cost = c.at("cost").get<double>();
        o.failed = c.value("failed", false);
        e.candidates.push_back(std::move(o));
    }
    return e;
}

std::vector<policy::RankingEvent> attach_costs(const std::vector<policy::RankingEvent>& events, const std::vector<double>& times,
                                               const engine::RunResult& result, const metrics::Weights& w)
{
    auto out = events;
    const bool ok = result.verdict() != engine::Verdict::fail;
    auto cv = cost_of(result);
    for (std::size_t n = 0; n < out.size(); ++n)
    {
        auto& e = out[n];
        if (e.candidates.empty())
            continue;
        auto& chosen = e.candidates.at(e.chosen);
        if (!ok)
        {
            chosen.failed = true;
            continue;
        }
        auto rest = cv;
        rest.t = std::max(0.0, cv.t - (n < times.size() ? times[n] : 0.0));
        chosen.cost = metrics::scalarize(rest, w);
    }
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app("capdr: certificate-aware PDR model checker for ASCII AIGER", "capdr");
    app.require_subcommand(1);

    RunFlags flags;
    std::string input, cert, log_path, output = "minimized.inv", model_out = "policy.model";
    std::vector<std::string> inputs, event_files;
    bool strict = false;
    std::size_t seeds = 10, epochs = 200;
    double lambda = 1e-3;
    std::uint64_t train_seed = 0;

    auto* solve = app.add_subcommand("solve", "model check one circuit");
    solve->add_option("input", input, "AIGER (.aag) file")->required();
    add_run_flags(solve, flags);

    auto* check = app.add_subcommand("check-cert", "independently check a certificate");
    check->add_option("input", input, "AIGER (.aag) file")->required();
    check->add_option("cert", cert, "certificate (.inv or .cex)")->required();

    auto* minimize = app.add_subcommand("minimize", "shrink a SAFE invariant");
    minimize->add_option("input", input, "AIGER (.aag) file")->required();
    minimize->add_option("cert", cert, "SAFE certificate")->required();
    minimize->add_option("-o,--output", output, "output certificate");

    auto* rep = app.add_subcommand("replay", "re-execute a run from its replay log");
    rep->add_option("input", input, "AIGER (.aag) file")->required();
    rep->add_option("log", log_path, "replay log (.jsonl)")->required();
    rep->add_flag("--strict-replay", strict, "recompute solver artifacts and compare digests")->envname("CAPDR_STRICT_REPLAY");

    auto* met = app.add_subcommand("metrics", "solve several circuits and write metrics.csv");
    met->add_option("inputs", inputs, "AIGER files")->required();
    add_run_flags(met, flags);

    auto* train = app.add_subcommand("train", "fit a pairwise ranking policy from logged events");
    train->add_option("events", event_files, "ranking event files (.events.jsonl)")->required();
    train->add_option("-o,--output", model_out, "model file");
    train->add_option("--lambda", lambda, "L2 strength");
    train->add_option("--epochs", epochs, "gradient steps");
    train->add_option("--seed", train_seed, "initialization seed");

    auto* stab = app.add_subcommand("stability", "median cross-seed invariant distance");
    stab->add_option("inputs", inputs, "AIGER files")->required();
    stab->add_option("--seeds", seeds, "number of seeds")->envname("CAPDR_SEEDS");
    add_run_flags(stab, flags);

    std::vector<std::string> argv_store{"capdr"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store)
        argv.push_back(s.data());
    try
    {
        app.parse(int(argv.size()), argv.data());
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : exit_io;
    }

    try
    {
        if (*solve)
            return cmd_solve(input, flags, out);
        if (*check)
            return cmd_check_cert(input, cert, out);
        if (*minimize)
            return cmd_minimize(input, cert, output, out);
        if (*rep)
            return cmd_replay(input, log_path, strict, out);
        if (*met)
            return cmd_metrics(inputs, flags, out);
        if (*train)
            return cmd_train(event_files, model_out, lambda, epochs, train_seed, out);
        if (*stab)
            return cmd_stability(inputs, flags, seeds, out);
    }
    catch (const IoError& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_io;
    }
    catch (const fs::filesystem_error& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_io;
    }
    catch (const aiger::ParseError& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_io;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_fail;
    }
    return exit_fail;
}

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

} // namespace capdr::cli
