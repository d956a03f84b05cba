#include "capdr/engine.hpp"

#include "capdr/digest.hpp"

#include <algorithm>

namespace capdr::engine {

using replay::json;
using replay::RecordKind;

namespace {

std::array<std::uint64_t, 4> word_hash(const std::string& hex)
{
    std::array<std::uint64_t, 4> w{};
    for (std::size_t n = 0; n < w.size(); ++n)
        w[n] = std::stoull(hex.substr(n * 16, 16), nullptr, 16);
    return w;
}

json cnf_json(const Cnf& cnf)
{
    json out = json::array();
    for (const auto& c : cnf)
        out.push_back(c.lits);
    return out;
}

Cube cube_from_json(const json& j) { return Cube{j.get<std::vector<Lit>>()}; }

std::string hash_json(const json& j) { return sha256_hex(j.dump()); }

void add_clause(sat::Solver& s, const std::vector<int>& lits) { s.add_clause(std::span<const int>(lits)); }

// Fresh-context implication check: premise (∧ Trans) ⇒ conclusion (primed
// when `step`). Returns the first clause of the conclusion that fails.
std::optional<std::size_t> first_unimplied(const TransitionSystem& ts, const Cnf& premise, bool step, const Cnf& conclusion)
{
    for (std::size_t ci = 0; ci < conclusion.size(); ++ci)
    {
        sat::Solver s;
        s.reserve_vars(ts.num_vars());
        for (const auto& c : premise)
            add_clause(s, c.lits);
        if (step)
            for (const auto& c : ts.trans_cnf())
                add_clause(s, c);
        std::vector<int> assumptions;
        for (Lit l : conclusion[ci].lits)
            assumptions.push_back(step ? -ts.prime(l) : -l);
        if (s.solve(std::span<const int>(assumptions)).is_sat())
            return ci;
    }
    return std::nullopt;
}

} // namespace

const char* to_string(Cp1Mode mode)
{
    return mode == Cp1Mode::core ? "core" : "fallback_only";
}

Cp1Mode cp1_mode_from_string(const std::string& s)
{
    if (s == "core")
        return Cp1Mode::core;
    if (s == "fallback_only")
        return Cp1Mode::fallback_only;
    throw std::invalid_argument("unknown CP1 mode '" + s + "'");
}

const char* to_string(Verdict v)
{
    switch (v)
    {
    case Verdict::safe: return "SAFE";
    case Verdict::unsafe: return "UNSAFE";
    case Verdict::fail: return "FAIL";
    }
    return "?";
}

// ---- FrameSequence ----

FrameSequence::FrameSequence(Cnf init, Cnf prop)
    : _init(std::move(init))
    , _prop(std::move(prop))
    , _learned(2)
    , _members(2)
{
}

const std::vector<Clause>& FrameSequence::learned(std::size_t i) const
{
    if (i == 0 || i >= _learned.size())
        throw std::out_of_range("frame index " + std::to_string(i));
    return _learned[i];
}

bool FrameSequence::contains(std::size_t i, const Clause& c) const
{
    if (i == 0 || i >= _members.size())
        return false;
    return _members[i].count(c) != 0;
}

Cnf FrameSequence::clauses(std::size_t i) const
{
    if (i == 0)
        return _init;
    Cnf out = _prop;
    const auto& l = learned(i);
    out.insert(out.end(), l.begin(), l.end());
    return out;
}

Cnf FrameSequence::canonical(std::size_t i) const { return certs::canonicalize(clauses(i)); }

bool FrameSequence::add(std::size_t i, const Clause& c)
{
    if (i == 0)
        throw GuardNotEstablished("clauses are never added to F_0");
    if (i >= _learned.size())
        throw std::out_of_range("frame index " + std::to_string(i));
    if (!_members[i].insert(c).second)
        return false;
    _learned[i].push_back(c);
    return true;
}

void FrameSequence::extend()
{
    _learned.emplace_back();
    _members.emplace_back();
}

// ---- RunResult ----

RunResult RunResult::from_check(Certificate cert, const certs::CheckVerdict& verdict, double solve_seconds)
{
    RunResult r;
    r._check = verdict;
    r._solve_seconds = solve_seconds;
    if (!verdict.accepted)
    {
        r._verdict = Verdict::fail;
        r._fail_reason = "checker_rejected: " + verdict.describe();
        return r;
    }
    r._verdict = std::holds_alternative<SafeCertificate>(cert) ? Verdict::safe : Verdict::unsafe;
    r._certificate = std::move(cert);
    return r;
}

RunResult RunResult::failure(std::string reason, double solve_seconds)
{
    RunResult r;
    r._verdict = Verdict::fail;
    r._fail_reason = std::move(reason);
    r._solve_seconds = solve_seconds;
    return r;
}

// ---- scorer specs ----

json scorer_spec(const policy::Scorer* scorer)
{
    if (!scorer)
        return {{"kind", "baseline"}};
    if (auto lin = dynamic_cast<const policy::LinearScorer*>(scorer))
    {
        const auto& m = lin->model();
        return {{"kind", "linear"},
                {"model_id", m.model_id},
                {"trained_on", m.trained_on},
                {"weights", std::vector<double>(m.weights.begin(), m.weights.end())}};
    }
    auto id = scorer->id();
    if (id.rfind("random:", 0) == 0)
        return {{"kind", "random"}, {"seed", std::stoull(id.substr(7))}};
    return {{"kind", "opaque"}, {"id", id}};
}

std::unique_ptr<policy::Scorer> scorer_from_spec(const json& spec)
{
    const auto kind = spec.at("kind").get<std::string>();
    if (kind == "baseline")
        return nullptr;
    if (kind == "random")
        return std::make_unique<policy::RandomScorer>(spec.at("seed").get<std::uint64_t>());
    if (kind == "linear")
    {
        auto w = spec.at("weights").get<std::vector<double>>();
        if (w.size() != policy::feature_dim)
            throw policy::DimMismatch("scorer spec has " + std::to_string(w.size()) + " weights");
        policy::FeatureVector fv{};
        std::copy(w.begin(), w.end(), fv.begin());
        auto model = policy::PolicyModel::from_weights(fv, spec.value("trained_on", ""));
        if (model.model_id != spec.at("model_id").get<std::string>())
            throw std::invalid_argument("scorer spec model_id does not match its weights");
        return std::make_unique<policy::LinearScorer>(std::move(model));
    }
    throw std::invalid_argument("cannot rebuild scorer of kind '" + kind + "'");
}

// ---- Engine ----

Engine::Engine(const Problem& problem, Options options, const policy::Scorer* scorer, replay::Journal* journal,
               Observer* observer)
    : _problem(problem)
    , _sys(problem.system)
    , _options(std::move(options))
    , _scorer(scorer)
    , _journal(journal)
    , _observer(observer)
    , _solver(_options.seed)
    , _frames(problem.system.init_cnf(), problem.system.prop_cnf())
    , _frame_acts(2)
    , _frame_hash(2)
    , _start(std::chrono::steady_clock::now())
{
    if (!_journal)
    {
        _own_journal = std::make_unique<replay::Journal>();
        _journal = _own_journal.get();
    }
    _solver.set_conflict_budget(_options.conflict_budget);
    _solver.reserve_vars(_sys.num_vars());
    for (const auto& c : _sys.trans_cnf())
        add_clause(_solver, c);

    _act_init = _solver.new_var();
    for (const auto& c : _sys.init_cnf())
    {
        std::vector<int> lits{-_act_init};
        lits.insert(lits.end(), c.lits.begin(), c.lits.end());
        add_clause(_solver, lits);
    }
    _act_prop = _solver.new_var();
    for (const auto& c : _sys.prop_cnf())
    {
        std::vector<int> lits{-_act_prop};
        lits.insert(lits.end(), c.lits.begin(), c.lits.end());
        add_clause(_solver, lits);
    }

    // ¬Prop over X (act_bad) and over X' (act_bad_next): one selector per
    // Prop clause, selector ⇒ clause falsified, activation ⇒ some selector.
    auto negation = [&](bool primed) {
        int act = _solver.new_var();
        std::vector<int> any{-act};
        for (const auto& c : _sys.prop_cnf())
        {
            int sel = _solver.new_var();
            any.push_back(sel);
            for (Lit l : c.lits)
                _solver.add_clause({-sel, primed ? -_sys.prime(l) : -l});
        }
        add_clause(_solver, any);
        return act;
    };
    _act_bad = negation(false);
    _act_bad_next = negation(true);

    _init_digest = hash_json(cnf_json(certs::canonicalize(_sys.init_cnf())));
    const auto prop_hash = word_hash(hash_json(cnf_json(certs::canonicalize(_sys.prop_cnf()))));
    std::fill(_frame_hash.begin(), _frame_hash.end(), prop_hash);
}

double Engine::elapsed() const
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - _start).count();
}

void Engine::check_budget() const
{
    if (_options.budget_secs && elapsed() >= *_options.budget_secs)
        throw BudgetExceeded("wall-clock budget exhausted");
    if (_options.max_queries && _solver.stats().queries >= _options.max_queries)
        throw BudgetExceeded("query budget exhausted");
}

std::vector<int> Engine::frame_assumptions(std::size_t i) const
{
    if (i == 0)
        return {_act_init};
    std::vector<int> out{_act_prop};
    const auto& acts = _frame_acts.at(i);
    out.insert(out.end(), acts.begin(), acts.end());
    return out;
}

Engine::ClauseInfo& Engine::info_for(const Clause& c)
{
    auto it = _clause_info.find(c);
    if (it != _clause_info.end())
        return it->second;
    ClauseInfo info;
    info.activation = _solver.new_var();
    info.insertion = _insertions++;
    info.hash = word_hash(sha256_hex(json(c.lits).dump()));
    std::vector<int> lits{-info.activation};
    lits.insert(lits.end(), c.lits.begin(), c.lits.end());
    add_clause(_solver, lits);
    return _clause_info.emplace(c, info).first->second;
}

// Order-independent: XOR of the clause digests, so commits update it in O(1).
std::string Engine::frame_digest(std::size_t i) const
{
    if (i == 0)
        return _init_digest;
    std::string out(64, '0');
    const auto& h = _frame_hash.at(i);
    static const char* hex = "0123456789abcdef";
    for (std::size_t w = 0; w < h.size(); ++w)
        for (int n = 0; n < 16; ++n)
            out[w * 16 + std::size_t(n)] = hex[(h[w] >> (60 - 4 * n)) & 0xf];
    return out;
}

json Engine::config_payload() const
{
    json opts = {
        {"seed", _options.seed},
        {"budget_secs", _options.budget_secs ? json(*_options.budget_secs) : json(nullptr)},
        {"max_queries", _options.max_queries},
        {"conflict_budget", _options.conflict_budget},
        {"fairness_bound", _options.fairness_bound},
        {"cand_budget", _options.cand_budget},
        {"cp1", to_string(_options.cp1)},
        {"minimize", _options.minimize},
        {"assert_frame_invariants", _options.assert_frame_invariants},
    };
    return {
        {"tool", tool_name},
        {"version", tool_version},
        {"sat", sat_backend},
        {"circuit_sha256", sha256_hex(_problem.source)},
        {"feature_schema", policy::feature_schema_hash()},
        {"options", opts},
        {"scorer", scorer_spec(_scorer)},
        {"extra", _options.extra},
    };
}

std::optional<Trace> Engine::check_length0()
{
    auto payload = _journal->artifact(RecordKind::cti_cube, [&] {
        auto r = _solver.solve({_act_init, _act_bad});
        json p = {{"query", "length0"}, {"k", 0}, {"conflicts", _solver.last_conflicts()}, {"cube", nullptr}};
        if (r.is_sat())
        {
            ++_stats.model_extractions;
            Bits x(std::size_t(_sys.num_latches()));
            for (int i = 0; i < _sys.num_latches(); ++i)
                x[std::size_t(i)] = r.value(_sys.x_var(i));
            p["cube"] = state_cube(x).lits;
        }
        return p;
    });
    _last_conflicts = payload.at("conflicts").get<std::uint64_t>();
    if (payload.at("cube").is_null())
        return std::nullopt;
    Trace t;
    t.states.push_back(cube_bits(cube_from_json(payload.at("cube")), std::size_t(_sys.num_latches())));
    return t;
}

std::size_t Engine::add_obligation(std::size_t level, Cube cube, std::optional<std::size_t> successor, Bits input)
{
    for (auto id : _pending)
        if (_obligations[id].level == level && _obligations[id].cube == cube)
            return id;
    Obligation ob;
    ob.level = level;
    ob.cube = std::move(cube);
    ob.successor = successor;
    ob.input = std::move(input);
    ob.stamp = _stamp++;
    ob.depth = successor ? _obligations.at(*successor).depth + 1 : 0;
    _obligations.push_back(std::move(ob));
    _pending.push_back(_obligations.size() - 1);
    return _obligations.size() - 1;
}

std::optional<std::size_t> Engine::cti_query()
{
    const auto k = _frames.depth();
    ++_stats.cti_queries;
    auto payload = _journal->artifact(RecordKind::cti_cube, [&] {
        auto assumptions = frame_assumptions(k);
        assumptions.push_back(_act_bad_next);
        auto r = _solver.solve(std::span<const int>(assumptions));
        json p = {{"query", "cti"}, {"k", k}, {"conflicts", _solver.last_conflicts()}, {"cube", nullptr}};
        if (r.is_sat())
        {
            ++_stats.model_extractions;
            Bits x(std::size_t(_sys.num_latches()));
            for (int i = 0; i < _sys.num_latches(); ++i)
                x[std::size_t(i)] = r.value(_sys.xp_var(i));
            p["cube"] = state_cube(x).lits;
        }
        return p;
    });
    _last_conflicts = payload.at("conflicts").get<std::uint64_t>();
    if (payload.at("cube").is_null())
        return std::nullopt;
    return add_obligation(k + 1, cube_from_json(payload.at("cube")));
}

PredecessorResult Engine::predecessor_query(std::size_t i, const Cube& d)
{
    if (i == 0)
        throw std::invalid_argument("predecessor query at level 0");
    ++_stats.predecessor_queries;
    std::optional<Cube> core;
    auto payload = _journal->artifact(RecordKind::pred_cube, [&] {
        auto assumptions = frame_assumptions(i - 1);
        for (Lit l : d.lits)
            assumptions.push_back(_sys.prime(l));
        auto r = _solver.solve(std::span<const int>(assumptions));
        json p = {{"i", i}, {"d", d.lits}, {"conflicts", _solver.last_conflicts()}, {"pred", nullptr}, {"input", ""}};
        if (r.is_sat())
        {
            ++_stats.model_extractions;
            Bits x(std::size_t(_sys.num_latches())), u(std::size_t(_sys.num_inputs()));
            for (int v = 0; v < _sys.num_latches(); ++v)
                x[std::size_t(v)] = r.value(_sys.x_var(v));
            for (int v = 0; v < _sys.num_inputs(); ++v)
                u[std::size_t(v)] = r.value(_sys.u_var(v));
            p["pred"] = state_cube(x).lits;
            p["input"] = to_bitstring(u);
        }
        else
        {
            Cube c;
            for (int l : r.failed)
                if (_sys.is_next_var(var_of(l)))
                    c.lits.push_back(_sys.unprime(l));
            normalize(c.lits);
            core = std::move(c);
        }
        return p;
    });
    _last_conflicts = payload.at("conflicts").get<std::uint64_t>();

    PredecessorResult out;
    if (!payload.at("pred").is_null())
    {
        out.sat = true;
        out.pred = cube_from_json(payload.at("pred"));
        out.input = from_bitstring(payload.at("input").get<std::string>());
        return out;
    }
    auto core_payload = _journal->artifact(RecordKind::unsat_core, [&] {
        if (!core)
            throw InternalError("unsat core requested without a solver answer");
        return json{{"i", i}, {"core", core->lits}};
    });
    out.core = cube_from_json(core_payload.at("core"));
    return out;
}

bool Engine::initial_intersects(const Cube& d)
{
    const auto& reset = _sys.reset();
    bool hit = std::all_of(d.lits.begin(), d.lits.end(), [&](Lit l) {
        return reset.at(std::size_t(var_of(l) - 1)) == (l > 0);
    });
    _journal->decision(RecordKind::guard_outcome, {{"init_intersects", hit}, {"d", d.lits}});
    return hit;
}

bool Engine::guard_initiation(const Clause& c)
{
    std::vector<int> assumptions{_act_init};
    for (Lit l : c.lits)
        assumptions.push_back(-l);
    return !_solver.solve(std::span<const int>(assumptions)).is_sat();
}

bool Engine::guard_relative(std::size_t i, const Clause& c)
{
    if (i == 0)
        throw std::invalid_argument("relative guard at level 0");
    auto assumptions = frame_assumptions(i - 1);
    for (Lit l : c.lits)
        assumptions.push_back(-_sys.prime(l));
    return !_solver.solve(std::span<const int>(assumptions)).is_sat();
}

void Engine::commit(const Clause& c, std::size_t level, bool push)
{
    const auto& info = info_for(c);
    for (std::size_t j = push ? level : 1; j <= level; ++j)
        if (_frames.add(j, c))
        {
            _frame_acts[j].push_back(info.activation);
            for (std::size_t w = 0; w < info.hash.size(); ++w)
                _frame_hash[j][w] ^= info.hash[w];
        }
    if (_options.assert_frame_invariants)
    {
        ++_stats.invariant_checks;
        auto report = verify_frame_invariants();
        if (!report.ok)
            throw InternalError("frame invariant violated after commit: " + report.violation);
    }
    if (_observer)
        _observer->on_commit(*this, c, level, push);
}

void Engine::insert_blocker(const Clause& c, std::size_t i)
{
    if (i == 0)
        throw GuardNotEstablished("clauses are never added to F_0");
    if (i > _frames.depth() + 1)
        throw std::out_of_range("frame index " + std::to_string(i));
    auto lits = c.lits;
    normalize(lits);
    if (lits.empty() || has_complement(lits) || lits != c.lits)
        throw GuardNotEstablished("blocker is not a canonical nonempty clause: " + to_string(c));
    for (Lit l : lits)
        if (!_sys.is_state_var(var_of(l)))
            throw GuardNotEstablished("blocker mentions a non-state variable: " + to_string(c));
    if (!guard_initiation(c))
        throw GuardNotEstablished("initiation fails for " + to_string(c));
    if (!guard_relative(i, c))
        throw GuardNotEstablished("relative inductiveness fails for " + to_string(c) + " at level " + std::to_string(i));
    commit(c, i, false);
}

bool Engine::push_clause(const Clause& c, std::size_t i)
{
    if (i == 0 || !_frames.contains(i, c))
        throw std::invalid_argument("push_clause: clause not in F_" + std::to_string(i));
    if (_frames.contains(i + 1, c))
        return true;
    auto assumptions = frame_assumptions(i);
    for (Lit l : c.lits)
        assumptions.push_back(-_sys.prime(l));
    if (_solver.solve(std::span<const int>(assumptions)).is_sat())
        return false;
    commit(c, i + 1, true);
    return true;
}

std::optional<Cnf> Engine::fixpoint_check() const
{
    // Learned parts are nested, so equal sizes mean equal sets.
    for (std::size_t j = 1; j <= _frames.depth(); ++j)
        if (_frames.learned(j).size() == _frames.learned(j + 1).size())
            return _frames.canonical(j);
    return std::nullopt;
}

void Engine::extend_frontier()
{
    _frames.extend();
    _frame_acts.emplace_back();
    _frame_hash.emplace_back(_frame_hash.front());
}

Trace Engine::reconstruct_trace(std::size_t obligation) const
{
    const auto width = std::size_t(_sys.num_latches());
    Trace t;
    std::optional<std::size_t> cur = obligation;
    while (cur)
    {
        const auto& ob = _obligations.at(*cur);
        t.states.push_back(cube_bits(ob.cube, width));
        if (ob.successor)
            t.inputs.push_back(ob.input);
        cur = ob.successor;
    }
    return t;
}

FrameInvariantReport Engine::verify_frame_invariants() const
{
    FrameInvariantReport rep;
    const auto k = _frames.depth();
    auto fail = [&](std::string what) {
        rep.ok = false;
        rep.violation = std::move(what);
        return rep;
    };

    if (certs::canonicalize(_frames.clauses(0)) != certs::canonicalize(_sys.init_cnf()))
        return fail("F_0 differs from Init");
    for (std::size_t i = 0; i <= k; ++i)
        if (first_unimplied(_sys, _frames.clauses(i), false, _frames.clauses(i + 1)))
            return fail("monotonicity F_" + std::to_string(i) + " => F_" + std::to_string(i + 1));
    for (std::size_t i = 1; i <= k + 1; ++i)
        if (first_unimplied(_sys, _frames.clauses(i), false, _sys.prop_cnf()))
            return fail("F_" + std::to_string(i) + " => Prop");
    for (std::size_t i = 0; i < k; ++i)
        if (first_unimplied(_sys, _frames.clauses(i), true, _frames.clauses(i + 1)))
            return fail("consecution F_" + std::to_string(i) + " & Trans => F_" + std::to_string(i + 1) + "'");
    return rep;
}

policy::FeatureVector Engine::obligation_features(const Obligation& ob) const
{
    using namespace policy;
    FeatureVector psi{};
    psi[frame_index] = double(ob.level);
    psi[literal_count] = double(ob.cube.size());
    psi[recency] = double(_stamp - ob.stamp);
    psi[requeue_count] = double(ob.requeue_count);
    psi[chain_depth] = double(ob.depth);
    psi[last_conflicts] = double(_last_conflicts);
    psi[frame_count] = double(_frames.depth());
    psi[queue_length] = double(_pending.size());
    psi[bias] = 1.0;
    return psi;
}

std::size_t Engine::select()
{
    std::vector<policy::ObligationEntry> entries;
    entries.reserve(_pending.size());
    for (auto id : _pending)
    {
        const auto& ob = _obligations[id];
        entries.push_back({ob.level, ob.stamp, ob.skipped, &ob.cube, obligation_features(ob)});
    }
    const auto pick = policy::select_obligation(entries, _scorer, _options.fairness_bound);
    const auto id = _pending[pick];

    policy::RankingEvent ev;
    ev.cp = policy::ChoicePoint::cp2;
    json ctx = json::array();
    for (std::size_t n = 0; n < _pending.size(); ++n)
    {
        const auto& ob = _obligations[_pending[n]];
        auto key = std::to_string(ob.level) + ":" + to_string(ob.cube);
        ctx.push_back(key);
        ev.candidates.push_back({key, entries[n].psi, std::nullopt, false});
    }
    std::sort(ctx.begin(), ctx.end());
    ev.context_hash = hash_json({{"cp", "cp2"}, {"queue", ctx}});
    ev.chosen = pick;
    _events.push_back(std::move(ev));
    _event_times.push_back(elapsed());

    _journal->decision(RecordKind::action_attempt, {{"cp", "cp2"}, {"level", _obligations[id].level}, {"cube", _obligations[id].cube.lits}});

    for (auto other : _pending)
        if (other != id)
            ++_obligations[other].skipped;
    _obligations[id].skipped = 0;
    _pending.erase(_pending.begin() + std::ptrdiff_t(pick));
    return id;
}

// Serves one obligation. Returns true when it closed a counterexample chain.
bool Engine::block(std::size_t id)
{
    ++_stats.obligations_served;
    const auto i = _obligations[id].level;
    const Cube d = _obligations[id].cube;

    if (initial_intersects(d))
        return true;
    if (i == 0)
        throw InternalError("level-0 obligation outside Init");
    const auto& here = _frames.learned(i);
    if (std::any_of(here.begin(), here.end(), [&](const Clause& c) { return blocks(d, c); }))
        return false;

    auto pr = predecessor_query(i, d);
    if (pr.sat)
    {
        ++_obligations[id].requeue_count;
        _obligations[id].stamp = _stamp++;
        _pending.push_back(id);
        add_obligation(i - 1, std::move(pr.pred), id, std::move(pr.input));
        return false;
    }

    ++_stats.unsat_predecessor_episodes;
    std::vector<Clause> cands;
    if (_options.cp1 == Cp1Mode::core)
        cands = policy::generate_blocker_candidates(d, pr.core, _options.cand_budget);
    else
        cands = policy::generate_blocker_candidates(d, std::nullopt, 0);

    const auto& ob = _obligations[id];
    std::vector<policy::FeatureVector> psis;
    for (const auto& c : cands)
    {
        auto psi = obligation_features(ob);
        psi[policy::literal_count] = double(c.size());
        auto it = _clause_info.find(c);
        psi[policy::clause_activity] = it == _clause_info.end() ? 0.0 : double(it->second.push_successes);
        psis.push_back(psi);
    }
    const auto order = policy::rank(psis, _scorer);
    std::vector<Clause> ranked;
    for (auto n : order)
        ranked.push_back(cands[n]);

    json cand_json = json::array();
    for (const auto& c : ranked)
        cand_json.push_back(c.lits);
    _journal->decision(RecordKind::candidate_set, {{"cp", "cp1"}, {"i", i}, {"d", d.lits}, {"candidates", cand_json}});
    if (_observer)
        _observer->on_blocking(*this, i, d, ranked);

    policy::RankingEvent ev;
    ev.cp = policy::ChoicePoint::cp1;
    const auto ctx_digest = frame_digest(i - 1);
    ev.context_hash = hash_json({{"cp", "cp1"}, {"i", i}, {"d", d.lits}, {"frame", ctx_digest}});
    for (auto n : order)
        ev.candidates.push_back({to_string(cands[n]), psis[n], std::nullopt, false});

    for (std::size_t n = 0; n < ranked.size(); ++n)
    {
        const auto& c = ranked[n];
        _journal->decision(RecordKind::context_hash, {{"frame", ctx_digest}, {"i", i}});
        _journal->decision(RecordKind::action_attempt, {{"cp", "cp1"}, {"i", i}, {"clause", c.lits}});
        bool init_ok = guard_initiation(c);
        std::optional<bool> rel_ok;
        if (init_ok)
            rel_ok = guard_relative(i, c);
        _journal->decision(RecordKind::guard_outcome, {{"init", init_ok}, {"rel", rel_ok ? json(*rel_ok) : json(nullptr)}});
        const bool pass = init_ok && rel_ok.value_or(false);
        ev.guard_outcomes.push_back(pass);
        if (!pass)
        {
            ++_stats.guard_failures;
            continue;
        }
        commit(c, i, false);
        ++_stats.blockers_committed;
        if (c == negate(d))
            ++_stats.fallback_commits;
        ev.chosen = n;
        _events.push_back(std::move(ev));
        _event_times.push_back(elapsed());
        return false;
    }
    ++_stats.candidate_exhaustions;
    throw InternalError("no blocker candidate passed the guards for " + to_string(d) + " at level " + std::to_string(i));
}

void Engine::push_phase()
{
    const auto k = _frames.depth();
    std::vector<policy::PushEntry> entries;
    std::vector<std::pair<Clause, std::size_t>> items;
    for (std::size_t i = 1; i <= k; ++i)
        for (const auto& c : _frames.learned(i))
        {
            if (_frames.contains(i + 1, c))
                continue;
            const auto& info = _clause_info.at(c);
            policy::FeatureVector psi{};
            psi[policy::frame_index] = double(i);
            psi[policy::literal_count] = double(c.size());
            psi[policy::recency] = double(_insertions - info.insertion);
            psi[policy::last_conflicts] = double(_last_conflicts);
            psi[policy::clause_activity] = double(info.push_successes);
            psi[policy::frame_count] = double(k);
            psi[policy::queue_length] = double(_pending.size());
            psi[policy::bias] = 1.0;
            entries.push_back({i, info.insertion, psi});
            items.emplace_back(c, i);
        }
    if (items.empty())
        return;
    const auto order = policy::order_push_candidates(entries, _scorer);

    policy::RankingEvent ev;
    ev.cp = policy::ChoicePoint::cp3;
    json ctx = json::array();
    for (std::size_t i = 1; i <= k + 1; ++i)
        ctx.push_back(frame_digest(i));
    ev.context_hash = hash_json({{"cp", "cp3"}, {"frames", ctx}});
    for (auto n : order)
        ev.candidates.push_back({std::to_string(items[n].second) + ":" + to_string(items[n].first), entries[n].psi, std::nullopt, false});

    for (auto n : order)
    {
        check_budget();
        const auto& [c, i] = items[n];
        ++_stats.push_attempts;
        _journal->decision(RecordKind::action_attempt, {{"cp", "cp3"}, {"i", i}, {"clause", c.lits}});
        const bool ok = push_clause(c, i);
        _journal->decision(RecordKind::guard_outcome, {{"push", ok}});
        ev.guard_outcomes.push_back(ok);
        if (ok)
        {
            ++_stats.push_successes;
            ++_clause_info.at(c).push_successes;
        }
    }
    _events.push_back(std::move(ev));
    _event_times.push_back(elapsed());
}

RunResult Engine::finish_unsafe(Trace trace)
{
    const double t = elapsed();
    certs::Checker checker(_problem.source);
    auto verdict = checker.check_unsafe(trace);
    auto witness = certs::format_unsafe(trace);
    _journal->certificate({{"verdict", "UNSAFE"}, {"witness", witness}, {"accepted", verdict.accepted}},
                          {{"t", t}, {"t_chk", verdict.checker_time}});
    auto r = RunResult::from_check(UnsafeCertificate{std::move(trace)}, verdict, t);
    r.stats = _stats;
    return r;
}

RunResult Engine::finish_safe(Cnf inv)
{
    certs::Checker checker(_problem.source);
    inv = certs::canonicalize(std::move(inv));
    if (_options.minimize && certs::check_safe(checker.system(), inv).accepted)
        inv = certs::minimize_invariant(checker.system(), inv);
    const double t = elapsed();
    auto verdict = checker.check_safe(inv);
    _journal->certificate({{"verdict", "SAFE"}, {"inv", cnf_json(inv)}, {"accepted", verdict.accepted}},
                          {{"t", t}, {"t_chk", verdict.checker_time}});
    auto r = RunResult::from_check(SafeCertificate{std::move(inv)}, verdict, t);
    r.stats = _stats;
    return r;
}

RunResult Engine::finish_fail(const std::string& reason)
{
    const double t = elapsed();
    _journal->certificate({{"verdict", "FAIL"}, {"reason", reason}}, {{"t", t}});
    auto r = RunResult::failure(reason, t);
    r.stats = _stats;
    return r;
}

RunResult Engine::run()
{
    _start = std::chrono::steady_clock::now();
    _journal->decision(RecordKind::config, config_payload());
    _journal->decision(RecordKind::seed, {{"seed", _options.seed}});
    try
    {
        check_budget();
        if (auto t = check_length0())
            return finish_unsafe(std::move(*t));

        while (true)
        {
            check_budget();
            if (cti_query())
            {
                while (!_pending.empty())
                {
                    check_budget();
                    const auto id = select();
                    if (block(id))
                        return finish_unsafe(reconstruct_trace(id));
                }
                continue;
            }
            push_phase();
            if (auto inv = fixpoint_check())
                return finish_safe(std::move(*inv));
            extend_frontier();
        }
    }
    catch (const BudgetExceeded& e)
    {
        return finish_fail(std::string("timeout: ") + e.what());
    }
    catch (const sat::ResourceBudgetExceeded& e)
    {
        return finish_fail(std::string("memory: ") + e.what());
    }
    catch (const InternalError& e)
    {
        return finish_fail(std::string("internal: ") + e.what());
    }
}

} // namespace capdr::engine
