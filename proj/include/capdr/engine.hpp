#pragma once

#include "capdr/certs.hpp"
#include "capdr/journal.hpp"
#include "capdr/policy.hpp"
#include "capdr/sat.hpp"
#include "capdr/transition_system.hpp"
#include "capdr/types.hpp"

#include <array>
#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace capdr::engine {

inline constexpr const char* tool_name = "capdr";
inline constexpr const char* tool_version = "1.0.0";
inline constexpr const char* sat_backend = "capdr-cdcl 1";

enum class Cp1Mode
{
    core,          // ¬d_core and its literal deletions, then ¬d
    fallback_only, // ¬d only
};

struct Options
{
    std::uint64_t seed = 0;
    std::optional<double> budget_secs; // wall clock; unset = unlimited
    std::uint64_t max_queries = 0;     // 0 = unlimited
    std::uint64_t conflict_budget = 0; // per SAT query, 0 = unlimited
    std::size_t fairness_bound = 64;
    std::size_t cand_budget = 16;
    Cp1Mode cp1 = Cp1Mode::core;
    bool minimize = false;
    // Re-verify frame invariants with fresh SAT contexts after every commit.
    bool assert_frame_invariants = false;
    // Front-end settings echoed into the config record (weights, paths).
    replay::json extra = replay::json::object();
};

const char* to_string(Cp1Mode mode);
Cp1Mode cp1_mode_from_string(const std::string& s);

// F_0 = Init; F_i (i ≥ 1) = Prop ∧ learned_i, with learned_{i+1} ⊆ learned_i.
class FrameSequence
{
public:
    FrameSequence(Cnf init, Cnf prop);

    // Current depth k; frames F_0..F_{k+1} exist.
    std::size_t depth() const { return _learned.size() - 2; }
    const Cnf& init() const { return _init; }
    const Cnf& prop() const { return _prop; }

    // Learned clauses of F_i in insertion order, i ≥ 1.
    const std::vector<Clause>& learned(std::size_t i) const;
    bool contains(std::size_t i, const Clause& c) const;

    // Full clause set of F_i.
    Cnf clauses(std::size_t i) const;
    Cnf canonical(std::size_t i) const;

    // Adds c to F_i; false if already present. i must be ≥ 1.
    bool add(std::size_t i, const Clause& c);
    void extend();

private:
    Cnf _init;
    Cnf _prop;
    std::vector<std::vector<Clause>> _learned; // index 0 unused
    std::vector<std::set<Clause, ClauseLess>> _members;
};

struct Obligation
{
    std::size_t level = 0;
    Cube cube;
    // Link towards the bad state: the obligation this one is a predecessor
    // of, and the input that drives `cube` into it.
    std::optional<std::size_t> successor;
    Bits input;
    std::uint64_t stamp = 0;
    std::size_t requeue_count = 0;
    std::size_t depth = 0; // links to the chain terminus
    std::size_t skipped = 0;
};

struct PredecessorResult
{
    bool sat = false;
    Cube pred;                // SAT: full predecessor state cube
    Bits input;               // SAT: witness input
    std::optional<Cube> core; // UNSAT: target literals in the failed set
};

struct Stats
{
    std::uint64_t cti_queries = 0;
    std::uint64_t predecessor_queries = 0;
    std::uint64_t obligations_served = 0;
    std::uint64_t unsat_predecessor_episodes = 0;
    std::uint64_t blockers_committed = 0;
    std::uint64_t fallback_commits = 0;
    std::uint64_t candidate_exhaustions = 0;
    std::uint64_t guard_failures = 0;
    std::uint64_t push_attempts = 0;
    std::uint64_t push_successes = 0;
    std::uint64_t model_extractions = 0;
    std::uint64_t invariant_checks = 0;
};

enum class Verdict
{
    safe,
    unsafe,
    fail,
};

const char* to_string(Verdict v);

// Outcome of a run. SAFE/UNSAFE can only be produced from a checker verdict
// that accepted the certificate.
class RunResult
{
public:
    static RunResult from_check(Certificate cert, const certs::CheckVerdict& verdict, double solve_seconds);
    static RunResult failure(std::string reason, double solve_seconds);

    Verdict verdict() const { return _verdict; }
    const std::optional<Certificate>& certificate() const { return _certificate; }
    const certs::CheckVerdict& check() const { return _check; }
    const std::string& fail_reason() const { return _fail_reason; }
    double solve_seconds() const { return _solve_seconds; }
    double check_seconds() const { return _check.checker_time; }

    Stats stats;

private:
    RunResult() = default;

    Verdict _verdict = Verdict::fail;
    std::optional<Certificate> _certificate;
    certs::CheckVerdict _check;
    std::string _fail_reason;
    double _solve_seconds = 0;
};

class GuardNotEstablished : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

class InternalError : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

struct FrameInvariantReport
{
    bool ok = true;
    std::string violation; // e.g. "monotonicity F_1 => F_2"
};

class Engine;

// Test and instrumentation hooks; default implementations do nothing.
class Observer
{
public:
    virtual ~Observer() = default;
    // Before the CP1 scan for obligation (i, d) with the ranked candidates.
    virtual void on_blocking(Engine&, std::size_t /*i*/, const Cube& /*d*/, const std::vector<Clause>& /*ranked*/) {}
    // After a clause was committed to frames 1..level (blocker) or to
    // frame `level` (push).
    virtual void on_commit(Engine&, const Clause& /*c*/, std::size_t /*level*/, bool /*push*/) {}
};

// Serialized scorer description recorded in the config record.
replay::json scorer_spec(const policy::Scorer* scorer);
std::unique_ptr<policy::Scorer> scorer_from_spec(const replay::json& spec);

// Base-mode certificate-aware PDR. Single-threaded; every solver-derived
// artifact and every attempted action goes through the journal.
class Engine
{
public:
    Engine(const Problem& problem, Options options, const policy::Scorer* scorer = nullptr,
           replay::Journal* journal = nullptr, Observer* observer = nullptr);

    RunResult run();

    // Individual steps of the loop. They keep the frame invariants but do
    // not enforce any particular schedule.
    std::optional<Trace> check_length0();
    // SAT(F_k ∧ Trans ∧ ¬Prop'): on SAT enqueues (k+1, d) and returns its id.
    std::optional<std::size_t> cti_query();
    PredecessorResult predecessor_query(std::size_t i, const Cube& d);
    bool initial_intersects(const Cube& d);
    bool guard_initiation(const Clause& c);
    bool guard_relative(std::size_t i, const Clause& c);
    // Guarded: re-establishes initiation and relative inductiveness first.
    void insert_blocker(const Clause& c, std::size_t i);
    bool push_clause(const Clause& c, std::size_t i);
    std::optional<Cnf> fixpoint_check() const;
    Trace reconstruct_trace(std::size_t obligation) const;
    void extend_frontier();

    // F_0 ≡ Init, F_i ⇒ F_{i+1}, F_i ⇒ Prop and consecution of closed levels,
    // each discharged on a fresh solver.
    FrameInvariantReport verify_frame_invariants() const;

    std::size_t add_obligation(std::size_t level, Cube cube, std::optional<std::size_t> successor = std::nullopt, Bits input = {});

    const FrameSequence& frames() const { return _frames; }
    const std::vector<Obligation>& obligations() const { return _obligations; }
    const std::vector<std::size_t>& pending() const { return _pending; }
    const Stats& stats() const { return _stats; }
    const std::vector<policy::RankingEvent>& ranking_events() const { return _events; }
    // Elapsed seconds at each ranking event, parallel to ranking_events().
    const std::vector<double>& ranking_event_times() const { return _event_times; }
    const TransitionSystem& system() const { return _sys; }
    const replay::Journal& journal() const { return *_journal; }
    const Options& options() const { return _options; }

private:
    struct ClauseInfo
    {
        int activation = 0;
        std::uint64_t insertion = 0;
        std::size_t push_successes = 0;
        std::array<std::uint64_t, 4> hash{};
    };

    std::vector<int> frame_assumptions(std::size_t i) const;
    ClauseInfo& info_for(const Clause& c);
    void commit(const Clause& c, std::size_t level, bool push);
    bool guards_pass(std::size_t i, const Clause& c, bool& init_ok, std::optional<bool>& rel_ok);
    bool block(std::size_t id);
    std::size_t select();
    void push_phase();
    std::string frame_digest(std::size_t i) const;
    void check_budget() const;
    double elapsed() const;
    RunResult finish_unsafe(Trace trace);
    RunResult finish_safe(Cnf inv);
    RunResult finish_fail(const std::string& reason);
    policy::FeatureVector obligation_features(const Obligation& ob) const;
    replay::json config_payload() const;

    const Problem& _problem;
    const TransitionSystem& _sys;
    Options _options;
    const policy::Scorer* _scorer;
    std::unique_ptr<replay::Journal> _own_journal;
    replay::Journal* _journal;
    Observer* _observer;

    sat::Solver _solver;
    int _act_init = 0;
    int _act_prop = 0;
    int _act_bad_next = 0;
    int _act_bad = 0;

    FrameSequence _frames;
    std::vector<std::vector<int>> _frame_acts; // activation literals per frame
    std::vector<std::array<std::uint64_t, 4>> _frame_hash; // learned(i) ^ prop digest
    std::string _init_digest;
    std::map<Clause, ClauseInfo, ClauseLess> _clause_info;
    std::uint64_t _insertions = 0;

    std::vector<Obligation> _obligations;
    std::vector<std::size_t> _pending;
    std::uint64_t _stamp = 0;

    std::uint64_t _last_conflicts = 0; // from the latest cti/pred artifact

    std::vector<policy::RankingEvent> _events;
    std::vector<double> _event_times;
    Stats _stats;
    std::chrono::steady_clock::time_point _start;
};

struct BudgetExceeded : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

} // namespace capdr::engine
