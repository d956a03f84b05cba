#pragma once

#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace capdr::sat {

class UnknownVariable : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

class ResourceBudgetExceeded : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum class Status
{
    sat,
    unsat,
};

struct Result
{
    Status status = Status::unsat;
    // Indexed by variable; entry 0 unused. Only filled when SAT.
    std::vector<std::int8_t> model;
    // Subset of the assumptions that is already inconsistent with the clause
    // store. Only filled when UNSAT; not necessarily minimal.
    std::vector<int> failed;

    bool is_sat() const { return status == Status::sat; }
    bool value(int lit) const { return (model.at(std::size_t(lit > 0 ? lit : -lit)) != 0) == (lit > 0); }
};

struct Stats
{
    std::uint64_t queries = 0;
    std::uint64_t conflicts = 0;
    std::uint64_t decisions = 0;
    std::uint64_t propagations = 0;
};

// Incremental CDCL solver over DIMACS-style literals (variables 1..n).
// Clauses are never removed by the caller; learned clauses may be dropped
// internally. Given the same seed and the same sequence of calls, models
// and failed sets are identical.
class Solver
{
public:
    explicit Solver(std::uint64_t seed = 0);

    int new_var();
    // Allocates variables up to and including n.
    void reserve_vars(int n);
    int num_vars() const { return int(_assigns.size()); }

    void add_clause(std::span<const int> lits);
    void add_clause(std::initializer_list<int> lits) { add_clause(std::span<const int>(lits.begin(), lits.size())); }

    Result solve(std::span<const int> assumptions = {});
    Result solve(std::initializer_list<int> assumptions) { return solve(std::span<const int>(assumptions.begin(), assumptions.size())); }

    // Conflicts allowed per solve() call; 0 means unlimited. Exceeding it
    // throws ResourceBudgetExceeded and leaves the solver usable.
    void set_conflict_budget(std::uint64_t budget) { _conflict_budget = budget; }

    const Stats& stats() const { return _stats; }
    std::uint64_t last_conflicts() const { return _last_conflicts; }

    // Writes the permanent clauses, level-0 units and the assumptions as
    // unit clauses.
    void write_dimacs(std::ostream& out, std::span<const int> assumptions = {}) const;

private:
    using ILit = std::uint32_t;
    static constexpr int no_reason = -1;
    static constexpr ILit undef_lit = ~ILit(0);

    struct ClauseRec
    {
        std::vector<ILit> lits;
        double activity = 0;
        bool learnt = false;
        bool deleted = false;
    };

    struct Watch
    {
        int cref;
        ILit blocker;
    };

    static int ivar(ILit l) { return int(l >> 1); }
    ILit to_ilit(int lit) const;
    static int to_ext(ILit l) { return (l & 1u) ? -(ivar(l) + 1) : ivar(l) + 1; }
    std::int8_t value(ILit l) const
    {
        auto v = _assigns[std::size_t(ivar(l))];
        return (l & 1u) ? std::int8_t(-v) : v;
    }
    int decision_level() const { return int(_trail_lim.size()); }

    void enqueue(ILit l, int reason);
    int propagate();
    void analyze(int confl, std::vector<ILit>& learnt, int& bt_level);
    void analyze_final(ILit p, std::vector<int>& failed);
    void cancel_until(int level);
    void attach(int cref);
    ILit pick_branch();
    void bump_var(int v);
    void bump_clause(ClauseRec& c);
    void reduce_db();
    bool locked(int cref) const;

    // Binary max-heap over variable activity, ties to lower index.
    bool heap_less(int a, int b) const;
    void heap_insert(int v);
    int heap_pop();
    void heap_up(std::size_t i);
    void heap_down(std::size_t i);

    std::mt19937_64 _rng;
    bool _ok = true;
    std::vector<ClauseRec> _clauses;
    std::vector<std::vector<Watch>> _watches;
    std::vector<std::int8_t> _assigns;
    std::vector<int> _level;
    std::vector<int> _reason;
    std::vector<bool> _phase;
    std::vector<char> _seen;
    std::vector<ILit> _trail;
    std::vector<int> _trail_lim;
    std::size_t _qhead = 0;

    std::vector<double> _activity;
    double _var_inc = 1.0;
    double _cla_inc = 1.0;
    std::vector<int> _heap;
    std::vector<int> _heap_pos;

    std::size_t _num_learnts = 0;
    double _max_learnts = 2000;
    std::uint64_t _conflict_budget = 0;
    std::uint64_t _last_conflicts = 0;
    Stats _stats;
};

} // namespace capdr::sat
