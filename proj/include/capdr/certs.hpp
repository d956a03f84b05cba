#pragma once

#include "capdr/aiger.hpp"
#include "capdr/transition_system.hpp"
#include "capdr/types.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

// The trusted computing base. Nothing in here reads engine state: checks run
// on fresh solver contexts over a system re-derived from the AIGER source.
namespace capdr::certs {

enum class Condition
{
    none,
    init,  // Init ∧ ¬Inv satisfiable
    step,  // Inv ∧ Trans ∧ ¬Inv' satisfiable
    prop,  // Inv ∧ ¬Prop satisfiable
    scope, // Inv mentions a non-state variable
    trace_shape,
    trace_init,
    trace_step,
    trace_final,
};

const char* to_string(Condition c);

struct CheckVerdict
{
    bool accepted = false;
    Condition failing_condition = Condition::none;
    std::size_t step_index = 0; // meaningful for trace_step
    double checker_time = 0;    // wall-clock seconds

    std::string describe() const;
};

// Accepts iff Init ∧ ¬Inv, Inv ∧ Trans ∧ ¬Inv' and Inv ∧ ¬Prop are all UNSAT.
CheckVerdict check_safe(const TransitionSystem& ts, const Cnf& inv);

// Accepts iff x_0 is the reset state, every step agrees with simulation and
// the last state violates Prop.
CheckVerdict check_unsafe(const aiger::Circuit& circuit, const TransitionSystem& ts, const Trace& trace);

// Independent checker bound to one AIGER source text.
class Checker
{
public:
    explicit Checker(std::string_view aiger_text);

    CheckVerdict check_safe(const Cnf& inv) const { return certs::check_safe(_system, inv); }
    CheckVerdict check_unsafe(const Trace& trace) const { return certs::check_unsafe(_circuit, _system, trace); }
    CheckVerdict check(const Certificate& cert) const;

    const aiger::Circuit& circuit() const { return _circuit; }
    const TransitionSystem& system() const { return _system; }

private:
    aiger::Circuit _circuit;
    TransitionSystem _system;
};

// Sorted literals, no repeated literals, no duplicate clauses, clauses in
// canonical order.
Cnf canonicalize(Cnf inv);

std::size_t literal_count(const Cnf& inv);

class PreconditionViolated : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

// Greedy post-fixpoint shrinking: drop duplicate and subsumed clauses, then
// try clause deletions and literal deletions in canonical order, keeping an
// edit only if check_safe still accepts.
Cnf minimize_invariant(const TransitionSystem& ts, const Cnf& inv);

class FormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// SAFE certificate: "p inv <|X|> <nclauses>" then one "lit ... 0" line per
// clause in canonical order; variable i is latch i (1-based).
void write_safe(std::ostream& out, std::size_t num_latches, const Cnf& inv);
std::string format_safe(std::size_t num_latches, const Cnf& inv);

struct SafeFile
{
    std::size_t num_latches = 0;
    Cnf inv;
};
SafeFile read_safe(std::istream& in);

// UNSAFE certificate in AIGER witness layout: "1", "b0", the initial state
// bits, one input line per step, then ".".
void write_unsafe(std::ostream& out, const Trace& trace);
std::string format_unsafe(const Trace& trace);

struct Witness
{
    Bits initial;
    std::vector<Bits> inputs;
};
Witness read_unsafe(std::istream& in);

// Expands a witness into a full trace by simulation from its initial state.
Trace expand_witness(const aiger::Circuit& circuit, const Witness& w);

} // namespace capdr::certs
