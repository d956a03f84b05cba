#pragma once

#include "capdr/aiger.hpp"
#include "capdr/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace capdr {

// Raw DIMACS-style clause over the full SAT variable space of a system.
using SatClause = std::vector<int>;

// (Init, Trans, Prop) as CNF. SAT variables are laid out as
//   1..L            current-state latches X
//   L+1..L+I        inputs U
//   L+I+1..2L+I     next-state latches X'
//   2L+I+1..        Tseitin auxiliaries, one per non-folded AND gate
class TransitionSystem
{
public:
    int num_latches() const { return _latches; }
    int num_inputs() const { return _inputs; }
    int num_vars() const { return _vars; }
    int first_aux() const { return 2 * _latches + _inputs + 1; }
    int num_aux() const { return _vars - 2 * _latches - _inputs; }

    // 0-based index to SAT variable.
    int x_var(int i) const { return i + 1; }
    int u_var(int j) const { return _latches + j + 1; }
    int xp_var(int i) const { return _latches + _inputs + i + 1; }

    bool is_state_var(int v) const { return v >= 1 && v <= _latches; }
    bool is_input_var(int v) const { return v > _latches && v <= _latches + _inputs; }
    bool is_next_var(int v) const { return v > _latches + _inputs && v <= 2 * _latches + _inputs; }

    // Maps a literal over X to the same literal over X'.
    int prime(Lit l) const;
    Lit unprime(int l) const;

    const Bits& reset() const { return _reset; }
    const Cnf& init_cnf() const { return _init; }
    const std::vector<SatClause>& trans_cnf() const { return _trans; }
    const Cnf& prop_cnf() const { return _prop; }

    // Evaluates the property's clausal form on a concrete state.
    bool prop_holds(const Bits& state) const;

    friend TransitionSystem encode(const aiger::Circuit& circuit);

private:
    int _latches = 0;
    int _inputs = 0;
    int _vars = 0;
    Bits _reset;
    Cnf _init;
    std::vector<SatClause> _trans;
    Cnf _prop;
};

// Tseitin encoding of the AND graph with constants folded first.
TransitionSystem encode(const aiger::Circuit& circuit);

// Debug dump of Trans as DIMACS, with a comment header mapping latches,
// inputs and next-state latches to variables, followed by Init and Prop.
void write_dimacs(std::ostream& out, const TransitionSystem& ts);

// Parsed circuit, its encoding and the text it came from. The checker
// re-derives everything from `source`.
struct Problem
{
    std::string source;
    aiger::Circuit circuit;
    TransitionSystem system;

    static Problem from_aiger(std::string text);
};

} // namespace capdr
