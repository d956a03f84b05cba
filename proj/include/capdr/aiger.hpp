#pragma once

#include "capdr/types.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace capdr::aiger {

// AIGER literal: 2*var + sign. 0 is false, 1 is true.
using ALit = unsigned;

inline ALit strip(ALit l) { return l & ~1u; }
inline bool sign(ALit l) { return (l & 1u) != 0; }
inline unsigned var(ALit l) { return l >> 1; }

struct Latch
{
    ALit lit;
    ALit next;
    bool reset;
};

struct AndGate
{
    ALit lhs;
    ALit rhs0;
    ALit rhs1;
};

// Single-property bit-level circuit from the ASCII AIGER subset we accept.
// `ands` is stored in topological order (operands before use).
struct Circuit
{
    unsigned max_var = 0;
    std::vector<ALit> inputs;
    std::vector<Latch> latches;
    std::vector<AndGate> ands;
    ALit bad = 0;

    std::size_t num_inputs() const { return inputs.size(); }
    std::size_t num_latches() const { return latches.size(); }
};

enum class ParseErrorKind
{
    MalformedHeader,
    MalformedLine,
    LiteralOutOfRange,
    MultipleProperties,
    UnsupportedSection,
};

const char* to_string(ParseErrorKind kind);

class ParseError : public std::runtime_error
{
public:
    ParseError(ParseErrorKind kind, std::size_t line, const std::string& what);

    ParseErrorKind kind() const { return _kind; }
    std::size_t line() const { return _line; }

private:
    ParseErrorKind _kind;
    std::size_t _line;
};

// Parses an "aag" document. The bad signal is the single B literal when a B
// section is present, otherwise output 0. Rejects justice/fairness/constraint
// sections, uninitialized latches and bad signals that depend on inputs.
Circuit parse(std::string_view text);

// Clausal form of ¬bad over latch literals (latch i <-> state variable i+1),
// after constant folding. Empty clause list means the property is valid; a
// list holding the empty clause means it is unsatisfiable.
Cnf property_cnf(const Circuit& circuit);

class WidthMismatch : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

struct StepResult
{
    Bits next;
    bool bad;
};

// Gate-level evaluation of one clock cycle. `bad` is the bad signal on the
// current (state, input) pair.
StepResult simulate_step(const Circuit& circuit, const Bits& state, const Bits& input);

Bits reset_state(const Circuit& circuit);

} // namespace capdr::aiger
