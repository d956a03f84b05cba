#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>
#include <variant>
#include <vector>

namespace capdr {

// A literal over state variables. +v asserts latch v (1-based) is 1, -v that
// it is 0. State variable v coincides with SAT variable v of the encoded
// transition system, so state clauses can be handed to the solver directly.
using Lit = int;

inline int var_of(Lit l) { return std::abs(l); }

// Canonical literal order: by variable, negative polarity first.
inline bool lit_less(Lit a, Lit b)
{
    return var_of(a) != var_of(b) ? var_of(a) < var_of(b) : a < b;
}

struct Clause
{
    std::vector<Lit> lits;

    std::size_t size() const { return lits.size(); }
    bool empty() const { return lits.empty(); }
    bool operator==(const Clause&) const = default;
};

struct Cube
{
    std::vector<Lit> lits;

    std::size_t size() const { return lits.size(); }
    bool empty() const { return lits.empty(); }
    bool operator==(const Cube&) const = default;
};

using Cnf = std::vector<Clause>;

// Lexicographic comparison under lit_less.
bool lits_less(const std::vector<Lit>& a, const std::vector<Lit>& b);

struct ClauseLess
{
    bool operator()(const Clause& a, const Clause& b) const { return lits_less(a.lits, b.lits); }
};

struct CubeLess
{
    bool operator()(const Cube& a, const Cube& b) const { return lits_less(a.lits, b.lits); }
};

// Sorts literals canonically and removes duplicates in place.
void normalize(std::vector<Lit>& lits);

// True if lits contains both v and -v.
bool has_complement(const std::vector<Lit>& lits);

Clause negate(const Cube& c);
Cube negate(const Clause& c);

// d ⇒ ¬C, i.e. every literal of C is falsified by d.
bool blocks(const Cube& d, const Clause& c);

// Bit assignment to latches or inputs, index 0 = first latch/input.
using Bits = std::vector<bool>;

// A state cube fixing all `width` latches to the given bits.
Cube state_cube(const Bits& state);
Bits cube_bits(const Cube& state_cube, std::size_t width);

std::string to_bitstring(const Bits& bits);
Bits from_bitstring(const std::string& s);

std::string to_string(const Clause& c);
std::string to_string(const Cube& c);

struct Trace
{
    std::vector<Bits> states;  // x_0 .. x_k
    std::vector<Bits> inputs;  // u_0 .. u_{k-1}

    std::size_t length() const { return inputs.size(); }
    bool operator==(const Trace&) const = default;
};

struct SafeCertificate
{
    Cnf inv;
};

struct UnsafeCertificate
{
    Trace trace;
};

using Certificate = std::variant<SafeCertificate, UnsafeCertificate>;

} // namespace capdr
