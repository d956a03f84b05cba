#include "capdr/types.hpp"

#include <algorithm>
#include <stdexcept>

namespace capdr {

bool lits_less(const std::vector<Lit>& a, const std::vector<Lit>& b)
{
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), lit_less);
}

void normalize(std::vector<Lit>& lits)
{
    std::sort(lits.begin(), lits.end(), lit_less);
    lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
}

bool has_complement(const std::vector<Lit>& lits)
{
    auto sorted = lits;
    normalize(sorted);
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i] == -sorted[i - 1])
            return true;
    return false;
}

Clause negate(const Cube& c)
{
    Clause out;
    out.lits.reserve(c.size());
    for (Lit l : c.lits)
        out.lits.push_back(-l);
    normalize(out.lits);
    return out;
}

Cube negate(const Clause& c)
{
    Cube out;
    out.lits.reserve(c.size());
    for (Lit l : c.lits)
        out.lits.push_back(-l);
    normalize(out.lits);
    return out;
}

bool blocks(const Cube& d, const Clause& c)
{
    return std::all_of(c.lits.begin(), c.lits.end(), [&](Lit l) {
        return std::find(d.lits.begin(), d.lits.end(), -l) != d.lits.end();
    });
}

Cube state_cube(const Bits& state)
{
    Cube c;
    c.lits.reserve(state.size());
    for (std::size_t i = 0; i < state.size(); ++i)
        c.lits.push_back(state[i] ? int(i + 1) : -int(i + 1));
    return c;
}

Bits cube_bits(const Cube& cube, std::size_t width)
{
    if (cube.size() != width)
        throw std::invalid_argument("cube_bits: not a state cube of width " + std::to_string(width));
    Bits bits(width, false);
    for (Lit l : cube.lits)
    {
        const auto v = std::size_t(var_of(l));
        if (v == 0 || v > width)
            throw std::invalid_argument("cube_bits: literal out of range");
        bits[v - 1] = l > 0;
    }
    return bits;
}

std::string to_bitstring(const Bits& bits)
{
    std::string s;
    s.reserve(bits.size());
    for (bool b : bits)
        s.push_back(b ? '1' : '0');
    return s;
}

Bits from_bitstring(const std::string& s)
{
    Bits bits;
    bits.reserve(s.size());
    for (char ch : s)
    {
        if (ch != '0' && ch != '1')
            throw std::invalid_argument("bitstring: unexpected character");
        bits.push_back(ch == '1');
    }
    return bits;
}

namespace {

std::string join_lits(const std::vector<Lit>& lits, const char* sep)
{
    std::string s;
    for (std::size_t i = 0; i < lits.size(); ++i)
    {
        if (i)
            s += sep;
        s += std::to_string(lits[i]);
    }
    return s;
}

} // namespace

std::string to_string(const Clause& c) { return "(" + join_lits(c.lits, " | ") + ")"; }
std::string to_string(const Cube& c) { return "[" + join_lits(c.lits, " & ") + "]"; }

} // namespace capdr
