#include "capdr/aiger.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <optional>
#include <sstream>

namespace capdr::aiger {

const char* to_string(ParseErrorKind kind)
{
    switch (kind)
    {
    case ParseErrorKind::MalformedHeader: return "MalformedHeader";
    case ParseErrorKind::MalformedLine: return "MalformedLine";
    case ParseErrorKind::LiteralOutOfRange: return "LiteralOutOfRange";
    case ParseErrorKind::MultipleProperties: return "MultipleProperties";
    case ParseErrorKind::UnsupportedSection: return "UnsupportedSection";
    }
    return "?";
}

ParseError::ParseError(ParseErrorKind kind, std::size_t line, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + " (line " + std::to_string(line) + "): " + what)
    , _kind(kind)
    , _line(line)
{
}

namespace {

constexpr std::size_t max_property_clauses = 4096;

enum class VarKind : unsigned char
{
    undefined,
    input,
    latch,
    gate,
};

std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size())
    {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        auto line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        lines.push_back(line);
        pos = end + 1;
    }
    return lines;
}

std::vector<std::string_view> split_tokens(std::string_view line)
{
    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size())
    {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t'))
            ++pos;
        auto start = pos;
        while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t')
            ++pos;
        if (pos > start)
            tokens.push_back(line.substr(start, pos - start));
    }
    return tokens;
}

std::optional<unsigned> to_unsigned(std::string_view tok)
{
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        return std::nullopt;
    return value;
}

class Parser
{
public:
    explicit Parser(std::string_view text)
        : _lines(split_lines(text))
    {
    }

    Circuit run();

private:
    [[noreturn]] void fail(ParseErrorKind kind, const std::string& what) const
    {
        throw ParseError(kind, _line + 1, what);
    }

    std::vector<unsigned> numbers(std::size_t expected_min, std::size_t expected_max, const char* what);
    ALit literal(unsigned value);
    void define(ALit lit, VarKind kind);
    void require_defined(ALit lit, const char* what);
    void sort_gates();
    void check_bad_cone();

    std::vector<std::string_view> _lines;
    std::size_t _line = 0;
    Circuit _c;
    std::vector<VarKind> _kind;
    std::vector<std::size_t> _gate_index;
};

std::vector<unsigned> Parser::numbers(std::size_t expected_min, std::size_t expected_max, const char* what)
{
    if (_line >= _lines.size())
        fail(ParseErrorKind::MalformedLine, std::string("unexpected end of file, expected ") + what);
    auto tokens = split_tokens(_lines[_line]);
    if (tokens.size() < expected_min || tokens.size() > expected_max)
        fail(ParseErrorKind::MalformedLine, std::string("wrong number of fields for ") + what);
    std::vector<unsigned> out;
    for (auto tok : tokens)
    {
        auto v = to_unsigned(tok);
        if (!v)
            fail(ParseErrorKind::MalformedLine, "expected unsigned integer, got '" + std::string(tok) + "'");
        out.push_back(*v);
    }
    return out;
}

ALit Parser::literal(unsigned value)
{
    if (value > 2 * _c.max_var + 1)
        fail(ParseErrorKind::LiteralOutOfRange, "literal " + std::to_string(value) + " exceeds 2*M+1");
    return value;
}

void Parser::define(ALit lit, VarKind kind)
{
    if (sign(lit) || lit < 2)
        fail(ParseErrorKind::MalformedLine, "definition literal must be even and non-constant");
    auto& slot = _kind[var(lit)];
    if (slot != VarKind::undefined)
        fail(ParseErrorKind::MalformedLine, "variable " + std::to_string(var(lit)) + " defined twice");
    slot = kind;
}

void Parser::require_defined(ALit lit, const char* what)
{
    if (lit >= 2 && _kind[var(lit)] == VarKind::undefined)
        fail(ParseErrorKind::MalformedLine, std::string(what) + " uses undefined literal " + std::to_string(lit));
}

Circuit Parser::run()
{
    if (_lines.empty())
        throw ParseError(ParseErrorKind::MalformedHeader, 1, "empty input");

    auto header = split_tokens(_lines[0]);
    if (header.empty())
        fail(ParseErrorKind::MalformedHeader, "missing header");
    if (header[0] == "aig")
        fail(ParseErrorKind::UnsupportedSection, "binary AIGER is not supported, convert to aag");
    if (header[0] != "aag")
        fail(ParseErrorKind::MalformedHeader, "expected 'aag'");
    if (header.size() < 6 || header.size() > 10)
        fail(ParseErrorKind::MalformedHeader, "expected M I L O A [B C J F]");

    std::vector<unsigned> h;
    for (std::size_t i = 1; i < header.size(); ++i)
    {
        auto v = to_unsigned(header[i]);
        if (!v)
            fail(ParseErrorKind::MalformedHeader, "non-numeric header field");
        h.push_back(*v);
    }
    h.resize(9, 0);
    const unsigned m = h[0], ni = h[1], nl = h[2], no = h[3], na = h[4], nb = h[5], nc = h[6], nj = h[7], nf = h[8];

    if (std::size_t(ni) + nl + na > m)
        fail(ParseErrorKind::MalformedHeader, "M smaller than I + L + A");
    if (nc > 0)
        fail(ParseErrorKind::UnsupportedSection, "invariant constraints are not supported");
    if (nj > 0 || nf > 0)
        fail(ParseErrorKind::UnsupportedSection, "justice/fairness properties are not supported");
    if (nb > 1 || (nb == 0 && no != 1))
        fail(ParseErrorKind::MultipleProperties, "expected exactly one bad or output literal");

    _c.max_var = m;
    _kind.assign(std::size_t(m) + 1, VarKind::undefined);
    _gate_index.assign(std::size_t(m) + 1, 0);
    _line = 1;

    for (unsigned i = 0; i < ni; ++i, ++_line)
    {
        auto n = numbers(1, 1, "input");
        auto lit = literal(n[0]);
        define(lit, VarKind::input);
        _c.inputs.push_back(lit);
    }

    for (unsigned i = 0; i < nl; ++i, ++_line)
    {
        auto n = numbers(2, 3, "latch");
        auto lit = literal(n[0]);
        auto next = literal(n[1]);
        define(lit, VarKind::latch);
        bool reset = false;
        if (n.size() == 3)
        {
            if (n[2] == lit)
                fail(ParseErrorKind::UnsupportedSection, "uninitialized latch " + std::to_string(lit));
            if (n[2] > 1)
                fail(ParseErrorKind::MalformedLine, "latch reset must be 0, 1 or the latch literal");
            reset = n[2] == 1;
        }
        _c.latches.push_back({lit, next, reset});
    }

    std::vector<ALit> outputs;
    for (unsigned i = 0; i < no; ++i, ++_line)
        outputs.push_back(literal(numbers(1, 1, "output")[0]));

    std::vector<std::size_t> gate_lines;
    for (unsigned i = 0; i < na; ++i, ++_line)
    {
        auto n = numbers(3, 3, "and gate");
        AndGate g{literal(n[0]), literal(n[1]), literal(n[2])};
        define(g.lhs, VarKind::gate);
        _gate_index[var(g.lhs)] = _c.ands.size();
        _c.ands.push_back(g);
        gate_lines.push_back(_line);
    }

    std::vector<ALit> bads;
    for (unsigned i = 0; i < nb; ++i, ++_line)
        bads.push_back(literal(numbers(1, 1, "bad")[0]));

    // Remaining lines are symbols and comments; nothing there affects semantics.

    for (std::size_t i = 0; i < _c.ands.size(); ++i)
    {
        _line = gate_lines[i];
        require_defined(_c.ands[i].rhs0, "and gate");
        require_defined(_c.ands[i].rhs1, "and gate");
    }
    for (std::size_t i = 0; i < _c.latches.size(); ++i)
    {
        _line = 1 + ni + i;
        require_defined(_c.latches[i].next, "latch");
    }

    _c.bad = nb == 1 ? bads[0] : outputs[0];
    _line = nb == 1 ? 1 + ni + nl + no + na : 1 + ni + nl;
    require_defined(_c.bad, "property");

    sort_gates();
    check_bad_cone();

    // Validates that the property has a bounded clausal form over latches.
    (void)property_cnf(_c);
    return std::move(_c);
}

void Parser::sort_gates()
{
    // Iterative DFS; gates may appear in any order in the ASCII file.
    enum Mark : unsigned char { white, grey, black };
    std::vector<Mark> mark(_c.ands.size(), white);
    std::vector<AndGate> sorted;
    sorted.reserve(_c.ands.size());

    for (std::size_t root = 0; root < _c.ands.size(); ++root)
    {
        if (mark[root] != white)
            continue;
        std::vector<std::pair<std::size_t, int>> stack{{root, 0}};
        mark[root] = grey;
        while (!stack.empty())
        {
            auto& [g, child] = stack.back();
            if (child < 2)
            {
                ALit operand = child == 0 ? _c.ands[g].rhs0 : _c.ands[g].rhs1;
                ++child;
                if (operand >= 2 && _kind[var(operand)] == VarKind::gate)
                {
                    auto h = _gate_index[var(operand)];
                    if (mark[h] == grey)
                        throw ParseError(ParseErrorKind::MalformedLine, 0, "combinational cycle through gate " + std::to_string(_c.ands[h].lhs));
                    if (mark[h] == white)
                    {
                        mark[h] = grey;
                        stack.push_back({h, 0});
                    }
                }
                continue;
            }
            mark[g] = black;
            sorted.push_back(_c.ands[g]);
            stack.pop_back();
        }
    }

    _c.ands = std::move(sorted);
    for (std::size_t i = 0; i < _c.ands.size(); ++i)
        _gate_index[var(_c.ands[i].lhs)] = i;
}

void Parser::check_bad_cone()
{
    std::vector<bool> seen(_kind.size(), false);
    std::vector<unsigned> stack{var(_c.bad)};
    while (!stack.empty())
    {
        auto v = stack.back();
        stack.pop_back();
        if (v == 0 || seen[v])
            continue;
        seen[v] = true;
        if (_kind[v] == VarKind::input)
            fail(ParseErrorKind::UnsupportedSection, "bad signal depends on primary input " + std::to_string(2 * v) + "; register it in a latch");
        if (_kind[v] == VarKind::gate)
        {
            const auto& g = _c.ands[_gate_index[v]];
            stack.push_back(var(g.rhs0));
            stack.push_back(var(g.rhs1));
        }
    }
}

// Removes tautologies, duplicate and subsumed clauses. Returns {{}} if any
// clause is empty.
Cnf simplify(Cnf cnf)
{
    Cnf kept;
    for (auto& c : cnf)
    {
        normalize(c.lits);
        if (has_complement(c.lits))
            continue;
        if (c.empty())
            return Cnf{Clause{}};
        kept.push_back(std::move(c));
    }
    std::sort(kept.begin(), kept.end(), [](const Clause& a, const Clause& b) {
        return a.size() != b.size() ? a.size() < b.size() : lits_less(a.lits, b.lits);
    });
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());

    Cnf out;
    for (auto& c : kept)
    {
        bool subsumed = std::any_of(out.begin(), out.end(), [&](const Clause& s) {
            return std::includes(c.lits.begin(), c.lits.end(), s.lits.begin(), s.lits.end(), lit_less);
        });
        if (!subsumed)
            out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), ClauseLess{});
    return out;
}

class PropertyBuilder
{
public:
    explicit PropertyBuilder(const Circuit& c)
        : _c(c)
    {
        for (std::size_t i = 0; i < c.latches.size(); ++i)
            _latch[var(c.latches[i].lit)] = int(i + 1);
        for (std::size_t i = 0; i < c.ands.size(); ++i)
            _gate[var(c.ands[i].lhs)] = i;
    }

    // CNF over latch literals that holds exactly when `lit` evaluates to true.
    Cnf holds(ALit lit)
    {
        if (auto it = _memo.find(lit); it != _memo.end())
            return it->second;

        Cnf result;
        if (lit == 0)
            result = Cnf{Clause{}};
        else if (lit == 1)
            result = {};
        else if (auto l = _latch.find(var(lit)); l != _latch.end())
            result = Cnf{Clause{{sign(lit) ? -l->second : l->second}}};
        else
        {
            auto g = _gate.find(var(lit));
            if (g == _gate.end())
                throw ParseError(ParseErrorKind::UnsupportedSection, 0, "property depends on a non-latch variable");
            const auto& gate = _c.ands[g->second];
            if (!sign(lit))
            {
                result = holds(gate.rhs0);
                auto rhs = holds(gate.rhs1);
                result.insert(result.end(), rhs.begin(), rhs.end());
            }
            else
            {
                // ¬(a ∧ b) = ¬a ∨ ¬b: distribute the two clause sets.
                auto left = holds(gate.rhs0 ^ 1u);
                auto right = holds(gate.rhs1 ^ 1u);
                if (left.size() * right.size() > max_property_clauses)
                    throw ParseError(ParseErrorKind::UnsupportedSection, 0, "property clausal form too large");
                for (const auto& a : left)
                    for (const auto& b : right)
                    {
                        Clause c = a;
                        c.lits.insert(c.lits.end(), b.lits.begin(), b.lits.end());
                        result.push_back(std::move(c));
                    }
            }
            result = simplify(std::move(result));
            if (result.size() > max_property_clauses)
                throw ParseError(ParseErrorKind::UnsupportedSection, 0, "property clausal form too large");
        }
        _memo.emplace(lit, result);
        return result;
    }

private:
    const Circuit& _c;
    std::map<unsigned, int> _latch;
    std::map<unsigned, std::size_t> _gate;
    std::map<ALit, Cnf> _memo;
};

bool value_of(const std::vector<bool>& values, ALit lit)
{
    return values[var(lit)] != sign(lit);
}

} // namespace

Circuit parse(std::string_view text)
{
    return Parser(text).run();
}

Cnf property_cnf(const Circuit& circuit)
{
    PropertyBuilder builder(circuit);
    return simplify(builder.holds(circuit.bad ^ 1u));
}

Bits reset_state(const Circuit& circuit)
{
    Bits bits;
    bits.reserve(circuit.latches.size());
    for (const auto& l : circuit.latches)
        bits.push_back(l.reset);
    return bits;
}

StepResult simulate_step(const Circuit& circuit, const Bits& state, const Bits& input)
{
    if (state.size() != circuit.num_latches())
        throw WidthMismatch("state has " + std::to_string(state.size()) + " bits, circuit has " + std::to_string(circuit.num_latches()) + " latches");
    if (input.size() != circuit.num_inputs())
        throw WidthMismatch("input has " + std::to_string(input.size()) + " bits, circuit has " + std::to_string(circuit.num_inputs()) + " inputs");

    std::vector<bool> values(std::size_t(circuit.max_var) + 1, false);
    for (std::size_t i = 0; i < input.size(); ++i)
        values[var(circuit.inputs[i])] = input[i];
    for (std::size_t i = 0; i < state.size(); ++i)
        values[var(circuit.latches[i].lit)] = state[i];
    for (const auto& g : circuit.ands)
        values[var(g.lhs)] = value_of(values, g.rhs0) && value_of(values, g.rhs1);

    StepResult out;
    out.next.reserve(state.size());
    for (const auto& l : circuit.latches)
        out.next.push_back(value_of(values, l.next));
    out.bad = value_of(values, circuit.bad);
    return out;
}

} // namespace capdr::aiger
