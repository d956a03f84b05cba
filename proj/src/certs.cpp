#include "capdr/certs.hpp"

#include "capdr/sat.hpp"

#include <algorithm>
#include <chrono>
#include <istream>
#include <ostream>
#include <sstream>

namespace capdr::certs {

const char* to_string(Condition c)
{
    switch (c)
    {
    case Condition::none: return "none";
    case Condition::init: return "init";
    case Condition::step: return "step";
    case Condition::prop: return "prop";
    case Condition::scope: return "scope";
    case Condition::trace_shape: return "trace_shape";
    case Condition::trace_init: return "trace_init";
    case Condition::trace_step: return "trace_step";
    case Condition::trace_final: return "trace_final";
    }
    return "?";
}

std::string CheckVerdict::describe() const
{
    if (accepted)
        return "ACCEPTED";
    std::string s = std::string("REJECTED (") + to_string(failing_condition);
    if (failing_condition == Condition::trace_step)
        s += " " + std::to_string(step_index);
    return s + ")";
}

namespace {

using clock = std::chrono::steady_clock;

double seconds_since(clock::time_point start)
{
    return std::chrono::duration<double>(clock::now() - start).count();
}

CheckVerdict reject(Condition c, clock::time_point start, std::size_t index = 0)
{
    return CheckVerdict{false, c, index, seconds_since(start)};
}

template <typename Map>
void add_cnf(sat::Solver& solver, const Cnf& cnf, Map map)
{
    std::vector<int> lits;
    for (const auto& c : cnf)
    {
        lits.clear();
        for (Lit l : c.lits)
            lits.push_back(map(l));
        solver.add_clause(lits);
    }
}

// Asserts ¬cnf using one selector per clause.
template <typename Map>
void add_negation(sat::Solver& solver, const Cnf& cnf, Map map)
{
    std::vector<int> any;
    for (const auto& c : cnf)
    {
        const int sel = solver.new_var();
        for (Lit l : c.lits)
            solver.add_clause({-sel, -map(l)});
        any.push_back(sel);
    }
    solver.add_clause(any);
}

const auto identity = [](Lit l) { return l; };

} // namespace

CheckVerdict check_safe(const TransitionSystem& ts, const Cnf& inv)
{
    const auto start = clock::now();
    for (const auto& c : inv)
        for (Lit l : c.lits)
            if (!ts.is_state_var(var_of(l)))
                return reject(Condition::scope, start);

    {
        sat::Solver s;
        s.reserve_vars(ts.num_vars());
        add_cnf(s, ts.init_cnf(), identity);
        add_negation(s, inv, identity);
        if (s.solve().is_sat())
            return reject(Condition::init, start);
    }
    {
        sat::Solver s;
        s.reserve_vars(ts.num_vars());
        for (const auto& c : ts.trans_cnf())
            s.add_clause(c);
        add_cnf(s, inv, identity);
        add_negation(s, inv, [&](Lit l) { return ts.prime(l); });
        if (s.solve().is_sat())
            return reject(Condition::step, start);
    }
    {
        sat::Solver s;
        s.reserve_vars(ts.num_vars());
        add_cnf(s, inv, identity);
        add_negation(s, ts.prop_cnf(), identity);
        if (s.solve().is_sat())
            return reject(Condition::prop, start);
    }
    return CheckVerdict{true, Condition::none, 0, seconds_since(start)};
}

CheckVerdict check_unsafe(const aiger::Circuit& circuit, const TransitionSystem& ts, const Trace& trace)
{
    const auto start = clock::now();
    const auto nx = circuit.num_latches();
    const auto nu = circuit.num_inputs();
    if (trace.states.size() != trace.inputs.size() + 1)
        return reject(Condition::trace_shape, start);
    for (const auto& x : trace.states)
        if (x.size() != nx)
            return reject(Condition::trace_shape, start);
    for (const auto& u : trace.inputs)
        if (u.size() != nu)
            return reject(Condition::trace_shape, start);

    if (trace.states.front() != aiger::reset_state(circuit))
        return reject(Condition::trace_init, start);
    for (std::size_t i = 0; i < trace.inputs.size(); ++i)
        if (aiger::simulate_step(circuit, trace.states[i], trace.inputs[i]).next != trace.states[i + 1])
            return reject(Condition::trace_step, start, i);
    if (ts.prop_holds(trace.states.back()))
        return reject(Condition::trace_final, start);
    return CheckVerdict{true, Condition::none, 0, seconds_since(start)};
}

Checker::Checker(std::string_view aiger_text)
    : _circuit(aiger::parse(aiger_text))
    , _system(encode(_circuit))
{
}

CheckVerdict Checker::check(const Certificate& cert) const
{
    if (const auto* safe = std::get_if<SafeCertificate>(&cert))
        return check_safe(safe->inv);
    return check_unsafe(std::get<UnsafeCertificate>(cert).trace);
}

Cnf canonicalize(Cnf inv)
{
    for (auto& c : inv)
        normalize(c.lits);
    std::sort(inv.begin(), inv.end(), ClauseLess{});
    inv.erase(std::unique(inv.begin(), inv.end()), inv.end());
    return inv;
}

std::size_t literal_count(const Cnf& inv)
{
    std::size_t n = 0;
    for (const auto& c : inv)
        n += c.size();
    return n;
}

namespace {

bool subsumes(const Clause& small, const Clause& big)
{
    return std::includes(big.lits.begin(), big.lits.end(), small.lits.begin(), small.lits.end(), lit_less);
}

Cnf remove_subsumed(const Cnf& canon)
{
    Cnf out;
    for (std::size_t i = 0; i < canon.size(); ++i)
    {
        bool subsumed = false;
        for (std::size_t j = 0; j < canon.size() && !subsumed; ++j)
            subsumed = j != i && subsumes(canon[j], canon[i]);
        if (!subsumed)
            out.push_back(canon[i]);
    }
    return out;
}

} // namespace

Cnf minimize_invariant(const TransitionSystem& ts, const Cnf& inv)
{
    if (!check_safe(ts, inv).accepted)
        throw PreconditionViolated("minimize_invariant: input invariant is not accepted by the checker");

    Cnf cur = remove_subsumed(canonicalize(inv));

    for (std::size_t i = 0; i < cur.size();)
    {
        Cnf trial = cur;
        trial.erase(trial.begin() + std::ptrdiff_t(i));
        if (check_safe(ts, trial).accepted)
            cur = std::move(trial);
        else
            ++i;
    }

    for (std::size_t i = 0; i < cur.size(); ++i)
    {
        for (std::size_t j = 0; j < cur[i].lits.size();)
        {
            Cnf trial = cur;
            trial[i].lits.erase(trial[i].lits.begin() + std::ptrdiff_t(j));
            if (check_safe(ts, trial).accepted)
                cur = std::move(trial);
            else
                ++j;
        }
    }

    return remove_subsumed(canonicalize(std::move(cur)));
}

void write_safe(std::ostream& out, std::size_t num_latches, const Cnf& inv)
{
    const auto canon = canonicalize(inv);
    out << "p inv " << num_latches << ' ' << canon.size() << '\n';
    for (const auto& c : canon)
    {
        for (Lit l : c.lits)
            out << l << ' ';
        out << "0\n";
    }
}

std::string format_safe(std::size_t num_latches, const Cnf& inv)
{
    std::ostringstream os;
    write_safe(os, num_latches, inv);
    return os.str();
}

SafeFile read_safe(std::istream& in)
{
    SafeFile f;
    std::string p, kind;
    std::size_t nclauses = 0;
    if (!(in >> p >> kind >> f.num_latches >> nclauses) || p != "p" || kind != "inv")
        throw FormatError("SAFE certificate: expected header 'p inv <latches> <clauses>'");
    Clause cur;
    long long lit = 0;
    while (in >> lit)
    {
        if (lit == 0)
        {
            f.inv.push_back(std::move(cur));
            cur = {};
            continue;
        }
        if (std::size_t(std::llabs(lit)) > f.num_latches)
            throw FormatError("SAFE certificate: literal " + std::to_string(lit) + " out of range");
        cur.lits.push_back(int(lit));
    }
    if (!in.eof())
        throw FormatError("SAFE certificate: unexpected token");
    if (!cur.lits.empty())
        throw FormatError("SAFE certificate: unterminated clause");
    if (f.inv.size() != nclauses)
        throw FormatError("SAFE certificate: header announces " + std::to_string(nclauses) + " clauses, found " + std::to_string(f.inv.size()));
    return f;
}

void write_unsafe(std::ostream& out, const Trace& trace)
{
    out << "1\nb0\n" << to_bitstring(trace.states.front()) << '\n';
    for (const auto& u : trace.inputs)
        out << to_bitstring(u) << '\n';
    out << ".\n";
}

std::string format_unsafe(const Trace& trace)
{
    std::ostringstream os;
    write_unsafe(os, trace);
    return os.str();
}

Witness read_unsafe(std::istream& in)
{
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
    {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        lines.push_back(line);
    }
    if (lines.size() < 4 || lines[0] != "1" || lines[1] != "b0")
        throw FormatError("UNSAFE certificate: expected '1', 'b0', initial state");
    auto end = std::find(lines.begin() + 3, lines.end(), ".");
    if (end == lines.end())
        throw FormatError("UNSAFE certificate: missing '.' terminator");

    Witness w;
    try
    {
        w.initial = from_bitstring(lines[2]);
        for (auto it = lines.begin() + 3; it != end; ++it)
            w.inputs.push_back(from_bitstring(*it));
    }
    catch (const std::invalid_argument& e)
    {
        throw FormatError(std::string("UNSAFE certificate: ") + e.what());
    }
    return w;
}

Trace expand_witness(const aiger::Circuit& circuit, const Witness& w)
{
    Trace t;
    t.states.push_back(w.initial);
    for (const auto& u : w.inputs)
    {
        t.inputs.push_back(u);
        t.states.push_back(aiger::simulate_step(circuit, t.states.back(), u).next);
    }
    return t;
}

} // namespace capdr::certs
