#include "capdr/transition_system.hpp"

#include <climits>
#include <ostream>
#include <stdexcept>

namespace capdr {

namespace {

// Folded signal: a SAT literal or one of the two constants. Negation is
// unary minus for both.
constexpr int const_true = INT_MAX;
constexpr int const_false = -INT_MAX;

} // namespace

int TransitionSystem::prime(Lit l) const
{
    if (!is_state_var(var_of(l)))
        throw std::invalid_argument("prime: not a state literal " + std::to_string(l));
    return l > 0 ? l + _latches + _inputs : l - _latches - _inputs;
}

Lit TransitionSystem::unprime(int l) const
{
    if (!is_next_var(var_of(l)))
        throw std::invalid_argument("unprime: not a next-state literal " + std::to_string(l));
    return l > 0 ? l - _latches - _inputs : l + _latches + _inputs;
}

bool TransitionSystem::prop_holds(const Bits& state) const
{
    for (const auto& c : _prop)
    {
        bool sat = false;
        for (Lit l : c.lits)
            sat = sat || state.at(std::size_t(var_of(l) - 1)) == (l > 0);
        if (!sat)
            return false;
    }
    return true;
}

TransitionSystem encode(const aiger::Circuit& circuit)
{
    TransitionSystem ts;
    ts._latches = int(circuit.num_latches());
    ts._inputs = int(circuit.num_inputs());
    ts._vars = 2 * ts._latches + ts._inputs;

    std::vector<int> signal(std::size_t(circuit.max_var) + 1, const_false);
    for (std::size_t j = 0; j < circuit.inputs.size(); ++j)
        signal[aiger::var(circuit.inputs[j])] = ts.u_var(int(j));
    for (std::size_t i = 0; i < circuit.latches.size(); ++i)
        signal[aiger::var(circuit.latches[i].lit)] = ts.x_var(int(i));

    auto lookup = [&](aiger::ALit lit) {
        int s = signal[aiger::var(lit)];
        return aiger::sign(lit) ? -s : s;
    };

    for (const auto& g : circuit.ands)
    {
        int a = lookup(g.rhs0);
        int b = lookup(g.rhs1);
        int out;
        if (a == const_false || b == const_false || a == -b)
            out = const_false;
        else if (a == const_true)
            out = b;
        else if (b == const_true || a == b)
            out = a;
        else
        {
            out = ++ts._vars;
            ts._trans.push_back({-out, a});
            ts._trans.push_back({-out, b});
            ts._trans.push_back({out, -a, -b});
        }
        signal[aiger::var(g.lhs)] = out;
    }

    for (std::size_t i = 0; i < circuit.latches.size(); ++i)
    {
        const int xp = ts.xp_var(int(i));
        const int next = lookup(circuit.latches[i].next);
        if (next == const_true)
            ts._trans.push_back({xp});
        else if (next == const_false)
            ts._trans.push_back({-xp});
        else
        {
            ts._trans.push_back({-xp, next});
            ts._trans.push_back({xp, -next});
        }
    }

    ts._reset = aiger::reset_state(circuit);
    for (std::size_t i = 0; i < ts._reset.size(); ++i)
        ts._init.push_back(Clause{{ts._reset[i] ? int(i + 1) : -int(i + 1)}});

    ts._prop = aiger::property_cnf(circuit);
    return ts;
}

void write_dimacs(std::ostream& out, const TransitionSystem& ts)
{
    for (int i = 0; i < ts.num_latches(); ++i)
        out << "c x " << i << ' ' << ts.x_var(i) << '\n';
    for (int j = 0; j < ts.num_inputs(); ++j)
        out << "c u " << j << ' ' << ts.u_var(j) << '\n';
    for (int i = 0; i < ts.num_latches(); ++i)
        out << "c xp " << i << ' ' << ts.xp_var(i) << '\n';
    for (const auto& c : ts.init_cnf())
    {
        out << "c init";
        for (Lit l : c.lits)
            out << ' ' << l;
        out << " 0\n";
    }
    for (const auto& c : ts.prop_cnf())
    {
        out << "c prop";
        for (Lit l : c.lits)
            out << ' ' << l;
        out << " 0\n";
    }
    out << "p cnf " << ts.num_vars() << ' ' << ts.trans_cnf().size() << '\n';
    for (const auto& c : ts.trans_cnf())
    {
        for (int l : c)
            out << l << ' ';
        out << "0\n";
    }
}

Problem Problem::from_aiger(std::string text)
{
    auto circuit = aiger::parse(text);
    auto system = encode(circuit);
    return Problem{std::move(text), std::move(circuit), std::move(system)};
}

} // namespace capdr
