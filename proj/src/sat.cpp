#include "capdr/sat.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace capdr::sat {

namespace {

constexpr double var_decay = 0.95;
constexpr double clause_decay = 0.999;
constexpr std::uint64_t restart_base = 100;

// Luby sequence 1 1 2 1 1 2 4 ...
double luby(double y, std::uint64_t x)
{
    std::uint64_t size = 1;
    int seq = 0;
    while (size < x + 1)
    {
        ++seq;
        size = 2 * size + 1;
    }
    while (size - 1 != x)
    {
        size = (size - 1) >> 1;
        --seq;
        x = x % size;
    }
    return std::pow(y, seq);
}

} // namespace

Solver::Solver(std::uint64_t seed)
    : _rng(seed)
{
}

int Solver::new_var()
{
    const int v = num_vars();
    _assigns.push_back(0);
    _level.push_back(0);
    _reason.push_back(no_reason);
    _phase.push_back(false);
    _seen.push_back(0);
    _watches.emplace_back();
    _watches.emplace_back();
    // Seeded jitter decides the initial branching order among untouched
    // variables; it is the only use of the seed.
    _activity.push_back(double(_rng() >> 11) * 0x1.0p-53 * 1e-3);
    _heap_pos.push_back(-1);
    heap_insert(v);
    return v + 1;
}

void Solver::reserve_vars(int n)
{
    while (num_vars() < n)
        new_var();
}

Solver::ILit Solver::to_ilit(int lit) const
{
    const int v = lit > 0 ? lit : -lit;
    if (lit == 0 || v > num_vars())
        throw UnknownVariable("literal " + std::to_string(lit) + " references an unallocated variable");
    return ILit(2 * (v - 1)) | (lit < 0 ? 1u : 0u);
}

void Solver::add_clause(std::span<const int> ext)
{
    std::vector<ILit> lits;
    lits.reserve(ext.size());
    for (int l : ext)
        lits.push_back(to_ilit(l));
    if (!_ok)
        return;

    std::sort(lits.begin(), lits.end());
    lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
    std::vector<ILit> kept;
    for (std::size_t i = 0; i < lits.size(); ++i)
    {
        if (i + 1 < lits.size() && lits[i + 1] == (lits[i] ^ 1u))
            return; // tautology
        const auto v = value(lits[i]);
        if (v > 0)
            return; // satisfied at level 0
        if (v == 0)
            kept.push_back(lits[i]);
    }

    if (kept.empty())
    {
        _ok = false;
        return;
    }
    if (kept.size() == 1)
    {
        enqueue(kept[0], no_reason);
        if (propagate() != no_reason)
            _ok = false;
        return;
    }
    _clauses.push_back(ClauseRec{std::move(kept), 0, false, false});
    attach(int(_clauses.size() - 1));
}

void Solver::attach(int cref)
{
    const auto& c = _clauses[std::size_t(cref)];
    _watches[c.lits[0]].push_back({cref, c.lits[1]});
    _watches[c.lits[1]].push_back({cref, c.lits[0]});
}

void Solver::enqueue(ILit l, int reason)
{
    const auto v = std::size_t(ivar(l));
    _assigns[v] = (l & 1u) ? -1 : 1;
    _level[v] = decision_level();
    _reason[v] = reason;
    _trail.push_back(l);
}

int Solver::propagate()
{
    int confl = no_reason;
    while (_qhead < _trail.size())
    {
        const ILit p = _trail[_qhead++];
        const ILit false_lit = p ^ 1u;
        auto& ws = _watches[false_lit];
        ++_stats.propagations;

        std::size_t i = 0, j = 0;
        while (i < ws.size())
        {
            const Watch w = ws[i];
            if (value(w.blocker) > 0)
            {
                ws[j++] = ws[i++];
                continue;
            }
            auto& c = _clauses[std::size_t(w.cref)];
            if (c.deleted)
            {
                ++i;
                continue;
            }
            auto& lits = c.lits;
            if (lits[0] == false_lit)
                std::swap(lits[0], lits[1]);
            ++i;

            const ILit first = lits[0];
            const Watch nw{w.cref, first};
            if (first != w.blocker && value(first) > 0)
            {
                ws[j++] = nw;
                continue;
            }

            bool moved = false;
            for (std::size_t k = 2; k < lits.size(); ++k)
            {
                if (value(lits[k]) >= 0)
                {
                    lits[1] = lits[k];
                    lits[k] = false_lit;
                    _watches[lits[1]].push_back(nw);
                    moved = true;
                    break;
                }
            }
            if (moved)
                continue;

            ws[j++] = nw;
            if (value(first) < 0)
            {
                confl = w.cref;
                _qhead = _trail.size();
                while (i < ws.size())
                    ws[j++] = ws[i++];
            }
            else
                enqueue(first, w.cref);
        }
        ws.resize(j);
        if (confl != no_reason)
            break;
    }
    return confl;
}

void Solver::analyze(int confl, std::vector<ILit>& learnt, int& bt_level)
{
    learnt.clear();
    learnt.push_back(undef_lit);
    int path = 0;
    ILit p = undef_lit;
    std::size_t index = _trail.size();

    do
    {
        auto& c = _clauses[std::size_t(confl)];
        if (c.learnt)
            bump_clause(c);
        for (std::size_t j = (p == undef_lit ? 0 : 1); j < c.lits.size(); ++j)
        {
            const ILit q = c.lits[j];
            const auto v = std::size_t(ivar(q));
            if (!_seen[v] && _level[v] > 0)
            {
                bump_var(int(v));
                _seen[v] = 1;
                if (_level[v] >= decision_level())
                    ++path;
                else
                    learnt.push_back(q);
            }
        }
        while (!_seen[std::size_t(ivar(_trail[--index]))])
            ;
        p = _trail[index];
        confl = _reason[std::size_t(ivar(p))];
        _seen[std::size_t(ivar(p))] = 0;
        --path;
    } while (path > 0);
    learnt[0] = p ^ 1u;

    // Drop literals implied by the rest of the clause through one reason step.
    const auto original = learnt;
    std::size_t keep = 1;
    for (std::size_t i = 1; i < learnt.size(); ++i)
    {
        const int r = _reason[std::size_t(ivar(learnt[i]))];
        bool redundant = r != no_reason;
        if (redundant)
        {
            const auto& rc = _clauses[std::size_t(r)].lits;
            for (std::size_t k = 1; k < rc.size(); ++k)
            {
                const auto v = std::size_t(ivar(rc[k]));
                if (!_seen[v] && _level[v] > 0)
                {
                    redundant = false;
                    break;
                }
            }
        }
        if (!redundant)
            learnt[keep++] = learnt[i];
    }
    learnt.resize(keep);
    for (ILit l : original)
        _seen[std::size_t(ivar(l))] = 0;

    bt_level = 0;
    if (learnt.size() > 1)
    {
        std::size_t max_i = 1;
        for (std::size_t i = 2; i < learnt.size(); ++i)
            if (_level[std::size_t(ivar(learnt[i]))] > _level[std::size_t(ivar(learnt[max_i]))])
                max_i = i;
        std::swap(learnt[1], learnt[max_i]);
        bt_level = _level[std::size_t(ivar(learnt[1]))];
    }
}

void Solver::analyze_final(ILit p, std::vector<int>& failed)
{
    failed.clear();
    failed.push_back(to_ext(p));
    if (decision_level() == 0)
        return;

    _seen[std::size_t(ivar(p))] = 1;
    for (std::size_t i = _trail.size(); i-- > std::size_t(_trail_lim[0]);)
    {
        const auto x = std::size_t(ivar(_trail[i]));
        if (!_seen[x])
            continue;
        if (_reason[x] == no_reason)
            failed.push_back(to_ext(_trail[i]));
        else
        {
            const auto& c = _clauses[std::size_t(_reason[x])].lits;
            for (std::size_t j = 1; j < c.size(); ++j)
                if (_level[std::size_t(ivar(c[j]))] > 0)
                    _seen[std::size_t(ivar(c[j]))] = 1;
        }
        _seen[x] = 0;
    }
    _seen[std::size_t(ivar(p))] = 0;
    std::sort(failed.begin(), failed.end());
    failed.erase(std::unique(failed.begin(), failed.end()), failed.end());
}

void Solver::cancel_until(int level)
{
    if (decision_level() <= level)
        return;
    for (std::size_t i = _trail.size(); i-- > std::size_t(_trail_lim[std::size_t(level)]);)
    {
        const auto v = std::size_t(ivar(_trail[i]));
        _phase[v] = (_trail[i] & 1u) == 0;
        _assigns[v] = 0;
        _reason[v] = no_reason;
        if (_heap_pos[v] < 0)
            heap_insert(int(v));
    }
    _trail.resize(std::size_t(_trail_lim[std::size_t(level)]));
    _trail_lim.resize(std::size_t(level));
    _qhead = _trail.size();
}

Solver::ILit Solver::pick_branch()
{
    while (!_heap.empty())
    {
        const int v = heap_pop();
        if (_assigns[std::size_t(v)] == 0)
            return ILit(2 * v) | (_phase[std::size_t(v)] ? 0u : 1u);
    }
    return undef_lit;
}

void Solver::bump_var(int v)
{
    auto& a = _activity[std::size_t(v)];
    a += _var_inc;
    if (a > 1e100)
    {
        for (auto& x : _activity)
            x *= 1e-100;
        _var_inc *= 1e-100;
    }
    if (_heap_pos[std::size_t(v)] >= 0)
        heap_up(std::size_t(_heap_pos[std::size_t(v)]));
}

void Solver::bump_clause(ClauseRec& c)
{
    c.activity += _cla_inc;
    if (c.activity > 1e20)
    {
        for (auto& rec : _clauses)
            if (rec.learnt)
                rec.activity *= 1e-20;
        _cla_inc *= 1e-20;
    }
}

bool Solver::locked(int cref) const
{
    const auto& c = _clauses[std::size_t(cref)];
    const auto v = std::size_t(ivar(c.lits[0]));
    return _reason[v] == cref && value(c.lits[0]) > 0;
}

void Solver::reduce_db()
{
    std::vector<int> learnts;
    for (std::size_t i = 0; i < _clauses.size(); ++i)
        if (_clauses[i].learnt && !_clauses[i].deleted && _clauses[i].lits.size() > 2)
            learnts.push_back(int(i));
    std::sort(learnts.begin(), learnts.end(), [&](int a, int b) {
        const auto& ca = _clauses[std::size_t(a)];
        const auto& cb = _clauses[std::size_t(b)];
        return ca.activity != cb.activity ? ca.activity < cb.activity : a < b;
    });
    for (std::size_t i = 0; i < learnts.size() / 2; ++i)
    {
        if (locked(learnts[i]))
            continue;
        auto& c = _clauses[std::size_t(learnts[i])];
        c.deleted = true;
        c.lits.clear();
        c.lits.shrink_to_fit();
        --_num_learnts;
    }
}

Result Solver::solve(std::span<const int> ext_assumptions)
{
    std::vector<ILit> assumptions;
    assumptions.reserve(ext_assumptions.size());
    for (int l : ext_assumptions)
        assumptions.push_back(to_ilit(l));

    ++_stats.queries;
    _last_conflicts = 0;
    Result result;
    if (!_ok)
        return result;

    std::uint64_t restarts = 0;
    std::uint64_t since_restart = 0;
    std::uint64_t restart_limit = std::uint64_t(luby(2, restarts) * restart_base);
    std::vector<ILit> learnt;

    for (;;)
    {
        const int confl = propagate();
        if (confl != no_reason)
        {
            ++_stats.conflicts;
            ++_last_conflicts;
            ++since_restart;
            if (decision_level() == 0)
            {
                _ok = false;
                return result;
            }
            int bt = 0;
            analyze(confl, learnt, bt);
            cancel_until(bt);
            if (learnt.size() == 1)
                enqueue(learnt[0], no_reason);
            else
            {
                _clauses.push_back(ClauseRec{learnt, 0, true, false});
                const int cref = int(_clauses.size() - 1);
                attach(cref);
                bump_clause(_clauses.back());
                ++_num_learnts;
                enqueue(learnt[0], cref);
            }
            _var_inc /= var_decay;
            _cla_inc /= clause_decay;

            if (_conflict_budget != 0 && _last_conflicts >= _conflict_budget)
            {
                cancel_until(0);
                throw ResourceBudgetExceeded("conflict budget of " + std::to_string(_conflict_budget) + " exceeded");
            }
            continue;
        }

        if (since_restart >= restart_limit)
        {
            cancel_until(0);
            since_restart = 0;
            restart_limit = std::uint64_t(luby(2, ++restarts) * restart_base);
            continue;
        }
        if (double(_num_learnts) >= _max_learnts + double(_trail.size()))
        {
            reduce_db();
            _max_learnts *= 1.1;
        }

        ILit next = undef_lit;
        while (std::size_t(decision_level()) < assumptions.size())
        {
            const ILit p = assumptions[std::size_t(decision_level())];
            const auto v = value(p);
            if (v > 0)
                _trail_lim.push_back(int(_trail.size()));
            else if (v < 0)
            {
                analyze_final(p, result.failed);
                cancel_until(0);
                result.status = Status::unsat;
                return result;
            }
            else
            {
                next = p;
                break;
            }
        }

        if (next == undef_lit)
        {
            next = pick_branch();
            if (next == undef_lit)
            {
                result.status = Status::sat;
                result.model.assign(_assigns.size() + 1, 0);
                for (std::size_t v = 0; v < _assigns.size(); ++v)
                    result.model[v + 1] = _assigns[v] > 0 ? 1 : 0;
                cancel_until(0);
                return result;
            }
            ++_stats.decisions;
        }
        _trail_lim.push_back(int(_trail.size()));
        enqueue(next, no_reason);
    }
}

void Solver::write_dimacs(std::ostream& out, std::span<const int> assumptions) const
{
    if (!_ok)
    {
        out << "p cnf " << num_vars() << " 1\n0\n";
        return;
    }
    std::vector<std::vector<int>> clauses;
    for (std::size_t i = 0; i < _trail.size(); ++i)
        clauses.push_back({to_ext(_trail[i])});
    for (const auto& c : _clauses)
    {
        if (c.learnt || c.deleted)
            continue;
        std::vector<int> ext;
        for (ILit l : c.lits)
            ext.push_back(to_ext(l));
        clauses.push_back(std::move(ext));
    }
    for (int l : assumptions)
        clauses.push_back({l});

    out << "p cnf " << num_vars() << ' ' << clauses.size() << '\n';
    for (const auto& c : clauses)
    {
        for (int l : c)
            out << l << ' ';
        out << "0\n";
    }
}

bool Solver::heap_less(int a, int b) const
{
    const double aa = _activity[std::size_t(a)];
    const double ab = _activity[std::size_t(b)];
    return aa != ab ? aa > ab : a < b;
}

void Solver::heap_insert(int v)
{
    _heap_pos[std::size_t(v)] = int(_heap.size());
    _heap.push_back(v);
    heap_up(_heap.size() - 1);
}

int Solver::heap_pop()
{
    const int top = _heap.front();
    _heap_pos[std::size_t(top)] = -1;
    const int last = _heap.back();
    _heap.pop_back();
    if (!_heap.empty())
    {
        _heap[0] = last;
        _heap_pos[std::size_t(last)] = 0;
        heap_down(0);
    }
    return top;
}

void Solver::heap_up(std::size_t i)
{
    const int v = _heap[i];
    while (i > 0)
    {
        const std::size_t parent = (i - 1) / 2;
        if (!heap_less(v, _heap[parent]))
            break;
        _heap[i] = _heap[parent];
        _heap_pos[std::size_t(_heap[i])] = int(i);
        i = parent;
    }
    _heap[i] = v;
    _heap_pos[std::size_t(v)] = int(i);
}

void Solver::heap_down(std::size_t i)
{
    const int v = _heap[i];
    for (;;)
    {
        std::size_t child = 2 * i + 1;
        if (child >= _heap.size())
            break;
        if (child + 1 < _heap.size() && heap_less(_heap[child + 1], _heap[child]))
            ++child;
        if (!heap_less(_heap[child], v))
            break;
        _heap[i] = _heap[child];
        _heap_pos[std::size_t(_heap[i])] = int(i);
        i = child;
    }
    _heap[i] = v;
    _heap_pos[std::size_t(v)] = int(i);
}

} // namespace capdr::sat
