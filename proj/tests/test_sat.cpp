#include "capdr/sat.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using capdr::sat::Solver;

namespace {

struct Instance
{
    int vars = 0;
    std::vector<std::vector<int>> clauses;
    std::vector<int> assumptions;
};

Instance random_instance(std::mt19937_64& rng)
{
    Instance in;
    in.vars = int(rng() % 12) + 1;
    const int nclauses = int(rng() % 41);
    for (int c = 0; c < nclauses; ++c)
    {
        std::vector<int> cl;
        const int len = int(rng() % 4) + 1;
        for (int k = 0; k < len; ++k)
        {
            int v = int(rng() % std::uint64_t(in.vars)) + 1;
            cl.push_back(rng() % 2 ? v : -v);
        }
        in.clauses.push_back(cl);
    }
    const int na = int(rng() % 4);
    for (int k = 0; k < na; ++k)
    {
        int v = int(rng() % std::uint64_t(in.vars)) + 1;
        in.assumptions.push_back(rng() % 2 ? v : -v);
    }
    return in;
}

bool satisfies(std::uint32_t m, const std::vector<int>& clause)
{
    for (int l : clause)
    {
        bool val = (m >> (std::abs(l) - 1)) & 1;
        if (val == (l > 0))
            return true;
    }
    return false;
}

// Exhaustive oracle.
bool brute_force(const Instance& in, const std::vector<int>& units)
{
    for (std::uint32_t m = 0; m < (1u << in.vars); ++m)
    {
        bool ok = true;
        for (const auto& c : in.clauses)
            ok = ok && satisfies(m, c);
        for (int u : units)
            ok = ok && satisfies(m, {u});
        if (ok)
            return true;
    }
    return false;
}

void load(Solver& s, const Instance& in)
{
    s.reserve_vars(in.vars);
    for (const auto& c : in.clauses)
        s.add_clause(std::span<const int>(c));
}

} // namespace

TEST_CASE("unit examples")
{
    SUBCASE("single positive unit")
    {
        Solver s;
        int x = s.new_var();
        s.add_clause({x});
        auto r = s.solve();
        REQUIRE(r.is_sat());
        CHECK(r.value(x));
    }
    SUBCASE("complementary units")
    {
        Solver s;
        int x = s.new_var();
        s.add_clause({x});
        s.add_clause({-x});
        CHECK_FALSE(s.solve().is_sat());
    }
    SUBCASE("binary clause under assumption")
    {
        Solver s;
        int x = s.new_var(), y = s.new_var();
        s.add_clause({x, y});
        auto r = s.solve({-x});
        REQUIRE(r.is_sat());
        CHECK(r.value(y));
        CHECK_FALSE(r.value(x));
    }
}

TEST_CASE("failed assumptions")
{
    SUBCASE("conflicting pair")
    {
        Solver s;
        int a = s.new_var(), b = s.new_var();
        s.add_clause({-a, -b});
        auto r = s.solve({a, b});
        REQUIRE_FALSE(r.is_sat());
        for (int l : r.failed)
            CHECK((l == a || l == b));
        Solver check;
        check.reserve_vars(2);
        check.add_clause({-a, -b});
        for (int l : r.failed)
            check.add_clause({l});
        CHECK_FALSE(check.solve().is_sat());
    }
    SUBCASE("empty store")
    {
        Solver s;
        int a = s.new_var();
        auto r = s.solve({a});
        REQUIRE(r.is_sat());
        CHECK(r.value(a));
    }
    SUBCASE("single failed literal")
    {
        Solver s;
        int a = s.new_var();
        s.add_clause({a});
        auto r = s.solve({-a});
        REQUIRE_FALSE(r.is_sat());
        CHECK(r.failed == std::vector<int>{-a});
    }
    SUBCASE("irrelevant assumptions are left out")
    {
        Solver s;
        int a = s.new_var(), b = s.new_var(), c = s.new_var();
        s.add_clause({-a, -b});
        auto r = s.solve({c, a, b});
        REQUIRE_FALSE(r.is_sat());
        CHECK(std::find(r.failed.begin(), r.failed.end(), c) == r.failed.end());
    }
}

TEST_CASE("unknown variables are rejected")
{
    Solver s;
    s.new_var();
    CHECK_THROWS_AS(s.add_clause({2}), capdr::sat::UnknownVariable);
    CHECK_THROWS_AS(s.add_clause({0}), capdr::sat::UnknownVariable);
    CHECK_THROWS_AS(s.solve({-3}), capdr::sat::UnknownVariable);
}

TEST_CASE("agrees with exhaustive enumeration; cores re-solve UNSAT")
{
    std::mt19937_64 rng(20241);
    int sat_count = 0, unsat_count = 0;
    for (int n = 0; n < 1000; ++n)
    {
        auto in = random_instance(rng);
        Solver s{std::uint64_t(n)};
        load(s, in);
        auto r = s.solve(std::span<const int>(in.assumptions));
        const bool expect = brute_force(in, in.assumptions);
        CAPTURE(n);
        REQUIRE(r.is_sat() == expect);
        if (r.is_sat())
        {
            ++sat_count;
            for (const auto& c : in.clauses)
            {
                bool ok = false;
                for (int l : c)
                    ok = ok || r.value(l);
                CHECK(ok);
            }
            for (int a : in.assumptions)
                CHECK(r.value(a));
        }
        else
        {
            ++unsat_count;
            for (int l : r.failed)
                CHECK(std::find(in.assumptions.begin(), in.assumptions.end(), l) != in.assumptions.end());
            Solver check;
            load(check, in);
            for (int l : r.failed)
                check.add_clause({l});
            CHECK_FALSE(check.solve().is_sat());
            CHECK_FALSE(brute_force(in, r.failed));
        }
    }
    CHECK(sat_count > 100);
    CHECK(unsat_count > 100);
}

TEST_CASE("incremental use matches fresh solvers")
{
    std::mt19937_64 rng(7);
    for (int n = 0; n < 200; ++n)
    {
        auto in = random_instance(rng);
        Solver s;
        s.reserve_vars(in.vars);
        Instance partial;
        partial.vars = in.vars;
        for (const auto& c : in.clauses)
        {
            s.add_clause(std::span<const int>(c));
            partial.clauses.push_back(c);
            if (rng() % 4 == 0)
                CHECK(s.solve(std::span<const int>(in.assumptions)).is_sat() == brute_force(partial, in.assumptions));
        }
    }
}

TEST_CASE("same seed and call sequence give identical models and cores")
{
    std::mt19937_64 rng(99);
    for (int n = 0; n < 100; ++n)
    {
        auto in = random_instance(rng);
        Solver a(5), b(5);
        load(a, in);
        load(b, in);
        for (int rep = 0; rep < 3; ++rep)
        {
            auto ra = a.solve(std::span<const int>(in.assumptions));
            auto rb = b.solve(std::span<const int>(in.assumptions));
            CHECK(ra.status == rb.status);
            CHECK(ra.model == rb.model);
            CHECK(ra.failed == rb.failed);
        }
    }
}

TEST_CASE("pigeonhole instances are UNSAT and respect the conflict budget")
{
    // n+1 pigeons into n holes.
    const int holes = 6, pigeons = 7;
    auto var = [&](int p, int h) { return p * holes + h + 1; };
    auto build = [&](Solver& s) {
        s.reserve_vars(pigeons * holes);
        for (int p = 0; p < pigeons; ++p)
        {
            std::vector<int> c;
            for (int h = 0; h < holes; ++h)
                c.push_back(var(p, h));
            s.add_clause(std::span<const int>(c));
        }
        for (int h = 0; h < holes; ++h)
            for (int p = 0; p < pigeons; ++p)
                for (int q = p + 1; q < pigeons; ++q)
                    s.add_clause({-var(p, h), -var(q, h)});
    };
    Solver limited;
    build(limited);
    limited.set_conflict_budget(10);
    CHECK_THROWS_AS(limited.solve(), capdr::sat::ResourceBudgetExceeded);
    limited.set_conflict_budget(0);
    CHECK_FALSE(limited.solve().is_sat());

    Solver full;
    build(full);
    CHECK_FALSE(full.solve().is_sat());
    CHECK(full.stats().conflicts > 0);
}

TEST_CASE("DIMACS export of a query")
{
    Solver s;
    int a = s.new_var(), b = s.new_var();
    s.add_clause({a, b});
    std::ostringstream out;
    s.write_dimacs(out, std::vector<int>{-a});
    const auto text = out.str();
    CHECK(text.find("p cnf 2 2") != std::string::npos);
    CHECK(text.find("1 2 0") != std::string::npos);
    CHECK(text.find("-1 0") != std::string::npos);
}
