#include "capdr/policy.hpp"

#include <doctest.h>

#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace capdr;
using namespace capdr::policy;

namespace {

FeatureVector fv(std::initializer_list<double> xs)
{
    FeatureVector v{};
    std::size_t i = 0;
    for (double x : xs)
        v[i++] = x;
    return v;
}

Clause clause(std::vector<Lit> lits) { return Clause{std::move(lits)}; }

// Scores by one coordinate.
struct AxisScorer : Scorer
{
    std::size_t axis;
    explicit AxisScorer(std::size_t a)
        : axis(a)
    {
    }
    double score(const FeatureVector& psi) const override { return psi[axis]; }
    std::string id() const override { return "axis"; }
};

double dot(const FeatureVector& a, const FeatureVector& b) { return std::inner_product(a.begin(), a.end(), b.begin(), 0.0); }

} // namespace

TEST_CASE("blocker candidates")
{
    const Cube d{{1, 2, 3, 4}};
    SUBCASE("core first, then deletions, then the full negation")
    {
        auto c = generate_blocker_candidates(d, Cube{{1, 3}}, 16);
        REQUIRE(c.size() == 4);
        CHECK(c[0] == clause({-1, -3}));
        CHECK(c[1] == clause({-3}));
        CHECK(c[2] == clause({-1}));
        CHECK(c[3] == clause({-1, -2, -3, -4}));
    }
    SUBCASE("deletion budget")
    {
        auto c = generate_blocker_candidates(d, Cube{{1, 3}}, 1);
        REQUIRE(c.size() == 3);
        CHECK(c[1] == clause({-3}));
        CHECK(generate_blocker_candidates(d, Cube{{1, 3}}, 0).size() == 2);
    }
    SUBCASE("no core")
    {
        auto c = generate_blocker_candidates(d, std::nullopt, 0);
        CHECK(c == std::vector<Clause>{clause({-1, -2, -3, -4})});
        c = generate_blocker_candidates(d, std::nullopt, 2);
        REQUIRE(c.size() == 3);
        CHECK(c[1] == clause({-2, -3, -4}));
        CHECK(c[2] == clause({-1, -3, -4}));
    }
    SUBCASE("single-literal core has no deletions and no empty clause")
    {
        auto c = generate_blocker_candidates(d, Cube{{2}}, 16);
        CHECK(c == std::vector<Clause>{clause({-2}), clause({-1, -2, -3, -4})});
    }
    SUBCASE("core equal to d does not repeat the fallback")
    {
        auto c = generate_blocker_candidates(Cube{{-1, 2}}, Cube{{-1, 2}}, 16);
        CHECK(c == std::vector<Clause>{clause({1, -2}), clause({-2}), clause({1})});
    }
    SUBCASE("core outside d is rejected")
    {
        CHECK_THROWS_AS(generate_blocker_candidates(d, Cube{{-1}}, 4), std::invalid_argument);
    }
    SUBCASE("random cubes: every candidate is blocked by d, no duplicates, fallback present")
    {
        std::mt19937_64 rng(3);
        for (int n = 0; n < 500; ++n)
        {
            Cube cube;
            for (int v = 1; v <= 8; ++v)
                if (rng() % 2)
                    cube.lits.push_back(rng() % 2 ? v : -v);
            if (cube.empty())
                continue;
            Cube core;
            for (Lit l : cube.lits)
                if (rng() % 2)
                    core.lits.push_back(l);
            auto c = generate_blocker_candidates(cube, core, std::size_t(rng() % 5));
            REQUIRE_FALSE(c.empty());
            CHECK(std::find(c.begin(), c.end(), negate(cube)) != c.end());
            CHECK(c.front() == negate(core.empty() ? cube : core));
            std::set<Clause, ClauseLess> seen(c.begin(), c.end());
            CHECK(seen.size() == c.size());
            for (const auto& x : c)
            {
                CHECK_FALSE(x.empty());
                CHECK(blocks(cube, x));
            }
        }
    }
}

TEST_CASE("score is a dot product")
{
    auto m = PolicyModel::from_weights(fv({1, -2, 0, 0, 0, 0, 0, 0, 0, 0.5}));
    CHECK(score(m, fv({3, 1, 7, 0, 0, 0, 0, 0, 0, 1})) == doctest::Approx(1.5));
    std::vector<double> short_psi(9, 1.0);
    CHECK_THROWS_AS(score(m, short_psi), DimMismatch);
    CHECK(m.model_id.size() == 64);
    CHECK(PolicyModel::from_weights(m.weights).model_id == m.model_id);
    CHECK(PolicyModel::from_weights(fv({1})).model_id != m.model_id);
}

TEST_CASE("random scorer is a deterministic function of psi and seed")
{
    RandomScorer a(1), b(1), c(2);
    auto psi = fv({1, 2, 3});
    CHECK(a.score(psi) == b.score(psi));
    CHECK(a.score(psi) != c.score(psi));
    CHECK(a.score(psi) != a.score(fv({1, 2, 4})));
    CHECK(a.score(psi) >= 0.0);
    CHECK(a.score(psi) < 1.0);
}

TEST_CASE("rank orders by descending score, ties in generation order")
{
    std::vector<FeatureVector> psis{fv({1}), fv({3}), fv({1}), fv({2})};
    AxisScorer s(0);
    CHECK(rank(psis, &s) == std::vector<std::size_t>{1, 3, 0, 2});
    CHECK(rank(psis, nullptr) == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("obligation selection")
{
    Cube a{{1}}, b{{-1}}, c{{2}};
    SUBCASE("baseline: lowest level, then oldest stamp, then cube order")
    {
        std::vector<ObligationEntry> q{{3, 0, 0, &a, {}}, {2, 5, 0, &b, {}}, {2, 4, 0, &c, {}}};
        CHECK(select_obligation(q, nullptr, 64) == 2);
        q[2].stamp = 5;
        CHECK(select_obligation(q, nullptr, 64) == 1);
    }
    SUBCASE("scorer wins over level")
    {
        std::vector<ObligationEntry> q{{1, 0, 0, &a, fv({0})}, {4, 1, 0, &b, fv({9})}};
        AxisScorer s(0);
        CHECK(select_obligation(q, &s, 64) == 1);
    }
    SUBCASE("starving entries are served first, oldest among them")
    {
        std::vector<ObligationEntry> q{{1, 7, 0, &a, fv({9})}, {4, 3, 5, &b, fv({0})}, {4, 2, 5, &c, fv({0})}};
        AxisScorer s(0);
        CHECK(select_obligation(q, &s, 5) == 2);
        CHECK(select_obligation(q, &s, 6) == 0);
    }
    SUBCASE("empty queue")
    {
        CHECK_THROWS_AS(select_obligation({}, nullptr, 1), EmptyQueue);
    }
    SUBCASE("bounded waiting under an adversarial scorer")
    {
        // The scorer always prefers the newest entry; without the bound the
        // first five would wait forever.
        const std::size_t bound = 4;
        AxisScorer s(0);
        std::vector<ObligationEntry> q;
        std::vector<std::size_t> waited;
        std::set<std::uint64_t> served;
        std::uint64_t stamp = 0;
        std::size_t max_wait = 0;
        auto push = [&] {
            q.push_back({1, stamp, 0, &a, fv({double(stamp)})});
            waited.push_back(0);
            ++stamp;
        };
        for (int n = 0; n < 5; ++n)
            push();
        for (int round = 0; round < 200; ++round)
        {
            push();
            auto pick = select_obligation(q, &s, bound);
            served.insert(q[pick].stamp);
            for (std::size_t n = 0; n < q.size(); ++n)
                if (n != pick)
                {
                    ++q[n].skipped;
                    max_wait = std::max(max_wait, ++waited[n]);
                }
            q.erase(q.begin() + std::ptrdiff_t(pick));
            waited.erase(waited.begin() + std::ptrdiff_t(pick));
        }
        CHECK(max_wait <= bound + 6);
        for (std::uint64_t st = 0; st < 5; ++st)
            CHECK(served.count(st));

        // Without a bound that can be reached, the oldest entry is never served.
        std::vector<ObligationEntry> fixed{{1, 0, 0, &a, fv({0})}, {1, 1, 0, &b, fv({1})}};
        for (int n = 0; n < 100; ++n)
        {
            CHECK(select_obligation(fixed, &s, 1000) == 1);
            ++fixed[0].skipped;
        }
    }
}

TEST_CASE("push ordering is a permutation")
{
    std::vector<PushEntry> entries{{2, 0, fv({0})}, {1, 3, fv({0})}, {1, 1, fv({5})}, {3, 2, fv({1})}};
    CHECK(order_push_candidates(entries, nullptr) == std::vector<std::size_t>{2, 1, 0, 3});
    AxisScorer s(0);
    CHECK(order_push_candidates(entries, &s) == std::vector<std::size_t>{2, 3, 1, 0});

    std::mt19937_64 rng(8);
    RandomScorer r(4);
    for (int n = 0; n < 100; ++n)
    {
        std::vector<PushEntry> es(rng() % 20);
        for (std::size_t i = 0; i < es.size(); ++i)
            es[i] = {std::size_t(rng() % 4 + 1), i, fv({double(rng() % 3)})};
        for (const Scorer* sc : {(const Scorer*)nullptr, (const Scorer*)&r})
        {
            auto order = order_push_candidates(es, sc);
            auto sorted = order;
            std::sort(sorted.begin(), sorted.end());
            std::vector<std::size_t> ident(es.size());
            std::iota(ident.begin(), ident.end(), 0);
            CHECK(sorted == ident);
        }
    }
}

TEST_CASE("labelling pairs")
{
    RankingEvent e;
    e.cp = ChoicePoint::cp1;
    e.candidates = {
        {"a", fv({1}), 2.0, false},
        {"b", fv({2}), 5.0, false},
        {"c", fv({3}), std::nullopt, true},
        {"d", fv({4}), std::nullopt, false},
        {"e", fv({5}), 2.0, false},
    };
    auto r = label_pairs(std::span<const RankingEvent>(&e, 1));
    CHECK(r.j_fail == 6.0);
    // a<b, a<c, b<c, b>e, c>e; a/e tie and every pair with d are skipped.
    REQUIRE(r.pairs.size() == 5);
    std::set<std::pair<double, double>> got;
    for (const auto& p : r.pairs)
        got.insert({p.preferred[0], p.other[0]});
    CHECK(got == std::set<std::pair<double, double>>{{1, 2}, {1, 3}, {2, 3}, {5, 2}, {5, 3}});

    SUBCASE("no costs at all")
    {
        RankingEvent f;
        f.candidates = {{"x", fv({1}), std::nullopt, true}, {"y", fv({2}), std::nullopt, false}};
        auto q = label_pairs(std::span<const RankingEvent>(&f, 1));
        CHECK(q.j_fail == 1.0);
        CHECK(q.pairs.empty());
    }
}

TEST_CASE("merging rollouts of the same context")
{
    RankingEvent x, y, z;
    x.cp = y.cp = ChoicePoint::cp1;
    z.cp = ChoicePoint::cp2;
    x.context_hash = y.context_hash = z.context_hash = "h";
    x.candidates = {{"a", fv({1}), 4.0, false}, {"b", fv({2}), std::nullopt, false}};
    y.candidates = {{"a", fv({1}), 2.0, false}, {"b", fv({2}), 1.0, false}};
    z.candidates = {{"a", fv({1}), 9.0, false}};
    std::vector<RankingEvent> events{x, y, z};
    auto m = merge_rollouts(events);
    REQUIRE(m.size() == 2);
    REQUIRE(m[0].candidates.size() == 2);
    CHECK(*m[0].candidates[0].cost == 3.0);
    CHECK(*m[0].candidates[1].cost == 1.0);
    CHECK(*m[1].candidates[0].cost == 9.0);
}

TEST_CASE("pairwise training")
{
    // Separable: the preferred side always has a larger first coordinate.
    std::mt19937_64 rng(12);
    std::vector<TrainingPair> pairs;
    for (int n = 0; n < 40; ++n)
    {
        auto a = fv({double(rng() % 10) + 1.0, double(rng() % 5), 0, 0, 0, 0, 0, 0, 0, 1});
        auto b = a;
        b[0] -= double(rng() % 3) + 1.0;
        b[1] = double(rng() % 5);
        pairs.push_back({a, b});
    }

    SUBCASE("loss is non-increasing and the pairs end up ranked")
    {
        auto r = train(pairs, 1e-3, 50, 0);
        REQUIRE(r.loss_history.size() >= 2);
        for (std::size_t n = 1; n < r.loss_history.size(); ++n)
            CHECK(r.loss_history[n] <= r.loss_history[n - 1] + 1e-12);
        CHECK(r.loss_history.back() < r.loss_history.front());
        for (const auto& p : pairs)
            CHECK(score(r.model, p.preferred) > score(r.model, p.other));
    }
    SUBCASE("heavy regularization keeps weights near zero")
    {
        auto r = train(pairs, 1e6, 50, 0);
        for (double w : r.model.weights)
            CHECK(std::abs(w) < 1e-4);
    }
    SUBCASE("seeded runs are reproducible")
    {
        auto a = train(pairs, 1e-2, 10, 5, "corpus");
        auto b = train(pairs, 1e-2, 10, 5, "corpus");
        CHECK(a.model.weights == b.model.weights);
        CHECK(a.model.model_id == b.model.model_id);
        CHECK(a.model.trained_on == "corpus");
    }
    SUBCASE("gradient matches finite differences")
    {
        auto theta = fv({0.3, -0.2, 0.1, 0, 0.05, 0, 0, 0, 0, -0.4});
        const double lambda = 0.7;
        auto g = pairwise_gradient(theta, pairs, lambda);
        for (std::size_t i = 0; i < feature_dim; ++i)
        {
            const double h = 1e-6;
            auto up = theta, down = theta;
            up[i] += h;
            down[i] -= h;
            const double fd = (pairwise_loss(up, pairs, lambda) - pairwise_loss(down, pairs, lambda)) / (2 * h);
            CHECK(g[i] == doctest::Approx(fd).epsilon(1e-4));
        }
    }
    SUBCASE("loss at zero is n log 2")
    {
        CHECK(pairwise_loss({}, pairs, 1.0) == doctest::Approx(40 * std::log(2.0)));
        auto theta = fv({1});
        CHECK(dot(pairwise_gradient(theta, pairs, 0), theta) < 0);
    }
    SUBCASE("bad arguments")
    {
        CHECK_THROWS_AS(train({}, 1.0, 5, 0), NoPairs);
        CHECK_THROWS_AS(train(pairs, -1.0, 5, 0), std::invalid_argument);
    }
}

TEST_CASE("model files")
{
    auto m = PolicyModel::from_weights(fv({0.1, -2.5, 1e-9, 3, 0, 0, 0, 0, 7, 1.0 / 3}), "abc");
    std::stringstream ss;
    write_model(ss, m);
    const auto text = ss.str();
    auto back = read_model(ss);
    CHECK(back.weights == m.weights);
    CHECK(back.model_id == m.model_id);
    CHECK(back.trained_on == "abc");

    auto expect_error = [](std::string t) {
        std::istringstream in(t);
        read_model(in);
    };
    SUBCASE("tampered weight")
    {
        auto t = text;
        t.replace(t.find("\n3\n"), 3, "\n4\n");
        CHECK_THROWS_AS(expect_error(t), ModelFormatError);
    }
    SUBCASE("missing weight")
    {
        auto t = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
        CHECK_THROWS_AS(expect_error(t), DimMismatch);
    }
    SUBCASE("extra weight")
    {
        CHECK_THROWS_AS(expect_error(text + "1\n"), DimMismatch);
    }
    SUBCASE("wrong schema")
    {
        auto t = text;
        auto at = t.find("schema ") + 7;
        t[at] = t[at] == '0' ? '1' : '0';
        CHECK_THROWS_AS(expect_error(t), ModelFormatError);
    }
    SUBCASE("bad magic")
    {
        CHECK_THROWS_AS(expect_error("policy 1\n"), ModelFormatError);
    }
}

TEST_CASE("feature schema")
{
    CHECK(std::string(feature_name(0)) == "frame_index");
    CHECK(std::string(feature_name(bias)) == "bias");
    CHECK(feature_schema_hash().size() == 64);
}
