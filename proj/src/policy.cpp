#include "capdr/policy.hpp"

#include "capdr/digest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace capdr::policy {

namespace {

constexpr const char* names[feature_dim] = {
    "frame_index", "literal_count", "recency", "requeue_count", "chain_depth",
    "last_conflicts", "clause_activity", "frame_count", "queue_length", "bias",
};

std::string format_weights(const FeatureVector& w)
{
    std::ostringstream os;
    os.precision(17);
    for (double x : w)
        os << x << '\n';
    return os.str();
}

double dot(const FeatureVector& a, const FeatureVector& b)
{
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

FeatureVector diff(const TrainingPair& p)
{
    FeatureVector d{};
    for (std::size_t i = 0; i < feature_dim; ++i)
        d[i] = p.preferred[i] - p.other[i];
    return d;
}

// log(1 + exp(z))
double softplus(double z)
{
    return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z)
{
    if (z >= 0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace

const char* feature_name(std::size_t i)
{
    return i < feature_dim ? names[i] : "?";
}

std::string feature_schema_hash()
{
    std::string s = std::to_string(feature_dim);
    for (const char* n : names)
        s += std::string(",") + n;
    return sha256_hex(s);
}

PolicyModel PolicyModel::from_weights(const FeatureVector& w, std::string trained_on)
{
    return PolicyModel{w, sha256_hex(format_weights(w)), std::move(trained_on)};
}

double score(const PolicyModel& model, std::span<const double> psi)
{
    if (psi.size() != feature_dim)
        throw DimMismatch("score: feature vector has " + std::to_string(psi.size()) + " entries, expected " + std::to_string(feature_dim));
    return std::inner_product(psi.begin(), psi.end(), model.weights.begin(), 0.0);
}

double RandomScorer::score(const FeatureVector& psi) const
{
    std::uint64_t h = splitmix(_seed);
    for (double x : psi)
    {
        std::uint64_t bits = 0;
        static_assert(sizeof(bits) == sizeof(x));
        std::memcpy(&bits, &x, sizeof(bits));
        h = splitmix(h ^ bits);
    }
    return double(h >> 11) * 0x1.0p-53;
}

std::vector<Clause> generate_blocker_candidates(const Cube& d, const std::optional<Cube>& core, std::size_t budget)
{
    Cube target = d;
    normalize(target.lits);
    Cube base = target;
    if (core && !core->empty())
    {
        base = *core;
        normalize(base.lits);
        for (Lit l : base.lits)
            if (std::find(target.lits.begin(), target.lits.end(), l) == target.lits.end())
                throw std::invalid_argument("generate_blocker_candidates: core literal " + std::to_string(l) + " not in target cube");
    }

    std::vector<Clause> out;
    auto add = [&](const Cube& sub) {
        if (sub.empty())
            return;
        auto c = negate(sub);
        if (std::find(out.begin(), out.end(), c) == out.end())
            out.push_back(std::move(c));
    };

    add(base);
    std::size_t deletions = 0;
    for (std::size_t i = 0; i < base.size() && deletions < budget; ++i)
    {
        Cube sub = base;
        sub.lits.erase(sub.lits.begin() + std::ptrdiff_t(i));
        if (sub.empty())
            continue;
        add(sub);
        ++deletions;
    }
    add(target);
    return out;
}

std::vector<std::size_t> rank(std::span<const FeatureVector> psis, const Scorer* scorer)
{
    std::vector<std::size_t> order(psis.size());
    std::iota(order.begin(), order.end(), 0);
    if (!scorer)
        return order;
    std::vector<double> scores;
    scores.reserve(psis.size());
    for (const auto& psi : psis)
        scores.push_back(scorer->score(psi));
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

std::size_t select_obligation(std::span<const ObligationEntry> queue, const Scorer* scorer, std::size_t fairness_bound)
{
    if (queue.empty())
        throw EmptyQueue("select_obligation: queue is empty");

    std::optional<std::size_t> starving;
    for (std::size_t i = 0; i < queue.size(); ++i)
        if (queue[i].skipped >= fairness_bound && (!starving || queue[i].stamp < queue[*starving].stamp))
            starving = i;
    if (starving)
        return *starving;

    std::vector<double> scores(queue.size(), 0.0);
    if (scorer)
        for (std::size_t i = 0; i < queue.size(); ++i)
            scores[i] = scorer->score(queue[i].psi);

    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b])
            return scores[a] > scores[b];
        if (queue[a].level != queue[b].level)
            return queue[a].level < queue[b].level;
        if (queue[a].stamp != queue[b].stamp)
            return queue[a].stamp < queue[b].stamp;
        if (queue[a].cube && queue[b].cube)
            return CubeLess{}(*queue[a].cube, *queue[b].cube);
        return false;
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < queue.size(); ++i)
        if (better(i, best))
            best = i;
    return best;
}

std::vector<std::size_t> order_push_candidates(std::span<const PushEntry> entries, const Scorer* scorer)
{
    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> scores(entries.size(), 0.0);
    if (scorer)
        for (std::size_t i = 0; i < entries.size(); ++i)
            scores[i] = scorer->score(entries[i].psi);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b])
            return scores[a] > scores[b];
        if (entries[a].level != entries[b].level)
            return entries[a].level < entries[b].level;
        return entries[a].insertion < entries[b].insertion;
    });
    return order;
}

const char* to_string(ChoicePoint cp)
{
    switch (cp)
    {
    case ChoicePoint::cp1: return "CP1";
    case ChoicePoint::cp2: return "CP2";
    case ChoicePoint::cp3: return "CP3";
    }
    return "?";
}

std::vector<RankingEvent> merge_rollouts(std::span<const RankingEvent> events)
{
    std::vector<RankingEvent> merged;
    std::map<std::pair<int, std::string>, std::size_t> index;
    // Per merged event and candidate key: (sum of observed costs, count).
    std::vector<std::map<std::string, std::pair<double, int>>> observed;

    for (const auto& e : events)
    {
        const auto key = std::make_pair(int(e.cp), e.context_hash);
        auto [it, fresh] = index.try_emplace(key, merged.size());
        if (fresh)
        {
            merged.push_back(RankingEvent{e.cp, e.context_hash, {}, e.chosen, e.guard_outcomes});
            observed.emplace_back();
        }
        auto& m = merged[it->second];
        auto& obs = observed[it->second];
        for (const auto& c : e.candidates)
        {
            auto pos = std::find_if(m.candidates.begin(), m.candidates.end(), [&](const CandidateOutcome& x) { return x.key == c.key; });
            if (pos == m.candidates.end())
            {
                m.candidates.push_back(CandidateOutcome{c.key, c.psi, std::nullopt, false});
                pos = m.candidates.end() - 1;
            }
            if (c.cost)
            {
                auto& [sum, n] = obs[c.key];
                sum += *c.cost;
                ++n;
            }
            pos->failed = pos->failed || c.failed;
        }
    }

    for (std::size_t i = 0; i < merged.size(); ++i)
        for (auto& c : merged[i].candidates)
            if (auto it = observed[i].find(c.key); it != observed[i].end())
            {
                c.cost = it->second.first / it->second.second;
                c.failed = false;
            }
    return merged;
}

LabelResult label_pairs(std::span<const RankingEvent> events)
{
    LabelResult out;
    double max_cost = 0;
    bool any = false;
    for (const auto& e : events)
        for (const auto& c : e.candidates)
            if (c.cost)
            {
                max_cost = any ? std::max(max_cost, *c.cost) : *c.cost;
                any = true;
            }
    out.j_fail = 1.0 + (any ? max_cost : 0.0);

    auto cost_of = [&](const CandidateOutcome& c) -> std::optional<double> {
        if (c.cost)
            return c.cost;
        if (c.failed)
            return out.j_fail;
        return std::nullopt;
    };

    for (const auto& e : events)
        for (std::size_t a = 0; a < e.candidates.size(); ++a)
            for (std::size_t b = a + 1; b < e.candidates.size(); ++b)
            {
                const auto ca = cost_of(e.candidates[a]);
                const auto cb = cost_of(e.candidates[b]);
                if (!ca || !cb || *ca == *cb)
                    continue;
                if (*ca < *cb)
                    out.pairs.push_back({e.candidates[a].psi, e.candidates[b].psi});
                else
                    out.pairs.push_back({e.candidates[b].psi, e.candidates[a].psi});
            }
    return out;
}

double pairwise_loss(const FeatureVector& theta, std::span<const TrainingPair> pairs, double lambda)
{
    double loss = 0;
    for (const auto& p : pairs)
        loss += softplus(-dot(theta, diff(p)));
    return loss + lambda * dot(theta, theta);
}

FeatureVector pairwise_gradient(const FeatureVector& theta, std::span<const TrainingPair> pairs, double lambda)
{
    FeatureVector g{};
    for (const auto& p : pairs)
    {
        const auto d = diff(p);
        const double s = sigmoid(-dot(theta, d));
        for (std::size_t i = 0; i < feature_dim; ++i)
            g[i] -= s * d[i];
    }
    for (std::size_t i = 0; i < feature_dim; ++i)
        g[i] += 2 * lambda * theta[i];
    return g;
}

TrainResult train(std::span<const TrainingPair> pairs, double lambda, std::size_t epochs, std::uint64_t seed,
                  const std::string& trained_on)
{
    if (pairs.empty())
        throw NoPairs("train: no labeled pairs");
    if (lambda < 0)
        throw std::invalid_argument("train: lambda must be non-negative");

    FeatureVector theta{};
    if (seed != 0)
    {
        std::mt19937_64 rng(seed);
        for (auto& t : theta)
            t = (double(rng() >> 11) * 0x1.0p-53 - 0.5) * 2e-3;
    }

    TrainResult result;
    double loss = pairwise_loss(theta, pairs, lambda);
    result.loss_history.push_back(loss);
    double step = 1.0;

    for (std::size_t epoch = 0; epoch < epochs; ++epoch)
    {
        const auto g = pairwise_gradient(theta, pairs, lambda);
        const double gnorm2 = dot(g, g);
        if (gnorm2 == 0)
        {
            result.loss_history.push_back(loss);
            continue;
        }
        // Armijo backtracking.
        bool moved = false;
        for (; step > 1e-30; step *= 0.5)
        {
            FeatureVector cand = theta;
            for (std::size_t i = 0; i < feature_dim; ++i)
                cand[i] -= step * g[i];
            const double cand_loss = pairwise_loss(cand, pairs, lambda);
            if (cand_loss <= loss - 1e-4 * step * gnorm2)
            {
                theta = cand;
                loss = cand_loss;
                moved = true;
                break;
            }
        }
        result.loss_history.push_back(loss);
        if (!moved)
            break;
        step = std::min(step * 2, 1e6);
    }

    result.model = PolicyModel::from_weights(theta, trained_on);
    return result;
}

void write_model(std::ostream& out, const PolicyModel& model)
{
    out << "capdr-policy 1\n";
    out << "model_id " << model.model_id << '\n';
    out << "schema " << feature_schema_hash() << '\n';
    out << "trained_on " << (model.trained_on.empty() ? "-" : model.trained_on) << '\n';
    out << format_weights(model.weights);
}

PolicyModel read_model(std::istream& in)
{
    std::string magic, version, key, model_id, schema, trained_on;
    if (!(in >> magic >> version) || magic != "capdr-policy")
        throw ModelFormatError("policy model: bad magic");
    if (version != "1")
        throw ModelFormatError("policy model: unsupported version " + version);
    if (!(in >> key >> model_id) || key != "model_id")
        throw ModelFormatError("policy model: missing model_id");
    if (!(in >> key >> schema) || key != "schema")
        throw ModelFormatError("policy model: missing schema");
    if (schema != feature_schema_hash())
        throw ModelFormatError("policy model: feature schema mismatch");
    if (!(in >> key >> trained_on) || key != "trained_on")
        throw ModelFormatError("policy model: missing trained_on");

    FeatureVector w{};
    for (auto& x : w)
        if (!(in >> x))
            throw DimMismatch("policy model: expected " + std::to_string(feature_dim) + " weights");
    double extra = 0;
    if (in >> extra)
        throw DimMismatch("policy model: more than " + std::to_string(feature_dim) + " weights");

    auto model = PolicyModel::from_weights(w, trained_on == "-" ? "" : trained_on);
    if (model.model_id != model_id)
        throw ModelFormatError("policy model: model_id does not match weights");
    return model;
}

} // namespace capdr::policy
