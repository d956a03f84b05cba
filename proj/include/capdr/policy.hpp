#pragma once

#include "capdr/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace capdr::policy {

inline constexpr std::size_t feature_dim = 10;

// Fixed feature layout ψ(φ, a). Every choice point fills all slots; slots
// that do not apply to an action are 0.
enum Feature : std::size_t
{
    frame_index = 0,   // level of the obligation / clause
    literal_count,     // |candidate clause| or |cube|
    recency,           // stamps elapsed since the item was created
    requeue_count,     // times the obligation was requeued
    chain_depth,       // successor links to the bad state
    last_conflicts,    // conflicts in the most recent SAT query
    clause_activity,   // successful pushes of the clause so far
    frame_count,       // current depth k
    queue_length,      // pending obligations
    bias,              // always 1
};

using FeatureVector = std::array<double, feature_dim>;

const char* feature_name(std::size_t i);
std::string feature_schema_hash();

class DimMismatch : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

struct PolicyModel
{
    FeatureVector weights{};
    std::string model_id;   // digest of the weights
    std::string trained_on; // digest of the training corpus manifest

    static PolicyModel from_weights(const FeatureVector& w, std::string trained_on = "");
};

// score_θ(ψ) = θ·ψ.
double score(const PolicyModel& model, std::span<const double> psi);

// Frozen scorer interface consumed by the engine. Implementations must be
// pure functions of ψ.
class Scorer
{
public:
    virtual ~Scorer() = default;
    virtual double score(const FeatureVector& psi) const = 0;
    virtual std::string id() const = 0;
};

class LinearScorer final : public Scorer
{
public:
    explicit LinearScorer(PolicyModel model)
        : _model(std::move(model))
    {
    }
    double score(const FeatureVector& psi) const override { return policy::score(_model, psi); }
    std::string id() const override { return "linear:" + _model.model_id; }
    const PolicyModel& model() const { return _model; }

private:
    PolicyModel _model;
};

// Control scorer: a seeded hash of ψ. Deterministic, but unrelated to any
// cost signal.
class RandomScorer final : public Scorer
{
public:
    explicit RandomScorer(std::uint64_t seed)
        : _seed(seed)
    {
    }
    double score(const FeatureVector& psi) const override;
    std::string id() const override { return "random:" + std::to_string(_seed); }

private:
    std::uint64_t _seed;
};

// CP1 menu for target cube d: ¬d_core, then up to `budget` single-literal
// deletions of d_core in variable order, then ¬d. Without a core
// d_core = d. Duplicates and the empty clause are never produced.
std::vector<Clause> generate_blocker_candidates(const Cube& d, const std::optional<Cube>& core, std::size_t budget);

// Indices of `psis` ordered by descending score; equal scores keep
// generation order. A null scorer yields generation order.
std::vector<std::size_t> rank(std::span<const FeatureVector> psis, const Scorer* scorer);

struct ObligationEntry
{
    std::size_t level = 0;
    std::uint64_t stamp = 0;
    std::size_t skipped = 0; // selections this entry has been passed over
    const Cube* cube = nullptr;
    FeatureVector psi{};
};

class EmptyQueue : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

// CP2. Returns the index of the obligation to serve: the oldest entry whose
// skip count reached `fairness_bound`, otherwise the best by (score desc,
// level asc, stamp asc, cube). A null scorer treats all scores as equal.
std::size_t select_obligation(std::span<const ObligationEntry> queue, const Scorer* scorer, std::size_t fairness_bound);

struct PushEntry
{
    std::size_t level = 0;
    std::uint64_t insertion = 0; // global insertion order of the clause
    FeatureVector psi{};
};

// CP3. Permutation of `entries`: by score when a scorer is given, ties and
// the baseline ordered by (level asc, insertion asc).
std::vector<std::size_t> order_push_candidates(std::span<const PushEntry> entries, const Scorer* scorer);

enum class ChoicePoint
{
    cp1,
    cp2,
    cp3,
};

const char* to_string(ChoicePoint cp);

struct CandidateOutcome
{
    std::string key; // stable identity of the action within its context
    FeatureVector psi{};
    std::optional<double> cost; // observed development cost-to-go
    bool failed = false;        // rollout timed out or was rejected
};

struct RankingEvent
{
    ChoicePoint cp = ChoicePoint::cp1;
    std::string context_hash;
    std::vector<CandidateOutcome> candidates;
    std::size_t chosen = 0;
    std::vector<bool> guard_outcomes; // per attempted candidate, in scan order
};

// Combines events from several development runs that share (cp, context)
// so alternatives observed in different rollouts can be compared.
std::vector<RankingEvent> merge_rollouts(std::span<const RankingEvent> events);

struct TrainingPair
{
    FeatureVector preferred{};
    FeatureVector other{};
};

struct LabelResult
{
    std::vector<TrainingPair> pairs;
    double j_fail = 1.0;
};

// Pairs are emitted only when both alternatives carry a cost; failures are
// charged J_fail = 1 + max observed cost over the corpus.
LabelResult label_pairs(std::span<const RankingEvent> events);

class NoPairs : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

// Σ log(1 + exp(-θ·(ψ_pref - ψ_other))) + λ‖θ‖².
double pairwise_loss(const FeatureVector& theta, std::span<const TrainingPair> pairs, double lambda);
FeatureVector pairwise_gradient(const FeatureVector& theta, std::span<const TrainingPair> pairs, double lambda);

struct TrainResult
{
    PolicyModel model;
    std::vector<double> loss_history; // loss before epoch 0, then after each epoch
};

// Full-batch gradient descent with backtracking line search; the loss is
// non-increasing across epochs.
TrainResult train(std::span<const TrainingPair> pairs, double lambda, std::size_t epochs, std::uint64_t seed,
                  const std::string& trained_on = "");

class ModelFormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Text format:
//   capdr-policy 1
//   model_id <hex>
//   schema <hex>
//   trained_on <hex or ->
//   ten weights, one per line
void write_model(std::ostream& out, const PolicyModel& model);
PolicyModel read_model(std::istream& in);

} // namespace capdr::policy
