#pragma once

#include "capdr/engine.hpp"
#include "capdr/journal.hpp"
#include "capdr/transition_system.hpp"

#include <optional>
#include <vector>

namespace capdr::replay {

struct ReplayReport
{
    std::optional<engine::RunResult> result;
    std::optional<Divergence> divergence;
    // Jaccard distance between recorded and replayed invariants (SAFE), or
    // 0/1 for equal/different witness bytes (UNSAFE). Unset when the run
    // diverged or either side is FAIL.
    std::optional<double> delta;
    std::uint64_t computed = 0; // artifacts recomputed by the solver

    bool exact() const { return !divergence && delta && *delta == 0.0; }
};

// Options and scorer stored in a config record.
engine::Options options_from_config(const json& config);

// Re-executes the engine against `log`. Reuse mode consumes recorded solver
// artifacts; strict mode recomputes them and compares digests.
ReplayReport replay(const Problem& problem, const std::vector<Record>& log, bool strict);

} // namespace capdr::replay
