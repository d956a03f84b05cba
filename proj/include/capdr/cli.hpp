#pragma once

#include "capdr/engine.hpp"
#include "capdr/journal.hpp"
#include "capdr/metrics.hpp"
#include "capdr/policy.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace capdr::cli {

// Exit codes of `capdr solve`.
inline constexpr int exit_unsafe = 10;
inline constexpr int exit_safe = 20;
inline constexpr int exit_fail = 1;
inline constexpr int exit_io = 2;

// Runs the command line. Human-readable output goes to `out`/`err`; machine
// artifacts are written to files only.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

replay::json event_to_json(const policy::RankingEvent& e);
policy::RankingEvent event_from_json(const replay::json& j);

// Development cost-to-go for the chosen action of each event: the objective
// accumulated from the event to the end of an accepted run. Events of a FAIL
// run are marked failed.
std::vector<policy::RankingEvent> attach_costs(const std::vector<policy::RankingEvent>& events,
                                               const std::vector<double>& times, const engine::RunResult& result,
                                               const metrics::Weights& w);

} // namespace capdr::cli
