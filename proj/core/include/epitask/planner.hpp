#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epitask/compiler.hpp"
#include "json.hpp"

namespace epitask {

constexpr std::uint64_t kDefaultNodeBudget = 1'000'000;

struct PlanResult {
  enum class Verdict { solvable, unsolvable, budget_exhausted };
  Verdict verdict = Verdict::unsolvable;
  std::vector<std::string> plan;
  std::uint64_t nodes_expanded = 0;
  double elapsed_seconds = 0.0;
};

std::string to_string(PlanResult::Verdict verdict);

// Greedy best-first search over the grounded problem. Heuristic is the
// unsatisfied-goal count plus the layer-1 landmarks recorded in goal_ladder;
// ties break by insertion order with successors generated in action
// declaration order. Unsolvable is reported only after the reachable space
// is exhausted within the node budget; solvable plans are validated by
// replay before they are returned.
PlanResult solve(const CompiledProblem& problem, std::uint64_t node_budget = kDefaultNodeBudget);

struct PlanCheck {
  bool ok = false;
  int failing_step = -1;  // -1 when ok; plan.size() when the goal fails at the end
  std::string reason;
};

PlanCheck validate_plan(const CompiledProblem& problem, const std::vector<std::string>& plan);

nlohmann::ordered_json plan_result_to_json(const PlanResult& result);

}  // namespace epitask
