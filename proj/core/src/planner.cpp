#include "epitask/planner.hpp"

#include <algorithm>
#include <chrono>
#include <queue>
#include <unordered_set>

#include "epitask/errors.hpp"

namespace epitask {

namespace {

using Word = std::uint64_t;

struct State {
  std::vector<Word> bits;

  bool get(int i) const { return (bits[i >> 6] >> (i & 63)) & 1u; }
  void set(int i) { bits[i >> 6] |= Word{1} << (i & 63); }
  void clear(int i) { bits[i >> 6] &= ~(Word{1} << (i & 63)); }

  bool operator==(const State& other) const = default;
};

struct StateHash {
  std::size_t operator()(const State& s) const {
    std::uint64_t h = 14695981039346656037ull;
    for (Word w : s.bits) {
      h ^= w;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

struct Node {
  State state;
  int parent = -1;
  int action = -1;
};

bool applicable(const State& s, const GroundAction& a) {
  for (int p : a.pre) {
    if (!s.get(p)) return false;
  }
  return true;
}

State apply(const State& s, const GroundAction& a) {
  State next = s;
  for (int d : a.del) next.clear(d);
  for (int add : a.add) next.set(add);
  return next;
}

int heuristic(const State& s, const CompiledProblem& problem) {
  int h = 0;
  for (int g : problem.goal) {
    if (!s.get(g)) ++h;
  }
  for (int l : problem.goal_ladder) {
    if (!s.get(l)) ++h;
  }
  return h;
}

void check_problem(const CompiledProblem& problem) {
  const int n = static_cast<int>(problem.fluents.size());
  auto check = [&](const std::vector<int>& v, const std::string& what) {
    for (int idx : v) {
      if (idx < 0 || idx >= n) {
        throw malformed_problem(what + " references out-of-range fluent");
      }
    }
  };
  check(problem.init, "init");
  check(problem.goal, "goal");
  check(problem.goal_ladder, "goal_ladder");
  for (const auto& a : problem.actions) {
    check(a.pre, a.name);
    check(a.add, a.name);
    check(a.del, a.name);
  }
}

}  // namespace

std::string to_string(PlanResult::Verdict verdict) {
  switch (verdict) {
    case PlanResult::Verdict::solvable: return "solvable";
    case PlanResult::Verdict::unsolvable: return "unsolvable";
    case PlanResult::Verdict::budget_exhausted: return "budget_exhausted";
  }
  return "?";
}

PlanResult solve(const CompiledProblem& problem, std::uint64_t node_budget) {
  check_problem(problem);
  auto start = std::chrono::steady_clock::now();
  auto finish = [&](PlanResult result) {
    result.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  };

  const std::size_t words = (problem.fluents.size() + 63) / 64;
  State init;
  init.bits.assign(std::max<std::size_t>(words, 1), 0);
  for (int i : problem.init) init.set(i);

  std::vector<Node> nodes;
  nodes.push_back({init, -1, -1});
  std::unordered_set<State, StateHash> seen{init};

  struct Entry {
    int h;
    std::uint64_t counter;
    int node;
    bool operator>(const Entry& other) const {
      return std::tie(h, counter) > std::tie(other.h, other.counter);
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> frontier;
  std::uint64_t counter = 0;
  frontier.push({heuristic(init, problem), counter++, 0});

  PlanResult result;

  auto extract_plan = [&](int node_idx) {
    std::vector<std::string> plan;
    for (int at = node_idx; nodes[at].parent >= 0; at = nodes[at].parent) {
      plan.push_back(problem.actions[nodes[at].action].name);
    }
    std::reverse(plan.begin(), plan.end());
    return plan;
  };

  while (!frontier.empty()) {
    Entry entry = frontier.top();
    frontier.pop();

    bool goal_met = true;
    for (int g : problem.goal) {
      if (!nodes[entry.node].state.get(g)) goal_met = false;
    }
    if (goal_met) {
      result.verdict = PlanResult::Verdict::solvable;
      result.plan = extract_plan(entry.node);
      PlanCheck check = validate_plan(problem, result.plan);
      if (!check.ok) {
        throw malformed_problem("internal: extracted plan fails replay at step " +
                                std::to_string(check.failing_step) + " (" + check.reason + ")");
      }
      return finish(result);
    }

    if (result.nodes_expanded >= node_budget) {
      result.verdict = PlanResult::Verdict::budget_exhausted;
      return finish(result);
    }
    ++result.nodes_expanded;

    const State current = nodes[entry.node].state;  // copy: nodes may reallocate
    for (std::size_t ai = 0; ai < problem.actions.size(); ++ai) {
      const GroundAction& action = problem.actions[ai];
      if (!applicable(current, action)) continue;
      State next = apply(current, action);
      if (!seen.insert(next).second) continue;
      nodes.push_back({std::move(next), entry.node, static_cast<int>(ai)});
      frontier.push({heuristic(nodes.back().state, problem), counter++,
                     static_cast<int>(nodes.size() - 1)});
    }
  }

  result.verdict = PlanResult::Verdict::unsolvable;
  return finish(result);
}

PlanCheck validate_plan(const CompiledProblem& problem, const std::vector<std::string>& plan) {
  check_problem(problem);
  const std::size_t words = (problem.fluents.size() + 63) / 64;
  State state;
  state.bits.assign(std::max<std::size_t>(words, 1), 0);
  for (int i : problem.init) state.set(i);

  for (std::size_t step = 0; step < plan.size(); ++step) {
    const GroundAction* action = nullptr;
    for (const auto& a : problem.actions) {
      if (a.name == plan[step]) {
        action = &a;
        break;
      }
    }
    if (action == nullptr) throw unknown_action("\"" + plan[step] + "\" is not declared");
    for (int p : action->pre) {
      if (!state.get(p)) {
        return {false, static_cast<int>(step),
                "precondition " + problem.fluents[p] + " of " + action->name + " does not hold"};
      }
    }
    state = apply(state, *action);
  }
  for (int g : problem.goal) {
    if (!state.get(g)) {
      return {false, static_cast<int>(plan.size()),
              "goal fluent " + problem.fluents[g] + " unsatisfied after replay"};
    }
  }
  return {true, -1, ""};
}

nlohmann::ordered_json plan_result_to_json(const PlanResult& result) {
  nlohmann::ordered_json out;
  out["verdict"] = to_string(result.verdict);
  out["plan"] = result.plan;
  out["nodes_expanded"] = result.nodes_expanded;
  out["elapsed_seconds"] = result.elapsed_seconds;
  return out;
}

}  // namespace epitask
