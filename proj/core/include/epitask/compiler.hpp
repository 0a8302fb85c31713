#pragma once

#include <optional>
#include <string>
#include <vector>

#include "epitask/digest.hpp"
#include "epitask/task.hpp"
#include "json.hpp"

namespace epitask {

enum class ActionClass { physical, observe, inform, inform_nested };

std::string to_string(ActionClass cls);

struct GroundAction {
  std::string name;
  std::optional<std::string> actor;
  ActionClass cls = ActionClass::physical;
  std::vector<int> pre;  // fluent indices, sorted
  std::vector<int> add;
  std::vector<int> del;
};

struct KnowledgeFluentMeta {
  int fluent = -1;
  int layer = 1;
  std::string holder;
  std::string symbol;           // knows_<holder>_<digest>
  std::string about;            // leaf canonical (layer 1) or inner symbol (layer k)
  std::string leaf_canonical;   // ground fact at the bottom of the chain
};

struct CompiledProblem {
  std::vector<std::string> fluents;  // canonical atoms, declaration order
  std::vector<GroundAction> actions;
  std::vector<int> init;  // sorted
  std::vector<int> goal;  // sorted
  std::vector<KnowledgeFluentMeta> knowledge;
  std::vector<std::pair<int, std::string>> tokens;  // token fluent -> owning agent
  // Layer-1 landmarks under unsatisfied epistemic goal fluents; the planner
  // heuristic counts these alongside the goal conjuncts.
  std::vector<int> goal_ladder;

  int fluent_index(const std::string& atom) const;
  const KnowledgeFluentMeta* knowledge_meta(int fluent) const;
};

CompiledProblem compile(const Task& task);

std::string explain_compilation(const CompiledProblem& problem);

nlohmann::ordered_json compiled_to_json(const CompiledProblem& problem);
CompiledProblem compiled_from_json(const nlohmann::ordered_json& doc);

struct PddlPair {
  std::string domain;
  std::string problem;
};

PddlPair to_pddl(const CompiledProblem& problem);

}  // namespace epitask
