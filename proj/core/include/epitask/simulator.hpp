#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "epitask/task.hpp"
#include "json.hpp"

namespace epitask {

struct Placement {
  enum class Kind { on, in, held, floor };
  Kind kind = Kind::floor;
  std::string target;  // furniture, agent, or room

  bool operator==(const Placement&) const = default;
};

struct WorldState {
  std::map<std::string, Placement> placements;  // per object
  std::set<std::string> open_furniture;
  std::set<std::string> locked_furniture;
  std::set<std::string> powered_on;
  std::set<std::string> clean_objects;
  std::set<std::string> dirty_objects;
  std::set<std::string> filled_objects;
  std::set<std::string> empty_objects;
  std::map<std::string, std::string> agent_rooms;
  std::map<std::string, std::map<std::string, int>> item_counts;     // agent -> item -> n
  std::map<std::string, std::set<std::string>> container_items;     // furniture -> items
  std::map<std::string, std::optional<int>> budgets;  // nullopt = unlimited
  int turn = 0;

  std::optional<std::string> room_of_object(const std::string& object) const;
  std::optional<std::string> held_object(const std::string& agent) const;
};

struct LedgerEntry {
  // Agents the claim is nested through, outermost first; empty = the holder
  // knows the fact directly. Layer = chain.size() + 1.
  std::vector<std::string> chain;
  Predicate fact;
  bool polarity = true;
  int turn = 0;
  enum class Source { observation, message, secret };
  Source source = Source::observation;
};

struct KnowledgeLedger {
  std::vector<LedgerEntry> entries;

  // Latest belief about the fact: true, false (complement or negative entry),
  // or unknown. Only direct (empty-chain) entries count.
  std::optional<bool> query(const Predicate& fact) const;
  std::size_t size() const { return entries.size(); }
};

struct Assertion {
  std::vector<std::string> knows_chain;  // empty = plain fact
  Predicate fact;
  bool holds = true;
};

struct AgentAction {
  enum class Kind { navigate, open, close, pick, place, send_message, find_object, wait, done };

  std::string actor;
  Kind kind = Kind::wait;
  std::string target;     // navigate: room or furniture
  std::string furniture;  // open/close/place
  std::string object;     // pick/place/find_object
  std::string relation;   // place: "on" | "in"
  std::string recipient;  // send_message: agent id or "all"
  std::vector<Assertion> assertions;
  std::string text;
};

std::string to_string(AgentAction::Kind kind);

struct StepRecord {
  int turn = 0;
  std::string actor;
  nlohmann::ordered_json action;
  bool ok = true;
  std::string rejection;                     // rule name when rejected
  std::vector<std::string> world_delta;      // "+(fact)" / "-(fact)"
  std::map<std::string, std::vector<LedgerEntry>> ledger_delta;
  std::optional<std::string> find_result;
};

enum class ProbeOutcome { correct, incorrect, unanswered };
std::string to_string(ProbeOutcome outcome);

struct EpisodeResult {
  bool functional_success = false;
  bool empty_projection = false;  // warning: all-epistemic goal, vacuous pass
  std::map<std::string, ProbeOutcome> probe_scores;
  std::string transcript;  // JSON lines
  int turns_used = 0;
  std::map<std::string, int> messages_used;
  enum class Termination { all_done, turn_budget, error };
  Termination termination = Termination::all_done;
};

std::string to_string(EpisodeResult::Termination t);

// Turn-based symbolic episode over a validated task. Respects round-robin
// order by agent index; rule violations are recorded rejections.
class Episode {
 public:
  explicit Episode(const Task& task);  // init_episode

  const WorldState& world() const { return world_; }
  const KnowledgeLedger& ledger(const std::string& agent) const;
  const Task& task() const { return task_; }

  bool finished() const;
  bool all_done() const;
  const std::string& expected_actor() const;

  StepRecord step(const AgentAction& action);

 private:
  void observe_room(const std::string& agent, const std::string& room, StepRecord& record);
  void broadcast_change(const std::vector<std::pair<Predicate, bool>>& delta,
                        const std::optional<std::string>& room, StepRecord& record);
  void add_entry(const std::string& agent, LedgerEntry entry, StepRecord& record);
  void apply_open_state(const std::string& furniture, bool open, bool verb_is_open,
                        StepRecord& record);
  void advance_round_robin();

  Task task_;
  WorldState world_;
  std::map<std::string, KnowledgeLedger> ledgers_;
  std::set<std::string> done_;
  std::size_t next_agent_ = 0;
};

struct FunctionalVerdict {
  bool success = false;
  bool empty_projection = false;
};

FunctionalVerdict judge_functional(const Task& task, const WorldState& world);
bool eval_predicate(const Task& task, const WorldState& world, const Predicate& pred);

// answers: {"agent_0": {"answers": [{"probe_id", "predicate", "holds", "args"}]}}
std::map<std::string, ProbeOutcome> score_probes(
    const Task& task, const std::map<std::string, KnowledgeLedger>& ledgers,
    const nlohmann::ordered_json& answers);

std::map<std::string, std::vector<AgentAction>> parse_scripts(const std::string& jsonl);
AgentAction parse_action(const nlohmann::ordered_json& doc);
nlohmann::ordered_json action_to_json(const AgentAction& action);
nlohmann::ordered_json step_record_to_json(const StepRecord& record);
StepRecord step_record_from_json(const nlohmann::ordered_json& doc);

EpisodeResult run_episode(const Task& task,
                          const std::map<std::string, std::vector<AgentAction>>& scripts,
                          const nlohmann::ordered_json& answers);

nlohmann::ordered_json episode_result_to_json(const EpisodeResult& result);

}  // namespace epitask
