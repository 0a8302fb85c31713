#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "epitask/goal.hpp"
#include "epitask/scene.hpp"
#include "json.hpp"

namespace epitask {

enum class MechanicKind {
  room_restriction,
  limited_bandwidth,
  restricted_communication,
  remote_control,
  state_mirroring,
  inverse_state,
};

enum class RemoteEffect { state, unlocked, closed, locks };
enum class MirrorMode { same, toggled };

std::string to_string(MechanicKind kind);
std::string to_string(RemoteEffect effect);
std::string to_string(MirrorMode mode);

struct MechanicBinding {
  MechanicKind kind = MechanicKind::room_restriction;

  // room_restriction / limited_bandwidth
  std::string agent;
  std::vector<std::string> rooms;  // barred rooms
  int budget = 0;                  // messages

  // restricted_communication: the complete directed graph; absent edges are
  // forbidden channels.
  std::vector<std::pair<std::string, std::string>> edges;

  // remote_control
  std::string trigger;
  std::string target;
  RemoteEffect effect = RemoteEffect::state;

  // state_mirroring
  std::string first;
  std::string second;
  MirrorMode mode = MirrorMode::same;

  // inverse_state
  std::string furniture;
};

enum class TaskCategory { cooperative, mixed };

struct Task {
  Scene scene;
  std::vector<std::string> agents;
  Formula goal;
  std::string description;
  std::vector<MechanicBinding> mechanics;
  std::map<std::string, std::vector<std::string>> secrets;
  TaskCategory category = TaskCategory::cooperative;
  int target_depth = 0;
  int turn_budget = 1;
  std::map<std::string, Formula> private_goals;
  std::vector<std::string> items;       // item vocabulary
  std::vector<Predicate> init_overrides;  // ground predicates true at start

  bool has_agent(const std::string& id) const;
  bool has_item(const std::string& id) const;

  // Rooms barred to the agent via room_restriction bindings.
  std::set<std::string> barred_rooms(const std::string& agent) const;
  bool is_barred(const std::string& agent, const std::string& room) const;

  // Directed communication edges. Complete digraph minus self-loops when no
  // restricted_communication binding is present.
  std::set<std::pair<std::string, std::string>> comm_edges() const;
  bool can_communicate(const std::string& from, const std::string& to) const;

  // Message budget; nullopt = unlimited (no limited_bandwidth binding).
  std::optional<int> message_budget(const std::string& agent) const;

  // Scene-entity ids mentioned verbatim in the agent's secrets.
  std::set<std::string> secret_entities(const std::string& agent) const;
};

struct TaskViolation {
  std::string check;
  std::string entity;
  std::string message;
};

struct TaskReport {
  std::vector<TaskViolation> violations;
  bool ok() const { return violations.empty(); }
};

// scene_override substitutes for the task document's embedded/linked scene;
// base_dir resolves a relative "scene" path.
Task parse_task(const std::string& text, const std::optional<Scene>& scene_override = std::nullopt,
                const std::string& base_dir = ".");
std::string serialize_task(const Task& task);

TaskReport validate_task(const Task& task);

struct DepthGate {
  bool pass = false;
  int measured = 0;
  int target = 0;
};

DepthGate check_depth_gate(const Task& task);

struct AuditFinding {
  std::string node;          // probe-style id of the Know node
  int nesting_level = 1;
  std::string subject;       // the node's agent
  std::string observer;      // one level out (self at the top level)
  std::string outer_agent;   // outermost agent of the node's chain
  std::string fact;          // leaf canonical text
  std::optional<std::string> fact_room;
  bool outer_barred = false;          // criterion (a)
  bool direct_edge_to_observer = false;
  bool direct_edge_to_outer = false;  // criterion (b)
  bool multi_hop = false;
};

struct DepthAudit {
  enum class Verdict { valid, inflated };
  Verdict verdict = Verdict::valid;
  bool multi_hop = false;
  std::vector<AuditFinding> findings;
  std::vector<std::string> issues;  // unlocatable facts, reported not fatal
};

DepthAudit audit_depth_validity(const Task& task);

// Room where a ground fact holds: room arguments win, then the last
// furniture argument with a room, then object/agent locations. nullopt for
// placeless facts (room-less supports, pure item facts).
std::optional<std::string> locate_fact(const Scene& scene, const Predicate& fact);

// --- seed-pool sampling ---------------------------------------------------

struct PoolEntry {
  std::string task_id;
  bool passed = false;
};

struct SampleResult {
  std::vector<std::string> ids;
  std::optional<std::string> shortage;  // set when a stratum ran dry
};

// Draws round-half-up(ratio*count) ids from the failed stratum and the rest
// from the passed stratum, uniformly without replacement; deficits spill
// into the other stratum with a shortage note. Deterministic per seed.
SampleResult sample_seed_tasks(const std::vector<PoolEntry>& pool, double ratio, int count,
                               std::uint64_t seed);

nlohmann::ordered_json task_report_to_json(const TaskReport& report);
std::string task_report_to_jsonl(const TaskReport& report);
nlohmann::ordered_json depth_audit_to_json(const DepthAudit& audit);

}  // namespace epitask
