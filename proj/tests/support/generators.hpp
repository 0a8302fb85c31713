#pragma once

#include <random>
#include <string>
#include <vector>

#include "epitask/simulator.hpp"
#include "epitask/task.hpp"

namespace testsupport {

using Rng = std::mt19937_64;

inline int pick(Rng& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

template <typename T>
const T& choice(Rng& rng, const std::vector<T>& from) {
  return from[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(from.size()) - 1))];
}

// --- random goal formulas ---------------------------------------------------

struct FormulaPool {
  std::vector<std::string> agents{"agent_0", "agent_1", "agent_2"};
  std::vector<std::string> objects{"mug_1", "plate_2"};
  std::vector<std::string> furniture{"shelf_3", "cabinet_1"};
  std::vector<std::string> rooms{"room_a", "room_b"};
};

inline epitask::Predicate random_leaf(Rng& rng, const FormulaPool& pool) {
  using epitask::EntityKind;
  epitask::Predicate p;
  switch (pick(rng, 0, 4)) {
    case 0:
      p.name = "is_on_top";
      p.args = {{EntityKind::object, choice(rng, pool.objects)},
                {EntityKind::furniture, choice(rng, pool.furniture)}};
      break;
    case 1:
      p.name = "is_open";
      p.args = {{EntityKind::furniture, choice(rng, pool.furniture)}};
      break;
    case 2:
      p.name = "is_clean";
      p.args = {{EntityKind::object, choice(rng, pool.objects)}};
      break;
    case 3:
      p.name = "agent_in_room";
      p.args = {{EntityKind::agent, choice(rng, pool.agents)},
                {EntityKind::room, choice(rng, pool.rooms)}};
      break;
    default:
      p.name = "is_held_by";
      p.args = {{EntityKind::object, choice(rng, pool.objects)},
                {EntityKind::agent, choice(rng, pool.agents)}};
      break;
  }
  return p;
}

inline epitask::Formula random_formula(Rng& rng, const FormulaPool& pool, int max_depth) {
  using epitask::Formula;
  if (max_depth <= 0 || pick(rng, 0, 3) == 0) {
    return Formula::make_predicate(random_leaf(rng, pool));
  }
  if (pick(rng, 0, 1) == 0) {
    int n = pick(rng, 2, 3);
    std::vector<Formula> children;
    for (int i = 0; i < n; ++i) children.push_back(random_formula(rng, pool, max_depth - 1));
    return Formula::make_and(std::move(children));
  }
  return Formula::make_know(choice(rng, pool.agents), random_formula(rng, pool, max_depth - 1));
}

// Independent K-depth oracle: enumerate root-to-leaf paths, count Know nodes
// per path, take the maximum. Deliberately not the recursive formula.
inline int brute_force_k_depth(const epitask::Formula& f) {
  using epitask::Formula;
  struct Item {
    const Formula* node;
    int knows;
  };
  std::vector<Item> stack{{&f, 0}};
  int best = 0;
  while (!stack.empty()) {
    Item item = stack.back();
    stack.pop_back();
    switch (item.node->kind) {
      case Formula::Kind::predicate:
        best = std::max(best, item.knows);
        break;
      case Formula::Kind::conjunction:
        for (const auto& child : item.node->children) stack.push_back({&child, item.knows});
        break;
      case Formula::Kind::know:
        stack.push_back({&item.node->know_body(), item.knows + 1});
        break;
    }
  }
  return best;
}

inline int count_know_nodes(const epitask::Formula& f) {
  using epitask::Formula;
  switch (f.kind) {
    case Formula::Kind::predicate:
      return 0;
    case Formula::Kind::conjunction: {
      int n = 0;
      for (const auto& child : f.children) n += count_know_nodes(child);
      return n;
    }
    case Formula::Kind::know:
      return 1 + count_know_nodes(f.know_body());
  }
  return 0;
}

// --- random scenes ------------------------------------------------------------

inline epitask::Scene random_scene(Rng& rng) {
  epitask::Scene scene;
  scene.scene_id = "scene_" + std::to_string(pick(rng, 100, 999));
  scene.episode_id = std::to_string(pick(rng, 1, 99));
  int rooms = pick(rng, 2, 4);
  for (int r = 0; r < rooms; ++r) scene.rooms.push_back("room_" + std::to_string(r));
  int furniture = pick(rng, 2, 5);
  for (int f = 0; f < furniture; ++f) {
    std::string id = "furniture_" + std::to_string(f);
    scene.furniture.push_back(id);
    if (pick(rng, 0, 1) == 0) scene.articulated_furniture.push_back(id);
  }
  for (const auto& room : scene.rooms) scene.furniture_in_rooms.emplace_back(room, std::vector<std::string>{});
  for (int f = 0; f < furniture; ++f) {
    auto& [room, list] = scene.furniture_in_rooms[static_cast<std::size_t>(
        pick(rng, 0, rooms - 1))];
    list.push_back("furniture_" + std::to_string(f));
  }
  int objects = pick(rng, 1, 3);
  for (int o = 0; o < objects; ++o) {
    std::string id = "object_" + std::to_string(o);
    scene.objects.push_back(id);
  }
  for (int o = 0; o < objects; ++o) {
    std::string furn = "furniture_" + std::to_string(pick(rng, 0, furniture - 1));
    bool attached = false;
    for (auto& [f, list] : scene.objects_on_furniture) {
      if (f == furn) {
        list.push_back("object_" + std::to_string(o));
        attached = true;
      }
    }
    if (!attached) {
      scene.objects_on_furniture.emplace_back(furn,
                                              std::vector<std::string>{"object_" + std::to_string(o)});
    }
  }
  int agents = pick(rng, 1, 3);
  for (int a = 0; a < agents; ++a) {
    epitask::AgentSpawn spawn;
    spawn.position = {static_cast<double>(pick(rng, 0, 9)), 0.0,
                      static_cast<double>(pick(rng, 0, 9))};
    spawn.room = scene.rooms[static_cast<std::size_t>(pick(rng, 0, rooms - 1))];
    scene.agent_spawns.emplace_back("agent_" + std::to_string(a), spawn);
  }
  return scene;
}

// --- random small tasks (always pass validation and the depth gate) -----------

inline epitask::Task random_task(Rng& rng) {
  using namespace epitask;
  Task task;

  Scene scene;
  scene.scene_id = "prop";
  scene.episode_id = "1";
  scene.rooms = {"room_a", "room_b"};
  scene.furniture = {"cabinet_1", "shelf_3"};
  scene.objects = {"mug_1"};
  scene.articulated_furniture = {"cabinet_1"};
  scene.furniture_in_rooms = {{"room_a", {"cabinet_1"}}, {"room_b", {"shelf_3"}}};
  scene.objects_on_furniture = {{"shelf_3", {"mug_1"}}};
  AgentSpawn s0{{0, 0, 0}, pick(rng, 0, 1) ? "room_a" : "room_b"};
  AgentSpawn s1{{1, 0, 1}, pick(rng, 0, 1) ? "room_a" : "room_b"};
  scene.agent_spawns = {{"agent_0", s0}, {"agent_1", s1}};
  task.scene = scene;
  task.agents = {"agent_0", "agent_1"};
  task.description = "generated";
  task.category = TaskCategory::cooperative;
  task.turn_budget = pick(rng, 6, 14);

  std::vector<std::string> leaves = {"(is_on_top mug_1 cabinet_1)", "(is_on_top mug_1 shelf_3)",
                                     "(is_open cabinet_1)"};
  std::string leaf = choice(rng, leaves);
  std::string goal_text;
  switch (pick(rng, 0, 3)) {
    case 0:
      goal_text = leaf;
      break;
    case 1:
      goal_text = "(K agent_" + std::to_string(pick(rng, 0, 1)) + " " + leaf + ")";
      break;
    case 2:
      goal_text = "(K agent_0 (K agent_1 " + leaf + "))";
      break;
    default:
      goal_text = "(and (is_open cabinet_1) (K agent_0 (K agent_1 " + leaf + ")))";
      break;
  }
  task.goal = parse_goal(goal_text);
  task.target_depth = k_depth(task.goal);

  // Bandwidth for both agents keeps the compiled token set bounded.
  for (const auto& agent : task.agents) {
    if (pick(rng, 0, 3) > 0) {
      MechanicBinding m;
      m.kind = MechanicKind::limited_bandwidth;
      m.agent = agent;
      m.budget = pick(rng, 0, 2);
      task.mechanics.push_back(m);
    }
  }
  if (pick(rng, 0, 1) == 0) {
    MechanicBinding m;
    m.kind = MechanicKind::room_restriction;
    m.agent = choice(rng, task.agents);
    m.rooms = {pick(rng, 0, 1) ? "room_a" : "room_b"};
    // never bar an agent from its own spawn room
    if (task.scene.spawn_room(m.agent) != m.rooms[0]) task.mechanics.push_back(m);
  }
  if (pick(rng, 0, 2) == 0) {
    MechanicBinding m;
    m.kind = MechanicKind::restricted_communication;
    m.edges = {{"agent_0", "agent_1"}};
    if (pick(rng, 0, 1)) m.edges.push_back({"agent_1", "agent_0"});
    task.mechanics.push_back(m);
  }
  if (pick(rng, 0, 3) == 0) {
    MechanicBinding m;
    m.kind = MechanicKind::state_mirroring;
    m.first = "cabinet_1";
    m.second = "shelf_3";
    m.mode = pick(rng, 0, 1) ? MirrorMode::same : MirrorMode::toggled;
    task.mechanics.push_back(m);
  }
  if (pick(rng, 0, 3) == 0) {
    MechanicBinding m;
    m.kind = MechanicKind::inverse_state;
    m.furniture = "cabinet_1";
    task.mechanics.push_back(m);
  }
  return task;
}

// --- random scripted actions ----------------------------------------------------

inline epitask::AgentAction random_action(Rng& rng, const epitask::Task& task,
                                          const std::string& actor) {
  using epitask::AgentAction;
  using epitask::Assertion;
  AgentAction action;
  action.actor = actor;
  switch (pick(rng, 0, 6)) {
    case 0:
      action.kind = AgentAction::Kind::navigate;
      action.target = choice(rng, task.scene.rooms);
      break;
    case 1:
      action.kind = AgentAction::Kind::open;
      action.furniture = choice(rng, task.scene.furniture);
      break;
    case 2:
      action.kind = AgentAction::Kind::close;
      action.furniture = choice(rng, task.scene.furniture);
      break;
    case 3:
      action.kind = AgentAction::Kind::pick;
      action.object = choice(rng, task.scene.objects);
      break;
    case 4:
      action.kind = AgentAction::Kind::place;
      action.object = choice(rng, task.scene.objects);
      action.relation = pick(rng, 0, 1) ? "on" : "in";
      action.furniture = choice(rng, task.scene.furniture);
      break;
    case 5: {
      action.kind = AgentAction::Kind::send_message;
      action.recipient = pick(rng, 0, 2) == 0 ? "all" : choice(rng, task.agents);
      if (action.recipient == actor) action.recipient = "all";
      Assertion assertion;
      assertion.fact = epitask::parse_ground_predicate(
          pick(rng, 0, 1) ? "(is_open cabinet_1)" : "(is_on_top mug_1 shelf_3)");
      assertion.holds = pick(rng, 0, 1) == 1;
      if (pick(rng, 0, 2) == 0) assertion.knows_chain = {actor};
      action.assertions.push_back(assertion);
      break;
    }
    default:
      action.kind = AgentAction::Kind::wait;
      break;
  }
  return action;
}

}  // namespace testsupport
