#include "epitask/task.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "epitask/errors.hpp"

namespace epitask {

namespace {

using ojson = nlohmann::ordered_json;

std::optional<MechanicKind> mechanic_kind_from(const std::string& s) {
  if (s == "room_restriction") return MechanicKind::room_restriction;
  if (s == "limited_bandwidth") return MechanicKind::limited_bandwidth;
  if (s == "restricted_communication") return MechanicKind::restricted_communication;
  if (s == "remote_control") return MechanicKind::remote_control;
  if (s == "state_mirroring") return MechanicKind::state_mirroring;
  if (s == "inverse_state") return MechanicKind::inverse_state;
  return std::nullopt;
}

std::optional<RemoteEffect> remote_effect_from(const std::string& s) {
  if (s == "state") return RemoteEffect::state;
  if (s == "unlocked") return RemoteEffect::unlocked;
  if (s == "closed") return RemoteEffect::closed;
  if (s == "locks") return RemoteEffect::locks;
  return std::nullopt;
}

std::string get_string(const ojson& j, const std::string& key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw schema_violation(ctx + " lacks \"" + key + "\"");
  if (!it->is_string()) throw schema_violation(ctx + "." + key + " must be a string");
  return it->get<std::string>();
}

// Tokens shaped like scene ids: word characters ending in _<digits>.
std::vector<std::string> entity_shaped_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = i;
      while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
        ++i;
      }
      std::string token = text.substr(start, i - start);
      auto underscore = token.rfind('_');
      if (underscore != std::string::npos && underscore + 1 < token.size()) {
        bool digits = true;
        for (std::size_t k = underscore + 1; k < token.size(); ++k) {
          if (!std::isdigit(static_cast<unsigned char>(token[k]))) digits = false;
        }
        if (digits) out.push_back(token);
      }
    } else {
      ++i;
    }
  }
  return out;
}

bool resolves_in(const Task& task, const EntityRef& ref) {
  switch (ref.kind) {
    case EntityKind::room: return task.scene.has_room(ref.id);
    case EntityKind::furniture: return task.scene.has_furniture(ref.id);
    case EntityKind::object: return task.scene.has_object(ref.id);
    case EntityKind::agent: return task.has_agent(ref.id);
    case EntityKind::item: return task.has_item(ref.id);
  }
  return false;
}

void check_formula_entities(const Task& task, const Formula& f, const std::string& where,
                            std::vector<TaskViolation>& out) {
  switch (f.kind) {
    case Formula::Kind::predicate: {
      for (const auto& arg : f.pred.args) {
        if (!resolves_in(task, arg)) {
          out.push_back({"goal_entity_resolves", arg.id,
                         where + ": " + to_string(arg.kind) + " \"" + arg.id +
                             "\" in " + f.pred.canonical() + " does not resolve"});
        }
      }
      if (f.pred.name == "is_open" || f.pred.name == "is_closed") {
        const std::string& furn = f.pred.args.front().id;
        if (task.scene.has_furniture(furn) && !task.scene.is_articulated(furn)) {
          out.push_back({"articulated_only", furn,
                         where + ": \"" + furn + "\" is not articulated and cannot appear in " +
                             f.pred.name + " goals"});
        }
      }
      const PredicateSig* sig = find_predicate(f.pred.name);
      if (sig != nullptr && sig->cls == PredicateClass::mechanic_init_only) {
        out.push_back({"init_only_in_goal", f.pred.name,
                       where + ": init-only predicate " + f.pred.name + " in goal"});
      }
      return;
    }
    case Formula::Kind::conjunction:
      for (const auto& child : f.children) check_formula_entities(task, child, where, out);
      return;
    case Formula::Kind::know: {
      if (!task.has_agent(f.agent)) {
        out.push_back({"goal_entity_resolves", f.agent,
                       where + ": K-operator agent \"" + f.agent + "\" is not a task agent"});
      }
      check_formula_entities(task, f.know_body(), where, out);
      return;
    }
  }
}

struct KnowChainNode {
  std::string node_id;
  int nesting_level = 1;
  std::string subject;
  std::string observer;
  std::string outer_agent;
  Predicate fact;
};

void collect_chain_nodes(const Formula& f, int level, std::vector<std::string>& agents_above,
                         std::vector<KnowChainNode>& out) {
  switch (f.kind) {
    case Formula::Kind::predicate:
      return;
    case Formula::Kind::conjunction:
      for (const auto& child : f.children) collect_chain_nodes(child, level, agents_above, out);
      return;
    case Formula::Kind::know: {
      KnowChainNode node;
      node.node_id = "k_probe_" + std::to_string(out.size() + 1);
      node.nesting_level = level;
      node.subject = f.agent;
      node.observer = agents_above.empty() ? f.agent : agents_above.back();
      node.outer_agent = agents_above.empty() ? f.agent : agents_above.front();
      node.fact = collect_leaves(f.know_body()).front();
      out.push_back(node);
      agents_above.push_back(f.agent);
      collect_chain_nodes(f.know_body(), level + 1, agents_above, out);
      agents_above.pop_back();
      return;
    }
  }
}

}  // namespace

std::optional<std::string> locate_fact(const Scene& scene, const Predicate& fact) {
  for (const auto& arg : fact.args) {
    if (arg.kind == EntityKind::room && scene.has_room(arg.id)) return arg.id;
  }
  for (auto it = fact.args.rbegin(); it != fact.args.rend(); ++it) {
    if (it->kind == EntityKind::furniture && scene.has_furniture(it->id)) {
      if (auto room = scene.room_of_furniture(it->id)) return room;
    }
  }
  for (auto it = fact.args.rbegin(); it != fact.args.rend(); ++it) {
    if (it->kind == EntityKind::object && scene.has_object(it->id)) {
      if (auto room = room_of(scene, *it)) return room;
    }
    if (it->kind == EntityKind::agent && scene.has_agent(it->id)) {
      if (auto room = scene.spawn_room(it->id)) return room;
    }
  }
  return std::nullopt;
}

std::string to_string(MechanicKind kind) {
  switch (kind) {
    case MechanicKind::room_restriction: return "room_restriction";
    case MechanicKind::limited_bandwidth: return "limited_bandwidth";
    case MechanicKind::restricted_communication: return "restricted_communication";
    case MechanicKind::remote_control: return "remote_control";
    case MechanicKind::state_mirroring: return "state_mirroring";
    case MechanicKind::inverse_state: return "inverse_state";
  }
  return "?";
}

std::string to_string(RemoteEffect effect) {
  switch (effect) {
    case RemoteEffect::state: return "state";
    case RemoteEffect::unlocked: return "unlocked";
    case RemoteEffect::closed: return "closed";
    case RemoteEffect::locks: return "locks";
  }
  return "?";
}

std::string to_string(MirrorMode mode) {
  return mode == MirrorMode::same ? "same" : "toggled";
}

bool Task::has_agent(const std::string& id) const {
  return std::find(agents.begin(), agents.end(), id) != agents.end();
}

bool Task::has_item(const std::string& id) const {
  return std::find(items.begin(), items.end(), id) != items.end();
}

std::set<std::string> Task::barred_rooms(const std::string& agent) const {
  std::set<std::string> out;
  for (const auto& m : mechanics) {
    if (m.kind == MechanicKind::room_restriction && m.agent == agent) {
      out.insert(m.rooms.begin(), m.rooms.end());
    }
  }
  return out;
}

bool Task::is_barred(const std::string& agent, const std::string& room) const {
  return barred_rooms(agent).count(room) > 0;
}

std::set<std::pair<std::string, std::string>> Task::comm_edges() const {
  std::set<std::pair<std::string, std::string>> out;
  bool restricted = false;
  for (const auto& m : mechanics) {
    if (m.kind == MechanicKind::restricted_communication) {
      restricted = true;
      for (const auto& e : m.edges) out.insert(e);
    }
  }
  if (!restricted) {
    for (const auto& a : agents) {
      for (const auto& b : agents) {
        if (a != b) out.insert({a, b});
      }
    }
  }
  return out;
}

bool Task::can_communicate(const std::string& from, const std::string& to) const {
  return comm_edges().count({from, to}) > 0;
}

std::optional<int> Task::message_budget(const std::string& agent) const {
  for (const auto& m : mechanics) {
    if (m.kind == MechanicKind::limited_bandwidth && m.agent == agent) return m.budget;
  }
  return std::nullopt;
}

std::set<std::string> Task::secret_entities(const std::string& agent) const {
  std::set<std::string> out;
  auto it = secrets.find(agent);
  if (it == secrets.end()) return out;
  for (const auto& secret : it->second) {
    for (const auto& token : entity_shaped_tokens(secret)) {
      if (scene.has_room(token) || scene.has_furniture(token) || scene.has_object(token) ||
          has_agent(token) || has_item(token)) {
        out.insert(token);
      }
    }
  }
  return out;
}

Task parse_task(const std::string& text, const std::optional<Scene>& scene_override,
                const std::string& base_dir) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw malformed_document(e.what());
  }
  if (!doc.is_object()) throw malformed_document("task document must be a JSON object");

  Task task;

  if (scene_override) {
    task.scene = *scene_override;
  } else {
    auto scene_it = doc.find("scene");
    if (scene_it == doc.end()) {
      throw schema_violation("task lacks \"scene\" and no external scene was supplied");
    }
    if (scene_it->is_string()) {
      std::string path = scene_it->get<std::string>();
      if (!path.empty() && path.front() != '/') path = base_dir + "/" + path;
      std::ifstream in(path);
      if (!in) throw malformed_document("cannot open scene file \"" + path + "\"");
      std::stringstream buffer;
      buffer << in.rdbuf();
      task.scene = parse_scene(buffer.str());
    } else if (scene_it->is_object()) {
      task.scene = parse_scene(scene_it->dump());
    } else {
      throw schema_violation("\"scene\" must be a path or an inline scene object");
    }
  }

  task.description = get_string(doc, "task", "task document");

  auto agents_it = doc.find("agents");
  if (agents_it == doc.end() || !agents_it->is_array()) {
    throw schema_violation("task lacks an \"agents\" array");
  }
  for (const auto& a : *agents_it) {
    if (!a.is_string()) throw schema_violation("agents must be strings");
    task.agents.push_back(a.get<std::string>());
  }

  task.goal = parse_goal(get_string(doc, "pddl_goal", "task document"));

  if (auto it = doc.find("agent_secrets"); it != doc.end()) {
    if (!it->is_object()) throw schema_violation("agent_secrets must be an object");
    for (const auto& [agent, list] : it->items()) {
      std::vector<std::string> secrets;
      if (!list.is_array()) throw schema_violation("agent_secrets." + agent + " must be an array");
      for (const auto& s : list) {
        if (!s.is_string()) throw schema_violation("secrets must be strings");
        secrets.push_back(s.get<std::string>());
      }
      task.secrets[agent] = std::move(secrets);
    }
  }

  if (auto it = doc.find("mechanics"); it != doc.end()) {
    if (!it->is_array()) throw schema_violation("mechanics must be an array");
    for (const auto& m : *it) {
      if (!m.is_object()) throw schema_violation("mechanic bindings must be objects");
      MechanicBinding binding;
      auto kind = mechanic_kind_from(get_string(m, "kind", "mechanic"));
      if (!kind) throw schema_violation("unknown mechanic kind");
      binding.kind = *kind;
      switch (binding.kind) {
        case MechanicKind::room_restriction: {
          binding.agent = get_string(m, "agent", "room_restriction");
          auto rooms = m.find("rooms");
          if (rooms == m.end() || !rooms->is_array()) {
            throw schema_violation("room_restriction lacks \"rooms\"");
          }
          for (const auto& r : *rooms) binding.rooms.push_back(r.get<std::string>());
          break;
        }
        case MechanicKind::limited_bandwidth: {
          binding.agent = get_string(m, "agent", "limited_bandwidth");
          auto budget = m.find("budget");
          if (budget == m.end() || !budget->is_number_integer()) {
            throw schema_violation("limited_bandwidth lacks integer \"budget\"");
          }
          binding.budget = budget->get<int>();
          break;
        }
        case MechanicKind::restricted_communication: {
          auto edges = m.find("edges");
          if (edges == m.end() || !edges->is_array()) {
            throw schema_violation("restricted_communication lacks \"edges\"");
          }
          for (const auto& e : *edges) {
            if (!e.is_array() || e.size() != 2) {
              throw schema_violation("edges must be [from, to] pairs");
            }
            binding.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
          }
          break;
        }
        case MechanicKind::remote_control: {
          binding.trigger = get_string(m, "trigger", "remote_control");
          binding.target = get_string(m, "target", "remote_control");
          auto effect = remote_effect_from(get_string(m, "effect", "remote_control"));
          if (!effect) throw schema_violation("unknown remote_control effect");
          binding.effect = *effect;
          break;
        }
        case MechanicKind::state_mirroring: {
          binding.first = get_string(m, "first", "state_mirroring");
          binding.second = get_string(m, "second", "state_mirroring");
          std::string mode = get_string(m, "mode", "state_mirroring");
          if (mode == "same") {
            binding.mode = MirrorMode::same;
          } else if (mode == "toggled") {
            binding.mode = MirrorMode::toggled;
          } else {
            throw schema_violation("state_mirroring mode must be same or toggled");
          }
          break;
        }
        case MechanicKind::inverse_state:
          binding.furniture = get_string(m, "furniture", "inverse_state");
          break;
      }
      task.mechanics.push_back(std::move(binding));
    }
  }

  std::string category = get_string(doc, "category", "task document");
  if (category == "cooperative") {
    task.category = TaskCategory::cooperative;
  } else if (category == "mixed") {
    task.category = TaskCategory::mixed;
  } else {
    throw schema_violation("category must be \"cooperative\" or \"mixed\"");
  }

  auto depth = doc.find("target_depth");
  if (depth == doc.end() || !depth->is_number_integer()) {
    throw schema_violation("task lacks integer \"target_depth\"");
  }
  task.target_depth = depth->get<int>();

  auto turns = doc.find("turn_budget");
  if (turns == doc.end() || !turns->is_number_integer() || turns->get<int>() < 1) {
    throw schema_violation("task lacks positive integer \"turn_budget\"");
  }
  task.turn_budget = turns->get<int>();

  if (auto it = doc.find("private_goals"); it != doc.end()) {
    if (!it->is_object()) throw schema_violation("private_goals must be an object");
    for (const auto& [agent, text_goal] : it->items()) {
      if (!text_goal.is_string()) throw schema_violation("private goals must be goal strings");
      task.private_goals[agent] = parse_goal(text_goal.get<std::string>());
    }
  }

  if (auto it = doc.find("items"); it != doc.end()) {
    if (!it->is_array()) throw schema_violation("items must be an array");
    for (const auto& i : *it) task.items.push_back(i.get<std::string>());
  }

  if (auto it = doc.find("init"); it != doc.end()) {
    if (!it->is_array()) throw schema_violation("init must be an array of ground predicates");
    for (const auto& entry : *it) {
      if (!entry.is_string()) throw schema_violation("init entries must be predicate strings");
      task.init_overrides.push_back(parse_ground_predicate(entry.get<std::string>()));
    }
  }

  return task;
}

std::string serialize_task(const Task& task) {
  ojson doc;
  doc["task"] = task.description;
  doc["scene"] = ojson::parse(serialize_scene(task.scene));
  ojson agents = ojson::array();
  for (const auto& a : task.agents) agents.push_back(a);
  doc["agents"] = agents;
  doc["pddl_goal"] = print_goal(task.goal);
  ojson secrets = ojson::object();
  for (const auto& [agent, list] : task.secrets) secrets[agent] = list;
  doc["agent_secrets"] = secrets;
  ojson mechanics = ojson::array();
  for (const auto& m : task.mechanics) {
    ojson j;
    j["kind"] = to_string(m.kind);
    switch (m.kind) {
      case MechanicKind::room_restriction:
        j["agent"] = m.agent;
        j["rooms"] = m.rooms;
        break;
      case MechanicKind::limited_bandwidth:
        j["agent"] = m.agent;
        j["budget"] = m.budget;
        break;
      case MechanicKind::restricted_communication: {
        ojson edges = ojson::array();
        for (const auto& [from, to] : m.edges) edges.push_back(ojson::array({from, to}));
        j["edges"] = edges;
        break;
      }
      case MechanicKind::remote_control:
        j["trigger"] = m.trigger;
        j["target"] = m.target;
        j["effect"] = to_string(m.effect);
        break;
      case MechanicKind::state_mirroring:
        j["first"] = m.first;
        j["second"] = m.second;
        j["mode"] = to_string(m.mode);
        break;
      case MechanicKind::inverse_state:
        j["furniture"] = m.furniture;
        break;
    }
    mechanics.push_back(j);
  }
  doc["mechanics"] = mechanics;
  doc["category"] = task.category == TaskCategory::cooperative ? "cooperative" : "mixed";
  doc["target_depth"] = task.target_depth;
  doc["turn_budget"] = task.turn_budget;
  ojson private_goals = ojson::object();
  for (const auto& [agent, goal] : task.private_goals) private_goals[agent] = print_goal(goal);
  doc["private_goals"] = private_goals;
  if (!task.items.empty()) doc["items"] = task.items;
  if (!task.init_overrides.empty()) {
    ojson init = ojson::array();
    for (const auto& p : task.init_overrides) init.push_back(p.canonical());
    doc["init"] = init;
  }
  return doc.dump(2) + "\n";
}

TaskReport validate_task(const Task& task) {
  TaskReport report;
  auto& out = report.violations;

  if (task.agents.empty()) {
    out.push_back({"agents_nonempty", "", "task has no agents"});
  }
  for (const auto& agent : task.agents) {
    if (!task.scene.has_agent(agent)) {
      out.push_back({"agent_has_spawn", agent,
                     "agent \"" + agent + "\" has no spawn in the scene"});
    }
  }

  check_formula_entities(task, task.goal, "goal", out);
  for (const auto& [agent, goal] : task.private_goals) {
    if (!task.has_agent(agent)) {
      out.push_back({"private_goal_agent", agent,
                     "private goal owner \"" + agent + "\" is not a task agent"});
    }
    check_formula_entities(task, goal, "private goal of " + agent, out);
  }

  if (task.category == TaskCategory::cooperative && !task.private_goals.empty()) {
    out.push_back({"category_consistent", "",
                   "cooperative tasks must not carry private goals"});
  }
  if (task.category == TaskCategory::mixed && task.private_goals.empty()) {
    out.push_back({"category_consistent", "",
                   "mixed tasks need at least one private goal"});
  }

  for (const auto& [agent, list] : task.secrets) {
    if (!task.has_agent(agent)) {
      out.push_back({"secret_agent_resolves", agent,
                     "secrets key \"" + agent + "\" is not a task agent"});
    }
    for (const auto& secret : list) {
      for (const auto& token : entity_shaped_tokens(secret)) {
        if (!task.scene.has_room(token) && !task.scene.has_furniture(token) &&
            !task.scene.has_object(token) && !task.has_agent(token) && !task.has_item(token)) {
          out.push_back({"secret_dangling_reference", token,
                         "secret of " + agent + " names unknown entity \"" + token + "\""});
        }
      }
    }
  }

  for (const auto& m : task.mechanics) {
    switch (m.kind) {
      case MechanicKind::room_restriction:
        if (!task.has_agent(m.agent)) {
          out.push_back({"mechanic_wellformed", m.agent,
                         "room_restriction names unknown agent \"" + m.agent + "\""});
        }
        for (const auto& room : m.rooms) {
          if (!task.scene.has_room(room)) {
            out.push_back({"mechanic_wellformed", room,
                           "room_restriction names unknown room \"" + room + "\""});
          }
          if (task.scene.spawn_room(m.agent) == room) {
            out.push_back({"mechanic_wellformed", m.agent,
                           "agent \"" + m.agent + "\" spawns in barred room \"" + room + "\""});
          }
        }
        break;
      case MechanicKind::limited_bandwidth:
        if (!task.has_agent(m.agent)) {
          out.push_back({"mechanic_wellformed", m.agent,
                         "limited_bandwidth names unknown agent \"" + m.agent + "\""});
        }
        if (m.budget < 0) {
          out.push_back({"mechanic_wellformed", m.agent, "message budget must be >= 0"});
        }
        break;
      case MechanicKind::restricted_communication:
        for (const auto& [from, to] : m.edges) {
          if (!task.has_agent(from) || !task.has_agent(to)) {
            out.push_back({"mechanic_wellformed", from + "->" + to,
                           "communication edge references unknown agent"});
          }
          if (from == to) {
            out.push_back({"mechanic_wellformed", from, "communication self-loop"});
          }
        }
        break;
      case MechanicKind::remote_control:
        if (!task.scene.has_furniture(m.trigger) || !task.scene.has_furniture(m.target)) {
          out.push_back({"mechanic_wellformed", m.trigger + "->" + m.target,
                         "remote_control references unknown furniture"});
        }
        if (m.trigger == m.target) {
          out.push_back({"mechanic_wellformed", m.trigger,
                         "remote_control trigger equals target"});
        }
        break;
      case MechanicKind::state_mirroring:
        if (!task.scene.has_furniture(m.first) || !task.scene.has_furniture(m.second)) {
          out.push_back({"mechanic_wellformed", m.first + "<->" + m.second,
                         "state_mirroring references unknown furniture"});
        }
        if (m.first == m.second) {
          out.push_back({"mechanic_wellformed", m.first, "state_mirroring pair not distinct"});
        }
        break;
      case MechanicKind::inverse_state:
        if (!task.scene.has_furniture(m.furniture)) {
          out.push_back({"mechanic_wellformed", m.furniture,
                         "inverse_state references unknown furniture"});
        }
        break;
    }
  }

  for (const auto& p : task.init_overrides) {
    for (const auto& arg : p.args) {
      if (!resolves_in(task, arg)) {
        out.push_back({"init_entity_resolves", arg.id,
                       "init override " + p.canonical() + " references unknown \"" + arg.id + "\""});
      }
    }
  }

  return report;
}

DepthGate check_depth_gate(const Task& task) {
  DepthGate gate;
  gate.measured = k_depth(task.goal);
  gate.target = task.target_depth;
  gate.pass = gate.measured == gate.target;
  return gate;
}

DepthAudit audit_depth_validity(const Task& task) {
  DepthAudit audit;
  std::vector<KnowChainNode> nodes;
  std::vector<std::string> above;
  collect_chain_nodes(task.goal, 1, above, nodes);

  for (const auto& node : nodes) {
    AuditFinding finding;
    finding.node = node.node_id;
    finding.nesting_level = node.nesting_level;
    finding.subject = node.subject;
    finding.observer = node.observer;
    finding.outer_agent = node.outer_agent;
    finding.fact = node.fact.canonical();

    auto room = locate_fact(task.scene, node.fact);
    if (!room) {
      audit.issues.push_back("UnlocatableFact: " + node.fact.canonical() +
                             " has no room; criterion (a) not evaluable for " + node.node_id);
      audit.findings.push_back(finding);
      continue;
    }
    finding.fact_room = *room;
    finding.outer_barred = task.is_barred(node.outer_agent, *room);
    finding.direct_edge_to_observer =
        node.subject == node.observer || task.can_communicate(node.subject, node.observer);
    finding.direct_edge_to_outer =
        node.subject == node.outer_agent || task.can_communicate(node.subject, node.outer_agent);
    finding.multi_hop = !finding.direct_edge_to_outer;

    if (!finding.outer_barred) audit.verdict = DepthAudit::Verdict::inflated;
    if (finding.multi_hop) audit.multi_hop = true;
    audit.findings.push_back(finding);
  }
  return audit;
}

SampleResult sample_seed_tasks(const std::vector<PoolEntry>& pool, double ratio, int count,
                               std::uint64_t seed) {
  if (pool.empty()) throw empty_pool("seed pool is empty");
  if (ratio < 0.0 || ratio > 1.0) throw schema_violation("ratio must lie in [0, 1]");
  if (count < 0) throw schema_violation("count must be >= 0");

  std::vector<std::string> failed;
  std::vector<std::string> passed;
  for (const auto& entry : pool) {
    (entry.passed ? passed : failed).push_back(entry.task_id);
  }
  std::sort(failed.begin(), failed.end());
  std::sort(passed.begin(), passed.end());

  // round-half-up
  int want_failed = static_cast<int>(ratio * count + 0.5);
  if (want_failed > count) want_failed = count;
  int want_passed = count - want_failed;

  std::mt19937_64 rng(seed);
  auto draw = [&rng](std::vector<std::string>& from, int n) {
    std::vector<std::string> out;
    while (n-- > 0 && !from.empty()) {
      // Rejection sampling keeps the draw uniform and platform-stable.
      std::uint64_t bound = from.size();
      std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                            (std::numeric_limits<std::uint64_t>::max() % bound);
      std::uint64_t r;
      do {
        r = rng();
      } while (r >= limit);
      std::size_t idx = static_cast<std::size_t>(r % bound);
      out.push_back(from[idx]);
      from.erase(from.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    return out;
  };

  SampleResult result;
  auto picked_failed = draw(failed, want_failed);
  auto picked_passed = draw(passed, want_passed);

  int deficit_failed = want_failed - static_cast<int>(picked_failed.size());
  int deficit_passed = want_passed - static_cast<int>(picked_passed.size());
  if (deficit_failed > 0) {
    auto extra = draw(passed, deficit_failed);
    picked_passed.insert(picked_passed.end(), extra.begin(), extra.end());
    result.shortage = "failed stratum short by " + std::to_string(deficit_failed) +
                      ", filled from passed";
  }
  if (deficit_passed > 0) {
    auto extra = draw(failed, deficit_passed);
    picked_failed.insert(picked_failed.end(), extra.begin(), extra.end());
    std::string note = "passed stratum short by " + std::to_string(deficit_passed) +
                       ", filled from failed";
    result.shortage = result.shortage ? *result.shortage + "; " + note : note;
  }

  result.ids = std::move(picked_failed);
  result.ids.insert(result.ids.end(), picked_passed.begin(), picked_passed.end());
  return result;
}

nlohmann::ordered_json task_report_to_json(const TaskReport& report) {
  ojson out;
  out["violations"] = ojson::array();
  for (const auto& v : report.violations) {
    out["violations"].push_back({{"check", v.check}, {"entity", v.entity}, {"message", v.message}});
  }
  return out;
}

std::string task_report_to_jsonl(const TaskReport& report) {
  std::string out;
  for (const auto& v : report.violations) {
    ojson line = {{"check", v.check}, {"entity", v.entity}, {"message", v.message}};
    out += line.dump() + "\n";
  }
  return out;
}

nlohmann::ordered_json depth_audit_to_json(const DepthAudit& audit) {
  ojson out;
  out["verdict"] = audit.verdict == DepthAudit::Verdict::valid ? "valid" : "inflated";
  out["multi_hop"] = audit.multi_hop;
  out["findings"] = ojson::array();
  for (const auto& f : audit.findings) {
    ojson j;
    j["node"] = f.node;
    j["nesting_level"] = f.nesting_level;
    j["subject"] = f.subject;
    j["observer"] = f.observer;
    j["outer_agent"] = f.outer_agent;
    j["fact"] = f.fact;
    if (f.fact_room) {
      j["fact_room"] = *f.fact_room;
    } else {
      j["fact_room"] = nullptr;
    }
    j["outer_barred"] = f.outer_barred;
    j["direct_edge_to_observer"] = f.direct_edge_to_observer;
    j["direct_edge_to_outer"] = f.direct_edge_to_outer;
    j["multi_hop"] = f.multi_hop;
    out["findings"].push_back(j);
  }
  out["issues"] = audit.issues;
  return out;
}

}  // namespace epitask
