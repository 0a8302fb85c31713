#include "epitask/simulator.hpp"

#include <algorithm>
#include <sstream>

#include "epitask/errors.hpp"

namespace epitask {

namespace {

using ojson = nlohmann::ordered_json;

Predicate make_pred(const std::string& name, std::vector<std::string> ids) {
  const PredicateSig* sig = find_predicate(name);
  if (sig == nullptr || sig->arity() != ids.size()) {
    throw malformed_action("bad predicate " + name);
  }
  Predicate p;
  p.name = name;
  for (std::size_t i = 0; i < ids.size(); ++i) p.args.push_back({sig->arg_kinds[i], ids[i]});
  return p;
}

// Every fact currently true in the world, for seeding and visibility.
std::vector<Predicate> enumerate_world_facts(const Task& task, const WorldState& world) {
  std::vector<Predicate> out;
  for (const auto& [obj, placement] : world.placements) {
    switch (placement.kind) {
      case Placement::Kind::on:
        out.push_back(make_pred("is_on_top", {obj, placement.target}));
        break;
      case Placement::Kind::in:
        out.push_back(make_pred("is_inside", {obj, placement.target}));
        break;
      case Placement::Kind::held:
        out.push_back(make_pred("is_held_by", {obj, placement.target}));
        break;
      case Placement::Kind::floor:
        out.push_back(make_pred("is_on_floor", {obj}));
        break;
    }
  }
  for (const auto& f : task.scene.articulated_furniture) {
    out.push_back(make_pred(world.open_furniture.count(f) ? "is_open" : "is_closed", {f}));
  }
  for (const auto& f : world.locked_furniture) out.push_back(make_pred("is_locked", {f}));
  for (const auto& [agent, room] : world.agent_rooms) {
    out.push_back(make_pred("agent_in_room", {agent, room}));
  }
  for (const auto& o : world.powered_on) out.push_back(make_pred("is_powered_on", {o}));
  for (const auto& o : world.clean_objects) out.push_back(make_pred("is_clean", {o}));
  for (const auto& o : world.dirty_objects) out.push_back(make_pred("is_dirty", {o}));
  for (const auto& o : world.filled_objects) out.push_back(make_pred("is_filled", {o}));
  for (const auto& o : world.empty_objects) out.push_back(make_pred("is_empty", {o}));
  for (const auto& [agent, items] : world.item_counts) {
    for (const auto& [item, n] : items) {
      if (n > 0) out.push_back(make_pred("has_item", {agent, item}));
    }
  }
  for (const auto& [furn, items] : world.container_items) {
    for (const auto& item : items) out.push_back(make_pred("item_in_container", {item, furn}));
  }
  return out;
}

// Room in which a currently-true fact is visible; nullopt = nowhere/global.
std::optional<std::string> visibility_room(const Task& task, const WorldState& world,
                                           const Predicate& fact) {
  const Scene& scene = task.scene;
  if (fact.name == "is_on_top" || fact.name == "is_inside") {
    return scene.room_of_furniture(fact.args[1].id);
  }
  if (fact.name == "is_held_by") {
    auto it = world.agent_rooms.find(fact.args[1].id);
    if (it != world.agent_rooms.end()) return it->second;
    return std::nullopt;
  }
  if (fact.name == "is_on_floor") {
    auto it = world.placements.find(fact.args[0].id);
    if (it != world.placements.end() && it->second.kind == Placement::Kind::floor) {
      return it->second.target;
    }
    return std::nullopt;
  }
  if (fact.name == "is_open" || fact.name == "is_closed" || fact.name == "is_locked") {
    return scene.room_of_furniture(fact.args[0].id);
  }
  if (fact.name == "agent_in_room") return fact.args[1].id;
  if (fact.name == "is_clean" || fact.name == "is_dirty" || fact.name == "is_filled" ||
      fact.name == "is_empty" || fact.name == "is_powered_on") {
    return world.room_of_object(fact.args[0].id);
  }
  if (fact.name == "item_in_container") return scene.room_of_furniture(fact.args[1].id);
  return std::nullopt;
}

// Objects inside closed containers are hidden; everything else in the room
// is on view.
bool visible(const Task& task, const WorldState& world, const Predicate& fact) {
  if (fact.name == "is_inside") {
    return world.open_furniture.count(fact.args[1].id) > 0;
  }
  if (fact.name == "item_in_container") {
    return world.open_furniture.count(fact.args[1].id) > 0;
  }
  if (fact.name == "is_locked") return false;  // discovered by trying, not by looking
  (void)task;
  return true;
}

}  // namespace

std::optional<std::string> WorldState::room_of_object(const std::string& object) const {
  auto it = placements.find(object);
  if (it == placements.end()) return std::nullopt;
  switch (it->second.kind) {
    case Placement::Kind::held: {
      auto room = agent_rooms.find(it->second.target);
      if (room == agent_rooms.end()) return std::nullopt;
      return room->second;
    }
    case Placement::Kind::floor:
      return it->second.target;
    default:
      return std::nullopt;  // resolved by the caller against the scene
  }
}

std::optional<std::string> WorldState::held_object(const std::string& agent) const {
  for (const auto& [obj, placement] : placements) {
    if (placement.kind == Placement::Kind::held && placement.target == agent) return obj;
  }
  return std::nullopt;
}

std::optional<bool> KnowledgeLedger::query(const Predicate& fact) const {
  std::optional<bool> latest;
  int latest_turn = -1;
  int latest_idx = -1;
  auto complement = complement_predicate(fact.name);
  for (int i = 0; i < static_cast<int>(entries.size()); ++i) {
    const LedgerEntry& e = entries[i];
    if (!e.chain.empty()) continue;
    bool same = e.fact == fact;
    bool inverse = false;
    if (!same && complement && e.fact.name == *complement && e.fact.args == fact.args) {
      inverse = true;
    }
    if (!same && !inverse) continue;
    if (e.turn > latest_turn || (e.turn == latest_turn && i > latest_idx)) {
      latest_turn = e.turn;
      latest_idx = i;
      latest = same ? e.polarity : !e.polarity;
    }
  }
  return latest;
}

std::string to_string(AgentAction::Kind kind) {
  switch (kind) {
    case AgentAction::Kind::navigate: return "navigate";
    case AgentAction::Kind::open: return "open";
    case AgentAction::Kind::close: return "close";
    case AgentAction::Kind::pick: return "pick";
    case AgentAction::Kind::place: return "place";
    case AgentAction::Kind::send_message: return "send_message";
    case AgentAction::Kind::find_object: return "find_object";
    case AgentAction::Kind::wait: return "wait";
    case AgentAction::Kind::done: return "done";
  }
  return "?";
}

std::string to_string(ProbeOutcome outcome) {
  switch (outcome) {
    case ProbeOutcome::correct: return "correct";
    case ProbeOutcome::incorrect: return "incorrect";
    case ProbeOutcome::unanswered: return "unanswered";
  }
  return "?";
}

std::string to_string(EpisodeResult::Termination t) {
  switch (t) {
    case EpisodeResult::Termination::all_done: return "all_done";
    case EpisodeResult::Termination::turn_budget: return "turn_budget";
    case EpisodeResult::Termination::error: return "error";
  }
  return "?";
}

Episode::Episode(const Task& task) : task_(task) {
  TaskReport report = validate_task(task_);
  if (!report.ok()) {
    throw validation_failed("task fails validation: " + report.violations.front().message);
  }

  for (const auto& [furn, objects] : task_.scene.objects_on_furniture) {
    for (const auto& obj : objects) {
      world_.placements[obj] = {Placement::Kind::on, furn};
    }
  }
  for (const auto& agent : task_.agents) {
    auto spawn = task_.scene.spawn_room(agent);
    world_.agent_rooms[agent] = spawn.value_or("");
    world_.budgets[agent] = task_.message_budget(agent);
  }
  for (const auto& p : task_.init_overrides) {
    const std::string& a0 = p.args.empty() ? std::string() : p.args[0].id;
    if (p.name == "is_on_top") {
      world_.placements[a0] = {Placement::Kind::on, p.args[1].id};
    } else if (p.name == "is_inside") {
      world_.placements[a0] = {Placement::Kind::in, p.args[1].id};
    } else if (p.name == "is_held_by") {
      world_.placements[a0] = {Placement::Kind::held, p.args[1].id};
    } else if (p.name == "is_on_floor") {
      // floor placements need a room: keep the object's current room if any
      auto room = room_of(task_.scene, p.args[0]);
      world_.placements[a0] = {Placement::Kind::floor, room.value_or("")};
    } else if (p.name == "is_open") {
      world_.open_furniture.insert(a0);
    } else if (p.name == "is_closed") {
      world_.open_furniture.erase(a0);
    } else if (p.name == "is_locked" || p.name == "is_locked_permanent") {
      world_.locked_furniture.insert(a0);
    } else if (p.name == "is_powered_on") {
      world_.powered_on.insert(a0);
    } else if (p.name == "is_clean") {
      world_.clean_objects.insert(a0);
    } else if (p.name == "is_dirty") {
      world_.dirty_objects.insert(a0);
    } else if (p.name == "is_filled") {
      world_.filled_objects.insert(a0);
    } else if (p.name == "is_empty") {
      world_.empty_objects.insert(a0);
    } else if (p.name == "has_item") {
      world_.item_counts[a0][p.args[1].id] += 1;
    } else if (p.name == "item_in_container") {
      world_.container_items[p.args[1].id].insert(a0);
    }
    // other init-only mechanic facts are carried by the task mechanics
  }

  // Mirrored pairs start synchronized, propagating from the first member.
  for (const auto& m : task_.mechanics) {
    if (m.kind != MechanicKind::state_mirroring) continue;
    bool first_open = world_.open_furniture.count(m.first) > 0;
    bool second_open = m.mode == MirrorMode::same ? first_open : !first_open;
    if (second_open) {
      world_.open_furniture.insert(m.second);
    } else {
      world_.open_furniture.erase(m.second);
    }
  }

  // Ledger seeding: spawn-room visibility plus secret entity facts.
  StepRecord scratch;
  for (const auto& agent : task_.agents) {
    ledgers_[agent];
    observe_room(agent, world_.agent_rooms[agent], scratch);
    auto mentioned = task_.secret_entities(agent);
    if (mentioned.empty()) continue;
    for (const auto& fact : enumerate_world_facts(task_, world_)) {
      if (fact.args.empty()) continue;
      bool all = true;
      for (const auto& arg : fact.args) {
        if (!mentioned.count(arg.id)) all = false;
      }
      if (!all) continue;
      LedgerEntry entry;
      entry.fact = fact;
      entry.polarity = true;
      entry.turn = 0;
      entry.source = LedgerEntry::Source::secret;
      add_entry(agent, entry, scratch);
    }
  }
}

const KnowledgeLedger& Episode::ledger(const std::string& agent) const {
  auto it = ledgers_.find(agent);
  if (it == ledgers_.end()) throw unknown_entity("no ledger for agent \"" + agent + "\"");
  return it->second;
}

bool Episode::all_done() const { return done_.size() == task_.agents.size(); }

bool Episode::finished() const {
  return all_done() || world_.turn >= task_.turn_budget;
}

const std::string& Episode::expected_actor() const {
  return task_.agents[next_agent_];
}

void Episode::advance_round_robin() {
  for (std::size_t i = 0; i < task_.agents.size(); ++i) {
    next_agent_ = (next_agent_ + 1) % task_.agents.size();
    if (!done_.count(task_.agents[next_agent_])) return;
  }
}

void Episode::add_entry(const std::string& agent, LedgerEntry entry, StepRecord& record) {
  // Ledgers grow monotonically; exact duplicates are skipped.
  auto& ledger = ledgers_[agent];
  for (const auto& e : ledger.entries) {
    if (e.chain == entry.chain && e.fact == entry.fact && e.polarity == entry.polarity &&
        e.turn == entry.turn) {
      return;
    }
  }
  ledger.entries.push_back(entry);
  record.ledger_delta[agent].push_back(std::move(entry));
}

void Episode::observe_room(const std::string& agent, const std::string& room,
                           StepRecord& record) {
  if (room.empty()) return;
  for (const auto& fact : enumerate_world_facts(task_, world_)) {
    auto where = visibility_room(task_, world_, fact);
    if (!where || *where != room) continue;
    if (!visible(task_, world_, fact)) continue;
    LedgerEntry entry;
    entry.fact = fact;
    entry.polarity = true;
    entry.turn = world_.turn;
    entry.source = LedgerEntry::Source::observation;
    add_entry(agent, entry, record);
  }
}

void Episode::broadcast_change(const std::vector<std::pair<Predicate, bool>>& delta,
                               const std::optional<std::string>& room, StepRecord& record) {
  for (const auto& [fact, polarity] : delta) {
    record.world_delta.push_back((polarity ? "+" : "-") + fact.canonical());
  }
  if (!room) return;
  for (const auto& [agent, agent_room] : world_.agent_rooms) {
    if (agent_room != *room) continue;
    for (const auto& [fact, polarity] : delta) {
      LedgerEntry entry;
      entry.fact = fact;
      entry.polarity = polarity;
      entry.turn = world_.turn;
      entry.source = LedgerEntry::Source::observation;
      add_entry(agent, entry, record);
    }
  }
}

void Episode::apply_open_state(const std::string& furniture, bool open, bool verb_is_open,
                               StepRecord& record) {
  struct Change {
    std::string furniture;
    bool open;
  };
  std::vector<Change> changes{{furniture, open}};
  if (verb_is_open) {
    for (const auto& m : task_.mechanics) {
      if (m.kind != MechanicKind::remote_control || m.trigger != furniture) continue;
      switch (m.effect) {
        case RemoteEffect::state: changes.push_back({m.target, open}); break;
        case RemoteEffect::closed: changes.push_back({m.target, false}); break;
        case RemoteEffect::unlocked: {
          if (world_.locked_furniture.erase(m.target) > 0) {
            auto room = task_.scene.room_of_furniture(m.target);
            broadcast_change({{make_pred("is_locked", {m.target}), false}}, room, record);
          }
          break;
        }
        case RemoteEffect::locks: {
          if (world_.locked_furniture.insert(m.target).second) {
            auto room = task_.scene.room_of_furniture(m.target);
            broadcast_change({{make_pred("is_locked", {m.target}), true}}, room, record);
          }
          break;
        }
      }
    }
  }
  // mirror closure
  std::set<std::string> seen;
  for (std::size_t i = 0; i < changes.size(); ++i) {
    Change current = changes[i];
    if (!seen.insert(current.furniture).second) continue;
    for (const auto& m : task_.mechanics) {
      if (m.kind != MechanicKind::state_mirroring) continue;
      std::string other;
      if (m.first == current.furniture) other = m.second;
      if (m.second == current.furniture) other = m.first;
      if (other.empty() || seen.count(other)) continue;
      changes.push_back({other, m.mode == MirrorMode::same ? current.open : !current.open});
    }
  }
  for (const auto& change : changes) {
    bool was_open = world_.open_furniture.count(change.furniture) > 0;
    if (was_open == change.open) continue;
    if (change.open) {
      world_.open_furniture.insert(change.furniture);
    } else {
      world_.open_furniture.erase(change.furniture);
    }
    auto room = task_.scene.room_of_furniture(change.furniture);
    broadcast_change({{make_pred(change.open ? "is_open" : "is_closed", {change.furniture}), true}},
                     room, record);
    // Opening a container reveals its contents to the room.
    if (change.open && room) {
      std::vector<std::pair<Predicate, bool>> revealed;
      for (const auto& [obj, placement] : world_.placements) {
        if (placement.kind == Placement::Kind::in && placement.target == change.furniture) {
          revealed.push_back({make_pred("is_inside", {obj, change.furniture}), true});
        }
      }
      for (const auto& [furn, items] : world_.container_items) {
        if (furn != change.furniture) continue;
        for (const auto& item : items) {
          revealed.push_back({make_pred("item_in_container", {item, furn}), true});
        }
      }
      if (!revealed.empty()) broadcast_change(revealed, room, record);
    }
  }
}

StepRecord Episode::step(const AgentAction& action) {
  if (finished()) throw malformed_action("episode already finished");
  if (action.actor != expected_actor()) {
    throw not_your_turn("expected " + expected_actor() + ", got " + action.actor);
  }

  StepRecord record;
  record.turn = world_.turn;
  record.actor = action.actor;
  record.action = action_to_json(action);

  auto reject = [&](const std::string& rule) {
    record.ok = false;
    record.rejection = rule;
  };

  const std::string& actor = action.actor;
  const std::string& actor_room = world_.agent_rooms[actor];

  switch (action.kind) {
    case AgentAction::Kind::navigate: {
      std::string room = action.target;
      if (!task_.scene.has_room(room)) {
        if (task_.scene.has_furniture(room)) {
          auto resolved = task_.scene.room_of_furniture(room);
          if (!resolved) {
            reject("unreachable_target");
            break;
          }
          room = *resolved;
        } else {
          throw malformed_action("navigate target \"" + room + "\" is neither room nor furniture");
        }
      }
      if (task_.is_barred(actor, room)) {
        reject("room_restriction");
        break;
      }
      if (room != actor_room) {
        std::string from = actor_room;
        world_.agent_rooms[actor] = room;
        broadcast_change({{make_pred("agent_in_room", {actor, from}), false}}, from, record);
        broadcast_change({{make_pred("agent_in_room", {actor, room}), true}}, room, record);
      }
      observe_room(actor, room, record);
      break;
    }
    case AgentAction::Kind::open:
    case AgentAction::Kind::close: {
      const bool verb_open = action.kind == AgentAction::Kind::open;
      const std::string& furniture = action.furniture;
      if (!task_.scene.has_furniture(furniture)) {
        throw malformed_action("unknown furniture \"" + furniture + "\"");
      }
      auto room = task_.scene.room_of_furniture(furniture);
      if (!room || *room != actor_room) {
        reject("not_co_located");
        break;
      }
      if (!task_.scene.is_articulated(furniture)) {
        reject("not_articulated");
        break;
      }
      if (world_.held_object(actor)) {
        reject("hands_full");
        break;
      }
      if (verb_open && world_.locked_furniture.count(furniture)) {
        reject("locked");
        LedgerEntry entry;
        entry.fact = make_pred("is_locked", {furniture});
        entry.polarity = true;
        entry.turn = world_.turn;
        entry.source = LedgerEntry::Source::observation;
        add_entry(actor, entry, record);
        break;
      }
      bool resulting_open = verb_open;
      for (const auto& m : task_.mechanics) {
        if (m.kind == MechanicKind::inverse_state && m.furniture == furniture) {
          resulting_open = !verb_open;
        }
      }
      apply_open_state(furniture, resulting_open, verb_open, record);
      break;
    }
    case AgentAction::Kind::pick: {
      const std::string& object = action.object;
      if (!task_.scene.has_object(object)) {
        throw malformed_action("unknown object \"" + object + "\"");
      }
      if (world_.held_object(actor)) {
        reject("hands_full");
        break;
      }
      auto it = world_.placements.find(object);
      if (it == world_.placements.end()) {
        reject("object_unplaced");
        break;
      }
      Placement placement = it->second;
      if (placement.kind == Placement::Kind::held) {
        reject("already_held");
        break;
      }
      std::optional<std::string> room;
      if (placement.kind == Placement::Kind::floor) {
        room = placement.target;
      } else {
        room = task_.scene.room_of_furniture(placement.target);
      }
      if (!room || *room != actor_room) {
        reject("not_co_located");
        break;
      }
      if (placement.kind == Placement::Kind::in && !world_.open_furniture.count(placement.target)) {
        reject("container_closed");
        break;
      }
      world_.placements[object] = {Placement::Kind::held, actor};
      std::vector<std::pair<Predicate, bool>> delta;
      if (placement.kind == Placement::Kind::on) {
        delta.push_back({make_pred("is_on_top", {object, placement.target}), false});
      } else if (placement.kind == Placement::Kind::in) {
        delta.push_back({make_pred("is_inside", {object, placement.target}), false});
      } else {
        delta.push_back({make_pred("is_on_floor", {object}), false});
      }
      delta.push_back({make_pred("is_held_by", {object, actor}), true});
      broadcast_change(delta, actor_room, record);
      break;
    }
    case AgentAction::Kind::place: {
      const std::string& object = action.object;
      const std::string& furniture = action.furniture;
      if (!task_.scene.has_object(object) || !task_.scene.has_furniture(furniture)) {
        throw malformed_action("unknown object or furniture in place");
      }
      if (action.relation != "on" && action.relation != "in") {
        throw malformed_action("place relation must be \"on\" or \"in\"");
      }
      auto held = world_.placements.find(object);
      if (held == world_.placements.end() || held->second.kind != Placement::Kind::held ||
          held->second.target != actor) {
        reject("not_holding");
        break;
      }
      auto room = task_.scene.room_of_furniture(furniture);
      if (!room || *room != actor_room) {
        reject("not_co_located");
        break;
      }
      if (action.relation == "in") {
        if (!task_.scene.is_articulated(furniture)) {
          reject("not_articulated");
          break;
        }
        if (!world_.open_furniture.count(furniture)) {
          reject("container_closed");
          break;
        }
      }
      bool on = action.relation == "on";
      world_.placements[object] = {on ? Placement::Kind::on : Placement::Kind::in, furniture};
      std::vector<std::pair<Predicate, bool>> delta = {
          {make_pred("is_held_by", {object, actor}), false},
          {make_pred(on ? "is_on_top" : "is_inside", {object, furniture}), true}};
      broadcast_change(delta, actor_room, record);
      break;
    }
    case AgentAction::Kind::send_message: {
      std::vector<std::string> recipients;
      if (action.recipient == "all") {
        for (const auto& other : task_.agents) {
          if (other != actor && task_.can_communicate(actor, other)) recipients.push_back(other);
        }
        if (recipients.empty()) {
          reject("restricted_communication");
          break;
        }
      } else {
        if (!task_.has_agent(action.recipient)) {
          throw malformed_action("unknown recipient \"" + action.recipient + "\"");
        }
        if (action.recipient == actor || !task_.can_communicate(actor, action.recipient)) {
          reject("restricted_communication");
          break;
        }
        recipients.push_back(action.recipient);
      }
      auto& budget = world_.budgets[actor];
      if (budget && *budget <= 0) {
        reject("bandwidth_exhausted");
        break;
      }
      if (budget) *budget -= 1;  // one unit per send, regardless of fan-out
      for (const auto& recipient : recipients) {
        for (const auto& assertion : action.assertions) {
          LedgerEntry entry;
          entry.chain = assertion.knows_chain;
          entry.fact = assertion.fact;
          entry.polarity = assertion.holds;
          entry.turn = world_.turn;
          entry.source = LedgerEntry::Source::message;
          add_entry(recipient, entry, record);
        }
      }
      break;
    }
    case AgentAction::Kind::find_object: {
      const std::string& object = action.object;
      if (!task_.scene.has_object(object)) {
        throw malformed_action("unknown object \"" + object + "\"");
      }
      // Consult the actor's ledger and the current room only; no oracle.
      std::optional<std::string> answer;
      auto it = world_.placements.find(object);
      if (it != world_.placements.end()) {
        Predicate current;
        switch (it->second.kind) {
          case Placement::Kind::on: current = make_pred("is_on_top", {object, it->second.target}); break;
          case Placement::Kind::in: current = make_pred("is_inside", {object, it->second.target}); break;
          case Placement::Kind::held: current = make_pred("is_held_by", {object, it->second.target}); break;
          case Placement::Kind::floor: current = make_pred("is_on_floor", {object}); break;
        }
        auto where = visibility_room(task_, world_, current);
        if (where && *where == actor_room && visible(task_, world_, current)) {
          answer = current.canonical();
        }
      }
      if (!answer) {
        int best_turn = -1;
        for (const auto& e : ledger(actor).entries) {
          if (!e.chain.empty() || !e.polarity) continue;
          if (e.fact.args.empty() || e.fact.args[0].id != object) continue;
          if (e.fact.name != "is_on_top" && e.fact.name != "is_inside" &&
              e.fact.name != "is_held_by" && e.fact.name != "is_on_floor") {
            continue;
          }
          if (e.turn > best_turn) {
            best_turn = e.turn;
            answer = e.fact.canonical();
          }
        }
      }
      record.find_result = answer.value_or("unknown");
      break;
    }
    case AgentAction::Kind::wait:
      break;
    case AgentAction::Kind::done:
      done_.insert(actor);
      break;
  }

  world_.turn += 1;
  advance_round_robin();
  return record;
}

FunctionalVerdict judge_functional(const Task& task, const WorldState& world) {
  FunctionalVerdict verdict;
  auto projection = physical_projection(task.goal);
  if (!projection) {
    verdict.empty_projection = true;
    verdict.success = true;
    return verdict;
  }
  for (const auto& leaf : collect_leaves(*projection)) {
    if (!eval_predicate(task, world, leaf)) return verdict;
  }
  verdict.success = true;
  return verdict;
}

bool eval_predicate(const Task& task, const WorldState& world, const Predicate& pred) {
  auto placement = [&](const std::string& obj) -> const Placement* {
    auto it = world.placements.find(obj);
    return it == world.placements.end() ? nullptr : &it->second;
  };
  const std::string& a0 = pred.args.empty() ? std::string() : pred.args[0].id;

  if (pred.name == "is_on_top") {
    const Placement* p = placement(a0);
    return p && p->kind == Placement::Kind::on && p->target == pred.args[1].id;
  }
  if (pred.name == "is_inside") {
    const Placement* p = placement(a0);
    return p && p->kind == Placement::Kind::in && p->target == pred.args[1].id;
  }
  if (pred.name == "is_held_by") {
    const Placement* p = placement(a0);
    return p && p->kind == Placement::Kind::held && p->target == pred.args[1].id;
  }
  if (pred.name == "is_on_floor") {
    const Placement* p = placement(a0);
    return p && p->kind == Placement::Kind::floor;
  }
  if (pred.name == "is_in_room") {
    const Placement* p = placement(a0);
    if (!p) return false;
    std::optional<std::string> room;
    if (p->kind == Placement::Kind::floor) {
      room = p->target;
    } else if (p->kind == Placement::Kind::held) {
      auto it = world.agent_rooms.find(p->target);
      if (it != world.agent_rooms.end()) room = it->second;
    } else {
      room = task.scene.room_of_furniture(p->target);
    }
    return room && *room == pred.args[1].id;
  }
  if (pred.name == "is_next_to") {
    // Adjacency is symbolic: two objects are next to each other when they
    // share a supporting furniture or floor room.
    const Placement* p = placement(a0);
    const Placement* q = placement(pred.args[1].id);
    return p && q && p->kind == q->kind && p->target == q->target &&
           p->kind != Placement::Kind::held;
  }
  if (pred.name == "agent_in_room") {
    auto it = world.agent_rooms.find(a0);
    return it != world.agent_rooms.end() && it->second == pred.args[1].id;
  }
  if (pred.name == "is_open") return world.open_furniture.count(a0) > 0;
  if (pred.name == "is_closed") return world.open_furniture.count(a0) == 0;
  if (pred.name == "is_locked") return world.locked_furniture.count(a0) > 0;
  if (pred.name == "is_powered_on") return world.powered_on.count(a0) > 0;
  if (pred.name == "is_clean") return world.clean_objects.count(a0) > 0;
  if (pred.name == "is_dirty") return world.dirty_objects.count(a0) > 0;
  if (pred.name == "is_filled") return world.filled_objects.count(a0) > 0;
  if (pred.name == "is_empty") return world.empty_objects.count(a0) > 0;
  if (pred.name == "has_item" || pred.name == "has_at_least") {
    auto it = world.item_counts.find(a0);
    if (it == world.item_counts.end()) return false;
    auto item = it->second.find(pred.args[1].id);
    return item != it->second.end() && item->second >= 1;
  }
  if (pred.name == "has_most") {
    int mine = 0;
    auto it = world.item_counts.find(a0);
    if (it != world.item_counts.end()) {
      auto item = it->second.find(pred.args[1].id);
      if (item != it->second.end()) mine = item->second;
    }
    for (const auto& [agent, items] : world.item_counts) {
      if (agent == a0) continue;
      auto item = items.find(pred.args[1].id);
      if (item != items.end() && item->second >= mine) return false;
    }
    return mine > 0;
  }
  if (pred.name == "item_in_container") {
    auto it = world.container_items.find(pred.args[1].id);
    return it != world.container_items.end() && it->second.count(a0) > 0;
  }
  return false;
}

std::map<std::string, ProbeOutcome> score_probes(
    const Task& task, const std::map<std::string, KnowledgeLedger>& ledgers,
    const nlohmann::ordered_json& answers) {
  std::map<std::string, ProbeOutcome> scores;
  for (const auto& probe : extract_probes(task.goal)) {
    scores[probe.probe_id] = ProbeOutcome::unanswered;

    std::optional<bool> truth;
    if (auto it = ledgers.find(probe.subject); it != ledgers.end()) {
      truth = it->second.query(probe.fact);
    }

    const ojson* answer = nullptr;
    if (auto agent_it = answers.find(probe.observer); agent_it != answers.end()) {
      auto list = agent_it->find("answers");
      if (list != agent_it->end() && list->is_array()) {
        for (const auto& a : *list) {
          if (a.is_object() && a.contains("probe_id") && a["probe_id"] == probe.probe_id) {
            answer = &a;
          }
        }
      }
    }
    if (answer == nullptr) continue;

    // protocol answer shape: {probe_id, predicate, holds, args}
    if (!answer->contains("predicate") || !answer->contains("holds") ||
        !answer->contains("args") || !(*answer)["predicate"].is_string() ||
        !(*answer)["args"].is_array() ||
        !((*answer)["holds"].is_boolean() || (*answer)["holds"].is_null())) {
      scores[probe.probe_id] = ProbeOutcome::unanswered;  // malformed
      continue;
    }
    std::string predicate = (*answer)["predicate"].get<std::string>();
    std::vector<std::string> args;
    bool args_ok = true;
    for (const auto& arg : (*answer)["args"]) {
      if (!arg.is_string()) args_ok = false;
      else args.push_back(arg.get<std::string>());
    }
    if (!args_ok) {
      scores[probe.probe_id] = ProbeOutcome::unanswered;
      continue;
    }

    bool correct = false;
    if (predicate == "unknown" && (*answer)["holds"].is_null()) {
      correct = !truth.has_value();
    } else if ((*answer)["holds"].is_boolean() && truth.has_value()) {
      std::vector<std::string> expected;
      for (const auto& arg : probe.fact.args) expected.push_back(arg.id);
      correct = predicate == probe.fact.name && args == expected &&
                (*answer)["holds"].get<bool>() == *truth;
    }
    scores[probe.probe_id] = correct ? ProbeOutcome::correct : ProbeOutcome::incorrect;
  }
  return scores;
}

AgentAction parse_action(const ojson& doc) {
  if (!doc.is_object() || !doc.contains("actor") || !doc.contains("kind")) {
    throw malformed_action("action needs actor and kind");
  }
  AgentAction action;
  action.actor = doc["actor"].get<std::string>();
  std::string kind = doc["kind"].get<std::string>();
  auto need = [&](const char* key) -> std::string {
    if (!doc.contains(key)) throw malformed_action(kind + " action needs \"" + key + "\"");
    return doc[key].get<std::string>();
  };
  if (kind == "navigate") {
    action.kind = AgentAction::Kind::navigate;
    action.target = need("target");
  } else if (kind == "open" || kind == "close") {
    action.kind = kind == "open" ? AgentAction::Kind::open : AgentAction::Kind::close;
    action.furniture = need("furniture");
  } else if (kind == "pick") {
    action.kind = AgentAction::Kind::pick;
    action.object = need("object");
  } else if (kind == "place") {
    action.kind = AgentAction::Kind::place;
    action.object = need("object");
    action.relation = need("relation");
    action.furniture = need("furniture");
  } else if (kind == "send_message") {
    action.kind = AgentAction::Kind::send_message;
    action.recipient = need("to");
    if (doc.contains("text")) action.text = doc["text"].get<std::string>();
    if (doc.contains("assertions")) {
      for (const auto& a : doc["assertions"]) {
        Assertion assertion;
        if (!a.contains("predicate") || !a.contains("args") || !a.contains("holds")) {
          throw malformed_action("assertion needs predicate, args, holds");
        }
        std::vector<std::string> ids;
        for (const auto& arg : a["args"]) ids.push_back(arg.get<std::string>());
        assertion.fact = make_pred(a["predicate"].get<std::string>(), ids);
        assertion.holds = a["holds"].get<bool>();
        if (a.contains("knows")) {
          for (const auto& agent : a["knows"]) {
            assertion.knows_chain.push_back(agent.get<std::string>());
          }
        }
        action.assertions.push_back(std::move(assertion));
      }
    }
  } else if (kind == "find_object") {
    action.kind = AgentAction::Kind::find_object;
    action.object = need("object");
  } else if (kind == "wait") {
    action.kind = AgentAction::Kind::wait;
  } else if (kind == "done") {
    action.kind = AgentAction::Kind::done;
  } else {
    throw malformed_action("unknown action kind \"" + kind + "\"");
  }
  return action;
}

nlohmann::ordered_json action_to_json(const AgentAction& action) {
  ojson doc;
  doc["actor"] = action.actor;
  doc["kind"] = to_string(action.kind);
  switch (action.kind) {
    case AgentAction::Kind::navigate:
      doc["target"] = action.target;
      break;
    case AgentAction::Kind::open:
    case AgentAction::Kind::close:
      doc["furniture"] = action.furniture;
      break;
    case AgentAction::Kind::pick:
    case AgentAction::Kind::find_object:
      doc["object"] = action.object;
      break;
    case AgentAction::Kind::place:
      doc["object"] = action.object;
      doc["relation"] = action.relation;
      doc["furniture"] = action.furniture;
      break;
    case AgentAction::Kind::send_message: {
      doc["to"] = action.recipient;
      ojson assertions = ojson::array();
      for (const auto& a : action.assertions) {
        ojson j;
        j["predicate"] = a.fact.name;
        ojson args = ojson::array();
        for (const auto& arg : a.fact.args) args.push_back(arg.id);
        j["args"] = args;
        j["holds"] = a.holds;
        if (!a.knows_chain.empty()) j["knows"] = a.knows_chain;
        assertions.push_back(j);
      }
      doc["assertions"] = assertions;
      if (!action.text.empty()) doc["text"] = action.text;
      break;
    }
    default:
      break;
  }
  return doc;
}

std::map<std::string, std::vector<AgentAction>> parse_scripts(const std::string& jsonl) {
  std::map<std::string, std::vector<AgentAction>> scripts;
  std::istringstream in(jsonl);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ojson doc;
    try {
      doc = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw malformed_document(std::string("script line: ") + e.what());
    }
    AgentAction action = parse_action(doc);
    scripts[action.actor].push_back(std::move(action));
  }
  return scripts;
}

namespace {

ojson ledger_entry_to_json(const LedgerEntry& entry) {
  ojson j;
  j["chain"] = entry.chain;
  j["fact"] = entry.fact.canonical();
  j["holds"] = entry.polarity;
  j["turn"] = entry.turn;
  switch (entry.source) {
    case LedgerEntry::Source::observation: j["source"] = "observation"; break;
    case LedgerEntry::Source::message: j["source"] = "message"; break;
    case LedgerEntry::Source::secret: j["source"] = "secret"; break;
  }
  return j;
}

}  // namespace

nlohmann::ordered_json step_record_to_json(const StepRecord& record) {
  ojson doc;
  doc["turn"] = record.turn;
  doc["actor"] = record.actor;
  doc["action"] = record.action;
  doc["outcome"] = record.ok ? "ok" : "rejected:" + record.rejection;
  doc["world_delta"] = record.world_delta;
  ojson ledger_delta = ojson::object();
  for (const auto& [agent, entries] : record.ledger_delta) {
    ojson list = ojson::array();
    for (const auto& e : entries) list.push_back(ledger_entry_to_json(e));
    ledger_delta[agent] = list;
  }
  doc["ledger_delta"] = ledger_delta;
  if (record.find_result) doc["find_result"] = *record.find_result;
  return doc;
}

StepRecord step_record_from_json(const nlohmann::ordered_json& doc) {
  StepRecord record;
  record.turn = doc.at("turn").get<int>();
  record.actor = doc.at("actor").get<std::string>();
  record.action = doc.at("action");
  std::string outcome = doc.at("outcome").get<std::string>();
  if (outcome == "ok") {
    record.ok = true;
  } else if (outcome.rfind("rejected:", 0) == 0) {
    record.ok = false;
    record.rejection = outcome.substr(9);
  } else {
    throw malformed_document("bad outcome " + outcome);
  }
  record.world_delta = doc.at("world_delta").get<std::vector<std::string>>();
  for (const auto& [agent, entries] : doc.at("ledger_delta").items()) {
    for (const auto& e : entries) {
      LedgerEntry entry;
      entry.chain = e.at("chain").get<std::vector<std::string>>();
      entry.fact = parse_ground_predicate(e.at("fact").get<std::string>());
      entry.polarity = e.at("holds").get<bool>();
      entry.turn = e.at("turn").get<int>();
      std::string source = e.at("source").get<std::string>();
      entry.source = source == "message"  ? LedgerEntry::Source::message
                     : source == "secret" ? LedgerEntry::Source::secret
                                          : LedgerEntry::Source::observation;
      record.ledger_delta[agent].push_back(entry);
    }
  }
  if (doc.contains("find_result")) record.find_result = doc["find_result"].get<std::string>();
  return record;
}

EpisodeResult run_episode(const Task& task,
                          const std::map<std::string, std::vector<AgentAction>>& scripts,
                          const nlohmann::ordered_json& answers) {
  if (scripts.empty()) throw malformed_action("no scripts supplied");

  Episode episode(task);
  std::map<std::string, std::size_t> cursor;
  std::ostringstream transcript;
  EpisodeResult result;

  while (!episode.finished()) {
    const std::string actor = episode.expected_actor();
    AgentAction action;
    auto it = scripts.find(actor);
    if (it != scripts.end() && cursor[actor] < it->second.size()) {
      action = it->second[cursor[actor]++];
      if (action.actor != actor) {
        throw malformed_action("script action for " + action.actor + " arrived on " + actor +
                               "'s turn");
      }
    } else {
      action.actor = actor;
      action.kind = AgentAction::Kind::wait;  // exhausted scripts idle
    }
    try {
      StepRecord record = episode.step(action);
      if (action.kind == AgentAction::Kind::send_message && record.ok) {
        result.messages_used[actor] += 1;
      }
      transcript << step_record_to_json(record).dump() << "\n";
    } catch (const error& e) {
      ojson err;
      err["turn"] = episode.world().turn;
      err["actor"] = actor;
      err["error"] = e.what();
      transcript << err.dump() << "\n";
      result.termination = EpisodeResult::Termination::error;
      result.turns_used = episode.world().turn;
      result.transcript = transcript.str();
      auto verdict = judge_functional(task, episode.world());
      result.functional_success = verdict.success;
      result.empty_projection = verdict.empty_projection;
      return result;
    }
  }

  result.termination = episode.all_done() ? EpisodeResult::Termination::all_done
                                          : EpisodeResult::Termination::turn_budget;
  result.turns_used = episode.world().turn;
  result.transcript = transcript.str();

  auto verdict = judge_functional(task, episode.world());
  result.functional_success = verdict.success;
  result.empty_projection = verdict.empty_projection;

  std::map<std::string, KnowledgeLedger> ledgers;
  for (const auto& agent : task.agents) ledgers[agent] = episode.ledger(agent);
  result.probe_scores = score_probes(task, ledgers, answers);
  return result;
}

nlohmann::ordered_json episode_result_to_json(const EpisodeResult& result) {
  ojson doc;
  doc["functional_success"] = result.functional_success;
  if (result.empty_projection) doc["empty_projection_warning"] = true;
  ojson probes = ojson::object();
  for (const auto& [id, outcome] : result.probe_scores) probes[id] = to_string(outcome);
  doc["probe_scores"] = probes;
  doc["turns_used"] = result.turns_used;
  ojson messages = ojson::object();
  for (const auto& [agent, n] : result.messages_used) messages[agent] = n;
  doc["messages_used"] = messages;
  doc["termination"] = to_string(result.termination);
  doc["transcript"] = result.transcript;
  return doc;
}

}  // namespace epitask
