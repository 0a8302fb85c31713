#include "epitask/compiler.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "epitask/errors.hpp"

namespace epitask {

namespace {

using ojson = nlohmann::ordered_json;

struct Chain {
  std::vector<std::string> agents;  // outermost first
  Predicate leaf;
};

// Distributes K over conjunctions, leaving pure chains and physical leaves.
void split_goal(const Formula& f, std::vector<std::string>& prefix, std::vector<Chain>& chains,
                std::vector<Predicate>& physical) {
  switch (f.kind) {
    case Formula::Kind::predicate:
      if (prefix.empty()) {
        physical.push_back(f.pred);
      } else {
        chains.push_back({prefix, f.pred});
      }
      return;
    case Formula::Kind::conjunction:
      for (const auto& child : f.children) split_goal(child, prefix, chains, physical);
      return;
    case Formula::Kind::know:
      prefix.push_back(f.agent);
      split_goal(f.know_body(), prefix, chains, physical);
      prefix.pop_back();
      return;
  }
}

struct OpenDelta {
  std::string furniture;
  bool open = false;
};

std::string remote_predicate(RemoteEffect effect) {
  switch (effect) {
    case RemoteEffect::state: return "controls";
    case RemoteEffect::unlocked: return "controls_unlocked";
    case RemoteEffect::closed: return "controls_closed";
    case RemoteEffect::locks: return "controls_locks";
  }
  return "controls";
}

class Builder {
 public:
  explicit Builder(const Task& task) : task_(task) {}

  CompiledProblem build();

 private:
  int declare(const std::string& atom) {
    auto it = index_.find(atom);
    if (it != index_.end()) return it->second;
    int idx = static_cast<int>(problem_.fluents.size());
    problem_.fluents.push_back(atom);
    index_[atom] = idx;
    return idx;
  }

  bool declared(const std::string& atom) const { return index_.count(atom) > 0; }

  int index_of(const std::string& atom) const {
    auto it = index_.find(atom);
    if (it == index_.end()) throw malformed_problem("undeclared fluent " + atom);
    return it->second;
  }

  int declare_knowledge(int layer, const std::string& holder, const std::string& about,
                        const std::string& leaf_canonical) {
    std::string symbol = "knows_" + holder + "_" + digest8(about);
    std::string atom = "(" + symbol + ")";
    if (declared(atom)) return index_of(atom);
    int idx = declare(atom);
    problem_.knowledge.push_back({idx, layer, holder, symbol, about, leaf_canonical});
    return idx;
  }

  void add_action(GroundAction action) {
    std::sort(action.pre.begin(), action.pre.end());
    std::sort(action.add.begin(), action.add.end());
    std::sort(action.del.begin(), action.del.end());
    problem_.actions.push_back(std::move(action));
  }

  std::string open_atom(const std::string& f) const { return "(is_open " + f + ")"; }
  std::string closed_atom(const std::string& f) const { return "(is_closed " + f + ")"; }
  std::string room_atom(const std::string& a, const std::string& r) const {
    return "(agent_in_room " + a + " " + r + ")";
  }
  std::string hand_atom(const std::string& a) const { return "(hand_empty " + a + ")"; }

  std::set<std::string> allowed_rooms(const std::string& agent) const {
    std::set<std::string> out(task_.scene.rooms.begin(), task_.scene.rooms.end());
    for (const auto& r : task_.barred_rooms(agent)) out.erase(r);
    return out;
  }

  // Open-state changes induced by flipping `furniture` to `open`, including
  // remote-control targets (verb open only) and transitive mirror closure.
  std::vector<OpenDelta> propagate_state_change(const std::string& furniture, bool open,
                                                bool verb_is_open) const {
    std::vector<OpenDelta> deltas{{furniture, open}};
    if (verb_is_open) {
      for (const auto& m : task_.mechanics) {
        if (m.kind == MechanicKind::remote_control && m.trigger == furniture) {
          switch (m.effect) {
            case RemoteEffect::state:
              deltas.push_back({m.target, open});
              break;
            case RemoteEffect::closed:
              deltas.push_back({m.target, false});
              break;
            case RemoteEffect::unlocked:
            case RemoteEffect::locks:
              break;  // handled as lock deltas by the caller
          }
        }
      }
    }
    // mirror closure
    std::set<std::string> seen;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      OpenDelta current = deltas[i];
      if (!seen.insert(current.furniture).second) continue;
      for (const auto& m : task_.mechanics) {
        if (m.kind != MechanicKind::state_mirroring) continue;
        std::string other;
        if (m.first == current.furniture) other = m.second;
        if (m.second == current.furniture) other = m.first;
        if (other.empty() || seen.count(other)) continue;
        bool mirrored = m.mode == MirrorMode::same ? current.open : !current.open;
        deltas.push_back({other, mirrored});
      }
    }
    return deltas;
  }

  bool inverse_flagged(const std::string& furniture) const {
    for (const auto& m : task_.mechanics) {
      if (m.kind == MechanicKind::inverse_state && m.furniture == furniture) return true;
    }
    return false;
  }

  const Task& task_;
  CompiledProblem problem_;
  std::map<std::string, int> index_;

  std::vector<Chain> chains_;
  std::vector<Predicate> physical_goal_;
  std::set<std::string> open_tracked_;  // furniture with is_open/is_closed fluents
  std::set<std::string> lock_tracked_;
  std::set<std::string> room_tracked_;  // objects with is_in_room fluents
  std::map<std::string, std::vector<int>> agent_tokens_;  // agent -> token fluents
};

CompiledProblem Builder::build() {
  TaskReport report = validate_task(task_);
  if (!report.ok()) {
    throw validation_failed("task fails validation (" +
                            std::to_string(report.violations.size()) + " violations, first: " +
                            report.violations.front().message + ")");
  }
  DepthGate gate = check_depth_gate(task_);
  if (!gate.pass) {
    throw depth_gate_failed("goal K-depth " + std::to_string(gate.measured) +
                            " does not match target " + std::to_string(gate.target));
  }

  std::vector<std::string> prefix;
  split_goal(task_.goal, prefix, chains_, physical_goal_);

  // Furniture whose open state the problem tracks.
  for (const auto& f : task_.scene.articulated_furniture) open_tracked_.insert(f);
  for (const auto& m : task_.mechanics) {
    if (m.kind == MechanicKind::state_mirroring) {
      open_tracked_.insert(m.first);
      open_tracked_.insert(m.second);
    }
    if (m.kind == MechanicKind::remote_control &&
        (m.effect == RemoteEffect::state || m.effect == RemoteEffect::closed)) {
      open_tracked_.insert(m.target);
    }
    if (m.kind == MechanicKind::inverse_state) open_tracked_.insert(m.furniture);
    if (m.kind == MechanicKind::remote_control &&
        (m.effect == RemoteEffect::unlocked || m.effect == RemoteEffect::locks)) {
      lock_tracked_.insert(m.target);
    }
  }
  for (const auto& p : task_.init_overrides) {
    if (p.name == "is_locked" || p.name == "is_locked_permanent") {
      lock_tracked_.insert(p.args.front().id);
    }
  }

  // --- fluent declarations -------------------------------------------------

  // Placement fluents for every movable object against roomed furniture.
  std::map<std::string, Predicate> placement_init;  // object -> initial placement
  for (const auto& [furn, objects] : task_.scene.objects_on_furniture) {
    for (const auto& obj : objects) {
      placement_init[obj] = Predicate{
          "is_on_top", {{EntityKind::object, obj}, {EntityKind::furniture, furn}}};
    }
  }
  for (const auto& p : task_.init_overrides) {
    if (p.name == "is_on_top" || p.name == "is_inside" || p.name == "is_held_by" ||
        p.name == "is_on_floor") {
      placement_init[p.args.front().id] = p;
    }
  }

  for (const auto& obj : task_.scene.objects) {
    for (const auto& furn : task_.scene.furniture) {
      if (task_.scene.room_of_furniture(furn)) {
        declare("(is_on_top " + obj + " " + furn + ")");
        if (task_.scene.is_articulated(furn)) declare("(is_inside " + obj + " " + furn + ")");
      }
    }
    for (const auto& agent : task_.agents) declare("(is_held_by " + obj + " " + agent + ")");
  }
  for (const auto& [obj, placement] : placement_init) declare(placement.canonical());

  for (const auto& agent : task_.agents) {
    declare(hand_atom(agent));
    for (const auto& room : allowed_rooms(agent)) declare(room_atom(agent, room));
  }
  for (const auto& f : open_tracked_) {
    declare(open_atom(f));
    declare(closed_atom(f));
  }
  for (const auto& f : lock_tracked_) {
    declare("(is_locked " + f + ")");
    declare("(is_unlocked " + f + ")");
  }

  // Mechanic facts and statics.
  for (const auto& [from, to] : task_.comm_edges()) {
    declare("(can_communicate " + from + " " + to + ")");
  }
  for (const auto& m : task_.mechanics) {
    switch (m.kind) {
      case MechanicKind::room_restriction:
        for (const auto& room : m.rooms) declare("(is_restricted " + m.agent + " " + room + ")");
        break;
      case MechanicKind::remote_control:
        declare("(" + remote_predicate(m.effect) + " " + m.trigger + " " + m.target + ")");
        break;
      case MechanicKind::state_mirroring:
        declare("(" + std::string(m.mode == MirrorMode::same ? "mirrors" : "mirrors_closed") +
                " " + m.first + " " + m.second + ")");
        break;
      case MechanicKind::inverse_state:
        declare("(is_inverse " + m.furniture + ")");
        break;
      default:
        break;
    }
  }

  // Message tokens.
  for (const auto& agent : task_.agents) {
    if (auto budget = task_.message_budget(agent)) {
      for (int i = 1; i <= *budget; ++i) {
        int idx = declare("(msg_tok_" + agent + "_" + std::to_string(i) + ")");
        problem_.tokens.emplace_back(idx, agent);
        agent_tokens_[agent].push_back(idx);
      }
    }
  }

  // Object-room fluents are maintained by pick/place when goals or overrides
  // mention them; a held object counts as in no room.
  std::set<std::string> room_tracked_objects;
  for (const auto& pred : physical_goal_) {
    if (pred.name == "is_in_room") room_tracked_objects.insert(pred.args[0].id);
  }
  for (const auto& p : task_.init_overrides) {
    if (p.name == "is_in_room") room_tracked_objects.insert(p.args[0].id);
  }
  for (const auto& obj : room_tracked_objects) {
    for (const auto& room : task_.scene.rooms) declare("(is_in_room " + obj + " " + room + ")");
  }
  room_tracked_ = room_tracked_objects;

  // Goal-relevant state fluents outside the physical model (is_clean and
  // friends are static at desk scale: nothing toggles them).
  for (const auto& pred : physical_goal_) declare(pred.canonical());
  for (const auto& p : task_.init_overrides) declare(p.canonical());

  // Step 1: knowledge predicates. Layer-1 for every agent in a chain, the
  // canonical layered fluents up to the chain depth, and the per-node
  // adjacent-pair fluents the rewritten goal uses.
  struct ChainFluents {
    std::vector<int> layer1;       // per chain agent
    std::vector<int> node_fluent;  // per Know node, outermost first
  };
  std::vector<ChainFluents> chain_fluents;
  for (const auto& chain : chains_) {
    FactId leaf = fact_digest(chain.leaf);
    declare(leaf.canonical);
    ChainFluents cf;
    std::vector<std::string> layer1_symbols;
    for (const auto& agent : chain.agents) {
      int idx = declare_knowledge(1, agent, leaf.canonical, leaf.canonical);
      cf.layer1.push_back(idx);
      layer1_symbols.push_back(problem_.knowledge_meta(idx)->symbol);
    }
    const std::size_t d = chain.agents.size();
    // canonical chain: layer k held by agents[d-k], about the layer-(k-1)
    // fluent one step inward
    std::string inner_symbol = layer1_symbols[d - 1];
    for (std::size_t k = 2; k <= d; ++k) {
      int idx = declare_knowledge(static_cast<int>(k), chain.agents[d - k], inner_symbol,
                                  leaf.canonical);
      inner_symbol = problem_.knowledge_meta(idx)->symbol;
    }
    // node fluents: each Know node compiles to "the node agent knows the next
    // inner agent knows the fact"; the innermost node is its layer-1 fluent
    cf.node_fluent.resize(d);
    cf.node_fluent[d - 1] = cf.layer1[d - 1];
    for (std::size_t i = 0; i + 1 < d; ++i) {
      cf.node_fluent[i] =
          declare_knowledge(2, chain.agents[i], layer1_symbols[i + 1], leaf.canonical);
    }
    chain_fluents.push_back(std::move(cf));
  }

  // --- actions --------------------------------------------------------------
  // Declaration order matters: the planner tie-breaks on it. Knowledge
  // operators come first, then the physical lowering.

  // Step 2: observe operators for chain agents that may stand in the fact's
  // room. Barred agents get no observe route; that is what forces
  // communication.
  std::set<std::string> emitted;
  for (std::size_t c = 0; c < chains_.size(); ++c) {
    const Chain& chain = chains_[c];
    FactId leaf = fact_digest(chain.leaf);
    auto fact_room = locate_fact(task_.scene, chain.leaf);
    if (!fact_room) {
      throw unlocatable_fact("Know chain over " + leaf.canonical +
                             " has no located room; observe operators cannot be built");
    }
    for (std::size_t i = 0; i < chain.agents.size(); ++i) {
      const std::string& agent = chain.agents[i];
      if (task_.is_barred(agent, *fact_room)) continue;
      const auto* meta = problem_.knowledge_meta(chain_fluents[c].layer1[i]);
      std::string name = "observe_" + meta->symbol;
      if (!emitted.insert(name).second) continue;
      GroundAction a;
      a.name = name;
      a.actor = agent;
      a.cls = ActionClass::observe;
      a.pre = {index_of(leaf.canonical), index_of(room_atom(agent, *fact_room))};
      a.add = {chain_fluents[c].layer1[i]};
      add_action(std::move(a));
    }
  }

  // Step 3: fact inform operators, one per (sender, receiver, token). The
  // sender side also learns "receiver now knows" when that fluent exists.
  for (std::size_t c = 0; c < chains_.size(); ++c) {
    const Chain& chain = chains_[c];
    FactId leaf = fact_digest(chain.leaf);
    for (std::size_t si = 0; si < chain.agents.size(); ++si) {
      const std::string& sender = chain.agents[si];
      for (std::size_t ri = 0; ri < chain.agents.size(); ++ri) {
        const std::string& receiver = chain.agents[ri];
        if (sender == receiver || !task_.can_communicate(sender, receiver)) continue;
        const auto* receiver_meta = problem_.knowledge_meta(chain_fluents[c].layer1[ri]);
        std::string gain_atom =
            "(knows_" + sender + "_" + digest8(receiver_meta->symbol) + ")";
        auto emit = [&](const std::optional<int>& token, const std::string& suffix) {
          std::string name = "inform_" + receiver_meta->symbol + "_from_" + sender + suffix;
          if (!emitted.insert(name).second) return;
          GroundAction a;
          a.name = name;
          a.actor = sender;
          a.cls = ActionClass::inform;
          a.pre = {chain_fluents[c].layer1[si],
                   index_of("(can_communicate " + sender + " " + receiver + ")")};
          a.add = {chain_fluents[c].layer1[ri]};
          if (declared(gain_atom)) a.add.push_back(index_of(gain_atom));
          if (token) {
            a.pre.push_back(*token);
            a.del = {*token};
          }
          add_action(std::move(a));
        };
        if (!task_.message_budget(sender)) {
          emit(std::nullopt, "");  // no bandwidth binding: unlimited
        } else {
          const auto& tokens = agent_tokens_[sender];  // empty at budget 0
          for (std::size_t t = 0; t < tokens.size(); ++t) {
            emit(tokens[t], "_tok" + std::to_string(t + 1));
          }
        }
      }
    }
  }

  // Step 4: nested inform operators. The sender transmits a knowledge fluent
  // it holds; the receiver gains the next layer up. Receiving nested
  // knowledge presupposes the receiver already knows the ground fact.
  for (std::size_t m = 0; m < problem_.knowledge.size(); ++m) {
    const KnowledgeFluentMeta meta = problem_.knowledge[m];
    if (meta.layer < 2) continue;
    // producer: the holder of the inner fluent
    const KnowledgeFluentMeta* inner = nullptr;
    for (const auto& k : problem_.knowledge) {
      if (k.symbol == meta.about) inner = &k;
    }
    if (inner == nullptr) continue;
    const std::string& sender = inner->holder;
    const std::string& receiver = meta.holder;
    if (sender == receiver || !task_.can_communicate(sender, receiver)) continue;
    std::string receiver_layer1 = "(knows_" + receiver + "_" + digest8(meta.leaf_canonical) + ")";
    if (!declared(receiver_layer1)) continue;
    auto emit = [&](const std::optional<int>& token, const std::string& suffix) {
      std::string name = "inform_" + meta.symbol + "_from_" + sender + suffix;
      if (!emitted.insert(name).second) return;
      GroundAction a;
      a.name = name;
      a.actor = sender;
      a.cls = ActionClass::inform_nested;
      a.pre = {inner->fluent, index_of(receiver_layer1),
               index_of("(can_communicate " + sender + " " + receiver + ")")};
      a.add = {meta.fluent};
      if (token) {
        a.pre.push_back(*token);
        a.del = {*token};
      }
      add_action(std::move(a));
    };
    if (!task_.message_budget(sender)) {
      emit(std::nullopt, "");
    } else {
      const auto& tokens = agent_tokens_[sender];
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        emit(tokens[t], "_tok" + std::to_string(t + 1));
      }
    }
  }

  // Physical lowering: navigate, open, close, pick, place.
  for (const auto& agent : task_.agents) {
    auto rooms = allowed_rooms(agent);
    for (const auto& from : rooms) {
      for (const auto& to : rooms) {
        if (from == to) continue;
        GroundAction a;
        a.name = "navigate_" + agent + "_" + from + "_" + to;
        a.actor = agent;
        a.cls = ActionClass::physical;
        a.pre = {index_of(room_atom(agent, from))};
        a.add = {index_of(room_atom(agent, to))};
        a.del = {index_of(room_atom(agent, from))};
        add_action(std::move(a));
      }
    }
  }

  auto open_close_effects = [&](const std::string& furniture, bool verb_open,
                                GroundAction& action) {
    bool resulting_open = inverse_flagged(furniture) ? !verb_open : verb_open;
    for (const auto& delta : propagate_state_change(furniture, resulting_open, verb_open)) {
      if (!open_tracked_.count(delta.furniture)) continue;
      int open_idx = index_of(open_atom(delta.furniture));
      int closed_idx = index_of(closed_atom(delta.furniture));
      if (delta.open) {
        action.add.push_back(open_idx);
        action.del.push_back(closed_idx);
      } else {
        action.add.push_back(closed_idx);
        action.del.push_back(open_idx);
      }
    }
    if (verb_open) {
      for (const auto& m : task_.mechanics) {
        if (m.kind != MechanicKind::remote_control || m.trigger != furniture) continue;
        if (!lock_tracked_.count(m.target)) continue;
        int locked = index_of("(is_locked " + m.target + ")");
        int unlocked = index_of("(is_unlocked " + m.target + ")");
        if (m.effect == RemoteEffect::unlocked) {
          action.add.push_back(unlocked);
          action.del.push_back(locked);
        } else if (m.effect == RemoteEffect::locks) {
          action.add.push_back(locked);
          action.del.push_back(unlocked);
        }
      }
    }
  };

  for (const auto& verb : {std::string("open"), std::string("close")}) {
    for (const auto& agent : task_.agents) {
      auto rooms = allowed_rooms(agent);
      for (const auto& furniture : task_.scene.articulated_furniture) {
        auto room = task_.scene.room_of_furniture(furniture);
        if (!room || !rooms.count(*room)) continue;
        GroundAction a;
        a.name = verb + "_" + agent + "_" + furniture;
        a.actor = agent;
        a.cls = ActionClass::physical;
        a.pre = {index_of(room_atom(agent, *room)), index_of(hand_atom(agent))};
        if (verb == "open" && lock_tracked_.count(furniture)) {
          a.pre.push_back(index_of("(is_unlocked " + furniture + ")"));
        }
        open_close_effects(furniture, verb == "open", a);
        add_action(std::move(a));
      }
    }
  }

  for (const auto& agent : task_.agents) {
    auto rooms = allowed_rooms(agent);
    for (const auto& obj : task_.scene.objects) {
      for (const auto& furniture : task_.scene.furniture) {
        auto room = task_.scene.room_of_furniture(furniture);
        if (!room || !rooms.count(*room)) continue;
        const int in_room = index_of(room_atom(agent, *room));
        const int hand = index_of(hand_atom(agent));
        const int held = index_of("(is_held_by " + obj + " " + agent + ")");
        const bool tracked = room_tracked_.count(obj) > 0;
        const int obj_room =
            tracked ? index_of("(is_in_room " + obj + " " + *room + ")") : -1;
        {
          GroundAction a;
          a.name = "pick_" + agent + "_" + obj + "_from_" + furniture;
          a.actor = agent;
          a.cls = ActionClass::physical;
          a.pre = {index_of("(is_on_top " + obj + " " + furniture + ")"), in_room, hand};
          a.add = {held};
          a.del = {index_of("(is_on_top " + obj + " " + furniture + ")"), hand};
          if (tracked) a.del.push_back(obj_room);
          add_action(std::move(a));
        }
        {
          GroundAction a;
          a.name = "place_" + agent + "_" + obj + "_on_" + furniture;
          a.actor = agent;
          a.cls = ActionClass::physical;
          a.pre = {held, in_room};
          a.add = {index_of("(is_on_top " + obj + " " + furniture + ")"), hand};
          if (tracked) a.add.push_back(obj_room);
          a.del = {held};
          add_action(std::move(a));
        }
        if (task_.scene.is_articulated(furniture)) {
          const int inside = index_of("(is_inside " + obj + " " + furniture + ")");
          const int open_f = index_of(open_atom(furniture));
          {
            GroundAction a;
            a.name = "pick_" + agent + "_" + obj + "_out_of_" + furniture;
            a.actor = agent;
            a.cls = ActionClass::physical;
            a.pre = {inside, open_f, in_room, hand};
            a.add = {held};
            a.del = {inside, hand};
            if (tracked) a.del.push_back(obj_room);
            add_action(std::move(a));
          }
          {
            GroundAction a;
            a.name = "place_" + agent + "_" + obj + "_in_" + furniture;
            a.actor = agent;
            a.cls = ActionClass::physical;
            a.pre = {held, open_f, in_room};
            a.add = {inside, hand};
            if (tracked) a.add.push_back(obj_room);
            a.del = {held};
            add_action(std::move(a));
          }
        }
      }
    }
  }

  // --- Step 6: initial state -------------------------------------------------

  std::set<int> init;
  std::set<std::string> holding_agents;
  for (const auto& [obj, placement] : placement_init) {
    init.insert(index_of(placement.canonical()));
    if (placement.name == "is_held_by") holding_agents.insert(placement.args[1].id);
    if (room_tracked_.count(obj) &&
        (placement.name == "is_on_top" || placement.name == "is_inside")) {
      if (auto room = task_.scene.room_of_furniture(placement.args[1].id)) {
        init.insert(index_of("(is_in_room " + obj + " " + *room + ")"));
      }
    }
  }
  for (const auto& agent : task_.agents) {
    if (!holding_agents.count(agent)) init.insert(index_of(hand_atom(agent)));
    auto spawn = task_.scene.spawn_room(agent);
    if (spawn && allowed_rooms(agent).count(*spawn)) {
      init.insert(index_of(room_atom(agent, *spawn)));
    }
  }
  std::set<std::string> open_init;
  std::set<std::string> locked_init;
  for (const auto& p : task_.init_overrides) {
    if (p.name == "is_on_top" || p.name == "is_inside" || p.name == "is_held_by" ||
        p.name == "is_on_floor") {
      continue;  // placements already folded in; last override won
    }
    if (p.name == "is_open") {
      open_init.insert(p.args.front().id);
    } else if (p.name == "is_closed") {
      // default; nothing to record
    } else if (p.name == "is_locked" || p.name == "is_locked_permanent") {
      locked_init.insert(p.args.front().id);
      init.insert(index_of(p.canonical()));
    } else {
      init.insert(index_of(p.canonical()));
    }
  }
  for (const auto& f : open_tracked_) {
    init.insert(index_of(open_init.count(f) ? open_atom(f) : closed_atom(f)));
  }
  for (const auto& f : lock_tracked_) {
    init.insert(index_of(locked_init.count(f) ? "(is_locked " + f + ")"
                                              : "(is_unlocked " + f + ")"));
  }
  for (const auto& [from, to] : task_.comm_edges()) {
    init.insert(index_of("(can_communicate " + from + " " + to + ")"));
  }
  for (const auto& m : task_.mechanics) {
    switch (m.kind) {
      case MechanicKind::room_restriction:
        for (const auto& room : m.rooms) {
          init.insert(index_of("(is_restricted " + m.agent + " " + room + ")"));
        }
        break;
      case MechanicKind::remote_control:
        init.insert(index_of("(" + remote_predicate(m.effect) + " " + m.trigger + " " +
                             m.target + ")"));
        break;
      case MechanicKind::state_mirroring:
        init.insert(index_of("(" + std::string(m.mode == MirrorMode::same ? "mirrors"
                                                                          : "mirrors_closed") +
                             " " + m.first + " " + m.second + ")"));
        break;
      case MechanicKind::inverse_state:
        init.insert(index_of("(is_inverse " + m.furniture + ")"));
        break;
      default:
        break;
    }
  }
  for (const auto& [idx, agent] : problem_.tokens) init.insert(idx);

  // Secret-seeded knowledge: an agent starts knowing a chain fact when its
  // secrets name every entity in the fact and the fact holds initially.
  for (std::size_t c = 0; c < chains_.size(); ++c) {
    const Chain& chain = chains_[c];
    FactId leaf = fact_digest(chain.leaf);
    bool leaf_true = init.count(index_of(leaf.canonical)) > 0;
    if (!leaf_true) continue;
    for (std::size_t i = 0; i < chain.agents.size(); ++i) {
      auto mentioned = task_.secret_entities(chain.agents[i]);
      bool all = true;
      for (const auto& arg : chain.leaf.args) {
        if (!mentioned.count(arg.id)) all = false;
      }
      if (all && !chain.leaf.args.empty()) init.insert(chain_fluents[c].layer1[i]);
    }
  }

  problem_.init.assign(init.begin(), init.end());

  // --- Step 5: classical goal -------------------------------------------------

  std::set<int> goal;
  for (const auto& pred : physical_goal_) goal.insert(index_of(pred.canonical()));
  for (std::size_t c = 0; c < chains_.size(); ++c) {
    for (int idx : chain_fluents[c].node_fluent) goal.insert(idx);
  }
  problem_.goal.assign(goal.begin(), goal.end());

  std::set<int> ladder;
  for (int g : problem_.goal) {
    const auto* meta = problem_.knowledge_meta(g);
    if (meta == nullptr || meta->layer < 2) continue;
    std::string layer1 = "(knows_" + meta->holder + "_" + digest8(meta->leaf_canonical) + ")";
    if (declared(layer1)) {
      int idx = index_of(layer1);
      if (!goal.count(idx)) ladder.insert(idx);
    }
  }
  problem_.goal_ladder.assign(ladder.begin(), ladder.end());

  return problem_;
}

}  // namespace

std::string to_string(ActionClass cls) {
  switch (cls) {
    case ActionClass::physical: return "physical";
    case ActionClass::observe: return "observe";
    case ActionClass::inform: return "inform";
    case ActionClass::inform_nested: return "inform_nested";
  }
  return "?";
}

int CompiledProblem::fluent_index(const std::string& atom) const {
  for (std::size_t i = 0; i < fluents.size(); ++i) {
    if (fluents[i] == atom) return static_cast<int>(i);
  }
  return -1;
}

const KnowledgeFluentMeta* CompiledProblem::knowledge_meta(int fluent) const {
  for (const auto& k : knowledge) {
    if (k.fluent == fluent) return &k;
  }
  return nullptr;
}

CompiledProblem compile(const Task& task) { return Builder(task).build(); }

std::string explain_compilation(const CompiledProblem& problem) {
  std::ostringstream out;
  auto count_class = [&](ActionClass cls) {
    return std::count_if(problem.actions.begin(), problem.actions.end(),
                         [&](const GroundAction& a) { return a.cls == cls; });
  };

  out << "Step 1: knowledge predicates (" << problem.knowledge.size() << ")\n";
  if (problem.knowledge.empty()) out << "  (vacuous: no K-operators in the goal)\n";
  for (const auto& k : problem.knowledge) {
    out << "  (" << k.symbol << ") ; layer " << k.layer << ", " << k.holder << " over "
        << k.about << "\n";
  }

  auto list_class = [&](ActionClass cls) {
    for (const auto& a : problem.actions) {
      if (a.cls != cls) continue;
      out << "  " << a.name << "\n";
    }
  };
  out << "Step 2: observe operators (" << count_class(ActionClass::observe) << ")\n";
  if (count_class(ActionClass::observe) == 0) out << "  (vacuous)\n";
  list_class(ActionClass::observe);
  out << "Step 3: fact inform operators (" << count_class(ActionClass::inform) << ")\n";
  if (count_class(ActionClass::inform) == 0) out << "  (vacuous)\n";
  list_class(ActionClass::inform);
  out << "Step 4: nested inform operators (" << count_class(ActionClass::inform_nested) << ")\n";
  if (count_class(ActionClass::inform_nested) == 0) out << "  (vacuous)\n";
  list_class(ActionClass::inform_nested);

  out << "Step 5: classical goal (" << problem.goal.size() << " conjuncts)\n";
  for (int g : problem.goal) out << "  " << problem.fluents[g] << "\n";

  out << "Step 6: initial state (" << problem.init.size() << " fluents, "
      << problem.tokens.size() << " message tokens)\n";
  for (const auto& [idx, agent] : problem.tokens) {
    out << "  " << problem.fluents[idx] << " ; budget token of " << agent << "\n";
  }

  out << "Physical operators (" << count_class(ActionClass::physical) << ")\n";
  return out.str();
}

nlohmann::ordered_json compiled_to_json(const CompiledProblem& problem) {
  ojson doc;
  doc["fluents"] = problem.fluents;
  ojson actions = ojson::array();
  for (const auto& a : problem.actions) {
    ojson j;
    j["name"] = a.name;
    if (a.actor) {
      j["actor"] = *a.actor;
    } else {
      j["actor"] = nullptr;
    }
    j["class"] = to_string(a.cls);
    j["pre"] = a.pre;
    j["add"] = a.add;
    j["del"] = a.del;
    actions.push_back(j);
  }
  doc["actions"] = actions;
  doc["init"] = problem.init;
  doc["goal"] = problem.goal;
  ojson knowledge = ojson::array();
  for (const auto& k : problem.knowledge) {
    knowledge.push_back({{"fluent", k.fluent},
                         {"layer", k.layer},
                         {"holder", k.holder},
                         {"symbol", k.symbol},
                         {"about", k.about},
                         {"leaf", k.leaf_canonical}});
  }
  doc["knowledge"] = knowledge;
  ojson tokens = ojson::array();
  for (const auto& [idx, agent] : problem.tokens) {
    tokens.push_back({{"fluent", idx}, {"agent", agent}});
  }
  doc["tokens"] = tokens;
  doc["goal_ladder"] = problem.goal_ladder;
  return doc;
}

CompiledProblem compiled_from_json(const nlohmann::ordered_json& doc) {
  CompiledProblem p;
  try {
    p.fluents = doc.at("fluents").get<std::vector<std::string>>();
    for (const auto& j : doc.at("actions")) {
      GroundAction a;
      a.name = j.at("name").get<std::string>();
      if (!j.at("actor").is_null()) a.actor = j.at("actor").get<std::string>();
      std::string cls = j.at("class").get<std::string>();
      if (cls == "physical") a.cls = ActionClass::physical;
      else if (cls == "observe") a.cls = ActionClass::observe;
      else if (cls == "inform") a.cls = ActionClass::inform;
      else if (cls == "inform_nested") a.cls = ActionClass::inform_nested;
      else throw malformed_problem("unknown action class " + cls);
      a.pre = j.at("pre").get<std::vector<int>>();
      a.add = j.at("add").get<std::vector<int>>();
      a.del = j.at("del").get<std::vector<int>>();
      p.actions.push_back(std::move(a));
    }
    p.init = doc.at("init").get<std::vector<int>>();
    p.goal = doc.at("goal").get<std::vector<int>>();
    for (const auto& j : doc.at("knowledge")) {
      p.knowledge.push_back({j.at("fluent").get<int>(), j.at("layer").get<int>(),
                             j.at("holder").get<std::string>(), j.at("symbol").get<std::string>(),
                             j.at("about").get<std::string>(), j.at("leaf").get<std::string>()});
    }
    for (const auto& j : doc.at("tokens")) {
      p.tokens.emplace_back(j.at("fluent").get<int>(), j.at("agent").get<std::string>());
    }
    p.goal_ladder = doc.at("goal_ladder").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw malformed_problem(e.what());
  }
  const int n = static_cast<int>(p.fluents.size());
  auto check = [&](const std::vector<int>& v, const std::string& what) {
    for (int idx : v) {
      if (idx < 0 || idx >= n) throw malformed_problem(what + " references fluent " +
                                                       std::to_string(idx) + " out of range");
    }
  };
  check(p.init, "init");
  check(p.goal, "goal");
  for (const auto& a : p.actions) {
    check(a.pre, a.name);
    check(a.add, a.name);
    check(a.del, a.name);
  }
  return p;
}

namespace {

// "(name a b)" -> name + args
std::pair<std::string, std::vector<std::string>> split_atom(const std::string& atom) {
  std::string body = atom.substr(1, atom.size() - 2);
  std::istringstream in(body);
  std::string head;
  in >> head;
  std::vector<std::string> args;
  std::string tok;
  while (in >> tok) args.push_back(tok);
  return {head, args};
}

}  // namespace

PddlPair to_pddl(const CompiledProblem& problem) {
  std::map<std::string, std::size_t> predicates;
  std::set<std::string> objects;
  for (const auto& fluent : problem.fluents) {
    auto [head, args] = split_atom(fluent);
    predicates[head] = args.size();
    for (const auto& arg : args) objects.insert(arg);
  }

  std::ostringstream domain;
  domain << "(define (domain epitask)\n  (:requirements :strips)\n  (:predicates\n";
  for (const auto& [name, arity] : predicates) {
    domain << "    (" << name;
    for (std::size_t i = 0; i < arity; ++i) domain << " ?x" << i;
    domain << ")\n";
  }
  domain << "  )\n";
  for (const auto& a : problem.actions) {
    domain << "  (:action " << a.name << "\n    :parameters ()\n    :precondition (and";
    for (int idx : a.pre) domain << " " << problem.fluents[idx];
    domain << ")\n    :effect (and";
    for (int idx : a.add) domain << " " << problem.fluents[idx];
    for (int idx : a.del) domain << " (not " << problem.fluents[idx] << ")";
    domain << ")\n  )\n";
  }
  domain << ")\n";

  std::ostringstream prob;
  prob << "(define (problem epitask-problem)\n  (:domain epitask)\n  (:objects";
  for (const auto& obj : objects) prob << " " << obj;
  prob << ")\n  (:init\n";
  for (int idx : problem.init) prob << "    " << problem.fluents[idx] << "\n";
  prob << "  )\n  (:goal (and\n";
  for (int idx : problem.goal) prob << "    " << problem.fluents[idx] << "\n";
  prob << "  ))\n)\n";

  return {domain.str(), prob.str()};
}

}  // namespace epitask
