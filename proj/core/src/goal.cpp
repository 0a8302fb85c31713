#include "epitask/goal.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "epitask/errors.hpp"

namespace epitask {

namespace {

constexpr EntityKind R = EntityKind::room;
constexpr EntityKind F = EntityKind::furniture;
constexpr EntityKind O = EntityKind::object;
constexpr EntityKind A = EntityKind::agent;
constexpr EntityKind I = EntityKind::item;

std::vector<PredicateSig> build_table() {
  using PC = PredicateClass;
  return {
      // spatial / relational
      {"is_on_top", {O, F}, PC::spatial},
      {"is_inside", {O, F}, PC::spatial},
      {"is_in_room", {O, R}, PC::spatial},
      {"is_on_floor", {O}, PC::spatial},
      {"is_next_to", {O, O}, PC::spatial},
      // unary state
      {"is_open", {F}, PC::unary_state},
      {"is_closed", {F}, PC::unary_state},
      {"is_clean", {O}, PC::unary_state},
      {"is_dirty", {O}, PC::unary_state},
      {"is_filled", {O}, PC::unary_state},
      {"is_empty", {O}, PC::unary_state},
      {"is_powered_on", {O}, PC::unary_state},
      {"is_locked", {F}, PC::unary_state},
      // agent
      {"is_held_by", {O, A}, PC::agent},
      {"agent_in_room", {A, R}, PC::agent},
      {"has_item", {A, I}, PC::agent},
      {"has_at_least", {A, I}, PC::agent},
      {"has_most", {A, I}, PC::agent},
      {"item_in_container", {I, F}, PC::agent},
      // mechanic, init only
      {"is_inverse", {F}, PC::mechanic_init_only},
      {"mirrors", {F, F}, PC::mechanic_init_only},
      {"mirrors_closed", {F, F}, PC::mechanic_init_only},
      {"controls", {F, F}, PC::mechanic_init_only},
      {"controls_unlocked", {F, F}, PC::mechanic_init_only},
      {"controls_closed", {F, F}, PC::mechanic_init_only},
      {"controls_locks", {F, F}, PC::mechanic_init_only},
      {"is_restricted", {A, R}, PC::mechanic_init_only},
      {"is_locked_permanent", {F}, PC::mechanic_init_only},
      {"requires_item", {F, I}, PC::mechanic_init_only},
      {"unlocks", {O, F}, PC::mechanic_init_only},
      {"irreversible_enabled", {O}, PC::mechanic_init_only},
      {"interaction_locked", {O}, PC::mechanic_init_only},
      {"can_communicate", {A, A}, PC::mechanic_init_only},
  };
}

// --- s-expression reader -------------------------------------------------

struct SExpr {
  bool is_atom = false;
  std::string atom;
  std::vector<SExpr> items;
};

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  SExpr read_document() {
    skip_ws();
    if (at_end()) throw syntax_error("empty goal document");
    SExpr expr = read_expr();
    skip_ws();
    if (!at_end()) throw syntax_error("trailing content after goal expression");
    return expr;
  }

 private:
  SExpr read_expr() {
    skip_ws();
    if (at_end()) throw syntax_error("unexpected end of input");
    if (text_[pos_] == '(') {
      ++pos_;
      SExpr list;
      while (true) {
        skip_ws();
        if (at_end()) throw syntax_error("unbalanced parenthesis");
        if (text_[pos_] == ')') {
          ++pos_;
          return list;
        }
        list.items.push_back(read_expr());
      }
    }
    if (text_[pos_] == ')') throw syntax_error("unexpected ')'");
    SExpr atom;
    atom.is_atom = true;
    while (!at_end() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '(' && text_[pos_] != ')' && text_[pos_] != ';') {
      atom.atom.push_back(text_[pos_++]);
    }
    if (atom.atom.empty()) throw syntax_error("empty atom");
    return atom;
  }

  void skip_ws() {
    while (!at_end()) {
      char c = text_[pos_];
      if (c == ';') {
        while (!at_end() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  bool at_end() const { return pos_ >= text_.size(); }

  const std::string& text_;
  std::size_t pos_ = 0;
};

Formula build_formula(const SExpr& expr) {
  if (expr.is_atom) {
    throw syntax_error("bare atom \"" + expr.atom + "\" is not a formula");
  }
  if (expr.items.empty()) throw syntax_error("empty list is not a formula");
  const SExpr& head = expr.items.front();
  if (!head.is_atom) throw syntax_error("formula head must be an atom");

  if (head.atom == "and") {
    if (expr.items.size() < 2) throw syntax_error("(and) needs at least one conjunct");
    std::vector<Formula> children;
    for (std::size_t i = 1; i < expr.items.size(); ++i) {
      children.push_back(build_formula(expr.items[i]));
    }
    return Formula::make_and(std::move(children));
  }
  if (head.atom == "or") {
    throw disjunction_unsupported("the goal grammar has no disjunction");
  }
  if (head.atom == "K") {
    if (expr.items.size() != 3 || !expr.items[1].is_atom) {
      throw syntax_error("K expects (K agent formula)");
    }
    return Formula::make_know(expr.items[1].atom, build_formula(expr.items[2]));
  }

  const PredicateSig* sig = find_predicate(head.atom);
  if (sig == nullptr) throw unknown_predicate("\"" + head.atom + "\"");
  if (sig->cls == PredicateClass::mechanic_init_only) {
    throw init_only_predicate_in_goal("\"" + head.atom + "\" is init-only");
  }
  if (expr.items.size() - 1 != sig->arity()) {
    throw arity_error("\"" + head.atom + "\" expects " + std::to_string(sig->arity()) +
                      " arguments, got " + std::to_string(expr.items.size() - 1));
  }
  Predicate pred;
  pred.name = head.atom;
  for (std::size_t i = 1; i < expr.items.size(); ++i) {
    if (!expr.items[i].is_atom) throw syntax_error("predicate arguments must be atoms");
    pred.args.push_back({sig->arg_kinds[i - 1], expr.items[i].atom});
  }
  return Formula::make_predicate(std::move(pred));
}

void print_into(const Formula& f, std::string& out) {
  switch (f.kind) {
    case Formula::Kind::predicate:
      out += f.pred.canonical();
      return;
    case Formula::Kind::conjunction: {
      out += "(and";
      for (const auto& child : f.children) {
        out += ' ';
        print_into(child, out);
      }
      out += ')';
      return;
    }
    case Formula::Kind::know:
      out += "(K " + f.agent + " ";
      print_into(f.know_body(), out);
      out += ')';
      return;
  }
}

void collect_probes(const Formula& f, int level, const std::string& outer_agent,
                    std::vector<ProbeSpec>& out) {
  switch (f.kind) {
    case Formula::Kind::predicate:
      return;
    case Formula::Kind::conjunction:
      for (const auto& child : f.children) collect_probes(child, level, outer_agent, out);
      return;
    case Formula::Kind::know: {
      ProbeSpec probe;
      probe.probe_id = "k_probe_" + std::to_string(out.size() + 1);
      probe.subject = f.agent;
      probe.observer = outer_agent.empty() ? f.agent : outer_agent;
      probe.nesting_level = level;
      auto leaves = collect_leaves(f.know_body());
      probe.fact = leaves.front();
      out.push_back(std::move(probe));
      collect_probes(f.know_body(), level + 1, f.agent, out);
      return;
    }
  }
}

}  // namespace

const std::vector<PredicateSig>& predicate_table() {
  static const std::vector<PredicateSig> table = build_table();
  return table;
}

const PredicateSig* find_predicate(const std::string& name) {
  for (const auto& sig : predicate_table()) {
    if (sig.name == name) return &sig;
  }
  return nullptr;
}

std::optional<std::string> complement_predicate(const std::string& name) {
  if (name == "is_open") return "is_closed";
  if (name == "is_closed") return "is_open";
  if (name == "is_clean") return "is_dirty";
  if (name == "is_dirty") return "is_clean";
  if (name == "is_filled") return "is_empty";
  if (name == "is_empty") return "is_filled";
  return std::nullopt;
}

std::string Predicate::canonical() const {
  std::string out = "(" + name;
  for (const auto& arg : args) out += " " + arg.id;
  out += ")";
  return out;
}

Formula Formula::make_predicate(Predicate p) {
  Formula f;
  f.kind = Kind::predicate;
  f.pred = std::move(p);
  return f;
}

Formula Formula::make_and(std::vector<Formula> children) {
  // Canonical form: nested conjunctions are flattened and a singleton
  // conjunction collapses to its child.
  std::vector<Formula> flat;
  for (auto& child : children) {
    if (child.kind == Kind::conjunction) {
      for (auto& grand : child.children) flat.push_back(std::move(grand));
    } else {
      flat.push_back(std::move(child));
    }
  }
  if (flat.size() == 1) return std::move(flat.front());
  Formula f;
  f.kind = Kind::conjunction;
  f.children = std::move(flat);
  return f;
}

Formula Formula::make_know(std::string agent, Formula body) {
  Formula f;
  f.kind = Kind::know;
  f.agent = std::move(agent);
  f.children.push_back(std::move(body));
  return f;
}

Formula parse_goal(const std::string& text) {
  Reader reader(text);
  return build_formula(reader.read_document());
}

Predicate parse_ground_predicate(const std::string& text) {
  Reader reader(text);
  SExpr expr = reader.read_document();
  if (expr.is_atom || expr.items.empty() || !expr.items.front().is_atom) {
    throw syntax_error("expected a single (predicate args...) form");
  }
  const std::string& name = expr.items.front().atom;
  const PredicateSig* sig = find_predicate(name);
  if (sig == nullptr) throw unknown_predicate("\"" + name + "\"");
  if (expr.items.size() - 1 != sig->arity()) {
    throw arity_error("\"" + name + "\" expects " + std::to_string(sig->arity()) + " arguments");
  }
  Predicate pred;
  pred.name = name;
  for (std::size_t i = 1; i < expr.items.size(); ++i) {
    if (!expr.items[i].is_atom) throw syntax_error("predicate arguments must be atoms");
    pred.args.push_back({sig->arg_kinds[i - 1], expr.items[i].atom});
  }
  return pred;
}

std::string print_goal(const Formula& goal) {
  std::string out;
  print_into(goal, out);
  return out;
}

int k_depth(const Formula& goal) {
  switch (goal.kind) {
    case Formula::Kind::predicate:
      return 0;
    case Formula::Kind::conjunction: {
      int best = 0;
      for (const auto& child : goal.children) best = std::max(best, k_depth(child));
      return best;
    }
    case Formula::Kind::know:
      return 1 + k_depth(goal.know_body());
  }
  return 0;
}

std::optional<Formula> physical_projection(const Formula& goal) {
  switch (goal.kind) {
    case Formula::Kind::predicate:
      return goal;
    case Formula::Kind::know:
      return std::nullopt;
    case Formula::Kind::conjunction: {
      std::vector<Formula> kept;
      for (const auto& child : goal.children) {
        if (auto proj = physical_projection(child)) kept.push_back(std::move(*proj));
      }
      if (kept.empty()) return std::nullopt;
      return Formula::make_and(std::move(kept));
    }
  }
  return std::nullopt;
}

std::vector<ProbeSpec> extract_probes(const Formula& goal) {
  std::vector<ProbeSpec> out;
  collect_probes(goal, 1, "", out);
  return out;
}

std::vector<Predicate> collect_leaves(const Formula& goal) {
  std::vector<Predicate> out;
  switch (goal.kind) {
    case Formula::Kind::predicate:
      out.push_back(goal.pred);
      break;
    case Formula::Kind::conjunction:
      for (const auto& child : goal.children) {
        auto sub = collect_leaves(child);
        out.insert(out.end(), sub.begin(), sub.end());
      }
      break;
    case Formula::Kind::know: {
      auto sub = collect_leaves(goal.know_body());
      out.insert(out.end(), sub.begin(), sub.end());
      break;
    }
  }
  return out;
}

}  // namespace epitask
