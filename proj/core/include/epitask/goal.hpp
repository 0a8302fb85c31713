#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "epitask/scene.hpp"

namespace epitask {

enum class PredicateClass { spatial, unary_state, agent, mechanic_init_only };

struct PredicateSig {
  std::string name;
  std::vector<EntityKind> arg_kinds;
  PredicateClass cls;

  std::size_t arity() const { return arg_kinds.size(); }
};

// The fixed benchmark vocabulary. Lookup returns nullptr for unknown names.
const std::vector<PredicateSig>& predicate_table();
const PredicateSig* find_predicate(const std::string& name);

// Complementary predicate (is_open <-> is_closed, ...), empty when none.
std::optional<std::string> complement_predicate(const std::string& name);

struct Predicate {
  std::string name;
  std::vector<EntityRef> args;

  bool operator==(const Predicate&) const = default;
  std::string canonical() const;  // "(name arg1 arg2)"
};

// Goal formula: ground predicates, conjunctions, and K(agent, body) nodes.
struct Formula {
  enum class Kind { predicate, conjunction, know };

  Kind kind = Kind::predicate;
  Predicate pred;                  // Kind::predicate
  std::vector<Formula> children;   // Kind::conjunction, or the single know body
  std::string agent;               // Kind::know

  static Formula make_predicate(Predicate p);
  static Formula make_and(std::vector<Formula> children);
  static Formula make_know(std::string agent, Formula body);

  const Formula& know_body() const { return children.front(); }

  bool operator==(const Formula&) const = default;
};

struct ProbeSpec {
  std::string probe_id;    // "k_probe_N", depth-first 1-based
  std::string observer;    // agent asked to predict
  std::string subject;     // agent whose knowledge is probed
  Predicate fact;          // single leaf predicate
  int nesting_level = 1;   // Know-nesting depth counted from the root
};

Formula parse_goal(const std::string& text);
std::string print_goal(const Formula& goal);

// Single ground predicate, e.g. for task init overrides. Unlike parse_goal
// this accepts init-only mechanic predicates.
Predicate parse_ground_predicate(const std::string& text);

int k_depth(const Formula& goal);

// Conjunction of all predicate leaves reachable without crossing a Know
// node; nullopt when the goal is entirely epistemic.
std::optional<Formula> physical_projection(const Formula& goal);

std::vector<ProbeSpec> extract_probes(const Formula& goal);

// All predicate leaves of the formula, depth-first.
std::vector<Predicate> collect_leaves(const Formula& goal);

}  // namespace epitask
