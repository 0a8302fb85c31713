#pragma once

#include <stdexcept>
#include <string>

namespace epitask {

// Base for everything this library throws on bad input or bad state.
// Rule violations discovered by the validators are *data* (reports), not
// exceptions; only malformed documents and contract breaches throw.
class error : public std::runtime_error {
 public:
  error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct malformed_document : error {
  explicit malformed_document(const std::string& m) : error("MalformedDocument", m) {}
};

struct missing_field : error {
  explicit missing_field(const std::string& m) : error("MissingField", m) {}
};

struct type_mismatch : error {
  explicit type_mismatch(const std::string& m) : error("TypeMismatch", m) {}
};

struct schema_violation : error {
  explicit schema_violation(const std::string& m) : error("SchemaViolation", m) {}
};

struct syntax_error : error {
  explicit syntax_error(const std::string& m) : error("SyntaxError", m) {}
};

struct unknown_predicate : error {
  explicit unknown_predicate(const std::string& m) : error("UnknownPredicate", m) {}
};

struct arity_error : error {
  explicit arity_error(const std::string& m) : error("ArityError", m) {}
};

struct init_only_predicate_in_goal : error {
  explicit init_only_predicate_in_goal(const std::string& m)
      : error("InitOnlyPredicateInGoal", m) {}
};

struct disjunction_unsupported : error {
  explicit disjunction_unsupported(const std::string& m)
      : error("DisjunctionUnsupported", m) {}
};

struct unknown_entity : error {
  explicit unknown_entity(const std::string& m) : error("UnknownEntity", m) {}
};

struct non_ground_fact : error {
  explicit non_ground_fact(const std::string& m) : error("NonGroundFact", m) {}
};

struct validation_failed : error {
  explicit validation_failed(const std::string& m) : error("ValidationFailed", m) {}
};

struct depth_gate_failed : error {
  explicit depth_gate_failed(const std::string& m) : error("DepthGateFailed", m) {}
};

struct unlocatable_fact : error {
  explicit unlocatable_fact(const std::string& m) : error("UnlocatableFact", m) {}
};

struct malformed_problem : error {
  explicit malformed_problem(const std::string& m) : error("MalformedProblem", m) {}
};

struct unknown_action : error {
  explicit unknown_action(const std::string& m) : error("UnknownAction", m) {}
};

struct not_your_turn : error {
  explicit not_your_turn(const std::string& m) : error("NotYourTurn", m) {}
};

struct malformed_action : error {
  explicit malformed_action(const std::string& m) : error("MalformedAction", m) {}
};

struct empty_pool : error {
  explicit empty_pool(const std::string& m) : error("EmptyPool", m) {}
};

struct empty_cell : error {
  explicit empty_cell(const std::string& m) : error("EmptyCell", m) {}
};

}  // namespace epitask
