#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "epitask/compiler.hpp"
#include "epitask/errors.hpp"
#include "epitask/planner.hpp"
#include "fixtures.hpp"

using namespace epitask;

namespace {

Task load_task(const std::string& name) {
  return parse_task(testsupport::read_fixture(name), std::nullopt, testsupport::fixtures_dir());
}

int count_class(const CompiledProblem& p, ActionClass cls) {
  return static_cast<int>(std::count_if(p.actions.begin(), p.actions.end(),
                                        [&](const GroundAction& a) { return a.cls == cls; }));
}

bool init_has(const CompiledProblem& p, const std::string& atom) {
  int idx = p.fluent_index(atom);
  return idx >= 0 && std::find(p.init.begin(), p.init.end(), idx) != p.init.end();
}

bool goal_has(const CompiledProblem& p, const std::string& atom) {
  int idx = p.fluent_index(atom);
  return idx >= 0 && std::find(p.goal.begin(), p.goal.end(), idx) != p.goal.end();
}

}  // namespace

TEST_CASE("fact digests are deterministic, order-sensitive, and match the golden values") {
  Predicate fact = parse_ground_predicate("(is_on_top bowl_1 table_22)");
  Predicate swapped = parse_ground_predicate("(is_on_top table_22 bowl_1)");
  FactId a = fact_digest(fact);
  FactId b = fact_digest(fact);
  CHECK(a == b);
  CHECK(a.digest != fact_digest(swapped).digest);

  // Golden values computed once with an independent FNV-1a implementation.
  CHECK(a.digest == "690d7b4b");
  CHECK(fact_digest(parse_ground_predicate("(is_open cabinet_34)")).digest == "46c24950");
  CHECK(fact_digest(parse_ground_predicate("(is_on_top box_7 cabinet_64)")).digest == "23b21069");

  Predicate variable = fact;
  variable.args[0].id = "?x";
  CHECK_THROWS_AS(fact_digest(variable), non_ground_fact);
}

TEST_CASE("walkthrough compile reproduces the step-by-step inventory") {
  CompiledProblem p = compile(load_task("walkthrough_task.json"));

  // Step 1: two layer-1 fluents plus one layer-2 fluent for the outer agent.
  REQUIRE(p.knowledge.size() == 3);
  std::set<int> layers;
  for (const auto& k : p.knowledge) layers.insert(k.layer);
  CHECK(layers == std::set<int>{1, 2});
  CHECK(init_has(p, "(is_held_by bowl_1 agent_1)"));

  const std::string leaf_digest = "690d7b4b";
  CHECK(p.fluent_index("(knows_agent_0_" + leaf_digest + ")") >= 0);
  CHECK(p.fluent_index("(knows_agent_1_" + leaf_digest + ")") >= 0);

  // Step 2: exactly one observe operator (agent_0 is barred from the room).
  REQUIRE(count_class(p, ActionClass::observe) == 1);
  for (const auto& a : p.actions) {
    if (a.cls != ActionClass::observe) continue;
    CHECK(a.actor == "agent_1");
    CHECK(a.del.empty());
    std::set<std::string> pre;
    for (int i : a.pre) pre.insert(p.fluents[i]);
    CHECK(pre == std::set<std::string>{"(is_on_top bowl_1 table_22)",
                                       "(agent_in_room agent_1 office_1)"});
  }

  // Steps 3-4: fact and nested informs, one copy per token.
  CHECK(count_class(p, ActionClass::inform) == 2);
  CHECK(count_class(p, ActionClass::inform_nested) == 2);
  for (const auto& a : p.actions) {
    if (a.cls == ActionClass::inform || a.cls == ActionClass::inform_nested) {
      CHECK(a.del.size() == 1);  // consumes exactly one message token
    }
  }

  // Step 5: four-conjunct classical goal, no Know operators anywhere.
  CHECK(p.goal.size() == 4);
  CHECK(goal_has(p, "(is_on_top bowl_1 table_22)"));
  CHECK(goal_has(p, "(is_open cabinet_34)"));
  CHECK(goal_has(p, "(knows_agent_1_" + leaf_digest + ")"));
  const auto* layer1 = p.knowledge_meta(p.fluent_index("(knows_agent_1_" + leaf_digest + ")"));
  REQUIRE(layer1 != nullptr);
  std::string nested_symbol = "knows_agent_0_" + digest8(layer1->symbol);
  CHECK(goal_has(p, "(" + nested_symbol + ")"));
  for (const auto& fluent : p.fluents) CHECK(fluent.find("(K ") == std::string::npos);

  // Step 6: both budget tokens in the initial state.
  REQUIRE(p.tokens.size() == 2);
  CHECK(init_has(p, "(msg_tok_agent_1_1)"));
  CHECK(init_has(p, "(msg_tok_agent_1_2)"));
  CHECK(init_has(p, "(can_communicate agent_1 agent_0)"));
  CHECK(init_has(p, "(is_restricted agent_0 office_1)"));
}

TEST_CASE("physical-only goal compiles with steps 1-4 vacuous") {
  Task task = load_task("walkthrough_task.json");
  task.goal = parse_goal("(and (is_on_top bowl_1 table_22) (is_open cabinet_34))");
  task.target_depth = 0;
  CompiledProblem p = compile(task);
  CHECK(p.knowledge.empty());
  CHECK(count_class(p, ActionClass::observe) == 0);
  CHECK(count_class(p, ActionClass::inform) == 0);
  CHECK(count_class(p, ActionClass::inform_nested) == 0);
  CHECK(p.goal.size() == 2);
}

TEST_CASE("conflicting placement overrides resolve to the last one") {
  Task task = load_task("walkthrough_task.json");
  task.init_overrides.clear();
  task.init_overrides.push_back(parse_ground_predicate("(is_on_top bowl_1 counter_7)"));
  task.init_overrides.push_back(parse_ground_predicate("(is_held_by bowl_1 agent_1)"));
  CompiledProblem p = compile(task);
  int on_counter = p.fluent_index("(is_on_top bowl_1 counter_7)");
  int held = p.fluent_index("(is_held_by bowl_1 agent_1)");
  CHECK(std::find(p.init.begin(), p.init.end(), on_counter) == p.init.end());
  CHECK(std::find(p.init.begin(), p.init.end(), held) != p.init.end());
}

TEST_CASE("is_in_room goals are maintained across pick and place") {
  Task task = load_task("walkthrough_task.json");
  task.goal = parse_goal("(is_in_room bowl_1 office_1)");
  task.target_depth = 0;
  CompiledProblem p = compile(task);
  PlanResult result = solve(p);
  REQUIRE(result.verdict == PlanResult::Verdict::solvable);
  REQUIRE(result.plan.size() == 1);  // bowl starts held in the office
  CHECK(result.plan[0].rfind("place_agent_1_bowl_1", 0) == 0);
}

TEST_CASE("chain fixture compiles with one token per agent") {
  CompiledProblem p = compile(load_task("relay_chain_task.json"));
  REQUIRE(p.tokens.size() == 4);
  std::set<std::string> owners;
  for (const auto& [idx, agent] : p.tokens) owners.insert(agent);
  CHECK(owners.size() == 4);
  // secret-seeded initial knowledge for the outermost agent
  CHECK(init_has(p, "(knows_agent_0_23b21069)"));
  // layered fluents exist up to the chain depth
  int max_layer = 0;
  for (const auto& k : p.knowledge) max_layer = std::max(max_layer, k.layer);
  CHECK(max_layer == 4);
}

TEST_CASE("inform action count matches the closed form") {
  // out-degree(s) x layer-1 fluents of s x bandwidth(s), summed over senders
  CompiledProblem p = compile(load_task("relay_chain_task.json"));
  CHECK(count_class(p, ActionClass::inform) == 6);  // 6 edges x 1 fact x 1 token
  // nested targets with an edge from the inner holder: L2, L3, L4 + 2 proxies
  CHECK(count_class(p, ActionClass::inform_nested) == 5);
}

TEST_CASE("compile gates on validation and the depth gate") {
  Task task = load_task("walkthrough_task.json");
  task.target_depth = 3;
  CHECK_THROWS_AS(compile(task), depth_gate_failed);

  Task invalid = load_task("walkthrough_task.json");
  invalid.goal = parse_goal("(is_open table_22)");
  invalid.target_depth = 0;
  CHECK_THROWS_AS(compile(invalid), validation_failed);
}

TEST_CASE("a Know chain over a room-less fact is a hard error") {
  Task task = load_task("walkthrough_task.json");
  task.goal = parse_goal("(K agent_0 (is_clean bowl_1))");  // bowl_1 is unplaced
  task.target_depth = 1;
  CHECK_THROWS_AS(compile(task), unlocatable_fact);
}

TEST_CASE("compilation is deterministic") {
  Task task = load_task("relay_chain_task.json");
  std::string a = compiled_to_json(compile(task)).dump();
  std::string b = compiled_to_json(compile(task)).dump();
  CHECK(a == b);
}

TEST_CASE("no action deletes a knowledge fluent") {
  for (const auto* fixture : {"walkthrough_task.json", "relay_chain_task.json"}) {
    CompiledProblem p = compile(load_task(fixture));
    for (const auto& a : p.actions) {
      for (int d : a.del) CHECK(p.knowledge_meta(d) == nullptr);
    }
  }
}

TEST_CASE("explain lists every step with counts") {
  CompiledProblem p = compile(load_task("walkthrough_task.json"));
  std::string report = explain_compilation(p);
  CHECK(report.find("Step 1: knowledge predicates (3)") != std::string::npos);
  CHECK(report.find("Step 2: observe operators (1)") != std::string::npos);
  CHECK(report.find("Step 3: fact inform operators (2)") != std::string::npos);
  CHECK(report.find("Step 4: nested inform operators (2)") != std::string::npos);
  CHECK(report.find("Step 5: classical goal (4 conjuncts)") != std::string::npos);
  CHECK(report.find("(msg_tok_agent_1_2)") != std::string::npos);

  Task physical = load_task("walkthrough_task.json");
  physical.goal = parse_goal("(is_open cabinet_34)");
  physical.target_depth = 0;
  std::string vacuous = explain_compilation(compile(physical));
  CHECK(vacuous.find("(vacuous") != std::string::npos);

  std::string chain = explain_compilation(compile(load_task("relay_chain_task.json")));
  for (const auto* token : {"(msg_tok_agent_0_1)", "(msg_tok_agent_1_1)", "(msg_tok_agent_2_1)",
                            "(msg_tok_agent_3_1)"}) {
    CHECK(chain.find(token) != std::string::npos);
  }
  CHECK(chain.find("4 message tokens") != std::string::npos);
}

TEST_CASE("compiled problems round-trip through JSON") {
  CompiledProblem p = compile(load_task("walkthrough_task.json"));
  CompiledProblem q = compiled_from_json(compiled_to_json(p));
  CHECK(compiled_to_json(q).dump() == compiled_to_json(p).dump());
}

TEST_CASE("PDDL emission carries the walkthrough surface syntax") {
  CompiledProblem p = compile(load_task("walkthrough_task.json"));
  PddlPair pddl = to_pddl(p);
  CHECK(pddl.domain.find("(:requirements :strips)") != std::string::npos);
  CHECK(pddl.domain.find("observe_knows_agent_1_690d7b4b") != std::string::npos);
  CHECK(pddl.domain.find("(not (msg_tok_agent_1_1))") != std::string::npos);
  CHECK(pddl.problem.find("(msg_tok_agent_1_2)") != std::string::npos);
  CHECK(pddl.problem.find("(:goal (and") != std::string::npos);
}
