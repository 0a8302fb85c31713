#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "epitask/errors.hpp"
#include "epitask/task.hpp"
#include "fixtures.hpp"

using namespace epitask;

namespace {

Task load_task(const std::string& name) {
  return parse_task(testsupport::read_fixture(name), std::nullopt, testsupport::fixtures_dir());
}

}  // namespace

TEST_CASE("two-agent walkthrough task parses") {
  Task task = load_task("walkthrough_task.json");
  CHECK(task.agents == std::vector<std::string>{"agent_0", "agent_1"});
  CHECK(k_depth(task.goal) == 2);
  CHECK(task.message_budget("agent_1") == 2);
  CHECK(task.message_budget("agent_0") == std::nullopt);
  CHECK(task.can_communicate("agent_1", "agent_0"));
  CHECK_FALSE(task.can_communicate("agent_0", "agent_1"));
  CHECK(task.is_barred("agent_0", "office_1"));
  CHECK(task.category == TaskCategory::cooperative);
  int bandwidth_bindings = 0;
  for (const auto& m : task.mechanics) {
    if (m.kind == MechanicKind::limited_bandwidth) ++bandwidth_bindings;
  }
  CHECK(bandwidth_bindings == 1);
}

TEST_CASE("four-agent chain task parses with the full communication graph") {
  Task task = load_task("relay_chain_task.json");
  CHECK(task.agents.size() == 4);
  CHECK(k_depth(task.goal) == 4);
  int restrictions = 0;
  for (const auto& m : task.mechanics) {
    if (m.kind == MechanicKind::room_restriction) ++restrictions;
  }
  CHECK(restrictions == 4);
  CHECK(task.comm_edges().size() == 6);
  for (const auto& agent : task.agents) CHECK(task.message_budget(agent) == 1);
  CHECK_FALSE(task.can_communicate("agent_0", "agent_3"));
}

TEST_CASE("minimal single-agent physical task has no mechanics") {
  std::string text = R"json({
    "task": "open up",
    "scene": "walkthrough_scene.json",
    "agents": ["agent_1"],
    "pddl_goal": "(is_open cabinet_34)",
    "category": "cooperative",
    "target_depth": 0,
    "turn_budget": 5
  })json";
  Task task = parse_task(text, std::nullopt, testsupport::fixtures_dir());
  CHECK(task.mechanics.empty());
  CHECK(validate_task(task).ok());
  // no restricted_communication binding: complete digraph minus self loops
  CHECK(task.comm_edges().empty());  // single agent, no pairs
}

TEST_CASE("task round-trips through serialize/parse") {
  Task task = load_task("relay_chain_task.json");
  Task again = parse_task(serialize_task(task));
  CHECK(again.agents == task.agents);
  CHECK(again.goal == task.goal);
  CHECK(again.secrets == task.secrets);
  CHECK(again.target_depth == task.target_depth);
  CHECK(again.comm_edges() == task.comm_edges());
  CHECK(serialize_task(again) == serialize_task(task));
}

TEST_CASE("validator accepts the walkthrough fixture") {
  CHECK(validate_task(load_task("walkthrough_task.json")).ok());
}

TEST_CASE("articulated-only constraint on open/close goals") {
  Task task = load_task("walkthrough_task.json");
  task.goal = parse_goal("(is_open table_22)");
  task.target_depth = 0;
  TaskReport report = validate_task(task);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].check == "articulated_only");
  CHECK(report.violations[0].entity == "table_22");
}

TEST_CASE("mechanic well-formedness violations") {
  Task task = load_task("walkthrough_task.json");
  MechanicBinding bad;
  bad.kind = MechanicKind::remote_control;
  bad.trigger = "cabinet_34";
  bad.target = "cabinet_34";
  bad.effect = RemoteEffect::state;
  task.mechanics.push_back(bad);
  TaskReport report = validate_task(task);
  bool found = false;
  for (const auto& v : report.violations) {
    if (v.check == "mechanic_wellformed" && v.message.find("trigger equals target") != std::string::npos) {
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("an agent spawned inside its own barred room is rejected") {
  Task task = load_task("walkthrough_task.json");
  MechanicBinding m;
  m.kind = MechanicKind::room_restriction;
  m.agent = "agent_1";
  m.rooms = {"office_1"};  // agent_1 spawns there
  task.mechanics.push_back(m);
  TaskReport report = validate_task(task);
  bool found = false;
  for (const auto& v : report.violations) {
    if (v.message.find("spawns in barred room") != std::string::npos) found = true;
  }
  CHECK(found);
}

TEST_CASE("unresolved goal entities and dangling secret references are violations") {
  Task task = load_task("walkthrough_task.json");
  task.goal = parse_goal("(and (is_on_top bowl_1 table_22) (is_on_top phantom_3 table_22))");
  task.target_depth = 0;
  task.secrets["agent_0"].push_back("the key is under doormat_77");
  TaskReport report = validate_task(task);
  std::set<std::string> checks;
  for (const auto& v : report.violations) checks.insert(v.check);
  CHECK(checks.count("goal_entity_resolves"));
  CHECK(checks.count("secret_dangling_reference"));
}

TEST_CASE("validation reports serialize one violation per JSON line") {
  Task task = load_task("walkthrough_task.json");
  task.goal = parse_goal("(and (is_open table_22) (is_on_top phantom_3 table_22))");
  task.target_depth = 0;
  std::string jsonl = task_report_to_jsonl(validate_task(task));
  int lines = 0;
  std::istringstream in(jsonl);
  std::string line;
  while (std::getline(in, line)) {
    auto doc = nlohmann::ordered_json::parse(line);
    CHECK(doc.contains("check"));
    CHECK(doc.contains("entity"));
    CHECK(doc.contains("message"));
    ++lines;
  }
  CHECK(lines == static_cast<int>(validate_task(task).violations.size()));
}

TEST_CASE("category constraints") {
  Task task = load_task("walkthrough_task.json");
  task.category = TaskCategory::mixed;
  TaskReport report = validate_task(task);
  bool found = false;
  for (const auto& v : report.violations) {
    if (v.check == "category_consistent") found = true;
  }
  CHECK(found);
}

TEST_CASE("depth gate") {
  Task task = load_task("walkthrough_task.json");
  DepthGate gate = check_depth_gate(task);
  CHECK(gate.pass);
  CHECK(gate.measured == 2);

  task.target_depth = 3;
  gate = check_depth_gate(task);
  CHECK_FALSE(gate.pass);
  CHECK(gate.measured == 2);

  task.goal = parse_goal("(is_open cabinet_34)");
  task.target_depth = 0;
  CHECK(check_depth_gate(task).pass);
}

TEST_CASE("depth audit: valid walkthrough, inflated unrestricted variant") {
  Task task = load_task("walkthrough_task.json");
  DepthAudit audit = audit_depth_validity(task);
  CHECK(audit.verdict == DepthAudit::Verdict::valid);
  CHECK_FALSE(audit.multi_hop);
  REQUIRE(audit.findings.size() == 2);
  CHECK(audit.findings[0].outer_agent == "agent_0");
  CHECK(audit.findings[0].outer_barred);
  CHECK(audit.findings[1].fact_room == "office_1");

  // Neither agent restricted from the fact room: inflated.
  std::erase_if(task.mechanics,
                [](const MechanicBinding& m) { return m.kind == MechanicKind::room_restriction; });
  audit = audit_depth_validity(task);
  CHECK(audit.verdict == DepthAudit::Verdict::inflated);
}

TEST_CASE("depth audit: chain fixture is valid with multi-hop relay flags") {
  Task task = load_task("relay_chain_task.json");
  DepthAudit audit = audit_depth_validity(task);
  CHECK(audit.verdict == DepthAudit::Verdict::valid);
  CHECK(audit.multi_hop);
  REQUIRE(audit.findings.size() == 4);
  // agent_1 can reach agent_0 directly; the deeper relay nodes cannot.
  CHECK_FALSE(audit.findings[1].multi_hop);
  CHECK(audit.findings[2].multi_hop);  // agent_2
  CHECK(audit.findings[3].multi_hop);  // agent_3
}

TEST_CASE("depth audit: depth-0 goal is vacuously valid") {
  Task task = load_task("walkthrough_task.json");
  task.goal = parse_goal("(is_open cabinet_34)");
  task.target_depth = 0;
  DepthAudit audit = audit_depth_validity(task);
  CHECK(audit.verdict == DepthAudit::Verdict::valid);
  CHECK(audit.findings.empty());
}

TEST_CASE("depth audit reports unlocatable facts without failing") {
  Task task = load_task("walkthrough_task.json");
  // bowl_1 has no placement in the scene and the goal names no furniture
  task.goal = parse_goal("(K agent_0 (is_clean bowl_1))");
  task.target_depth = 1;
  DepthAudit audit = audit_depth_validity(task);
  REQUIRE(audit.issues.size() == 1);
  CHECK(audit.issues[0].find("UnlocatableFact") != std::string::npos);
}

TEST_CASE("seed sampling: stratified draw matches the rounded ratio") {
  std::vector<PoolEntry> pool;
  for (int i = 0; i < 10; ++i) pool.push_back({"fail_" + std::to_string(i), false});
  for (int i = 0; i < 10; ++i) pool.push_back({"pass_" + std::to_string(i), true});

  SampleResult result = sample_seed_tasks(pool, 0.8, 5, 7);
  REQUIRE(result.ids.size() == 5);
  int failed = 0;
  for (const auto& id : result.ids) {
    if (id.rfind("fail_", 0) == 0) ++failed;
  }
  CHECK(failed == 4);  // round-half-up(0.8*5) = 4
  CHECK_FALSE(result.shortage.has_value());

  result = sample_seed_tasks(pool, 0.9, 10, 7);
  failed = 0;
  for (const auto& id : result.ids) {
    if (id.rfind("fail_", 0) == 0) ++failed;
  }
  CHECK(failed == 9);
}

TEST_CASE("seed sampling: degenerate stratum falls back with a shortage note") {
  std::vector<PoolEntry> pool;
  for (int i = 0; i < 6; ++i) pool.push_back({"pass_" + std::to_string(i), true});
  SampleResult result = sample_seed_tasks(pool, 1.0, 4, 3);
  REQUIRE(result.ids.size() == 4);
  REQUIRE(result.shortage.has_value());
  CHECK(result.shortage->find("failed stratum short") != std::string::npos);
}

TEST_CASE("seed sampling: deterministic, duplicate-free, errors on empty pool") {
  std::vector<PoolEntry> pool;
  for (int i = 0; i < 30; ++i) pool.push_back({"t" + std::to_string(i), i % 3 == 0});
  auto a = sample_seed_tasks(pool, 0.5, 10, 42);
  auto b = sample_seed_tasks(pool, 0.5, 10, 42);
  CHECK(a.ids == b.ids);
  std::set<std::string> unique(a.ids.begin(), a.ids.end());
  CHECK(unique.size() == a.ids.size());
  CHECK_THROWS_AS(sample_seed_tasks({}, 0.5, 1, 0), empty_pool);
}
