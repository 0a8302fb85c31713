#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "epitask/compiler.hpp"
#include "epitask/errors.hpp"
#include "epitask/metrics.hpp"
#include "epitask/planner.hpp"
#include "epitask/simulator.hpp"
#include "epitask/task.hpp"
#include "json.hpp"

namespace {

using ojson = nlohmann::ordered_json;
using namespace epitask;

constexpr int kExitOk = 0;
constexpr int kExitVerdict = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open \"" + path + "\"");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string dirname_of(const std::string& path) {
  auto slash = path.find_last_of('/');
  if (slash == std::string::npos) return ".";
  return path.substr(0, slash);
}

void emit(const ojson& doc) { std::cout << doc.dump(2) << "\n"; }

int cmd_validate(const std::string& scene_path, const std::string& task_path) {
  Scene scene = parse_scene(slurp(scene_path));
  Task task = parse_task(slurp(task_path), scene, dirname_of(task_path));

  SceneReport scene_report = validate_scene(scene);
  TaskReport task_report = validate_task(task);
  DepthGate gate = check_depth_gate(task);
  DepthAudit audit = audit_depth_validity(task);

  ojson out;
  out["scene"] = scene_report_to_json(scene_report);
  out["task"] = task_report_to_json(task_report);
  out["depth"] = {{"pass", gate.pass}, {"measured", gate.measured}, {"target", gate.target}};
  out["audit"] = depth_audit_to_json(audit);
  bool ok = scene_report.ok() && task_report.ok() && gate.pass &&
            audit.verdict == DepthAudit::Verdict::valid;
  out["ok"] = ok;
  emit(out);
  return ok ? kExitOk : kExitVerdict;
}

int cmd_compile(const std::string& task_path, const std::string& output_path, bool want_pddl) {
  Task task = parse_task(slurp(task_path), std::nullopt, dirname_of(task_path));
  CompiledProblem problem = compile(task);

  ojson compiled = compiled_to_json(problem);
  if (!output_path.empty()) {
    std::ofstream out(output_path);
    if (!out) throw UsageError("cannot write \"" + output_path + "\"");
    out << compiled.dump(2) << "\n";
  }
  if (want_pddl) {
    PddlPair pddl = to_pddl(problem);
    std::string base = output_path.empty() ? task_path : output_path;
    std::ofstream dom(base + ".domain.pddl");
    std::ofstream prob(base + ".problem.pddl");
    if (!dom || !prob) throw UsageError("cannot write PDDL next to \"" + base + "\"");
    dom << pddl.domain;
    prob << pddl.problem;
  }

  ojson out;
  out["fluents"] = problem.fluents.size();
  out["actions"] = problem.actions.size();
  out["goal_conjuncts"] = problem.goal.size();
  out["knowledge_fluents"] = problem.knowledge.size();
  out["tokens"] = problem.tokens.size();
  out["report"] = explain_compilation(problem);
  if (!output_path.empty()) out["written"] = output_path;
  emit(out);
  return kExitOk;
}

int cmd_plan(const std::string& compiled_path, std::uint64_t budget) {
  CompiledProblem problem = compiled_from_json(ojson::parse(slurp(compiled_path)));
  PlanResult result = solve(problem, budget);
  emit(plan_result_to_json(result));
  return result.verdict == PlanResult::Verdict::solvable ? kExitOk : kExitVerdict;
}

int cmd_simulate(const std::string& task_path, const std::string& scripts_path,
                 const std::string& answers_path) {
  Task task = parse_task(slurp(task_path), std::nullopt, dirname_of(task_path));
  auto scripts = parse_scripts(slurp(scripts_path));
  ojson answers = answers_path.empty() ? ojson::object() : ojson::parse(slurp(answers_path));
  EpisodeResult result = run_episode(task, scripts, answers);
  emit(episode_result_to_json(result));
  return result.functional_success &&
                 result.termination != EpisodeResult::Termination::error
             ? kExitOk
             : kExitVerdict;
}

int cmd_metrics(const std::string& records_path, int k, const std::string& csv_path) {
  auto records = parse_run_records(slurp(records_path));
  ScoreTable table = score_table(records, k);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw UsageError("cannot write \"" + csv_path + "\"");
    out << score_table_to_csv(table);
  }
  emit(score_table_to_json(table));
  return kExitOk;
}

int cmd_sample_seeds(const std::string& pool_path, double ratio, int count, std::uint64_t seed) {
  Pool pool = parse_pool(slurp(pool_path));
  std::vector<PoolEntry> entries;
  for (const auto& task : pool.tasks) entries.push_back({task.task_id, task.passed});
  SampleResult result = sample_seed_tasks(entries, ratio, count, seed);
  ojson out;
  out["selected"] = result.ids;
  if (result.shortage) out["shortage"] = *result.shortage;
  emit(out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"epitask: epistemic task compilation, solvability, and scoring pipeline"};
  app.require_subcommand(1);

  std::string scene_path, task_path, output_path, scripts_path, answers_path, records_path,
      pool_path, csv_path, compiled_path;
  bool want_pddl = false;
  std::uint64_t budget = kDefaultNodeBudget;
  if (const char* env = std::getenv("EPITASK_NODE_BUDGET")) {
    budget = std::strtoull(env, nullptr, 10);
  }
  int k = 3;
  double ratio = 0.8;
  int count = 0;
  std::uint64_t seed = 0;

  auto* validate = app.add_subcommand("validate", "structural checks, depth gate, depth audit");
  validate->add_option("scene", scene_path, "scene JSON")->required();
  validate->add_option("task", task_path, "task JSON")->required();

  auto* compile_cmd = app.add_subcommand("compile", "compile a task to a classical problem");
  compile_cmd->add_option("task", task_path, "task JSON (with scene key)")->required();
  compile_cmd->add_option("-o,--output", output_path, "write compiled problem JSON here");
  compile_cmd->add_flag("--pddl", want_pddl, "also emit classical PDDL domain/problem text");

  auto* plan = app.add_subcommand("plan", "prove or refute solvability of a compiled problem");
  plan->add_option("compiled", compiled_path, "compiled problem JSON")->required();
  plan->add_option("--budget", budget, "search node budget (env EPITASK_NODE_BUDGET)");

  auto* simulate = app.add_subcommand("simulate", "run a scripted symbolic episode");
  simulate->add_option("task", task_path, "task JSON (with scene key)")->required();
  simulate->add_option("scripts", scripts_path, "JSONL action scripts")->required();
  simulate->add_option("answers", answers_path, "probe answers JSON");

  auto* metrics = app.add_subcommand("metrics", "aggregate run records into a score table");
  metrics->add_option("records", records_path, "run records JSONL")->required();
  metrics->add_option("--k", k, "attempts per task (default 3)");
  metrics->add_option("--csv", csv_path, "also write CSV here");

  auto* sample = app.add_subcommand("sample-seeds", "stratified seed-task sampling");
  sample->add_option("pool", pool_path, "pool JSON")->required();
  sample->add_option("--ratio", ratio, "failure ratio rho")->required();
  sample->add_option("--count", count, "number of seeds")->required();
  sample->add_option("--seed", seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    ojson out{{"error", e.what()}, {"kind", "usage"}};
    emit(out);
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(scene_path, task_path);
    if (compile_cmd->parsed()) return cmd_compile(task_path, output_path, want_pddl);
    if (plan->parsed()) return cmd_plan(compiled_path, budget);
    if (simulate->parsed()) return cmd_simulate(task_path, scripts_path, answers_path);
    if (metrics->parsed()) return cmd_metrics(records_path, k, csv_path);
    if (sample->parsed()) return cmd_sample_seeds(pool_path, ratio, count, seed);
  } catch (const UsageError& e) {
    ojson out{{"error", e.what()}, {"kind", "usage"}};
    emit(out);
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const epitask::error& e) {
    ojson out{{"error", e.what()}, {"kind", e.code()}};
    emit(out);
    std::cerr << e.what() << "\n";
    return kExitVerdict;
  } catch (const std::exception& e) {
    ojson out{{"error", e.what()}, {"kind", "internal"}};
    emit(out);
    std::cerr << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
