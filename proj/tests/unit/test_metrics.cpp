#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "epitask/errors.hpp"
#include "epitask/metrics.hpp"

using namespace epitask;
using ojson = nlohmann::ordered_json;

namespace {

// Synthetic records: `passes` of the tasks*n attempt slots pass, spread
// round-robin so no task soaks up all the passes.
std::vector<RunRecord> synthetic_cell(int tasks, int n, int passes, const std::string& model,
                                      const std::string& split = "standard") {
  std::vector<RunRecord> records;
  int granted = 0;
  for (int attempt = 1; attempt <= n; ++attempt) {
    for (int t = 0; t < tasks; ++t) {
      RunRecord record;
      record.task_id = "task_" + std::to_string(t);
      record.model = model;
      record.split = split;
      record.attempt = attempt;
      record.functional_pass = granted < passes;
      record.probes["k_probe_1"] =
          record.functional_pass ? ProbeOutcome::correct : ProbeOutcome::incorrect;
      ++granted;
      records.push_back(record);
    }
  }
  return records;
}

std::vector<std::optional<bool>> slots_from(const std::vector<RunRecord>& records) {
  std::vector<std::optional<bool>> slots;
  for (const auto& r : records) slots.push_back(r.functional_pass);
  return slots;
}

}  // namespace

TEST_CASE("avg_with_se reproduces published cell arithmetic") {
  // 40 tasks x 3 attempts with 8 passes: 6.7% +/- 2.3%
  auto [p, se] = avg_with_se(slots_from(synthetic_cell(40, 3, 8, "m")));
  CHECK(p == doctest::Approx(0.0667).epsilon(0.01));
  CHECK(100 * p == doctest::Approx(6.7).epsilon(0.01));
  CHECK(100 * se == doctest::Approx(2.3).epsilon(0.03));

  // all attempts pass: degenerate variance
  auto [one, zero] = avg_with_se({true, true, true});
  CHECK(one == 1.0);
  CHECK(zero == 0.0);

  // single task, attempts [pass, fail, fail]
  auto [third, third_se] = avg_with_se({true, false, false});
  CHECK(third == doctest::Approx(1.0 / 3.0));
  CHECK(third_se == doctest::Approx(std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / 3.0)));

  CHECK_THROWS_AS(avg_with_se({}), empty_cell);
}

TEST_CASE("missing attempts count as non-passes") {
  std::vector<std::optional<bool>> slots = {true, std::nullopt, std::nullopt};
  auto [p, se] = avg_with_se(slots);
  CHECK(p == doctest::Approx(1.0 / 3.0));
  (void)se;
}

TEST_CASE("pass_at_k and pass_all_k") {
  CHECK(pass_at_k({false, false, true}, 3));
  CHECK_FALSE(pass_at_k({}, 3));  // fully missing group
  CHECK(pass_at_k({true, true, true}, 3));

  CHECK_FALSE(pass_all_k({true, true, false}, 3));
  CHECK(pass_all_k({true, true, true}, 3));
  CHECK_FALSE(pass_all_k({true, true}, 3));  // missing third attempt

  CHECK_THROWS_AS(pass_at_k({true, true, true, true}, 3), schema_violation);
}

TEST_CASE("literal pass requires every probe correct") {
  RunRecord record;
  record.probes["k_probe_1"] = ProbeOutcome::correct;
  record.probes["k_probe_2"] = ProbeOutcome::correct;
  CHECK(literal_pass(record));
  record.probes["k_probe_2"] = ProbeOutcome::unanswered;
  CHECK_FALSE(literal_pass(record));
  record.probes["k_probe_2"] = ProbeOutcome::incorrect;
  CHECK_FALSE(literal_pass(record));
}

TEST_CASE("a synthetic cell built for 45.0% literal lands exactly there") {
  auto records = synthetic_cell(40, 3, 54, "m", "hard");  // 54/120 = 45.0%
  ScoreTable table = score_table(records, 3);
  const ScoreCell& cell = table.at({"m", "hard", "overall"});
  CHECK(100 * cell.literal.avg == doctest::Approx(45.0).epsilon(1e-9));
  // one probe per run, correct exactly on passing runs
  CHECK(100 * cell.per_probe_rate == doctest::Approx(45.0).epsilon(1e-9));
}

TEST_CASE("score table keeps the ordering invariant pass_all <= avg <= pass_at") {
  auto records = synthetic_cell(40, 3, 47, "gemini-pro");  // 39.2 +/- 4.5 shape
  ScoreTable table = score_table(records, 3);
  const CellStats& f = table.at({"gemini-pro", "standard", "overall"}).functional;
  CHECK(100 * f.avg == doctest::Approx(39.2).epsilon(0.01));
  CHECK(100 * f.se == doctest::Approx(4.5).epsilon(0.03));
  CHECK(f.pass_all_k <= f.avg);
  CHECK(f.avg <= f.pass_at_k);
}

TEST_CASE("a cell where every task has a failing attempt scores 0.0% exact") {
  std::vector<RunRecord> records;
  for (int t = 0; t < 8; ++t) {
    for (int attempt = 1; attempt <= 3; ++attempt) {
      RunRecord r;
      r.task_id = "t" + std::to_string(t);
      r.model = "m";
      r.split = "hard";
      r.attempt = attempt;
      r.functional_pass = attempt != 2;  // one guaranteed failure per task
      records.push_back(r);
    }
  }
  ScoreTable table = score_table(records, 3);
  const CellStats& f = table.at({"m", "hard", "overall"}).functional;
  CHECK(f.pass_all_k == 0.0);
  CHECK(f.pass_at_k == 1.0);
}

TEST_CASE("scopes split by category with an overall roll-up") {
  std::vector<RunRecord> records;
  for (int t = 0; t < 4; ++t) {
    for (int attempt = 1; attempt <= 3; ++attempt) {
      RunRecord r;
      r.task_id = "t" + std::to_string(t);
      r.model = "m";
      r.category = t < 2 ? "cooperative" : "mixed";
      r.attempt = attempt;
      r.functional_pass = t == 0;
      records.push_back(r);
    }
  }
  ScoreTable table = score_table(records, 3);
  CHECK(table.at({"m", "standard", "cooperative"}).functional.avg == doctest::Approx(0.5));
  CHECK(table.at({"m", "standard", "mixed"}).functional.avg == doctest::Approx(0.0));
  CHECK(table.at({"m", "standard", "overall"}).functional.avg == doctest::Approx(0.25));
}

TEST_CASE("records round-trip through JSONL") {
  auto records = synthetic_cell(3, 3, 4, "m");
  std::string jsonl;
  for (const auto& r : records) jsonl += run_record_to_jsonl_line(r) + "\n";
  auto parsed = parse_run_records(jsonl);
  REQUIRE(parsed.size() == records.size());
  CHECK(parsed[0].task_id == records[0].task_id);
  CHECK(parsed[0].functional_pass == records[0].functional_pass);
  CHECK(parsed[0].probes == records[0].probes);
}

TEST_CASE("metrics are permutation invariant") {
  auto records = synthetic_cell(10, 3, 11, "m");
  ScoreTable a = score_table(records, 3);
  std::reverse(records.begin(), records.end());
  ScoreTable b = score_table(records, 3);
  CHECK(score_table_to_csv(a) == score_table_to_csv(b));
}

TEST_CASE("pool updates label failures by pass@k over the union of models") {
  Pool pool;
  pool.tasks.push_back({"t1", true, ojson::object(), {}});

  auto make = [](const std::string& task, const std::string& model, int attempt, bool pass) {
    RunRecord r;
    r.task_id = task;
    r.model = model;
    r.attempt = attempt;
    r.functional_pass = pass;
    return r;
  };

  // t1: three failures under one model -> failed
  pool = update_pool(std::move(pool),
                     {make("t1", "a", 1, false), make("t1", "a", 2, false),
                      make("t1", "a", 3, false)});
  CHECK_FALSE(pool.tasks[0].passed);

  // one pass under a second model flips it back (union over target models)
  pool = update_pool(std::move(pool), {make("t1", "b", 1, true)});
  CHECK(pool.tasks[0].passed);

  // empty updates change nothing; repeats are idempotent
  Pool before = pool;
  pool = update_pool(std::move(pool), {});
  CHECK(serialize_pool(pool) == serialize_pool(before));
  pool = update_pool(std::move(pool), {make("t1", "b", 1, true)});
  CHECK(serialize_pool(pool) == serialize_pool(before));
}

TEST_CASE("pool serialization round-trips") {
  Pool pool;
  pool.tasks.push_back({"t1", false, ojson{{"depth", 2}}, {}});
  RunRecord r;
  r.task_id = "t1";
  r.model = "m";
  r.attempt = 1;
  r.functional_pass = true;
  pool.tasks[0].history.push_back(r);
  Pool again = parse_pool(serialize_pool(pool));
  CHECK(serialize_pool(again) == serialize_pool(pool));
}
