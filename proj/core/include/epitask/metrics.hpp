#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epitask/simulator.hpp"
#include "json.hpp"

namespace epitask {

struct RunRecord {
  std::string task_id;
  std::string model;
  std::string split = "standard";
  std::optional<std::string> category;  // cooperative | mixed
  int attempt = 1;                      // 1..n
  bool functional_pass = false;
  std::map<std::string, ProbeOutcome> probes;
  int turns_used = 0;
  int messages_used = 0;
};

std::vector<RunRecord> parse_run_records(const std::string& jsonl);
std::string run_record_to_jsonl_line(const RunRecord& record);

// A run passes the literal measure only when every probe is correct.
bool literal_pass(const RunRecord& record);

struct CellStats {
  double avg = 0.0;
  double se = 0.0;
  double pass_at_k = 0.0;
  double pass_all_k = 0.0;
  int tasks = 0;
  int slots = 0;
};

// Mean per-run pass rate with binomial standard error over n fixed attempt
// slots per task; missing attempts count as failures.
std::pair<double, double> avg_with_se(const std::vector<std::optional<bool>>& slots);

// Union / exact metrics over one (task, model) attempt group of size <= k;
// missing attempts are failures.
bool pass_at_k(const std::vector<bool>& attempts, int k);
bool pass_all_k(const std::vector<bool>& attempts, int k);

struct ScoreKey {
  std::string model;
  std::string split;
  std::string scope;  // cooperative | mixed | overall

  bool operator<(const ScoreKey& other) const {
    return std::tie(model, split, scope) < std::tie(other.model, other.split, other.scope);
  }
};

struct ScoreCell {
  CellStats functional;
  CellStats literal;          // per-run: every probe correct
  double per_probe_rate = 0;  // per-probe accuracy across the cell's runs
};

using ScoreTable = std::map<ScoreKey, ScoreCell>;

ScoreTable score_table(const std::vector<RunRecord>& records, int k);

nlohmann::ordered_json score_table_to_json(const ScoreTable& table);
std::string score_table_to_csv(const ScoreTable& table);

// --- benchmark pool ---------------------------------------------------------

struct PoolTask {
  std::string task_id;
  bool passed = false;  // sampling label: pass_at_k under any target model
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
  std::vector<RunRecord> history;
};

struct Pool {
  std::vector<PoolTask> tasks;
};

Pool parse_pool(const std::string& text);
std::string serialize_pool(const Pool& pool);

// Refreshes pass/fail labels from new records: a task counts as passed when
// at least one recorded model reaches pass@k on it. Idempotent on repeats.
Pool update_pool(Pool pool, const std::vector<RunRecord>& records, int k = 3);

}  // namespace epitask
