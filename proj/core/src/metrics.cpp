#include "epitask/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "epitask/errors.hpp"

namespace epitask {

namespace {

using ojson = nlohmann::ordered_json;

ProbeOutcome probe_outcome_from(const std::string& s) {
  if (s == "correct") return ProbeOutcome::correct;
  if (s == "incorrect") return ProbeOutcome::incorrect;
  if (s == "unanswered") return ProbeOutcome::unanswered;
  throw schema_violation("unknown probe outcome \"" + s + "\"");
}

// slots per (task, model): attempt index -> pass
using Group = std::map<int, bool>;

struct CellInput {
  std::map<std::string, Group> functional;  // keyed by task id
  std::map<std::string, Group> literal;
};

CellStats cell_stats(const std::map<std::string, Group>& groups, int k) {
  CellStats stats;
  stats.tasks = static_cast<int>(groups.size());
  stats.slots = stats.tasks * k;
  if (groups.empty()) throw empty_cell("no records for cell");

  int passes = 0;
  int union_hits = 0;
  int exact_hits = 0;
  for (const auto& [task, group] : groups) {
    int group_passes = 0;
    for (const auto& [attempt, pass] : group) {
      if (pass) ++group_passes;
    }
    passes += group_passes;
    if (group_passes >= 1) ++union_hits;
    bool all = true;
    for (int attempt = 1; attempt <= k; ++attempt) {
      auto it = group.find(attempt);
      if (it == group.end() || !it->second) all = false;  // missing = non-pass
    }
    if (all) ++exact_hits;
  }
  double p = static_cast<double>(passes) / stats.slots;
  stats.avg = p;
  stats.se = std::sqrt(p * (1.0 - p) / stats.slots);
  stats.pass_at_k = static_cast<double>(union_hits) / stats.tasks;
  stats.pass_all_k = static_cast<double>(exact_hits) / stats.tasks;
  return stats;
}

}  // namespace

std::vector<RunRecord> parse_run_records(const std::string& jsonl) {
  std::vector<RunRecord> out;
  std::istringstream in(jsonl);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ojson doc;
    try {
      doc = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw malformed_document(std::string("run record: ") + e.what());
    }
    RunRecord record;
    record.task_id = doc.at("task_id").get<std::string>();
    record.model = doc.at("model").get<std::string>();
    if (doc.contains("split")) record.split = doc["split"].get<std::string>();
    if (doc.contains("category")) record.category = doc["category"].get<std::string>();
    record.attempt = doc.at("attempt").get<int>();
    record.functional_pass = doc.at("functional_pass").get<bool>();
    if (doc.contains("probes")) {
      for (const auto& [id, outcome] : doc["probes"].items()) {
        record.probes[id] = probe_outcome_from(outcome.get<std::string>());
      }
    }
    if (doc.contains("turns_used")) record.turns_used = doc["turns_used"].get<int>();
    if (doc.contains("messages_used")) record.messages_used = doc["messages_used"].get<int>();
    out.push_back(std::move(record));
  }
  return out;
}

std::string run_record_to_jsonl_line(const RunRecord& record) {
  ojson doc;
  doc["task_id"] = record.task_id;
  doc["model"] = record.model;
  doc["split"] = record.split;
  if (record.category) doc["category"] = *record.category;
  doc["attempt"] = record.attempt;
  doc["functional_pass"] = record.functional_pass;
  ojson probes = ojson::object();
  for (const auto& [id, outcome] : record.probes) probes[id] = to_string(outcome);
  doc["probes"] = probes;
  doc["turns_used"] = record.turns_used;
  doc["messages_used"] = record.messages_used;
  return doc.dump();
}

bool literal_pass(const RunRecord& record) {
  for (const auto& [id, outcome] : record.probes) {
    if (outcome != ProbeOutcome::correct) return false;
  }
  return true;
}

std::pair<double, double> avg_with_se(const std::vector<std::optional<bool>>& slots) {
  if (slots.empty()) throw empty_cell("avg_with_se over zero slots");
  int passes = 0;
  for (const auto& slot : slots) {
    if (slot.has_value() && *slot) ++passes;  // missing attempts are failures
  }
  double p = static_cast<double>(passes) / slots.size();
  double se = std::sqrt(p * (1.0 - p) / static_cast<double>(slots.size()));
  return {p, se};
}

bool pass_at_k(const std::vector<bool>& attempts, int k) {
  if (static_cast<int>(attempts.size()) > k) {
    throw schema_violation("group has more attempts than k");
  }
  return std::any_of(attempts.begin(), attempts.end(), [](bool b) { return b; });
}

bool pass_all_k(const std::vector<bool>& attempts, int k) {
  if (static_cast<int>(attempts.size()) > k) {
    throw schema_violation("group has more attempts than k");
  }
  if (static_cast<int>(attempts.size()) < k) return false;  // missing = non-pass
  return std::all_of(attempts.begin(), attempts.end(), [](bool b) { return b; });
}

ScoreTable score_table(const std::vector<RunRecord>& records, int k) {
  std::map<ScoreKey, CellInput> cells;
  std::map<ScoreKey, std::pair<int, int>> probe_counts;  // correct, total
  for (const auto& record : records) {
    std::vector<std::string> scopes{"overall"};
    if (record.category) scopes.push_back(*record.category);
    for (const auto& scope : scopes) {
      ScoreKey key{record.model, record.split, scope};
      CellInput& cell = cells[key];
      cell.functional[record.task_id][record.attempt] = record.functional_pass;
      cell.literal[record.task_id][record.attempt] = literal_pass(record);
      for (const auto& [id, outcome] : record.probes) {
        probe_counts[key].second += 1;
        if (outcome == ProbeOutcome::correct) probe_counts[key].first += 1;
      }
    }
  }
  ScoreTable table;
  for (const auto& [key, input] : cells) {
    ScoreCell cell{cell_stats(input.functional, k), cell_stats(input.literal, k), 0.0};
    auto [correct, total] = probe_counts[key];
    if (total > 0) cell.per_probe_rate = static_cast<double>(correct) / total;
    table[key] = cell;
  }
  return table;
}

nlohmann::ordered_json score_table_to_json(const ScoreTable& table) {
  ojson out = ojson::array();
  for (const auto& [key, cell] : table) {
    ojson row;
    row["model"] = key.model;
    row["split"] = key.split;
    row["scope"] = key.scope;
    auto emit = [](const CellStats& stats) {
      return ojson{{"avg", stats.avg},
                   {"se", stats.se},
                   {"pass_at_k", stats.pass_at_k},
                   {"pass_all_k", stats.pass_all_k},
                   {"tasks", stats.tasks},
                   {"slots", stats.slots}};
    };
    row["functional"] = emit(cell.functional);
    row["literal"] = emit(cell.literal);
    row["per_probe_rate"] = cell.per_probe_rate;
    out.push_back(row);
  }
  return out;
}

std::string score_table_to_csv(const ScoreTable& table) {
  std::ostringstream out;
  out << "model,split,scope,"
         "functional_avg,functional_se,functional_pass_at_k,functional_pass_all_k,"
         "literal_avg,literal_se,literal_pass_at_k,literal_pass_all_k,per_probe_rate\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const auto& [key, cell] : table) {
    out << key.model << ',' << key.split << ',' << key.scope << ',' << cell.functional.avg << ','
        << cell.functional.se << ',' << cell.functional.pass_at_k << ','
        << cell.functional.pass_all_k << ',' << cell.literal.avg << ',' << cell.literal.se << ','
        << cell.literal.pass_at_k << ',' << cell.literal.pass_all_k << ','
        << cell.per_probe_rate << '\n';
  }
  return out.str();
}

Pool parse_pool(const std::string& text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw malformed_document(std::string("pool: ") + e.what());
  }
  Pool pool;
  if (!doc.is_object() || !doc.contains("tasks") || !doc["tasks"].is_array()) {
    throw schema_violation("pool document needs a \"tasks\" array");
  }
  for (const auto& t : doc["tasks"]) {
    PoolTask task;
    task.task_id = t.at("task_id").get<std::string>();
    task.passed = t.at("passed").get<bool>();
    if (t.contains("metadata")) task.metadata = t["metadata"];
    if (t.contains("history")) {
      for (const auto& line : t["history"]) {
        auto records = parse_run_records(line.get<std::string>());
        task.history.insert(task.history.end(), records.begin(), records.end());
      }
    }
    pool.tasks.push_back(std::move(task));
  }
  return pool;
}

std::string serialize_pool(const Pool& pool) {
  ojson doc;
  ojson tasks = ojson::array();
  for (const auto& task : pool.tasks) {
    ojson t;
    t["task_id"] = task.task_id;
    t["passed"] = task.passed;
    t["metadata"] = task.metadata;
    ojson history = ojson::array();
    for (const auto& record : task.history) history.push_back(run_record_to_jsonl_line(record));
    t["history"] = history;
    tasks.push_back(t);
  }
  doc["tasks"] = tasks;
  return doc.dump(2) + "\n";
}

Pool update_pool(Pool pool, const std::vector<RunRecord>& records, int k) {
  if (records.empty()) return pool;

  for (const auto& record : records) {
    PoolTask* task = nullptr;
    for (auto& t : pool.tasks) {
      if (t.task_id == record.task_id) task = &t;
    }
    if (task == nullptr) {
      pool.tasks.push_back({record.task_id, false, ojson::object(), {}});
      task = &pool.tasks.back();
    }
    bool duplicate = false;
    for (const auto& existing : task->history) {
      if (existing.model == record.model && existing.attempt == record.attempt &&
          existing.split == record.split) {
        duplicate = true;
      }
    }
    if (!duplicate) task->history.push_back(record);
  }

  // Label: passed iff some model's attempt group reaches pass@k.
  for (auto& task : pool.tasks) {
    if (task.history.empty()) continue;
    std::map<std::string, std::vector<bool>> by_model;
    for (const auto& record : task.history) {
      by_model[record.model].push_back(record.functional_pass);
    }
    bool passed = false;
    for (auto& [model, attempts] : by_model) {
      if (static_cast<int>(attempts.size()) > k) attempts.resize(k);
      if (pass_at_k(attempts, k)) passed = true;
    }
    task.passed = passed;
  }
  return pool;
}

}  // namespace epitask
