#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "attncausal/attention.hpp"
#include "attncausal/cleann.hpp"
#include "attncausal/pag.hpp"

namespace attncausal {

struct SimulateOptions {
  int n = 5;
  double density = 0.3;
  int n_latent = 0;
  int seeds = 100;
  std::uint64_t first_seed = 0;
  double alpha = 0.05;
  CiMode mode = CiMode::exact;
  double n_eff = kDefaultEffectiveSamples;
};

struct SimulateRow {
  std::uint64_t seed = 0;
  int observed = 0;
  int latent = 0;
  int true_edges = 0;
  int learned_edges = 0;
  bool match = false;
  long ci_tests = 0;
};

struct SimulateSummary {
  std::vector<SimulateRow> rows;
  double match_rate = 0.0;
};

// Per seed: random SCM, its total-effect matrix as attention, covariance
// restricted to observed nodes, learned PAG, comparison with the truth.
SimulateSummary cmd_simulate(const SimulateOptions& options);
std::string simulate_csv(const SimulateSummary& s);

struct DiscoverOptions {
  double alpha = 0.05;
  CiMode mode = CiMode::exact;
  double n_eff = kDefaultEffectiveSamples;
  HeadAggregation head_agg;
};

struct DiscoverResult {
  Pag pag;
  std::vector<std::string> warnings;
  nlohmann::json json;  // Pag JSON plus a "meta" object
};

DiscoverResult cmd_discover(const nlohmann::json& attention, const DiscoverOptions& options);

enum class ExplainMethod { cleann, pure, smart };
ExplainMethod parse_method(std::string_view text);
const char* method_name(ExplainMethod m);

struct ExplainRun {
  std::vector<nlohmann::json> results;  // one per session, input order
  std::vector<nlohmann::json> top_k;    // {"session", "top_k"} per session
  std::vector<std::string> warnings;
};

// Sessions come from the trace meta unless given explicitly. Per-session
// failures become result lines with an "error" field.
ExplainRun cmd_explain(const OracleTrace& trace, ExplainMethod method, const CleannConfig& config,
                       const std::vector<std::vector<std::string>>& sessions = {});

struct LengthBucket {
  std::string method;
  int length = 0;
  int count = 0;
  int found = 0;
  double mean = 0.0;
  double std = 0.0;  // population
};

struct MetricsReport {
  int records = 0;
  std::map<std::string, std::vector<int>> set_sizes;  // found only, ascending
  std::vector<LengthBucket> buckets;
  int k = 0;
  // method -> counts for positions 1..k, then "out", then "none"
  std::map<std::string, std::vector<std::pair<std::string, int>>> positions;
};

// results: explain output lines. top_k: {"session", "top_k"} lines.
MetricsReport cmd_metrics(const std::vector<nlohmann::json>& results, const std::vector<nlohmann::json>& top_k);
// Writes set_sizes.csv, length_buckets.csv and replacement_positions.csv.
void write_metrics(const MetricsReport& report, const std::string& out_dir);

std::vector<nlohmann::json> read_jsonl_file(const std::string& path);

}  // namespace attncausal
