#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "attncausal/attention.hpp"
#include "attncausal/errors.hpp"
#include "attncausal/oracle.hpp"
#include "attncausal/pag.hpp"

namespace attncausal {

// True iff every internal node V of `path` is a potential collider (both
// marks at V are head or circle) or its two path neighbours are adjacent.
// A single edge always qualifies. ArgumentError when consecutive nodes are
// not adjacent or the path has fewer than two nodes.
bool is_pi_path(const Pag& p, std::span<const int> path);

struct PiTree {
  int root = -1;
  std::vector<int> parent;  // -1 for the root and unreached nodes
  std::vector<int> depth;   // -1 when unreached

  bool contains(int v) const { return depth.at(v) >= 0; }
  // Reached nodes other than the root, by depth then index.
  std::vector<int> members() const;
};

// Breadth-first over PI-path extensions from `target`; each node is kept at
// its minimum depth, ties going to the smallest predecessor.
PiTree build_pi_tree(const Pag& p, int target);

inline constexpr std::size_t kDefaultEnumerationCap = 10000;

class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, std::vector<std::vector<int>> partial)
      : Error(what), partial_(std::move(partial)) {}
  const std::vector<std::vector<int>>& partial() const { return partial_; }

 private:
  std::vector<std::vector<int>> partial_;
};

struct PiSetOptions {
  // time[v] orders nodes in time; members must precede the root. Empty means
  // node index order.
  std::vector<int> time;
  // Nodes that may never be members (e.g. mask slots).
  std::vector<int> frozen;
  std::size_t cap = kDefaultEnumerationCap;
};

// All node sets of size r that are reachable from the root by PI-paths
// running inside the set, precede the root in time, and are closed under
// explaining away: a node reachable through definite colliders of the set
// (heads on both sides, flanks non-adjacent) must itself be in the set.
// Ordered by mean tree depth, then lexicographically. Each set is sorted.
std::vector<std::vector<int>> enumerate_pi_sets(const PiTree& t, const Pag& p, int r,
                                                const PiSetOptions& options = {});

enum class ExplanationStatus { found, none_at_alpha };
const char* status_name(ExplanationStatus s);
ExplanationStatus parse_status(std::string_view text);

struct ExplanationResult {
  std::vector<int> set;  // sequence positions, ascending
  std::vector<std::string> set_tokens;
  std::optional<Prediction> alternative;
  int radius = 0;
  int queries = 0;
  ExplanationStatus status = ExplanationStatus::none_at_alpha;
  std::vector<std::vector<int>> query_log;
  std::vector<std::string> warnings;
};

struct FindOptions {
  PiSetOptions pi;
  int k = 5;
};

// Tries PI-sets by increasing radius and returns the first whose removal
// from `s` changes the top-1 prediction. PAG node i is position i of `s`
// for i < |s|; `target` may equal |s| for an appended prediction. Radii run
// up to |s| - 1 so a query never empties the sequence.
ExplanationResult find_explanation(const Pag& p, int target, const Prediction& prediction, ModelOracle& oracle,
                                   std::span<const std::string> s, const FindOptions& options = {});

enum class TargetPolicy { append, class_token };
TargetPolicy parse_target_policy(std::string_view text);
const char* target_policy_name(TargetPolicy p);

struct CleannConfig {
  CiMode mode = CiMode::exact;
  double alpha = 0.05;
  double n_eff = kDefaultEffectiveSamples;
  HeadAggregation head_agg;
  double ridge = kDefaultRidge;
  int max_cond = -1;
  TargetPolicy target_policy = TargetPolicy::append;
  int class_position = 0;
  std::optional<std::string> mask_token;
  int k = 5;
  std::size_t cap = kDefaultEnumerationCap;
};

// The abduced input shared by all explainers.
struct Abduction {
  std::vector<std::string> sequence;  // s as queried for deletions
  std::vector<std::string> abduced;   // s~, the nodes of the graph
  int target = 0;
  OracleResponse original;
  AggregatedAttention attention;
  std::vector<int> time;
  std::vector<int> frozen;
};

// Queries the oracle for the prediction and the attention over s~.
Abduction abduce(std::span<const std::string> s, ModelOracle& oracle, const CleannConfig& config);

struct CleannOutput {
  ExplanationResult result;
  Pag pag;
  Prediction original;
};

CleannOutput cleann(std::span<const std::string> s, ModelOracle& oracle, const CleannConfig& config = {});

// Greedy removal in descending attention from the target row.
ExplanationResult pure_attention_baseline(std::span<const std::string> s, ModelOracle& oracle,
                                          const CleannConfig& config = {});
// As above, but keeps a position only if it shrinks the gap between the
// original prediction's score and the best competitor.
ExplanationResult smart_attention_baseline(std::span<const std::string> s, ModelOracle& oracle,
                                           const CleannConfig& config = {});

// Descending target-row attention over removable positions, ties by index.
std::vector<int> attention_order(const Abduction& a);

nlohmann::json explanation_to_json(const ExplanationResult& r);
ExplanationResult explanation_from_json(const nlohmann::json& j);

}  // namespace attncausal
