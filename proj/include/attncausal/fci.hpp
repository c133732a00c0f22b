#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attncausal/pag.hpp"

namespace attncausal {

// Answers "is i independent of j given z?". Must be a pure function of its
// arguments; failures are reported by throwing OracleError.
using CiOracle = std::function<bool(int i, int j, std::span<const int> z)>;

// Separating sets of the removed edges, keyed by unordered pair.
class SepsetTable {
 public:
  void record(int i, int j, std::vector<int> sepset);
  bool contains(int i, int j) const;
  // ArgumentError if the pair was never separated.
  const std::vector<int>& at(int i, int j) const;
  bool separates_with(int i, int j, int k) const;
  std::size_t size() const { return table_.size(); }
  const std::map<std::pair<int, int>, std::vector<int>>& entries() const { return table_; }

 private:
  static std::pair<int, int> key(int i, int j) { return i < j ? std::pair{i, j} : std::pair{j, i}; }
  std::map<std::pair<int, int>, std::vector<int>> table_;
};

struct FciOptions {
  int max_cond = -1;            // -1 means n - 2 (exhaustive)
  bool possible_dsep = true;    // run the Possible-D-Sep pruning pass
  bool strict = false;          // throw InconsistencyError instead of warning
};

struct SkeletonResult {
  Pag graph;  // circle marks on every remaining edge
  SepsetTable sepsets;
  long ci_tests = 0;
};

// PC-stable adjacency search followed by the Possible-D-Sep pass.
// Conditioning sets are enumerated in lexicographic index order.
SkeletonResult learn_skeleton(const CiOracle& ci, int n, const FciOptions& options = {},
                              std::vector<std::string> labels = {});

// Heads at k on both edges of every unshielded triple <i, k, j> with k not in
// sepset(i, j). Existing non-circle marks are kept (first write wins).
Pag orient_v_structures(const Pag& p, const SepsetTable& sepsets,
                        std::vector<std::string>* warnings = nullptr, bool strict = false);

// Orientation rules R1-R4 and R8-R10 (the complete set absent selection
// bias), iterated in fixed order until nothing changes.
Pag apply_orientation_rules(const Pag& p, const SepsetTable& sepsets,
                            std::vector<std::string>* warnings = nullptr, bool strict = false);

struct PagLearning {
  Pag pag;
  SepsetTable sepsets;
  std::vector<std::string> warnings;
  long ci_tests = 0;
};

PagLearning learn_pag_detailed(const CiOracle& ci, int n, const FciOptions& options = {},
                               std::vector<std::string> labels = {});

inline Pag learn_pag(const CiOracle& ci, int n, const FciOptions& options = {},
                     std::vector<std::string> labels = {}) {
  return learn_pag_detailed(ci, n, options, std::move(labels)).pag;
}

// Algorithm identifier recorded in output metadata.
inline constexpr const char* kPagLearnerName = "fci-complete-rules";

}  // namespace attncausal
