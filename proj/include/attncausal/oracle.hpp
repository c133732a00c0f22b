#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attncausal/attention.hpp"
#include "attncausal/scm.hpp"

namespace attncausal {

struct Prediction {
  std::string token;
  double score = 0.0;  // higher is better
  int rank = 1;        // 1-based
};

struct OracleResponse {
  std::vector<Prediction> top_k;
  AttentionTensor attention;

  const Prediction& top() const { return top_k.front(); }
};

// Checks the response invariants (non-empty, ranks 1..k, scores
// non-increasing, attention sized to the query). ArgumentError otherwise.
void validate_response(const OracleResponse& r, std::size_t query_length);

// Unit separator (0x1F) joins tokens into a canonical trace key.
inline constexpr char kKeySeparator = '\x1f';

// Throws ArgumentError for an empty list or a token containing the separator.
std::string canonical_key(std::span<const std::string> tokens);
std::vector<std::string> split_key(std::string_view key);
// Key with the separator shown as U+241F, for messages.
std::string printable_key(std::string_view key);

// A model that maps a token sequence to ranked predictions plus its
// deepest-layer attention.
class ModelOracle {
 public:
  virtual ~ModelOracle() = default;
  virtual OracleResponse query(std::span<const std::string> tokens, int k) = 0;
  virtual std::string model_id() const = 0;
};

struct TraceMeta {
  std::string model = "unknown";
  int k = 5;
  std::string head_agg = "mean";
  // Root sessions covered by the trace, in recording order. Optional in files.
  std::vector<std::vector<std::string>> sessions;
};

struct OracleTrace {
  TraceMeta meta;
  std::map<std::string, OracleResponse> records;
  // Keys in insertion order so writes are deterministic.
  std::vector<std::string> key_order;

  bool contains(const std::string& key) const { return records.count(key) > 0; }
  void insert(const std::string& key, OracleResponse response);
};

// JSON Lines: a meta line, then one {"key", "response"} object per record.
void write_trace(std::ostream& out, const OracleTrace& trace);
// ParseError carries the 1-based line number of the offending line.
OracleTrace read_trace(std::istream& in);
OracleTrace load_trace_file(const std::string& path);
void save_trace_file(const std::string& path, const OracleTrace& trace);

// Exact-key lookup; no fallback. Immutable and safe to share.
class ReplayOracle : public ModelOracle {
 public:
  explicit ReplayOracle(OracleTrace trace) : trace_(std::move(trace)) {}
  OracleResponse query(std::span<const std::string> tokens, int k) override;
  std::string model_id() const override { return trace_.meta.model; }
  const OracleTrace& trace() const { return trace_; }

 private:
  OracleTrace trace_;
};

// SCM-backed oracle whose correct explanations are decidable.
//
// Every SCM node carries a token label. Candidate nodes are the predictable
// outputs. For a query, the present nodes are those whose labels occur in
// the tokens; the model is reduced to present nodes, latents and the scored
// candidate (edges through absent nodes are dropped). The score of candidate
// c is the sum of total effects of present non-candidate token nodes on c in
// that reduced model. Attention is the total-effect matrix of the reduced
// model over the query positions (a Cholesky factor of the observed
// covariance when latents are present), optionally row-normalised in
// absolute value to mimic softmax output.
class SyntheticOracle : public ModelOracle {
 public:
  SyntheticOracle(ScmModel scm, std::vector<std::string> labels, std::vector<int> candidates,
                  std::optional<std::string> mask_token = std::nullopt, bool normalize_rows = false);

  OracleResponse query(std::span<const std::string> tokens, int k) override;
  std::string model_id() const override { return "synthetic-scm"; }

  const ScmModel& scm() const { return scm_; }
  int node_of(const std::string& token) const;
  // Ranked scores of all candidates for the given present set.
  std::vector<Prediction> score_candidates(std::span<const std::string> tokens) const;

 private:
  ScmModel scm_;
  std::vector<std::string> labels_;
  std::vector<int> candidates_;
  std::optional<std::string> mask_token_;
  bool normalize_rows_;
  std::map<std::string, int> index_;
};

struct HttpOracleOptions {
  std::string host = "127.0.0.1";
  int port = 8000;
  int retries = 2;  // extra attempts after the first
  std::chrono::milliseconds timeout{10000};
};

// JSON-over-HTTP client for the /v1 protocol. One in-flight request.
class HttpOracle : public ModelOracle {
 public:
  explicit HttpOracle(HttpOracleOptions options);
  OracleResponse query(std::span<const std::string> tokens, int k) override;
  std::string model_id() const override;

  struct Info {
    std::string model;
    int n_layers = 0;
    int n_heads = 0;
  };
  Info info();

 private:
  HttpOracleOptions options_;
  std::optional<Info> info_;
};

struct RecordOptions {
  int closure_depth = 2;
  // Also record s with its last slot (or mask) replaced by the top-1
  // prediction, which the append-style explainer queries for attention.
  bool include_abduction = false;
  std::optional<std::string> mask_token;
};

struct RecordResult {
  OracleTrace trace;
  bool partial = false;
  std::string error;
};

// Records each sequence, every deletion variant removing 1..closure_depth
// positions, and optionally the abduced sequence. Keys already in `resume`
// are not re-queried, so an aborted run can be continued.
RecordResult record_trace(ModelOracle& oracle, const std::vector<std::vector<std::string>>& sequences,
                          int k, const RecordOptions& options = {}, OracleTrace resume = {});

}  // namespace attncausal
