#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "attncausal/fci.hpp"

namespace attncausal {

// Per-layer, per-head attention matrices for one input sequence.
class AttentionTensor {
 public:
  AttentionTensor() = default;
  // layers[l][h] is an n x n matrix. When softmax_origin is set every row
  // must sum to 1 within 1e-4. Throws ArgumentError otherwise.
  AttentionTensor(std::vector<std::vector<Eigen::MatrixXd>> layers,
                  std::vector<std::string> tokens, bool softmax_origin);

  // Single layer, single head.
  static AttentionTensor from_matrix(Eigen::MatrixXd a, std::vector<std::string> tokens,
                                     bool softmax_origin);

  int layers() const { return static_cast<int>(layers_.size()); }
  int heads() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().size()); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const Eigen::MatrixXd& matrix(int layer, int head) const { return layers_.at(layer).at(head); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool softmax_origin() const { return softmax_origin_; }

 private:
  std::vector<std::vector<Eigen::MatrixXd>> layers_;
  std::vector<std::string> tokens_;
  bool softmax_origin_ = false;
};

inline constexpr double kRowSumTolerance = 1e-4;

struct HeadAggregation {
  enum class Kind { mean, head, max };
  Kind kind = Kind::mean;
  int head = 0;

  // "mean", "max" or "head:K".
  static HeadAggregation parse(std::string_view text);
  std::string to_string() const;
};

struct AggregatedAttention {
  Eigen::MatrixXd matrix;
  bool row_stochastic = false;
};

// Deepest layer collapsed across heads.
AggregatedAttention deepest_attention(const AttentionTensor& t, HeadAggregation agg = {});

// A A^T + ridge I.
Eigen::MatrixXd output_covariance(const Eigen::MatrixXd& a, double ridge = 0.0);

enum class CiMode { exact, fisher };

CiMode parse_ci_mode(std::string_view text);
const char* ci_mode_name(CiMode mode);

// |partial correlation| below this is "independent" in exact mode.
inline constexpr double kExactThreshold = 1e-8;
inline constexpr double kDefaultRidge = 1e-8;
inline constexpr double kDefaultEffectiveSamples = 1000.0;

struct CorrelationModel {
  Eigen::MatrixXd corr;
  double n_eff = kDefaultEffectiveSamples;
  CiMode mode = CiMode::exact;
  // Added to the conditioning submatrix when it is singular, then retried.
  double ridge = kDefaultRidge;

  int size() const { return static_cast<int>(corr.rows()); }
};

// rho(i, j) = C(i, j) / sqrt(C(i, i) C(j, j)). DegeneracyError on a
// non-positive diagonal.
CorrelationModel correlation_from_cov(const Eigen::MatrixXd& cov,
                                      double n_eff = kDefaultEffectiveSamples,
                                      CiMode mode = CiMode::exact);

// Partial correlation of i and j given z from the inverse of the principal
// submatrix over {i, j} u z. DegeneracyError when that submatrix is singular.
double partial_correlation(const CorrelationModel& m, int i, int j, std::span<const int> z);

enum class CiDecision { independent, dependent };

// atanh(r) sqrt(n_eff - |z| - 3)
double fisher_z(double pcorr, double n_eff, std::size_t cond_size);

// Exact mode: independent iff |pcorr| < kExactThreshold. Fisher mode:
// independent iff |z| <= Phi^-1(1 - alpha / 2). A singular submatrix is
// retried once with m.ridge added to its diagonal.
CiDecision ci_test(const CorrelationModel& m, int i, int j, std::span<const int> z,
                   double alpha);

// Binds ci_test to an oracle over all indices of `m`.
CiOracle make_ci_oracle(const CorrelationModel& m, double alpha);

}  // namespace attncausal
