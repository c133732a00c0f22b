#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace attncausal {

class Pag;

// Unweighted DAG. parents[i] lists the direct causes of node i (sorted).
class Dag {
 public:
  Dag() = default;
  // Throws ArgumentError on self-loops, out-of-range parents or cycles.
  Dag(int n, std::vector<std::vector<int>> parents);

  int size() const { return n_; }
  const std::vector<int>& parents(int i) const { return parents_.at(i); }
  const std::vector<int>& children(int i) const { return children_.at(i); }
  bool has_edge(int from, int to) const;

  // Nodes with a directed path into some member of `set` (members included).
  std::vector<bool> ancestors_of(std::span<const int> set) const;

 private:
  int n_ = 0;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<int>> children_;
};

// Linear-Gaussian structural causal model X = G X + Lambda U, U ~ N(0, Cu).
//
// weights()(i, j) is the weight of parent j on child i. The model is
// recursive: G permuted into order() is strictly lower triangular. Latent
// nodes are ordinary nodes flagged unobserved.
class ScmModel {
 public:
  // Validates every invariant; throws StructuralError when G is not
  // triangular in `order`, ArgumentError for everything else.
  ScmModel(std::vector<int> order, Eigen::MatrixXd weights, Eigen::VectorXd lambda,
           std::optional<Eigen::MatrixXd> noise_cov = std::nullopt,
           std::vector<int> latent = {});

  int size() const { return static_cast<int>(order_.size()); }
  const std::vector<int>& order() const { return order_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& lambda() const { return lambda_; }
  // Identity unless an explicit Cu was supplied.
  const Eigen::MatrixXd& noise_covariance() const { return noise_cov_; }
  bool has_identity_noise() const { return identity_noise_; }
  const std::vector<int>& latent() const { return latent_; }
  bool is_latent(int i) const;
  std::vector<int> observed() const;
  Dag dag() const;

 private:
  std::vector<int> order_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd noise_cov_;
  bool identity_noise_ = true;
  std::vector<int> latent_;
};

// (I - G)^-1 Lambda by a direct linear solve.
Eigen::MatrixXd total_effect_matrix(const ScmModel& scm);

// M Cu M^T with M the total-effect matrix.
Eigen::MatrixXd analytic_covariance(const ScmModel& scm);

// Ancestral sampling; one row per draw. Deterministic for a given seed.
Eigen::MatrixXd sample(const ScmModel& scm, int m, std::uint64_t seed);

// Bayes-ball reachability. Requires i != j and i, j not in z.
bool d_separated(const Dag& g, int i, int j, std::span<const int> z);

// The equivalence class over observed nodes, obtained by running the PAG
// learner against a perfect d-separation oracle on the full DAG. Node k of
// the result is observed()[k]; labels are "X<original index>".
Pag ground_truth_pag(const ScmModel& scm);

struct RandomScmParams {
  int n = 5;
  double edge_density = 0.3;
  int n_latent = 0;
  double weight_min = 0.25;  // magnitude bounds; sign is drawn separately
  double weight_max = 1.0;
  std::uint64_t seed = 0;
};

// Smallest admissible |weight| for generated models.
inline constexpr double kMinGeneratedWeight = 0.25;

// Random recursive SCM. Latents are drawn from nodes with at least two
// children, so fewer than n_latent may be placed when candidates run out.
ScmModel random_scm(const RandomScmParams& params);

}  // namespace attncausal
