#include "attncausal/scm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <string>

#include "attncausal/errors.hpp"
#include "attncausal/fci.hpp"
#include "attncausal/pag.hpp"

namespace attncausal {

Dag::Dag(int n, std::vector<std::vector<int>> parents)
    : n_(n), parents_(std::move(parents)), children_(static_cast<std::size_t>(n)) {
  if (n < 0) throw ArgumentError("Dag: negative node count");
  if (static_cast<int>(parents_.size()) != n) throw ArgumentError("Dag: parents list size != n");
  for (int i = 0; i < n; ++i) {
    auto& ps = parents_[i];
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    for (int p : ps) {
      if (p < 0 || p >= n) throw ArgumentError("Dag: parent index out of range");
      if (p == i) throw ArgumentError("Dag: self-loop at node " + std::to_string(i));
      children_[p].push_back(i);
    }
  }
  // Kahn's algorithm; leftover nodes sit on a cycle.
  std::vector<int> indeg(n);
  for (int i = 0; i < n; ++i) indeg[i] = static_cast<int>(parents_[i].size());
  std::deque<int> ready;
  for (int i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push_back(i);
  int seen = 0;
  while (!ready.empty()) {
    int v = ready.front();
    ready.pop_front();
    ++seen;
    for (int c : children_[v])
      if (--indeg[c] == 0) ready.push_back(c);
  }
  if (seen != n) throw ArgumentError("Dag: graph has a directed cycle");
}

bool Dag::has_edge(int from, int to) const {
  const auto& ps = parents_.at(to);
  return std::binary_search(ps.begin(), ps.end(), from);
}

std::vector<bool> Dag::ancestors_of(std::span<const int> set) const {
  std::vector<bool> anc(n_, false);
  std::vector<int> stack(set.begin(), set.end());
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (anc[v]) continue;
    anc[v] = true;
    for (int p : parents_[v])
      if (!anc[p]) stack.push_back(p);
  }
  return anc;
}

ScmModel::ScmModel(std::vector<int> order, Eigen::MatrixXd weights, Eigen::VectorXd lambda,
                   std::optional<Eigen::MatrixXd> noise_cov, std::vector<int> latent)
    : order_(std::move(order)),
      weights_(std::move(weights)),
      lambda_(std::move(lambda)),
      latent_(std::move(latent)) {
  const int n = size();
  if (n < 1) throw ArgumentError("ScmModel: needs at least one node");
  if (weights_.rows() != n || weights_.cols() != n) throw ArgumentError("ScmModel: G must be n x n");
  if (lambda_.size() != n) throw ArgumentError("ScmModel: lambda must have n entries");

  std::vector<int> pos(n, -1);
  for (int k = 0; k < n; ++k) {
    int v = order_[k];
    if (v < 0 || v >= n || pos[v] != -1) throw ArgumentError("ScmModel: order is not a permutation");
    pos[v] = k;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double w = weights_(i, j);
      if (!std::isfinite(w)) throw ArgumentError("ScmModel: non-finite weight");
      if (w != 0.0 && pos[j] >= pos[i])
        throw StructuralError("ScmModel: G is not strictly lower triangular in the node order (edge " +
                              std::to_string(j) + " -> " + std::to_string(i) + ")");
    }
    if (!(lambda_(i) > 0.0) || !std::isfinite(lambda_(i)))
      throw ArgumentError("ScmModel: lambda entries must be positive");
  }

  if (noise_cov) {
    noise_cov_ = std::move(*noise_cov);
    if (noise_cov_.rows() != n || noise_cov_.cols() != n) throw ArgumentError("ScmModel: Cu must be n x n");
    if (!noise_cov_.isApprox(noise_cov_.transpose(), 1e-12))
      throw ArgumentError("ScmModel: Cu must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(noise_cov_);
    if (llt.info() != Eigen::Success) throw ArgumentError("ScmModel: Cu must be positive definite");
    identity_noise_ = noise_cov_.isIdentity(0.0);
  } else {
    noise_cov_ = Eigen::MatrixXd::Identity(n, n);
    identity_noise_ = true;
  }

  std::sort(latent_.begin(), latent_.end());
  latent_.erase(std::unique(latent_.begin(), latent_.end()), latent_.end());
  for (int v : latent_)
    if (v < 0 || v >= n) throw ArgumentError("ScmModel: latent index out of range");
  if (static_cast<int>(latent_.size()) >= n) throw ArgumentError("ScmModel: observed set is empty");
}

bool ScmModel::is_latent(int i) const { return std::binary_search(latent_.begin(), latent_.end(), i); }

std::vector<int> ScmModel::observed() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (!is_latent(i)) out.push_back(i);
  return out;
}

Dag ScmModel::dag() const {
  const int n = size();
  std::vector<std::vector<int>> parents(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (weights_(i, j) != 0.0) parents[i].push_back(j);
  return Dag(n, std::move(parents));
}

Eigen::MatrixXd total_effect_matrix(const ScmModel& scm) {
  const int n = scm.size();
  Eigen::MatrixXd i_minus_g = Eigen::MatrixXd::Identity(n, n) - scm.weights();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(i_minus_g);
  if (!lu.isInvertible()) throw StructuralError("total_effect_matrix: (I - G) is singular");
  Eigen::MatrixXd lambda = scm.lambda().asDiagonal();
  return lu.solve(lambda);
}

Eigen::MatrixXd analytic_covariance(const ScmModel& scm) {
  Eigen::MatrixXd m = total_effect_matrix(scm);
  Eigen::MatrixXd cov = m * scm.noise_covariance() * m.transpose();
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd sample(const ScmModel& scm, int m, std::uint64_t seed) {
  if (m < 1) throw ArgumentError("sample: m must be >= 1");
  const int n = scm.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd chol;
  if (!scm.has_identity_noise()) chol = scm.noise_covariance().llt().matrixL();

  Eigen::MatrixXd x(m, n);
  Eigen::VectorXd z(n);
  Eigen::VectorXd u(n);
  const auto& g = scm.weights();
  for (int r = 0; r < m; ++r) {
    for (int k = 0; k < n; ++k) z(k) = normal(rng);
    u = scm.has_identity_noise() ? z : Eigen::VectorXd(chol * z);
    for (int v : scm.order()) {
      double value = scm.lambda()(v) * u(v);
      for (int j = 0; j < n; ++j)
        if (g(v, j) != 0.0) value += g(v, j) * x(r, j);
      x(r, v) = value;
    }
  }
  return x;
}

bool d_separated(const Dag& g, int i, int j, std::span<const int> z) {
  const int n = g.size();
  auto in_range = [n](int v) { return v >= 0 && v < n; };
  if (!in_range(i) || !in_range(j)) throw ArgumentError("d_separated: index out of range");
  if (i == j) throw ArgumentError("d_separated: i == j");
  std::vector<bool> in_z(n, false);
  for (int v : z) {
    if (!in_range(v)) throw ArgumentError("d_separated: conditioning index out of range");
    in_z[v] = true;
  }
  if (in_z[i] || in_z[j]) throw ArgumentError("d_separated: endpoint in conditioning set");

  const std::vector<bool> anc = g.ancestors_of(z);

  // (node, arrived_from_child). Travelling "up" means we came from a child.
  enum Dir { up = 0, down = 1 };
  std::vector<std::array<bool, 2>> visited(n, {false, false});
  std::deque<std::pair<int, Dir>> queue{{i, up}};
  while (!queue.empty()) {
    auto [v, dir] = queue.front();
    queue.pop_front();
    if (visited[v][dir]) continue;
    visited[v][dir] = true;
    if (!in_z[v] && v == j) return false;

    if (dir == up && !in_z[v]) {
      for (int p : g.parents(v)) queue.emplace_back(p, up);
      for (int c : g.children(v)) queue.emplace_back(c, down);
    } else if (dir == down) {
      if (!in_z[v])
        for (int c : g.children(v)) queue.emplace_back(c, down);
      if (anc[v])
        for (int p : g.parents(v)) queue.emplace_back(p, up);
    }
  }
  return true;
}

Pag ground_truth_pag(const ScmModel& scm) {
  const Dag dag = scm.dag();
  const std::vector<int> obs = scm.observed();
  const int m = static_cast<int>(obs.size());
  std::vector<std::string> labels;
  labels.reserve(m);
  for (int v : obs) labels.push_back("X" + std::to_string(v));

  CiOracle oracle = [&](int a, int b, std::span<const int> cond) {
    std::vector<int> mapped;
    mapped.reserve(cond.size());
    for (int c : cond) mapped.push_back(obs[c]);
    return d_separated(dag, obs[a], obs[b], mapped);
  };
  return learn_pag(oracle, m, FciOptions{}, std::move(labels));
}

ScmModel random_scm(const RandomScmParams& p) {
  if (p.n < 1) throw ArgumentError("random_scm: n must be >= 1");
  if (!(p.edge_density >= 0.0 && p.edge_density <= 1.0))
    throw ArgumentError("random_scm: edge_density must lie in [0, 1]");
  if (p.n_latent < 0 || p.n_latent >= p.n) throw ArgumentError("random_scm: need 0 <= n_latent < n");
  if (p.weight_min < kMinGeneratedWeight || p.weight_max < p.weight_min)
    throw ArgumentError("random_scm: weight range must satisfy 0.25 <= min <= max");

  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> magnitude(p.weight_min, p.weight_max);
  std::uniform_real_distribution<double> lambda_dist(0.5, 1.5);

  std::vector<int> order(p.n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p.n, p.n);
  std::vector<int> child_count(p.n, 0);
  for (int a = 0; a < p.n; ++a) {
    for (int b = a + 1; b < p.n; ++b) {
      if (unit(rng) >= p.edge_density) continue;
      double w = magnitude(rng);
      if (unit(rng) < 0.5) w = -w;
      g(order[b], order[a]) = w;
      ++child_count[order[a]];
    }
  }
  Eigen::VectorXd lambda(p.n);
  for (int i = 0; i < p.n; ++i) lambda(i) = lambda_dist(rng);

  std::vector<int> candidates;
  for (int i = 0; i < p.n; ++i)
    if (child_count[i] >= 2) candidates.push_back(i);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(p.n_latent), candidates.size());
  std::vector<int> latent(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));

  return ScmModel(std::move(order), std::move(g), std::move(lambda), std::nullopt, std::move(latent));
}

}  // namespace attncausal
