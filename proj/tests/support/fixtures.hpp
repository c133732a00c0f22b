#pragma once

#include <vector>

#include <Eigen/Dense>

#include "attncausal/attention.hpp"
#include "attncausal/fci.hpp"
#include "attncausal/pag.hpp"
#include "attncausal/scm.hpp"

namespace fixtures {

using namespace attncausal;

// Nodes listed as (parent, child, weight); every lambda is 1.
inline ScmModel make_scm(int n, const std::vector<std::tuple<int, int, double>>& edges, std::vector<int> order,
                         std::vector<int> latent = {}) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (auto [from, to, w] : edges) g(to, from) = w;
  return ScmModel(std::move(order), g, Eigen::VectorXd::Ones(n), std::nullopt, std::move(latent));
}

inline ScmModel chain3() { return make_scm(3, {{0, 1, 1.0}, {1, 2, 1.0}}, {0, 1, 2}); }

inline ScmModel collider3() { return make_scm(3, {{0, 2, 0.8}, {1, 2, 0.6}}, {0, 1, 2}); }

// I1 -> I3 <- H2 -> I5 <- I2 with I4 isolated; H2 (node 5) is latent.
// Positions: I1=0, I2=1, I3=2, I4=3, I5=4.
inline ScmModel hidden_confounder_scm() {
  return make_scm(6, {{0, 2, 0.8}, {5, 2, 0.7}, {5, 4, 0.9}, {1, 4, 0.6}}, {0, 1, 3, 5, 2, 4}, {5});
}

// I2 o-> I5, I3 o-> I5, I1 o-o I3, I4 isolated.
inline Pag five_token_pag() {
  Pag p(5, {"I1", "I2", "I3", "I4", "I5"});
  p.add_edge(1, 4, Mark::circle, Mark::head);
  p.add_edge(2, 4, Mark::circle, Mark::head);
  p.add_edge(0, 2, Mark::circle, Mark::circle);
  return p;
}

// Observed covariance of the SCM with the learner run in exact mode.
inline Eigen::MatrixXd observed_covariance(const ScmModel& scm) {
  const Eigen::MatrixXd full = analytic_covariance(scm);
  const auto obs = scm.observed();
  const auto m = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd c(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = full(obs[i], obs[j]);
  return c;
}

inline Pag learn_from_scm(const ScmModel& scm, const FciOptions& options = {}) {
  const CorrelationModel corr = correlation_from_cov(observed_covariance(scm));
  return learn_pag(make_ci_oracle(corr, 0.05), corr.size(), options);
}

}  // namespace fixtures
