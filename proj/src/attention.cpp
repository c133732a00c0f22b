#include "attncausal/attention.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "attncausal/errors.hpp"

namespace attncausal {

AttentionTensor::AttentionTensor(std::vector<std::vector<Eigen::MatrixXd>> layers,
                                 std::vector<std::string> tokens, bool softmax_origin)
    : layers_(std::move(layers)), tokens_(std::move(tokens)), softmax_origin_(softmax_origin) {
  if (layers_.empty()) throw ArgumentError("AttentionTensor: no layers");
  const std::size_t heads = layers_.front().size();
  if (heads == 0) throw ArgumentError("AttentionTensor: no heads");
  const auto n = static_cast<Eigen::Index>(tokens_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].size() != heads) throw ArgumentError("AttentionTensor: ragged head count");
    for (std::size_t h = 0; h < heads; ++h) {
      const auto& a = layers_[l][h];
      if (a.rows() != n || a.cols() != n)
        throw ArgumentError("AttentionTensor: matrix at layer " + std::to_string(l) + " head " +
                            std::to_string(h) + " is not n x n");
      if (!a.allFinite()) throw ArgumentError("AttentionTensor: non-finite entry");
      if (softmax_origin_) {
        for (Eigen::Index r = 0; r < n; ++r) {
          if (std::abs(a.row(r).sum() - 1.0) > kRowSumTolerance)
            throw ArgumentError("AttentionTensor: row " + std::to_string(r) + " of layer " +
                                std::to_string(l) + " head " + std::to_string(h) +
                                " does not sum to 1");
        }
      }
    }
  }
}

AttentionTensor AttentionTensor::from_matrix(Eigen::MatrixXd a, std::vector<std::string> tokens,
                                             bool softmax_origin) {
  std::vector<std::vector<Eigen::MatrixXd>> layers{{std::move(a)}};
  return AttentionTensor(std::move(layers), std::move(tokens), softmax_origin);
}

HeadAggregation HeadAggregation::parse(std::string_view text) {
  if (text == "mean") return {Kind::mean, 0};
  if (text == "max") return {Kind::max, 0};
  if (text.starts_with("head:")) {
    const std::string digits(text.substr(5));
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      throw ArgumentError("head aggregation: bad head index in '" + std::string(text) + "'");
    return {Kind::head, std::stoi(digits)};
  }
  throw ArgumentError("head aggregation: expected mean, max or head:K, got '" + std::string(text) + "'");
}

std::string HeadAggregation::to_string() const {
  switch (kind) {
    case Kind::mean: return "mean";
    case Kind::max: return "max";
    case Kind::head: return "head:" + std::to_string(head);
  }
  return "mean";
}

AggregatedAttention deepest_attention(const AttentionTensor& t, HeadAggregation agg) {
  const int last = t.layers() - 1;
  const int heads = t.heads();
  switch (agg.kind) {
    case HeadAggregation::Kind::head: {
      if (agg.head < 0 || agg.head >= heads)
        throw ArgumentError("deepest_attention: head " + std::to_string(agg.head) + " out of range (heads=" +
                            std::to_string(heads) + ")");
      return {t.matrix(last, agg.head), t.softmax_origin()};
    }
    case HeadAggregation::Kind::mean: {
      Eigen::MatrixXd sum = t.matrix(last, 0);
      for (int h = 1; h < heads; ++h) sum += t.matrix(last, h);
      return {sum / static_cast<double>(heads), t.softmax_origin()};
    }
    case HeadAggregation::Kind::max: {
      Eigen::MatrixXd out = t.matrix(last, 0);
      for (int h = 1; h < heads; ++h) out = out.cwiseMax(t.matrix(last, h));
      return {out, false};
    }
  }
  throw ArgumentError("deepest_attention: unknown aggregation");
}

Eigen::MatrixXd output_covariance(const Eigen::MatrixXd& a, double ridge) {
  if (!a.allFinite()) throw ArgumentError("output_covariance: non-finite attention");
  if (ridge < 0.0) throw ArgumentError("output_covariance: ridge must be nonnegative");
  Eigen::MatrixXd c = a * a.transpose();
  c.diagonal().array() += ridge;
  return 0.5 * (c + c.transpose());
}

CiMode parse_ci_mode(std::string_view text) {
  if (text == "exact") return CiMode::exact;
  if (text == "fisher" || text == "fisher-z") return CiMode::fisher;
  throw ArgumentError("ci mode: expected exact or fisher, got '" + std::string(text) + "'");
}

const char* ci_mode_name(CiMode mode) { return mode == CiMode::exact ? "exact" : "fisher"; }

CorrelationModel correlation_from_cov(const Eigen::MatrixXd& cov, double n_eff, CiMode mode) {
  if (cov.rows() != cov.cols()) throw ArgumentError("correlation_from_cov: matrix is not square");
  const Eigen::Index n = cov.rows();
  Eigen::VectorXd inv_sd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = cov(i, i);
    if (!(d > 0.0) || !std::isfinite(d))
      throw DegeneracyError("correlation_from_cov: non-positive variance at index " + std::to_string(i));
    inv_sd(i) = 1.0 / std::sqrt(d);
  }
  CorrelationModel m;
  m.corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  for (Eigen::Index i = 0; i < n; ++i) {
    m.corr(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = std::clamp(0.5 * (m.corr(i, j) + m.corr(j, i)), -1.0, 1.0);
      m.corr(i, j) = m.corr(j, i) = r;
    }
  }
  m.n_eff = n_eff;
  m.mode = mode;
  return m;
}

namespace {

void check_query(const CorrelationModel& m, int i, int j, std::span<const int> z) {
  const int n = m.size();
  auto bad = [n](int v) { return v < 0 || v >= n; };
  if (bad(i) || bad(j) || i == j) throw ArgumentError("partial_correlation: bad endpoints");
  for (int v : z) {
    if (bad(v)) throw ArgumentError("partial_correlation: conditioning index out of range");
    if (v == i || v == j) throw ArgumentError("partial_correlation: endpoint in conditioning set");
  }
  if (static_cast<int>(z.size()) + 2 > n) throw ArgumentError("partial_correlation: conditioning set too large");
}

double partial_from_submatrix(Eigen::MatrixXd sub) {
  if (sub.rows() == 2) return sub(0, 1);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw DegeneracyError("partial_correlation: singular conditioning submatrix");
  const Eigen::MatrixXd prec = lu.inverse();
  const double denom = prec(0, 0) * prec(1, 1);
  if (!(denom > 0.0)) throw DegeneracyError("partial_correlation: non-positive precision diagonal");
  return std::clamp(-prec(0, 1) / std::sqrt(denom), -1.0, 1.0);
}

Eigen::MatrixXd principal_submatrix(const CorrelationModel& m, int i, int j, std::span<const int> z) {
  std::vector<int> idx{i, j};
  idx.insert(idx.end(), z.begin(), z.end());
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd sub(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c) sub(r, c) = m.corr(idx[r], idx[c]);
  return sub;
}

}  // namespace

double partial_correlation(const CorrelationModel& m, int i, int j, std::span<const int> z) {
  check_query(m, i, j, z);
  return partial_from_submatrix(principal_submatrix(m, i, j, z));
}

double fisher_z(double pcorr, double n_eff, std::size_t cond_size) {
  const double dof = n_eff - static_cast<double>(cond_size) - 3.0;
  if (!(dof > 0.0)) throw ArgumentError("fisher_z: n_eff must exceed |z| + 3");
  const double r = std::clamp(pcorr, -1.0 + 1e-15, 1.0 - 1e-15);
  return std::atanh(r) * std::sqrt(dof);
}

CiDecision ci_test(const CorrelationModel& m, int i, int j, std::span<const int> z, double alpha) {
  check_query(m, i, j, z);
  if (m.mode == CiMode::fisher) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("ci_test: alpha must lie in (0, 1)");
    if (!(m.n_eff > static_cast<double>(z.size()) + 3.0))
      throw ArgumentError("ci_test: n_eff must exceed |z| + 3 in fisher mode");
  }
  Eigen::MatrixXd sub = principal_submatrix(m, i, j, z);
  double r = 0.0;
  try {
    r = partial_from_submatrix(sub);
  } catch (const DegeneracyError&) {
    sub.diagonal().array() += m.ridge;
    r = partial_from_submatrix(sub);
  }
  if (m.mode == CiMode::exact) return std::abs(r) < kExactThreshold ? CiDecision::independent : CiDecision::dependent;

  const double z_stat = fisher_z(r, m.n_eff, z.size());
  const boost::math::normal standard;
  const double critical = boost::math::quantile(standard, 1.0 - alpha / 2.0);
  return std::abs(z_stat) <= critical ? CiDecision::independent : CiDecision::dependent;
}

CiOracle make_ci_oracle(const CorrelationModel& m, double alpha) {
  return [m, alpha](int i, int j, std::span<const int> z) {
    try {
      return ci_test(m, i, j, z, alpha) == CiDecision::independent;
    } catch (const DegeneracyError& e) {
      throw OracleError(std::string("ci oracle: ") + e.what());
    }
  };
}

}  // namespace attncausal
