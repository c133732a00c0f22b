#include "attncausal/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "attncausal/errors.hpp"

namespace attncausal {

void validate_response(const OracleResponse& r, std::size_t query_length) {
  if (r.top_k.empty()) throw ArgumentError("oracle response: empty top_k");
  for (std::size_t i = 0; i < r.top_k.size(); ++i) {
    const auto& p = r.top_k[i];
    if (p.rank != static_cast<int>(i) + 1) throw ArgumentError("oracle response: ranks are not consecutive from 1");
    if (!std::isfinite(p.score)) throw ArgumentError("oracle response: non-finite score");
    if (i > 0 && p.score > r.top_k[i - 1].score) throw ArgumentError("oracle response: scores increase with rank");
  }
  if (static_cast<std::size_t>(r.attention.size()) != query_length)
    throw ArgumentError("oracle response: attention n=" + std::to_string(r.attention.size()) +
                        " but query length is " + std::to_string(query_length));
}

std::string canonical_key(std::span<const std::string> tokens) {
  if (tokens.empty()) throw ArgumentError("canonical_key: empty token list");
  std::string key;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].find(kKeySeparator) != std::string::npos)
      throw ArgumentError("canonical_key: token " + std::to_string(i) + " contains the key separator");
    if (i > 0) key.push_back(kKeySeparator);
    key += tokens[i];
  }
  return key;
}

std::vector<std::string> split_key(std::string_view key) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = key.find(kKeySeparator, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(key.substr(start));
      return out;
    }
    out.emplace_back(key.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string printable_key(std::string_view key) {
  std::string out;
  for (char c : key) {
    if (c == kKeySeparator)
      out += "␟";
    else
      out.push_back(c);
  }
  return out;
}

void OracleTrace::insert(const std::string& key, OracleResponse response) {
  auto [it, fresh] = records.insert_or_assign(key, std::move(response));
  (void)it;
  if (fresh) key_order.push_back(key);
}

OracleResponse ReplayOracle::query(std::span<const std::string> tokens, int /*k*/) {
  const std::string key = canonical_key(tokens);
  const auto it = trace_.records.find(key);
  if (it == trace_.records.end()) throw TraceMissError(key, printable_key(key));
  return it->second;
}

// ---------------------------------------------------------------------------

SyntheticOracle::SyntheticOracle(ScmModel scm, std::vector<std::string> labels, std::vector<int> candidates,
                                 std::optional<std::string> mask_token, bool normalize_rows)
    : scm_(std::move(scm)),
      labels_(std::move(labels)),
      candidates_(std::move(candidates)),
      mask_token_(std::move(mask_token)),
      normalize_rows_(normalize_rows) {
  const int n = scm_.size();
  if (static_cast<int>(labels_.size()) != n) throw ArgumentError("SyntheticOracle: one label per node required");
  for (int i = 0; i < n; ++i) {
    if (labels_[i].empty()) throw ArgumentError("SyntheticOracle: empty label");
    if (labels_[i].find(kKeySeparator) != std::string::npos)
      throw ArgumentError("SyntheticOracle: label contains the key separator");
    if (mask_token_ && labels_[i] == *mask_token_) throw ArgumentError("SyntheticOracle: label equals the mask token");
    if (!index_.emplace(labels_[i], i).second) throw ArgumentError("SyntheticOracle: duplicate label " + labels_[i]);
  }
  if (candidates_.empty()) throw ArgumentError("SyntheticOracle: no candidates");
  std::set<int> seen;
  for (int c : candidates_) {
    if (c < 0 || c >= n) throw ArgumentError("SyntheticOracle: candidate out of range");
    if (scm_.is_latent(c)) throw ArgumentError("SyntheticOracle: latent node cannot be a candidate");
    if (!seen.insert(c).second) throw ArgumentError("SyntheticOracle: duplicate candidate");
  }
}

int SyntheticOracle::node_of(const std::string& token) const {
  const auto it = index_.find(token);
  if (it == index_.end() || scm_.is_latent(it->second)) return -1;
  return it->second;
}

namespace {

// (I - G_R)^-1 over the node subset R, indexed by position in R.
Eigen::MatrixXd reduced_inverse(const ScmModel& scm, const std::vector<int>& r) {
  const auto m = static_cast<Eigen::Index>(r.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) a(i, j) -= scm.weights()(r[i], r[j]);
  return a.fullPivLu().solve(Eigen::MatrixXd::Identity(m, m));
}

}  // namespace

std::vector<Prediction> SyntheticOracle::score_candidates(std::span<const std::string> tokens) const {
  std::set<int> present;
  for (const auto& t : tokens) {
    const int v = node_of(t);
    if (v >= 0) present.insert(v);
  }
  const std::set<int> cand_set(candidates_.begin(), candidates_.end());
  std::vector<Prediction> preds;
  for (int c : candidates_) {
    std::set<int> nodes = present;
    nodes.insert(c);
    for (int l : scm_.latent()) nodes.insert(l);
    const std::vector<int> r(nodes.begin(), nodes.end());
    const Eigen::MatrixXd t = reduced_inverse(scm_, r);
    const auto ci = std::distance(r.begin(), std::find(r.begin(), r.end(), c));
    double score = 0.0;
    for (std::size_t p = 0; p < r.size(); ++p) {
      if (!present.count(r[p]) || cand_set.count(r[p])) continue;
      score += t(ci, static_cast<Eigen::Index>(p));
    }
    preds.push_back({labels_[c], score, 0});
  }
  std::stable_sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.token < b.token;
  });
  for (std::size_t i = 0; i < preds.size(); ++i) preds[i].rank = static_cast<int>(i) + 1;
  return preds;
}

OracleResponse SyntheticOracle::query(std::span<const std::string> tokens, int k) {
  if (tokens.empty()) throw ArgumentError("SyntheticOracle: empty query");
  if (k < 1) throw ArgumentError("SyntheticOracle: k must be >= 1");
  OracleResponse out;
  out.top_k = score_candidates(tokens);
  if (static_cast<int>(out.top_k.size()) > k) out.top_k.resize(static_cast<std::size_t>(k));

  // Position -> node; repeats of a node and unknown tokens map to -1.
  const auto n = static_cast<Eigen::Index>(tokens.size());
  std::vector<int> node(tokens.size(), -1);
  std::set<int> used;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int v = node_of(tokens[i]);
    if (v >= 0 && used.insert(v).second) node[i] = v;
  }
  std::vector<int> r(used.begin(), used.end());
  for (int l : scm_.latent()) r.push_back(l);
  std::sort(r.begin(), r.end());
  auto local = [&r](int v) { return static_cast<Eigen::Index>(std::lower_bound(r.begin(), r.end(), v) - r.begin()); };

  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  if (!r.empty()) {
    Eigen::MatrixXd m = reduced_inverse(scm_, r);
    for (std::size_t i = 0; i < r.size(); ++i) m.col(static_cast<Eigen::Index>(i)) *= scm_.lambda()(r[i]);
    std::vector<Eigen::Index> pos;
    for (Eigen::Index i = 0; i < n; ++i)
      if (node[i] >= 0) pos.push_back(i);

    if (scm_.latent().empty() && scm_.has_identity_noise()) {
      for (Eigen::Index i : pos)
        for (Eigen::Index j : pos) a(i, j) = m(local(node[i]), local(node[j]));
    } else {
      // Lower Cholesky factor of the observed covariance in causal order.
      const auto rm = static_cast<Eigen::Index>(r.size());
      Eigen::MatrixXd cu(rm, rm);
      for (Eigen::Index i = 0; i < rm; ++i)
        for (Eigen::Index j = 0; j < rm; ++j) cu(i, j) = scm_.noise_covariance()(r[i], r[j]);
      const Eigen::MatrixXd cov = m * cu * m.transpose();
      std::vector<int> rank_in_order(static_cast<std::size_t>(scm_.size()));
      for (std::size_t i = 0; i < scm_.order().size(); ++i) rank_in_order[scm_.order()[i]] = static_cast<int>(i);
      std::sort(pos.begin(), pos.end(), [&](Eigen::Index x, Eigen::Index y) {
        return rank_in_order[node[x]] < rank_in_order[node[y]];
      });
      const auto q = static_cast<Eigen::Index>(pos.size());
      Eigen::MatrixXd sub(q, q);
      for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = 0; j < q; ++j) sub(i, j) = cov(local(node[pos[i]]), local(node[pos[j]]));
      Eigen::LLT<Eigen::MatrixXd> llt(sub);
      if (llt.info() != Eigen::Success) throw OracleError("SyntheticOracle: observed covariance is not positive definite");
      const Eigen::MatrixXd l = llt.matrixL();
      for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = 0; j < q; ++j) a(pos[i], pos[j]) = l(i, j);
    }
  }

  if (normalize_rows_) {
    a = a.cwiseAbs();
    for (Eigen::Index i = 0; i < n; ++i) a.row(i) /= a.row(i).sum();
  }
  out.attention = AttentionTensor::from_matrix(std::move(a), std::vector<std::string>(tokens.begin(), tokens.end()),
                                               normalize_rows_);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void for_each_combination(int n, int r, const std::function<void(const std::vector<int>&)>& fn) {
  if (r > n || r < 1) return;
  std::vector<int> idx(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    int i = r - 1;
    while (i >= 0 && idx[i] == n - r + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < r; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

RecordResult record_trace(ModelOracle& oracle, const std::vector<std::vector<std::string>>& sequences, int k,
                          const RecordOptions& options, OracleTrace resume) {
  if (k < 1) throw ArgumentError("record_trace: k must be >= 1");
  if (options.closure_depth < 0) throw ArgumentError("record_trace: closure depth must be >= 0");
  RecordResult result;
  result.trace = std::move(resume);
  result.trace.meta.model = oracle.model_id();
  result.trace.meta.k = k;
  auto& trace = result.trace;

  auto record = [&](const std::vector<std::string>& tokens) -> const OracleResponse& {
    const std::string key = canonical_key(tokens);
    if (!trace.contains(key)) {
      OracleResponse r = oracle.query(tokens, k);
      validate_response(r, tokens.size());
      trace.insert(key, std::move(r));
    }
    return trace.records.at(key);
  };

  try {
    for (const auto& s : sequences) {
      if (s.empty()) throw ArgumentError("record_trace: empty sequence");
      if (std::find(trace.meta.sessions.begin(), trace.meta.sessions.end(), s) == trace.meta.sessions.end())
        trace.meta.sessions.push_back(s);
      const OracleResponse& root = record(s);
      const std::string top = root.top().token;

      std::vector<int> removable;
      for (int i = 0; i < static_cast<int>(s.size()); ++i)
        if (!options.mask_token || s[i] != *options.mask_token) removable.push_back(i);
      const int m = static_cast<int>(removable.size());
      for (int d = 1; d <= options.closure_depth; ++d) {
        for_each_combination(m, d, [&](const std::vector<int>& pick) {
          std::vector<bool> drop(s.size(), false);
          for (int p : pick) drop[removable[p]] = true;
          std::vector<std::string> variant;
          for (std::size_t i = 0; i < s.size(); ++i)
            if (!drop[i]) variant.push_back(s[i]);
          if (!variant.empty()) record(variant);
        });
      }

      if (options.include_abduction) {
        std::vector<std::string> abduced = s;
        if (options.mask_token && abduced.back() == *options.mask_token)
          abduced.back() = top;
        else
          abduced.push_back(top);
        record(abduced);
      }
    }
  } catch (const OracleError& e) {
    result.partial = true;
    result.error = e.what();
  }
  return result;
}

}  // namespace attncausal
