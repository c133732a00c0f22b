// Test-side reference implementations. Deliberately naive: exhaustive path
// enumeration and textbook formulas, sharing no code with the library.
#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "attncausal/cleann.hpp"
#include "attncausal/oracle.hpp"
#include "attncausal/pag.hpp"
#include "attncausal/scm.hpp"

namespace brute {

using attncausal::Mark;
using attncausal::Pag;

// sum_k G^k, stopping once the power vanishes (G is nilpotent).
inline Eigen::MatrixXd series_inverse(const Eigen::MatrixXd& g) {
  const auto n = g.rows();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    power = power * g;
    sum += power;
  }
  return sum;
}

// Partial correlation from regression residuals: residual covariance of
// (i, j) after least-squares projection on z.
inline double regression_partial(const Eigen::MatrixXd& c, int i, int j, const std::vector<int>& z) {
  if (z.empty()) return c(i, j) / std::sqrt(c(i, i) * c(j, j));
  const auto k = static_cast<Eigen::Index>(z.size());
  Eigen::MatrixXd czz(k, k);
  Eigen::VectorXd czi(k), czj(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    czi(a) = c(z[a], i);
    czj(a) = c(z[a], j);
    for (Eigen::Index b = 0; b < k; ++b) czz(a, b) = c(z[a], z[b]);
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(czz);
  const Eigen::VectorXd bi = qr.solve(czi);
  const Eigen::VectorXd bj = qr.solve(czj);
  const double rij = c(i, j) - czi.dot(bj);
  const double rii = c(i, i) - czi.dot(bi);
  const double rjj = c(j, j) - czj.dot(bj);
  return rij / std::sqrt(rii * rjj);
}

// d-separation by enumerating every simple path of the skeleton.
inline bool path_d_separated(const attncausal::Dag& g, int x, int y, const std::vector<int>& z) {
  const int n = g.size();
  std::set<int> zs(z.begin(), z.end());
  std::vector<bool> anc_z(n, false);
  for (int v : z) {
    std::vector<int> stack{v};
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      if (anc_z[u]) continue;
      anc_z[u] = true;
      for (int p : g.parents(u)) stack.push_back(p);
    }
  }
  auto adjacent = [&](int a, int b) { return g.has_edge(a, b) || g.has_edge(b, a); };
  std::vector<int> path{x};
  std::vector<bool> on(n, false);
  on[x] = true;
  bool connected = false;
  std::function<void()> dfs = [&]() {
    if (connected) return;
    const int cur = path.back();
    if (cur == y) {
      for (std::size_t k = 1; k + 1 < path.size(); ++k) {
        const int a = path[k - 1], v = path[k], b = path[k + 1];
        const bool collider = g.has_edge(a, v) && g.has_edge(b, v);
        if (collider ? !anc_z[v] : zs.count(v) > 0) return;
      }
      connected = true;
      return;
    }
    for (int nb = 0; nb < n; ++nb) {
      if (on[nb] || !adjacent(cur, nb)) continue;
      on[nb] = true;
      path.push_back(nb);
      dfs();
      path.pop_back();
      on[nb] = false;
    }
  };
  dfs();
  return !connected;
}

inline bool arrowish(Mark m) { return m == Mark::head || m == Mark::circle; }

inline bool pi_path(const Pag& p, const std::vector<int>& path) {
  for (std::size_t k = 1; k + 1 < path.size(); ++k) {
    const int u = path[k - 1], v = path[k], w = path[k + 1];
    const bool collider = arrowish(p.mark(u, v)) && arrowish(p.mark(w, v));
    if (!collider && !p.adjacent(u, w)) return false;
  }
  return true;
}

// Every simple path from root (length >= 1 edge) whose internal nodes
// satisfy `internal_ok`.
inline void simple_paths(const Pag& p, int root, const std::function<bool(int)>& internal_ok,
                         const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> path{root};
  std::vector<bool> on(p.size(), false);
  on[root] = true;
  std::function<void()> dfs = [&]() {
    const int cur = path.back();
    if (path.size() > 2 && !internal_ok(path[path.size() - 2])) return;
    if (path.size() >= 2) visit(path);
    if (path.size() >= 2 && !internal_ok(cur)) return;
    for (int nb : p.neighbors(cur)) {
      if (on[nb]) continue;
      on[nb] = true;
      path.push_back(nb);
      dfs();
      path.pop_back();
      on[nb] = false;
    }
  };
  dfs();
}

inline std::vector<int> pi_depths(const Pag& p, int root) {
  std::vector<int> depth(p.size(), -1);
  depth[root] = 0;
  simple_paths(p, root, [](int) { return true; }, [&](const std::vector<int>& path) {
    if (!pi_path(p, path)) return;
    const int v = path.back();
    const int d = static_cast<int>(path.size()) - 1;
    if (depth[v] < 0 || d < depth[v]) depth[v] = d;
  });
  return depth;
}

// Exhaustive PI-set enumeration over all subsets of size r.
inline std::vector<std::vector<int>> pi_sets(const Pag& p, int root, int r, std::vector<int> time = {},
                                             const std::vector<int>& frozen = {}) {
  const int n = p.size();
  if (time.empty()) {
    time.resize(n);
    std::iota(time.begin(), time.end(), 0);
  }
  std::vector<bool> admissible(n);
  for (int v = 0; v < n; ++v)
    admissible[v] = v != root && time[v] < time[root] &&
                    std::find(frozen.begin(), frozen.end(), v) == frozen.end();
  const auto depth = pi_depths(p, root);
  std::vector<int> cand;
  for (int v = 0; v < n; ++v)
    if (admissible[v]) cand.push_back(v);

  std::vector<std::vector<int>> out;
  const int m = static_cast<int>(cand.size());
  if (r > m) return out;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    if (__builtin_popcount(mask) != r) continue;
    std::vector<int> e;
    for (int b = 0; b < m; ++b)
      if (mask & (1u << b)) e.push_back(cand[b]);
    std::set<int> in(e.begin(), e.end());
    auto inside = [&](int v) { return in.count(v) > 0; };

    std::set<int> reached;
    simple_paths(p, root, inside, [&](const std::vector<int>& path) {
      if (inside(path.back()) && pi_path(p, path)) reached.insert(path.back());
    });
    if (reached.size() != in.size()) continue;

    bool closed = true;
    simple_paths(p, root, inside, [&](const std::vector<int>& path) {
      if (path.size() < 3 || inside(path.back()) || !admissible[path.back()]) return;
      for (std::size_t k = 1; k + 1 < path.size(); ++k) {
        const int u = path[k - 1], v = path[k], w = path[k + 1];
        if (!(p.mark(u, v) == Mark::head && p.mark(w, v) == Mark::head && !p.adjacent(u, w))) return;
      }
      closed = false;
    });
    if (closed) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    long sa = 0, sb = 0;
    for (int v : a) sa += depth[v];
    for (int v : b) sb += depth[v];
    if (sa != sb) return sa < sb;
    return a < b;
  });
  return out;
}

// Replay trace for a scripted model over sequence `s`: `respond(removed)`
// gives the ranked predictions after deleting the listed positions. The
// abduced query carries `attention`; every other query carries identity.
inline attncausal::OracleTrace scripted_trace(
    const std::vector<std::string>& s, const std::vector<std::string>& abduced, const Eigen::MatrixXd& attention,
    const std::function<std::vector<attncausal::Prediction>(const std::vector<int>&)>& respond,
    const std::vector<int>& frozen = {}) {
  using namespace attncausal;
  OracleTrace trace;
  trace.meta.model = "scripted";
  trace.meta.sessions.push_back(s);
  auto make = [](std::vector<Prediction> preds, const Eigen::MatrixXd& a, const std::vector<std::string>& toks) {
    OracleResponse r;
    for (std::size_t i = 0; i < preds.size(); ++i) preds[i].rank = static_cast<int>(i) + 1;
    r.top_k = std::move(preds);
    r.attention = AttentionTensor::from_matrix(a, toks, false);
    return r;
  };
  std::vector<int> removable;
  for (int i = 0; i < static_cast<int>(s.size()); ++i)
    if (std::find(frozen.begin(), frozen.end(), i) == frozen.end()) removable.push_back(i);
  const int m = static_cast<int>(removable.size());
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> removed;
    for (int b = 0; b < m; ++b)
      if (mask & (1u << b)) removed.push_back(removable[b]);
    std::vector<std::string> q;
    for (int i = 0; i < static_cast<int>(s.size()); ++i)
      if (!std::binary_search(removed.begin(), removed.end(), i)) q.push_back(s[i]);
    if (q.empty()) continue;
    const auto n = static_cast<Eigen::Index>(q.size());
    trace.insert(canonical_key(q), make(respond(removed), Eigen::MatrixXd::Identity(n, n), q));
  }
  if (abduced != s) trace.insert(canonical_key(abduced), make(respond({}), attention, abduced));
  else trace.records.at(canonical_key(s)).attention = AttentionTensor::from_matrix(attention, s, false);
  return trace;
}

}  // namespace brute
