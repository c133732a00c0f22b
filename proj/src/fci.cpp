#include "attncausal/fci.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <string>

#include "attncausal/errors.hpp"

namespace attncausal {

void SepsetTable::record(int i, int j, std::vector<int> sepset) {
  std::sort(sepset.begin(), sepset.end());
  table_[key(i, j)] = std::move(sepset);
}

bool SepsetTable::contains(int i, int j) const { return table_.count(key(i, j)) > 0; }

const std::vector<int>& SepsetTable::at(int i, int j) const {
  auto it = table_.find(key(i, j));
  if (it == table_.end())
    throw ArgumentError("SepsetTable: no separating set for (" + std::to_string(i) + ", " +
                        std::to_string(j) + ")");
  return it->second;
}

bool SepsetTable::separates_with(int i, int j, int k) const {
  const auto& s = at(i, j);
  return std::binary_search(s.begin(), s.end(), k);
}

namespace {

// Calls fn on every size-k subset of `items` in lexicographic order; stops
// early when fn returns true. Returns whether fn stopped the enumeration.
template <typename Fn>
bool for_each_subset(const std::vector<int>& items, int k, Fn&& fn) {
  const int n = static_cast<int>(items.size());
  if (k > n) return false;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  std::vector<int> subset(k);
  while (true) {
    for (int i = 0; i < k; ++i) subset[i] = items[idx[i]];
    if (fn(std::span<const int>(subset))) return true;
    int pos = k - 1;
    while (pos >= 0 && idx[pos] == n - k + pos) --pos;
    if (pos < 0) return false;
    ++idx[pos];
    for (int i = pos + 1; i < k; ++i) idx[i] = idx[i - 1] + 1;
  }
}

std::vector<int> without(std::vector<int> items, int a, int b = -1) {
  items.erase(std::remove_if(items.begin(), items.end(), [&](int v) { return v == a || v == b; }),
              items.end());
  return items;
}

// Nodes reachable from `a` along paths whose every inner triple is a
// collider or a triangle. Explored over edge states, which can only enlarge
// the set; extra conditioning sets never remove a true adjacency.
std::vector<int> possible_dsep(const Pag& g, int a) {
  const int n = g.size();
  std::vector<bool> in_set(n, false);
  std::set<std::pair<int, int>> seen;
  std::deque<std::pair<int, int>> queue;
  for (int w : g.neighbors(a)) {
    queue.emplace_back(a, w);
    seen.emplace(a, w);
  }
  while (!queue.empty()) {
    auto [u, v] = queue.front();
    queue.pop_front();
    in_set[v] = true;
    for (int w : g.neighbors(v)) {
      if (w == u) continue;
      const bool collider = g.mark(u, v) == Mark::head && g.mark(w, v) == Mark::head;
      if (!collider && !g.adjacent(u, w)) continue;
      if (seen.emplace(v, w).second) queue.emplace_back(v, w);
    }
  }
  in_set[a] = false;
  std::vector<int> out;
  for (int v = 0; v < n; ++v)
    if (in_set[v]) out.push_back(v);
  return out;
}

// Writes mark `m` at `at` on the edge (from, at). Circles are overwritten;
// any other existing mark wins and the conflict is reported.
class Orienter {
 public:
  Orienter(Pag& g, std::vector<std::string>* warnings, bool strict)
      : g_(g), warnings_(warnings), strict_(strict) {}

  bool set(int from, int at, Mark m, const char* rule) {
    const Mark current = g_.mark(from, at);
    if (current == m) return false;
    if (current == Mark::circle) {
      g_.set_mark(from, at, m);
      return true;
    }
    std::string msg = std::string(rule) + ": conflicting mark at " + g_.label(at) + " on edge " +
                      g_.label(from) + " *-* " + g_.label(at) + " (kept " + mark_name(current) +
                      ", requested " + mark_name(m) + ")";
    if (strict_) throw InconsistencyError(msg);
    if (warnings_) warnings_->push_back(std::move(msg));
    return false;
  }

 private:
  Pag& g_;
  std::vector<std::string>* warnings_;
  bool strict_;
};

bool is_pd_edge(const Pag& g, int from, int to) {
  // Not into `from`, not out of `to`.
  return g.mark(to, from) != Mark::head && g.mark(from, to) != Mark::tail;
}

// Bounded DFS over uncovered potentially directed paths.
class UncoveredPdSearch {
 public:
  explicit UncoveredPdSearch(const Pag& g) : g_(g), on_path_(g.size(), false) {}

  // Is there an uncovered p.d. path <start, first, ..., target>?
  bool reaches(int start, int first, int target) {
    budget_ = kBudget;
    std::fill(on_path_.begin(), on_path_.end(), false);
    on_path_[start] = on_path_[first] = true;
    return extend(start, first, target);
  }

  // Every node at the end of an uncovered p.d. path <start, first, ...>.
  std::vector<bool> reachable(int start, int first) {
    budget_ = kBudget;
    std::vector<bool> out(g_.size(), false);
    std::fill(on_path_.begin(), on_path_.end(), false);
    on_path_[start] = on_path_[first] = true;
    out[first] = true;
    collect(start, first, out);
    return out;
  }

  bool exhausted() const { return budget_ <= 0; }

 private:
  static constexpr long kBudget = 200000;

  bool extend(int prev, int cur, int target) {
    if (--budget_ <= 0) return false;
    if (g_.adjacent(cur, target) && is_pd_edge(g_, cur, target) && !g_.adjacent(prev, target))
      return true;
    for (int next : g_.neighbors(cur)) {
      if (on_path_[next] || next == target) continue;
      if (!is_pd_edge(g_, cur, next) || g_.adjacent(prev, next)) continue;
      on_path_[next] = true;
      const bool hit = extend(cur, next, target);
      on_path_[next] = false;
      if (hit) return true;
    }
    return false;
  }

  void collect(int prev, int cur, std::vector<bool>& out) {
    if (--budget_ <= 0) return;
    for (int next : g_.neighbors(cur)) {
      if (on_path_[next]) continue;
      if (!is_pd_edge(g_, cur, next) || g_.adjacent(prev, next)) continue;
      out[next] = true;
      on_path_[next] = true;
      collect(cur, next, out);
      on_path_[next] = false;
    }
  }

  const Pag& g_;
  std::vector<bool> on_path_;
  long budget_ = kBudget;
};

bool rule1(Pag& g, Orienter& o) {
  bool changed = false;
  const int n = g.size();
  for (int beta = 0; beta < n; ++beta) {
    for (int alpha : g.neighbors(beta)) {
      if (g.mark(alpha, beta) != Mark::head) continue;
      for (int gamma : g.neighbors(beta)) {
        if (gamma == alpha || g.adjacent(alpha, gamma)) continue;
        if (g.mark(gamma, beta) != Mark::circle) continue;
        changed |= o.set(gamma, beta, Mark::tail, "R1");
        changed |= o.set(beta, gamma, Mark::head, "R1");
      }
    }
  }
  return changed;
}

bool rule2(Pag& g, Orienter& o) {
  bool changed = false;
  const int n = g.size();
  for (int alpha = 0; alpha < n; ++alpha) {
    for (int gamma : g.neighbors(alpha)) {
      if (g.mark(alpha, gamma) != Mark::circle) continue;
      for (int beta : g.neighbors(alpha)) {
        if (beta == gamma || !g.adjacent(beta, gamma)) continue;
        const bool first = g.is_directed(alpha, beta) && g.mark(beta, gamma) == Mark::head;
        const bool second = g.mark(alpha, beta) == Mark::head && g.is_directed(beta, gamma);
        if (first || second) {
          changed |= o.set(alpha, gamma, Mark::head, "R2");
          break;
        }
      }
    }
  }
  return changed;
}

bool rule3(Pag& g, Orienter& o) {
  bool changed = false;
  const int n = g.size();
  for (int beta = 0; beta < n; ++beta) {
    for (int theta : g.neighbors(beta)) {
      if (g.mark(theta, beta) != Mark::circle) continue;
      const auto nb = g.neighbors(beta);
      bool fire = false;
      for (std::size_t x = 0; x < nb.size() && !fire; ++x) {
        int alpha = nb[x];
        if (alpha == theta || g.mark(alpha, beta) != Mark::head) continue;
        if (!g.adjacent(alpha, theta) || g.mark(alpha, theta) != Mark::circle) continue;
        for (std::size_t y = x + 1; y < nb.size(); ++y) {
          int gamma = nb[y];
          if (gamma == theta || g.mark(gamma, beta) != Mark::head) continue;
          if (g.adjacent(alpha, gamma)) continue;
          if (!g.adjacent(gamma, theta) || g.mark(gamma, theta) != Mark::circle) continue;
          fire = true;
          break;
        }
      }
      if (fire) changed |= o.set(theta, beta, Mark::head, "R3");
    }
  }
  return changed;
}

bool rule4(Pag& g, const SepsetTable& sepsets, Orienter& o) {
  bool changed = false;
  const int n = g.size();
  for (int beta = 0; beta < n; ++beta) {
    for (int gamma : g.neighbors(beta)) {
      if (g.mark(gamma, beta) != Mark::circle) continue;
      bool done = false;
      for (int alpha : g.neighbors(beta)) {
        if (done) break;
        if (alpha == gamma || g.mark(beta, alpha) != Mark::head) continue;
        if (!g.adjacent(alpha, gamma) || !g.is_directed(alpha, gamma)) continue;

        // Walk back from alpha through colliders that are parents of gamma
        // until a node non-adjacent to gamma closes the path.
        std::vector<bool> visited(n, false);
        visited[beta] = visited[gamma] = visited[alpha] = true;
        std::deque<int> queue{alpha};
        int theta = -1;
        while (!queue.empty() && theta < 0) {
          int v = queue.front();
          queue.pop_front();
          for (int w : g.neighbors(v)) {
            if (visited[w] || g.mark(w, v) != Mark::head) continue;
            if (!g.adjacent(w, gamma)) {
              theta = w;
              break;
            }
            if (g.is_directed(w, gamma) && g.mark(v, w) == Mark::head) {
              visited[w] = true;
              queue.push_back(w);
            }
          }
        }
        if (theta < 0 || !sepsets.contains(theta, gamma)) continue;
        if (sepsets.separates_with(theta, gamma, beta)) {
          changed |= o.set(gamma, beta, Mark::tail, "R4");
          changed |= o.set(beta, gamma, Mark::head, "R4");
        } else {
          changed |= o.set(alpha, beta, Mark::head, "R4");
          changed |= o.set(gamma, beta, Mark::head, "R4");
          changed |= o.set(beta, gamma, Mark::head, "R4");
        }
        done = true;
      }
    }
  }
  return changed;
}

bool is_circle_arrow(const Pag& g, int alpha, int gamma) {
  return g.mark(gamma, alpha) == Mark::circle && g.mark(alpha, gamma) == Mark::head;
}

bool rule8(Pag& g, Orienter& o) {
  bool changed = false;
  const int n = g.size();
  for (int alpha = 0; alpha < n; ++alpha) {
    for (int gamma : g.neighbors(alpha)) {
      if (!is_circle_arrow(g, alpha, gamma)) continue;
      for (int beta : g.neighbors(alpha)) {
        if (beta == gamma || !g.is_directed(beta, gamma)) continue;
        const bool directed = g.is_directed(alpha, beta);
        const bool tail_circle = g.mark(beta, alpha) == Mark::tail && g.mark(alpha, beta) == Mark::circle;
        if (directed || tail_circle) {
          changed |= o.set(gamma, alpha, Mark::tail, "R8");
          break;
        }
      }
    }
  }
  return changed;
}

bool rule9(Pag& g, Orienter& o, std::vector<std::string>* warnings) {
  bool changed = false;
  const int n = g.size();
  UncoveredPdSearch search(g);
  for (int alpha = 0; alpha < n; ++alpha) {
    for (int gamma : g.neighbors(alpha)) {
      if (!is_circle_arrow(g, alpha, gamma)) continue;
      for (int beta : g.neighbors(alpha)) {
        if (beta == gamma || g.adjacent(beta, gamma) || !is_pd_edge(g, alpha, beta)) continue;
        const bool hit = search.reaches(alpha, beta, gamma);
        if (search.exhausted() && warnings) warnings->push_back("R9: path search budget exhausted");
        if (hit) {
          changed |= o.set(gamma, alpha, Mark::tail, "R9");
          break;
        }
      }
    }
  }
  return changed;
}

bool rule10(Pag& g, Orienter& o, std::vector<std::string>* warnings) {
  bool changed = false;
  const int n = g.size();
  UncoveredPdSearch search(g);
  for (int alpha = 0; alpha < n; ++alpha) {
    for (int gamma : g.neighbors(alpha)) {
      if (!is_circle_arrow(g, alpha, gamma)) continue;
      std::vector<int> parents;
      for (int v : g.neighbors(gamma))
        if (v != alpha && g.is_directed(v, gamma)) parents.push_back(v);
      if (parents.size() < 2) continue;

      // first_steps[v] = neighbours mu of alpha that start an uncovered p.d.
      // path from alpha to v.
      std::vector<std::vector<int>> first_steps(n);
      for (int mu : g.neighbors(alpha)) {
        if (mu == gamma || !is_pd_edge(g, alpha, mu)) continue;
        auto reach = search.reachable(alpha, mu);
        if (search.exhausted() && warnings) warnings->push_back("R10: path search budget exhausted");
        for (int v : parents)
          if (reach[v]) first_steps[v].push_back(mu);
      }
      bool fire = false;
      for (std::size_t x = 0; x < parents.size() && !fire; ++x) {
        for (std::size_t y = x + 1; y < parents.size() && !fire; ++y) {
          for (int mu : first_steps[parents[x]]) {
            for (int omega : first_steps[parents[y]]) {
              if (mu != omega && !g.adjacent(mu, omega)) {
                fire = true;
                break;
              }
            }
            if (fire) break;
          }
        }
      }
      if (fire) changed |= o.set(gamma, alpha, Mark::tail, "R10");
    }
  }
  return changed;
}

}  // namespace

SkeletonResult learn_skeleton(const CiOracle& ci, int n, const FciOptions& options,
                              std::vector<std::string> labels) {
  if (n < 0) throw ArgumentError("learn_skeleton: negative node count");
  SkeletonResult result{Pag::complete(n, std::move(labels)), {}, 0};
  Pag& g = result.graph;
  const int cap = options.max_cond < 0 ? std::max(n - 2, 0) : std::min(options.max_cond, std::max(n - 2, 0));

  auto test = [&](int a, int b, std::span<const int> z) {
    ++result.ci_tests;
    return ci(a, b, z);
  };

  // PC-stable: adjacency sets are frozen at the start of each depth.
  for (int depth = 0; depth <= cap; ++depth) {
    std::vector<std::vector<int>> adj(n);
    bool any = false;
    for (int i = 0; i < n; ++i) {
      adj[i] = g.neighbors(i);
      if (static_cast<int>(adj[i].size()) - 1 >= depth) any = true;
    }
    if (!any) break;
    for (int i = 0; i < n; ++i) {
      for (int j : adj[i]) {
        if (j < i || !g.adjacent(i, j)) continue;
        for (auto [a, b] : {std::pair{i, j}, std::pair{j, i}}) {
          const auto candidates = without(adj[a], b);
          const bool removed = for_each_subset(candidates, depth, [&](std::span<const int> z) {
            if (!test(a, b, z)) return false;
            g.remove_edge(a, b);
            result.sepsets.record(a, b, std::vector<int>(z.begin(), z.end()));
            return true;
          });
          if (removed) break;
        }
      }
    }
  }

  if (!options.possible_dsep || n < 3) return result;

  const Pag oriented = orient_v_structures(g, result.sepsets);
  std::vector<std::vector<int>> pds(n);
  for (int v = 0; v < n; ++v) pds[v] = possible_dsep(oriented, v);

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!g.adjacent(i, j)) continue;
      for (auto [a, b] : {std::pair{i, j}, std::pair{j, i}}) {
        const auto candidates = without(pds[a], a, b);
        const int limit = std::min<int>(cap, static_cast<int>(candidates.size()));
        bool removed = false;
        for (int depth = 0; depth <= limit && !removed; ++depth) {
          removed = for_each_subset(candidates, depth, [&](std::span<const int> z) {
            if (!test(a, b, z)) return false;
            g.remove_edge(a, b);
            result.sepsets.record(a, b, std::vector<int>(z.begin(), z.end()));
            return true;
          });
        }
        if (removed) break;
      }
    }
  }
  return result;
}

Pag orient_v_structures(const Pag& p, const SepsetTable& sepsets, std::vector<std::string>* warnings,
                        bool strict) {
  Pag g = p;
  Orienter o(g, warnings, strict);
  const int n = p.size();
  for (int k = 0; k < n; ++k) {
    const auto nb = p.neighbors(k);
    for (std::size_t x = 0; x < nb.size(); ++x) {
      for (std::size_t y = x + 1; y < nb.size(); ++y) {
        int i = nb[x];
        int j = nb[y];
        if (p.adjacent(i, j) || !sepsets.contains(i, j)) continue;
        if (sepsets.separates_with(i, j, k)) continue;
        o.set(i, k, Mark::head, "v-structure");
        o.set(j, k, Mark::head, "v-structure");
      }
    }
  }
  return g;
}

Pag apply_orientation_rules(const Pag& p, const SepsetTable& sepsets, std::vector<std::string>* warnings,
                            bool strict) {
  Pag g = p;
  Orienter o(g, warnings, strict);
  bool changed = true;
  while (changed) {
    changed = false;
    changed |= rule1(g, o);
    changed |= rule2(g, o);
    changed |= rule3(g, o);
    changed |= rule4(g, sepsets, o);
    changed |= rule8(g, o);
    changed |= rule9(g, o, warnings);
    changed |= rule10(g, o, warnings);
  }
  return g;
}

PagLearning learn_pag_detailed(const CiOracle& ci, int n, const FciOptions& options,
                               std::vector<std::string> labels) {
  SkeletonResult skel = learn_skeleton(ci, n, options, std::move(labels));
  PagLearning out;
  out.ci_tests = skel.ci_tests;
  Pag oriented = orient_v_structures(skel.graph, skel.sepsets, &out.warnings, options.strict);
  out.pag = apply_orientation_rules(oriented, skel.sepsets, &out.warnings, options.strict);
  out.sepsets = std::move(skel.sepsets);
  return out;
}

}  // namespace attncausal
