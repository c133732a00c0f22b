#include "attncausal/pag.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <sstream>

#include "attncausal/errors.hpp"

namespace attncausal {

const char* mark_name(Mark m) {
  switch (m) {
    case Mark::absent: return "absent";
    case Mark::circle: return "circle";
    case Mark::head: return "head";
    case Mark::tail: return "tail";
  }
  return "?";
}

Pag::Pag(int n, std::vector<std::string> labels)
    : n_(n), labels_(std::move(labels)), marks_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), Mark::absent) {
  if (n < 0) throw ArgumentError("Pag: negative size");
  if (labels_.empty()) {
    labels_.reserve(n);
    for (int i = 0; i < n; ++i) labels_.push_back("X" + std::to_string(i));
  }
  if (static_cast<int>(labels_.size()) != n) throw ArgumentError("Pag: label count != n");
}

Pag Pag::complete(int n, std::vector<std::string> labels) {
  Pag p(n, std::move(labels));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) p.marks_[p.index(i, j)] = Mark::circle;
  return p;
}

void Pag::check(int i, int j) const {
  if (i < 0 || j < 0 || i >= n_ || j >= n_) throw ArgumentError("Pag: node index out of range");
  if (i == j) throw ArgumentError("Pag: self-edges are not allowed");
}

void Pag::set_mark(int i, int j, Mark m) {
  check(i, j);
  if (m == Mark::absent) throw ArgumentError("Pag::set_mark: use remove_edge");
  if (marks_[index(i, j)] == Mark::absent) throw ArgumentError("Pag::set_mark: no edge between nodes");
  marks_[index(i, j)] = m;
}

void Pag::add_edge(int i, int j, Mark at_i, Mark at_j) {
  check(i, j);
  if (at_i == Mark::absent || at_j == Mark::absent) throw ArgumentError("Pag::add_edge: absent mark");
  marks_[index(j, i)] = at_i;
  marks_[index(i, j)] = at_j;
}

void Pag::remove_edge(int i, int j) {
  check(i, j);
  marks_[index(i, j)] = Mark::absent;
  marks_[index(j, i)] = Mark::absent;
}

std::vector<int> Pag::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < n_; ++j)
    if (adjacent(i, j)) out.push_back(j);
  return out;
}

int Pag::edge_count() const {
  int count = 0;
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j)
      if (adjacent(i, j)) ++count;
  return count;
}

bool pag_equal(const Pag& a, const Pag& b) {
  if (a.size() != b.size()) throw ArgumentError("pag_equal: size mismatch");
  for (int i = 0; i < a.size(); ++i)
    for (int j = 0; j < a.size(); ++j)
      if (i != j && a.mark(i, j) != b.mark(i, j)) return false;
  return true;
}

Pag permute_pag(const Pag& p, std::span<const int> perm) {
  const int n = p.size();
  if (static_cast<int>(perm.size()) != n) throw ArgumentError("permute_pag: permutation size mismatch");
  std::vector<std::string> labels(n);
  std::vector<bool> seen(n, false);
  for (int i = 0; i < n; ++i) {
    int t = perm[i];
    if (t < 0 || t >= n || seen[t]) throw ArgumentError("permute_pag: not a permutation");
    seen[t] = true;
    labels[t] = p.label(i);
  }
  Pag out(n, std::move(labels));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (p.adjacent(i, j)) out.add_edge(perm[i], perm[j], p.mark(j, i), p.mark(i, j));
  return out;
}

Pag pag_to_mag(const Pag& p) {
  const int n = p.size();
  Pag mag = p;
  // Partially directed edges: a circle facing an arrowhead becomes a tail.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!p.adjacent(i, j)) continue;
      if (p.mark(i, j) == Mark::circle && p.mark(j, i) == Mark::head) mag.set_mark(i, j, Mark::tail);
      if (p.mark(i, j) == Mark::circle && p.mark(j, i) == Mark::tail) mag.set_mark(i, j, Mark::head);
    }
  }

  // Circle component: maximum cardinality search, then orient from earlier
  // to later visit. For a chordal component the earlier neighbours of each
  // vertex form a clique, so no unshielded collider is created.
  auto circle_edge = [&](int a, int b) {
    return p.adjacent(a, b) && p.mark(a, b) == Mark::circle && p.mark(b, a) == Mark::circle;
  };
  std::vector<int> visit_rank(n, -1);
  std::vector<int> weight(n, 0);
  for (int step = 0; step < n; ++step) {
    int best = -1;
    for (int v = 0; v < n; ++v)
      if (visit_rank[v] < 0 && (best < 0 || weight[v] > weight[best])) best = v;
    visit_rank[best] = step;
    for (int w = 0; w < n; ++w)
      if (visit_rank[w] < 0 && circle_edge(best, w)) ++weight[w];
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (!circle_edge(a, b)) continue;
      if (visit_rank[a] < visit_rank[b]) {
        mag.add_edge(a, b, Mark::tail, Mark::head);
      } else {
        mag.add_edge(a, b, Mark::head, Mark::tail);
      }
    }
  }
  return mag;
}

bool m_separated(const Pag& mag, int i, int j, std::span<const int> z) {
  const int n = mag.size();
  auto in_range = [n](int v) { return v >= 0 && v < n; };
  if (!in_range(i) || !in_range(j) || i == j) throw ArgumentError("m_separated: bad endpoints");
  std::vector<bool> in_z(n, false);
  for (int v : z) {
    if (!in_range(v)) throw ArgumentError("m_separated: conditioning index out of range");
    in_z[v] = true;
  }
  if (in_z[i] || in_z[j]) throw ArgumentError("m_separated: endpoint in conditioning set");
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (mag.adjacent(a, b) && mag.mark(a, b) == Mark::circle)
        throw ArgumentError("m_separated: graph still has circle marks");

  // Ancestors of z through directed edges.
  std::vector<bool> anc(n, false);
  std::vector<int> stack(z.begin(), z.end());
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (anc[v]) continue;
    anc[v] = true;
    for (int u = 0; u < n; ++u)
      if (mag.adjacent(u, v) && mag.is_directed(u, v) && !anc[u]) stack.push_back(u);
  }

  // Reachability over (node, arrived-with-arrowhead) states. A walk is
  // m-connecting iff its colliders lie in An(z) and its non-colliders lie
  // outside z.
  std::vector<std::array<bool, 2>> visited(n, {false, false});
  std::deque<std::pair<int, bool>> queue;
  for (int w : mag.neighbors(i)) queue.emplace_back(w, mag.mark(i, w) == Mark::head);
  while (!queue.empty()) {
    auto [v, head_in] = queue.front();
    queue.pop_front();
    if (visited[v][head_in]) continue;
    visited[v][head_in] = true;
    if (v == j) return false;
    for (int w : mag.neighbors(v)) {
      const bool collider = head_in && mag.mark(w, v) == Mark::head;
      const bool pass = collider ? anc[v] : !in_z[v];
      if (pass) queue.emplace_back(w, mag.mark(v, w) == Mark::head);
    }
  }
  return true;
}

std::string render_marks(const Pag& p) {
  auto glyph = [](Mark m) {
    switch (m) {
      case Mark::absent: return '.';
      case Mark::circle: return 'o';
      case Mark::head: return '>';
      case Mark::tail: return '-';
    }
    return '?';
  };
  std::size_t width = 1;
  for (const auto& l : p.labels()) width = std::max(width, l.size());
  std::ostringstream out;
  out << "legend: '>' arrow head (green), '-' arrow tail (yellow), 'o' circle (blue), '.' no edge\n";
  out << "row i, column j shows the mark at j on the edge i *-* j\n";
  out << std::string(width + 1, ' ');
  for (int j = 0; j < p.size(); ++j) out << ' ' << j;
  out << '\n';
  for (int i = 0; i < p.size(); ++i) {
    std::string name = p.label(i);
    out << name << std::string(width + 1 - name.size(), ' ');
    for (int j = 0; j < p.size(); ++j) {
      std::string col = std::to_string(j);
      out << std::string(col.size(), ' ') << (i == j ? ' ' : glyph(p.mark(i, j)));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace attncausal
