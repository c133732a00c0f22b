#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace attncausal {

// Endpoint mark. Numeric values are the wire encoding of the Pag JSON.
enum class Mark : std::uint8_t { absent = 0, circle = 1, head = 2, tail = 3 };

const char* mark_name(Mark m);

// Mixed graph with per-endpoint marks.
//
// mark(i, j) is the mark at the j end of the edge between i and j, so
// i -> j has mark(i, j) == head and mark(j, i) == tail.
class Pag {
 public:
  Pag() = default;
  explicit Pag(int n, std::vector<std::string> labels = {});

  // Fully connected graph with circle marks everywhere.
  static Pag complete(int n, std::vector<std::string> labels = {});

  int size() const { return n_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(int i) const { return labels_.at(i); }

  Mark mark(int i, int j) const { return marks_[index(i, j)]; }
  bool adjacent(int i, int j) const { return i != j && mark(i, j) != Mark::absent; }

  // Writes the mark at the j end of an existing edge.
  void set_mark(int i, int j, Mark m);
  void add_edge(int i, int j, Mark at_i, Mark at_j);
  void remove_edge(int i, int j);

  std::vector<int> neighbors(int i) const;
  int edge_count() const;

  // i -> j
  bool is_directed(int i, int j) const {
    return mark(i, j) == Mark::head && mark(j, i) == Mark::tail;
  }
  // i <-> j
  bool is_bidirected(int i, int j) const {
    return mark(i, j) == Mark::head && mark(j, i) == Mark::head;
  }

  bool operator==(const Pag& other) const = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
  }
  void check(int i, int j) const;

  int n_ = 0;
  std::vector<std::string> labels_;
  std::vector<Mark> marks_;
};

// Exact equality of mark arrays; labels are ignored. ArgumentError on size
// mismatch.
bool pag_equal(const Pag& a, const Pag& b);

// Applies a relabeling: node i of `p` becomes node perm[i] of the result.
Pag permute_pag(const Pag& p, std::span<const int> perm);

// A maximal ancestral graph from the equivalence class of `p`: o-> becomes
// ->, and the circle component is oriented acyclically without new
// unshielded colliders.
Pag pag_to_mag(const Pag& p);

// m-separation of i and j given z in an ancestral graph (circles are not
// allowed; pass the output of pag_to_mag).
bool m_separated(const Pag& mag, int i, int j, std::span<const int> z);

// Text rendering of the mark matrix with a colour legend
// (green: arrow head, yellow: arrow tail, blue: circle).
std::string render_marks(const Pag& p);

}  // namespace attncausal
