#pragma once

#include "ccast/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ccast {

struct NodeSpec {
  std::string id;
  std::optional<std::string> parent;  // absent only for the root
};

// Immutable rooted tree with level-order node indexing: every parent index is
// smaller than its children's, nodes of level l precede nodes of level l+1,
// and ties within a level keep input order. Levels are 1-based (root = 1) and
// every leaf must sit at the bottom level.
class Hierarchy {
 public:
  static Hierarchy build(const std::vector<NodeSpec>& nodes);

  int n() const { return static_cast<int>(labels_.size()); }
  int m() const { return m_; }
  int r() const { return n() - m_; }
  int num_levels() const { return num_levels_; }

  int level(int i) const { return levels_[i]; }
  int parent(int i) const { return parents_[i]; }  // -1 for the root
  bool is_leaf(int i) const { return children_[i].empty(); }
  const std::vector<int>& children(int i) const { return children_[i]; }
  // Path node -> root, self first.
  const std::vector<int>& ancestors(int i) const { return ancestors_[i]; }
  // Node indices of one level; contiguous and ascending.
  const std::vector<int>& level_nodes(int l) const { return level_sets_[l - 1]; }
  // Half-open index range [first, last) of one level.
  std::pair<int, int> level_range(int l) const;

  const std::string& label(int i) const { return labels_[i]; }
  int index_of(const std::string& label) const;

  // Bottom-level node i corresponds to overall index r() + i.
  int leaf_index(int bottom_pos) const { return r() + bottom_pos; }

  bool same_structure(const Hierarchy& other) const;

 private:
  Hierarchy() = default;
  std::vector<std::string> labels_;
  std::vector<int> levels_;
  std::vector<int> parents_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> ancestors_;
  std::vector<std::vector<int>> level_sets_;
  int m_ = 0;
  int num_levels_ = 0;
};

struct HierarchyMatrices {
  Mat S;      // n x m aggregation matrix, [S_sum; I_m]
  Mat S_sum;  // r x m upper block
  Mat A;      // r x n constraint matrix [I_r | -S_sum]; null(A) = coherent subspace
  Mat M;      // n x n orthogonal projector onto null(A)
};

// M = I - A^T (A A^T)^{-1} A, Gram inverse through a Cholesky factorization
// (A A^T is SPD for any valid tree). For r = 0, M = I.
HierarchyMatrices matrices(const Hierarchy& h);

// y = S b; the result satisfies A y = 0 to machine precision.
Vec aggregate_bottom(const Hierarchy& h, const Vec& b);

// JSON spec file: {"nodes": [{"id": ..., "parent": ...|null}, ...]},
// array order significant.
Hierarchy load_hierarchy_json(const std::string& path);
std::vector<NodeSpec> parse_hierarchy_json(const std::string& text);

// Debug CSV dump, row-major with a header row of column indices.
void save_matrix_csv(const Mat& m, const std::string& path);

}  // namespace ccast
