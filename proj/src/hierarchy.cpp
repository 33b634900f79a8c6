#include "ccast/hierarchy.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace ccast {

Hierarchy Hierarchy::build(const std::vector<NodeSpec>& nodes) {
  require(!nodes.empty(), Errc::invalid_config, "node list is empty");
  const int n = static_cast<int>(nodes.size());

  std::unordered_map<std::string, int> input_index;
  for (int i = 0; i < n; ++i) {
    auto [it, inserted] = input_index.emplace(nodes[i].id, i);
    require(inserted, Errc::invalid_config, "duplicate node id '" + nodes[i].id + "'");
  }

  int root = -1;
  std::vector<int> parent_in(n, -1);
  for (int i = 0; i < n; ++i) {
    if (!nodes[i].parent) {
      require(root < 0, Errc::multiple_roots,
              "nodes '" + nodes[root < 0 ? i : root].id + "' and '" + nodes[i].id +
                  "' both lack a parent");
      root = i;
      continue;
    }
    auto it = input_index.find(*nodes[i].parent);
    require(it != input_index.end(), Errc::unknown_parent,
            "node '" + nodes[i].id + "' references unknown parent '" + *nodes[i].parent + "'");
    require(it->second != i, Errc::cycle_detected, "node '" + nodes[i].id + "' is its own parent");
    parent_in[i] = it->second;
  }
  require(root >= 0, Errc::cycle_detected, "no root node; parent links form a cycle");

  // Depth by walking parent chains; a chain longer than n means a cycle.
  std::vector<int> depth(n, 0);
  for (int i = 0; i < n; ++i) {
    int steps = 0;
    int j = i;
    std::vector<int> chain;
    while (depth[j] == 0 && j != root) {
      chain.push_back(j);
      j = parent_in[j];
      require(++steps <= n, Errc::cycle_detected,
              "parent links of node '" + nodes[i].id + "' form a cycle");
    }
    int d = (j == root) ? 1 : depth[j];
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) depth[*it] = ++d;
  }
  depth[root] = 1;

  const int num_levels = *std::max_element(depth.begin(), depth.end());

  // Leaves must live at the bottom level.
  std::vector<bool> has_child(n, false);
  for (int i = 0; i < n; ++i)
    if (parent_in[i] >= 0) has_child[parent_in[i]] = true;
  for (int i = 0; i < n; ++i)
    require(has_child[i] || depth[i] == num_levels, Errc::unbalanced_leaf_depth,
            "leaf '" + nodes[i].id + "' sits at level " + std::to_string(depth[i]) +
                " but the tree has " + std::to_string(num_levels) + " levels");

  // Level-order reindex, stable within a level by input order.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return depth[a] < depth[b]; });
  std::vector<int> new_index(n);
  for (int k = 0; k < n; ++k) new_index[order[k]] = k;

  Hierarchy h;
  h.labels_.resize(n);
  h.levels_.resize(n);
  h.parents_.resize(n);
  h.children_.resize(n);
  h.ancestors_.resize(n);
  h.num_levels_ = num_levels;
  h.level_sets_.resize(num_levels);
  for (int k = 0; k < n; ++k) {
    const int i = order[k];
    h.labels_[k] = nodes[i].id;
    h.levels_[k] = depth[i];
    h.parents_[k] = parent_in[i] < 0 ? -1 : new_index[parent_in[i]];
    h.level_sets_[depth[i] - 1].push_back(k);
  }
  for (int k = 0; k < n; ++k)
    if (h.parents_[k] >= 0) h.children_[h.parents_[k]].push_back(k);
  for (int k = 0; k < n; ++k) {
    for (int j = k; j >= 0; j = h.parents_[j]) h.ancestors_[k].push_back(j);
  }
  h.m_ = static_cast<int>(h.level_sets_.back().size());
  return h;
}

std::pair<int, int> Hierarchy::level_range(int l) const {
  const auto& s = level_nodes(l);
  return {s.front(), s.back() + 1};
}

int Hierarchy::index_of(const std::string& label) const {
  for (int i = 0; i < n(); ++i)
    if (labels_[i] == label) return i;
  fail(Errc::unknown_series_id, "no node labelled '" + label + "'");
}

bool Hierarchy::same_structure(const Hierarchy& other) const {
  return labels_ == other.labels_ && levels_ == other.levels_ && parents_ == other.parents_;
}

HierarchyMatrices matrices(const Hierarchy& h) {
  const int n = h.n(), m = h.m(), r = h.r();
  HierarchyMatrices out;
  out.S = Mat::Zero(n, m);
  for (int j = 0; j < m; ++j) {
    // Leaf j contributes to itself and every node on its path to the root.
    for (int a : h.ancestors(h.leaf_index(j))) out.S(a, j) = 1.0;
  }
  out.S_sum = out.S.topRows(r);
  out.A = Mat::Zero(r, n);
  out.A.leftCols(r) = Mat::Identity(r, r);
  out.A.rightCols(m) = -out.S_sum;

  if (r == 0) {
    out.M = Mat::Identity(n, n);
    return out;
  }
  Mat gram = out.A * out.A.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  require(llt.info() == Eigen::Success, Errc::singular_gram,
          "A A^T is not positive definite");
  Eigen::MatrixXd AinvA = llt.solve(Eigen::MatrixXd(out.A));
  out.M = Mat::Identity(n, n) - out.A.transpose() * AinvA;
  return out;
}

Vec aggregate_bottom(const Hierarchy& h, const Vec& b) {
  require(b.size() == h.m(), Errc::dimension_mismatch,
          "expected bottom vector of length " + std::to_string(h.m()) + ", got " +
              std::to_string(b.size()));
  Vec y = Vec::Zero(h.n());
  for (int j = 0; j < h.m(); ++j)
    for (int a : h.ancestors(h.leaf_index(j))) y[a] += b[j];
  return y;
}

std::vector<NodeSpec> parse_hierarchy_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::invalid_config, std::string("hierarchy JSON: ") + e.what());
  }
  require(doc.is_object() && doc.contains("nodes") && doc["nodes"].is_array(),
          Errc::invalid_config, "hierarchy JSON must have a top-level \"nodes\" array");
  std::vector<NodeSpec> nodes;
  for (const auto& item : doc["nodes"]) {
    require(item.is_object() && item.contains("id") && item["id"].is_string(),
            Errc::invalid_config, "every node needs a string \"id\"");
    NodeSpec spec;
    spec.id = item["id"].get<std::string>();
    if (item.contains("parent") && !item["parent"].is_null()) {
      require(item["parent"].is_string(), Errc::invalid_config,
              "\"parent\" must be a string or null");
      spec.parent = item["parent"].get<std::string>();
    }
    nodes.push_back(std::move(spec));
  }
  return nodes;
}

Hierarchy load_hierarchy_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io_error, "cannot open hierarchy file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return Hierarchy::build(parse_hierarchy_json(ss.str()));
}

void save_matrix_csv(const Mat& m, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::io_error, "cannot write '" + path + "'");
  for (int j = 0; j < m.cols(); ++j) out << (j ? "," : "") << j;
  out << "\n";
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << "\n";
  }
}

}  // namespace ccast
