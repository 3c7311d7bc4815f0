#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "knockoff/cluster.hpp"
#include "knockoff/dataset.hpp"
#include "knockoff/errors.hpp"
#include "knockoff/io.hpp"

namespace knockoff {

// Adversary label tree: root "entity", internal grouping nodes, and one leaf
// per z. The policy mirrors this structure one-to-one.
struct HierarchyNode {
  std::string name;
  int leaf_z = -1;  // >= 0 iff this is a leaf
  std::vector<HierarchyNode> children;

  bool is_leaf() const { return children.empty(); }
};

struct Hierarchy {
  HierarchyNode root;
};

namespace detail {
inline void collect_leaves(const HierarchyNode& n, std::vector<int>& zs) {
  if (n.is_leaf()) {
    zs.push_back(n.leaf_z);
    return;
  }
  for (const auto& c : n.children) collect_leaves(c, zs);
}
}  // namespace detail

// Leaves must partition 0..n_z-1 exactly; internal nodes must not be empty.
inline void validate_hierarchy(const Hierarchy& h, std::size_t n_z) {
  std::vector<int> zs;
  detail::collect_leaves(h.root, zs);
  if (zs.size() != n_z) throw std::invalid_argument("hierarchy: leaf count != label count");
  std::vector<char> seen(n_z, 0);
  for (int z : zs) {
    if (z < 0 || static_cast<std::size_t>(z) >= n_z) throw std::invalid_argument("hierarchy: leaf z out of range");
    if (seen[z]) throw std::invalid_argument("hierarchy: duplicate leaf z " + std::to_string(z));
    seen[z] = 1;
  }
}

inline Hierarchy hierarchy_flat(const std::vector<std::string>& z_names) {
  if (z_names.empty()) throw std::invalid_argument("hierarchy_flat: no labels");
  Hierarchy h;
  h.root.name = "entity";
  for (std::size_t z = 0; z < z_names.size(); ++z) {
    HierarchyNode leaf;
    leaf.name = z_names[z];
    leaf.leaf_z = static_cast<int>(z);
    h.root.children.push_back(std::move(leaf));
  }
  return h;
}

// Closed-world universes keep their provenance: one coarse node per source
// dataset, leaves in global z order beneath it.
inline Hierarchy hierarchy_from_sources(const std::vector<PoolSource>& sources) {
  if (sources.empty()) throw std::invalid_argument("hierarchy_from_sources: no sources");
  Hierarchy h;
  h.root.name = "entity";
  std::size_t z = 0;
  for (const auto& src : sources) {
    HierarchyNode coarse;
    coarse.name = src.name;
    for (const auto& name : src.z_names) {
      HierarchyNode leaf;
      leaf.name = name;
      leaf.leaf_z = static_cast<int>(z++);
      coarse.children.push_back(std::move(leaf));
    }
    h.root.children.push_back(std::move(coarse));
  }
  return h;
}

// Without provenance, coarse nodes come from average-linkage clustering of
// per-label mean feature vectors. Every z needs at least one sample.
inline Hierarchy build_hierarchy(const SamplePool& pool, std::size_t n_coarse) {
  if (pool.n_z() == 0) throw std::invalid_argument("build_hierarchy: pool has no labels");
  if (n_coarse == 0 || n_coarse > pool.n_z())
    throw std::invalid_argument("build_hierarchy: n_coarse must lie in [1, |Z|]");

  std::vector<std::vector<double>> means(pool.n_z(), std::vector<double>(pool.d_in, 0.0));
  std::vector<std::size_t> counts(pool.n_z(), 0);
  for (const auto& s : pool.samples) {
    auto z = s.adversary_label;
    for (std::size_t j = 0; j < pool.d_in; ++j) means[z][j] += s.features[j];
    counts[z]++;
  }
  for (std::size_t z = 0; z < pool.n_z(); ++z) {
    if (counts[z] == 0)
      throw std::invalid_argument("build_hierarchy: label without samples: " + pool.z_names[z]);
    for (double& v : means[z]) v /= static_cast<double>(counts[z]);
  }

  std::vector<int> coarse_of = agglomerative_cluster(means, n_coarse);
  Hierarchy h;
  h.root.name = "entity";
  for (std::size_t c = 0; c < n_coarse; ++c) {
    HierarchyNode node;
    node.name = "coarse_" + std::to_string(c);
    for (std::size_t z = 0; z < pool.n_z(); ++z) {
      if (coarse_of[z] != static_cast<int>(c)) continue;
      HierarchyNode leaf;
      leaf.name = pool.z_names[z];
      leaf.leaf_z = static_cast<int>(z);
      node.children.push_back(std::move(leaf));
    }
    h.root.children.push_back(std::move(node));
  }
  return h;
}

// --- persistence (nested JSON) ----------------------------------------------

namespace detail {
inline nlohmann::json node_to_json(const HierarchyNode& n) {
  nlohmann::json j;
  j["name"] = n.name;
  if (n.is_leaf()) {
    j["z"] = n.leaf_z;
  } else {
    nlohmann::json kids = nlohmann::json::array();
    for (const auto& c : n.children) kids.push_back(node_to_json(c));
    j["children"] = std::move(kids);
  }
  return j;
}

inline HierarchyNode node_from_json(const nlohmann::json& j, const std::string& path) {
  HierarchyNode n;
  if (!j.contains("name") || !j["name"].is_string()) throw IoError(path + ": hierarchy node without name");
  n.name = j["name"].get<std::string>();
  if (j.contains("children")) {
    for (const auto& c : j["children"]) n.children.push_back(node_from_json(c, path));
    if (n.children.empty()) throw IoError(path + ": internal node with no children");
  } else if (j.contains("z")) {
    n.leaf_z = j["z"].get<int>();
  } else {
    throw IoError(path + ": node is neither leaf nor internal");
  }
  return n;
}
}  // namespace detail

inline void save_hierarchy(const Hierarchy& h, const std::string& path) {
  io::write_text_file(path, detail::node_to_json(h.root).dump(2) + "\n");
}

inline Hierarchy load_hierarchy(const std::string& path) {
  auto in = io::open_in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  Hierarchy h;
  h.root = detail::node_from_json(j, path);
  return h;
}

}  // namespace knockoff
