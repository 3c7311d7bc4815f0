#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "knockoff/errors.hpp"
#include "knockoff/hierarchy.hpp"
#include "knockoff/rng.hpp"

namespace knockoff {

// Gradient-bandit node. `masked` stands in for a potential of -infinity: the
// arm draws probability zero, is never sampled, and never gets updated.
struct PolicyNode {
  std::string name;
  int leaf_z = -1;
  double potential = 0.0;
  std::size_t visits = 0;
  bool masked = false;
  std::vector<PolicyNode> children;

  bool is_leaf() const { return children.empty(); }
};

// Mirrors the adversary label hierarchy one-to-one. leaf_paths[z] holds the
// child indices from the root down to z's leaf.
struct PolicyTree {
  PolicyNode root;
  std::vector<std::vector<std::size_t>> leaf_paths;
};

namespace detail {
inline void index_leaves(const PolicyNode& n, std::vector<std::size_t>& path,
                         std::vector<std::vector<std::size_t>>& leaf_paths) {
  if (n.is_leaf()) {
    if (n.leaf_z < 0) throw std::invalid_argument("policy: leaf without z");
    auto z = static_cast<std::size_t>(n.leaf_z);
    if (z >= leaf_paths.size()) leaf_paths.resize(z + 1);
    leaf_paths[z] = path;
    return;
  }
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    path.push_back(i);
    index_leaves(n.children[i], path, leaf_paths);
    path.pop_back();
  }
}

inline PolicyNode policy_node_from(const HierarchyNode& h) {
  PolicyNode n;
  n.name = h.name;
  n.leaf_z = h.leaf_z;
  for (const auto& c : h.children) n.children.push_back(policy_node_from(c));
  return n;
}
}  // namespace detail

inline PolicyTree policy_from_hierarchy(const Hierarchy& h, std::size_t n_z) {
  validate_hierarchy(h, n_z);
  PolicyTree t;
  t.root = detail::policy_node_from(h.root);
  std::vector<std::size_t> path;
  t.leaf_paths.assign(n_z, {});
  std::vector<std::vector<std::size_t>> built;
  detail::index_leaves(t.root, path, built);
  t.leaf_paths = std::move(built);
  return t;
}

inline PolicyTree policy_flat(const std::vector<std::string>& z_names) {
  return policy_from_hierarchy(hierarchy_flat(z_names), z_names.size());
}

// Softmax over the unmasked children's potentials; masked arms get exactly 0.
// All-masked parents return all zeros.
inline std::vector<double> action_probs(const PolicyNode& parent) {
  if (parent.is_leaf()) throw std::invalid_argument("action_probs: leaf has no actions");
  std::vector<double> probs(parent.children.size(), 0.0);
  double mx = -1e300;
  bool any = false;
  for (const auto& c : parent.children)
    if (!c.masked) {
      mx = std::max(mx, c.potential);
      any = true;
    }
  if (!any) return probs;
  double total = 0.0;
  for (std::size_t i = 0; i < parent.children.size(); ++i) {
    if (parent.children[i].masked) continue;
    probs[i] = std::exp(parent.children[i].potential - mx);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

struct SampledPath {
  std::vector<std::size_t> child_indices;
  int z = -1;
};

// Walk root to leaf, drawing a child at every level.
inline SampledPath sample_action(const PolicyTree& tree, Rng& rng) {
  if (tree.root.masked) throw PoolExhausted("sample_action: every action is masked");
  SampledPath out;
  const PolicyNode* node = &tree.root;
  while (!node->is_leaf()) {
    auto probs = action_probs(*node);
    std::size_t pick = rng.sample_discrete(probs);
    out.child_indices.push_back(pick);
    node = &node->children[pick];
  }
  out.z = node->leaf_z;
  return out;
}

namespace detail {
inline PolicyNode* walk_mut(PolicyTree& tree, std::span<const std::size_t> path, std::size_t depth) {
  PolicyNode* node = &tree.root;
  for (std::size_t i = 0; i < depth; ++i) {
    if (path[i] >= node->children.size()) throw std::invalid_argument("policy: path does not match tree");
    node = &node->children[path[i]];
  }
  return node;
}
}  // namespace detail

// One gradient-bandit update at every level of the sampled path. At each
// parent, with advantage a = r - baseline, probabilities pi taken from the
// potentials as they were before this level's update, and alpha = 1/N after
// incrementing the chosen child's visit count:
//   chosen:   H += alpha * a * (1 - pi_chosen)
//   siblings: H -= alpha * a * pi_sibling
// The two moves cancel, so each sibling group's potentials keep their sum.
inline void update_policy(PolicyTree& tree, const SampledPath& path, double r, double baseline) {
  if (path.child_indices.empty()) throw std::invalid_argument("update_policy: empty path");
  for (std::size_t depth = 0; depth < path.child_indices.size(); ++depth) {
    PolicyNode* parent = detail::walk_mut(tree, path.child_indices, depth);
    std::size_t c = path.child_indices[depth];
    if (c >= parent->children.size()) throw std::invalid_argument("update_policy: path does not match tree");
    if (parent->children[c].masked) throw std::invalid_argument("update_policy: chosen action is masked");
    auto probs = action_probs(*parent);
    PolicyNode& chosen = parent->children[c];
    chosen.visits += 1;
    double alpha = 1.0 / static_cast<double>(chosen.visits);
    double adv = r - baseline;
    for (std::size_t i = 0; i < parent->children.size(); ++i) {
      if (parent->children[i].masked) continue;
      if (i == c)
        parent->children[i].potential += alpha * adv * (1.0 - probs[i]);
      else
        parent->children[i].potential -= alpha * adv * probs[i];
    }
  }
  PolicyNode* leaf = detail::walk_mut(tree, path.child_indices, path.child_indices.size());
  if (!leaf->is_leaf()) throw std::invalid_argument("update_policy: path stops short of a leaf");
}

// Masks z's leaf and propagates upward: a parent with every child masked is
// itself masked.
inline void mask_action(PolicyTree& tree, std::size_t z) {
  if (z >= tree.leaf_paths.size()) throw std::invalid_argument("mask_action: z out of range");
  const auto& path = tree.leaf_paths[z];
  detail::walk_mut(tree, path, path.size())->masked = true;
  for (std::size_t depth = path.size(); depth-- > 0;) {
    PolicyNode* parent = detail::walk_mut(tree, path, depth);
    bool all = true;
    for (const auto& c : parent->children) all = all && c.masked;
    if (all) parent->masked = true;
  }
}

inline bool all_masked(const PolicyTree& tree) { return tree.root.masked; }

// Terminal probability of reaching z's leaf: the product of the branch
// probabilities along its path.
inline double leaf_probability(const PolicyTree& tree, std::size_t z) {
  if (z >= tree.leaf_paths.size()) throw std::invalid_argument("leaf_probability: z out of range");
  const PolicyNode* node = &tree.root;
  double p = 1.0;
  for (std::size_t idx : tree.leaf_paths[z]) {
    auto probs = action_probs(*node);
    p *= probs[idx];
    node = &node->children[idx];
  }
  return p;
}

struct PolicySnapshotRow {
  std::size_t z = 0;
  std::string name;
  double pi = 0.0;
  std::size_t visits = 0;
};

inline std::vector<PolicySnapshotRow> policy_snapshot(const PolicyTree& tree) {
  std::vector<PolicySnapshotRow> rows;
  rows.reserve(tree.leaf_paths.size());
  for (std::size_t z = 0; z < tree.leaf_paths.size(); ++z) {
    const auto& path = tree.leaf_paths[z];
    const PolicyNode* node = &tree.root;
    double p = 1.0;
    for (std::size_t idx : path) {
      auto probs = action_probs(*node);
      p *= probs[idx];
      node = &node->children[idx];
    }
    rows.push_back({z, node->name, p, node->visits});
  }
  return rows;
}

}  // namespace knockoff
