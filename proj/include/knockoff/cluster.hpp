#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace knockoff {

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("euclidean: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Bottom-up average-linkage clustering with Lance-Williams updates:
//   d(A+B, C) = (|A| d(A,C) + |B| d(B,C)) / (|A| + |B|)
// Merge choice is the lexicographically smallest (distance, i, j) over active
// slots, which makes the result deterministic and independent of input
// permutation up to cluster relabeling. Returned ids are 0..n_clusters-1
// ordered by each cluster's smallest member index.
inline std::vector<int> agglomerative_cluster(const std::vector<std::vector<double>>& points,
                                              std::size_t n_clusters) {
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("agglomerative_cluster: no points");
  if (n_clusters == 0 || n_clusters > n)
    throw std::invalid_argument("agglomerative_cluster: n_clusters must lie in [1, n]");

  std::vector<std::vector<std::size_t>> members(n);
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = euclidean(points[i], points[j]);

  while (members.size() > n_clusters) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j)
        if (dist[i][j] < best) {
          best = dist[i][j];
          bi = i;
          bj = j;
        }
    double ni = static_cast<double>(members[bi].size());
    double nj = static_cast<double>(members[bj].size());
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k == bi || k == bj) continue;
      double d = (ni * dist[bi][k] + nj * dist[bj][k]) / (ni + nj);
      dist[bi][k] = dist[k][bi] = d;
    }
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    members.erase(members.begin() + static_cast<std::ptrdiff_t>(bj));
    dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(bj));
    for (auto& row : dist) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
  }

  // Stable ids: order clusters by their smallest member.
  std::vector<std::size_t> smallest(members.size());
  for (std::size_t c = 0; c < members.size(); ++c) {
    std::size_t s = members[c][0];
    for (std::size_t m : members[c]) s = std::min(s, m);
    smallest[c] = s;
  }
  std::vector<std::size_t> order(members.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return smallest[a] < smallest[b]; });

  std::vector<int> assignment(n, -1);
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    for (std::size_t m : members[order[rank]]) assignment[m] = static_cast<int>(rank);
  return assignment;
}

}  // namespace knockoff
