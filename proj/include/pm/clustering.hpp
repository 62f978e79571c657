#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pm/projection.hpp"

namespace pm {

struct LabeledPoint {
  std::string record_id;
  Point2 position;
};

/// Leaves carry node ids 0..N-1 in input order; internal nodes get
/// N, N+1, ... in the order they are created.
struct ClusterNode {
  int node_id = 0;
  std::vector<int> children;               // empty for leaves, exactly two otherwise
  std::string leaf_record_id;              // leaves only
  std::optional<double> merge_distance;    // internal nodes only
  std::size_t leaf_count = 1;
  Point2 centroid;
  bool eligible = false;

  bool is_leaf() const noexcept { return children.empty(); }
  friend bool operator==(const ClusterNode&, const ClusterNode&) = default;
};

struct ClusterTree {
  std::vector<ClusterNode> nodes;  // indexed by node_id
  int root = -1;                   // -1 for an empty tree
  std::vector<int> merge_order;    // internal node ids by creation

  std::size_t leaf_count() const noexcept { return nodes.empty() ? 0 : (nodes.size() + 1) / 2; }
  const ClusterNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
  std::vector<std::string> leaf_ids(int id) const;
  /// Parent of every node, -1 for the root.
  std::vector<int> parents() const;

  friend bool operator==(const ClusterTree&, const ClusterTree&) = default;
};

/// Average-linkage agglomerative clustering over Euclidean 2-D distance.
/// Among equal-distance candidates the pair with the lexicographically
/// smallest (min node id, max node id) merges first.
ClusterTree build_dendrogram(std::span<const LabeledPoint> points);

struct EligibilityParams {
  std::size_t min_leaves = 3;
  std::size_t max_leaves = 20;
  double dist_factor = 2.0;
};

/// Median of all merge distances (mean of the middle two for even counts).
double median_merge_distance(const ClusterTree& tree);

/// Internal nodes with min_leaves <= leaf_count <= max_leaves whose merge
/// distance is at most dist_factor * median merge distance, in merge order.
std::vector<ClusterNode> eligible_clusters(const ClusterTree& tree, const EligibilityParams& params = {});

/// Sets `eligible` on every node according to eligible_clusters.
void mark_eligible(ClusterTree& tree, const EligibilityParams& params = {});

}  // namespace pm
