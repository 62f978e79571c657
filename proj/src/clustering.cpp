#include "pm/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pm/error.hpp"

namespace pm {

std::vector<std::string> ClusterTree::leaf_ids(int id) const {
  std::vector<std::string> out;
  std::vector<int> stack{id};
  while (!stack.empty()) {
    const auto& n = node(stack.back());
    stack.pop_back();
    if (n.is_leaf()) {
      out.push_back(n.leaf_record_id);
    } else {
      stack.push_back(n.children[1]);
      stack.push_back(n.children[0]);
    }
  }
  return out;
}

std::vector<int> ClusterTree::parents() const {
  std::vector<int> parent(nodes.size(), -1);
  for (const auto& n : nodes) {
    for (int c : n.children) parent[static_cast<std::size_t>(c)] = n.node_id;
  }
  return parent;
}

ClusterTree build_dendrogram(std::span<const LabeledPoint> points) {
  const std::size_t n = points.size();
  ClusterTree tree;
  if (n == 0) return tree;
  tree.nodes.reserve(2 * n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = points[i].position;
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(ErrorCode::NonFinitePoint, points[i].record_id);
    ClusterNode leaf;
    leaf.node_id = static_cast<int>(i);
    leaf.leaf_record_id = points[i].record_id;
    leaf.centroid = p;
    tree.nodes.push_back(std::move(leaf));
  }

  // Slot s holds the active cluster slot_node[s]; merged clusters reuse the
  // lower slot and retire the other.
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::hypot(points[i].position.x - points[j].position.x,
                                  points[i].position.y - points[j].position.y);
      dist[i * n + j] = d;
      dist[j * n + i] = d;
    }
  }
  std::vector<int> slot_node(n);
  std::vector<std::size_t> active(n);
  for (std::size_t i = 0; i < n; ++i) {
    slot_node[i] = static_cast<int>(i);
    active[i] = i;
  }

  double previous = -std::numeric_limits<double>::infinity();
  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    int best_lo = std::numeric_limits<int>::max(), best_hi = std::numeric_limits<int>::max();
    std::size_t best_a = 0, best_b = 0;
    for (std::size_t ai = 0; ai < active.size(); ++ai) {
      const std::size_t a = active[ai];
      for (std::size_t bi = ai + 1; bi < active.size(); ++bi) {
        const std::size_t b = active[bi];
        const double d = dist[a * n + b];
        const int lo = std::min(slot_node[a], slot_node[b]);
        const int hi = std::max(slot_node[a], slot_node[b]);
        if (d < best || (d == best && (lo < best_lo || (lo == best_lo && hi < best_hi)))) {
          best = d;
          best_lo = lo;
          best_hi = hi;
          best_a = a;
          best_b = b;
        }
      }
    }

    if (best < previous - 1e-12 * std::max(1.0, std::abs(previous))) {
      throw std::logic_error("average-linkage merge distances decreased");
    }
    previous = best;

    const auto& left = tree.node(best_lo);
    const auto& right = tree.node(best_hi);
    ClusterNode merged;
    merged.node_id = static_cast<int>(tree.nodes.size());
    merged.children = {best_lo, best_hi};
    merged.merge_distance = best;
    merged.leaf_count = left.leaf_count + right.leaf_count;
    const double wl = static_cast<double>(left.leaf_count);
    const double wr = static_cast<double>(right.leaf_count);
    merged.centroid = {(wl * left.centroid.x + wr * right.centroid.x) / (wl + wr),
                       (wl * left.centroid.y + wr * right.centroid.y) / (wl + wr)};

    // Lance-Williams update for average linkage.
    const std::size_t keep = std::min(best_a, best_b);
    const std::size_t drop = std::max(best_a, best_b);
    const double na = static_cast<double>(tree.node(slot_node[best_a]).leaf_count);
    const double nb = static_cast<double>(tree.node(slot_node[best_b]).leaf_count);
    for (std::size_t k : active) {
      if (k == best_a || k == best_b) continue;
      const double d = (na * dist[k * n + best_a] + nb * dist[k * n + best_b]) / (na + nb);
      dist[k * n + keep] = d;
      dist[keep * n + k] = d;
    }
    slot_node[keep] = merged.node_id;
    active.erase(std::find(active.begin(), active.end(), drop));
    tree.merge_order.push_back(merged.node_id);
    tree.nodes.push_back(std::move(merged));
  }
  tree.root = static_cast<int>(tree.nodes.size()) - 1;
  return tree;
}

double median_merge_distance(const ClusterTree& tree) {
  std::vector<double> d;
  d.reserve(tree.merge_order.size());
  for (int id : tree.merge_order) d.push_back(*tree.node(id).merge_distance);
  if (d.empty()) return 0.0;
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size() / 2;
  return d.size() % 2 == 1 ? d[m] : 0.5 * (d[m - 1] + d[m]);
}

std::vector<ClusterNode> eligible_clusters(const ClusterTree& tree, const EligibilityParams& params) {
  std::vector<ClusterNode> out;
  if (tree.merge_order.empty()) return out;
  const double bound = params.dist_factor * median_merge_distance(tree);
  for (int id : tree.merge_order) {
    ClusterNode node = tree.node(id);
    if (node.leaf_count < params.min_leaves || node.leaf_count > params.max_leaves) continue;
    if (*node.merge_distance > bound) continue;
    node.eligible = true;
    out.push_back(std::move(node));
  }
  return out;
}

void mark_eligible(ClusterTree& tree, const EligibilityParams& params) {
  for (auto& n : tree.nodes) n.eligible = false;
  for (const auto& e : eligible_clusters(tree, params)) tree.nodes[static_cast<std::size_t>(e.node_id)].eligible = true;
}

}  // namespace pm
