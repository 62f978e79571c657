#include "pm/layout.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pm/error.hpp"
#include "pm/hash.hpp"

namespace pm {

Point2 keyword_position(std::span<const WeightedPoint> images) {
  double sx = 0.0, sy = 0.0, w = 0.0;
  for (const auto& img : images) {
    const double c = static_cast<double>(img.count);
    sx += c * img.position.x;
    sy += c * img.position.y;
    w += c;
  }
  if (w == 0.0) throw Error(ErrorCode::NoOccurrences, "keyword_position");
  return {sx / w, sy / w};
}

std::vector<KeywordPlacement> jitter_collisions(std::vector<KeywordPlacement> placements, double radius,
                                                std::uint64_t rng_seed) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidInput, "jitter radius must be > 0");
  const std::vector<Point2> original = [&] {
    std::vector<Point2> v;
    for (const auto& p : placements) v.push_back(p.position);
    return v;
  }();
  for (std::size_t i = 1; i < placements.size(); ++i) {
    bool collides = false;
    for (std::size_t j = 0; j < i && !collides; ++j) {
      collides = std::abs(original[i].x - original[j].x) <= 1e-9 && std::abs(original[i].y - original[j].y) <= 1e-9;
    }
    if (!collides) continue;
    SplitMix64 gen(mix64(rng_seed, fnv1a64(placements[i].term.text) ^ i));
    double r = 0.0;
    while (r == 0.0) r = radius * std::sqrt(gen.uniform());
    const double theta = 2.0 * std::numbers::pi * gen.uniform();
    placements[i].position.x = original[i].x + r * std::cos(theta);
    placements[i].position.y = original[i].y + r * std::sin(theta);
  }
  return placements;
}

double default_jitter_radius(std::span<const Point2> points) {
  if (points.empty()) return 1e-3;
  double minx = points[0].x, maxx = minx, miny = points[0].y, maxy = miny;
  for (const auto& p : points) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const double diag = std::hypot(maxx - minx, maxy - miny);
  return diag > 0.0 ? 0.01 * diag : 1e-3;
}

std::string representative_image(const ClusterTree& tree, int cluster_id,
                                  const std::map<std::string, Point2>& positions) {
  const auto leaves = tree.leaf_ids(cluster_id);
  double cx = 0.0, cy = 0.0;
  for (const auto& id : leaves) {
    const auto& p = positions.at(id);
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(leaves.size());
  cy /= static_cast<double>(leaves.size());
  const std::string* best = nullptr;
  double best_d = 0.0;
  for (const auto& id : leaves) {
    const auto& p = positions.at(id);
    const double d = std::hypot(p.x - cx, p.y - cy);
    if (!best || d < best_d || (d == best_d && id < *best)) {
      best = &id;
      best_d = d;
    }
  }
  return *best;
}

LodAssignment assign_lod(const ClusterTree& tree, int levels) {
  if (levels < 1) throw Error(ErrorCode::InvalidInput, "levels must be >= 1");
  LodAssignment lod;
  lod.levels = levels;
  lod.node_level.assign(tree.nodes.size(), levels - 1);
  if (tree.nodes.empty()) return lod;
  double d_max = 0.0;
  for (int id : tree.merge_order) d_max = std::max(d_max, *tree.node(id).merge_distance);
  const auto parent = tree.parents();
  for (const auto& node : tree.nodes) {
    const auto idx = static_cast<std::size_t>(node.node_id);
    if (node.is_leaf()) continue;
    if (parent[idx] < 0) {
      lod.node_level[idx] = 0;
      continue;
    }
    const double parent_distance = *tree.node(parent[idx]).merge_distance;
    int level = levels - 1;
    for (int l = 0; l < levels; ++l) {
      if (d_max / std::ldexp(1.0, l) < parent_distance) {
        level = l;
        break;
      }
    }
    lod.node_level[idx] = level;
  }
  return lod;
}

void assign_representatives(LodAssignment& lod, const ClusterTree& tree,
                            const std::map<std::string, Point2>& positions) {
  lod.representatives.clear();
  for (const auto& node : tree.nodes) {
    if (node.eligible) lod.representatives[node.node_id] = representative_image(tree, node.node_id, positions);
  }
}

}  // namespace pm
