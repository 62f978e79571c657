#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pm/clustering.hpp"
#include "pm/keywords.hpp"

namespace pm {

struct WeightedPoint {
  Point2 position;
  std::size_t count = 0;
};

/// Occurrence-weighted mean of the contributing image positions.
Point2 keyword_position(std::span<const WeightedPoint> images);

struct KeywordPlacement {
  Term term;
  Point2 position;
  int level = 0;
  int anchor_cluster = 0;
  std::vector<std::string> image_ids;  // contributing images

  friend bool operator==(const KeywordPlacement&, const KeywordPlacement&) = default;
};

/// Placements whose positions coincide (within 1e-9) with an earlier
/// placement get an offset drawn uniformly from a disc of `radius`, keyed by
/// (rng_seed, term). The first placement of each group stays put.
std::vector<KeywordPlacement> jitter_collisions(std::vector<KeywordPlacement> placements, double radius,
                                                std::uint64_t rng_seed);

/// 1% of the bounding-box diagonal of `points`, or 1e-3 for degenerate boxes.
double default_jitter_radius(std::span<const Point2> points);

/// Leaf of `cluster` nearest its centroid; ties go to the lowest record id.
std::string representative_image(const ClusterTree& tree, int cluster_id,
                                  const std::map<std::string, Point2>& positions);

struct LodAssignment {
  int levels = 4;
  std::vector<int> node_level;                     // indexed by node id
  std::map<int, std::string> representatives;      // eligible cluster -> record id

  friend bool operator==(const LodAssignment&, const LodAssignment&) = default;
};

/// Thresholds t_l = d_max / 2^l for l = 0..levels-1. A node becomes its own
/// cluster at the first level whose threshold falls below its parent's merge
/// distance; the root is level 0 and leaves take the deepest level.
LodAssignment assign_lod(const ClusterTree& tree, int levels = 4);

/// Fills `representatives` for every eligible node of `tree`.
void assign_representatives(LodAssignment& lod, const ClusterTree& tree,
                            const std::map<std::string, Point2>& positions);

}  // namespace pm
