#pragma once

#include <span>
#include <string>
#include <vector>

#include "pm/corpus.hpp"

namespace pm {

struct ScoredRecord {
  std::string id;
  double distance = 0.0;

  friend bool operator==(const ScoredRecord&, const ScoredRecord&) = default;
};

/// 1 - a.b / (|a||b|), accumulated in double and clamped to [0, 2].
double cosine_distance(std::span<const float> a, std::span<const float> b);

/// Exact top-k over the image features of source=db records, ordered by
/// (distance, id).
std::vector<ScoredRecord> retrieve_top_k(const Corpus& corpus, std::span<const float> query, std::size_t k);

}  // namespace pm
