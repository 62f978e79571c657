#include "pm/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "pm/error.hpp"

namespace pm {

double cosine_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "cosine_distance");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine_distance");
  const double d = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(d, 0.0, 2.0);
}

std::vector<ScoredRecord> retrieve_top_k(const Corpus& corpus, std::span<const float> query, std::size_t k) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "retrieve_top_k");
  if (k == 0) throw Error(ErrorCode::InvalidInput, "k must be >= 1");
  if (query.size() != corpus.image_features().dim()) throw Error(ErrorCode::DimensionMismatch, "query");

  struct Candidate {
    double distance;
    const std::string* id;
  };
  std::vector<Candidate> all;
  all.reserve(corpus.size());
  const auto& records = corpus.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].source != RecordSource::db) continue;
    all.push_back({cosine_distance(query, corpus.image_feature(i)), &records[i].id});
  }
  if (all.empty()) throw Error(ErrorCode::EmptyCorpus, "no db records to search");
  const auto less = [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return *a.id < *b.id;
  };
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), less);
  std::vector<ScoredRecord> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({*all[i].id, all[i].distance});
  return out;
}

}  // namespace pm
