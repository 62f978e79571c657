#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pm/backends.hpp"

namespace pm {

/// Opposing-keyword rating axis. Each keyword is embedded through the
/// "{keyword} image" template.
struct Criterion {
  std::string keyword_a;
  std::string keyword_b;

  std::string text_a() const { return keyword_a + " image"; }
  std::string text_b() const { return keyword_b + " image"; }

  friend bool operator==(const Criterion&, const Criterion&) = default;
  friend auto operator<=>(const Criterion&, const Criterion&) = default;
};

/// keyword_b defaults to "not " + keyword_a.
Criterion build_criterion(std::string_view keyword_a, std::optional<std::string_view> keyword_b = std::nullopt);

/// Template embeddings of a criterion, computed once.
struct CriterionEmbedding {
  Criterion criterion;
  FeatureVector text_a;
  FeatureVector text_b;
};

CriterionEmbedding embed_criterion(const Criterion& criterion, const Embedder& embedder);

struct Rating {
  std::string record_id;
  double s1 = 0.0;
  double s2 = 0.0;
  double s_bar = 0.5;

  friend bool operator==(const Rating&, const Rating&) = default;
};

/// e^s1 / (e^s1 + e^s2), evaluated as 1 / (1 + e^(s2 - s1)).
double softmax_rating(double s1, double s2) noexcept;

double cosine_similarity(std::span<const float> a, std::span<const float> b);

Rating rate_image(std::string record_id, std::span<const float> image_vec, const CriterionEmbedding& criterion);
Rating rate_image(std::string record_id, std::span<const float> image_vec, const Criterion& criterion,
                  const Embedder& embedder);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;

  std::size_t total() const noexcept;
  friend bool operator==(const Histogram&, const Histogram&) = default;
};

/// Equal-width bins over [lo, hi]; bins are half-open except the last.
/// Values outside the range are ignored. lo == hi puts everything in bin 0.
Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

Histogram rating_histogram(std::span<const Rating> ratings, std::size_t bins = 20);

/// Ids with lo <= s_bar <= hi, ascending.
std::vector<std::string> filter_by_range(std::span<const Rating> ratings, double lo, double hi);

struct KeywordPair {
  std::string a;
  std::string b;
};

std::vector<KeywordPair> parse_common_pairs(std::string_view json_text);

}  // namespace pm
