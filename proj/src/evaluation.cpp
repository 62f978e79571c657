#include "pm/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "pm/error.hpp"

namespace pm {

Criterion build_criterion(std::string_view keyword_a, std::optional<std::string_view> keyword_b) {
  if (keyword_a.empty()) throw Error(ErrorCode::EmptyKeyword, "keyword_a");
  Criterion c;
  c.keyword_a = std::string(keyword_a);
  if (keyword_b && !keyword_b->empty()) {
    c.keyword_b = std::string(*keyword_b);
  } else {
    c.keyword_b = "not " + c.keyword_a;
  }
  return c;
}

CriterionEmbedding embed_criterion(const Criterion& criterion, const Embedder& embedder) {
  if (criterion.keyword_a.empty() || criterion.keyword_b.empty()) throw Error(ErrorCode::EmptyKeyword, "criterion");
  return {criterion, embedder.embed_text(criterion.text_a()), embedder.embed_text(criterion.text_b())};
}

double softmax_rating(double s1, double s2) noexcept { return 1.0 / (1.0 + std::exp(s2 - s1)); }

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "cosine_similarity");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine_similarity");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Rating rate_image(std::string record_id, std::span<const float> image_vec, const CriterionEmbedding& criterion) {
  Rating r;
  r.record_id = std::move(record_id);
  r.s1 = cosine_similarity(image_vec, criterion.text_a);
  r.s2 = cosine_similarity(image_vec, criterion.text_b);
  r.s_bar = softmax_rating(r.s1, r.s2);
  return r;
}

Rating rate_image(std::string record_id, std::span<const float> image_vec, const Criterion& criterion,
                  const Embedder& embedder) {
  return rate_image(std::move(record_id), image_vec, embed_criterion(criterion, embedder));
}

std::size_t Histogram::total() const noexcept {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  if (bins == 0) throw Error(ErrorCode::InvalidInput, "bins must be >= 1");
  if (!(lo <= hi)) throw Error(ErrorCode::InvalidRange, "histogram range");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
  const double span = hi - lo;
  for (double v : values) {
    if (!(v >= lo && v <= hi)) continue;
    std::size_t b = 0;
    if (span > 0.0) {
      b = static_cast<std::size_t>(std::floor((v - lo) * static_cast<double>(bins) / span));
      if (b >= bins) b = bins - 1;
    }
    ++h.counts[b];
  }
  return h;
}

Histogram rating_histogram(std::span<const Rating> ratings, std::size_t bins) {
  std::vector<double> values;
  values.reserve(ratings.size());
  for (const auto& r : ratings) values.push_back(r.s_bar);
  return make_histogram(values, 0.0, 1.0, bins);
}

std::vector<std::string> filter_by_range(std::span<const Rating> ratings, double lo, double hi) {
  if (!(0.0 <= lo && lo <= hi && hi <= 1.0)) throw Error(ErrorCode::InvalidRange, "filter_by_range");
  std::vector<std::string> out;
  for (const auto& r : ratings) {
    if (r.s_bar >= lo && r.s_bar <= hi) out.push_back(r.record_id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<KeywordPair> parse_common_pairs(std::string_view json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (!j.is_array()) throw Error(ErrorCode::InvalidInput, "common pairs must be a JSON array");
  std::vector<KeywordPair> out;
  for (const auto& p : j) {
    if (!p.is_object() || !p.contains("a") || !p.contains("b") || !p["a"].is_string() || !p["b"].is_string()) {
      throw Error(ErrorCode::InvalidInput, "common pair entries need string fields a and b");
    }
    out.push_back({p["a"].get<std::string>(), p["b"].get<std::string>()});
  }
  return out;
}

}  // namespace pm
