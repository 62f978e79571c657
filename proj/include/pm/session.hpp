#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pm/backends.hpp"
#include "pm/clustering.hpp"
#include "pm/corpus.hpp"
#include "pm/evaluation.hpp"
#include "pm/keywords.hpp"
#include "pm/layout.hpp"
#include "pm/projection.hpp"
#include "pm/retrieval.hpp"

namespace pm {

inline constexpr int kSessionFormatVersion = 1;

struct SessionInput {
  std::string prompt;
  double gs_min = 5.0;
  double gs_max = 30.0;
  std::size_t n_generate = 0;
  std::size_t k_retrieve = 500;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const SessionInput&, const SessionInput&) = default;
};

/// Throws InvalidInput / InvalidRange.
void validate(const SessionInput& input);

/// Tunables of the pipeline that are not part of the user's request.
struct SessionConfig {
  TsneParams tsne;  // rng_seed is taken from the session input
  EligibilityParams eligibility;
  std::size_t keywords_per_cluster = 5;
  std::size_t max_n = 3;
  int lod_levels = 4;
  std::uint32_t image_width = 512;
  std::uint32_t image_height = 512;
  std::size_t max_in_flight = 4;
};

struct EvaluationResult {
  Criterion criterion;
  std::vector<Rating> ratings;  // session record order
  Histogram histogram;
};

/// Per-criterion ratings; the only mutable part of a session.
class RatingCache {
 public:
  RatingCache() = default;
  RatingCache(const RatingCache& other);
  RatingCache& operator=(const RatingCache& other);

  std::optional<std::vector<Rating>> find(const Criterion& c) const;
  /// Keeps the first insertion when two threads race on the same criterion.
  std::vector<Rating> insert(const Criterion& c, std::vector<Rating> ratings) const;
  std::map<Criterion, std::vector<Rating>> snapshot() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  mutable std::map<Criterion, std::vector<Rating>> entries_;
};

struct SessionState {
  SessionInput input;
  SessionConfig config;
  std::int64_t created_at = 0;  // unix seconds

  // Generated records first (in request order), then retrieved records in
  // rank order. records[i].row == i.
  std::vector<PromptImageRecord> records;
  FeatureMatrix text_features;   // N x 512
  FeatureMatrix image_features;  // N x 512
  std::vector<ScoredRecord> retrieved;
  std::size_t generation_failures = 0;

  std::vector<Point2> layout;  // aligned with records
  ClusterTree tree;            // over retrieved records only
  KeywordTable keyword_table;
  std::vector<KeywordPlacement> placements;
  LodAssignment lod;

  RatingCache ratings;
  std::map<std::string, std::vector<unsigned char>> images;  // generated PNGs by record id

  std::optional<std::size_t> find(std::string_view record_id) const;
  const PromptImageRecord& record(std::string_view record_id) const;
  std::vector<std::string> retrieved_prompts() const;
  bool is_representative(std::string_view record_id) const;
  /// Zoom level at which a record is shown as an image.
  int record_level(std::string_view record_id) const;
};

struct SessionOptions {
  std::optional<std::int64_t> created_at;  // defaults to the current time
};

/// Runs the whole pipeline: embed prompt, retrieve, generate and embed,
/// concatenate, project, cluster, mine, match, place.
SessionState create_session(const SessionInput& input, const Corpus& corpus, const Embedder& embedder,
                            const Generator& generator, const SessionConfig& config = {},
                            const SessionOptions& options = {});

EvaluationResult evaluate_session(const SessionState& state, const Criterion& criterion, const Embedder& embedder,
                                  std::size_t bins = 20);

struct IncidencePair {
  std::string term;
  std::string record_id;
  friend bool operator==(const IncidencePair&, const IncidencePair&) = default;
};

struct SelectedPrompt {
  std::string record_id;
  std::string prompt;
  std::optional<double> guidance_scale;
  std::vector<KeywordSpan> spans;
};

struct SelectionReport {
  std::vector<KeywordScore> keywords;
  std::vector<IncidencePair> incidence;  // by (keyword rank, record id)
  Histogram guidance_histogram;
  std::vector<SelectedPrompt> prompts;   // ascending record id
};

SelectionReport select_images(const SessionState& state, std::span<const std::string> record_ids,
                              std::size_t top_k = 10, std::size_t guidance_bins = 10);

/// Writes session.json, features.pmeb (N x 1024, text then image) and
/// images/<id>.png.
void save_session(const SessionState& state, const std::filesystem::path& dir);
SessionState load_session(const std::filesystem::path& dir);

/// Canonical JSON text of session.json.
std::string session_json(const SessionState& state);

}  // namespace pm
