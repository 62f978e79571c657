#include "pm/session.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>

#include "pm/error.hpp"
#include "pm/hash.hpp"
#include "pm/parallel.hpp"

namespace pm {

void validate(const SessionInput& input) {
  if (input.prompt.empty()) throw Error(ErrorCode::InvalidInput, "prompt must be nonempty");
  if (!(input.gs_min > 0.0) || !(input.gs_min <= input.gs_max) || !std::isfinite(input.gs_max)) {
    throw Error(ErrorCode::InvalidRange, "guidance range must satisfy 0 < gs_min <= gs_max");
  }
  if (input.n_generate + input.k_retrieve < 1) {
    throw Error(ErrorCode::InvalidInput, "n_generate + k_retrieve must be >= 1");
  }
}

RatingCache::RatingCache(const RatingCache& other) : entries_(other.snapshot()) {}

RatingCache& RatingCache::operator=(const RatingCache& other) {
  if (this != &other) {
    auto copy = other.snapshot();
    std::lock_guard lock(mutex_);
    entries_ = std::move(copy);
  }
  return *this;
}

std::optional<std::vector<Rating>> RatingCache::find(const Criterion& c) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(c);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<Rating> RatingCache::insert(const Criterion& c, std::vector<Rating> ratings) const {
  std::lock_guard lock(mutex_);
  return entries_.try_emplace(c, std::move(ratings)).first->second;
}

std::map<Criterion, std::vector<Rating>> RatingCache::snapshot() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t RatingCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::optional<std::size_t> SessionState::find(std::string_view record_id) const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].id == record_id) return i;
  }
  return std::nullopt;
}

const PromptImageRecord& SessionState::record(std::string_view record_id) const {
  const auto i = find(record_id);
  if (!i) throw Error(ErrorCode::UnknownRecord, std::string(record_id));
  return records[*i];
}

std::vector<std::string> SessionState::retrieved_prompts() const {
  std::vector<std::string> out;
  for (const auto& r : records) {
    if (r.source == RecordSource::db) out.push_back(r.prompt);
  }
  return out;
}

bool SessionState::is_representative(std::string_view record_id) const {
  return std::any_of(lod.representatives.begin(), lod.representatives.end(),
                     [&](const auto& kv) { return kv.second == record_id; });
}

int SessionState::record_level(std::string_view record_id) const {
  return is_representative(record_id) ? 0 : std::max(lod.levels - 1, 0);
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string generated_id(const GenerationRequest& r) {
  std::uint64_t h = fnv1a64(r.prompt);
  h = fnv1a64_u64(std::bit_cast<std::uint64_t>(r.guidance_scale), h);
  h = fnv1a64_u64(r.seed, h);
  return "gen-" + hex64(h);
}

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::PipelineFailure, std::string(stage) + ": " + e.what());
  }
}

// Final keyword list: the union of every eligible cluster's top terms, each
// anchored at its best cluster, with sub-grams removed per anchor.
std::vector<std::pair<KeywordScore, int>> anchored_keywords(const KeywordTable& table, const ClusterTree& tree,
                                                            std::size_t per_cluster) {
  std::set<std::string> seen;
  std::map<int, std::vector<KeywordScore>> by_anchor;
  for (const auto& cluster : table.clusters) {
    for (const auto& kw : top_keywords(table, cluster.node_id, per_cluster)) {
      if (!seen.insert(kw.term.text).second) continue;
      const int anchor = match_keyword(kw.term, table);
      by_anchor[anchor].push_back(*table.find_cluster(anchor)->find(kw.term.text));
    }
  }
  std::vector<std::pair<KeywordScore, int>> out;
  for (int node_id : tree.merge_order) {
    auto it = by_anchor.find(node_id);
    if (it == by_anchor.end()) continue;
    // Rank inside the anchor cluster using the table's ordering.
    const auto ranked = top_keywords(table, node_id, table.find_cluster(node_id)->scores.size());
    std::vector<KeywordScore> ordered;
    for (const auto& kw : ranked) {
      if (std::any_of(it->second.begin(), it->second.end(),
                      [&](const KeywordScore& s) { return s.term.text == kw.term.text; })) {
        ordered.push_back(kw);
      }
    }
    for (auto& kw : dedup_subgrams(ordered)) out.emplace_back(std::move(kw), node_id);
  }
  return out;
}

}  // namespace

SessionState create_session(const SessionInput& input, const Corpus& corpus, const Embedder& embedder,
                            const Generator& generator, const SessionConfig& config,
                            const SessionOptions& options) {
  validate(input);
  SessionState state;
  state.input = input;
  state.config = config;
  state.config.tsne.rng_seed = input.rng_seed;
  state.created_at = options.created_at.value_or(
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
          .count());

  const FeatureVector query = embedder.embed_text(input.prompt);

  if (input.k_retrieve > 0) state.retrieved = retrieve_top_k(corpus, query, input.k_retrieve);

  std::vector<GenerationResult> generated;
  if (input.n_generate > 0) {
    auto batch = generate_images(generator, input.prompt, input.gs_min, input.gs_max, input.n_generate,
                                 input.rng_seed, config.image_width, config.image_height, config.max_in_flight);
    state.generation_failures = batch.failures.size();
    generated = std::move(batch.results);
  }
  std::vector<FeatureVector> generated_features(generated.size());
  parallel_for(generated.size(), config.max_in_flight,
               [&](std::size_t i) { generated_features[i] = embedder.embed_image(generated[i].image_bytes); });

  state.text_features = FeatureMatrix(0, kEmbeddingDim);
  state.image_features = FeatureMatrix(0, kEmbeddingDim);
  for (std::size_t i = 0; i < generated.size(); ++i) {
    PromptImageRecord r;
    r.id = generated_id(generated[i].request);
    r.prompt = input.prompt;
    r.image_ref = "images/" + r.id + ".png";
    r.guidance_scale = generated[i].request.guidance_scale;
    r.seed = generated[i].request.seed;
    r.source = RecordSource::generated;
    r.row = state.records.size();
    state.images[r.id] = std::move(generated[i].image_bytes);
    state.records.push_back(std::move(r));
    state.text_features.append_row(query);
    state.image_features.append_row(generated_features[i]);
  }
  for (const auto& hit : state.retrieved) {
    const std::size_t idx = *corpus.find(hit.id);
    PromptImageRecord r = corpus.records()[idx];
    r.row = state.records.size();
    state.records.push_back(std::move(r));
    state.text_features.append_row(corpus.text_feature(idx));
    state.image_features.append_row(corpus.image_feature(idx));
  }

  state.layout = run_stage("projection", [&] {
    FeatureMatrix concat(0, kConcatDim);
    for (std::size_t i = 0; i < state.records.size(); ++i) {
      concat.append_row(concat_features(state.text_features.row(i), state.image_features.row(i)));
    }
    return project_tsne(concat, state.config.tsne);
  });

  std::map<std::string, Point2> positions;
  for (std::size_t i = 0; i < state.records.size(); ++i) positions[state.records[i].id] = state.layout[i];

  run_stage("clustering", [&] {
    std::vector<LabeledPoint> points;
    for (std::size_t i = 0; i < state.records.size(); ++i) {
      if (state.records[i].source == RecordSource::db) points.push_back({state.records[i].id, state.layout[i]});
    }
    state.tree = build_dendrogram(points);
    mark_eligible(state.tree, config.eligibility);
  });

  const auto corpus_prompts = state.retrieved_prompts();
  run_stage("keywords", [&] {
    std::vector<ClusterDocuments> docs;
    for (const auto& node : state.tree.nodes) {
      if (!node.eligible) continue;
      ClusterDocuments d{node.node_id, node.leaf_count, {}};
      for (const auto& id : state.tree.leaf_ids(node.node_id)) d.prompts.push_back(state.record(id).prompt);
      docs.push_back(std::move(d));
    }
    KeywordOptions kopts;
    kopts.max_n = config.max_n;
    if (!corpus_prompts.empty()) {
      state.keyword_table = compute_tfidf(docs, corpus_prompts, kopts);
    }
  });

  run_stage("layout", [&] {
    state.lod = assign_lod(state.tree, config.lod_levels);
    assign_representatives(state.lod, state.tree, positions);
    std::vector<KeywordPlacement> placements;
    for (auto& [kw, anchor] : anchored_keywords(state.keyword_table, state.tree, config.keywords_per_cluster)) {
      KeywordPlacement p;
      p.term = kw.term;
      p.anchor_cluster = anchor;
      p.level = state.lod.node_level[static_cast<std::size_t>(anchor)];
      std::vector<WeightedPoint> weighted;
      auto leaves = state.tree.leaf_ids(anchor);
      std::sort(leaves.begin(), leaves.end());
      for (const auto& id : leaves) {
        const auto counts = count_terms(state.record(id).prompt, config.max_n);
        auto it = counts.find(kw.term.text);
        if (it == counts.end()) continue;
        weighted.push_back({positions.at(id), it->second});
        p.image_ids.push_back(id);
      }
      p.position = keyword_position(weighted);
      placements.push_back(std::move(p));
    }
    const double radius = default_jitter_radius(state.layout);
    state.placements = jitter_collisions(std::move(placements), radius, mix64(input.rng_seed, fnv1a64("jitter")));
  });
  return state;
}

EvaluationResult evaluate_session(const SessionState& state, const Criterion& criterion, const Embedder& embedder,
                                  std::size_t bins) {
  if (criterion.keyword_a.empty() || criterion.keyword_b.empty()) throw Error(ErrorCode::EmptyKeyword, "criterion");
  EvaluationResult result;
  result.criterion = criterion;
  if (auto cached = state.ratings.find(criterion)) {
    result.ratings = std::move(*cached);
  } else {
    const auto embedded = embed_criterion(criterion, embedder);
    std::vector<Rating> ratings(state.records.size());
    parallel_for(state.records.size(), state.config.max_in_flight, [&](std::size_t i) {
      ratings[i] = rate_image(state.records[i].id, state.image_features.row(i), embedded);
    });
    result.ratings = state.ratings.insert(criterion, std::move(ratings));
  }
  result.histogram = rating_histogram(result.ratings, bins);
  return result;
}

SelectionReport select_images(const SessionState& state, std::span<const std::string> record_ids,
                              std::size_t top_k, std::size_t guidance_bins) {
  if (record_ids.empty()) throw Error(ErrorCode::EmptySelection, "select_images");
  std::set<std::string> unique;
  for (const auto& id : record_ids) {
    if (!state.find(id)) throw Error(ErrorCode::UnknownRecord, id);
    unique.insert(id);
  }
  std::vector<const PromptImageRecord*> selected;
  for (const auto& id : unique) selected.push_back(&state.record(id));

  // Generated prompts are not part of the mining corpus; a selection that
  // includes them adds those documents so every selected term has df >= 1.
  std::vector<std::string> corpus = state.retrieved_prompts();
  std::vector<std::string> prompts;
  for (const auto* r : selected) {
    prompts.push_back(r->prompt);
    if (r->source != RecordSource::db) corpus.push_back(r->prompt);
  }

  SelectionReport report;
  report.keywords = selection_keywords(prompts, corpus, top_k);
  std::vector<Term> terms;
  for (const auto& kw : report.keywords) terms.push_back(kw.term);

  std::vector<std::map<std::string, std::size_t>> counts;
  for (const auto* r : selected) counts.push_back(count_terms(r->prompt));
  for (const auto& kw : report.keywords) {
    for (std::size_t i = 0; i < selected.size(); ++i) {
      if (counts[i].contains(kw.term.text)) report.incidence.push_back({kw.term.text, selected[i]->id});
    }
  }

  std::vector<double> guidance;
  for (const auto* r : selected) {
    if (r->guidance_scale) guidance.push_back(*r->guidance_scale);
  }
  if (guidance.empty()) {
    report.guidance_histogram = Histogram{0.0, 0.0, std::vector<std::size_t>(guidance_bins, 0)};
  } else {
    const auto [lo, hi] = std::minmax_element(guidance.begin(), guidance.end());
    report.guidance_histogram = make_histogram(guidance, *lo, *hi, guidance_bins);
  }

  for (const auto* r : selected) {
    report.prompts.push_back({r->id, r->prompt, r->guidance_scale, keyword_spans(r->prompt, terms)});
  }
  return report;
}

}  // namespace pm
