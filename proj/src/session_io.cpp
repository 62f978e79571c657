#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pm/error.hpp"
#include "pm/pmeb.hpp"
#include "pm/session.hpp"

namespace pm {

using ojson = nlohmann::ordered_json;

namespace {

template <typename T>
ojson opt(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

template <typename T>
std::optional<T> get_opt(const ojson& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

ojson point_json(const Point2& p) { return ojson::array({p.x, p.y}); }
Point2 point_from(const ojson& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

ojson term_json(const Term& t) { return ojson{{"text", t.text}, {"n", t.n}}; }
Term term_from(const ojson& j) { return {j.at("text").get<std::string>(), j.at("n").get<std::size_t>()}; }

ojson score_json(const KeywordScore& s) {
  return ojson{{"term", term_json(s.term)}, {"cluster_id", s.cluster_id}, {"count", s.count},
               {"tf", s.tf},                {"idf", s.idf},               {"tfidf", s.tfidf},
               {"normalized", s.normalized}, {"best_cluster", s.best_cluster}};
}

KeywordScore score_from(const ojson& j) {
  KeywordScore s;
  s.term = term_from(j.at("term"));
  s.cluster_id = j.at("cluster_id").get<int>();
  s.count = j.at("count").get<std::size_t>();
  s.tf = j.at("tf").get<double>();
  s.idf = j.at("idf").get<double>();
  s.tfidf = j.at("tfidf").get<double>();
  s.normalized = j.at("normalized").get<double>();
  s.best_cluster = j.at("best_cluster").get<int>();
  return s;
}

ojson record_json(const PromptImageRecord& r) {
  return ojson{{"id", r.id},
               {"prompt", r.prompt},
               {"image", r.image_ref},
               {"guidance_scale", opt(r.guidance_scale)},
               {"seed", opt(r.seed)},
               {"source", std::string(to_string(r.source))},
               {"row", r.row}};
}

PromptImageRecord record_from(const ojson& j) {
  PromptImageRecord r;
  r.id = j.at("id").get<std::string>();
  r.prompt = j.at("prompt").get<std::string>();
  r.image_ref = j.at("image").get<std::string>();
  r.guidance_scale = get_opt<double>(j.at("guidance_scale"));
  r.seed = get_opt<std::uint64_t>(j.at("seed"));
  r.source = parse_source(j.at("source").get<std::string>());
  r.row = j.at("row").get<std::size_t>();
  return r;
}

ojson config_json(const SessionConfig& c) {
  const auto& t = c.tsne;
  return ojson{{"tsne",
                {{"perplexity", t.perplexity},
                 {"iterations", t.iterations},
                 {"learning_rate", t.learning_rate},
                 {"early_exaggeration", t.early_exaggeration},
                 {"exaggeration_iterations", t.exaggeration_iterations},
                 {"initial_momentum", t.initial_momentum},
                 {"final_momentum", t.final_momentum},
                 {"momentum_switch_iteration", t.momentum_switch_iteration},
                 {"init_scale", t.init_scale},
                 {"rng_seed", t.rng_seed}}},
               {"eligibility",
                {{"min_leaves", c.eligibility.min_leaves},
                 {"max_leaves", c.eligibility.max_leaves},
                 {"dist_factor", c.eligibility.dist_factor}}},
               {"keywords_per_cluster", c.keywords_per_cluster},
               {"max_n", c.max_n},
               {"lod_levels", c.lod_levels},
               {"image_width", c.image_width},
               {"image_height", c.image_height},
               {"max_in_flight", c.max_in_flight}};
}

SessionConfig config_from(const ojson& j) {
  SessionConfig c;
  const auto& t = j.at("tsne");
  c.tsne.perplexity = t.at("perplexity").get<double>();
  c.tsne.iterations = t.at("iterations").get<std::size_t>();
  c.tsne.learning_rate = t.at("learning_rate").get<double>();
  c.tsne.early_exaggeration = t.at("early_exaggeration").get<double>();
  c.tsne.exaggeration_iterations = t.at("exaggeration_iterations").get<std::size_t>();
  c.tsne.initial_momentum = t.at("initial_momentum").get<double>();
  c.tsne.final_momentum = t.at("final_momentum").get<double>();
  c.tsne.momentum_switch_iteration = t.at("momentum_switch_iteration").get<std::size_t>();
  c.tsne.init_scale = t.at("init_scale").get<double>();
  c.tsne.rng_seed = t.at("rng_seed").get<std::uint64_t>();
  const auto& e = j.at("eligibility");
  c.eligibility.min_leaves = e.at("min_leaves").get<std::size_t>();
  c.eligibility.max_leaves = e.at("max_leaves").get<std::size_t>();
  c.eligibility.dist_factor = e.at("dist_factor").get<double>();
  c.keywords_per_cluster = j.at("keywords_per_cluster").get<std::size_t>();
  c.max_n = j.at("max_n").get<std::size_t>();
  c.lod_levels = j.at("lod_levels").get<int>();
  c.image_width = j.at("image_width").get<std::uint32_t>();
  c.image_height = j.at("image_height").get<std::uint32_t>();
  c.max_in_flight = j.at("max_in_flight").get<std::size_t>();
  return c;
}

ojson tree_json(const ClusterTree& tree) {
  ojson nodes = ojson::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back(ojson{{"node_id", n.node_id},
                          {"children", n.children},
                          {"leaf_record_id", n.leaf_record_id},
                          {"merge_distance", opt(n.merge_distance)},
                          {"leaf_count", n.leaf_count},
                          {"centroid", point_json(n.centroid)},
                          {"eligible", n.eligible}});
  }
  return ojson{{"root", tree.root}, {"merge_order", tree.merge_order}, {"nodes", std::move(nodes)}};
}

ClusterTree tree_from(const ojson& j) {
  ClusterTree t;
  t.root = j.at("root").get<int>();
  t.merge_order = j.at("merge_order").get<std::vector<int>>();
  for (const auto& n : j.at("nodes")) {
    ClusterNode node;
    node.node_id = n.at("node_id").get<int>();
    node.children = n.at("children").get<std::vector<int>>();
    node.leaf_record_id = n.at("leaf_record_id").get<std::string>();
    node.merge_distance = get_opt<double>(n.at("merge_distance"));
    node.leaf_count = n.at("leaf_count").get<std::size_t>();
    node.centroid = point_from(n.at("centroid"));
    node.eligible = n.at("eligible").get<bool>();
    t.nodes.push_back(std::move(node));
  }
  return t;
}

ojson table_json(const KeywordTable& table) {
  ojson df = ojson::object();
  for (const auto& [term, n] : table.document_frequency) df[term] = n;
  ojson clusters = ojson::array();
  for (const auto& c : table.clusters) {
    ojson scores = ojson::array();
    for (const auto& s : c.scores) scores.push_back(score_json(s));
    clusters.push_back(ojson{{"node_id", c.node_id},
                             {"leaf_count", c.leaf_count},
                             {"total_occurrences", c.total_occurrences},
                             {"scores", std::move(scores)}});
  }
  return ojson{{"corpus_size", table.corpus_size},
               {"log_base", table.log_base == LogBase::base10 ? "10" : "e"},
               {"document_frequency", std::move(df)},
               {"clusters", std::move(clusters)}};
}

KeywordTable table_from(const ojson& j) {
  KeywordTable t;
  t.corpus_size = j.at("corpus_size").get<std::size_t>();
  t.log_base = j.at("log_base").get<std::string>() == "10" ? LogBase::base10 : LogBase::natural;
  for (const auto& [term, n] : j.at("document_frequency").items()) t.document_frequency[term] = n.get<std::size_t>();
  for (const auto& c : j.at("clusters")) {
    ClusterKeywords ck;
    ck.node_id = c.at("node_id").get<int>();
    ck.leaf_count = c.at("leaf_count").get<std::size_t>();
    ck.total_occurrences = c.at("total_occurrences").get<std::size_t>();
    for (const auto& s : c.at("scores")) ck.scores.push_back(score_from(s));
    t.clusters.push_back(std::move(ck));
  }
  return t;
}

ojson ratings_json(const RatingCache& cache) {
  ojson out = ojson::array();
  for (const auto& [criterion, ratings] : cache.snapshot()) {
    ojson rs = ojson::array();
    for (const auto& r : ratings) rs.push_back(ojson{{"id", r.record_id}, {"s1", r.s1}, {"s2", r.s2}, {"s_bar", r.s_bar}});
    out.push_back(ojson{{"keyword_a", criterion.keyword_a}, {"keyword_b", criterion.keyword_b}, {"ratings", std::move(rs)}});
  }
  return out;
}

ojson state_json(const SessionState& s) {
  ojson records = ojson::array();
  for (const auto& r : s.records) records.push_back(record_json(r));
  ojson retrieved = ojson::array();
  for (const auto& r : s.retrieved) retrieved.push_back(ojson{{"id", r.id}, {"distance", r.distance}});
  ojson layout = ojson::array();
  for (const auto& p : s.layout) layout.push_back(point_json(p));
  ojson placements = ojson::array();
  for (const auto& p : s.placements) {
    placements.push_back(ojson{{"term", term_json(p.term)},
                               {"position", point_json(p.position)},
                               {"level", p.level},
                               {"anchor_cluster", p.anchor_cluster},
                               {"image_ids", p.image_ids}});
  }
  ojson reps = ojson::array();
  for (const auto& [node, id] : s.lod.representatives) reps.push_back(ojson{{"node_id", node}, {"record_id", id}});
  return ojson{{"version", kSessionFormatVersion},
               {"created_at", s.created_at},
               {"input",
                {{"prompt", s.input.prompt},
                 {"gs_min", s.input.gs_min},
                 {"gs_max", s.input.gs_max},
                 {"n_generate", s.input.n_generate},
                 {"k_retrieve", s.input.k_retrieve},
                 {"rng_seed", s.input.rng_seed}}},
               {"config", config_json(s.config)},
               {"records", std::move(records)},
               {"retrieved", std::move(retrieved)},
               {"generation_failures", s.generation_failures},
               {"layout", std::move(layout)},
               {"tree", tree_json(s.tree)},
               {"keyword_table", table_json(s.keyword_table)},
               {"placements", std::move(placements)},
               {"lod", {{"levels", s.lod.levels}, {"node_level", s.lod.node_level}, {"representatives", std::move(reps)}}},
               {"ratings", ratings_json(s.ratings)}};
}

}  // namespace

std::string session_json(const SessionState& state) { return state_json(state).dump(1); }

void save_session(const SessionState& state, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw Error(ErrorCode::IoError, dir.string() + ": " + ec.message());
  FeatureMatrix features(0, kConcatDim);
  for (std::size_t i = 0; i < state.records.size(); ++i) {
    features.append_row(concat_features(state.text_features.row(i), state.image_features.row(i)));
  }
  write_pmeb(dir / "features.pmeb", features);
  for (const auto& [id, bytes] : state.images) write_file_bytes(dir / "images" / (id + ".png"), bytes);
  const std::string text = session_json(state);
  write_file_bytes(dir / "session.json", {reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

SessionState load_session(const std::filesystem::path& dir) {
  const auto path = dir / "session.json";
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoError, path.string() + " not found");
  const auto bytes = read_file_bytes(path);
  ojson j;
  try {
    j = ojson::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("version") || !j["version"].is_number_integer()) {
    throw Error(ErrorCode::VersionMismatch, path.string() + ": missing version");
  }
  if (j["version"].get<int>() != kSessionFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, path.string() + ": version " + j["version"].dump());
  }
  SessionState s;
  try {
    s.created_at = j.at("created_at").get<std::int64_t>();
    const auto& in = j.at("input");
    s.input.prompt = in.at("prompt").get<std::string>();
    s.input.gs_min = in.at("gs_min").get<double>();
    s.input.gs_max = in.at("gs_max").get<double>();
    s.input.n_generate = in.at("n_generate").get<std::size_t>();
    s.input.k_retrieve = in.at("k_retrieve").get<std::size_t>();
    s.input.rng_seed = in.at("rng_seed").get<std::uint64_t>();
    s.config = config_from(j.at("config"));
    for (const auto& r : j.at("records")) s.records.push_back(record_from(r));
    for (const auto& r : j.at("retrieved")) s.retrieved.push_back({r.at("id").get<std::string>(), r.at("distance").get<double>()});
    s.generation_failures = j.at("generation_failures").get<std::size_t>();
    for (const auto& p : j.at("layout")) s.layout.push_back(point_from(p));
    s.tree = tree_from(j.at("tree"));
    s.keyword_table = table_from(j.at("keyword_table"));
    for (const auto& p : j.at("placements")) {
      KeywordPlacement kp;
      kp.term = term_from(p.at("term"));
      kp.position = point_from(p.at("position"));
      kp.level = p.at("level").get<int>();
      kp.anchor_cluster = p.at("anchor_cluster").get<int>();
      kp.image_ids = p.at("image_ids").get<std::vector<std::string>>();
      s.placements.push_back(std::move(kp));
    }
    const auto& lod = j.at("lod");
    s.lod.levels = lod.at("levels").get<int>();
    s.lod.node_level = lod.at("node_level").get<std::vector<int>>();
    for (const auto& r : lod.at("representatives")) {
      s.lod.representatives[r.at("node_id").get<int>()] = r.at("record_id").get<std::string>();
    }
    for (const auto& entry : j.at("ratings")) {
      Criterion c{entry.at("keyword_a").get<std::string>(), entry.at("keyword_b").get<std::string>()};
      std::vector<Rating> ratings;
      for (const auto& r : entry.at("ratings")) {
        ratings.push_back({r.at("id").get<std::string>(), r.at("s1").get<double>(), r.at("s2").get<double>(),
                           r.at("s_bar").get<double>()});
      }
      s.ratings.insert(c, std::move(ratings));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }

  const FeatureMatrix features = read_pmeb(dir / "features.pmeb");
  if (features.rows() != s.records.size() || (features.rows() > 0 && features.dim() != kConcatDim)) {
    throw Error(ErrorCode::DimensionMismatch, "features.pmeb does not match session records");
  }
  s.text_features = FeatureMatrix(0, kEmbeddingDim);
  s.image_features = FeatureMatrix(0, kEmbeddingDim);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto row = features.row(i);
    s.text_features.append_row(row.first(kEmbeddingDim));
    s.image_features.append_row(row.subspan(kEmbeddingDim));
  }
  for (const auto& r : s.records) {
    if (r.source != RecordSource::generated) continue;
    const auto png = dir / "images" / (r.id + ".png");
    if (std::filesystem::exists(png)) s.images[r.id] = read_file_bytes(png);
  }
  return s;
}

}  // namespace pm
