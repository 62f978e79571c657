#include "pm/api.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

#include "httplib.h"
#include "json.hpp"
#include "pm/hash.hpp"
#include "pm/pmeb.hpp"

namespace pm {

using ojson = nlohmann::ordered_json;

namespace {

std::string snake_case(std::string_view camel) {
  std::string out;
  for (char c : camel) {
    if (std::isupper(static_cast<unsigned char>(c))) {
      if (!out.empty()) out += '_';
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      out += c;
    }
  }
  return out;
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput:
    case ErrorCode::InvalidRange:
    case ErrorCode::EmptyKeyword:
    case ErrorCode::EmptySelection:
    case ErrorCode::UnknownRecord:
    case ErrorCode::NoOccurrences:
      return 400;
    case ErrorCode::NotFound:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownCluster:
    case ErrorCode::UnknownTerm:
      return 404;
    case ErrorCode::CorpusNotLoaded:
    case ErrorCode::EmptyCorpus:
      return 409;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::BackendTimeout:
    case ErrorCode::PartialFailure:
    case ErrorCode::UndecodableImage:
      return 502;
    case ErrorCode::MalformedManifest:
    case ErrorCode::DuplicateId:
    case ErrorCode::RowOutOfRange:
    case ErrorCode::BadMagic:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::NotNormalized:
    case ErrorCode::IoError:
    case ErrorCode::ZeroVector:
    case ErrorCode::NonFiniteInput:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NonFinitePoint:
    case ErrorCode::VersionMismatch:
    case ErrorCode::PipelineFailure:
      return 500;
  }
  return 500;
}

HttpResponse json_response(int status, const ojson& body) { return {status, "application/json", body.dump()}; }

HttpResponse error_response(const ApiError& e) {
  return json_response(e.status, ojson{{"error", {{"code", e.code}, {"message", e.message}}}});
}

HttpResponse error_response(int status, std::string code, std::string message) {
  return error_response(ApiError{status, std::move(code), std::move(message)});
}

ojson parse_body(std::string_view body) {
  try {
    auto j = ojson::parse(body.empty() ? std::string_view("{}") : body);
    if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidInput, std::string("malformed JSON: ") + e.what());
  }
}

template <typename T>
T field(const ojson& j, const char* key, std::optional<T> fallback = std::nullopt) {
  if (!j.contains(key) || j[key].is_null()) {
    if (fallback) return *fallback;
    throw Error(ErrorCode::InvalidInput, std::string("missing field '") + key + "'");
  }
  try {
    const auto& v = j[key];
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw Error(ErrorCode::InvalidInput, std::string("'") + key + "' must be a string");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) {
        throw Error(ErrorCode::InvalidInput, std::string("'") + key + "' must be a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw Error(ErrorCode::InvalidInput, std::string("'") + key + "' must be a number");
    }
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::InvalidInput, std::string("invalid field '") + key + "'");
  }
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    auto j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    if (j > i) parts.emplace_back(path.substr(i, j - i));
    i = j + 1;
  }
  return parts;
}

ojson histogram_json(const Histogram& h) { return ojson{{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}}; }

}  // namespace

ApiError to_api_error(const Error& error) {
  return {status_for(error.code()), snake_case(to_string(error.code())), error.detail()};
}

std::string layout_document(const SessionState& state, std::string_view session_id) {
  ojson points = ojson::array();
  for (std::size_t i = 0; i < state.records.size(); ++i) {
    const auto& r = state.records[i];
    points.push_back(ojson{{"id", r.id},
                           {"x", state.layout[i].x},
                           {"y", state.layout[i].y},
                           {"source", std::string(to_string(r.source))},
                           {"level", state.record_level(r.id)},
                           {"representative", state.is_representative(r.id)},
                           {"image_url", "/api/images/" + r.id}});
  }
  ojson keywords = ojson::array();
  for (const auto& p : state.placements) {
    keywords.push_back(ojson{{"term", p.term.text},
                             {"x", p.position.x},
                             {"y", p.position.y},
                             {"level", p.level},
                             {"cluster_id", p.anchor_cluster},
                             {"image_ids", p.image_ids}});
  }
  return ojson{{"session_id", session_id},
               {"levels", state.lod.levels},
               {"points", std::move(points)},
               {"keywords", std::move(keywords)}}
      .dump();
}

std::string evaluation_document(const EvaluationResult& result) {
  ojson ratings = ojson::array();
  for (const auto& r : result.ratings) ratings.push_back(ojson{{"id", r.record_id}, {"s_bar", r.s_bar}});
  return ojson{{"criterion", {{"keyword_a", result.criterion.keyword_a}, {"keyword_b", result.criterion.keyword_b}}},
               {"ratings", std::move(ratings)},
               {"histogram", histogram_json(result.histogram)}}
      .dump();
}

std::string selection_document(const SelectionReport& report) {
  ojson keywords = ojson::array();
  for (const auto& k : report.keywords) {
    keywords.push_back(ojson{{"term", k.term.text},
                             {"n", k.term.n},
                             {"tf", k.tf},
                             {"idf", k.idf},
                             {"tfidf", k.tfidf},
                             {"normalized", k.normalized}});
  }
  ojson incidence = ojson::array();
  for (const auto& p : report.incidence) incidence.push_back(ojson{{"term", p.term}, {"id", p.record_id}});
  ojson prompts = ojson::array();
  for (const auto& p : report.prompts) {
    ojson spans = ojson::array();
    for (const auto& s : p.spans) spans.push_back(ojson{{"term", s.term}, {"begin", s.begin}, {"end", s.end}});
    prompts.push_back(ojson{{"id", p.record_id},
                            {"prompt", p.prompt},
                            {"guidance_scale", p.guidance_scale ? ojson(*p.guidance_scale) : ojson(nullptr)},
                            {"spans", std::move(spans)}});
  }
  return ojson{{"keywords", std::move(keywords)},
               {"incidence", std::move(incidence)},
               {"guidance_histogram", histogram_json(report.guidance_histogram)},
               {"prompts", std::move(prompts)}}
      .dump();
}

SessionService::SessionService(ServiceOptions options) : options_(std::move(options)) {
  if (!options_.embedder) options_.embedder = std::make_shared<MockEmbedder>();
  if (!options_.generator) options_.generator = std::make_shared<MockGenerator>();
}

SessionService::~SessionService() {
  wait_idle();
  std::lock_guard lock(jobs_mutex_);
  jobs_.clear();
}

void SessionService::wait_idle() {
  std::unique_lock lock(jobs_mutex_);
  jobs_cv_.wait(lock, [&] { return running_jobs_ == 0; });
}

std::shared_ptr<const SessionState> SessionService::session(std::string_view id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(std::string(id));
  if (it == sessions_.end() || it->second.status != Status::ready) return nullptr;
  return it->second.state;
}

HttpResponse SessionService::handle(std::string_view method, std::string_view path, std::string_view body) {
  try {
    const auto parts = split_path(path);
    if (parts.size() >= 2 && parts[0] == "api") {
      if (parts[1] == "sessions") {
        if (parts.size() == 2 && method == "POST") return create(body);
        if (parts.size() == 4) {
          const std::string& id = parts[2];
          if (parts[3] == "status" && method == "GET") return status(id);
          if (parts[3] == "layout" && method == "GET") return layout(id);
          if (parts[3] == "evaluate" && method == "POST") return evaluate(id, body);
          if (parts[3] == "selection" && method == "POST") return selection(id, body);
        }
      } else if (parts[1] == "images" && parts.size() == 3 && method == "GET") {
        return image(parts[2]);
      } else if (parts[1] == "common-pairs" && parts.size() == 2 && method == "GET") {
        return {200, "application/json", options_.common_pairs_json};
      }
    }
    return error_response(404, "not_found", std::string(method) + " " + std::string(path));
  } catch (const Error& e) {
    return error_response(to_api_error(e));
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

std::string SessionService::next_id(const SessionInput& input) {
  std::unique_lock lock(mutex_);
  const std::uint64_t h = mix64(mix64(input.rng_seed, fnv1a64(input.prompt)), ++counter_);
  char buf[20];
  std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(h));
  sessions_.emplace(buf, Entry{});
  return buf;
}

void SessionService::finish(const std::string& id, std::shared_ptr<SessionState> state,
                            std::optional<ApiError> error) {
  if (state && options_.sessions_dir) save_session(*state, *options_.sessions_dir / id);
  std::unique_lock lock(mutex_);
  auto& entry = sessions_[id];
  if (error) {
    entry.status = Status::failed;
    entry.error = std::move(*error);
  } else {
    entry.status = Status::ready;
    entry.state = std::move(state);
  }
}

HttpResponse SessionService::create(std::string_view body) {
  const auto j = parse_body(body);
  SessionInput input;
  input.prompt = field<std::string>(j, "prompt");
  input.gs_min = field<double>(j, "gs_min", input.gs_min);
  input.gs_max = field<double>(j, "gs_max", input.gs_max);
  input.n_generate = field<std::size_t>(j, "n_generate", input.n_generate);
  input.k_retrieve = field<std::size_t>(j, "k_retrieve", input.k_retrieve);
  input.rng_seed = field<std::uint64_t>(j, "seed", options_.default_seed);
  validate(input);
  if (input.k_retrieve > 0 && !options_.corpus) throw Error(ErrorCode::CorpusNotLoaded, "no index loaded");

  static const Corpus kEmpty;
  const Corpus& corpus = options_.corpus ? *options_.corpus : kEmpty;
  const std::string id = next_id(input);

  const auto run = [this, input, &corpus]() {
    return std::make_shared<SessionState>(
        create_session(input, corpus, *options_.embedder, *options_.generator, options_.config));
  };

  if (!options_.async_creation) {
    try {
      finish(id, run(), std::nullopt);
    } catch (const Error& e) {
      {
        std::unique_lock lock(mutex_);
        sessions_.erase(id);
      }
      throw;
    }
    return json_response(201, ojson{{"session_id", id}});
  }

  {
    std::lock_guard lock(jobs_mutex_);
    ++running_jobs_;
    jobs_.emplace_back([this, id, run] {
      try {
        finish(id, run(), std::nullopt);
      } catch (const Error& e) {
        finish(id, nullptr, to_api_error(e));
      } catch (const std::exception& e) {
        finish(id, nullptr, ApiError{500, "internal", e.what()});
      }
      std::lock_guard done(jobs_mutex_);
      --running_jobs_;
      jobs_cv_.notify_all();
    });
  }
  return json_response(202, ojson{{"session_id", id}, {"status", "pending"}});
}

HttpResponse SessionService::status(const std::string& id) {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, id);
  const auto& e = it->second;
  switch (e.status) {
    case Status::pending:
      return json_response(200, ojson{{"session_id", id}, {"status", "pending"}});
    case Status::ready:
      return json_response(200, ojson{{"session_id", id}, {"status", "ready"}});
    case Status::failed:
      return json_response(200, ojson{{"session_id", id},
                                      {"status", "failed"},
                                      {"error", {{"code", e.error.code}, {"message", e.error.message}}}});
  }
  return json_response(500, ojson{});
}

std::shared_ptr<SessionState> SessionService::ready_session(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, id);
  if (it->second.status == Status::pending) throw Error(ErrorCode::UnknownSession, id + " is still being created");
  if (it->second.status == Status::failed) throw Error(ErrorCode::UnknownSession, id + " failed: " + it->second.error.message);
  return it->second.state;
}

HttpResponse SessionService::layout(const std::string& id) {
  return {200, "application/json", layout_document(*ready_session(id), id)};
}

HttpResponse SessionService::evaluate(const std::string& id, std::string_view body) {
  const auto state = ready_session(id);
  const auto j = parse_body(body);
  const auto a = field<std::string>(j, "keyword_a", std::string());
  const auto b = field<std::string>(j, "keyword_b", std::string());
  const auto bins = field<std::size_t>(j, "bins", std::size_t{20});
  if (bins == 0) throw Error(ErrorCode::InvalidInput, "bins must be >= 1");
  const Criterion criterion = build_criterion(a, b.empty() ? std::nullopt : std::optional<std::string_view>(b));
  return {200, "application/json", evaluation_document(evaluate_session(*state, criterion, *options_.embedder, bins))};
}

HttpResponse SessionService::selection(const std::string& id, std::string_view body) {
  const auto state = ready_session(id);
  const auto j = parse_body(body);
  if (!j.contains("record_ids") || !j["record_ids"].is_array()) {
    throw Error(ErrorCode::InvalidInput, "record_ids must be an array");
  }
  std::vector<std::string> ids;
  for (const auto& v : j["record_ids"]) {
    if (!v.is_string()) throw Error(ErrorCode::InvalidInput, "record_ids must contain strings");
    ids.push_back(v.get<std::string>());
  }
  const auto top_k = field<std::size_t>(j, "top_k", std::size_t{10});
  return {200, "application/json", selection_document(select_images(*state, ids, top_k))};
}

HttpResponse SessionService::image(const std::string& record_id) {
  {
    std::shared_lock lock(mutex_);
    for (const auto& [sid, entry] : sessions_) {
      if (entry.status != Status::ready) continue;
      auto it = entry.state->images.find(record_id);
      if (it != entry.state->images.end()) {
        return {200, "image/png", std::string(it->second.begin(), it->second.end())};
      }
    }
  }
  if (options_.corpus) {
    if (auto idx = options_.corpus->find(record_id)) {
      const auto path = options_.corpus_dir / options_.corpus->records()[*idx].image_ref;
      if (std::filesystem::is_regular_file(path)) {
        const auto bytes = read_file_bytes(path);
        return {200, "image/png", std::string(bytes.begin(), bytes.end())};
      }
    }
  }
  throw Error(ErrorCode::NotFound, "image " + record_id);
}

void mount_routes(httplib::Server& server, SessionService& service,
                  const std::optional<std::filesystem::path>& static_dir) {
  const auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    const auto out = service.handle(req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server.Get(R"(/api/.*)", forward);
  server.Post(R"(/api/.*)", forward);
  if (static_dir) server.set_mount_point("/", static_dir->string());
}

}  // namespace pm
