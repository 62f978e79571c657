#include "pm/backends.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "pm/codec.hpp"
#include "pm/corpus.hpp"
#include "pm/hash.hpp"

namespace pm {

using json = nlohmann::json;

FeatureVector MockEmbedder::embed_bytes(std::span<const unsigned char> bytes) const {
  SplitMix64 gen(fnv1a64(bytes) ^ seed_);
  std::vector<double> v(kEmbeddingDim);
  double sq = 0.0;
  for (auto& x : v) {
    x = 2.0 * gen.uniform() - 1.0;
    sq += x * x;
  }
  const double norm = std::sqrt(sq);
  FeatureVector out(kEmbeddingDim);
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

FeatureVector MockEmbedder::embed_text(std::string_view text) const {
  if (text.empty()) throw Error(ErrorCode::InvalidInput, "embed_text: empty text");
  return embed_bytes({reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

FeatureVector MockEmbedder::embed_image(std::span<const unsigned char> image_bytes) const {
  if (!decode_png_info(image_bytes)) throw Error(ErrorCode::UndecodableImage, "embed_image");
  return embed_bytes(image_bytes);
}

HttpEndpoint parse_endpoint(std::string_view url) {
  const auto scheme = url.find("://");
  if (scheme == std::string_view::npos) throw Error(ErrorCode::InvalidInput, "endpoint without scheme: " + std::string(url));
  const auto path = url.find('/', scheme + 3);
  HttpEndpoint ep;
  ep.scheme_host_port = std::string(url.substr(0, path));
  if (path != std::string_view::npos) {
    ep.path_prefix = std::string(url.substr(path));
    while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
  }
  return ep;
}

namespace {

json post_json(const HttpEndpoint& ep, std::chrono::milliseconds timeout, const std::string& route,
               const std::string& body) {
  httplib::Client client(ep.scheme_host_port);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  const std::string target = ep.path_prefix + route;
  auto res = client.Post(target, body, "application/json");
  if (!res) {
    const auto err = res.error();
    const std::string what = ep.scheme_host_port + target + ": " + httplib::to_string(err);
    if (err == httplib::Error::Read || err == httplib::Error::Write) throw Error(ErrorCode::BackendTimeout, what);
    throw Error(ErrorCode::BackendUnavailable, what);
  }
  if (res->status != 200) {
    throw Error(ErrorCode::BackendUnavailable,
                ep.scheme_host_port + target + ": HTTP " + std::to_string(res->status));
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BackendUnavailable, target + ": invalid JSON response");
  }
}

FeatureVector vector_from_response(const json& j) {
  if (!j.is_object() || !j.contains("vector") || !j["vector"].is_array() ||
      j["vector"].size() != kEmbeddingDim) {
    throw Error(ErrorCode::BackendUnavailable, "embedder response lacks a 512-d \"vector\"");
  }
  FeatureVector v;
  v.reserve(kEmbeddingDim);
  for (const auto& x : j["vector"]) {
    if (!x.is_number()) throw Error(ErrorCode::BackendUnavailable, "non-numeric vector component");
    v.push_back(x.get<float>());
  }
  const double norm = l2_norm(v);
  if (!std::isfinite(norm) || norm == 0.0) throw Error(ErrorCode::BackendUnavailable, "degenerate embedding");
  for (float& x : v) x = static_cast<float>(x / norm);
  return v;
}

}  // namespace

HttpEmbedder::HttpEmbedder(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(parse_endpoint(endpoint)), timeout_(timeout) {}

FeatureVector HttpEmbedder::post(const std::string& route, const std::string& body) const {
  return vector_from_response(post_json(endpoint_, timeout_, route, body));
}

FeatureVector HttpEmbedder::embed_text(std::string_view text) const {
  if (text.empty()) throw Error(ErrorCode::InvalidInput, "embed_text: empty text");
  return post("/embed_text", json{{"text", std::string(text)}}.dump());
}

FeatureVector HttpEmbedder::embed_image(std::span<const unsigned char> image_bytes) const {
  if (!decode_png_info(image_bytes)) throw Error(ErrorCode::UndecodableImage, "embed_image");
  return post("/embed_image", json{{"png_base64", base64_encode(image_bytes)}}.dump());
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config) {
  if (config.kind == EmbedderConfig::Kind::http) {
    if (!config.endpoint) throw Error(ErrorCode::InvalidInput, "http embedder requires an endpoint");
    return std::make_unique<HttpEmbedder>(*config.endpoint, config.timeout);
  }
  return std::make_unique<MockEmbedder>();
}

void validate(const GenerationRequest& r) {
  if (!(r.guidance_scale > 0.0) || !std::isfinite(r.guidance_scale)) {
    throw Error(ErrorCode::InvalidRange, "guidance_scale must be > 0");
  }
  if (r.width < 64 || r.width > 2048 || r.height < 64 || r.height > 2048) {
    throw Error(ErrorCode::InvalidRange, "width and height must lie in [64, 2048]");
  }
}

GenerationResult MockGenerator::generate(const GenerationRequest& request) const {
  validate(request);
  const auto start = std::chrono::steady_clock::now();
  std::uint64_t h = fnv1a64(request.prompt);
  h = fnv1a64_u64(std::bit_cast<std::uint64_t>(request.guidance_scale), h);
  h = fnv1a64_u64(request.seed, h);
  const Rgb color{static_cast<std::uint8_t>(h & 0xff), static_cast<std::uint8_t>((h >> 8) & 0xff),
                  static_cast<std::uint8_t>((h >> 16) & 0xff)};
  GenerationResult result{request, encode_solid_png(kSide, kSide, color), {}};
  result.elapsed = std::chrono::steady_clock::now() - start;
  return result;
}

HttpGenerator::HttpGenerator(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(parse_endpoint(endpoint)), timeout_(timeout) {}

GenerationResult HttpGenerator::generate(const GenerationRequest& request) const {
  validate(request);
  const auto start = std::chrono::steady_clock::now();
  const json body{{"prompt", request.prompt},
                  {"guidance_scale", request.guidance_scale},
                  {"seed", request.seed},
                  {"width", request.width},
                  {"height", request.height}};
  const json res = post_json(endpoint_, timeout_, "/generate", body.dump());
  if (!res.is_object() || !res.contains("png_base64") || !res["png_base64"].is_string()) {
    throw Error(ErrorCode::BackendUnavailable, "generator response lacks \"png_base64\"");
  }
  auto bytes = base64_decode(res["png_base64"].get<std::string>());
  if (!bytes) throw Error(ErrorCode::UndecodableImage, "generator returned invalid base64");
  const auto info = decode_png_info(*bytes);
  if (!info) throw Error(ErrorCode::UndecodableImage, "generator returned an invalid PNG");
  if (info->width != request.width || info->height != request.height) {
    throw Error(ErrorCode::UndecodableImage, "generator returned " + std::to_string(info->width) + "x" +
                                                 std::to_string(info->height) + " for a " +
                                                 std::to_string(request.width) + "x" +
                                                 std::to_string(request.height) + " request");
  }
  GenerationResult result{request, std::move(*bytes), {}};
  result.elapsed = std::chrono::steady_clock::now() - start;
  return result;
}

std::unique_ptr<Generator> make_generator(const GeneratorConfig& config) {
  if (config.endpoint) return std::make_unique<HttpGenerator>(*config.endpoint, config.timeout);
  return std::make_unique<MockGenerator>();
}

FeatureVector concat_features(std::span<const float> text_vec, std::span<const float> image_vec) {
  if (text_vec.size() != kEmbeddingDim || image_vec.size() != kEmbeddingDim) {
    throw Error(ErrorCode::DimensionMismatch, "concat_features expects two 512-d vectors");
  }
  FeatureVector out;
  out.reserve(kConcatDim);
  out.insert(out.end(), text_vec.begin(), text_vec.end());
  out.insert(out.end(), image_vec.begin(), image_vec.end());
  return out;
}

namespace {

void check_range(double min, double max, std::size_t n) {
  if (!(min > 0.0) || !(min <= max) || !std::isfinite(max)) {
    throw Error(ErrorCode::InvalidRange, "guidance range must satisfy 0 < min <= max");
  }
  if (n == 0) throw Error(ErrorCode::InvalidRange, "n must be >= 1");
}

double draw_guidance(SplitMix64& gen, double min, double max) {
  if (min == max) {
    gen.next();
    return min;
  }
  return min + gen.uniform() * (max - min);
}

}  // namespace

std::vector<double> sample_guidance(double min, double max, std::size_t n, std::uint64_t rng_seed) {
  check_range(min, max, n);
  SplitMix64 gen(rng_seed);
  std::vector<double> out(n);
  for (auto& v : out) v = draw_guidance(gen, min, max);
  return out;
}

std::vector<GenerationRequest> plan_generation(std::string_view prompt, double gs_min, double gs_max,
                                               std::size_t n, std::uint64_t rng_seed, std::uint32_t width,
                                               std::uint32_t height) {
  check_range(gs_min, gs_max, n);
  SplitMix64 gen(rng_seed);
  std::vector<GenerationRequest> plan(n);
  for (auto& r : plan) {
    r.prompt = std::string(prompt);
    r.guidance_scale = draw_guidance(gen, gs_min, gs_max);
    r.width = width;
    r.height = height;
  }
  for (auto& r : plan) r.seed = gen.next();
  return plan;
}

GenerationBatch generate_images(const Generator& generator, std::string_view prompt, double gs_min,
                                double gs_max, std::size_t n, std::uint64_t rng_seed, std::uint32_t width,
                                std::uint32_t height, std::size_t max_in_flight) {
  const auto plan = plan_generation(prompt, gs_min, gs_max, n, rng_seed, width, height);
  std::vector<std::optional<GenerationResult>> slots(n);
  std::vector<std::optional<GenerationFailure>> failed(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i] = generator.generate(plan[i]);
      } catch (const Error& e) {
        failed[i] = GenerationFailure{plan[i], e.code(), e.detail()};
      } catch (const std::exception& e) {
        failed[i] = GenerationFailure{plan[i], ErrorCode::BackendUnavailable, e.what()};
      }
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(max_in_flight, 1), n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  GenerationBatch batch;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) batch.results.push_back(std::move(*slots[i]));
    if (failed[i]) batch.failures.push_back(std::move(*failed[i]));
  }
  if (batch.results.empty()) {
    const auto& f = batch.failures.front();
    throw Error(f.code, "all " + std::to_string(n) + " generations failed: " + f.message);
  }
  return batch;
}

}  // namespace pm
