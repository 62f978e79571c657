#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pm/error.hpp"

namespace pm {

using FeatureVector = std::vector<float>;

/// Contrastive text/image encoder producing unit-norm 512-d vectors.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual FeatureVector embed_text(std::string_view text) const = 0;
  virtual FeatureVector embed_image(std::span<const unsigned char> image_bytes) const = 0;
};

/// Deterministic stand-in for a real encoder.
///
/// The input bytes are hashed with 64-bit FNV-1a (offset basis
/// 0xcbf29ce484222325, prime 0x100000001b3); the hash, xor-ed with the
/// embedder seed, initialises a SplitMix64 stream. Each of the 512
/// components is `2u - 1` for successive uniforms `u = (next() >> 11) * 2^-53`,
/// and the vector is L2-normalised in double before narrowing to float.
/// Image inputs must decode as PNG; the raw bytes are hashed.
class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::uint64_t seed = 0) : seed_(seed) {}
  FeatureVector embed_text(std::string_view text) const override;
  FeatureVector embed_image(std::span<const unsigned char> image_bytes) const override;

  /// The expansion shared by both entry points.
  FeatureVector embed_bytes(std::span<const unsigned char> bytes) const;

 private:
  std::uint64_t seed_;
};

struct HttpEndpoint {
  std::string scheme_host_port;  // "http://host:port"
  std::string path_prefix;       // "" or "/prefix"
};

HttpEndpoint parse_endpoint(std::string_view url);

struct EmbedderConfig {
  enum class Kind { mock, http };
  Kind kind = Kind::mock;
  std::optional<std::string> endpoint;
  std::chrono::milliseconds timeout{30'000};
};

/// POST {endpoint}/embed_text and /embed_image, JSON in and out.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string endpoint, std::chrono::milliseconds timeout);
  FeatureVector embed_text(std::string_view text) const override;
  FeatureVector embed_image(std::span<const unsigned char> image_bytes) const override;

 private:
  FeatureVector post(const std::string& route, const std::string& body) const;
  HttpEndpoint endpoint_;
  std::chrono::milliseconds timeout_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config);

struct GenerationRequest {
  std::string prompt;
  double guidance_scale = 7.5;
  std::uint64_t seed = 0;
  std::uint32_t width = 512;
  std::uint32_t height = 512;

  friend bool operator==(const GenerationRequest&, const GenerationRequest&) = default;
};

void validate(const GenerationRequest& request);

struct GenerationResult {
  GenerationRequest request;
  std::vector<unsigned char> image_bytes;
  std::chrono::nanoseconds elapsed{0};
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual GenerationResult generate(const GenerationRequest& request) const = 0;
};

/// Emits an 8x8 solid-colour PNG. The colour is the low 24 bits of
/// FNV-1a over (prompt bytes, guidance-scale bit pattern, seed).
class MockGenerator final : public Generator {
 public:
  static constexpr std::uint32_t kSide = 8;
  GenerationResult generate(const GenerationRequest& request) const override;
};

/// POST {endpoint}/generate with the request as JSON; expects {"png_base64"}.
class HttpGenerator final : public Generator {
 public:
  HttpGenerator(std::string endpoint, std::chrono::milliseconds timeout);
  GenerationResult generate(const GenerationRequest& request) const override;

 private:
  HttpEndpoint endpoint_;
  std::chrono::milliseconds timeout_;
};

struct GeneratorConfig {
  std::optional<std::string> endpoint;  // absent means mock
  std::chrono::milliseconds timeout{120'000};
};

std::unique_ptr<Generator> make_generator(const GeneratorConfig& config);

/// Text half first, image half second; the result is not renormalised.
FeatureVector concat_features(std::span<const float> text_vec, std::span<const float> image_vec);

/// Draws `n` uniform values on [min, max] from SplitMix64(rng_seed).
std::vector<double> sample_guidance(double min, double max, std::size_t n, std::uint64_t rng_seed);

/// The requests generate_images will issue: guidance scales are the first
/// n draws of SplitMix64(rng_seed), per-image seeds the next n raw words.
std::vector<GenerationRequest> plan_generation(std::string_view prompt, double gs_min, double gs_max,
                                               std::size_t n, std::uint64_t rng_seed,
                                               std::uint32_t width = 512, std::uint32_t height = 512);

struct GenerationFailure {
  GenerationRequest request;
  ErrorCode code;
  std::string message;
};

struct GenerationBatch {
  std::vector<GenerationResult> results;    // in request order, failures omitted
  std::vector<GenerationFailure> failures;  // empty unless partially failed

  bool partial() const noexcept { return !failures.empty(); }
};

/// Runs the planned requests with at most `max_in_flight` concurrent calls.
/// Throws the first failure's error when every request fails.
GenerationBatch generate_images(const Generator& generator, std::string_view prompt, double gs_min,
                                double gs_max, std::size_t n, std::uint64_t rng_seed,
                                std::uint32_t width = 512, std::uint32_t height = 512,
                                std::size_t max_in_flight = 4);

}  // namespace pm
