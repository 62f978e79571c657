#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "pm/backends.hpp"
#include "pm/corpus.hpp"
#include "testkit.hpp"

namespace pm::test {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pm-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline FeatureMatrix to_matrix(const std::vector<std::vector<float>>& rows, std::size_t dim) {
  FeatureMatrix m(0, dim);
  for (const auto& r : rows) m.append_row(r);
  return m;
}

/// Blob-structured db corpus: image features from testkit blobs, text
/// features from the mock embedder over each prompt.
inline Corpus blob_corpus(std::size_t n, std::uint64_t seed, std::size_t blobs = 3) {
  testkit::SyntheticCorpusSpec spec;
  spec.n_records = n;
  spec.blobs = blobs;
  spec.dim = kEmbeddingDim;
  spec.vocabulary = {{"castle", "misty", "mountain", "fantasy", "artstation", "trending", "on"},
                     {"cat", "cute", "fluffy", "portrait", "studio", "photo", "of"},
                     {"city", "neon", "night", "cyberpunk", "rain", "street", "the"}};
  const auto b = testkit::make_blobs(spec, seed);
  MockEmbedder embedder;
  std::vector<PromptImageRecord> records;
  FeatureMatrix text(0, kEmbeddingDim), image(0, kEmbeddingDim);
  for (std::size_t i = 0; i < n; ++i) {
    PromptImageRecord r;
    r.id = "db-" + std::to_string(100000 + i);
    r.prompt = b.prompts[i];
    r.image_ref = "images/" + r.id + ".png";
    r.guidance_scale = 7.0 + static_cast<double>(i % 5);
    r.seed = 1000 + i;
    r.row = i;
    records.push_back(r);
    text.append_row(embedder.embed_text(r.prompt + " #" + std::to_string(i)));
    image.append_row(b.rows[i]);
  }
  return Corpus::build(std::move(records), std::move(text), std::move(image));
}

}  // namespace pm::test
