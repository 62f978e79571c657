#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pm {

inline constexpr std::size_t kEmbeddingDim = 512;
inline constexpr std::size_t kConcatDim = 2 * kEmbeddingDim;

/// Dense row-major matrix of 32-bit features.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t dim);
  FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<float> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const float> row(std::size_t i) const noexcept {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<float> row(std::size_t i) noexcept { return {values_.data() + i * dim_, dim_}; }

  const std::vector<float>& values() const noexcept { return values_; }

  void append_row(std::span<const float> row);

  bool all_finite() const noexcept;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

enum class RecordSource { db, generated };

std::string_view to_string(RecordSource s);
RecordSource parse_source(std::string_view s);

struct PromptImageRecord {
  std::string id;
  std::string prompt;
  std::string image_ref;
  std::optional<double> guidance_scale;
  std::optional<std::uint64_t> seed;
  RecordSource source = RecordSource::db;
  std::size_t row = 0;

  friend bool operator==(const PromptImageRecord&, const PromptImageRecord&) = default;
};

/// L2 norm accumulated in double.
double l2_norm(std::span<const float> v) noexcept;

/// Immutable, validated prompt–image corpus with per-record text and image
/// embeddings. Record i owns row i of both matrices.
class Corpus {
 public:
  Corpus() = default;

  /// Validates and takes ownership. Rows whose norm is off by more than
  /// 1e-5 but at most 1e-3 are renormalized; larger deviations throw
  /// NotNormalized.
  static Corpus build(std::vector<PromptImageRecord> records, FeatureMatrix text_features,
                      FeatureMatrix image_features);

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  const std::vector<PromptImageRecord>& records() const noexcept { return records_; }
  const FeatureMatrix& text_features() const noexcept { return text_; }
  const FeatureMatrix& image_features() const noexcept { return image_; }

  const PromptImageRecord& get_record(std::string_view id) const;
  std::optional<std::size_t> find(std::string_view id) const;

  std::span<const float> text_feature(std::size_t index) const { return text_.row(records_[index].row); }
  std::span<const float> image_feature(std::size_t index) const { return image_.row(records_[index].row); }

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.records_ == b.records_ && a.text_ == b.text_ && a.image_ == b.image_;
  }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
  };

  std::vector<PromptImageRecord> records_;
  FeatureMatrix text_;
  FeatureMatrix image_;
  std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> index_;
};

/// Reads `manifest_path` (JSON lines) plus `text.pmeb` and `image.pmeb` from
/// `embeddings_dir`.
Corpus ingest_manifest(const std::filesystem::path& manifest_path,
                       const std::filesystem::path& embeddings_dir);

/// Writes manifest.jsonl, text.pmeb and image.pmeb into `out_dir`.
void write_corpus(const Corpus& corpus, const std::filesystem::path& out_dir);

/// Loads a directory produced by write_corpus.
Corpus load_corpus_dir(const std::filesystem::path& dir);

std::string manifest_line(const PromptImageRecord& record);
PromptImageRecord parse_manifest_line(std::string_view line, std::size_t line_number);

}  // namespace pm
