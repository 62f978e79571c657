#include "pm/corpus.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pm/error.hpp"
#include "pm/pmeb.hpp"

namespace pm {

using ordered_json = nlohmann::ordered_json;

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t dim)
    : rows_(rows), dim_(dim), values_(rows * dim, 0.0f) {}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<float> values)
    : rows_(rows), dim_(dim), values_(std::move(values)) {
  if (values_.size() != rows_ * dim_) {
    throw Error(ErrorCode::DimensionMismatch, "value count does not match rows*dim");
  }
}

void FeatureMatrix::append_row(std::span<const float> row) {
  if (rows_ == 0 && dim_ == 0) dim_ = row.size();
  if (row.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "append_row");
  values_.insert(values_.end(), row.begin(), row.end());
  ++rows_;
}

bool FeatureMatrix::all_finite() const noexcept {
  for (float v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string_view to_string(RecordSource s) { return s == RecordSource::db ? "db" : "generated"; }

RecordSource parse_source(std::string_view s) {
  if (s == "db") return RecordSource::db;
  if (s == "generated") return RecordSource::generated;
  throw Error(ErrorCode::InvalidInput, "unknown source '" + std::string(s) + "'");
}

double l2_norm(std::span<const float> v) noexcept {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

namespace {

void normalize_rows(FeatureMatrix& m, const char* name) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double norm = l2_norm(row);
    const double dev = std::abs(norm - 1.0);
    if (dev <= 1e-5) continue;
    if (dev > 1e-3) {
      throw Error(ErrorCode::NotNormalized,
                  std::string(name) + " row " + std::to_string(r) + " has norm " + std::to_string(norm));
    }
    for (float& x : row) x = static_cast<float>(x / norm);
  }
}

}  // namespace

Corpus Corpus::build(std::vector<PromptImageRecord> records, FeatureMatrix text_features,
                     FeatureMatrix image_features) {
  const std::size_t n = records.size();
  for (const auto* m : {&text_features, &image_features}) {
    const char* name = m == &text_features ? "text.pmeb" : "image.pmeb";
    if (m->rows() == 0 && m->dim() == 0) continue;
    if (m->dim() != kEmbeddingDim) {
      throw Error(ErrorCode::DimensionMismatch, std::string(name) + ": dim " + std::to_string(m->dim()));
    }
  }
  Corpus c;
  c.index_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    if (r.id.empty()) throw Error(ErrorCode::MalformedManifest, "record " + std::to_string(i) + ": empty id");
    if (r.row >= text_features.rows() || r.row >= image_features.rows()) throw Error(ErrorCode::RowOutOfRange, r.id);
    if (r.row != i) {
      throw Error(ErrorCode::MalformedManifest,
                  r.id + ": row " + std::to_string(r.row) + " out of order (expected " + std::to_string(i) + ")");
    }
    if (r.source == RecordSource::db && r.prompt.empty()) {
      throw Error(ErrorCode::MalformedManifest, r.id + ": db record without prompt");
    }
    if (r.guidance_scale && !(std::isfinite(*r.guidance_scale) && *r.guidance_scale >= 0.0)) {
      throw Error(ErrorCode::MalformedManifest, r.id + ": invalid guidance_scale");
    }
    if (!c.index_.emplace(r.id, i).second) throw Error(ErrorCode::DuplicateId, r.id);
  }
  if (text_features.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "text.pmeb has " + std::to_string(text_features.rows()) +
                                                  " rows for " + std::to_string(n) + " records");
  }
  if (image_features.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "image.pmeb has " + std::to_string(image_features.rows()) +
                                                  " rows for " + std::to_string(n) + " records");
  }
  if (!text_features.all_finite()) throw Error(ErrorCode::NonFiniteValue, "text.pmeb");
  if (!image_features.all_finite()) throw Error(ErrorCode::NonFiniteValue, "image.pmeb");
  normalize_rows(text_features, "text.pmeb");
  normalize_rows(image_features, "image.pmeb");
  if (n == 0) {
    text_features = FeatureMatrix(0, kEmbeddingDim);
    image_features = FeatureMatrix(0, kEmbeddingDim);
  }
  c.records_ = std::move(records);
  c.text_ = std::move(text_features);
  c.image_ = std::move(image_features);
  return c;
}

const PromptImageRecord& Corpus::get_record(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::NotFound, std::string(id));
  return records_[it->second];
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string manifest_line(const PromptImageRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["prompt"] = r.prompt;
  j["image"] = r.image_ref;
  j["guidance_scale"] = r.guidance_scale ? ordered_json(*r.guidance_scale) : ordered_json(nullptr);
  j["seed"] = r.seed ? ordered_json(*r.seed) : ordered_json(nullptr);
  j["source"] = std::string(to_string(r.source));
  j["row"] = r.row;
  return j.dump();
}

PromptImageRecord parse_manifest_line(std::string_view line, std::size_t line_number) {
  const auto fail = [&](const std::string& why) -> Error {
    return Error(ErrorCode::MalformedManifest, "line " + std::to_string(line_number) + ": " + why);
  };
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw fail(e.what());
  }
  static constexpr std::string_view kKeys[] = {"id", "prompt", "image", "guidance_scale", "seed", "source", "row"};
  if (!j.is_object() || j.size() != std::size(kKeys)) throw fail("expected an object with 7 keys");
  for (auto key : kKeys) {
    if (!j.contains(key)) throw fail("missing key '" + std::string(key) + "'");
  }
  PromptImageRecord r;
  if (!j["id"].is_string() || !j["prompt"].is_string() || !j["image"].is_string() || !j["source"].is_string()) {
    throw fail("id, prompt, image and source must be strings");
  }
  r.id = j["id"].get<std::string>();
  r.prompt = j["prompt"].get<std::string>();
  r.image_ref = j["image"].get<std::string>();
  const auto& gs = j["guidance_scale"];
  if (!gs.is_null()) {
    if (!gs.is_number()) throw fail("guidance_scale must be a number or null");
    r.guidance_scale = gs.get<double>();
    if (!std::isfinite(*r.guidance_scale) || *r.guidance_scale < 0.0) throw fail("guidance_scale must be >= 0");
  }
  const auto& seed = j["seed"];
  if (!seed.is_null()) {
    if (!seed.is_number_unsigned()) throw fail("seed must be an unsigned integer or null");
    r.seed = seed.get<std::uint64_t>();
  }
  try {
    r.source = parse_source(j["source"].get<std::string>());
  } catch (const Error&) {
    throw fail("source must be \"db\" or \"generated\"");
  }
  if (!j["row"].is_number_unsigned()) throw fail("row must be a non-negative integer");
  r.row = j["row"].get<std::size_t>();
  if (r.id.empty()) throw fail("empty id");
  return r;
}

Corpus ingest_manifest(const std::filesystem::path& manifest_path, const std::filesystem::path& embeddings_dir) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::IoError, manifest_path.string());
  std::vector<PromptImageRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    records.push_back(parse_manifest_line(line, line_number));
  }
  FeatureMatrix text = read_pmeb(embeddings_dir / "text.pmeb");
  FeatureMatrix image = read_pmeb(embeddings_dir / "image.pmeb");
  return Corpus::build(std::move(records), std::move(text), std::move(image));
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& out_dir) {
  // Encode first so a bad matrix leaves no partial output behind.
  const auto text = encode_pmeb(corpus.text_features());
  const auto image = encode_pmeb(corpus.image_features());
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, out_dir.string() + ": " + ec.message());
  {
    std::ofstream out(out_dir / "manifest.jsonl", std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, (out_dir / "manifest.jsonl").string());
    for (const auto& r : corpus.records()) out << manifest_line(r) << '\n';
    if (!out) throw Error(ErrorCode::IoError, (out_dir / "manifest.jsonl").string());
  }
  write_file_bytes(out_dir / "text.pmeb", text);
  write_file_bytes(out_dir / "image.pmeb", image);
}

Corpus load_corpus_dir(const std::filesystem::path& dir) { return ingest_manifest(dir / "manifest.jsonl", dir); }

}  // namespace pm
