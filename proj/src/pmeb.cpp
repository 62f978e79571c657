#include "pm/pmeb.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "pm/error.hpp"

namespace pm {
namespace {

constexpr unsigned char kMagic[4] = {0x50, 0x4D, 0x45, 0x42};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffU));
}

std::uint32_t get_u32(std::span<const unsigned char> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<unsigned char> encode_pmeb(const FeatureMatrix& m) {
  if (!m.all_finite()) throw Error(ErrorCode::NonFiniteValue, "matrix contains non-finite values");
  std::vector<unsigned char> out;
  out.reserve(kPmebHeaderSize + m.values().size() * 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kPmebVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.dim()));
  for (float f : m.values()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

FeatureMatrix decode_pmeb(std::span<const unsigned char> bytes, const std::string& name) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(ErrorCode::BadMagic, name);
  if (bytes.size() < kPmebHeaderSize) throw Error(ErrorCode::IoError, name + ": truncated header");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kPmebVersion) {
    throw Error(ErrorCode::VersionMismatch, name + ": version " + std::to_string(version));
  }
  const std::uint32_t rows = get_u32(bytes, 8);
  const std::uint32_t dim = get_u32(bytes, 12);
  if (dim != kEmbeddingDim && dim != kConcatDim) {
    throw Error(ErrorCode::DimensionMismatch, name + ": dim " + std::to_string(dim));
  }
  const std::uint64_t payload = static_cast<std::uint64_t>(rows) * dim * 4;
  if (bytes.size() - kPmebHeaderSize != payload) {
    throw Error(ErrorCode::DimensionMismatch,
                name + ": payload is " + std::to_string(bytes.size() - kPmebHeaderSize) +
                    " bytes, header implies " + std::to_string(payload));
  }
  std::vector<float> values(static_cast<std::size_t>(rows) * dim);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes, kPmebHeaderSize + 4 * i));
  }
  FeatureMatrix m(rows, dim, std::move(values));
  if (!m.all_finite()) throw Error(ErrorCode::NonFiniteValue, name);
  return m;
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, path.string());
}

void write_pmeb(const std::filesystem::path& path, const FeatureMatrix& m) {
  write_file_bytes(path, encode_pmeb(m));
}

FeatureMatrix read_pmeb(const std::filesystem::path& path) {
  return decode_pmeb(read_file_bytes(path), path.filename().string());
}

}  // namespace pm
