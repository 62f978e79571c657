#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pm/corpus.hpp"

namespace pm {

// .pmeb layout, all integers little-endian:
//   0..3   magic "PMEB"
//   4..7   version (u32) = 1
//   8..11  row count (u32)
//   12..15 dim (u32), 512 or 1024
//   16..   rows * dim IEEE-754 binary32, row-major
inline constexpr std::uint32_t kPmebVersion = 1;
inline constexpr std::size_t kPmebHeaderSize = 16;

std::vector<unsigned char> encode_pmeb(const FeatureMatrix& m);
FeatureMatrix decode_pmeb(std::span<const unsigned char> bytes, const std::string& name = "<memory>");

void write_pmeb(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_pmeb(const std::filesystem::path& path);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes);

}  // namespace pm
