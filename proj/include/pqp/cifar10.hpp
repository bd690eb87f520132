#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pqp/image.hpp"

namespace pqp::cifar10 {

inline constexpr std::size_t kSide = 32;
inline constexpr std::size_t kPlane = kSide * kSide;
inline constexpr std::size_t kRecordBytes = 1 + 3 * kPlane;  // 3073
inline constexpr int kClasses = 10;

struct Record {
  Image image;
  int label;
};

// A record is one label byte followed by the R, G and B planes, each 32x32
// row-major. Records are converted to the interleaved Image layout.

/// Number of records in a batch of `byte_count` bytes; FormatError unless
/// the length is a positive multiple of 3073.
std::size_t record_count(std::size_t byte_count);

Record decode_record(std::span<const std::uint8_t> record);

/// Reads record `index` from a batch file.
Record load_record(const std::filesystem::path& path, std::size_t index);

/// Reads `count` records starting at `first`.
std::vector<Record> load_records(const std::filesystem::path& path, std::size_t first,
                                 std::size_t count);

std::size_t file_record_count(const std::filesystem::path& path);

/// Inverse of decode_record, for writing fixtures. The image must be 32x32.
std::vector<std::uint8_t> encode_record(const Image& image, int label);

}  // namespace pqp::cifar10
