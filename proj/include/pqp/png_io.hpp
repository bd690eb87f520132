#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pqp/image.hpp"

namespace pqp {

/// What had to be done to turn a PNG into an 8-bit RGB Image.
struct PngDecodeInfo {
  bool alpha_discarded = false;
  bool gray_expanded = false;
  bool palette_expanded = false;
};

/// Decodes 8-bit RGB, RGBA, gray or gray+alpha PNGs, plus palette and
/// sub-byte gray images (both expand losslessly). Gray is replicated into
/// three identical channels; alpha is dropped. 16-bit images are rejected
/// with FormatError because they cannot be represented without rounding.
/// Truncated or corrupt data raises IoError.
Image decode_png(std::span<const std::uint8_t> bytes, PngDecodeInfo* info = nullptr);

/// Encodes as 8-bit RGB, no interlacing. decode(encode(x)) == x.
std::vector<std::uint8_t> encode_png(const Image& image);

/// Reads a PNG file; warns on stderr when an alpha channel is discarded.
Image load_png(const std::filesystem::path& path);
void save_png(const Image& image, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace pqp
