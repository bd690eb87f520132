#include "pqp/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>

#include "pqp/errors.hpp"

namespace pqp {
namespace {

// libpng reports errors by longjmp. Everything touched between setjmp and a
// possible longjmp lives in these structs and is reached through a pointer
// that never changes, so no destructor is skipped and no local goes stale.
struct ErrorState {
  char message[256] = {};
  bool truncated = false;
};

struct ReadState {
  ErrorState error;
  const std::uint8_t* bytes = nullptr;
  std::size_t size = 0;
  std::size_t pos = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int bit_depth = 0;
  int color_type = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  PngDecodeInfo info;
};

struct WriteState {
  ErrorState error;
  const Image* image = nullptr;
  std::vector<std::uint8_t> out;
};

void on_error(png_structp png, png_const_charp msg) {
  auto* err = static_cast<ErrorState*>(png_get_error_ptr(png));
  std::strncpy(err->message, msg, sizeof(err->message) - 1);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

void read_from_memory(png_structp png, png_bytep dest, png_size_t length) {
  auto* st = static_cast<ReadState*>(png_get_io_ptr(png));
  if (st->size - st->pos < length) {
    st->error.truncated = true;
    png_error(png, "unexpected end of PNG data");
  }
  std::memcpy(dest, st->bytes + st->pos, length);
  st->pos += length;
}

void write_to_memory(png_structp png, png_bytep src, png_size_t length) {
  auto* st = static_cast<WriteState*>(png_get_io_ptr(png));
  st->out.insert(st->out.end(), src, src + length);
}

void flush_noop(png_structp) {}

// Returns false after a libpng error; details are in st->error.
bool decode_into(png_structp png, png_infop info, ReadState* const st) {
  if (setjmp(png_jmpbuf(png))) {
    return false;
  }
  png_set_read_fn(png, st, read_from_memory);
  png_read_info(png, info);

  st->bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (st->bit_depth == 16) {
    std::strcpy(st->error.message, "16-bit PNG cannot be represented in 8-bit levels");
    return false;
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    st->info.palette_expanded = true;
  }
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (st->bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
    st->info.gray_expanded = true;
  }
  if ((color_type & PNG_COLOR_MASK_ALPHA) != 0 || png_get_valid(png, info, PNG_INFO_tRNS)) {
    // tRNS is expanded to a real alpha channel first so stripping is uniform.
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    st->info.alpha_discarded = true;
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  st->width = png_get_image_width(png, info);
  st->height = png_get_image_height(png, info);
  st->channels = png_get_channels(png, info);
  if (st->channels != 3 || png_get_bit_depth(png, info) != 8) {
    std::strcpy(st->error.message, "PNG does not convert losslessly to 8-bit RGB");
    return false;
  }
  const std::size_t stride = std::size_t{st->width} * 3;
  st->pixels.resize(stride * st->height);
  st->rows.resize(st->height);
  for (std::uint32_t r = 0; r < st->height; ++r) st->rows[r] = st->pixels.data() + r * stride;
  png_read_image(png, st->rows.data());
  png_read_end(png, nullptr);
  return true;
}

bool encode_into(png_structp png, png_infop info, WriteState* const st) {
  if (setjmp(png_jmpbuf(png))) {
    return false;
  }
  const Image& img = *st->image;
  png_set_write_fn(png, st, write_to_memory, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
               static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const auto data = img.data();
  const std::size_t stride = img.width() * Image::kChannels;
  for (std::size_t r = 0; r < img.height(); ++r) {
    png_write_row(png, const_cast<png_bytep>(data.data() + r * stride));
  }
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

Image decode_png(std::span<const std::uint8_t> bytes, PngDecodeInfo* info) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw FormatError("not a PNG file (bad signature)");
  }
  ReadState st;
  st.bytes = bytes.data();
  st.size = bytes.size();
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &st.error, on_error, on_warning);
  if (png == nullptr) throw std::bad_alloc();
  png_infop pinfo = png_create_info_struct(png);
  if (pinfo == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::bad_alloc();
  }
  const bool ok = decode_into(png, pinfo, &st);
  png_destroy_read_struct(&png, &pinfo, nullptr);
  if (!ok) {
    if (st.error.truncated) throw IoError(std::string("PNG data truncated: ") + st.error.message);
    throw FormatError(std::string("PNG rejected: ") + st.error.message);
  }
  if (info != nullptr) *info = st.info;
  return Image(st.height, st.width, std::move(st.pixels));
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  WriteState st;
  st.image = &image;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &st.error, on_error, on_warning);
  if (png == nullptr) throw std::bad_alloc();
  png_infop pinfo = png_create_info_struct(png);
  if (pinfo == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw std::bad_alloc();
  }
  const bool ok = encode_into(png, pinfo, &st);
  png_destroy_write_struct(&png, &pinfo);
  if (!ok) throw std::runtime_error(std::string("PNG encode failed: ") + st.error.message);
  return std::move(st.out);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Image load_png(const std::filesystem::path& path) {
  PngDecodeInfo info;
  Image image = decode_png(read_file_bytes(path), &info);
  if (info.alpha_discarded) {
    std::cerr << "warning: " << path.string() << ": alpha channel discarded\n";
  }
  return image;
}

void save_png(const Image& image, const std::filesystem::path& path) {
  write_file_bytes(path, encode_png(image));
}

}  // namespace pqp
