#include "pqp/cifar10.hpp"

#include <fstream>
#include <string>

#include "pqp/errors.hpp"
#include "pqp/png_io.hpp"

namespace pqp::cifar10 {

std::size_t record_count(std::size_t byte_count) {
  if (byte_count == 0 || byte_count % kRecordBytes != 0) {
    throw FormatError("CIFAR-10 batch length " + std::to_string(byte_count) +
                      " is not a positive multiple of 3073");
  }
  return byte_count / kRecordBytes;
}

Record decode_record(std::span<const std::uint8_t> record) {
  if (record.size() != kRecordBytes) {
    throw FormatError("CIFAR-10 record must be 3073 bytes");
  }
  const int label = record[0];
  if (label >= kClasses) {
    throw FormatError("CIFAR-10 label " + std::to_string(label) + " out of range");
  }
  std::vector<std::uint8_t> data(kPlane * Image::kChannels);
  for (std::size_t p = 0; p < kPlane; ++p) {
    for (std::size_t c = 0; c < Image::kChannels; ++c) {
      data[p * Image::kChannels + c] = record[1 + c * kPlane + p];
    }
  }
  return Record{Image(kSide, kSide, std::move(data)), label};
}

std::vector<std::uint8_t> encode_record(const Image& image, int label) {
  if (image.height() != kSide || image.width() != kSide) {
    throw DimensionMismatch("CIFAR-10 records are 32x32");
  }
  if (label < 0 || label >= kClasses) {
    throw std::invalid_argument("CIFAR-10 label out of range");
  }
  std::vector<std::uint8_t> out(kRecordBytes);
  out[0] = static_cast<std::uint8_t>(label);
  for (std::size_t p = 0; p < kPlane; ++p) {
    for (std::size_t c = 0; c < Image::kChannels; ++c) {
      out[1 + c * kPlane + p] = image[p * Image::kChannels + c];
    }
  }
  return out;
}

std::size_t file_record_count(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  return record_count(static_cast<std::size_t>(size));
}

std::vector<Record> load_records(const std::filesystem::path& path, std::size_t first,
                                 std::size_t count) {
  const std::size_t total = file_record_count(path);
  if (first >= total || count > total - first) {
    throw std::out_of_range("CIFAR-10 records [" + std::to_string(first) + ", " +
                            std::to_string(first + count) + ") outside batch of " +
                            std::to_string(total));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(static_cast<std::streamoff>(first * kRecordBytes));
  std::vector<Record> records;
  records.reserve(count);
  std::vector<std::uint8_t> buf(kRecordBytes);
  for (std::size_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(kRecordBytes));
    if (!in) throw IoError("short read in " + path.string());
    records.push_back(decode_record(buf));
  }
  return records;
}

Record load_record(const std::filesystem::path& path, std::size_t index) {
  return std::move(load_records(path, index, 1).front());
}

}  // namespace pqp::cifar10
