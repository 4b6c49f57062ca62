#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dcgh::io {

// Little-endian byte sink. Everything is buffered in memory and committed with
// write_atomic so a reader never observes a half-written file.
class ByteWriter {
 public:
  void magic(std::string_view tag);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f32s(std::span<const float> vs);
  void bytes(std::span<const std::uint8_t> bs);
  void u64s(std::span<const std::uint64_t> vs);

  const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  // Throws kMissingFile / kIo when the file cannot be read.
  static ByteReader from_file(const std::filesystem::path& path);
  ByteReader(std::vector<std::uint8_t> data, std::string origin);

  // kBadMagic on mismatch.
  void expect_magic(std::string_view tag);
  // kBadVersion on mismatch.
  void expect_version(std::uint32_t version);
  std::uint32_t u32();
  std::uint64_t u64();
  std::vector<float> f32s(std::uint64_t count);
  std::vector<std::uint8_t> bytes(std::uint64_t count);
  std::vector<std::uint64_t> u64s(std::uint64_t count);

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  const std::string& origin() const noexcept { return origin_; }

 private:
  void require(std::uint64_t n, std::uint64_t elem_size);

  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string origin_;
};

// Writes to a sibling temp file then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_atomic(const std::filesystem::path& path, std::string_view text);

std::string read_text(const std::filesystem::path& path);

// Lowercase hex SHA-256 of the file contents.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace dcgh::io
