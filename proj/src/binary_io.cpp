#include "dcgh/binary_io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>

#include "dcgh/error.hpp"

namespace dcgh {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return "missing file";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kBadVersion: return "unsupported version";
    case ErrorCode::kTruncated: return "truncated payload";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kDomain: return "value out of domain";
    case ErrorCode::kZeroLabelRow: return "all-zero label row";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kUndefinedMetric: return "undefined metric";
    case ErrorCode::kEmptyInput: return "empty input";
    case ErrorCode::kConfig: return "config error";
  }
  return "error";
}

namespace io {

void ByteWriter::magic(std::string_view tag) { buf_.insert(buf_.end(), tag.begin(), tag.end()); }

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f32s(std::span<const float> vs) {
  buf_.reserve(buf_.size() + 4 * vs.size());
  for (float v : vs) f32(v);
}

void ByteWriter::bytes(std::span<const std::uint8_t> bs) { buf_.insert(buf_.end(), bs.begin(), bs.end()); }

void ByteWriter::u64s(std::span<const std::uint64_t> vs) {
  buf_.reserve(buf_.size() + 8 * vs.size());
  for (auto v : vs) u64(v);
}

ByteReader ByteReader::from_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kMissingFile, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed for " + path.string());
  return ByteReader(std::move(data), path.string());
}

ByteReader::ByteReader(std::vector<std::uint8_t> data, std::string origin)
    : data_(std::move(data)), origin_(std::move(origin)) {}

void ByteReader::require(std::uint64_t n, std::uint64_t elem_size) {
  if (elem_size != 0 && n > remaining() / elem_size) {
    throw Error(ErrorCode::kTruncated, origin_ + ": need " + std::to_string(n * elem_size) +
                                           " bytes at offset " + std::to_string(pos_) + ", have " +
                                           std::to_string(remaining()));
  }
}

void ByteReader::expect_magic(std::string_view tag) {
  if (remaining() < tag.size() ||
      std::string_view(reinterpret_cast<const char*>(data_.data() + pos_), tag.size()) != tag) {
    throw Error(ErrorCode::kBadMagic, origin_ + ": expected " + std::string(tag));
  }
  pos_ += tag.size();
}

void ByteReader::expect_version(std::uint32_t version) {
  const auto v = u32();
  if (v != version) {
    throw Error(ErrorCode::kBadVersion, origin_ + ": version " + std::to_string(v) +
                                            ", expected " + std::to_string(version));
  }
}

std::uint32_t ByteReader::u32() {
  require(1, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  require(1, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

std::vector<float> ByteReader::f32s(std::uint64_t count) {
  require(count, 4);
  std::vector<float> out(count);
  for (auto& v : out) v = std::bit_cast<float>(u32());
  return out;
}

std::vector<std::uint8_t> ByteReader::bytes(std::uint64_t count) {
  require(count, 1);
  std::vector<std::uint8_t> out(data_.begin() + pos_, data_.begin() + pos_ + count);
  pos_ += count;
  return out;
}

std::vector<std::uint64_t> ByteReader::u64s(std::uint64_t count) {
  require(count, 8);
  std::vector<std::uint64_t> out(count);
  for (auto& v : out) v = u64();
  return out;
}

void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "rename to " + path.string() + ": " + ec.message());
}

void write_atomic(const std::filesystem::path& path, std::string_view text) {
  write_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  auto reader = ByteReader::from_file(path);
  auto bytes = reader.bytes(reader.remaining());
  return std::string(bytes.begin(), bytes.end());
}

std::string sha256_file(const std::filesystem::path& path) {
  auto reader = ByteReader::from_file(path);
  const auto bytes = reader.bytes(reader.remaining());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error(ErrorCode::kIo, "sha256 failed for " + path.string());
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

}  // namespace io
}  // namespace dcgh
