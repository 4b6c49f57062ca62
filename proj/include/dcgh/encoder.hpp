#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dcgh/data.hpp"
#include "dcgh/model.hpp"

namespace dcgh {

// +-1 codes packed into 64-bit words: bit t of a row is code entry t
// (1 <-> +1, 0 <-> -1). Padding bits past K are always zero.
class BinaryCodeMatrix {
 public:
  BinaryCodeMatrix() = default;
  BinaryCodeMatrix(std::size_t rows, std::size_t bits);
  // Validates the word count and that padding bits are clear.
  BinaryCodeMatrix(std::size_t rows, std::size_t bits, std::vector<std::uint64_t> words);

  static std::size_t words_for(std::size_t bits) noexcept { return (bits + 63) / 64; }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t bits() const noexcept { return bits_; }
  std::size_t words_per_row() const noexcept { return words_per_row_; }

  std::span<const std::uint64_t> row(std::size_t i) const {
    return {words_.data() + i * words_per_row_, words_per_row_};
  }
  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  // Entry as +1 / -1.
  int code(std::size_t i, std::size_t t) const {
    return (words_[i * words_per_row_ + t / 64] >> (t % 64)) & 1U ? 1 : -1;
  }
  void set(std::size_t i, std::size_t t, bool positive);

  BinaryCodeMatrix select(std::span<const std::size_t> indices) const;

  friend bool operator==(const BinaryCodeMatrix&, const BinaryCodeMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t bits_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

// Packs rows of +-1 entries; any other value is a domain error.
BinaryCodeMatrix pack_codes(const Matrix<std::int8_t>& signs);
Matrix<std::int8_t> unpack_codes(const BinaryCodeMatrix& codes);

// sign(x) with sign(0) = +1, then packed.
BinaryCodeMatrix sign_quantize(const BinaryLikeCodes& h);

// Eval-mode forward pass followed by sign quantization.
BinaryCodeMatrix encode_dataset(const HashHead& head, const FeatureMatrix& x);

// Codes plus the labels of the encoded rows, so evaluation needs nothing else.
struct CodeFile {
  BinaryCodeMatrix codes;
  LabelMatrix labels;

  friend bool operator==(const CodeFile&, const CodeFile&) = default;
};

void write_code_file(const std::filesystem::path& path, const CodeFile& file);
CodeFile load_code_file(const std::filesystem::path& path);

}  // namespace dcgh
