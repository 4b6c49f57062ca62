#include "dcgh/encoder.hpp"

#include <cmath>

#include "dcgh/binary_io.hpp"

namespace dcgh {
namespace {

constexpr std::string_view kCodeMagic = "DCGHCODE";
constexpr std::string_view kLabelMagic = "DCGHLABL";
constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t padding_mask(std::size_t bits) {
  const auto used = bits % 64;
  return used == 0 ? 0 : ~((std::uint64_t{1} << used) - 1);
}

}  // namespace

BinaryCodeMatrix::BinaryCodeMatrix(std::size_t rows, std::size_t bits)
    : rows_(rows), bits_(bits), words_per_row_(words_for(bits)), words_(rows * words_per_row_, 0) {
  if (bits == 0) throw Error(ErrorCode::kInvalidArgument, "code length must be >= 1");
}

BinaryCodeMatrix::BinaryCodeMatrix(std::size_t rows, std::size_t bits, std::vector<std::uint64_t> words)
    : rows_(rows), bits_(bits), words_per_row_(words_for(bits)), words_(std::move(words)) {
  if (bits == 0) throw Error(ErrorCode::kInvalidArgument, "code length must be >= 1");
  if (words_.size() != rows_ * words_per_row_) {
    throw Error(ErrorCode::kShapeMismatch, "packed code payload has wrong word count");
  }
  const auto mask = padding_mask(bits_);
  for (std::size_t i = 0; i < rows_ && mask != 0; ++i) {
    if (words_[(i + 1) * words_per_row_ - 1] & mask) {
      throw Error(ErrorCode::kDomain, "padding bits set in code row " + std::to_string(i));
    }
  }
}

void BinaryCodeMatrix::set(std::size_t i, std::size_t t, bool positive) {
  auto& w = words_[i * words_per_row_ + t / 64];
  const auto bit = std::uint64_t{1} << (t % 64);
  w = positive ? (w | bit) : (w & ~bit);
}

BinaryCodeMatrix BinaryCodeMatrix::select(std::span<const std::size_t> indices) const {
  BinaryCodeMatrix out(indices.size(), bits_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows_) throw Error(ErrorCode::kInvalidArgument, "code row index out of range");
    const auto src = row(indices[r]);
    std::copy(src.begin(), src.end(), out.words_.begin() + r * words_per_row_);
  }
  return out;
}

BinaryCodeMatrix pack_codes(const Matrix<std::int8_t>& signs) {
  BinaryCodeMatrix out(signs.rows(), signs.cols());
  for (std::size_t i = 0; i < signs.rows(); ++i) {
    for (std::size_t t = 0; t < signs.cols(); ++t) {
      const auto v = signs(i, t);
      if (v != 1 && v != -1) throw Error(ErrorCode::kDomain, "code entries must be +1 or -1");
      out.set(i, t, v == 1);
    }
  }
  return out;
}

Matrix<std::int8_t> unpack_codes(const BinaryCodeMatrix& codes) {
  Matrix<std::int8_t> out(codes.rows(), codes.bits());
  for (std::size_t i = 0; i < codes.rows(); ++i) {
    for (std::size_t t = 0; t < codes.bits(); ++t) out(i, t) = static_cast<std::int8_t>(codes.code(i, t));
  }
  return out;
}

BinaryCodeMatrix sign_quantize(const BinaryLikeCodes& h) {
  BinaryCodeMatrix out(h.rows(), h.cols());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t t = 0; t < h.cols(); ++t) {
      const double v = h(i, t);
      if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "code entry at row " + std::to_string(i));
      out.set(i, t, v >= 0.0);
    }
  }
  return out;
}

BinaryCodeMatrix encode_dataset(const HashHead& head, const FeatureMatrix& x) {
  return sign_quantize(forward(head, x));
}

void write_code_file(const std::filesystem::path& path, const CodeFile& file) {
  if (file.codes.rows() != file.labels.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "code and label row counts differ");
  }
  io::ByteWriter w;
  w.magic(kCodeMagic);
  w.u32(kFormatVersion);
  w.u64(file.codes.rows());
  w.u64(file.codes.bits());
  w.u64s(file.codes.words());
  w.magic(kLabelMagic);
  w.u32(kFormatVersion);
  w.u64(file.labels.rows());
  w.u64(file.labels.categories());
  w.bytes(file.labels.bits().values());
  io::write_atomic(path, w.buffer());
}

CodeFile load_code_file(const std::filesystem::path& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_magic(kCodeMagic);
  r.expect_version(kFormatVersion);
  const auto rows = r.u64();
  const auto bits = r.u64();
  if (bits == 0) throw Error(ErrorCode::kDomain, path.string() + ": zero code length");
  const auto wpr = BinaryCodeMatrix::words_for(bits);
  if (rows > UINT64_MAX / wpr) throw Error(ErrorCode::kTruncated, path.string() + ": header overflow");
  BinaryCodeMatrix codes(rows, bits, r.u64s(rows * wpr));
  r.expect_magic(kLabelMagic);
  r.expect_version(kFormatVersion);
  const auto n = r.u64();
  const auto c = r.u64();
  if (n != rows) throw Error(ErrorCode::kShapeMismatch, path.string() + ": label rows differ from code rows");
  if (c > 0 && n > UINT64_MAX / c) throw Error(ErrorCode::kTruncated, path.string() + ": header overflow");
  LabelMatrix labels(Matrix<std::uint8_t>(n, c, r.bytes(n * c)));
  return {std::move(codes), std::move(labels)};
}

}  // namespace dcgh
