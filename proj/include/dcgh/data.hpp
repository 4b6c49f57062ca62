#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dcgh/matrix.hpp"

namespace dcgh {

// N x d modality features; all values finite.
using FeatureMatrix = Matrix<float>;

// N x C multi-hot annotations. Every row has at least one positive entry.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  // Validates entries in {0,1} and that no row is all zero.
  explicit LabelMatrix(Matrix<std::uint8_t> bits);

  std::size_t rows() const noexcept { return bits_.rows(); }
  std::size_t categories() const noexcept { return bits_.cols(); }
  bool has(std::size_t i, std::size_t c) const { return bits_(i, c) != 0; }
  std::span<const std::uint8_t> row(std::size_t i) const { return bits_.row(i); }
  const Matrix<std::uint8_t>& bits() const noexcept { return bits_; }

  // Number of categories shared by rows i of *this and j of other.
  std::size_t shared(std::size_t i, const LabelMatrix& other, std::size_t j) const;

  LabelMatrix select(std::span<const std::size_t> indices) const;

  friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;

 private:
  Matrix<std::uint8_t> bits_;
};

// Cosine similarity of label vectors; symmetric, unit diagonal, entries in [0,1].
using SimilarityMatrix = Matrix<double>;

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> query;
  std::vector<std::size_t> retrieval;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

struct SyntheticData {
  FeatureMatrix image;
  FeatureMatrix text;
  LabelMatrix labels;
};

// Feature / label files: little-endian, header then row-major payload.
FeatureMatrix load_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureMatrix& m);
LabelMatrix load_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelMatrix& labels);

// Split file: text lines "train: ...", "query: ...", "retrieval: ...".
DatasetSplit load_split(const std::filesystem::path& path);
void write_split(const std::filesystem::path& path, const DatasetSplit& split);

// Full similarity matrix, S_ij = <l_i/|l_i|, l_j/|l_j|>.
SimilarityMatrix label_similarity(const LabelMatrix& labels);
// Similarity block between two label sets (rows of `a` vs rows of `b`).
SimilarityMatrix label_similarity(const LabelMatrix& a, const LabelMatrix& b);

// Queries are drawn first from a seeded permutation; the remainder forms the
// retrieval set and the training set is the first n_train of it.
DatasetSplit make_split(std::size_t n, std::size_t n_query, std::size_t n_train, std::uint64_t seed);

struct SyntheticSpec {
  std::size_t n_per_class = 40;
  std::size_t classes = 3;
  std::size_t dim = 32;
  double multi_label_rate = 0.3;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
};

// Orthonormal class anchors; each sample is the mean of its classes' anchors
// plus independent Gaussian noise per modality.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// One group of samples sharing an identical label set.
struct LabelGroup {
  std::vector<std::size_t> classes;
  std::size_t count = 0;
};

// Same construction as generate_synthetic but with caller-chosen label sets,
// e.g. to make one category over-represented across several groups.
SyntheticData generate_grouped(std::span<const LabelGroup> groups, std::size_t classes,
                               std::size_t dim, double noise_sigma, std::uint64_t seed);

// Unit-norm, mutually orthogonal directions (Gram-Schmidt on Gaussian draws).
Matrix<double> make_anchors(std::size_t classes, std::size_t dim, std::uint64_t seed);

}  // namespace dcgh
