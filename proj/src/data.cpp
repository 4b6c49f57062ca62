#include "dcgh/data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dcgh/binary_io.hpp"
#include "dcgh/rng.hpp"

namespace dcgh {
namespace {

constexpr std::string_view kFeatureMagic = "DCGHFEAT";
constexpr std::string_view kLabelMagic = "DCGHLABL";
constexpr std::uint32_t kFormatVersion = 1;

void write_label_payload(io::ByteWriter& w, const LabelMatrix& labels) {
  w.magic(kLabelMagic);
  w.u32(kFormatVersion);
  w.u64(labels.rows());
  w.u64(labels.categories());
  w.bytes(labels.bits().values());
}

}  // namespace

LabelMatrix::LabelMatrix(Matrix<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (std::size_t i = 0; i < bits_.rows(); ++i) {
    bool any = false;
    for (std::size_t c = 0; c < bits_.cols(); ++c) {
      const auto v = bits_(i, c);
      if (v > 1) {
        throw Error(ErrorCode::kDomain, "label entry " + std::to_string(v) + " at row " +
                                            std::to_string(i) + ", column " + std::to_string(c));
      }
      any = any || v == 1;
    }
    if (!any) throw Error(ErrorCode::kZeroLabelRow, "row " + std::to_string(i));
  }
}

std::size_t LabelMatrix::shared(std::size_t i, const LabelMatrix& other, std::size_t j) const {
  const auto a = row(i);
  const auto b = other.row(j);
  std::size_t n = 0;
  for (std::size_t c = 0; c < a.size(); ++c) n += a[c] & b[c];
  return n;
}

LabelMatrix LabelMatrix::select(std::span<const std::size_t> indices) const {
  return LabelMatrix(gather_rows(bits_, indices));
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_magic(kFeatureMagic);
  r.expect_version(kFormatVersion);
  const auto n = r.u64();
  const auto d = r.u64();
  if (n == 0 || d == 0) {
    throw Error(ErrorCode::kDomain, path.string() + ": empty feature matrix header");
  }
  if (d > 0 && n > UINT64_MAX / d) throw Error(ErrorCode::kTruncated, path.string() + ": header overflow");
  auto values = r.f32s(n * d);
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) {
      throw Error(ErrorCode::kNonFinite, path.string() + ": row " + std::to_string(k / d) +
                                             ", column " + std::to_string(k % d));
    }
  }
  return FeatureMatrix(n, d, std::move(values));
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& m) {
  io::ByteWriter w;
  w.magic(kFeatureMagic);
  w.u32(kFormatVersion);
  w.u64(m.rows());
  w.u64(m.cols());
  w.f32s(m.values());
  io::write_atomic(path, w.buffer());
}

LabelMatrix load_labels(const std::filesystem::path& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_magic(kLabelMagic);
  r.expect_version(kFormatVersion);
  const auto n = r.u64();
  const auto c = r.u64();
  if (c > 0 && n > UINT64_MAX / c) throw Error(ErrorCode::kTruncated, path.string() + ": header overflow");
  auto bytes = r.bytes(n * c);
  return LabelMatrix(Matrix<std::uint8_t>(n, c, std::move(bytes)));
}

void write_labels(const std::filesystem::path& path, const LabelMatrix& labels) {
  io::ByteWriter w;
  write_label_payload(w, labels);
  io::write_atomic(path, w.buffer());
}

DatasetSplit load_split(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  DatasetSplit split;
  bool seen[3] = {false, false, false};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kDomain, path.string() + ": bad line '" + line + "'");
    const auto key = line.substr(0, colon);
    std::vector<std::size_t>* target = nullptr;
    int slot = 0;
    if (key == "train") {
      target = &split.train;
      slot = 0;
    } else if (key == "query") {
      target = &split.query;
      slot = 1;
    } else if (key == "retrieval") {
      target = &split.retrieval;
      slot = 2;
    } else {
      throw Error(ErrorCode::kDomain, path.string() + ": unknown list '" + key + "'");
    }
    if (seen[slot]) throw Error(ErrorCode::kDomain, path.string() + ": duplicate list '" + key + "'");
    seen[slot] = true;
    std::istringstream nums(line.substr(colon + 1));
    std::string tok;
    while (nums >> tok) {
      std::size_t used = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || tok.front() == '-') {
        throw Error(ErrorCode::kDomain, path.string() + ": bad index '" + tok + "'");
      }
      target->push_back(static_cast<std::size_t>(v));
    }
  }
  if (!(seen[0] && seen[1] && seen[2])) {
    throw Error(ErrorCode::kDomain, path.string() + ": split needs train, query and retrieval lines");
  }
  return split;
}

void write_split(const std::filesystem::path& path, const DatasetSplit& split) {
  std::ostringstream out;
  auto emit = [&](const char* key, const std::vector<std::size_t>& idx) {
    out << key << ':';
    for (auto i : idx) out << ' ' << i;
    out << '\n';
  };
  emit("train", split.train);
  emit("query", split.query);
  emit("retrieval", split.retrieval);
  io::write_atomic(path, out.str());
}

SimilarityMatrix label_similarity(const LabelMatrix& labels) { return label_similarity(labels, labels); }

SimilarityMatrix label_similarity(const LabelMatrix& a, const LabelMatrix& b) {
  if (a.categories() != b.categories()) {
    throw Error(ErrorCode::kShapeMismatch, "label sets disagree on category count");
  }
  auto norms = [](const LabelMatrix& m) {
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      std::size_t count = 0;
      for (auto v : m.row(i)) count += v;
      if (count == 0) throw Error(ErrorCode::kZeroLabelRow, "row " + std::to_string(i));
      out[i] = std::sqrt(static_cast<double>(count));
    }
    return out;
  };
  const auto na = norms(a);
  const auto nb = norms(b);
  const bool same = &a == &b;
  SimilarityMatrix s(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      if (same && j < i) {
        s(i, j) = s(j, i);
        continue;
      }
      // Multi-hot rows: the dot product is the shared count. sqrt rounding can
      // push identical rows a hair above 1, hence the clamp.
      const auto shared = static_cast<double>(a.shared(i, b, j));
      s(i, j) = (same && i == j) ? 1.0 : std::min(1.0, shared / (na[i] * nb[j]));
    }
  }
  return s;
}

DatasetSplit make_split(std::size_t n, std::size_t n_query, std::size_t n_train, std::uint64_t seed) {
  if (n_query + 1 > n) {
    throw Error(ErrorCode::kInvalidArgument, "n_query=" + std::to_string(n_query) +
                                                 " leaves no retrieval items out of " + std::to_string(n));
  }
  if (n_train > n - n_query) {
    throw Error(ErrorCode::kInvalidArgument, "n_train=" + std::to_string(n_train) + " exceeds retrieval size " +
                                                 std::to_string(n - n_query));
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(derive_seed(seed, 0x5e1175));
  rng.shuffle(std::span(perm));

  DatasetSplit split;
  split.query.assign(perm.begin(), perm.begin() + n_query);
  split.retrieval.assign(perm.begin() + n_query, perm.end());
  split.train.assign(split.retrieval.begin(), split.retrieval.begin() + n_train);
  std::sort(split.query.begin(), split.query.end());
  std::sort(split.retrieval.begin(), split.retrieval.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

Matrix<double> make_anchors(std::size_t classes, std::size_t dim, std::uint64_t seed) {
  if (dim < classes) {
    throw Error(ErrorCode::kInvalidArgument, "anchor dim " + std::to_string(dim) + " < classes " +
                                                 std::to_string(classes));
  }
  Rng rng(derive_seed(seed, 0xa4c40));
  Matrix<double> anchors(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    auto v = anchors.row(c);
    double norm = 0.0;
    // Redraw on (vanishingly unlikely) numerical collapse.
    while (norm < 1e-6) {
      for (auto& x : v) x = rng.normal();
      for (std::size_t prev = 0; prev < c; ++prev) {
        // Two passes of modified Gram-Schmidt for numerical orthogonality.
        for (int pass = 0; pass < 2; ++pass) {
          const auto u = anchors.row(prev);
          double dot = 0.0;
          for (std::size_t k = 0; k < dim; ++k) dot += v[k] * u[k];
          for (std::size_t k = 0; k < dim; ++k) v[k] -= dot * u[k];
        }
      }
      norm = 0.0;
      for (auto x : v) norm += x * x;
      norm = std::sqrt(norm);
    }
    for (auto& x : v) x /= norm;
  }
  return anchors;
}

namespace {

SyntheticData render(const std::vector<std::vector<std::size_t>>& sample_classes, std::size_t classes,
                     std::size_t dim, double noise_sigma, std::uint64_t seed) {
  if (classes < 2) throw Error(ErrorCode::kInvalidArgument, "synthetic data needs at least 2 classes");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorCode::kInvalidArgument, "noise_sigma must be finite and >= 0");
  }
  const auto anchors = make_anchors(classes, dim, seed);
  const std::size_t n = sample_classes.size();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "synthetic data needs at least one sample");

  Matrix<std::uint8_t> bits(n, classes, 0);
  std::vector<double> centers(n * dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cs = sample_classes[i];
    for (auto c : cs) {
      if (c >= classes) throw Error(ErrorCode::kInvalidArgument, "class index out of range");
      bits(i, c) = 1;
      for (std::size_t k = 0; k < dim; ++k) centers[i * dim + k] += anchors(c, k);
    }
    for (std::size_t k = 0; k < dim; ++k) centers[i * dim + k] /= static_cast<double>(cs.size());
  }

  auto modality = [&](std::uint64_t stream) {
    Rng rng(derive_seed(seed, 0x40153, stream));
    FeatureMatrix out(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < dim; ++k) {
        const double noise = noise_sigma > 0.0 ? noise_sigma * rng.normal() : 0.0;
        out(i, k) = static_cast<float>(centers[i * dim + k] + noise);
      }
    }
    return out;
  };

  return SyntheticData{modality(0), modality(1), LabelMatrix(std::move(bits))};
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (!(spec.multi_label_rate >= 0.0 && spec.multi_label_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "multi_label_rate must lie in [0,1]");
  }
  if (spec.classes < 2) throw Error(ErrorCode::kInvalidArgument, "synthetic data needs at least 2 classes");
  if (spec.dim < spec.classes) {
    throw Error(ErrorCode::kInvalidArgument, "dim must be >= classes");
  }
  if (spec.n_per_class == 0) throw Error(ErrorCode::kInvalidArgument, "n_per_class must be >= 1");

  const std::size_t n = spec.n_per_class * spec.classes;
  std::vector<std::vector<std::size_t>> sample_classes(n);
  for (std::size_t i = 0; i < n; ++i) sample_classes[i] = {i / spec.n_per_class};

  // Exactly round(rate * n) samples receive a second, distinct label.
  const auto n_multi = static_cast<std::size_t>(std::llround(spec.multi_label_rate * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(spec.seed, 0x3a11));
  rng.shuffle(std::span(order));
  for (std::size_t m = 0; m < n_multi; ++m) {
    auto& cs = sample_classes[order[m]];
    auto extra = rng.below(spec.classes - 1);
    if (extra >= cs.front()) ++extra;
    cs.push_back(extra);
  }
  return render(sample_classes, spec.classes, spec.dim, spec.noise_sigma, spec.seed);
}

SyntheticData generate_grouped(std::span<const LabelGroup> groups, std::size_t classes, std::size_t dim,
                               double noise_sigma, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> sample_classes;
  for (const auto& g : groups) {
    if (g.classes.empty()) throw Error(ErrorCode::kInvalidArgument, "label group without classes");
    for (std::size_t k = 0; k < g.count; ++k) sample_classes.push_back(g.classes);
  }
  return render(sample_classes, classes, dim, noise_sigma, seed);
}

}  // namespace dcgh
