#include <cmath>
#include <cstring>
#include <set>

#include "dcgh/binary_io.hpp"
#include "dcgh/data.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dcgh;

namespace {

std::string feature_bytes(std::uint64_t n, std::uint64_t d, const std::vector<float>& payload) {
  io::ByteWriter w;
  w.magic("DCGHFEAT");
  w.u32(1);
  w.u64(n);
  w.u64(d);
  w.f32s(payload);
  return {w.buffer().begin(), w.buffer().end()};
}

std::string label_bytes(std::uint64_t n, std::uint64_t c, const std::vector<std::uint8_t>& payload) {
  io::ByteWriter w;
  w.magic("DCGHLABL");
  w.u32(1);
  w.u64(n);
  w.u64(c);
  w.bytes(payload);
  return {w.buffer().begin(), w.buffer().end()};
}

LabelMatrix labels_of(std::size_t n, std::size_t c, std::vector<std::uint8_t> bits) {
  return LabelMatrix(Matrix<std::uint8_t>(n, c, std::move(bits)));
}

}  // namespace

TEST_CASE("load_features decodes the header and payload") {
  const auto dir = scratch_dir("features");
  spill(dir / "a.feat", feature_bytes(2, 3, {1, 0, 0, 0, 1, 0}));
  const auto m = load_features(dir / "a.feat");
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.storage() == std::vector<float>{1, 0, 0, 0, 1, 0});
}

TEST_CASE("feature files round-trip bit-exactly") {
  const auto dir = scratch_dir("features_rt");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-1e3f, 1e3f);
  FeatureMatrix m(7, 5);
  for (auto& v : m.values()) v = u(rng);
  m(0, 0) = -0.0f;
  m(1, 1) = std::numeric_limits<float>::denorm_min();
  write_features(dir / "m.feat", m);
  const auto back = load_features(dir / "m.feat");
  REQUIRE(back.rows() == m.rows());
  CHECK(std::memcmp(back.values().data(), m.values().data(), m.size() * sizeof(float)) == 0);
}

TEST_CASE("load_features reports each failure distinctly") {
  const auto dir = scratch_dir("features_err");
  CHECK_ERROR_CODE(load_features(dir / "nope.feat"), ErrorCode::kMissingFile);

  spill(dir / "short.feat", feature_bytes(5, 2, {1, 2, 3, 4, 5, 6, 7, 8}));  // 4 rows for N=5
  CHECK_ERROR_CODE(load_features(dir / "short.feat"), ErrorCode::kTruncated);

  auto bad = feature_bytes(1, 1, {1});
  bad[0] = 'X';
  spill(dir / "magic.feat", bad);
  CHECK_ERROR_CODE(load_features(dir / "magic.feat"), ErrorCode::kBadMagic);

  spill(dir / "nan.feat", feature_bytes(1, 2, {1.0f, std::nanf("")}));
  CHECK_ERROR_CODE(load_features(dir / "nan.feat"), ErrorCode::kNonFinite);

  spill(dir / "inf.feat", feature_bytes(1, 1, {INFINITY}));
  CHECK_ERROR_CODE(load_features(dir / "inf.feat"), ErrorCode::kNonFinite);
}

TEST_CASE("load_labels validates entries and rows") {
  const auto dir = scratch_dir("labels");
  spill(dir / "ok.lbl", label_bytes(2, 2, {1, 0, 0, 1}));
  const auto l = load_labels(dir / "ok.lbl");
  CHECK(l.rows() == 2);
  CHECK(l.has(0, 0));
  CHECK(l.has(1, 1));
  CHECK_FALSE(l.has(0, 1));

  spill(dir / "zero.lbl", label_bytes(2, 2, {0, 0, 1, 0}));
  try {
    (void)load_labels(dir / "zero.lbl");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroLabelRow);
    CHECK(std::string(e.what()).find("row 0") != std::string::npos);
  }

  spill(dir / "two.lbl", label_bytes(1, 2, {2, 0}));
  CHECK_ERROR_CODE(load_labels(dir / "two.lbl"), ErrorCode::kDomain);

  spill(dir / "short.lbl", label_bytes(3, 2, {1, 0, 0, 1}));
  CHECK_ERROR_CODE(load_labels(dir / "short.lbl"), ErrorCode::kTruncated);

  const auto written = labels_of(3, 4, {1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 1, 1});
  write_labels(dir / "rt.lbl", written);
  CHECK(load_labels(dir / "rt.lbl") == written);
}

TEST_CASE("label_similarity hand cases") {
  const auto same = labels_of(2, 3, {1, 0, 1, 1, 0, 1});
  CHECK(label_similarity(same)(0, 1) == doctest::Approx(1.0).epsilon(1e-15));

  const auto disjoint = labels_of(2, 3, {1, 0, 0, 0, 1, 0});
  CHECK(label_similarity(disjoint)(0, 1) == 0.0);

  const auto partial = labels_of(2, 3, {1, 1, 0, 1, 0, 0});
  CHECK(std::abs(label_similarity(partial)(0, 1) - 0.70710678118654752) < 1e-15);
}

TEST_CASE("label_similarity matches a brute-force double loop on random labels") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng() % 64;
    const std::size_t c = 1 + rng() % 8;
    Matrix<std::uint8_t> bits(n, c, 0);
    for (std::size_t i = 0; i < n; ++i) {
      bits(i, rng() % c) = 1;
      for (std::size_t j = 0; j < c; ++j)
        if (rng() % 3 == 0) bits(i, j) = 1;
    }
    const LabelMatrix l(bits);
    const auto s = label_similarity(l);
    const auto ref = oracle::similarity(l);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(s(i, i) == 1.0);
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(std::abs(s(i, j) - ref(i, j)) <= 1e-12);
        CHECK(s(i, j) == s(j, i));
        CHECK(s(i, j) >= 0.0);
        CHECK(s(i, j) <= 1.0);
        CHECK((s(i, j) == 0.0) == (l.shared(i, l, j) == 0));
      }
    }
  }
}

TEST_CASE("make_split is deterministic and disjoint") {
  const auto a = make_split(10, 2, 3, 7);
  const auto b = make_split(10, 2, 3, 7);
  CHECK(a == b);
  CHECK(a.query.size() == 2);
  CHECK(a.retrieval.size() == 8);
  CHECK(a.train.size() == 3);
  std::set<std::size_t> q(a.query.begin(), a.query.end());
  std::set<std::size_t> r(a.retrieval.begin(), a.retrieval.end());
  for (auto i : q) CHECK(r.count(i) == 0);
  for (auto i : a.train) CHECK(r.count(i) == 1);
  CHECK(q.size() + r.size() == 10);
  CHECK(make_split(10, 2, 3, 8) != a);

  CHECK_ERROR_CODE(make_split(5, 6, 0, 1), ErrorCode::kInvalidArgument);
  CHECK_ERROR_CODE(make_split(5, 5, 0, 1), ErrorCode::kInvalidArgument);
  CHECK_ERROR_CODE(make_split(10, 2, 9, 1), ErrorCode::kInvalidArgument);
}

TEST_CASE("split files round-trip and reject malformed input") {
  const auto dir = scratch_dir("split");
  const auto s = make_split(40, 8, 20, 3);
  write_split(dir / "split.txt", s);
  CHECK(load_split(dir / "split.txt") == s);
  CHECK(slurp(dir / "split.txt").rfind("train:", 0) == 0);

  spill(dir / "bad.txt", "train: 1 2\nquery: x\nretrieval: 3\n");
  CHECK_ERROR_CODE(load_split(dir / "bad.txt"), ErrorCode::kDomain);
  spill(dir / "missing.txt", "train: 1 2\nquery: 0\n");
  CHECK_ERROR_CODE(load_split(dir / "missing.txt"), ErrorCode::kDomain);
}

TEST_CASE("generate_synthetic construction") {
  SyntheticSpec spec;
  spec.n_per_class = 10;
  spec.classes = 3;
  spec.dim = 8;
  spec.multi_label_rate = 0.0;
  spec.seed = 5;
  const auto single = generate_synthetic(spec);
  CHECK(single.labels.rows() == 30);
  CHECK(single.image.rows() == 30);
  CHECK(single.text.cols() == 8);
  for (std::size_t i = 0; i < 30; ++i) {
    std::size_t sum = 0;
    for (auto v : single.labels.row(i)) sum += v;
    CHECK(sum == 1);
  }

  spec.multi_label_rate = 0.5;
  const auto multi = generate_synthetic(spec);
  std::size_t doubles = 0;
  for (std::size_t i = 0; i < 30; ++i) {
    std::size_t sum = 0;
    for (auto v : multi.labels.row(i)) sum += v;
    CHECK((sum == 1 || sum == 2));
    doubles += sum == 2;
  }
  CHECK(doubles == 15);

  spec.multi_label_rate = 0.0;
  spec.noise_sigma = 0.0;
  const auto clean = generate_synthetic(spec);
  for (std::size_t i = 1; i < 10; ++i) {
    CHECK(clean.image.row(i)[0] == clean.image.row(0)[0]);
    CHECK(std::equal(clean.image.row(i).begin(), clean.image.row(i).end(), clean.image.row(0).begin()));
    CHECK(std::equal(clean.text.row(i).begin(), clean.text.row(i).end(), clean.image.row(0).begin()));
  }

  spec.noise_sigma = 0.1;
  CHECK(generate_synthetic(spec).image == generate_synthetic(spec).image);
  CHECK_FALSE(generate_synthetic(spec).image == generate_synthetic(spec).text);
}

TEST_CASE("generate_synthetic rejects invalid parameters") {
  SyntheticSpec spec;
  spec.multi_label_rate = 1.5;
  CHECK_ERROR_CODE(generate_synthetic(spec), ErrorCode::kInvalidArgument);
  spec.multi_label_rate = -0.1;
  CHECK_ERROR_CODE(generate_synthetic(spec), ErrorCode::kInvalidArgument);
  spec = {};
  spec.dim = 2;
  spec.classes = 3;
  CHECK_ERROR_CODE(generate_synthetic(spec), ErrorCode::kInvalidArgument);
  spec = {};
  spec.classes = 1;
  CHECK_ERROR_CODE(generate_synthetic(spec), ErrorCode::kInvalidArgument);
}

TEST_CASE("anchors are unit norm with pairwise dot <= 0.1") {
  const auto a = make_anchors(6, 16, 9);
  for (std::size_t i = 0; i < 6; ++i) {
    double nn = 0;
    for (auto v : a.row(i)) nn += v * v;
    CHECK(std::abs(nn - 1.0) < 1e-12);
    for (std::size_t j = i + 1; j < 6; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < 16; ++k) dot += a(i, k) * a(j, k);
      CHECK(std::abs(dot) <= 0.1);
      CHECK(std::abs(dot) < 1e-12);
    }
  }
}
