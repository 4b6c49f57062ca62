#include <cmath>
#include <random>

#include "dcgh/gradcheck.hpp"
#include "dcgh/losses.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dcgh;

namespace {

using Vec = std::vector<double>;

LabelMatrix labels_of(std::size_t n, std::size_t c, std::vector<std::uint8_t> bits) {
  return LabelMatrix(Matrix<std::uint8_t>(n, c, std::move(bits)));
}

Matrix<double> rows_of(std::size_t n, std::size_t k, Vec v) { return Matrix<double>(n, k, std::move(v)); }

LossInstance instance_for(std::mt19937_64& rng) {
  const std::size_t n = 1 + rng() % 8;
  const std::size_t c = 1 + rng() % 5;
  const std::size_t k = 1 + rng() % 16;
  return random_instance(n, c, k, rng());
}

}  // namespace

TEST_CASE("cos_plus and cos_minus hand cases") {
  CHECK(cos_plus(Vec{1, 1, 1, 1}, Vec{1, 1, 1, 1}) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(cos_plus(Vec{1, 0}, Vec{0, 1}) == 0.0);
  CHECK(cos_plus(Vec{1, 1}, Vec{1, -1}) == 0.0);
  CHECK(cos_plus(Vec{2, 0}, Vec{1, 0}) == doctest::Approx(-1.0).epsilon(1e-12));

  CHECK(cos_minus(Vec{0.3, -2}, Vec{0.3, -2}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cos_minus(Vec{1, 2}, Vec{-1, -2}) == 0.0);
  CHECK(std::abs(cos_minus(Vec{1, 1}, Vec{1, 0}) - 0.70710678118654752) < 1e-11);

  // The guard makes zero vectors well defined.
  CHECK(cosine(Vec{0, 0}, Vec{1, 0}) == 0.0);
}

TEST_CASE("cosines are invariant to positive rescaling") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1), scale(0.1, 10.0);
  // The norm guard perturbs cosines by about eps/|v|^2, so keep |v| >= 1 to
  // stay well below the tolerance after shrinking by 0.1.
  auto draw = [&](std::size_t k) {
    Vec v(k);
    double nn = 0;
    while (nn < 1.0) {
      nn = 0;
      for (auto& x : v) {
        x = 2 * u(rng);
        nn += x * x;
      }
    }
    return v;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + rng() % 16;
    Vec h = draw(k), p = draw(k), h2(k), p2(k);
    const double a = scale(rng), b = scale(rng);
    for (std::size_t t = 0; t < k; ++t) {
      h2[t] = a * h[t];
      p2[t] = b * p[t];
    }
    CHECK(std::abs(cos_plus(h2, p) - cos_plus(h, p)) <= 1e-10);
    CHECK(std::abs(cos_plus(h, p2) - cos_plus(h, p)) <= 1e-10);
    CHECK(std::abs(cos_minus(h2, p2) - cos_minus(h, p)) <= 1e-10);
  }
}

TEST_CASE("proxy_loss hand cases") {
  // One sample labelled 0 sitting exactly on proxy 0, proxy 1 orthogonal.
  const auto p = rows_of(2, 2, {1, 0, 0, 1});
  const auto h = rows_of(1, 2, {1, 0});
  const auto l = labels_of(1, 2, {1, 0});
  CHECK(proxy_loss(h, h, p, l) == doctest::Approx(-2.0).epsilon(1e-12));

  const auto ortho = rows_of(1, 3, {0, 0, 1});
  const auto p3 = rows_of(2, 3, {1, 0, 0, 0, 1, 0});
  CHECK(proxy_loss(ortho, ortho, p3, labels_of(1, 2, {1, 0})) == 0.0);

  // No irrelevant pairs at all: that term is 0 rather than 0/0.
  const auto full = labels_of(1, 2, {1, 1});
  CHECK(std::isfinite(proxy_loss(h, h, p, full)));
  CHECK(proxy_loss(h, h, p, full) == doctest::Approx(-1.0).epsilon(1e-12));

  CHECK_ERROR_CODE(proxy_loss(h, rows_of(2, 2, {1, 0, 0, 1}), p, l), ErrorCode::kShapeMismatch);
}

TEST_CASE("pairwise_loss hand cases") {
  const auto same = rows_of(3, 2, {0.5, -0.2, 0.5, -0.2, 0.5, -0.2});
  const auto l = labels_of(3, 2, {1, 0, 1, 0, 1, 0});
  const auto pw = pairwise_loss(same, same, label_similarity(l), {});
  // Only the norm guard keeps the self-pairs off exactly zero.
  CHECK(pw.pos <= 1e-10);
  CHECK(pw.neg == 0.0);
  CHECK(pw.weighted <= 1e-10);

  const auto ortho = rows_of(2, 2, {1, 0, 0, 1});
  const auto l2 = labels_of(2, 2, {1, 0, 0, 1});
  CHECK(pairwise_loss(ortho, ortho, label_similarity(l2), {}).neg == 0.0);

  // Opposite codes for an irrelevant pair leave the hinge slack; aligned ones do not.
  const auto aligned = rows_of(2, 2, {1, 0, 1, 0});
  const auto r = pairwise_loss(aligned, aligned, label_similarity(l2), {1.0, 1.0});
  // Two off-diagonal irrelevant pairs at cos 1, both modalities, over 2 irrelevant pairs.
  CHECK(r.neg == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("variance_loss hand cases") {
  const auto p = rows_of(3, 2, {1, 0, 0, 1, -1, 0});
  const auto h = rows_of(2, 2, {0.3, 0.4, -0.1, 0.9});
  CHECK(variance_loss(h, h, p, labels_of(2, 3, {1, 0, 0, 0, 0, 1})) == 0.0);

  // Equal distances to both relevant proxies: h on the diagonal between p0 and p1.
  const auto diag = rows_of(1, 2, {0.6, 0.6});
  CHECK(variance_loss(diag, diag, p, labels_of(1, 3, {1, 1, 0})) <= 1e-15);

  // Distances -1 and 0: population variance 0.25 per modality.
  const auto on0 = rows_of(1, 2, {0.7, 0});
  CHECK(std::abs(variance_loss(on0, on0, p, labels_of(1, 3, {1, 1, 0})) - 0.5) <= 1e-10);
}

TEST_CASE("total_loss recomposition and weight annihilation") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = instance_for(rng);
    const LossWeights w{0.3, 1.7};
    const auto b = total_loss(inst.hx, inst.hy, inst.proxies, inst.labels, inst.sim, w);
    CHECK(std::abs(b.total - (b.proxy + b.pair_weighted + b.variance)) <= 1e-12);
    CHECK(std::abs(b.pair_weighted - (w.alpha * b.pair_pos + w.beta * b.pair_neg)) <= 1e-12);
    CHECK(std::abs(b.proxy - proxy_loss(inst.hx, inst.hy, inst.proxies, inst.labels)) <= 1e-12);
    CHECK(std::abs(b.variance - variance_loss(inst.hx, inst.hy, inst.proxies, inst.labels)) <= 1e-12);

    const auto zero = total_loss(inst.hx, inst.hy, inst.proxies, inst.labels, inst.sim, {0, 0});
    CHECK(std::abs(zero.total - (zero.proxy + zero.variance)) <= 1e-12);

    const auto eval = evaluate_loss(inst.hx, inst.hy, inst.proxies, inst.labels, inst.sim, w);
    CHECK(eval.loss.total == b.total);
  }
}

TEST_CASE("losses match brute-force oracles on random instances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = instance_for(rng);
    const auto pw = pairwise_loss(inst.hx, inst.hy, inst.sim, {});
    const auto ref = oracle::pairwise_loss(inst.hx, inst.hy, oracle::similarity(inst.labels));
    CHECK(std::abs(pw.pos - ref.pos) <= 1e-10);
    CHECK(std::abs(pw.neg - ref.neg) <= 1e-10);
    CHECK(std::abs(proxy_loss(inst.hx, inst.hy, inst.proxies, inst.labels) -
                   oracle::proxy_loss(inst.hx, inst.hy, inst.proxies, inst.labels)) <= 1e-10);
    CHECK(std::abs(variance_loss(inst.hx, inst.hy, inst.proxies, inst.labels) -
                   oracle::variance_loss(inst.hx, inst.hy, inst.proxies, inst.labels)) <= 1e-10);
    const auto b = total_loss(inst.hx, inst.hy, inst.proxies, inst.labels, inst.sim, {});
    CHECK(std::abs(b.total - oracle::total_loss(inst.hx, inst.hy, inst.proxies, inst.labels, 0.05, 0.8)) <= 1e-10);
  }
}

TEST_CASE("loss values stay within their ranges") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = instance_for(rng);
    const auto pw = pairwise_loss(inst.hx, inst.hy, inst.sim, {});
    // Summed over two modalities: each per-modality mean lies in [0,2] resp. [0,1].
    CHECK(pw.pos >= 0.0);
    CHECK(pw.pos <= 4.0);
    CHECK(pw.neg >= 0.0);
    CHECK(pw.neg <= 2.0);
    const double proxy = proxy_loss(inst.hx, inst.hy, inst.proxies, inst.labels);
    CHECK(proxy >= -2.0 - 1e-12);
    CHECK(proxy <= 4.0 + 1e-12);
    const double var = variance_loss(inst.hx, inst.hy, inst.proxies, inst.labels);
    CHECK(var >= 0.0);
    CHECK(var <= 2.0);
  }
}

TEST_CASE("variance_loss is exactly zero on single-label batches") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = instance_for(rng);
    Matrix<std::uint8_t> bits(inst.labels.rows(), inst.labels.categories(), 0);
    for (std::size_t i = 0; i < bits.rows(); ++i) bits(i, rng() % bits.cols()) = 1;
    CHECK(variance_loss(inst.hx, inst.hy, inst.proxies, LabelMatrix(bits)) == 0.0);
  }
}

TEST_CASE("analytic gradients match central differences away from kinks") {
  std::mt19937_64 rng(19);
  int checked = 0;
  while (checked < 25) {
    const auto inst = instance_for(rng);
    if (kink_margin(inst) < 1e-3) continue;
    ++checked;
    const LossWeights w{0.05, 0.8};
    const auto grad = loss_gradients(inst.hx, inst.hy, inst.proxies, inst.labels, inst.sim, w);
    auto probe = inst;
    auto f = [&] { return oracle::total_loss(probe.hx, probe.hy, probe.proxies, probe.labels, w.alpha, w.beta); };
    auto check_block = [&](Matrix<double>& m, const Matrix<double>& g) {
      for (std::size_t idx = 0; idx < m.size(); ++idx) {
        const double num = oracle::central_difference(m.values(), idx, 1e-5, f);
        CHECK(relative_error(g.values()[idx], num) < 1e-4);
      }
    };
    check_block(probe.hx, grad.d_codes_x);
    check_block(probe.hy, grad.d_codes_y);
    check_block(probe.proxies, grad.d_proxies);
  }
}

TEST_CASE("clamp regions produce exactly zero gradient") {
  // Irrelevant proxy with negative cosine, no pair terms: only the relevant proxy pulls.
  const auto p = rows_of(2, 2, {1, 0, -1, 0.2});
  const auto h = rows_of(1, 2, {0.8, 0.1});
  const auto l = labels_of(1, 2, {1, 0});
  const auto g = loss_gradients(h, h, p, l, label_similarity(l), {}, {true, false, false});
  CHECK(g.d_proxies(1, 0) == 0.0);
  CHECK(g.d_proxies(1, 1) == 0.0);

  // Irrelevant pair already apart: the push term contributes nothing.
  const auto apart = rows_of(2, 2, {1, 0.1, -1, 0.2});
  const auto l2 = labels_of(2, 2, {1, 0, 0, 1});
  const auto gp = loss_gradients(apart, apart, p, l2, label_similarity(l2), {0.0, 1.0}, {false, true, false});
  for (auto v : gp.d_codes_x.values()) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("doubling a code leaves losses unchanged and halves its gradient") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    auto inst = instance_for(rng);
    const auto base = evaluate_loss(inst.hx, inst.hy, inst.proxies, inst.labels, inst.sim, {});
    const std::size_t row = rng() % inst.hx.rows();
    for (auto& v : inst.hx.row(row)) v *= 2.0;
    const auto scaled = evaluate_loss(inst.hx, inst.hy, inst.proxies, inst.labels, inst.sim, {});
    CHECK(std::abs(scaled.loss.total - base.loss.total) <= 1e-10);
    for (std::size_t t = 0; t < inst.hx.cols(); ++t) {
      CHECK(std::abs(scaled.grad.d_codes_x(row, t) - 0.5 * base.grad.d_codes_x(row, t)) <= 1e-9);
    }
  }
}

TEST_CASE("shape mismatches are rejected") {
  const auto inst = random_instance(3, 2, 4, 1);
  CHECK_ERROR_CODE(evaluate_loss(inst.hx, inst.hy, Matrix<double>(2, 5), inst.labels, inst.sim, {}),
                   ErrorCode::kShapeMismatch);
  CHECK_ERROR_CODE(evaluate_loss(inst.hx, inst.hy, Matrix<double>(3, 4), inst.labels, inst.sim, {}),
                   ErrorCode::kShapeMismatch);
  CHECK_ERROR_CODE(evaluate_loss(inst.hx, inst.hy, inst.proxies, inst.labels, Matrix<double>(2, 2), {}),
                   ErrorCode::kShapeMismatch);
}
