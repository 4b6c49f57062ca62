#include "dcgh/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dcgh/rng.hpp"

namespace dcgh {

std::string to_string(LossFamily f) {
  switch (f) {
    case LossFamily::kProxy: return "proxy";
    case LossFamily::kPair: return "pair";
    case LossFamily::kVariance: return "variance";
    case LossFamily::kTotal: return "total";
  }
  return "?";
}

LossInstance random_instance(std::size_t n, std::size_t c, std::size_t k, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x9c4ec));
  Matrix<std::uint8_t> bits(n, c, 0);
  for (std::size_t i = 0; i < n; ++i) {
    bits(i, rng.below(c)) = 1;
    for (std::size_t j = 0; j < c; ++j) {
      if (rng.uniform() < 0.3) bits(i, j) = 1;
    }
  }
  LossInstance inst{BinaryLikeCodes(n, k), BinaryLikeCodes(n, k), Matrix<double>(c, k), LabelMatrix(std::move(bits)),
                    {}};
  for (auto& v : inst.hx.values()) v = rng.uniform(-0.95, 0.95);
  for (auto& v : inst.hy.values()) v = rng.uniform(-0.95, 0.95);
  for (auto& v : inst.proxies.values()) v = rng.normal();
  inst.sim = label_similarity(inst.labels);
  return inst;
}

double kink_margin(const LossInstance& inst) {
  double margin = INFINITY;
  for (const auto* h : {&inst.hx, &inst.hy}) {
    for (std::size_t i = 0; i < h->rows(); ++i) {
      for (std::size_t j = 0; j < inst.proxies.rows(); ++j) {
        if (!inst.labels.has(i, j)) margin = std::min(margin, std::abs(cosine(h->row(i), inst.proxies.row(j))));
      }
      for (std::size_t j = 0; j < h->rows(); ++j) {
        if (i == j) continue;
        const double c = cosine(h->row(i), h->row(j));
        const double s = inst.sim(i, j);
        margin = std::min(margin, std::abs(s > 0.0 ? s - c : c));
      }
    }
  }
  return margin;
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / scale;
}

namespace {

LossTerms terms_for(LossFamily f) {
  switch (f) {
    case LossFamily::kProxy: return {true, false, false};
    case LossFamily::kPair: return {false, true, false};
    case LossFamily::kVariance: return {false, false, true};
    case LossFamily::kTotal: return {true, true, true};
  }
  return {};
}

// Pairwise checked with unit weights so its gradient is not scaled down.
LossWeights weights_for(LossFamily f) { return f == LossFamily::kPair ? LossWeights{1.0, 1.0} : LossWeights{}; }

std::string coordinate_name(const LossInstance& inst, std::size_t flat) {
  const auto k = inst.hx.cols();
  const auto nx = inst.hx.size();
  const char* block = "codes_x";
  if (flat >= 2 * nx) {
    flat -= 2 * nx;
    block = "proxies";
  } else if (flat >= nx) {
    flat -= nx;
    block = "codes_y";
  }
  return std::string(block) + "[" + std::to_string(flat / k) + "," + std::to_string(flat % k) + "]";
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  if (options.instances == 0) throw Error(ErrorCode::kInvalidArgument, "gradcheck needs at least one instance");
  if (options.code_lengths.empty()) throw Error(ErrorCode::kInvalidArgument, "gradcheck needs code lengths");
  GradcheckReport report;
  for (auto f : {LossFamily::kProxy, LossFamily::kPair, LossFamily::kVariance, LossFamily::kTotal}) {
    report.families.push_back({f, 0.0, 0, {}, true});
  }
  Rng rng(derive_seed(options.seed, 0x96adc));
  for (std::size_t t = 0; t < options.instances; ++t) {
    const auto n = options.fixed_n.value_or(1 + rng.below(std::max<std::size_t>(options.max_n, 1)));
    const auto c = options.fixed_c.value_or(1 + rng.below(std::max<std::size_t>(options.max_c, 1)));
    const auto k = options.code_lengths[rng.below(options.code_lengths.size())];
    LossInstance inst = random_instance(n, c, k, rng.next_u64());
    for (int attempt = 0; attempt < 1000 && kink_margin(inst) < options.min_kink_margin; ++attempt) {
      inst = random_instance(n, c, k, rng.next_u64());
    }

    for (auto& fam : report.families) {
      const auto terms = terms_for(fam.family);
      const auto weights = weights_for(fam.family);
      const auto grad = loss_gradients(inst.hx, inst.hy, inst.proxies, inst.labels, inst.sim, weights, terms);
      std::vector<double> analytic;
      for (const auto* m : {&grad.d_codes_x, &grad.d_codes_y, &grad.d_proxies}) {
        analytic.insert(analytic.end(), m->values().begin(), m->values().end());
      }
      if (t == 0 && options.fault_coordinate && *options.fault_coordinate < analytic.size()) {
        analytic[*options.fault_coordinate] += options.fault_delta;
      }

      auto probe = inst;
      std::vector<std::span<double>> blocks{probe.hx.values(), probe.hy.values(), probe.proxies.values()};
      auto objective = [&] {
        return total_loss(probe.hx, probe.hy, probe.proxies, probe.labels, probe.sim, weights, terms).total;
      };
      std::size_t flat = 0;
      for (auto block : blocks) {
        for (auto& v : block) {
          const double saved = v;
          v = saved + options.step;
          const double up = objective();
          v = saved - options.step;
          const double down = objective();
          v = saved;
          const double numeric = (up - down) / (2.0 * options.step);
          const double err = relative_error(analytic[flat], numeric);
          if (err > fam.max_rel_error || std::isnan(err)) {
            fam.max_rel_error = std::isnan(err) ? INFINITY : err;
            fam.worst_instance = t;
            fam.worst_coordinate = coordinate_name(inst, flat);
          }
          ++flat;
        }
      }
    }
    ++report.instances;
  }
  for (auto& fam : report.families) {
    fam.pass = fam.max_rel_error < options.tolerance;
    report.pass = report.pass && fam.pass;
  }
  return report;
}

}  // namespace dcgh
