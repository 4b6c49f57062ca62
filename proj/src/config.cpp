#include "dcgh/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "dcgh/binary_io.hpp"

namespace dcgh {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kConfig, key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty()) {
    throw Error(ErrorCode::kConfig, key + ": expected a real number, got '" + value + "'");
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"classes", [](RunConfig& c, auto& k, auto& v) { c.synth.classes = parse_unsigned<std::size_t>(k, v); }},
      {"n_per_class", [](RunConfig& c, auto& k, auto& v) { c.synth.n_per_class = parse_unsigned<std::size_t>(k, v); }},
      {"dim", [](RunConfig& c, auto& k, auto& v) { c.synth.dim = parse_unsigned<std::size_t>(k, v); }},
      {"multi_label_rate", [](RunConfig& c, auto& k, auto& v) { c.synth.multi_label_rate = parse_real(k, v); }},
      {"noise_sigma", [](RunConfig& c, auto& k, auto& v) { c.synth.noise_sigma = parse_real(k, v); }},
      {"n_query", [](RunConfig& c, auto& k, auto& v) { c.n_query = parse_unsigned<std::size_t>(k, v); }},
      {"n_train", [](RunConfig& c, auto& k, auto& v) { c.n_train = parse_unsigned<std::size_t>(k, v); }},
      {"bits", [](RunConfig& c, auto& k, auto& v) { c.train.bits = parse_unsigned<std::size_t>(k, v); }},
      {"epochs", [](RunConfig& c, auto& k, auto& v) { c.train.epochs = parse_unsigned<std::size_t>(k, v); }},
      {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = parse_unsigned<std::size_t>(k, v); }},
      {"lr", [](RunConfig& c, auto& k, auto& v) { c.train.lr = parse_real(k, v); }},
      {"alpha", [](RunConfig& c, auto& k, auto& v) { c.train.alpha = parse_real(k, v); }},
      {"beta", [](RunConfig& c, auto& k, auto& v) { c.train.beta = parse_real(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.set_seed(parse_unsigned<std::uint64_t>(k, v)); }},
      {"variant", [](RunConfig& c, auto&, auto& v) { c.train.variant = parse_variant(v); }},
      {"adam_beta1", [](RunConfig& c, auto& k, auto& v) { c.train.adam.beta1 = parse_real(k, v); }},
      {"adam_beta2", [](RunConfig& c, auto& k, auto& v) { c.train.adam.beta2 = parse_real(k, v); }},
      {"adam_eps", [](RunConfig& c, auto& k, auto& v) { c.train.adam.eps = parse_real(k, v); }},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config(std::string_view text, RunConfig cfg) {
  std::istringstream in{std::string(text)};
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const auto key = trim(std::string_view(body).substr(0, eq));
    const auto value = trim(std::string_view(body).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    it->second(cfg, key, value);
  }
  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(io::read_text(path)); }

std::string format_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  auto real = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "classes = " << cfg.synth.classes << '\n'
      << "n_per_class = " << cfg.synth.n_per_class << '\n'
      << "dim = " << cfg.synth.dim << '\n'
      << "multi_label_rate = " << real(cfg.synth.multi_label_rate) << '\n'
      << "noise_sigma = " << real(cfg.synth.noise_sigma) << '\n'
      << "n_query = " << cfg.n_query << '\n'
      << "n_train = " << cfg.n_train << '\n'
      << "bits = " << cfg.train.bits << '\n'
      << "epochs = " << cfg.train.epochs << '\n'
      << "batch_size = " << cfg.train.batch_size << '\n'
      << "lr = " << real(cfg.train.lr) << '\n'
      << "alpha = " << real(cfg.train.alpha) << '\n'
      << "beta = " << real(cfg.train.beta) << '\n'
      << "seed = " << cfg.train.seed << '\n'
      << "variant = " << to_string(cfg.train.variant) << '\n'
      << "adam_beta1 = " << real(cfg.train.adam.beta1) << '\n'
      << "adam_beta2 = " << real(cfg.train.adam.beta2) << '\n'
      << "adam_eps = " << real(cfg.train.adam.eps) << '\n';
  return out.str();
}

}  // namespace dcgh
