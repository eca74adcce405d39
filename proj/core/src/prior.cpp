#include "btmc/prior.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include "btmc/errors.hpp"

namespace btmc {

void PriorParams::validate() const {
  if (dim != 1 && dim != 2) throw ConfigError("prior dim must be 1 or 2");
  if (shape < 1.0 || !std::isfinite(shape)) throw ConfigError("prior shape p must be in [1, inf)");
  if (kappa <= 0.0) throw ConfigError("prior kappa must be positive");
  if (density < 0.0 || density > 1.0) throw ConfigError("prior density beta must be in [0, 1]");
  if (smoothness * shape <= dim) {
    throw ConfigError("prior requires s*p > d, got s*p = " +
                      std::to_string(smoothness * shape));
  }
}

double smoothness_exponent(const PriorParams& params) {
  return params.smoothness + params.dim / 2.0 - params.dim / params.shape;
}

double eta_weight(const PriorParams& params, int scale) {
  return std::exp2(-scale * smoothness_exponent(params));
}

long GWTree::node_count() const {
  long count = 0;
  for (const auto& level : levels_) count += static_cast<long>(level.size());
  return count;
}

bool GWTree::contains(int depth, std::uint64_t key) const {
  if (depth < 0 || depth > max_depth()) return false;
  const auto& level = levels_[depth];
  return std::binary_search(level.begin(), level.end(), key);
}

std::uint64_t GWTree::encode(int dim, int kx, int ky) {
  return dim == 1 ? static_cast<std::uint64_t>(kx)
                  : (static_cast<std::uint64_t>(ky) << 32) |
                        static_cast<std::uint64_t>(kx);
}

std::array<int, 2> GWTree::decode(int dim, std::uint64_t key) {
  if (dim == 1) return {static_cast<int>(key), 0};
  return {static_cast<int>(key & 0xffffffffULL), static_cast<int>(key >> 32)};
}

GWTree sample_tree(double beta, int dim, int max_depth, Rng& rng) {
  if (max_depth < 0) throw ConfigError("tree max_depth must be >= 0");
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must be in [0, 1]");
  GWTree tree(dim, max_depth);
  tree.nodes_at(0) = {GWTree::encode(dim, 0, 0)};

  std::bernoulli_distribution keep(beta);
  const int children = 1 << dim;
  for (int depth = 0; depth < max_depth; ++depth) {
    const auto& parents = tree.nodes_at(depth);
    auto& next = tree.nodes_at(depth + 1);
    for (const std::uint64_t parent : parents) {
      const auto [kx, ky] = GWTree::decode(dim, parent);
      for (int e = 0; e < children; ++e) {
        if (!keep(rng)) continue;
        next.push_back(GWTree::encode(dim, 2 * kx + (e & 1), 2 * ky + ((e >> 1) & 1)));
      }
    }
    std::sort(next.begin(), next.end());
  }
  return tree;
}

bool gw_survives(double beta, int dim, int depth, Rng& rng) {
  if (beta <= 0.0) return depth == 0;
  if (beta >= 1.0) return true;
  // population already this large dies out with negligible probability
  constexpr long long kSafe = 1LL << 20;
  long long population = 1;
  const int children = 1 << dim;
  for (int j = 0; j < depth; ++j) {
    if (population == 0) return false;
    if (population >= kSafe) return true;
    std::binomial_distribution<long long> offspring(population * children, beta);
    population = offspring(rng);
  }
  return population > 0;
}

double sample_p_exponential(double p, double kappa, Rng& rng) {
  if (p < 1.0 || !std::isfinite(p)) throw ConfigError("p must be in [1, inf)");
  if (kappa <= 0.0) throw ConfigError("kappa must be positive");
  std::gamma_distribution<double> gamma(1.0 / p, 1.0);
  const double g = gamma(rng);
  const double magnitude = std::pow(kappa * g, 1.0 / p);
  std::bernoulli_distribution coin(0.5);
  return coin(rng) ? magnitude : -magnitude;
}

long PriorSample::coefficient_count() const {
  long count = 0;
  for (const auto& level : coeffs) count += static_cast<long>(level.size());
  return count;
}

PriorSample draw_prior_sample(const PriorParams& params, int cap_depth, Rng& rng) {
  params.validate();
  if (cap_depth < 0) throw ConfigError("cap_depth must be >= 0");

  PriorSample sample;
  sample.params = params;
  sample.cap_depth = cap_depth;
  sample.tree = sample_tree(params.density, params.dim, cap_depth, rng);
  sample.coeffs.resize(cap_depth + 1);
  for (int j = 0; j <= cap_depth; ++j) {
    const std::size_t kinds = kinds_at_scale(params.dim, j).size();
    auto& level = sample.coeffs[j];
    level.resize(sample.tree.nodes_at(j).size() * kinds);
    for (double& value : level) value = sample_p_exponential(params.shape, params.kappa, rng);
  }
  return sample;
}

Field Field::zeros(int dim, int level) {
  Field field;
  field.dim = dim;
  field.level = level;
  const std::size_t period = std::size_t{1} << level;
  field.values.assign(dim == 1 ? period : period * period, 0.0);
  return field;
}

void add_scales(const PriorSample& sample, int scale_from, int scale_to,
                const WaveletFamily& family, Field& field) {
  if (field.dim != sample.params.dim) throw ConfigError("field/sample dimension mismatch");
  if (scale_to > sample.cap_depth) {
    throw ConfigError("truncation level " + std::to_string(scale_to) +
                      " exceeds the cap depth " + std::to_string(sample.cap_depth) +
                      " of this draw; a draw cannot be extended post hoc");
  }
  for (int j = std::max(0, scale_from); j <= scale_to; ++j) {
    const auto kinds = kinds_at_scale(sample.params.dim, j);
    const double eta = eta_weight(sample.params, j);
    const auto& nodes = sample.tree.nodes_at(j);
    const auto& level_coeffs = sample.coeffs[j];
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      const auto [kx, ky] = GWTree::decode(sample.params.dim, nodes[n]);
      for (std::size_t q = 0; q < kinds.size(); ++q) {
        const double coeff = eta * level_coeffs[n * kinds.size() + q];
        if (coeff == 0.0) continue;
        BasisIndex index;
        index.dim = sample.params.dim;
        index.scale = j;
        index.shift = {kx, ky};
        index.kind = kinds[q];
        accumulate_periodized(family, index, coeff, field.level, field.values);
      }
    }
  }
}

Field synthesize_field(const PriorSample& sample, int trunc,
                       const WaveletFamily& family, int grid_level) {
  Field field = Field::zeros(sample.params.dim, grid_level);
  add_scales(sample, 0, trunc, family, field);
  return field;
}

double discrete_l2_norm(const Field& field) {
  double sum = 0.0;
  for (const double v : field.values) sum += v * v;
  return std::sqrt(sum / static_cast<double>(field.values.size()));
}

namespace {
std::string shortest(double value) {
  char buffer[32];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}
}  // namespace

void write_field_csv(std::ostream& out, const Field& field, const FieldCsvHeader& header) {
  out << "# d=" << field.dim << " G=" << field.level << " N=" << header.trunc
      << " s=" << shortest(header.smoothness) << " p=" << shortest(header.shape)
      << " beta=" << shortest(header.density) << " kappa=" << shortest(header.kappa)
      << " seed=" << header.seed << "\n";
  const std::size_t period = std::size_t{1} << field.level;
  if (field.dim == 1) {
    for (const double v : field.values) out << shortest(v) << "\n";
  } else {
    for (std::size_t iy = 0; iy < period; ++iy) {
      for (std::size_t ix = 0; ix < period; ++ix) {
        out << shortest(field.values[iy * period + ix]) << (ix + 1 == period ? "\n" : ",");
      }
    }
  }
}

}  // namespace btmc
