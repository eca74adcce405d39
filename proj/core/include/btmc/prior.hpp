#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "btmc/rng.hpp"
#include "btmc/wavelet.hpp"

namespace btmc {

// Hyper-parameters of the random tree series prior.  smoothness * shape > dim
// is required so that realizations are continuous.
struct PriorParams {
  double smoothness = 1.6;   // s
  double shape = 5.0 / 3.0;  // p
  double density = 0.8;      // beta, survival probability of a child cube
  double kappa = 1.0;        // scale of the coefficient distribution
  int dim = 1;

  void validate() const;
};

// Exponent s + d/2 - d/p of the scale weights.
double smoothness_exponent(const PriorParams& params);

// Scale weight eta_j = 2^{-j(s + d/2 - d/p)}.
double eta_weight(const PriorParams& params, int scale);

// Random dyadic-cube tree: depth j holds the surviving cubes k in K_j,
// parent-closed by construction.  Nodes per depth are kept sorted by their
// encoded key.
class GWTree {
 public:
  GWTree(int dim, int max_depth) : dim_(dim), levels_(max_depth + 1) {}

  int dim() const { return dim_; }
  int max_depth() const { return static_cast<int>(levels_.size()) - 1; }
  const std::vector<std::uint64_t>& nodes_at(int depth) const { return levels_[depth]; }
  std::vector<std::uint64_t>& nodes_at(int depth) { return levels_[depth]; }
  long node_count() const;
  bool contains(int depth, std::uint64_t key) const;

  static std::uint64_t encode(int dim, int kx, int ky = 0);
  static std::array<int, 2> decode(int dim, std::uint64_t key);

 private:
  int dim_;
  std::vector<std::vector<std::uint64_t>> levels_;
};

// Grows a tree breadth-first: each node independently keeps each of its 2^d
// sub-cubes with probability beta; generation stops at max_depth.
GWTree sample_tree(double beta, int dim, int max_depth, Rng& rng);

// Survival of the branching process to the given depth, simulated through
// generation sizes only.  Distributionally identical to growing the tree and
// checking for nodes at max depth, but usable at depths where a surviving
// tree would not fit in memory.
bool gw_survives(double beta, int dim, int depth, Rng& rng);

// One draw of a p-exponential variable with density proportional to
// exp(-|x|^p / kappa): X = +-(kappa G)^{1/p} with G ~ Gamma(1/p, 1).
double sample_p_exponential(double p, double kappa, Rng& rng);

// One realization of the prior: a tree plus one coefficient per active
// (j, k, l) up to the cap depth.  The draw is immutable; every truncation
// level N <= cap_depth is served by the same realization, which is what
// couples multilevel differences.
struct PriorSample {
  PriorParams params;
  int cap_depth = 0;
  GWTree tree{1, 0};
  // coeffs[j] holds |L_j| values per node, in node order, kind fastest
  std::vector<std::vector<double>> coeffs;

  long coefficient_count() const;
};

PriorSample draw_prior_sample(const PriorParams& params, int cap_depth, Rng& rng);

// Grid values of a function on the torus, row major (x fastest), 2^{d*G}
// points at spacing 2^-G.
struct Field {
  int dim = 1;
  int level = 0;
  std::vector<double> values;

  static Field zeros(int dim, int level);
};

// Adds the scales j in [scale_from, scale_to] of the sample's series into the
// field.  Together with Field::zeros this gives both one-shot synthesis and
// the incremental refinement used when several truncation levels share one
// draw.
void add_scales(const PriorSample& sample, int scale_from, int scale_to,
                const WaveletFamily& family, Field& field);

// b_{T,N} on the dyadic grid of the given level.
Field synthesize_field(const PriorSample& sample, int trunc,
                       const WaveletFamily& family, int grid_level);

// Discrete L2 norm with quadrature weight 2^{-d*G}.
double discrete_l2_norm(const Field& field);

struct FieldCsvHeader {
  int trunc = 0;
  double smoothness = 0, shape = 0, density = 0, kappa = 0;
  std::uint64_t seed = 0;
};
void write_field_csv(std::ostream& out, const Field& field, const FieldCsvHeader& header);

}  // namespace btmc
