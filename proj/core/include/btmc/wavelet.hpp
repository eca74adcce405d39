#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace btmc {

// Compactly supported Daubechies scaling/wavelet pair, tabulated exactly at
// dyadic points.  phi lives on [0, 2M-1], psi on [1-M, M]; both tables have
// step 2^-eval_level and include the endpoint slots (which are zero for every
// order except Haar's left endpoint).
//
// Tables are produced by the cascade algorithm: values at the integers come
// from the eigenvector of the refinement matrix, values at finer dyadic
// points from repeated application of the two-scale relation.  Dyadic
// tabulation is exact at dyadic arguments, so no interpolation happens when
// fields are synthesised on dyadic grids.
struct WaveletFamily {
  int order = 0;       // number of vanishing moments M
  int eval_level = 0;  // table resolution 2^-eval_level
  std::vector<double> filter;  // 2M low-pass coefficients, sum = sqrt(2)
  std::vector<double> phi;     // (2M-1)*2^eval_level + 1 slots
  std::vector<double> psi;     // same length, offset by 1-M

  int support_len() const { return 2 * order - 1; }
  int phi_lo() const { return 0; }
  int psi_lo() const { return 1 - order; }
};

// Index (j, k, l) of the periodized tensor basis on the torus.  kind is the
// per-dimension selector l in {0,1}^d: 0 picks the scaling factor, 1 the
// wavelet factor.  For scale j >= 1 the all-zero kind is excluded.
struct BasisIndex {
  int dim = 1;
  int scale = 0;                 // j >= 0
  std::array<int, 2> shift{};    // k, 0 <= k_i < 2^j
  std::array<int, 2> kind{};     // l in {0,1}^dim

  bool operator==(const BasisIndex&) const = default;
};

// Number of admissible kinds at scale j: 2^d at j=0, 2^d-1 otherwise.
std::vector<std::array<int, 2>> kinds_at_scale(int dim, int scale);

// Tabulates the family of the given order.  Throws ConfigError on bad
// parameters and NumericalError if the refinement residual of the cascade
// exceeds 1e-10.
WaveletFamily build_family(int order, int eval_level);

// Largest residual of the two-scale relation over all tabulated points.
double refinement_residual(const WaveletFamily& family);

void validate_index(const BasisIndex& index);

// Values of the periodized basis function psi^l_{j,k} at all 2^{d*G} dyadic
// torus points (row major, x fastest).  Requires G <= j + eval_level so that
// the table resolves the arguments exactly.
std::vector<double> eval_periodized(const WaveletFamily& family,
                                    const BasisIndex& index, int grid_level);

// Adds coeff * psi^l_{j,k} into an existing grid of values, touching only
// the support of the function.  field must hold 2^{d*G} values.
void accumulate_periodized(const WaveletFamily& family, const BasisIndex& index,
                           double coeff, int grid_level,
                           std::span<double> field);

// Besov norm of a finite coefficient sequence:
//   ( sum_i 2^{j_i p (s + d/2 - d/p)} |c_i|^p )^{1/p},  p in [1, inf).
double besov_norm(std::span<const std::pair<BasisIndex, double>> coeffs,
                  double smoothness, double integrability);

}  // namespace btmc
