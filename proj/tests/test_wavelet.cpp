#include <doctest.h>

#include <cmath>
#include <numeric>

#include "btmc/errors.hpp"
#include "btmc/wavelet.hpp"

using namespace btmc;

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;

double table_value(const WaveletFamily& fam, int kind, double x) {
  const std::vector<double>& table = kind ? fam.psi : fam.phi;
  const double lo = kind ? fam.psi_lo() : fam.phi_lo();
  const double idx = (x - lo) * std::exp2(fam.eval_level);
  const auto i = static_cast<long>(std::llround(idx));
  if (i < 0 || i >= static_cast<long>(table.size())) return 0.0;
  return table[i];
}
}  // namespace

TEST_CASE("filter identities hold for all supported orders") {
  for (int order = 1; order <= 10; ++order) {
    const WaveletFamily fam = build_family(order, 6);
    const double sum = std::accumulate(fam.filter.begin(), fam.filter.end(), 0.0);
    CHECK(std::abs(sum - kSqrt2) < 1e-12);
    for (int m = 0; m < order; ++m) {
      double acc = 0.0;
      for (int k = 0; k + 2 * m < 2 * order; ++k) acc += fam.filter[k] * fam.filter[k + 2 * m];
      CHECK(std::abs(acc - (m == 0 ? 1.0 : 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("cascade tables satisfy the refinement equation") {
  for (int order : {1, 2, 5, 8}) {
    const WaveletFamily fam = build_family(order, 8);
    CHECK(refinement_residual(fam) < 1e-10);
    // partition of unity makes the Riemann sum of phi exactly one
    double riemann = 0.0;
    for (std::size_t i = 0; i + 1 < fam.phi.size(); ++i) riemann += fam.phi[i];
    CHECK(std::abs(riemann * std::exp2(-fam.eval_level) - 1.0) < 1e-11);
  }
}

TEST_CASE("psi vanishes outside [1-M, M]") {
  for (int order : {2, 5}) {
    const WaveletFamily fam = build_family(order, 8);
    CHECK(fam.psi.front() == 0.0);
    CHECK(fam.psi.back() == 0.0);
  }
}

TEST_CASE("Haar closed form") {
  const WaveletFamily fam = build_family(1, 6);
  const long step = 1L << 6;
  for (long i = 0; i < step; ++i) {
    CHECK(fam.phi[i] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(fam.psi[i] == doctest::Approx(i < step / 2 ? 1.0 : -1.0).epsilon(1e-14));
  }
  CHECK(fam.phi[step] == 0.0);
  CHECK(fam.psi[step] == 0.0);
}

TEST_CASE("order-2 integer values match an independent eigen-solve") {
  const WaveletFamily fam = build_family(2, 8);
  // oracle: power iteration on T_{ij} = sqrt(2) h_{2i-j}, i,j in {1,2},
  // normalized to sum 1
  const double t11 = kSqrt2 * fam.filter[1], t12 = kSqrt2 * fam.filter[0];
  const double t21 = kSqrt2 * fam.filter[3], t22 = kSqrt2 * fam.filter[2];
  double v1 = 1.0, v2 = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double w1 = t11 * v1 + t12 * v2;
    const double w2 = t21 * v1 + t22 * v2;
    const double sum = w1 + w2;
    v1 = w1 / sum;
    v2 = w2 / sum;
  }
  const long step = 1L << 8;
  CHECK(std::abs(fam.phi[step] - v1) < 1e-12);
  CHECK(std::abs(fam.phi[2 * step] - v2) < 1e-12);
  // closed form (1 +- sqrt(3))/2
  CHECK(std::abs(fam.phi[step] - (1.0 + std::sqrt(3.0)) / 2.0) < 1e-12);
  CHECK(std::abs(fam.phi[2 * step] - (1.0 - std::sqrt(3.0)) / 2.0) < 1e-12);
}

TEST_CASE("periodized Haar wavelet on the two-point grid") {
  const WaveletFamily fam = build_family(1, 6);
  BasisIndex index;
  index.dim = 1;
  index.scale = 0;
  index.shift = {0, 0};
  index.kind = {1, 0};
  const std::vector<double> values = eval_periodized(fam, index, 1);
  REQUIRE(values.size() == 2);
  CHECK(values[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(values[1] == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("discrete norms and inner products against the quadrature oracle") {
  const WaveletFamily fam = build_family(5, 12);
  const auto norm_sq = [](const std::vector<double>& v, int dim, int level) {
    double acc = 0.0;
    for (const double x : v) acc += x * x;
    return acc * std::exp2(-dim * level);
  };

  for (int dim : {1, 2}) {
    BasisIndex a{dim, 2, {1, dim == 2 ? 2 : 0}, {1, dim == 2 ? 1 : 0}};
    BasisIndex b{dim, 3, {5, dim == 2 ? 3 : 0}, {1, 0}};
    if (dim == 1) b.kind = {1, 0};
    const int grid = 10;
    const auto va = eval_periodized(fam, a, grid);
    const auto vb = eval_periodized(fam, b, grid);
    const double tol = 40.0 * std::exp2(-(grid - 3));
    CHECK(std::abs(norm_sq(va, dim, grid) - 1.0) < tol);
    CHECK(std::abs(norm_sq(vb, dim, grid) - 1.0) < tol);
    double inner = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) inner += va[i] * vb[i];
    inner *= std::exp2(-dim * grid);
    CHECK(std::abs(inner) < tol);
  }
}

TEST_CASE("periodization reduces to a single copy when the support fits") {
  const WaveletFamily fam = build_family(5, 10);
  // support [(k-4)/32, (k+5)/32] = [1/32, 10/32] lies inside one period
  BasisIndex index{1, 5, {5, 0}, {1, 0}};
  const int grid = 9;
  const auto values = eval_periodized(fam, index, grid);
  const double norm = std::exp2(0.5 * index.scale);
  for (long tindex = 0; tindex < (1L << grid); ++tindex) {
    const double x = static_cast<double>(tindex) / (1 << grid);
    const double direct = norm * table_value(fam, 1, std::exp2(index.scale) * x - index.shift[0]);
    CHECK(values[tindex] == doctest::Approx(direct).epsilon(1e-13));
  }
}

TEST_CASE("values at a coarser grid subsample the finer grid exactly") {
  const WaveletFamily fam = build_family(5, 12);
  BasisIndex index{2, 3, {5, 2}, {1, 1}};
  const auto coarse = eval_periodized(fam, index, 6);
  const auto fine = eval_periodized(fam, index, 7);
  const long nc = 1L << 6;
  for (long iy = 0; iy < nc; ++iy) {
    for (long ix = 0; ix < nc; ++ix) {
      CHECK(coarse[iy * nc + ix] == fine[(2 * iy) * (2 * nc) + 2 * ix]);
    }
  }
}

TEST_CASE("index counting: 2^d + sum_j 2^{dj}(2^d - 1) = 2^{d(N+1)}") {
  for (int dim : {1, 2}) {
    const int top = 3;
    long count = 0;
    for (int j = 0; j <= top; ++j) {
      count += (1L << (dim * j)) * static_cast<long>(kinds_at_scale(dim, j).size());
    }
    CHECK(count == 1L << (dim * (top + 1)));
  }
}

TEST_CASE("besov_norm formula") {
  std::vector<std::pair<BasisIndex, double>> coeffs;
  CHECK(besov_norm(coeffs, 1.0, 2.0) == 0.0);

  BasisIndex at0{1, 0, {0, 0}, {1, 0}};
  coeffs.push_back({at0, -0.75});
  CHECK(besov_norm(coeffs, 2.3, 1.7) == doctest::Approx(0.75).epsilon(1e-14));

  BasisIndex at1{1, 1, {0, 0}, {1, 0}};
  coeffs.push_back({at1, 1.0});
  coeffs[0].second = 1.0;
  // s=1, p=2, d=1: (1 + 2^{2(1 + 1/2 - 1/2)})^{1/2} = sqrt(5)
  CHECK(besov_norm(coeffs, 1.0, 2.0) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-14));

  CHECK_THROWS_AS(besov_norm(coeffs, 1.0, 0.5), ConfigError);
}

TEST_CASE("index validation") {
  const WaveletFamily fam = build_family(2, 6);
  BasisIndex bad{1, 2, {4, 0}, {1, 0}};  // shift out of range
  CHECK_THROWS_AS(validate_index(bad), ConfigError);
  BasisIndex zero_kind{1, 3, {1, 0}, {0, 0}};  // pure scaling only at j=0
  CHECK_THROWS_AS(validate_index(zero_kind), ConfigError);
  BasisIndex fine{1, 0, {0, 0}, {1, 0}};
  CHECK_THROWS_AS(eval_periodized(fam, fine, 8), ConfigError);  // table too coarse
  CHECK_THROWS_AS(build_family(0, 8), ConfigError);
  CHECK_THROWS_AS(build_family(3, 2), ConfigError);
}
