#include "btmc/wavelet.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <string>

#include "btmc/errors.hpp"

namespace btmc {

namespace {

// Daubechies extremal-phase low-pass filters, normalized to sum sqrt(2).
// Orders 1..10; order M has 2M coefficients.
const std::vector<std::vector<double>> kDaubechiesFilters = {
    // M=1 (Haar)
    {0.70710678118654752440, 0.70710678118654752440},
    // M=2
    {0.48296291314453414337, 0.83651630373780790558, 0.22414386804201338103,
     -0.12940952255126038117},
    // M=3
    {0.33267055295008261600, 0.80689150931109257649, 0.45987750211849157010,
     -0.13501102001025458870, -0.085441273882026661693, 0.035226291885709536603},
    // M=4
    {0.23037781330889650086, 0.71484657055291564709, 0.63088076792985890788,
     -0.027983769416859854211, -0.18703481171909308408, 0.030841381835560763627,
     0.032883011666885199735, -0.010597401785069032105},
    // M=5
    {0.16010239797419291448, 0.60382926979718967054, 0.72430852843777292773,
     0.13842814590132073151, -0.24229488706638203186, -0.032244869584638374648,
     0.077571493840045713523, -0.0062414902127982742742, -0.012580751999081999469,
     0.0033357252854737712780},
    // M=6
    {0.11154074335010946362, 0.49462389039845308568, 0.75113390802109535068,
     0.31525035170919762909, -0.22626469396543982008, -0.12976686756726193556,
     0.097501605587323049102, 0.027522865530305728626, -0.031582039317486029565,
     0.00055384220116149613925, 0.0047772575109455106396, -0.0010773010853084795649},
    // M=7
    {0.077852054085009179020, 0.39653931948191730654, 0.72913209084623511992,
     0.46978228740519312247, -0.14390600392856497541, -0.22403618499387498264,
     0.071309219266830264751, 0.080612609151083071913, -0.038029936935014413580,
     -0.016574541630666880654, 0.012550998556099840613, 0.00042957797292136652113,
     -0.0018016407040474909153, 0.00035371379997452024845},
    // M=8
    {0.054415842243104009955, 0.31287159091429997066, 0.67563073629728980681,
     0.58535468365420671277, -0.015829105256349305667, -0.28401554296154692652,
     0.00047248457391328277036, 0.12874742662047845886, -0.017369301001807546170,
     -0.044088253930794751507, 0.013981027917398281649, 0.0087460940474057767164,
     -0.0048703529934515743104, -0.00039174037337694704630, 0.00067544940645056936637,
     -0.00011747678412476953373},
    // M=9
    {0.038077947363878346589, 0.24383467461259035373, 0.60482312369011111190,
     0.65728807805130053808, 0.13319738582500757619, -0.29327378327917490881,
     -0.096840783222976460514, 0.14854074933810638014, 0.030725681479333379212,
     -0.067632829061329973676, 0.00025094711483145195759, 0.022361662123679097205,
     -0.0047232047577513972779, -0.0042815036824634298345, 0.0018476468830562264766,
     0.00023038576352319596721, -0.00025196318894271013697, 0.000039347320316271599481},
    // M=10
    {0.026670057900555553587, 0.18817680007769148902, 0.52720118893172558648,
     0.68845903945360356574, 0.28117234366057746075, -0.24984642432731537942,
     -0.19594627437737704350, 0.12736934033579326008, 0.093057364603572351160,
     -0.071394147166397087145, -0.029457536821875812858, 0.033212674059341001740,
     0.0036065535669561696554, -0.010733175483330575044, 0.0013953517470529011658,
     0.0019924052951850561172, -0.00068585669495971162656, -0.00011646685512928545095,
     0.000093588670320069591334, -0.000013264202894521244812},
};

constexpr double kSqrt2 = 1.4142135623730950488;

// phi(n) at the integers n = 1..2M-2 solves the eigenproblem of the
// refinement matrix T_{nm} = sqrt(2) h_{2n-m} for eigenvalue 1, normalized to
// sum 1.  Solved as a least-squares system with the normalization row
// appended, which is well posed because the eigenvalue is simple.
std::vector<double> integer_values(const std::vector<double>& filter, int order) {
  if (order == 1) return {};
  const int n = 2 * order - 2;
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n + 1, n);
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      const int idx = 2 * i - j;
      const double t = (idx >= 0 && idx < 2 * order) ? kSqrt2 * filter[idx] : 0.0;
      sys(i - 1, j - 1) = t - (i == j ? 1.0 : 0.0);
    }
  }
  sys.row(n).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs(n) = 1.0;
  Eigen::VectorXd v = sys.colPivHouseholderQr().solve(rhs);

  Eigen::VectorXd residual = sys.topRows(n) * v;
  if (residual.lpNorm<Eigen::Infinity>() > 1e-12) {
    throw NumericalError("refinement eigenproblem residual " +
                         std::to_string(residual.lpNorm<Eigen::Infinity>()));
  }
  return {v.data(), v.data() + n};
}

}  // namespace

std::vector<std::array<int, 2>> kinds_at_scale(int dim, int scale) {
  std::vector<std::array<int, 2>> kinds;
  const int count = 1 << dim;
  for (int mask = 0; mask < count; ++mask) {
    if (scale >= 1 && mask == 0) continue;
    kinds.push_back({mask & 1, (mask >> 1) & 1});
  }
  return kinds;
}

WaveletFamily build_family(int order, int eval_level) {
  if (order < 1 || order > static_cast<int>(kDaubechiesFilters.size())) {
    throw ConfigError("wavelet order must be in [1, " +
                      std::to_string(kDaubechiesFilters.size()) + "]");
  }
  if (eval_level < 4) throw ConfigError("wavelet eval_level must be >= 4");

  WaveletFamily family;
  family.order = order;
  family.eval_level = eval_level;
  family.filter = kDaubechiesFilters[order - 1];

  const int len = family.support_len();
  const std::int64_t step = std::int64_t{1} << eval_level;
  const std::int64_t slots = len * step + 1;
  family.phi.assign(slots, 0.0);

  family.phi[0] = (order == 1) ? 1.0 : 0.0;
  const std::vector<double> interior = integer_values(family.filter, order);
  for (int n = 1; n <= len - 1; ++n) family.phi[n * step] = interior[n - 1];

  // cascade: fill odd multiples of 2^-r from the values at level r-1
  for (int r = 1; r <= eval_level; ++r) {
    const std::int64_t stride = std::int64_t{1} << (eval_level - r);
    for (std::int64_t t = 1; t < len * (std::int64_t{1} << r); t += 2) {
      double acc = 0.0;
      for (int k = 0; k < 2 * order; ++k) {
        const std::int64_t src = 2 * t * stride - k * step;
        if (src >= 0 && src < slots) acc += family.filter[k] * family.phi[src];
      }
      family.phi[t * stride] = kSqrt2 * acc;
    }
  }

  // psi(x) = sqrt(2) sum_{k=2-2M}^{1} (-1)^k h_{1-k} phi(2x-k), x in [1-M, M]
  family.psi.assign(slots, 0.0);
  const std::int64_t lo = family.psi_lo() * step;
  for (std::int64_t i = 0; i < slots; ++i) {
    double acc = 0.0;
    for (int k = 2 - 2 * order; k <= 1; ++k) {
      const std::int64_t src = 2 * (lo + i) - k * step;
      if (src >= 0 && src < slots) {
        const double sign = (k & 1) ? -1.0 : 1.0;
        acc += sign * family.filter[1 - k] * family.phi[src];
      }
    }
    family.psi[i] = kSqrt2 * acc;
  }

  const double residual = refinement_residual(family);
  if (residual > 1e-10) {
    throw NumericalError("cascade residual " + std::to_string(residual) +
                         " exceeds 1e-10");
  }
  return family;
}

double refinement_residual(const WaveletFamily& family) {
  const int len = family.support_len();
  const std::int64_t step = std::int64_t{1} << family.eval_level;
  const std::int64_t slots = len * step + 1;
  double worst = 0.0;
  for (std::int64_t i = 0; i < slots; ++i) {
    double acc = 0.0;
    for (int k = 0; k < 2 * family.order; ++k) {
      const std::int64_t src = 2 * i - k * step;
      if (src >= 0 && src < slots) acc += family.filter[k] * family.phi[src];
    }
    worst = std::max(worst, std::abs(family.phi[i] - kSqrt2 * acc));
  }
  return worst;
}

void validate_index(const BasisIndex& index) {
  if (index.dim != 1 && index.dim != 2) throw ConfigError("basis index dim must be 1 or 2");
  if (index.scale < 0 || index.scale > 30) throw ConfigError("basis index scale out of range");
  bool all_zero = true;
  for (int i = 0; i < index.dim; ++i) {
    if (index.shift[i] < 0 || index.shift[i] >= (1 << index.scale)) {
      throw ConfigError("basis index shift out of range");
    }
    if (index.kind[i] != 0 && index.kind[i] != 1) throw ConfigError("basis index kind must be 0/1");
    if (index.kind[i] != 0) all_zero = false;
  }
  for (int i = index.dim; i < 2; ++i) {
    if (index.shift[i] != 0 || index.kind[i] != 0) {
      throw ConfigError("unused basis index dimensions must be zero");
    }
  }
  if (index.scale >= 1 && all_zero) {
    throw ConfigError("pure scaling kind is only admissible at scale 0");
  }
}

namespace {

inline std::int64_t ceil_div(std::int64_t num, std::int64_t den) {
  // den > 0
  return num >= 0 ? (num + den - 1) / den : -((-num) / den);
}

// Values of one periodized 1-d factor over the level-G torus grid.  If the
// unperiodized support spans at least one period the result is a dense array
// of length 2^G (wrapped copies already summed); otherwise it is the
// contiguous support range [first, first+values.size()) to be wrapped by the
// caller.
struct Factor {
  bool dense = false;
  std::int64_t first = 0;
  std::vector<double> values;
};

Factor periodized_factor(const WaveletFamily& family, int scale, int shift,
                         int kind, int grid_level) {
  const int shift_bits = scale - grid_level + family.eval_level;
  if (shift_bits < 0) {
    throw ConfigError("grid level exceeds table resolution for this scale");
  }
  const std::vector<double>& table = kind ? family.psi : family.phi;
  const int support_lo = kind ? family.psi_lo() : family.phi_lo();
  const int len = family.support_len();

  const std::int64_t step = std::int64_t{1} << family.eval_level;
  const std::int64_t den = std::int64_t{1} << shift_bits;
  const std::int64_t base = (shift + support_lo) * step;  // table origin in 2^-J units
  const std::int64_t t_lo = ceil_div(base, den);
  const std::int64_t t_hi = ceil_div(base + len * step, den);
  const std::int64_t period = std::int64_t{1} << grid_level;

  Factor factor;
  if (t_hi - t_lo >= period) {
    factor.dense = true;
    factor.values.assign(period, 0.0);
    const std::int64_t mask = period - 1;
    for (std::int64_t t = t_lo; t < t_hi; ++t) {
      factor.values[t & mask] += table[t * den - base];
    }
  } else {
    factor.first = t_lo;
    factor.values.resize(t_hi - t_lo);
    for (std::int64_t t = t_lo; t < t_hi; ++t) {
      factor.values[t - t_lo] = table[t * den - base];
    }
  }
  return factor;
}

}  // namespace

void accumulate_periodized(const WaveletFamily& family, const BasisIndex& index,
                           double coeff, int grid_level, std::span<double> field) {
  validate_index(index);
  const std::int64_t period = std::int64_t{1} << grid_level;
  const std::int64_t mask = period - 1;
  const double c = coeff * std::exp2(0.5 * index.dim * index.scale);

  if (index.dim == 1) {
    if (static_cast<std::int64_t>(field.size()) != period) {
      throw ConfigError("field size does not match grid level");
    }
    const Factor fx =
        periodized_factor(family, index.scale, index.shift[0], index.kind[0], grid_level);
    if (fx.dense) {
      for (std::int64_t i = 0; i < period; ++i) field[i] += c * fx.values[i];
    } else {
      for (std::size_t i = 0; i < fx.values.size(); ++i) {
        field[(fx.first + static_cast<std::int64_t>(i)) & mask] += c * fx.values[i];
      }
    }
    return;
  }

  if (static_cast<std::int64_t>(field.size()) != period * period) {
    throw ConfigError("field size does not match grid level");
  }
  const Factor fx =
      periodized_factor(family, index.scale, index.shift[0], index.kind[0], grid_level);
  const Factor fy =
      periodized_factor(family, index.scale, index.shift[1], index.kind[1], grid_level);

  const auto wrapped = [&](const Factor& f, std::size_t i) {
    return f.dense ? static_cast<std::int64_t>(i)
                   : ((f.first + static_cast<std::int64_t>(i)) & mask);
  };
  for (std::size_t iy = 0; iy < fy.values.size(); ++iy) {
    const double cy = c * fy.values[iy];
    if (cy == 0.0) continue;
    double* row = field.data() + wrapped(fy, iy) * period;
    for (std::size_t ix = 0; ix < fx.values.size(); ++ix) {
      row[wrapped(fx, ix)] += cy * fx.values[ix];
    }
  }
}

std::vector<double> eval_periodized(const WaveletFamily& family,
                                    const BasisIndex& index, int grid_level) {
  const std::int64_t period = std::int64_t{1} << grid_level;
  std::vector<double> field(index.dim == 1 ? period : period * period, 0.0);
  accumulate_periodized(family, index, 1.0, grid_level, field);
  return field;
}

double besov_norm(std::span<const std::pair<BasisIndex, double>> coeffs,
                  double smoothness, double integrability) {
  if (integrability < 1.0 || !std::isfinite(integrability)) {
    throw ConfigError("besov_norm requires p in [1, inf)");
  }
  if (coeffs.empty()) return 0.0;
  const int dim = coeffs.front().first.dim;
  double sum = 0.0;
  for (const auto& [index, value] : coeffs) {
    if (index.dim != dim) throw ConfigError("mixed dimensions in coefficient set");
    const double exponent =
        index.scale * integrability * (smoothness + dim / 2.0 - dim / integrability);
    sum += std::pow(2.0, exponent) * std::pow(std::abs(value), integrability);
  }
  return std::pow(sum, 1.0 / integrability);
}

}  // namespace btmc
