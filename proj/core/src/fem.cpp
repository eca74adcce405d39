#include "btmc/fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>

#include "btmc/errors.hpp"

namespace btmc {

double UniformMesh::h() const { return std::exp2(-refine); }

long UniformMesh::node_count() const {
  const long n = nodes_per_dim();
  return dim == 1 ? n : n * n;
}

long UniformMesh::interior_count() const {
  const long n = nodes_per_dim() - 2;
  return dim == 1 ? n : n * n;
}

void UniformMesh::validate() const {
  if (dim != 1 && dim != 2) throw ConfigError("mesh dim must be 1 or 2");
  if (refine < 1 || refine > 30) throw ConfigError("mesh refinement out of range");
}

CoefficientField coefficient_from_field(const Field& field, const UniformMesh& mesh) {
  mesh.validate();
  if (field.dim != mesh.dim) throw ConfigError("field/mesh dimension mismatch");
  if (field.level < mesh.refine + 1) {
    throw ConfigError("field level " + std::to_string(field.level) +
                      " cannot resolve midpoints of mesh refinement " +
                      std::to_string(mesh.refine));
  }
  const long cells = mesh.cells_per_dim();
  const long grid = 1L << field.level;
  const long stride = 1L << (field.level - mesh.refine - 1);

  CoefficientField coefficient;
  coefficient.dim = mesh.dim;
  coefficient.refine = mesh.refine;
  coefficient.min_value = std::numeric_limits<double>::infinity();
  if (mesh.dim == 1) {
    coefficient.values.resize(cells);
    for (long i = 0; i < cells; ++i) {
      coefficient.values[i] = std::exp(field.values[(2 * i + 1) * stride]);
      coefficient.min_value = std::min(coefficient.min_value, coefficient.values[i]);
    }
  } else {
    coefficient.values.resize(cells * cells);
    for (long iy = 0; iy < cells; ++iy) {
      const double* row = field.values.data() + (2 * iy + 1) * stride * grid;
      for (long ix = 0; ix < cells; ++ix) {
        const double a = std::exp(row[(2 * ix + 1) * stride]);
        coefficient.values[iy * cells + ix] = a;
        coefficient.min_value = std::min(coefficient.min_value, a);
      }
    }
  }
  if (!(coefficient.min_value > 0.0)) {
    throw NumericalError("coefficient lost positivity (exp underflow)");
  }
  return coefficient;
}

CoefficientField constant_coefficient(const UniformMesh& mesh, double value) {
  mesh.validate();
  if (!(value > 0.0)) throw ConfigError("coefficient must be positive");
  CoefficientField coefficient;
  coefficient.dim = mesh.dim;
  coefficient.refine = mesh.refine;
  const long cells = mesh.cells_per_dim();
  coefficient.values.assign(mesh.dim == 1 ? cells : cells * cells, value);
  coefficient.min_value = value;
  return coefficient;
}

namespace {

// Q1 element stiffness on a square, unit coefficient, corners ordered
// SW, SE, NE, NW.  Scale-invariant in 2d.
constexpr double kQ1[4][4] = {
    {4.0 / 6, -1.0 / 6, -2.0 / 6, -1.0 / 6},
    {-1.0 / 6, 4.0 / 6, -1.0 / 6, -2.0 / 6},
    {-2.0 / 6, -1.0 / 6, 4.0 / 6, -1.0 / 6},
    {-1.0 / 6, -2.0 / 6, -1.0 / 6, 4.0 / 6},
};

FemSolution solve_1d(const UniformMesh& mesh, const CoefficientField& coefficient,
                     double source) {
  const long cells = mesh.cells_per_dim();
  const long n = cells - 1;  // interior nodes
  const double h = mesh.h();

  std::vector<double> diag(n), lower(n - 1 > 0 ? n - 1 : 0), rhs(n, source * h);
  for (long i = 0; i < n; ++i) {
    diag[i] = (coefficient.values[i] + coefficient.values[i + 1]) / h;
    if (i + 1 < n) lower[i] = -coefficient.values[i + 1] / h;
  }

  // Thomas factorization (SPD tridiagonal), reused for iterative refinement
  std::vector<double> c(n);
  c[0] = diag[0];
  for (long i = 1; i < n; ++i) c[i] = diag[i] - lower[i - 1] / c[i - 1] * lower[i - 1];
  const auto back_solve = [&](const std::vector<double>& b, std::vector<double>& x) {
    std::vector<double> d(n);
    d[0] = b[0];
    for (long i = 1; i < n; ++i) d[i] = b[i] - lower[i - 1] / c[i - 1] * d[i - 1];
    x[n - 1] = d[n - 1] / c[n - 1];
    for (long i = n - 2; i >= 0; --i) x[i] = (d[i] - lower[i] * x[i + 1]) / c[i];
  };
  const auto residual_of = [&](const std::vector<double>& x, std::vector<double>& r) {
    for (long i = 0; i < n; ++i) {
      r[i] = rhs[i] - diag[i] * x[i];
      if (i > 0) r[i] -= lower[i - 1] * x[i - 1];
      if (i + 1 < n) r[i] -= lower[i] * x[i + 1];
    }
  };

  std::vector<double> u(n), r(n), correction(n);
  back_solve(rhs, u);
  // the coefficient contrast can be enormous (no uniform ellipticity), so
  // refine until the residual is small relative to |A||u| + |b|
  double scale = 0.0, res = 0.0;
  for (int sweep = 0; sweep < 3; ++sweep) {
    residual_of(u, r);
    double norm_a = 0.0, norm_u = 0.0, norm_b = 0.0;
    res = 0.0;
    for (long i = 0; i < n; ++i) {
      const double row = std::abs(diag[i]) + (i > 0 ? std::abs(lower[i - 1]) : 0.0) +
                         (i + 1 < n ? std::abs(lower[i]) : 0.0);
      norm_a = std::max(norm_a, row);
      norm_u = std::max(norm_u, std::abs(u[i]));
      norm_b = std::max(norm_b, std::abs(rhs[i]));
      res = std::max(res, std::abs(r[i]));
    }
    scale = norm_a * norm_u + norm_b;
    if (res <= 1e-12 * scale) break;
    back_solve(r, correction);
    for (long i = 0; i < n; ++i) u[i] += correction[i];
  }
  if (!(res <= 1e-10 * scale)) {
    throw NumericalError("tridiagonal solve residual " + std::to_string(res / scale) +
                         " above tolerance after refinement");
  }

  FemSolution solution;
  solution.mesh = mesh;
  solution.nodal.assign(mesh.node_count(), 0.0);
  for (long i = 0; i < n; ++i) solution.nodal[i + 1] = u[i];
  return solution;
}

constexpr long kDirectLimit = 70000;

// Repeated solves hit the same few meshes with fresh coefficients, so the
// sparsity pattern, the symbolic factorization and the assembly scatter map
// are cached per mesh and thread.
struct MeshWorkspace {
  Eigen::SparseMatrix<double> matrix;         // fixed structure, values rewritten
  std::vector<std::int32_t> cell_slots;       // 16 value slots per cell (-1 outside)
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;
};

constexpr int kCornerX[4] = {0, 1, 1, 0};
constexpr int kCornerY[4] = {0, 0, 1, 1};

MeshWorkspace& workspace_for(int refine) {
  thread_local std::map<int, MeshWorkspace> cache;
  auto it = cache.find(refine);
  if (it != cache.end()) return it->second;

  MeshWorkspace& ws = cache[refine];
  const long cells = 1L << refine;
  const long ni = cells - 1;
  const long unknowns = ni * ni;
  const auto interior_index = [ni](long ix, long iy) { return (iy - 1) * ni + (ix - 1); };

  std::vector<Eigen::Triplet<double>> pattern;
  pattern.reserve(16 * cells * cells);
  for (long ey = 0; ey < cells; ++ey) {
    for (long ex = 0; ex < cells; ++ex) {
      for (int c = 0; c < 4; ++c) {
        const long ix = ex + kCornerX[c], iy = ey + kCornerY[c];
        if (ix <= 0 || ix >= cells || iy <= 0 || iy >= cells) continue;
        for (int c2 = 0; c2 < 4; ++c2) {
          const long jx = ex + kCornerX[c2], jy = ey + kCornerY[c2];
          if (jx <= 0 || jx >= cells || jy <= 0 || jy >= cells) continue;
          pattern.emplace_back(interior_index(ix, iy), interior_index(jx, jy), 0.0);
        }
      }
    }
  }
  ws.matrix.resize(unknowns, unknowns);
  ws.matrix.setFromTriplets(pattern.begin(), pattern.end());
  ws.matrix.makeCompressed();

  // map each (cell, corner pair) to its slot in the compressed value array
  const auto slot_of = [&](long row, long col) {
    const auto* outer = ws.matrix.outerIndexPtr();
    const auto* inner = ws.matrix.innerIndexPtr();
    for (auto k = outer[col]; k < outer[col + 1]; ++k) {
      if (inner[k] == row) return static_cast<std::int32_t>(k);
    }
    return std::int32_t{-1};
  };
  ws.cell_slots.assign(16 * cells * cells, -1);
  for (long ey = 0; ey < cells; ++ey) {
    for (long ex = 0; ex < cells; ++ex) {
      const long base = 16 * (ey * cells + ex);
      for (int c = 0; c < 4; ++c) {
        const long ix = ex + kCornerX[c], iy = ey + kCornerY[c];
        if (ix <= 0 || ix >= cells || iy <= 0 || iy >= cells) continue;
        for (int c2 = 0; c2 < 4; ++c2) {
          const long jx = ex + kCornerX[c2], jy = ey + kCornerY[c2];
          if (jx <= 0 || jx >= cells || jy <= 0 || jy >= cells) continue;
          ws.cell_slots[base + 4 * c + c2] = slot_of(interior_index(ix, iy), interior_index(jx, jy));
        }
      }
    }
  }
  if (unknowns <= kDirectLimit) {
    ws.ldlt.analyzePattern(ws.matrix);
    ws.analyzed = true;
  }
  return ws;
}

FemSolution solve_2d(const UniformMesh& mesh, const CoefficientField& coefficient,
                     double source) {
  const long cells = mesh.cells_per_dim();
  const long ni = cells - 1;          // interior nodes per dim
  const long unknowns = ni * ni;
  const double h = mesh.h();

  MeshWorkspace& ws = workspace_for(mesh.refine);
  Eigen::SparseMatrix<double>& matrix = ws.matrix;
  std::fill(matrix.valuePtr(), matrix.valuePtr() + matrix.nonZeros(), 0.0);
  for (long cell = 0; cell < cells * cells; ++cell) {
    const double a = coefficient.values[cell];
    const std::int32_t* slots = ws.cell_slots.data() + 16 * cell;
    for (int pair = 0; pair < 16; ++pair) {
      if (slots[pair] >= 0) matrix.valuePtr()[slots[pair]] += a * kQ1[pair / 4][pair % 4];
    }
  }
  // every interior node touches four cells: constant load integrates to f h^2
  const Eigen::VectorXd rhs = Eigen::VectorXd::Constant(unknowns, source * h * h);

  Eigen::VectorXd u;
  if (unknowns <= kDirectLimit) {
    ws.ldlt.factorize(matrix);
    if (ws.ldlt.info() != Eigen::Success) {
      throw NumericalError("sparse factorization failed");
    }
    u = ws.ldlt.solve(rhs);
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(1e-12);
    cg.setMaxIterations(200 + 8 * cells);
    cg.compute(matrix);
    u = cg.solve(rhs);
    if (cg.info() != Eigen::Success) {
      throw NumericalError("conjugate gradients did not converge: " +
                           std::to_string(cg.iterations()) + " iterations, error " +
                           std::to_string(cg.error()));
    }
  }

  // backward-error style residual: relative to |A||u| + |b|
  const Eigen::VectorXd residual = rhs - matrix * u;
  double norm_a = 0.0;
  for (long col = 0; col < matrix.outerSize(); ++col) {
    double acc = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix, col); it; ++it) {
      acc += std::abs(it.value());
    }
    norm_a = std::max(norm_a, acc);
  }
  const double scale =
      norm_a * u.lpNorm<Eigen::Infinity>() + rhs.lpNorm<Eigen::Infinity>();
  const double relative = residual.lpNorm<Eigen::Infinity>() / scale;
  if (!(relative <= 1e-10)) {
    throw NumericalError("linear system residual " + std::to_string(relative) +
                         " above tolerance");
  }

  FemSolution solution;
  solution.mesh = mesh;
  solution.nodal.assign(mesh.node_count(), 0.0);
  const long nodes = mesh.nodes_per_dim();
  for (long iy = 1; iy < cells; ++iy) {
    for (long ix = 1; ix < cells; ++ix) {
      solution.nodal[iy * nodes + ix] = u[(iy - 1) * ni + (ix - 1)];
    }
  }
  return solution;
}

}  // namespace

FemSolution solve(const UniformMesh& mesh, const CoefficientField& coefficient,
                  double source) {
  mesh.validate();
  if (coefficient.dim != mesh.dim || coefficient.refine != mesh.refine) {
    throw ConfigError("coefficient does not match mesh");
  }
  if (!(coefficient.min_value > 0.0)) throw NumericalError("coefficient must be positive");
  return mesh.dim == 1 ? solve_1d(mesh, coefficient, source)
                       : solve_2d(mesh, coefficient, source);
}

double qoi_energy(const FemSolution& solution) {
  const long cells = solution.mesh.cells_per_dim();
  if (solution.mesh.dim == 1) {
    const double h = solution.mesh.h();
    double acc = 0.0;
    for (long i = 0; i < cells; ++i) {
      const double slope = (solution.nodal[i + 1] - solution.nodal[i]) / h;
      acc += slope * slope * h;
    }
    return std::sqrt(acc);
  }
  const long nodes = solution.mesh.nodes_per_dim();
  const int cx[4] = {0, 1, 1, 0};
  const int cy[4] = {0, 0, 1, 1};
  double acc = 0.0;
  for (long ey = 0; ey < cells; ++ey) {
    for (long ex = 0; ex < cells; ++ex) {
      double local[4];
      for (int c = 0; c < 4; ++c) local[c] = solution.nodal[(ey + cy[c]) * nodes + ex + cx[c]];
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) acc += local[i] * kQ1[i][j] * local[j];
      }
    }
  }
  return std::sqrt(acc);
}

double qoi_mean(const FemSolution& solution) {
  const long nodes = solution.mesh.nodes_per_dim();
  const double h = solution.mesh.h();
  double acc = 0.0;
  if (solution.mesh.dim == 1) {
    for (long i = 1; i < nodes - 1; ++i) acc += solution.nodal[i];
    return acc * h;
  }
  for (long iy = 1; iy < nodes - 1; ++iy) {
    for (long ix = 1; ix < nodes - 1; ++ix) acc += solution.nodal[iy * nodes + ix];
  }
  return acc * h * h;
}

double point_eval_one(const FemSolution& solution, const std::array<double, 2>& point) {
  const long cells = solution.mesh.cells_per_dim();
  const long nodes = solution.mesh.nodes_per_dim();
  const double h = solution.mesh.h();

  const auto locate = [&](double x) {
    long e = static_cast<long>(std::floor(x / h));
    e = std::max(0L, std::min(e, cells - 1));
    return std::pair<long, double>(e, x / h - static_cast<double>(e));
  };
  const auto [ex, tx] = locate(point[0]);
  if (solution.mesh.dim == 1) {
    return (1.0 - tx) * solution.nodal[ex] + tx * solution.nodal[ex + 1];
  }
  const auto [ey, ty] = locate(point[1]);
  const double sw = solution.nodal[ey * nodes + ex];
  const double se = solution.nodal[ey * nodes + ex + 1];
  const double ne = solution.nodal[(ey + 1) * nodes + ex + 1];
  const double nw = solution.nodal[(ey + 1) * nodes + ex];
  return (1.0 - tx) * (1.0 - ty) * sw + tx * (1.0 - ty) * se + tx * ty * ne +
         (1.0 - tx) * ty * nw;
}

std::vector<double> point_eval(const FemSolution& solution,
                               std::span<const std::array<double, 2>> points) {
  std::vector<double> values(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) values[i] = point_eval_one(solution, points[i]);
  return values;
}

namespace {
std::string shortest(double value) {
  char buffer[32];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}
}  // namespace

void write_solution_csv(std::ostream& out, const FemSolution& solution) {
  out << "# d=" << solution.mesh.dim << " m=" << solution.mesh.refine
      << " nodes=" << solution.mesh.node_count() << "\n";
  const long nodes = solution.mesh.nodes_per_dim();
  if (solution.mesh.dim == 1) {
    for (const double v : solution.nodal) out << shortest(v) << "\n";
  } else {
    for (long iy = 0; iy < nodes; ++iy) {
      for (long ix = 0; ix < nodes; ++ix) {
        out << shortest(solution.nodal[iy * nodes + ix]) << (ix + 1 == nodes ? "\n" : ",");
      }
    }
  }
}

}  // namespace btmc
