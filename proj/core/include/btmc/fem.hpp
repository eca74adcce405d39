#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "btmc/prior.hpp"

namespace btmc {

// Uniform dyadic mesh on [0,1]^d with homogeneous Dirichlet boundary,
// h = 2^-refine.  Intervals in 1d, squares (bilinear elements) in 2d.
struct UniformMesh {
  int dim = 1;
  int refine = 0;

  double h() const;
  int cells_per_dim() const { return 1 << refine; }
  int nodes_per_dim() const { return (1 << refine) + 1; }
  long node_count() const;
  long interior_count() const;

  void validate() const;
};

// Per-element diffusion values a_K > 0, row major over elements.
struct CoefficientField {
  int dim = 1;
  int refine = 0;
  std::vector<double> values;
  double min_value = 0.0;
};

// a_K = exp(b(midpoint of K)) read off a synthesized grid.  Requires the grid
// to resolve element midpoints: field.level >= refine + 1.
CoefficientField coefficient_from_field(const Field& field, const UniformMesh& mesh);

// Coefficient identically equal to `value` (handy for manufactured tests).
CoefficientField constant_coefficient(const UniformMesh& mesh, double value);

// Galerkin solution; nodal values over the full grid, boundary entries
// exactly zero.
struct FemSolution {
  UniformMesh mesh;
  std::vector<double> nodal;
};

// Solves -div(a grad u) = source with P1 (1d) / Q1 (2d) elements.  The
// element coefficient is constant per cell (midpoint rule upstream), the
// constant source integrates exactly against the hat functions.  Direct
// sparse factorization up to a size threshold, diagonally preconditioned
// conjugate gradients above it; the relative algebraic residual is verified
// to be below 1e-10 and a NumericalError carries iteration diagnostics
// otherwise.
FemSolution solve(const UniformMesh& mesh, const CoefficientField& coefficient,
                  double source);

// Energy norm (integral of |grad u_h|^2)^{1/2}, element-exact for the
// piecewise gradient.
double qoi_energy(const FemSolution& solution);

// Spatial mean, element-exact integral of the interpolant.
double qoi_mean(const FemSolution& solution);

// Piecewise (multi-)linear interpolation; points need not be nodes.
std::vector<double> point_eval(const FemSolution& solution,
                               std::span<const std::array<double, 2>> points);
double point_eval_one(const FemSolution& solution, const std::array<double, 2>& point);

void write_solution_csv(std::ostream& out, const FemSolution& solution);

}  // namespace btmc
