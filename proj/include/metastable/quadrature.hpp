#pragma once

#include <functional>

#include "metastable/common.hpp"

namespace metastable {

struct GaussRule {
  Vec nodes;    // on [-1, 1]
  Vec weights;
};

// Nodes/weights by Newton iteration on the Legendre polynomial.
GaussRule gauss_legendre(int n);

struct QuadResult {
  double value = 0.0;
  double error_estimate = 0.0;
  size_t cells = 0;
  bool converged = true;
};

using ScalarField = std::function<double(const Vec&)>;

// Adaptive tensor quadrature over an axis-aligned box: each cell is scored
// by the disagreement of two Gauss orders and the worst cell is bisected
// along its longest axis until the summed estimates agree to rel_tol.
// Throws NumericError with a refinement trace when the cell budget runs out.
QuadResult integrate_box(const ScalarField& f, const Vec& lo, const Vec& hi,
                         double rel_tol = 1e-8, size_t max_cells = 200000);

// Integral over a closed ball (d = 1, 2, 3) in polar/spherical coordinates,
// which keeps the integrand smooth for tensor rules.
QuadResult integrate_ball(const ScalarField& f, const Vec& center, double radius,
                          double rel_tol = 1e-8, size_t max_cells = 200000);

}  // namespace metastable
