#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "metastable/linalg.hpp"

namespace metastable {

struct MonomialTerm {
  double coeff = 0.0;
  std::vector<int> powers;  // length d, non-negative

  bool operator==(const MonomialTerm&) const = default;
};

enum class EllKind { zero, skew_poly };

// Declarative description of the model: polynomial potential U, the
// divergence-free drift component ell = J(U) grad U with polynomial
// skew-matrix map J(a) = sum_k J_k a^k, the analysis box and parameters.
struct PotentialSpec {
  int dimension = 0;
  std::vector<MonomialTerm> u_terms;
  EllKind ell_kind = EllKind::zero;
  std::vector<Mat> j_coeffs;  // J_0..J_p, each skew-symmetric (exact)
  Vec domain_lo, domain_hi;
  double level_h = 0.0;     // the cut level H
  Vec epsilons;
  double valley_radius = 0.0;  // r0
  uint64_t seed = 0;
};

PotentialSpec parse_spec(const std::string& text);
std::string serialize_spec(const PotentialSpec& spec);
bool spec_equal(const PotentialSpec& a, const PotentialSpec& b);

// Pure evaluator bundle for U, grad U, hess U, ell and the Jacobian of ell.
// All derivatives are exact formal derivatives of the monomial terms;
// immutable after construction and safe to share across workers.
class FieldEval {
 public:
  explicit FieldEval(const PotentialSpec& spec);

  int dim() const { return d_; }
  const PotentialSpec& spec() const { return spec_; }

  double potential(const Vec& x) const;
  Vec grad(const Vec& x) const;
  Mat hessian(const Vec& x) const;   // assembled symmetric
  Vec ell(const Vec& x) const;
  Mat ell_jacobian(const Vec& x) const;

  // Fused -(grad U + ell) for the simulation hot loop; out must have size d.
  void drift(const double* x, double* out) const;

 private:
  struct TermList {
    std::vector<double> coeff;
    std::vector<int> powers;  // flattened, d per term
    double eval(const double* x, int d) const;
    double eval_table(const double (*pw)[16], int d) const;
  };

  void grad_raw(const double* x, double* out) const;
  void ell_raw(double u, const double* g, double* out) const;

  int d_;
  PotentialSpec spec_;
  bool fast_ = false;          // d <= 8 and every exponent <= 15
  int max_pow_[8] = {0};
  TermList u_;
  std::vector<TermList> grad_;            // d lists
  std::vector<TermList> hess_;            // d*d lists (symmetrized)
  std::vector<Mat> j_deriv_;              // coefficients of J'(a)
};

struct StructureReport {
  double max_orthogonality = 0.0;   // max |grad U . ell|
  double max_divergence = 0.0;      // max |trace D ell|
  size_t samples = 0;
  double tol = 0.0;
  bool pass = false;
  bool growth_assumed = true;       // |grad U| - 2 lap U -> inf not proven
  std::vector<std::string> warnings;
};

// Orthogonality (Eq-level: grad U . ell == 0) and incompressibility
// (div ell == 0) residuals over a sample cloud; report-only.
StructureReport check_structure(const FieldEval& eval, const std::vector<Vec>& points,
                                double tol);

// Same check with injectable field hooks (used to exercise corrupted drifts).
StructureReport check_structure_fields(const std::function<Vec(const Vec&)>& grad_fn,
                                       const std::function<Vec(const Vec&)>& ell_fn,
                                       const std::function<Mat(const Vec&)>& jac_fn,
                                       const std::vector<Vec>& points, double tol);

// Warns when U decreases from box center toward a corner (leading-term sanity).
std::vector<std::string> growth_warnings(const FieldEval& eval);

struct DerivativeReport {
  double grad_rel = 0.0;
  double hess_rel = 0.0;
  double ell_jac_rel = 0.0;
  double h = 0.0;
  double max_rel() const { return std::max(grad_rel, std::max(hess_rel, ell_jac_rel)); }
};

// Central finite differences against the analytic derivatives at x.
DerivativeReport derivative_selfcheck(const FieldEval& eval, const Vec& x, double h);

// Default step from the design decisions: 1e-5 * (1 + |x|).
double default_fd_step(const Vec& x);

std::vector<Vec> default_structure_samples(const PotentialSpec& spec, size_t n);

}  // namespace metastable
