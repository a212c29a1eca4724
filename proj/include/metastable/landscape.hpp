#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metastable/potential.hpp"
#include "metastable/quadrature.hpp"

namespace metastable {

enum class PointKind { minimum, index1_saddle, other };

struct CriticalPoint {
  Vec location;
  double value = 0.0;          // U at the point
  Mat hess;                    // symmetric d x d
  Mat ell_jac;                 // D ell at the point
  Vec hess_eigvals;            // ascending
  Mat hess_eigvecs;            // columns match hess_eigvals
  PointKind kind = PointKind::other;

  // Filled by classify_saddle for index-1 saddles.
  double unstable_curvature = 0.0;  // magnitude of the negative Hessian eigenvalue
  Vec stable_curvatures;            // the positive ones, ascending
  Vec downhill;                     // unit eigenvector of the negative eigenvalue
  double escape_rate = 0.0;         // magnitude of the unique negative eigenvalue
                                    // of hess + ell_jac (real, asserted)
  Vec profile_dir;                  // unit eigenvector of hess - ell_jac^T for
                                    // -escape_rate, oriented so profile.downhill > 0
};

// Tolerances pinned by the design decisions.
struct LandscapeTolerances {
  double newton_tol = 1e-10;   // on |grad U|
  double dedup_tol = 1e-6;
  double morse_tol = 1e-8;
  double level_tol = 1e-8;
  double descent_offset = 1e-3;  // initial displacement along the downhill direction
  int max_newton_iters = 120;
  size_t max_descent_steps = 2000000;
};

struct Well {
  std::vector<size_t> minima;        // indices into LandscapeGraph::points
  std::vector<size_t> deepest_minima;  // subset attaining the floor
  double floor = 0.0;                // h_i
  double gauss_mass = 0.0;           // nu_i = sum over deepest minima of det(H)^(-1/2)
};

struct Gate {
  size_t point = 0;        // index into LandscapeGraph::points (an index-1 saddle)
  size_t well_lo = 0;      // i < j
  size_t well_hi = 0;
  double rate_const = 0.0;  // omega^sigma
};

struct LandscapeGraph {
  double level = 0.0;  // H
  std::vector<CriticalPoint> points;
  std::vector<Well> wells;             // indexed 0..K-1, reported 1-based
  std::vector<Gate> gates;
  std::vector<size_t> internal_saddles;  // level-H saddles whose two descents
                                         // reach the same well (excluded)
  Mat gate_weight;          // omega_{i,j}, symmetric, zero diagonal
  Vec total_gate_weight;    // omega_i
  double floor = 0.0;       // h = min_i h_i
  std::vector<size_t> deepest;  // S_star (well indices)
  double gauss_mass_star = 0.0;  // nu_star
  double valley_radius = 0.0;
  bool connected = true;
  std::vector<std::vector<size_t>> components;  // gate-connected well groups
  double max_hessian_eigenvalue = 0.0;           // over all critical points
  std::vector<std::string> warnings;

  double depth() const { return level - floor; }  // H - h
  double log_timescale(double eps) const { return depth() / eps; }
  double timescale(double eps) const { return std::exp(depth() / eps); }

  // Deep-valley membership: index in `deepest` order, or nullopt (Delta).
  std::optional<size_t> valley_of(const Vec& x) const;
  Vec valley_anchor(size_t deep_index) const;  // lowest minimum of that valley
};

std::vector<CriticalPoint> find_critical_points(const FieldEval& eval,
                                                int seeds_per_axis,
                                                const LandscapeTolerances& tol = {});

// Fills the saddle-only fields; requires kind == index1_saddle.
void classify_saddle(CriticalPoint& cp, const FieldEval& eval);

// omega^sigma = escape_rate / (2 pi sqrt(-det hess)).
double ek_constant(const CriticalPoint& saddle);

LandscapeGraph build_landscape(std::vector<CriticalPoint> points, const FieldEval& eval,
                               double level, const LandscapeTolerances& tol = {});

// Steepest-descent endpoint: integrates xdot = -grad U (or the full drift when
// use_full_drift) from x0 until it lands in a dedup ball of a known minimum.
size_t descend_to_minimum(const FieldEval& eval, const Vec& x0,
                          const std::vector<CriticalPoint>& points,
                          const LandscapeTolerances& tol, bool use_full_drift = false);

struct LaplaceReport {
  double epsilon = 0.0;
  double z_ratio = 0.0;                 // Z_eps / ((2 pi eps)^(d/2) e^(-h/eps) nu_star)
  std::vector<double> valley_mass;      // mu_eps(V_i), i in S_star order
  std::vector<double> valley_ratio;     // mu_eps(V_i) / (nu_i / nu_star)
  double delta_mass = 0.0;              // mu_eps outside the deep valleys
  double boundary_density = 0.0;        // max e^{-(U-h)/eps} on box boundary samples
  std::vector<std::string> warnings;
};

// Quadrature check of the Gibbs asymptotics; d <= 3.
LaplaceReport laplace_check(const FieldEval& eval, const LandscapeGraph& graph,
                            double eps, double rel_tol = 1e-7);

}  // namespace metastable
