#pragma once

#include <string>
#include <vector>

#include "metastable/landscape.hpp"

namespace metastable {

// Box geometry around a classified gate saddle, in the Hessian eigenbasis
// with the first axis along the oriented downhill direction. Scales:
// delta = sqrt(eps log(1/eps)), eta = eps^2; half-widths J delta / sqrt(l1)
// along the first axis and 2 J delta / sqrt(l_k) along the others.
struct SaddleBox {
  CriticalPoint cp;
  double level = 0.0;  // H
  double eps = 0.0;
  double box_mult = 4.0;  // J
  double delta = 0.0;
  double eta = 0.0;
  Vec half_width;      // size d; [0] is the downhill half-width
  Mat basis;           // columns: oriented downhill, then stable directions
  Vec profile_coords;  // profile_dir expressed in the basis
  double c0 = 0.0;     // recorded, unused (flatness analysis out of scope)

  Vec coords(const Vec& x) const;       // basis^T (x - sigma)
  Vec from_coords(const Vec& xi) const;
  double level_cap() const { return level + box_mult * box_mult * delta * delta; }
};

enum class BoxRegion { core, ext_plus, ext_minus, outside };

SaddleBox make_saddle_box(const CriticalPoint& gate, double level, double eps,
                          double box_mult = 4.0);

BoxRegion box_region(const SaddleBox& box, const Vec& x);

// The committor-profile test function: a Gaussian integral along the profile
// direction in the core, blended linearly across the eta-thick enlarged
// boundary so the outer faces take the exact values 1 and 0.
double p_eval(const SaddleBox& box, const Vec& x);

// grad p and Laplacian of p, analytic, piecewise (one-sided in the
// extension slabs).
struct PDerivatives {
  Vec grad;
  double laplacian = 0.0;
};
PDerivatives p_derivatives(const SaddleBox& box, const Vec& x);

// Adjoint generator applied to p: eps lap p - (grad U - ell) . grad p.
double adjoint_on_p(const SaddleBox& box, const FieldEval& eval, const Vec& x);

struct BoundaryCheck {
  double max_err_plus = 0.0;    // |p - 1| on the outer plus face (inside the level cap)
  double max_err_minus = 0.0;   // |p| on the outer minus face
  double max_junction_jump = 0.0;
  size_t samples = 0;
};
BoundaryCheck boundary_check(const SaddleBox& box, const FieldEval& eval, size_t n);

struct SkewIdentityReport {
  double identity_residual = 0.0;   // |(v + L H^-1 v).e1 - (mu/l1)(v.e1)|
  double skew_residual = 0.0;       // max |HL + (HL)^T|
  double spectral_mismatch = 0.0;   // eig(H - L^T) vs eig(H + L), multiset
  double profile_alignment = 0.0;   // v . e1 (positive after orientation)
};
SkewIdentityReport skew_identity_check(const CriticalPoint& gate);

// Global blend Q: the plateau value on each well region of the level-cap set,
// the p-blend inside a gate box. Points outside the level-cap set are clamped
// to the nearest plateau (by steepest descent) and flagged.
struct QValue {
  double value = 0.0;
  bool outside_level_cap = false;
};
QValue q_eval(const std::vector<SaddleBox>& boxes, const LandscapeGraph& graph,
              const FieldEval& eval, const Vec& g_on_wells, const Vec& x);

// Throws ModelError when two gate boxes overlap (separating-axis test on the
// box axes).
void assert_boxes_disjoint(const std::vector<SaddleBox>& boxes);

struct ResidualReport {
  double eps = 0.0;
  double box_mult = 0.0;
  double value = 0.0;   // theta_eps * integral over the core box of |L* p| dmu
  size_t cells = 0;
};

// Normalized residual integral. z_shifted is the quadrature of
// e^{-(U - h)/eps} over the domain box with h the floor of the landscape;
// the time-scale factor cancels into this shifted normalization.
ResidualReport residual_quadrature(const SaddleBox& box, const FieldEval& eval,
                                   double z_shifted, double rel_tol = 1e-6);

}  // namespace metastable
