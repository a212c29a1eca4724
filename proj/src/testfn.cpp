#include "metastable/testfn.hpp"

#include <algorithm>
#include <cmath>

namespace metastable {

namespace {

double erf_cdf(double u, double mu, double eps) {
  // (1/C) int_{-inf}^{u} e^{-mu t^2 / 2 eps} dt with C = sqrt(2 pi eps / mu)
  return 0.5 * std::erfc(-u * std::sqrt(mu / (2.0 * eps)));
}

double gauss_density(double u, double mu, double eps) {
  const double c = std::sqrt(2.0 * M_PI * eps / mu);
  return std::exp(-mu * u * u / (2.0 * eps)) / c;
}

}  // namespace

Vec SaddleBox::coords(const Vec& x) const {
  const size_t d = x.size();
  Vec xi(d, 0.0);
  for (size_t k = 0; k < d; ++k)
    for (size_t i = 0; i < d; ++i)
      xi[k] += basis(i, k) * (x[i] - cp.location[i]);
  return xi;
}

Vec SaddleBox::from_coords(const Vec& xi) const {
  const size_t d = xi.size();
  Vec x = cp.location;
  for (size_t i = 0; i < d; ++i)
    for (size_t k = 0; k < d; ++k) x[i] += basis(i, k) * xi[k];
  return x;
}

SaddleBox make_saddle_box(const CriticalPoint& gate, double level, double eps,
                          double box_mult) {
  if (gate.kind != PointKind::index1_saddle || gate.profile_dir.empty())
    throw ModelError("make_saddle_box: gate must be a classified index-1 saddle");
  if (!(eps > 0.0 && eps < 1.0))
    throw ModelError("make_saddle_box: need 0 < eps < 1 for the delta scale");
  SaddleBox b;
  b.cp = gate;
  b.level = level;
  b.eps = eps;
  b.box_mult = box_mult;
  b.delta = std::sqrt(eps * std::log(1.0 / eps));
  b.eta = eps * eps;
  const size_t d = gate.location.size();
  b.half_width.resize(d);
  b.half_width[0] = box_mult * b.delta / std::sqrt(gate.unstable_curvature);
  for (size_t k = 1; k < d; ++k)
    b.half_width[k] = 2.0 * box_mult * b.delta / std::sqrt(gate.stable_curvatures[k - 1]);
  // Basis: oriented downhill first, then the stable eigenvectors.
  b.basis = Mat(d, d);
  for (size_t i = 0; i < d; ++i) b.basis(i, 0) = gate.downhill[i];
  for (size_t k = 1; k < d; ++k)
    for (size_t i = 0; i < d; ++i) b.basis(i, k) = gate.hess_eigvecs(i, k);
  b.profile_coords.resize(d);
  for (size_t k = 0; k < d; ++k) {
    double s = 0.0;
    for (size_t i = 0; i < d; ++i) s += b.basis(i, k) * gate.profile_dir[i];
    b.profile_coords[k] = s;
  }
  return b;
}

BoxRegion box_region(const SaddleBox& box, const Vec& x) {
  const Vec xi = box.coords(x);
  for (size_t k = 1; k < xi.size(); ++k)
    if (std::fabs(xi[k]) > box.half_width[k]) return BoxRegion::outside;
  const double b1 = box.half_width[0];
  if (std::fabs(xi[0]) <= b1) return BoxRegion::core;
  if (xi[0] > b1 && xi[0] <= b1 + box.eta) return BoxRegion::ext_plus;
  if (xi[0] < -b1 && xi[0] >= -b1 - box.eta) return BoxRegion::ext_minus;
  return BoxRegion::outside;
}

namespace {

double p_core_at(const SaddleBox& box, const Vec& xi) {
  // u = (x - sigma) . v in basis coordinates
  double u = 0.0;
  for (size_t k = 0; k < xi.size(); ++k) u += xi[k] * box.profile_coords[k];
  return erf_cdf(u, box.cp.escape_rate, box.eps);
}

Vec clamp_to_face(const Vec& xi, double face) {
  Vec xb = xi;
  xb[0] = face;
  return xb;
}

}  // namespace

double p_eval(const SaddleBox& box, const Vec& x) {
  const Vec xi = box.coords(x);
  const double b1 = box.half_width[0];
  for (size_t k = 1; k < xi.size(); ++k)
    if (std::fabs(xi[k]) > box.half_width[k] * (1.0 + 1e-12))
      throw ModelError("p_eval: point outside the saddle box");
  if (std::fabs(xi[0]) <= b1) return p_core_at(box, xi);
  if (xi[0] > b1 && xi[0] <= b1 + box.eta * (1.0 + 1e-12)) {
    const double pbar = p_core_at(box, clamp_to_face(xi, b1));
    return 1.0 + (xi[0] - b1 - box.eta) / box.eta * (1.0 - pbar);
  }
  if (xi[0] < -b1 && xi[0] >= -b1 - box.eta * (1.0 + 1e-12)) {
    const double pbar = p_core_at(box, clamp_to_face(xi, -b1));
    return (xi[0] + b1 + box.eta) / box.eta * pbar;
  }
  throw ModelError("p_eval: point outside the saddle box");
}

PDerivatives p_derivatives(const SaddleBox& box, const Vec& x) {
  const size_t d = x.size();
  const Vec xi = box.coords(x);
  const double b1 = box.half_width[0];
  const double mu = box.cp.escape_rate;
  Vec grad_xi(d, 0.0);
  double lap = 0.0;

  if (std::fabs(xi[0]) <= b1) {
    double u = 0.0;
    for (size_t k = 0; k < d; ++k) u += xi[k] * box.profile_coords[k];
    const double phi = gauss_density(u, mu, box.eps);
    for (size_t k = 0; k < d; ++k) grad_xi[k] = phi * box.profile_coords[k];
    lap = -(mu * u / box.eps) * phi;  // |v| = 1
  } else {
    const bool plus = xi[0] > 0.0;
    const double face = plus ? b1 : -b1;
    const Vec xb = clamp_to_face(xi, face);
    double ub = 0.0;
    for (size_t k = 0; k < d; ++k) ub += xb[k] * box.profile_coords[k];
    const double phib = gauss_density(ub, mu, box.eps);
    const double pbar = erf_cdf(ub, mu, box.eps);
    const double lin = plus ? (xi[0] - b1 - box.eta) / box.eta
                            : (xi[0] + b1 + box.eta) / box.eta;
    double vperp2 = 0.0;
    for (size_t k = 1; k < d; ++k) vperp2 += box.profile_coords[k] * box.profile_coords[k];
    if (plus) {
      grad_xi[0] = (1.0 - pbar) / box.eta;
      for (size_t k = 1; k < d; ++k) grad_xi[k] = -lin * phib * box.profile_coords[k];
      lap = -lin * (-(mu * ub / box.eps) * phib) * vperp2;
    } else {
      grad_xi[0] = pbar / box.eta;
      for (size_t k = 1; k < d; ++k) grad_xi[k] = lin * phib * box.profile_coords[k];
      lap = lin * (-(mu * ub / box.eps) * phib) * vperp2;
    }
  }

  PDerivatives out;
  out.laplacian = lap;
  out.grad.assign(d, 0.0);
  for (size_t i = 0; i < d; ++i)
    for (size_t k = 0; k < d; ++k) out.grad[i] += box.basis(i, k) * grad_xi[k];
  return out;
}

double adjoint_on_p(const SaddleBox& box, const FieldEval& eval, const Vec& x) {
  const PDerivatives pd = p_derivatives(box, x);
  const Vec g = eval.grad(x);
  const Vec l = eval.ell(x);
  double adv = 0.0;
  for (size_t k = 0; k < x.size(); ++k) adv += (g[k] - l[k]) * pd.grad[k];
  return box.eps * pd.laplacian - adv;
}

BoundaryCheck boundary_check(const SaddleBox& box, const FieldEval& eval, size_t n) {
  BoundaryCheck out;
  const size_t d = box.cp.location.size();
  Vec lo(d - 1), hi(d - 1);
  for (size_t k = 1; k < d; ++k) {
    lo[k - 1] = -box.half_width[k];
    hi[k - 1] = box.half_width[k];
  }
  const double cap = box.level_cap();
  const auto cross = d > 1 ? halton_box(n, lo, hi) : std::vector<Vec>(n, Vec{});
  for (const auto& c : cross) {
    Vec xi(d, 0.0);
    for (size_t k = 1; k < d; ++k) xi[k] = c[k - 1];
    // outer faces (exact boundary values, restricted to the level-cap set)
    xi[0] = box.half_width[0] + box.eta;
    Vec xp = box.from_coords(xi);
    if (eval.potential(xp) < cap) {
      out.max_err_plus = std::max(out.max_err_plus, std::fabs(p_eval(box, xp) - 1.0));
      ++out.samples;
    }
    xi[0] = -box.half_width[0] - box.eta;
    Vec xm = box.from_coords(xi);
    if (eval.potential(xm) < cap) {
      out.max_err_minus = std::max(out.max_err_minus, std::fabs(p_eval(box, xm)));
      ++out.samples;
    }
    // junction continuity: compare the two branch formulas on both seams
    for (double sgn : {1.0, -1.0}) {
      xi[0] = sgn * box.half_width[0];
      const double core = p_core_at(box, xi);
      double ext;
      if (sgn > 0.0) {
        const double pbar = p_core_at(box, clamp_to_face(xi, box.half_width[0]));
        ext = 1.0 + (xi[0] - box.half_width[0] - box.eta) / box.eta * (1.0 - pbar);
      } else {
        const double pbar = p_core_at(box, clamp_to_face(xi, -box.half_width[0]));
        ext = (xi[0] + box.half_width[0] + box.eta) / box.eta * pbar;
      }
      out.max_junction_jump = std::max(out.max_junction_jump, std::fabs(core - ext));
    }
  }
  return out;
}

SkewIdentityReport skew_identity_check(const CriticalPoint& gate) {
  if (gate.profile_dir.empty())
    throw ModelError("skew_identity_check: gate is not classified");
  const size_t d = gate.location.size();
  SkewIdentityReport rep;

  const Mat HL = matmul(gate.hess, gate.ell_jac);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j)
      rep.skew_residual = std::max(rep.skew_residual, std::fabs(HL(i, j) + HL(j, i)));

  const Vec hinv_v = lu_solve(gate.hess, gate.profile_dir);
  const Vec l_hinv_v = matvec(gate.ell_jac, hinv_v);
  const double lhs = dot(gate.profile_dir, gate.downhill) + dot(l_hinv_v, gate.downhill);
  const double rhs = gate.escape_rate / gate.unstable_curvature *
                     dot(gate.profile_dir, gate.downhill);
  rep.identity_residual = std::fabs(lhs - rhs);
  rep.profile_alignment = dot(gate.profile_dir, gate.downhill);

  const auto e_fwd = eigenvalues(add(gate.hess, gate.ell_jac));
  const auto e_adj = eigenvalues(add(gate.hess, transpose(gate.ell_jac), -1.0));
  for (size_t k = 0; k < e_fwd.size(); ++k)
    rep.spectral_mismatch =
        std::max(rep.spectral_mismatch, std::abs(e_fwd[k] - e_adj[k]));
  return rep;
}

void assert_boxes_disjoint(const std::vector<SaddleBox>& boxes) {
  auto project = [](const SaddleBox& b, const Vec& axis, double& lo, double& hi) {
    // support of the enlarged box on the axis
    double c = dot(b.cp.location, axis);
    double r = 0.0;
    const size_t d = b.cp.location.size();
    for (size_t k = 0; k < d; ++k) {
      Vec ek(d);
      for (size_t i = 0; i < d; ++i) ek[i] = b.basis(i, k);
      const double w = k == 0 ? b.half_width[0] + b.eta : b.half_width[k];
      r += w * std::fabs(dot(ek, axis));
    }
    lo = c - r;
    hi = c + r;
  };
  for (size_t a = 0; a < boxes.size(); ++a)
    for (size_t b = a + 1; b < boxes.size(); ++b) {
      bool separated = false;
      const size_t d = boxes[a].cp.location.size();
      for (size_t src = 0; src < 2 && !separated; ++src)
        for (size_t k = 0; k < d && !separated; ++k) {
          const SaddleBox& ref = src == 0 ? boxes[a] : boxes[b];
          Vec axis(d);
          for (size_t i = 0; i < d; ++i) axis[i] = ref.basis(i, k);
          double lo1, hi1, lo2, hi2;
          project(boxes[a], axis, lo1, hi1);
          project(boxes[b], axis, lo2, hi2);
          if (hi1 < lo2 || hi2 < lo1) separated = true;
        }
      if (!separated)
        throw ModelError("gate boxes overlap; reduce the box multiplier J or eps");
    }
}

QValue q_eval(const std::vector<SaddleBox>& boxes, const LandscapeGraph& graph,
              const FieldEval& eval, const Vec& g_on_wells, const Vec& x) {
  if (g_on_wells.size() != graph.wells.size())
    throw ModelError("q_eval: g must be given on every well");
  for (size_t b = 0; b < boxes.size(); ++b) {
    if (box_region(boxes[b], x) == BoxRegion::outside) continue;
    if (eval.potential(x) >= boxes[b].level_cap()) continue;  // clipped by K
    const Gate& gate = graph.gates[b];
    const double p = p_eval(boxes[b], x);
    QValue out;
    out.value = g_on_wells[gate.well_hi] +
                (g_on_wells[gate.well_lo] - g_on_wells[gate.well_hi]) * p;
    return out;
  }
  // Plateau region: the well component reached by steepest descent.
  LandscapeTolerances tol;
  const size_t m = descend_to_minimum(eval, x, graph.points, tol);
  size_t well = 0;
  for (size_t w = 0; w < graph.wells.size(); ++w)
    for (size_t mm : graph.wells[w].minima)
      if (mm == m) well = w;
  QValue out;
  out.value = g_on_wells[well];
  out.outside_level_cap =
      !boxes.empty() && eval.potential(x) >= boxes[0].level_cap();
  return out;
}

ResidualReport residual_quadrature(const SaddleBox& box, const FieldEval& eval,
                                   double z_shifted, double rel_tol) {
  const size_t d = box.cp.location.size();
  if (d != 2)
    throw ModelError("residual_quadrature: quadrature is implemented for d = 2");
  ResidualReport rep;
  rep.eps = box.eps;
  rep.box_mult = box.box_mult;
  const double cap = box.level_cap();

  auto integrand = [&](const Vec& xi) {
    const Vec x = box.from_coords(xi);
    const double u = eval.potential(x);
    if (u >= cap) return 0.0;  // outside the level-cap set K
    const double weight = std::exp(-(u - box.level) / box.eps);
    return std::fabs(adjoint_on_p(box, eval, x)) * weight;
  };
  Vec lo(d), hi(d);
  for (size_t k = 0; k < d; ++k) {
    lo[k] = -box.half_width[k];
    hi[k] = box.half_width[k];
  }
  const QuadResult q = integrate_box(integrand, lo, hi, rel_tol, 400000);
  // theta_eps int |L* p| dmu = int_B |L* p| e^{-(U-H)/eps} dx / Z-shifted,
  // with Z-shifted = int e^{-(U-floor)/eps} dx.
  rep.value = q.value / z_shifted;
  rep.cells = q.cells;
  return rep;
}

}  // namespace metastable
