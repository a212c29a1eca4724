#include "metastable/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace metastable {

namespace {

std::string point_str(const Vec& x) {
  std::ostringstream os;
  os << "(";
  for (size_t k = 0; k < x.size(); ++k) os << (k ? "," : "") << x[k];
  os << ")";
  return os.str();
}

bool lex_less(const Vec& a, const Vec& b) {
  for (size_t k = 0; k < a.size(); ++k) {
    if (a[k] < b[k]) return true;
    if (a[k] > b[k]) return false;
  }
  return false;
}

struct DescentField {
  const FieldEval& eval;
  bool full_drift;
  void operator()(const Vec& x, Vec& out) const {
    if (full_drift) {
      out.resize(x.size());
      eval.drift(x.data(), out.data());
    } else {
      out = eval.grad(x);
      for (double& v : out) v = -v;
    }
  }
};

Vec rk4_step(const DescentField& f, const Vec& x, double h) {
  Vec k1, k2, k3, k4;
  f(x, k1);
  f(axpy(0.5 * h, k1, x), k2);
  f(axpy(0.5 * h, k2, x), k3);
  f(axpy(h, k3, x), k4);
  Vec out = x;
  for (size_t i = 0; i < x.size(); ++i)
    out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

}  // namespace

std::vector<CriticalPoint> find_critical_points(const FieldEval& eval,
                                                int seeds_per_axis,
                                                const LandscapeTolerances& tol) {
  if (seeds_per_axis < 2) throw ModelError("find_critical_points: need >= 2 seeds per axis");
  const auto& spec = eval.spec();
  const int d = eval.dim();
  const double box_diag = dist2(spec.domain_lo, spec.domain_hi);

  std::vector<Vec> found;
  size_t total = 1;
  for (int k = 0; k < d; ++k) total *= static_cast<size_t>(seeds_per_axis);
  for (size_t s = 0; s < total; ++s) {
    Vec x(d);
    size_t rem = s;
    for (int k = 0; k < d; ++k) {
      const size_t ik = rem % seeds_per_axis;
      rem /= seeds_per_axis;
      x[k] = spec.domain_lo[k] +
             (spec.domain_hi[k] - spec.domain_lo[k]) * (ik + 0.5) / seeds_per_axis;
    }
    bool ok = false;
    for (int it = 0; it < tol.max_newton_iters; ++it) {
      const Vec g = eval.grad(x);
      if (norm2(g) < tol.newton_tol) {
        ok = true;
        break;
      }
      Vec step;
      try {
        step = lu_solve(eval.hessian(x), g);
      } catch (const NumericError&) {
        break;  // singular Hessian along the way: drop this seed
      }
      for (int k = 0; k < d; ++k) x[k] -= step[k];
      if (!std::isfinite(norm2(x)) || norm2(x) > 10.0 * (1.0 + box_diag)) break;
    }
    if (!ok) continue;
    bool dup = false;
    for (const auto& y : found)
      if (dist2(x, y) < tol.dedup_tol) {
        dup = true;
        break;
      }
    if (!dup) found.push_back(x);
  }

  std::sort(found.begin(), found.end(), lex_less);

  std::vector<CriticalPoint> out;
  for (auto& x : found) {
    CriticalPoint cp;
    cp.location = x;
    cp.value = eval.potential(x);
    cp.hess = eval.hessian(x);
    cp.ell_jac = eval.ell_jacobian(x);
    SymEigen eig = jacobi_eigen(cp.hess);
    cp.hess_eigvals = eig.values;
    cp.hess_eigvecs = eig.vectors;
    int negatives = 0;
    for (double v : eig.values) {
      if (std::fabs(v) < tol.morse_tol)
        throw ModelError("near-degenerate Hessian (Morse violation) at " +
                         point_str(x));
      if (v < 0.0) ++negatives;
    }
    cp.kind = negatives == 0  ? PointKind::minimum
              : negatives == 1 ? PointKind::index1_saddle
                               : PointKind::other;
    out.push_back(std::move(cp));
  }
  return out;
}

void classify_saddle(CriticalPoint& cp, const FieldEval& eval) {
  if (cp.kind != PointKind::index1_saddle)
    throw ModelError("classify_saddle: point at " + point_str(cp.location) +
                     " is not an index-1 saddle");
  const size_t d = cp.location.size();
  cp.unstable_curvature = -cp.hess_eigvals[0];
  cp.stable_curvatures.assign(cp.hess_eigvals.begin() + 1, cp.hess_eigvals.end());
  cp.downhill.resize(d);
  for (size_t i = 0; i < d; ++i) cp.downhill[i] = cp.hess_eigvecs(i, 0);

  cp.ell_jac = eval.ell_jacobian(cp.location);
  const Mat drift_hess = add(cp.hess, cp.ell_jac);                    // H + L
  const Mat profile_mat = add(cp.hess, transpose(cp.ell_jac), -1.0);  // H - L^T

  const double scale = std::max(1.0, max_abs(drift_hess));
  auto negative_real = [&](const Mat& m, const char* name) {
    auto eigs = eigenvalues(m);
    std::vector<std::complex<double>> neg;
    for (auto z : eigs)
      if (z.real() < -1e-9 * scale) neg.push_back(z);
    if (neg.size() != 1)
      throw ModelError(std::string(name) +
                       " does not have a unique negative-real-part eigenvalue at " +
                       point_str(cp.location));
    if (std::fabs(neg[0].imag()) > 1e-9 * scale)
      throw ModelError(std::string(name) + " negative eigenvalue is not real at " +
                       point_str(cp.location));
    return -neg[0].real();
  };
  const double mu_fwd = negative_real(drift_hess, "hess + D_ell");
  const double mu_adj = negative_real(profile_mat, "hess - D_ell^T");
  if (std::fabs(mu_fwd - mu_adj) > 1e-9 * scale)
    throw ModelError("similar matrices disagree on the negative eigenvalue at " +
                     point_str(cp.location));
  cp.escape_rate = mu_fwd;

  cp.profile_dir = eigenvector_for(profile_mat, -cp.escape_rate);
  const double align = dot(cp.profile_dir, cp.downhill);
  if (std::fabs(align) < 1e-8)
    throw ModelError("profile direction orthogonal to the downhill direction at " +
                     point_str(cp.location));
  if (align < 0.0)
    for (double& v : cp.profile_dir) v = -v;
}

double ek_constant(const CriticalPoint& saddle) {
  const double det = determinant(saddle.hess);
  if (det >= 0.0)
    throw ModelError("ek_constant: det(hess) >= 0, point at " +
                     point_str(saddle.location) + " is not index-1");
  return saddle.escape_rate / (2.0 * M_PI * std::sqrt(-det));
}

size_t descend_to_minimum(const FieldEval& eval, const Vec& x0,
                          const std::vector<CriticalPoint>& points,
                          const LandscapeTolerances& tol, bool use_full_drift) {
  DescentField f{eval, use_full_drift};
  Vec x = x0;
  double h = 1e-3;
  for (size_t step = 0; step < tol.max_descent_steps; ++step) {
    for (size_t p = 0; p < points.size(); ++p)
      if (points[p].kind == PointKind::minimum &&
          dist2(x, points[p].location) < tol.dedup_tol)
        return p;
    const Vec big = rk4_step(f, x, h);
    const Vec half = rk4_step(f, rk4_step(f, x, 0.5 * h), 0.5 * h);
    double err = 0.0;
    for (size_t i = 0; i < x.size(); ++i)
      err = std::max(err, std::fabs(big[i] - half[i]));
    const double target = 1e-10 * (1.0 + norm2(x));
    if (err > target && h > 1e-8) {
      h *= 0.5;
      continue;
    }
    x = half;
    if (err < 0.1 * target) h = std::min(h * 2.0, 0.25);
    if (!std::isfinite(norm2(x)))
      throw ModelError("descent diverged from " + point_str(x0));
  }
  throw ModelError("descent from " + point_str(x0) +
                   " failed to reach a minimum within the step budget");
}

LandscapeGraph build_landscape(std::vector<CriticalPoint> points, const FieldEval& eval,
                               double level, const LandscapeTolerances& tol) {
  LandscapeGraph g;
  g.level = level;
  g.valley_radius = eval.spec().valley_radius;

  std::vector<size_t> minima;
  for (size_t p = 0; p < points.size(); ++p) {
    for (double v : points[p].hess_eigvals)
      g.max_hessian_eigenvalue = std::max(g.max_hessian_eigenvalue, std::fabs(v));
    if (points[p].kind == PointKind::minimum && points[p].value < level)
      minima.push_back(p);
  }
  if (minima.empty())
    throw ModelError("build_landscape: no minimum below the cut level");

  // Saddles split by level: the ones at H are gate candidates, the ones
  // strictly below H merge minima into wells (sublevel-set connectivity of a
  // Morse function only changes at index-1 points).
  std::vector<size_t> level_saddles, below_saddles;
  for (size_t p = 0; p < points.size(); ++p) {
    if (points[p].kind == PointKind::minimum) continue;
    if (std::fabs(points[p].value - level) <= tol.level_tol) {
      if (points[p].kind != PointKind::index1_saddle)
        throw ModelError("saddle at the cut level is not index-1 at " +
                         point_str(points[p].location));
      classify_saddle(points[p], eval);
      level_saddles.push_back(p);
    } else if (points[p].value < level && points[p].kind == PointKind::index1_saddle) {
      below_saddles.push_back(p);
    }
  }

  std::vector<size_t> parent(points.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<size_t(size_t)> find = [&](size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };

  auto endpoints = [&](size_t s) {
    Vec e1(points[s].location.size());
    for (size_t i = 0; i < e1.size(); ++i) e1[i] = points[s].hess_eigvecs(i, 0);
    const Vec xp = axpy(tol.descent_offset, e1, points[s].location);
    const Vec xm = axpy(-tol.descent_offset, e1, points[s].location);
    return std::pair<size_t, size_t>{descend_to_minimum(eval, xp, points, tol),
                                     descend_to_minimum(eval, xm, points, tol)};
  };

  for (size_t s : below_saddles) {
    const auto [mp, mn] = endpoints(s);
    parent[find(mp)] = find(mn);
  }

  struct RawGate {
    size_t point;
    size_t min_pos;  // minimum reached from +downhill
    size_t min_neg;
  };
  std::vector<RawGate> raw;
  for (size_t s : level_saddles) {
    Vec e1 = points[s].downhill;
    const Vec xp = axpy(tol.descent_offset, e1, points[s].location);
    const Vec xm = axpy(-tol.descent_offset, e1, points[s].location);
    const size_t mp = descend_to_minimum(eval, xp, points, tol);
    const size_t mn = descend_to_minimum(eval, xm, points, tol);
    if (find(mp) == find(mn)) {
      g.internal_saddles.push_back(s);
      g.warnings.push_back("saddle at " + point_str(points[s].location) +
                           " connects a well to itself; excluded from the gate set");
      continue;
    }
    raw.push_back({s, mp, mn});
  }

  // Wells = union-find classes, ordered by the position of their lowest
  // minimum so indices are deterministic.
  std::vector<std::vector<size_t>> groups;
  {
    std::vector<std::pair<size_t, std::vector<size_t>>> byroot;
    for (size_t m : minima) {
      const size_t r = find(m);
      auto it = std::find_if(byroot.begin(), byroot.end(),
                             [&](const auto& pr) { return pr.first == r; });
      if (it == byroot.end())
        byroot.push_back({r, {m}});
      else
        it->second.push_back(m);
    }
    for (auto& pr : byroot) groups.push_back(std::move(pr.second));
  }
  auto group_key = [&](const std::vector<size_t>& grp) {
    double floor = points[grp[0]].value;
    for (size_t m : grp) floor = std::min(floor, points[m].value);
    const Vec* best = nullptr;
    for (size_t m : grp)
      if (points[m].value <= floor + tol.level_tol &&
          (best == nullptr || lex_less(points[m].location, *best)))
        best = &points[m].location;
    return *best;
  };
  std::sort(groups.begin(), groups.end(), [&](const auto& a, const auto& b) {
    return lex_less(group_key(a), group_key(b));
  });

  std::vector<long> well_of(points.size(), -1);
  for (const auto& grp : groups) {
    Well w;
    w.minima = grp;
    std::sort(w.minima.begin(), w.minima.end(), [&](size_t a, size_t b) {
      return lex_less(points[a].location, points[b].location);
    });
    w.floor = points[grp[0]].value;
    for (size_t m : grp) w.floor = std::min(w.floor, points[m].value);
    for (size_t m : w.minima)
      if (points[m].value <= w.floor + tol.level_tol) {
        w.deepest_minima.push_back(m);
        const double det = determinant(points[m].hess);
        if (det <= 0.0)
          throw ModelError("minimum with non-positive Hessian determinant at " +
                           point_str(points[m].location));
        w.gauss_mass += 1.0 / std::sqrt(det);
      }
    for (size_t m : grp) well_of[m] = static_cast<long>(g.wells.size());
    g.wells.push_back(std::move(w));
  }
  const size_t K = g.wells.size();

  g.gate_weight = Mat(K, K);
  for (const auto& rg : raw) {
    auto& cp = points[rg.point];
    size_t wi = static_cast<size_t>(well_of[rg.min_pos]);
    size_t wj = static_cast<size_t>(well_of[rg.min_neg]);
    if (wi > wj) {
      std::swap(wi, wj);
      // Direction convention: the downhill vector points into the
      // lower-indexed well; flip it and re-orient the profile direction.
      for (double& v : cp.downhill) v = -v;
      if (dot(cp.profile_dir, cp.downhill) < 0.0)
        for (double& v : cp.profile_dir) v = -v;
    }
    Gate gate;
    gate.point = rg.point;
    gate.well_lo = wi;
    gate.well_hi = wj;
    gate.rate_const = ek_constant(cp);
    g.gate_weight(wi, wj) += gate.rate_const;
    g.gate_weight(wj, wi) += gate.rate_const;
    g.gates.push_back(gate);
  }
  std::sort(g.gates.begin(), g.gates.end(), [&](const Gate& a, const Gate& b) {
    if (a.well_lo != b.well_lo) return a.well_lo < b.well_lo;
    if (a.well_hi != b.well_hi) return a.well_hi < b.well_hi;
    return lex_less(points[a.point].location, points[b.point].location);
  });

  g.total_gate_weight.assign(K, 0.0);
  for (size_t i = 0; i < K; ++i)
    for (size_t j = 0; j < K; ++j) g.total_gate_weight[i] += g.gate_weight(i, j);

  g.floor = g.wells[0].floor;
  for (const auto& w : g.wells) g.floor = std::min(g.floor, w.floor);
  for (size_t i = 0; i < K; ++i)
    if (g.wells[i].floor <= g.floor + tol.level_tol) g.deepest.push_back(i);
  for (size_t i : g.deepest) g.gauss_mass_star += g.wells[i].gauss_mass;

  if (!(level > g.floor))
    throw ModelError("cut level is not above the minimum of the potential");

  // Gate-connected components of the well graph.
  std::vector<long> comp(K, -1);
  for (size_t i = 0; i < K; ++i) {
    if (comp[i] >= 0) continue;
    const long c = static_cast<long>(g.components.size());
    std::vector<size_t> stack = {i}, members;
    comp[i] = c;
    while (!stack.empty()) {
      const size_t u = stack.back();
      stack.pop_back();
      members.push_back(u);
      for (size_t v = 0; v < K; ++v)
        if (g.gate_weight(u, v) > 0.0 && comp[v] < 0) {
          comp[v] = c;
          stack.push_back(v);
        }
    }
    std::sort(members.begin(), members.end());
    g.components.push_back(std::move(members));
  }
  g.connected = g.components.size() == 1;
  if (!g.connected)
    g.warnings.push_back(
        "closure of the sublevel set is disconnected; constants are reported per "
        "gate-connected component");
  if (g.deepest.size() == 1)
    g.warnings.push_back("only one deepest well: Markov chain description is trivial");

  // Valley-radius sanity: the 2*r0 ball should stay inside the well and
  // contain no other critical point. Violations are warnings, not errors.
  const double r2 = 2.0 * g.valley_radius;
  for (size_t i : g.deepest) {
    for (size_t m : g.wells[i].deepest_minima) {
      const Vec& c = points[m].location;
      for (size_t p = 0; p < points.size(); ++p)
        if (p != m && dist2(points[p].location, c) <= r2) {
          g.warnings.push_back("2*r0 ball around " + point_str(c) +
                               " contains another critical point");
          break;
        }
      bool leaves = false;
      for (const auto& u : halton_box(64, Vec(c.size(), -1.0), Vec(c.size(), 1.0))) {
        const double nn = norm2(u);
        if (nn < 1e-3) continue;
        Vec probe = c;
        for (size_t k = 0; k < c.size(); ++k) probe[k] += r2 * u[k] / nn;
        if (eval.potential(probe) >= level) {
          leaves = true;
          break;
        }
      }
      if (leaves)
        g.warnings.push_back("2*r0 ball around " + point_str(c) +
                             " leaves the well; valley radius exceeds the model bound");
    }
  }

  g.points = std::move(points);
  return g;
}

std::optional<size_t> LandscapeGraph::valley_of(const Vec& x) const {
  for (size_t di = 0; di < deepest.size(); ++di) {
    const Well& w = wells[deepest[di]];
    for (size_t m : w.deepest_minima)
      if (dist2(x, points[m].location) <= valley_radius) return di;
  }
  return std::nullopt;
}

Vec LandscapeGraph::valley_anchor(size_t deep_index) const {
  const Well& w = wells[deepest[deep_index]];
  return points[w.deepest_minima[0]].location;
}

LaplaceReport laplace_check(const FieldEval& eval, const LandscapeGraph& graph,
                            double eps, double rel_tol) {
  const int d = eval.dim();
  if (d > 3) throw ModelError("laplace_check: quadrature supports d <= 3 only");
  LaplaceReport rep;
  rep.epsilon = eps;
  const double h = graph.floor;
  const auto& spec = eval.spec();

  // Everything is measured against the shifted density e^{-(U-h)/eps} <= 1.
  auto density = [&](const Vec& x) { return std::exp(-(eval.potential(x) - h) / eps); };

  for (const auto& pt : halton_box(256, spec.domain_lo, spec.domain_hi)) {
    Vec y = pt;
    size_t snap = 0;
    double best = 1e300;
    for (int k = 0; k < d; ++k) {
      const double dlo = y[k] - spec.domain_lo[k], dhi = spec.domain_hi[k] - y[k];
      if (std::min(dlo, dhi) < best) {
        best = std::min(dlo, dhi);
        snap = k;
      }
    }
    const double dlo = y[snap] - spec.domain_lo[snap];
    const double dhi = spec.domain_hi[snap] - y[snap];
    y[snap] = dlo < dhi ? spec.domain_lo[snap] : spec.domain_hi[snap];
    rep.boundary_density = std::max(rep.boundary_density, density(y));
  }
  if (rep.boundary_density > 1e-10)
    rep.warnings.push_back(
        "Gibbs density is not negligible on the domain boundary; epsilon too large "
        "for this box");

  const QuadResult z = integrate_box(density, spec.domain_lo, spec.domain_hi, rel_tol);
  const double z_pred = std::pow(2.0 * M_PI * eps, 0.5 * d) * graph.gauss_mass_star;
  rep.z_ratio = z.value / z_pred;

  double covered = 0.0;
  for (size_t di = 0; di < graph.deepest.size(); ++di) {
    const Well& w = graph.wells[graph.deepest[di]];
    double mass = 0.0;
    for (size_t m : w.deepest_minima) {
      const QuadResult q = integrate_ball(density, graph.points[m].location,
                                          graph.valley_radius, rel_tol);
      mass += q.value;
    }
    const double mu = mass / z.value;
    rep.valley_mass.push_back(mu);
    rep.valley_ratio.push_back(mu / (w.gauss_mass / graph.gauss_mass_star));
    covered += mu;
  }
  rep.delta_mass = 1.0 - covered;
  return rep;
}

}  // namespace metastable
