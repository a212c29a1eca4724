#include "metastable/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace metastable {

GaussRule gauss_legendre(int n) {
  GaussRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev-like initial guess, then Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    r.nodes[n - 1 - i] = x;
    r.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
  return r;
}

namespace {

const GaussRule& rule_lo() {
  static const GaussRule r = gauss_legendre(7);
  return r;
}
const GaussRule& rule_hi() {
  static const GaussRule r = gauss_legendre(15);
  return r;
}

double tensor_eval(const ScalarField& f, const Vec& lo, const Vec& hi,
                   const GaussRule& rule) {
  const size_t d = lo.size();
  const size_t n = rule.nodes.size();
  size_t total = 1;
  for (size_t k = 0; k < d; ++k) total *= n;
  Vec mid(d), half(d);
  double jac = 1.0;
  for (size_t k = 0; k < d; ++k) {
    mid[k] = 0.5 * (lo[k] + hi[k]);
    half[k] = 0.5 * (hi[k] - lo[k]);
    jac *= half[k];
  }
  Vec x(d);
  double sum = 0.0;
  for (size_t idx = 0; idx < total; ++idx) {
    size_t rem = idx;
    double w = 1.0;
    for (size_t k = 0; k < d; ++k) {
      const size_t ik = rem % n;
      rem /= n;
      x[k] = mid[k] + half[k] * rule.nodes[ik];
      w *= rule.weights[ik];
    }
    sum += w * f(x);
  }
  return sum * jac;
}

struct Cell {
  Vec lo, hi;
  double value = 0.0;   // high-order estimate
  double err = 0.0;     // |high - low|
  size_t id = 0;        // deterministic tie-break
};

struct CellWorse {
  bool operator()(const Cell& a, const Cell& b) const {
    if (a.err != b.err) return a.err < b.err;
    return a.id > b.id;
  }
};

Cell make_cell(const ScalarField& f, Vec lo, Vec hi, size_t id) {
  Cell c;
  c.lo = std::move(lo);
  c.hi = std::move(hi);
  const double v_lo = tensor_eval(f, c.lo, c.hi, rule_lo());
  c.value = tensor_eval(f, c.lo, c.hi, rule_hi());
  c.err = std::fabs(c.value - v_lo);
  c.id = id;
  return c;
}

}  // namespace

QuadResult integrate_box(const ScalarField& f, const Vec& lo, const Vec& hi,
                         double rel_tol, size_t max_cells) {
  std::priority_queue<Cell, std::vector<Cell>, CellWorse> heap;
  size_t next_id = 0;
  heap.push(make_cell(f, lo, hi, next_id++));
  double total = heap.top().value;
  double total_err = heap.top().err;
  size_t cells = 1;
  while (total_err > rel_tol * std::max(std::fabs(total), 1e-300) &&
         total_err > 1e-300) {
    if (cells + 2 > max_cells) {
      std::ostringstream os;
      os << "integrate_box: no convergence after " << cells
         << " cells (total=" << total << ", error=" << total_err
         << ", requested rel_tol=" << rel_tol << ")";
      throw NumericError(os.str());
    }
    Cell worst = heap.top();
    heap.pop();
    total -= worst.value;
    total_err -= worst.err;
    size_t axis = 0;
    double widest = 0.0;
    for (size_t k = 0; k < worst.lo.size(); ++k) {
      const double w = worst.hi[k] - worst.lo[k];
      if (w > widest) {
        widest = w;
        axis = k;
      }
    }
    const double mid = 0.5 * (worst.lo[axis] + worst.hi[axis]);
    Vec hi_a = worst.hi;
    hi_a[axis] = mid;
    Vec lo_b = worst.lo;
    lo_b[axis] = mid;
    Cell a = make_cell(f, worst.lo, hi_a, next_id++);
    Cell b = make_cell(f, lo_b, worst.hi, next_id++);
    total += a.value + b.value;
    total_err += a.err + b.err;
    heap.push(std::move(a));
    heap.push(std::move(b));
    ++cells;
  }
  return {total, total_err, cells, true};
}

QuadResult integrate_ball(const ScalarField& f, const Vec& center, double radius,
                          double rel_tol, size_t max_cells) {
  const size_t d = center.size();
  if (d == 1) {
    auto g = [&](const Vec& t) {
      return f({center[0] + t[0]});
    };
    return integrate_box(g, {-radius}, {radius}, rel_tol, max_cells);
  }
  if (d == 2) {
    auto g = [&](const Vec& rt) {
      const double r = rt[0], th = rt[1];
      return r * f({center[0] + r * std::cos(th), center[1] + r * std::sin(th)});
    };
    return integrate_box(g, {0.0, 0.0}, {radius, 2.0 * M_PI}, rel_tol, max_cells);
  }
  if (d == 3) {
    auto g = [&](const Vec& rpt) {
      const double r = rpt[0], ph = rpt[1], th = rpt[2];
      const double sp = std::sin(ph);
      return r * r * sp *
             f({center[0] + r * sp * std::cos(th), center[1] + r * sp * std::sin(th),
                center[2] + r * std::cos(ph)});
    };
    return integrate_box(g, {0.0, 0.0, 0.0}, {radius, M_PI, 2.0 * M_PI}, rel_tol,
                         max_cells);
  }
  throw NumericError("integrate_ball: only d <= 3 is supported");
}

}  // namespace metastable
