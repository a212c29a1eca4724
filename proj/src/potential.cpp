#include "metastable/potential.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "json.hpp"

namespace metastable {

using nlohmann::json;

namespace {

json require(const json& j, const char* key, const char* where) {
  if (!j.contains(key)) {
    std::ostringstream os;
    os << "missing key '" << where << "." << key << "'";
    throw ParseError(os.str());
  }
  return j.at(key);
}

Vec to_vec(const json& j, const char* where) {
  if (!j.is_array()) throw ParseError(std::string(where) + ": expected an array");
  Vec v;
  for (const auto& e : j) {
    if (!e.is_number()) throw ParseError(std::string(where) + ": expected numbers");
    v.push_back(e.get<double>());
  }
  return v;
}

}  // namespace

PotentialSpec parse_spec(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("configuration parse error: ") + e.what());
  }

  PotentialSpec s;
  const json jd = require(j, "dimension", "");
  if (!jd.is_number_integer() || jd.get<int>() < 1)
    throw ParseError("dimension: expected an integer >= 1");
  s.dimension = jd.get<int>();

  const json pot = require(j, "potential", "");
  const json terms = require(pot, "terms", "potential");
  if (!terms.is_array() || terms.empty())
    throw ParseError("potential.terms: expected a non-empty array");
  int idx = 0;
  for (const auto& t : terms) {
    MonomialTerm term;
    term.coeff = require(t, "coeff", "potential.terms[]").get<double>();
    const json pw = require(t, "powers", "potential.terms[]");
    for (const auto& p : pw) {
      if (!p.is_number_integer() || p.get<int>() < 0)
        throw ParseError("potential.terms[].powers: expected non-negative integers");
      term.powers.push_back(p.get<int>());
    }
    if (static_cast<int>(term.powers.size()) != s.dimension) {
      std::ostringstream os;
      os << "potential.terms[" << idx << "]: exponent vector has length "
         << term.powers.size() << ", expected dimension " << s.dimension;
      throw ParseError(os.str());
    }
    s.u_terms.push_back(std::move(term));
    ++idx;
  }

  const json ell = require(j, "ell", "");
  const std::string kind = require(ell, "kind", "ell").get<std::string>();
  if (kind == "zero") {
    s.ell_kind = EllKind::zero;
  } else if (kind == "skew_poly") {
    s.ell_kind = EllKind::skew_poly;
    const json jm = require(ell, "J", "ell");
    if (!jm.is_array() || jm.empty())
      throw ParseError("ell.J: expected a non-empty array of matrices");
    int k = 0;
    for (const auto& mj : jm) {
      Mat J(s.dimension, s.dimension);
      if (!mj.is_array() || static_cast<int>(mj.size()) != s.dimension)
        throw ParseError("ell.J[" + std::to_string(k) + "]: expected " +
                         std::to_string(s.dimension) + " rows");
      for (int r = 0; r < s.dimension; ++r) {
        const Vec row = to_vec(mj.at(r), "ell.J[][]");
        if (static_cast<int>(row.size()) != s.dimension)
          throw ParseError("ell.J[" + std::to_string(k) + "]: row " +
                           std::to_string(r + 1) + " has wrong length");
        for (int c = 0; c < s.dimension; ++c) J(r, c) = row[c];
      }
      // Skew-symmetry must hold exactly on the parsed decimals; the lower
      // entry is reported as the offender.
      for (int r = 0; r < s.dimension; ++r)
        for (int c = 0; c <= r; ++c)
          if (J(r, c) + J(c, r) != 0.0) {
            std::ostringstream os;
            os << "matrix J_" << k << " not skew-symmetric at (" << r + 1 << ","
               << c + 1 << ")";
            throw ParseError(os.str());
          }
      s.j_coeffs.push_back(std::move(J));
      ++k;
    }
  } else {
    throw ParseError("ell.kind: expected 'zero' or 'skew_poly', got '" + kind + "'");
  }

  const json dom = require(j, "domain", "");
  s.domain_lo = to_vec(require(dom, "lower", "domain"), "domain.lower");
  s.domain_hi = to_vec(require(dom, "upper", "domain"), "domain.upper");
  if (static_cast<int>(s.domain_lo.size()) != s.dimension ||
      static_cast<int>(s.domain_hi.size()) != s.dimension)
    throw ParseError("domain bounds must have length equal to dimension");
  for (int k = 0; k < s.dimension; ++k)
    if (!(s.domain_lo[k] < s.domain_hi[k]))
      throw ParseError("domain.lower must be strictly below domain.upper");

  s.level_h = require(j, "level_H", "").get<double>();
  s.epsilons = to_vec(require(j, "epsilons", ""), "epsilons");
  for (double e : s.epsilons)
    if (!(e > 0.0)) throw ParseError("epsilons: entries must be positive");
  s.valley_radius = require(j, "r0", "").get<double>();
  if (!(s.valley_radius > 0.0)) throw ParseError("r0: must be positive");
  s.seed = require(j, "seed", "").get<uint64_t>();
  return s;
}

std::string serialize_spec(const PotentialSpec& s) {
  json j;
  j["dimension"] = s.dimension;
  json terms = json::array();
  for (const auto& t : s.u_terms) terms.push_back({{"coeff", t.coeff}, {"powers", t.powers}});
  j["potential"]["terms"] = terms;
  j["ell"]["kind"] = s.ell_kind == EllKind::zero ? "zero" : "skew_poly";
  if (s.ell_kind == EllKind::skew_poly) {
    json mats = json::array();
    for (const auto& J : s.j_coeffs) {
      json rows = json::array();
      for (size_t r = 0; r < J.n; ++r) {
        json row = json::array();
        for (size_t c = 0; c < J.m; ++c) row.push_back(J(r, c));
        rows.push_back(row);
      }
      mats.push_back(rows);
    }
    j["ell"]["J"] = mats;
  }
  j["domain"]["lower"] = s.domain_lo;
  j["domain"]["upper"] = s.domain_hi;
  j["level_H"] = s.level_h;
  j["epsilons"] = s.epsilons;
  j["r0"] = s.valley_radius;
  j["seed"] = s.seed;
  return j.dump(2);
}

bool spec_equal(const PotentialSpec& a, const PotentialSpec& b) {
  if (a.dimension != b.dimension || a.u_terms != b.u_terms || a.ell_kind != b.ell_kind ||
      a.domain_lo != b.domain_lo || a.domain_hi != b.domain_hi ||
      a.level_h != b.level_h || a.epsilons != b.epsilons ||
      a.valley_radius != b.valley_radius || a.seed != b.seed)
    return false;
  if (a.j_coeffs.size() != b.j_coeffs.size()) return false;
  for (size_t k = 0; k < a.j_coeffs.size(); ++k)
    if (a.j_coeffs[k].a != b.j_coeffs[k].a) return false;
  return true;
}

double FieldEval::TermList::eval_table(const double (*pw)[16], int d) const {
  double sum = 0.0;
  const int n = static_cast<int>(coeff.size());
  for (int t = 0; t < n; ++t) {
    double v = coeff[t];
    const int* e = powers.data() + static_cast<size_t>(t) * d;
    for (int k = 0; k < d; ++k) v *= pw[k][e[k]];
    sum += v;
  }
  return sum;
}

double FieldEval::TermList::eval(const double* x, int d) const {
  double sum = 0.0;
  const int n = static_cast<int>(coeff.size());
  for (int t = 0; t < n; ++t) {
    double v = coeff[t];
    const int* pw = powers.data() + static_cast<size_t>(t) * d;
    for (int k = 0; k < d; ++k) {
      int p = pw[k];
      const double xk = x[k];
      while (p-- > 0) v *= xk;
    }
    sum += v;
  }
  return sum;
}

FieldEval::FieldEval(const PotentialSpec& spec) : d_(spec.dimension), spec_(spec) {
  auto push = [this](TermList& list, double coeff, const std::vector<int>& pw) {
    if (coeff == 0.0) return;
    list.coeff.push_back(coeff);
    for (int k = 0; k < d_; ++k) list.powers.push_back(pw[k]);
  };

  grad_.resize(d_);
  hess_.resize(static_cast<size_t>(d_) * d_);
  for (const auto& term : spec.u_terms) {
    push(u_, term.coeff, term.powers);
    for (int i = 0; i < d_; ++i) {
      if (term.powers[i] == 0) continue;
      std::vector<int> pw = term.powers;
      const double ci = term.coeff * pw[i];
      pw[i] -= 1;
      push(grad_[i], ci, pw);
      for (int j = 0; j < d_; ++j) {
        if (pw[j] == 0) continue;
        std::vector<int> pw2 = pw;
        const double cij = ci * pw2[j];
        pw2[j] -= 1;
        push(hess_[static_cast<size_t>(i) * d_ + j], cij, pw2);
      }
    }
  }

  fast_ = d_ <= 8;
  for (const auto& term : spec.u_terms)
    for (int k = 0; k < d_ && k < 8; ++k) {
      if (term.powers[k] > 15) fast_ = false;
      else if (k < 8) max_pow_[k] = std::max(max_pow_[k], term.powers[k]);
    }

  // J'(a) term-wise; used by the exact Jacobian of ell.
  for (size_t k = 1; k < spec_.j_coeffs.size(); ++k) {
    Mat Jk = spec_.j_coeffs[k];
    for (double& v : Jk.a) v *= static_cast<double>(k);
    j_deriv_.push_back(std::move(Jk));
  }
}

double FieldEval::potential(const Vec& x) const { return u_.eval(x.data(), d_); }

void FieldEval::grad_raw(const double* x, double* out) const {
  for (int i = 0; i < d_; ++i) out[i] = grad_[i].eval(x, d_);
}

Vec FieldEval::grad(const Vec& x) const {
  Vec g(d_);
  grad_raw(x.data(), g.data());
  return g;
}

Mat FieldEval::hessian(const Vec& x) const {
  Mat H(d_, d_);
  for (int i = 0; i < d_; ++i)
    for (int j = i; j < d_; ++j) {
      const double v = hess_[static_cast<size_t>(i) * d_ + j].eval(x.data(), d_);
      H(i, j) = v;
      H(j, i) = v;
    }
  return H;
}

void FieldEval::ell_raw(double u, const double* g, double* out) const {
  for (int i = 0; i < d_; ++i) out[i] = 0.0;
  if (spec_.ell_kind == EllKind::zero) return;
  // (sum_k J_k u^k) g by Horner over the matrix coefficients.
  const int p = static_cast<int>(spec_.j_coeffs.size());
  double acc[8];
  Vec accv;
  double* a = acc;
  if (d_ > 8) {
    accv.resize(d_);
    a = accv.data();
  }
  for (int i = 0; i < d_; ++i) a[i] = 0.0;
  for (int k = p - 1; k >= 0; --k) {
    const Mat& Jk = spec_.j_coeffs[k];
    for (int i = 0; i < d_; ++i) {
      double row = 0.0;
      for (int j = 0; j < d_; ++j) row += Jk(i, j) * g[j];
      a[i] = a[i] * u + row;
    }
  }
  for (int i = 0; i < d_; ++i) out[i] = a[i];
}

Vec FieldEval::ell(const Vec& x) const {
  Vec e(d_, 0.0);
  if (spec_.ell_kind == EllKind::zero) return e;
  const double u = potential(x);
  const Vec g = grad(x);
  ell_raw(u, g.data(), e.data());
  return e;
}

Mat FieldEval::ell_jacobian(const Vec& x) const {
  Mat L(d_, d_);
  if (spec_.ell_kind == EllKind::zero) return L;
  const double u = potential(x);
  const Vec g = grad(x);
  const Mat H = hessian(x);
  // D ell = (J'(u) g) g^T + J(u) H, by product and chain rule.
  Mat Ju(d_, d_), Jpu(d_, d_);
  double uk = 1.0;
  for (size_t k = 0; k < spec_.j_coeffs.size(); ++k) {
    for (size_t i = 0; i < Ju.a.size(); ++i) Ju.a[i] += spec_.j_coeffs[k].a[i] * uk;
    uk *= u;
  }
  uk = 1.0;
  for (size_t k = 0; k < j_deriv_.size(); ++k) {
    for (size_t i = 0; i < Jpu.a.size(); ++i) Jpu.a[i] += j_deriv_[k].a[i] * uk;
    uk *= u;
  }
  const Vec jg = matvec(Jpu, g);
  const Mat JH = matmul(Ju, H);
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j) L(i, j) = jg[i] * g[j] + JH(i, j);
  return L;
}

void FieldEval::drift(const double* x, double* out) const {
  if (fast_) {
    double pw[8][16];
    for (int k = 0; k < d_; ++k) {
      pw[k][0] = 1.0;
      for (int p = 1; p <= max_pow_[k]; ++p) pw[k][p] = pw[k][p - 1] * x[k];
    }
    double g[8];
    for (int i = 0; i < d_; ++i) g[i] = grad_[i].eval_table(pw, d_);
    if (spec_.ell_kind == EllKind::zero) {
      for (int i = 0; i < d_; ++i) out[i] = -g[i];
      return;
    }
    const double u = u_.eval_table(pw, d_);
    double e[8];
    ell_raw(u, g, e);
    for (int i = 0; i < d_; ++i) out[i] = -(g[i] + e[i]);
    return;
  }
  double gbuf[8];
  double* g = gbuf;
  Vec gvec;
  if (d_ > 8) {
    gvec.resize(d_);
    g = gvec.data();
  }
  grad_raw(x, g);
  if (spec_.ell_kind == EllKind::zero) {
    for (int i = 0; i < d_; ++i) out[i] = -g[i];
    return;
  }
  const double u = u_.eval(x, d_);
  double ebuf[8];
  double* e = ebuf;
  Vec evec;
  if (d_ > 8) {
    evec.resize(d_);
    e = evec.data();
  }
  ell_raw(u, g, e);
  for (int i = 0; i < d_; ++i) out[i] = -(g[i] + e[i]);
}

StructureReport check_structure_fields(const std::function<Vec(const Vec&)>& grad_fn,
                                       const std::function<Vec(const Vec&)>& ell_fn,
                                       const std::function<Mat(const Vec&)>& jac_fn,
                                       const std::vector<Vec>& points, double tol) {
  StructureReport rep;
  rep.tol = tol;
  rep.samples = points.size();
  for (const auto& x : points) {
    const Vec g = grad_fn(x);
    const Vec e = ell_fn(x);
    rep.max_orthogonality = std::max(rep.max_orthogonality, std::fabs(dot(g, e)));
    const Mat L = jac_fn(x);
    double tr = 0.0;
    for (size_t i = 0; i < L.n; ++i) tr += L(i, i);
    rep.max_divergence = std::max(rep.max_divergence, std::fabs(tr));
  }
  rep.pass = rep.max_orthogonality <= tol && rep.max_divergence <= tol;
  return rep;
}

StructureReport check_structure(const FieldEval& eval, const std::vector<Vec>& points,
                                double tol) {
  StructureReport rep = check_structure_fields(
      [&](const Vec& x) { return eval.grad(x); },
      [&](const Vec& x) { return eval.ell(x); },
      [&](const Vec& x) { return eval.ell_jacobian(x); }, points, tol);
  rep.warnings = growth_warnings(eval);
  return rep;
}

std::vector<std::string> growth_warnings(const FieldEval& eval) {
  std::vector<std::string> warn;
  const auto& s = eval.spec();
  const int d = s.dimension;
  Vec center(d);
  for (int k = 0; k < d; ++k) center[k] = 0.5 * (s.domain_lo[k] + s.domain_hi[k]);
  const long corners = 1l << d;
  for (long c = 0; c < corners; ++c) {
    Vec corner(d), inner(d);
    for (int k = 0; k < d; ++k) {
      corner[k] = (c >> k) & 1 ? s.domain_hi[k] : s.domain_lo[k];
      inner[k] = center[k] + 0.8 * (corner[k] - center[k]);
    }
    if (eval.potential(corner) < eval.potential(inner)) {
      std::ostringstream os;
      os << "potential decreases toward domain corner (";
      for (int k = 0; k < d; ++k) os << (k ? "," : "") << corner[k];
      os << "); growth conditions look violated on this box";
      warn.push_back(os.str());
    }
  }
  return warn;
}

double default_fd_step(const Vec& x) { return 1e-5 * (1.0 + norm2(x)); }

DerivativeReport derivative_selfcheck(const FieldEval& eval, const Vec& x, double h) {
  if (!(h > 0.0)) throw ModelError("derivative_selfcheck: h must be positive");
  const int d = eval.dim();
  DerivativeReport rep;
  rep.h = h;
  auto rel = [](double got, double want) {
    return std::fabs(got - want) / std::max(1.0, std::fabs(want));
  };

  const Vec g = eval.grad(x);
  const Mat H = eval.hessian(x);
  for (int k = 0; k < d; ++k) {
    Vec xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const double fd = (eval.potential(xp) - eval.potential(xm)) / (2.0 * h);
    rep.grad_rel = std::max(rep.grad_rel, rel(fd, g[k]));
    const double fd2 =
        (eval.potential(xp) - 2.0 * eval.potential(x) + eval.potential(xm)) / (h * h);
    rep.hess_rel = std::max(rep.hess_rel, rel(fd2, H(k, k)));
    for (int l = k + 1; l < d; ++l) {
      Vec xpp = x, xpm = x, xmp = x, xmm = x;
      xpp[k] += h; xpp[l] += h;
      xpm[k] += h; xpm[l] -= h;
      xmp[k] -= h; xmp[l] += h;
      xmm[k] -= h; xmm[l] -= h;
      const double fdkl = (eval.potential(xpp) - eval.potential(xpm) -
                           eval.potential(xmp) + eval.potential(xmm)) /
                          (4.0 * h * h);
      rep.hess_rel = std::max(rep.hess_rel, rel(fdkl, H(k, l)));
    }
  }

  const Mat L = eval.ell_jacobian(x);
  for (int m = 0; m < d; ++m) {
    Vec xp = x, xm = x;
    xp[m] += h;
    xm[m] -= h;
    const Vec ep = eval.ell(xp), em = eval.ell(xm);
    for (int i = 0; i < d; ++i) {
      const double fd = (ep[i] - em[i]) / (2.0 * h);
      rep.ell_jac_rel = std::max(rep.ell_jac_rel, rel(fd, L(i, m)));
    }
  }
  return rep;
}

std::vector<Vec> default_structure_samples(const PotentialSpec& spec, size_t n) {
  return halton_box(n, spec.domain_lo, spec.domain_hi);
}

}  // namespace metastable
