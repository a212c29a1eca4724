#include "metastable/chain.hpp"

#include <algorithm>
#include <cmath>

namespace metastable {

namespace {

bool contains(const std::vector<size_t>& set, size_t v) {
  return std::find(set.begin(), set.end(), v) != set.end();
}

// Connected components of the weight graph.
std::vector<std::vector<size_t>> components(const Mat& w) {
  const size_t n = w.n;
  std::vector<long> comp(n, -1);
  std::vector<std::vector<size_t>> out;
  for (size_t i = 0; i < n; ++i) {
    if (comp[i] >= 0) continue;
    std::vector<size_t> stack = {i}, members;
    comp[i] = static_cast<long>(out.size());
    while (!stack.empty()) {
      const size_t u = stack.back();
      stack.pop_back();
      members.push_back(u);
      for (size_t v = 0; v < n; ++v)
        if (w(u, v) > 0.0 && comp[v] < 0) {
          comp[v] = comp[i];
          stack.push_back(v);
        }
    }
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  return out;
}

}  // namespace

Vec FiniteChain::apply_generator(const Vec& f) const {
  const size_t n = size();
  Vec out(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < n; ++j)
      if (j != i) s += weight(i, j) * (f[j] - f[i]);
    out[i] = s / measure[i];
  }
  return out;
}

ChainBuildResult chain_from_landscape(const LandscapeGraph& graph) {
  ChainBuildResult out;
  const size_t K = graph.wells.size();
  out.chain.weight = graph.gate_weight;
  double total = 0.0;
  for (double w : graph.total_gate_weight) total += w;
  out.chain.measure.assign(K, 0.0);
  if (total <= 0.0) {
    out.trivial = true;
    out.notices.push_back(
        "no gates at the cut level; each well is its own component and the chain "
        "is trivial");
    out.chain.measure.assign(K, 1.0 / static_cast<double>(K));
    return out;
  }
  for (size_t i = 0; i < K; ++i)
    out.chain.measure[i] = graph.total_gate_weight[i] / total;
  for (size_t i = 0; i < K; ++i)
    if (graph.total_gate_weight[i] == 0.0) {
      out.trivial = true;
      out.notices.push_back("well " + std::to_string(i + 1) +
                            " has no gate; handled per component");
      out.chain.measure[i] = 1.0;  // keeps rates finite; the state is isolated
    }
  return out;
}

PotentialSolve equilibrium_potential(const FiniteChain& chain,
                                     const std::vector<size_t>& A,
                                     const std::vector<size_t>& B) {
  const size_t n = chain.size();
  if (A.empty() || B.empty())
    throw ModelError("equilibrium_potential: A and B must be non-empty");
  for (size_t a : A)
    if (contains(B, a)) throw ModelError("equilibrium_potential: A and B overlap");

  PotentialSolve out;
  out.values.assign(n, 0.0);
  std::vector<int> role(n, 0);  // 0 interior, 1 in A, 2 in B
  for (size_t a : A) role[a] = 1;
  for (size_t b : B) role[b] = 2;
  for (size_t i = 0; i < n; ++i) out.values[i] = role[i] == 1 ? 1.0 : 0.0;

  for (const auto& comp : components(chain.weight)) {
    bool touches = false;
    for (size_t i : comp) touches = touches || role[i] != 0;
    if (!touches) {
      // Singular block: any constant is harmonic; record and keep 0.
      for (size_t i : comp) out.floating.push_back(i);
      continue;
    }
    std::vector<size_t> interior;
    for (size_t i : comp)
      if (role[i] == 0) interior.push_back(i);
    if (interior.empty()) continue;
    const size_t m = interior.size();
    Mat L(m, m);
    Vec rhs(m, 0.0);
    for (size_t r = 0; r < m; ++r) {
      const size_t i = interior[r];
      double diag = 0.0;
      for (size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = chain.weight(i, j);
        if (w == 0.0) continue;
        diag += w;
        if (role[j] == 0) {
          const auto it = std::find(interior.begin(), interior.end(), j);
          L(r, static_cast<size_t>(it - interior.begin())) -= w;
        } else if (role[j] == 1) {
          rhs[r] += w;
        }
      }
      L(r, r) += diag;
    }
    const Vec sol = lu_solve(L, rhs);
    for (size_t r = 0; r < m; ++r) out.values[interior[r]] = sol[r];
  }
  return out;
}

double dirichlet_form(const FiniteChain& chain, const Vec& f, const Vec& g) {
  const size_t n = chain.size();
  double edge = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      edge += chain.weight(i, j) * (f[i] - f[j]) * (g[i] - g[j]);
  // Cross-check against the generator form sum_i mu_i f_i (-Lg)_i.
  const Vec lg = chain.apply_generator(g);
  double gen = 0.0;
  for (size_t i = 0; i < n; ++i) gen -= chain.measure[i] * f[i] * lg[i];
  double scale = 1.0;
  for (size_t i = 0; i < n; ++i) scale = std::max(scale, std::fabs(f[i]) + std::fabs(g[i]));
  if (std::fabs(edge - gen) > 1e-9 * scale * std::max(1.0, max_abs(chain.weight)))
    throw NumericError("dirichlet_form: edge and generator forms disagree");
  return edge;
}

double capacity(const FiniteChain& chain, const std::vector<size_t>& A,
                const std::vector<size_t>& B) {
  if (A.empty() || B.empty()) return 0.0;  // cap(., empty) convention
  const PotentialSolve h = equilibrium_potential(chain, A, B);
  return dirichlet_form(chain, h.values, h.values);
}

BetaMatrix beta_matrix(const FiniteChain& x_chain, const std::vector<size_t>& deepest) {
  if (deepest.size() < 2) throw ModelError("beta_matrix: need at least two deepest wells");
  BetaMatrix out;
  out.states = deepest;
  const size_t s = deepest.size();
  out.value = Mat(s, s);

  auto rest = [&](const std::vector<size_t>& excl) {
    std::vector<size_t> r;
    for (size_t v : deepest)
      if (!contains(excl, v)) r.push_back(v);
    return r;
  };
  Vec single(s);
  for (size_t a = 0; a < s; ++a)
    single[a] = capacity(x_chain, {deepest[a]}, rest({deepest[a]}));
  for (size_t a = 0; a < s; ++a)
    for (size_t b = a + 1; b < s; ++b) {
      const double pair_cap =
          capacity(x_chain, {deepest[a], deepest[b]}, rest({deepest[a], deepest[b]}));
      const double beta = 0.5 * (single[a] + single[b] - pair_cap);
      if (beta < -1e-12)
        throw NumericError("beta_matrix: negative effective conductance");
      out.value(a, b) = std::max(beta, 0.0);
      out.value(b, a) = out.value(a, b);
    }
  return out;
}

FiniteChain limiting_chain(const BetaMatrix& beta, const Vec& nu) {
  for (double v : nu)
    if (!(v > 0.0)) throw ModelError("limiting_chain: well masses must be positive");
  FiniteChain y;
  y.weight = beta.value;
  y.measure = nu;
  return y;
}

double limiting_form(const FiniteChain& y_chain, const Vec& f, const Vec& g) {
  double nu_star = 0.0;
  for (double v : y_chain.measure) nu_star += v;
  const Vec lg = y_chain.apply_generator(g);
  double s = 0.0;
  for (size_t i = 0; i < y_chain.size(); ++i)
    s += f[i] * (-lg[i]) * y_chain.measure[i] / nu_star;
  return s;
}

Vec harmonic_extension(const FiniteChain& chain, const std::vector<size_t>& boundary,
                       const Vec& u) {
  const size_t n = chain.size();
  if (boundary.empty()) throw ModelError("harmonic_extension: empty boundary set");
  Vec ext(n, 0.0);
  std::vector<int> fixed(n, 0);
  for (size_t b = 0; b < boundary.size(); ++b) {
    fixed[boundary[b]] = 1;
    ext[boundary[b]] = u[b];
  }
  double umin = u[0], umax = u[0];
  for (double v : u) {
    umin = std::min(umin, v);
    umax = std::max(umax, v);
  }
  for (const auto& comp : components(chain.weight)) {
    bool touches = false;
    for (size_t i : comp) touches = touches || fixed[i] == 1;
    if (!touches) {
      for (size_t i : comp) ext[i] = 0.5 * (umin + umax);
      continue;
    }
    std::vector<size_t> interior;
    for (size_t i : comp)
      if (fixed[i] == 0) interior.push_back(i);
    if (interior.empty()) continue;
    const size_t m = interior.size();
    Mat L(m, m);
    Vec rhs(m, 0.0);
    for (size_t r = 0; r < m; ++r) {
      const size_t i = interior[r];
      double diag = 0.0;
      for (size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = chain.weight(i, j);
        if (w == 0.0) continue;
        diag += w;
        if (fixed[j] == 0) {
          const auto it = std::find(interior.begin(), interior.end(), j);
          L(r, static_cast<size_t>(it - interior.begin())) -= w;
        } else {
          rhs[r] += w * ext[j];
        }
      }
      L(r, r) += diag;
    }
    const Vec sol = lu_solve(L, rhs);
    for (size_t r = 0; r < m; ++r) ext[interior[r]] = sol[r];
  }
  return ext;
}

TraceOracle trace_oracle(const FiniteChain& x_chain, const std::vector<size_t>& deepest) {
  if (deepest.size() < 2) throw ModelError("trace_oracle: need at least two deepest wells");
  TraceOracle out;
  out.states = deepest;
  const size_t s = deepest.size();
  out.trace_rate = Mat(s, s);
  out.measure_rate = Mat(s, s);

  // hit[j] = P_k[hit deepest[j] before the other deepest states], for all k.
  std::vector<Vec> hit(s);
  for (size_t j = 0; j < s; ++j) {
    std::vector<size_t> others;
    for (size_t b = 0; b < s; ++b)
      if (b != j) others.push_back(deepest[b]);
    hit[j] = equilibrium_potential(x_chain, {deepest[j]}, others).values;
  }

  for (size_t a = 0; a < s; ++a) {
    const size_t i = deepest[a];
    for (size_t b = 0; b < s; ++b) {
      if (b == a) continue;
      double r = x_chain.rate(i, deepest[b]);
      for (size_t k = 0; k < x_chain.size(); ++k) {
        if (contains(deepest, k)) continue;
        if (x_chain.weight(i, k) == 0.0) continue;
        r += x_chain.rate(i, k) * hit[b][k];
      }
      out.trace_rate(a, b) = r;
      out.measure_rate(a, b) = x_chain.measure[i] * r;
    }
  }
  return out;
}

}  // namespace metastable
