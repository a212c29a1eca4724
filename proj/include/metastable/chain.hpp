#pragma once

#include <vector>

#include "metastable/landscape.hpp"
#include "metastable/linalg.hpp"

namespace metastable {

// Continuous-time chain with symmetric edge weights and a holding measure.
// Rates are derived: r(i,j) = weight(i,j) / measure(i), so the chain is
// reversible with respect to its measure by construction. The auxiliary
// chain uses the gate weights with the normalized measure m; the limiting
// chain uses the effective conductances with the (unnormalized) well masses.
struct FiniteChain {
  Mat weight;    // symmetric, zero diagonal
  Vec measure;   // strictly positive (isolated states get flagged instead)

  size_t size() const { return measure.size(); }
  double rate(size_t i, size_t j) const { return weight(i, j) / measure[i]; }

  // Generator applied to f: (Lf)(i) = sum_j r(i,j) (f_j - f_i).
  Vec apply_generator(const Vec& f) const;
};

struct ChainBuildResult {
  FiniteChain chain;
  std::vector<std::string> notices;
  bool trivial = false;  // disconnected / isolated wells present
};

// The auxiliary chain on well indices: weights omega_{i,j}, measure
// m(i) = omega_i / sum_j omega_j.
ChainBuildResult chain_from_landscape(const LandscapeGraph& graph);

struct PotentialSolve {
  Vec values;                  // h_{A,B} on all states
  std::vector<size_t> floating;  // states in components touching neither A nor B
};

// h = 1 on A, 0 on B, harmonic elsewhere (dense solve). Components that
// contain neither A nor B get the constant 0 and are flagged.
PotentialSolve equilibrium_potential(const FiniteChain& chain,
                                     const std::vector<size_t>& A,
                                     const std::vector<size_t>& B);

// D(f,g) = 1/2 sum_{i,j} w_{i,j} (f_i - f_j)(g_i - g_j); cross-checked
// against sum_i measure(i) f(i) (-Lg)(i).
double dirichlet_form(const FiniteChain& chain, const Vec& f, const Vec& g);

// cap(A,B) = D(h_AB, h_AB); cap(A, empty) := 0 by convention.
double capacity(const FiniteChain& chain, const std::vector<size_t>& A,
                const std::vector<size_t>& B);

struct BetaMatrix {
  std::vector<size_t> states;  // the deepest wells, in chain indexing
  Mat value;                   // symmetric, zero diagonal, indexed by position
};

// beta_{i,j} = 1/2 [cap(i, S*\i) + cap(j, S*\j) - cap({i,j}, S*\{i,j})].
BetaMatrix beta_matrix(const FiniteChain& x_chain, const std::vector<size_t>& deepest);

// The limiting chain: weights beta, measure nu restricted to the deepest set.
FiniteChain limiting_chain(const BetaMatrix& beta, const Vec& nu);

// Measure-weighted bilinear form of the limiting chain:
// D_y(f,g) = sum_i f(i) (-L_y g)(i) nu_i / nu_star.
double limiting_form(const FiniteChain& y_chain, const Vec& f, const Vec& g);

// Extension of u (given on `boundary`) that is harmonic off `boundary`.
Vec harmonic_extension(const FiniteChain& chain, const std::vector<size_t>& boundary,
                       const Vec& u);

// Independent verification route: trace rates via hitting probabilities,
// returned as the matrix m(i) * r^tr(i,j), which must equal beta.
struct TraceOracle {
  std::vector<size_t> states;
  Mat trace_rate;      // r^tr(i,j)
  Mat measure_rate;    // m(i) * r^tr(i,j)
};
TraceOracle trace_oracle(const FiniteChain& x_chain, const std::vector<size_t>& deepest);

}  // namespace metastable
