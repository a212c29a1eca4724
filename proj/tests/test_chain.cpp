#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "metastable/artifacts.hpp"
#include "metastable/chain.hpp"
#include "metastable/rng.hpp"

using namespace metastable;

namespace {

FiniteChain path_chain() {
  // omega_12 = omega_23 = 1, omega_13 = 0: m = (1/4, 1/2, 1/4)
  FiniteChain c;
  c.weight = Mat(3, 3);
  c.weight(0, 1) = c.weight(1, 0) = 1.0;
  c.weight(1, 2) = c.weight(2, 1) = 1.0;
  c.measure = {0.25, 0.5, 0.25};
  return c;
}

FiniteChain two_state(double w) {
  FiniteChain c;
  c.weight = Mat(2, 2);
  c.weight(0, 1) = c.weight(1, 0) = w;
  c.measure = {0.5, 0.5};
  return c;
}

// Random connected chain: spanning tree plus extra edges.
FiniteChain random_chain(PhiloxStream& rng, size_t n) {
  FiniteChain c;
  c.weight = Mat(n, n);
  for (size_t v = 1; v < n; ++v) {
    const size_t u = static_cast<size_t>(rng.uniform() * v);
    const double w = 0.2 + 1.8 * rng.uniform();
    c.weight(u, v) = c.weight(v, u) = w;
  }
  const size_t extra = n / 2;
  for (size_t e = 0; e < extra; ++e) {
    const size_t a = static_cast<size_t>(rng.uniform() * n);
    const size_t b = static_cast<size_t>(rng.uniform() * n);
    if (a == b) continue;
    const double w = 0.2 + 1.8 * rng.uniform();
    c.weight(a, b) = c.weight(b, a) = w;
  }
  c.measure.assign(n, 0.0);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) total += c.weight(i, j);
  for (size_t i = 0; i < n; ++i) {
    double wi = 0.0;
    for (size_t j = 0; j < n; ++j) wi += c.weight(i, j);
    c.measure[i] = wi / total;
  }
  return c;
}

}  // namespace

TEST_CASE("path chain: measure and rates from the definitions") {
  const FiniteChain c = path_chain();
  CHECK(c.rate(0, 1) == doctest::Approx(4.0));
  CHECK(c.rate(1, 0) == doctest::Approx(2.0));
  CHECK(c.rate(1, 2) == doctest::Approx(2.0));
  // detailed balance: m(i") r(i,j) = omega_ij = m(j) r(j,i)
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      CHECK(c.measure[i] * c.rate(i, j) ==
            doctest::Approx(c.measure[j] * c.rate(j, i)).epsilon(1e-12));
    }
}

TEST_CASE("two-state chain") {
  const FiniteChain c = two_state(0.7);
  CHECK(c.rate(0, 1) == doctest::Approx(1.4));
  CHECK(c.rate(1, 0) == doctest::Approx(1.4));
}

TEST_CASE("equilibrium potential on the path chain") {
  const FiniteChain c = path_chain();
  const PotentialSolve h = equilibrium_potential(c, {0}, {2});
  CHECK(h.values[0] == 1.0);
  CHECK(h.values[1] == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(h.values[2] == 0.0);
  CHECK(h.floating.empty());
}

TEST_CASE("no interior unknowns: the indicator of A") {
  const FiniteChain c = two_state(1.0);
  const PotentialSolve h = equilibrium_potential(c, {0}, {1});
  CHECK(h.values[0] == 1.0);
  CHECK(h.values[1] == 0.0);
}

TEST_CASE("symmetric 4-cycle") {
  FiniteChain c;
  c.weight = Mat(4, 4);
  for (int i = 0; i < 4; ++i) {
    const int j = (i + 1) % 4;
    c.weight(i, j) = c.weight(j, i) = 1.0;
  }
  c.measure. assign(4, 0.25);
  const PotentialSolve h = equilibrium_potential(c, {0}, {2});
  CHECK(h.values[0] == 1.0);
  CHECK(h.values[1] == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(h.values[2] == 0.0);
  CHECK(h.values[3] == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("dirichlet form: edge values") {
  const FiniteChain c = path_chain();
  CHECK(dirichlet_form(c, {1.0, 0.5, 0.0}, {1.0, 0.5, 0.0}) ==
        doctest::Approx(0.5).epsilon(1e-13));
  CHECK(dirichlet_form(c, {3.0, 3.0, 3.0}, {1.0, 0.5, 0.0}) == 0.0);
  const FiniteChain t = two_state(0.7);
  CHECK(dirichlet_form(t, {1.0, 0.0}, {1.0, 0.0}) == doctest::Approx(0.7));
}

TEST_CASE("capacity: series composition and conventions") {
  const FiniteChain c = path_chain();
  CHECK(capacity(c, {0}, {2}) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(capacity(c, {0, 2}, {}) == 0.0);
  CHECK(capacity(c, {0}, {2}) == doctest::Approx(capacity(c, {2}, {0})).epsilon(1e-13));
  const FiniteChain t = two_state(0.7);
  CHECK(capacity(t, {0}, {1}) == doctest::Approx(0.7).epsilon(1e-13));
}

TEST_CASE("beta matrix on the path chain") {
  const FiniteChain c = path_chain();
  const BetaMatrix b = beta_matrix(c, {0, 2});
  CHECK(b.value(0, 1) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(b.value(1, 0) == b.value(0, 1));
  CHECK(b.value(0, 0) == 0.0);
}

TEST_CASE("limiting chain rates and detailed balance") {
  const FiniteChain c = path_chain();
  const BetaMatrix b = beta_matrix(c, {0, 2});
  const FiniteChain y = limiting_chain(b, {0.25, 0.25});
  CHECK(y.rate(0, 1) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(y.measure[0] * y.rate(0, 1) ==
        doctest::Approx(y.measure[1] * y.rate(1, 0)).epsilon(1e-13));
}

TEST_CASE("harmonic extension on the path chain and the bilinear identity") {
  const FiniteChain c = path_chain();
  const Vec ext = harmonic_extension(c, {0, 2}, {1.0, 0.0});
  CHECK(ext[0] == 1.0);
  CHECK(ext[1] == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(ext[2] == 0.0);
  // constants extend to constants
  const Vec flat = harmonic_extension(c, {0, 2}, {0.7, 0.7});
  for (double v : flat) CHECK(v == doctest::Approx(0.7).epsilon(1e-13));
  // D_x(ext, ext) = nu_star * D_y(u, u) with nu = (1/4, 1/4)
  const BetaMatrix b = beta_matrix(c, {0, 2});
  const FiniteChain y = limiting_chain(b, {0.25, 0.25});
  const double dx = dirichlet_form(c, ext, ext);
  CHECK(dx == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(dx == doctest::Approx(0.5 * limiting_form(y, {1.0, 0.0}, {1.0, 0.0}))
                  .epsilon(1e-12));
}

TEST_CASE("trace oracle on the path chain") {
  const FiniteChain c = path_chain();
  const TraceOracle tr = trace_oracle(c, {0, 2});
  CHECK(tr.trace_rate(0, 1) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(tr.measure_rate(0, 1) == doctest::Approx(0.5).epsilon(1e-13));
  const BetaMatrix b = beta_matrix(c, {0, 2});
  CHECK(tr.measure_rate(0, 1) == doctest::Approx(b.value(0, 1)).epsilon(1e-12));
}

TEST_CASE("oracle equivalence and extension identity on random chains") {
  PhiloxStream rng(2024, 5);
  for (int trial = 0; trial < 40; ++trial) {
    const size_t n = 4 + static_cast<size_t>(rng.uniform() * 9);  // 4..12
    const FiniteChain c = random_chain(rng, n);
    const size_t s = 2 + static_cast<size_t>(rng.uniform() * 3);  // 2..4
    std::vector<size_t> deepest;
    while (deepest.size() < std::min(s, n)) {
      const size_t cand = static_cast<size_t>(rng.uniform() * n);
      bool seen = false;
      for (size_t v : deepest) seen = seen || v == cand;
      if (!seen) deepest.push_back(cand);
    }
    std::sort(deepest.begin(), deepest.end());

    const BetaMatrix b = beta_matrix(c, deepest);
    const TraceOracle tr = trace_oracle(c, deepest);
    for (size_t a = 0; a < deepest.size(); ++a)
      for (size_t z = 0; z < deepest.size(); ++z) {
        if (a == z) continue;
        CHECK(std::fabs(b.value(a, z) - tr.measure_rate(a, z)) < 1e-10);
        CHECK(b.value(a, z) == b.value(z, a));
      }

    // extension identity with random boundary data
    Vec nu(deepest.size());
    for (double& v : nu) v = 0.3 + rng.uniform();
    double nu_star = 0.0;
    for (double v : nu) nu_star += v;
    const FiniteChain y = limiting_chain(b, nu);
    for (int rep = 0; rep < 5; ++rep) {
      Vec u(deepest.size()), v(deepest.size());
      for (auto& e : u) e = 2.0 * rng.uniform() - 1.0;
      for (auto& e : v) e = 2.0 * rng.uniform() - 1.0;
      const Vec ue = harmonic_extension(c, deepest, u);
      const Vec ve = harmonic_extension(c, deepest, v);
      // maximum principle
      double lo = 1e300, hi = -1e300;
      for (double e : u) {
        lo = std::min(lo, e);
        hi = std::max(hi, e);
      }
      for (double e : ue) {
        CHECK(e >= lo - 1e-12);
        CHECK(e <= hi + 1e-12);
      }
      CHECK(std::fabs(dirichlet_form(c, ue, ve) - nu_star * limiting_form(y, u, v)) <
            1e-10);
      // second clause: D_x(ue, w) is the same for every extension w of v
      Vec w = ve;
      bool touched = false;
      for (size_t i = 0; i < n && !touched; ++i) {
        bool is_deep = false;
        for (size_t dstate : deepest) is_deep = is_deep || dstate == i;
        if (!is_deep) {
          w[i] += 0.37;
          touched = true;
        }
      }
      if (touched)
        CHECK(std::fabs(dirichlet_form(c, ue, ve) - dirichlet_form(c, ue, w)) < 1e-12);
    }

    // capacity symmetry and monotonicity under enlarging A
    const std::vector<size_t> A = {deepest[0]};
    const std::vector<size_t> A2 = {deepest[0], deepest[1]};
    std::vector<size_t> B;
    for (size_t z = 1; z < deepest.size(); ++z) B.push_back(deepest[z]);
    if (B.size() > 1) {
      std::vector<size_t> B2(B.begin() + 1, B.end());
      CHECK(capacity(c, A, B2) <= capacity(c, A2, B2) + 1e-12);
    }
    CHECK(std::fabs(capacity(c, A, B) - capacity(c, B, A)) < 1e-12);
  }
}

TEST_CASE("equilibrium potential flags components that touch neither set") {
  FiniteChain c;
  c.weight = Mat(4, 4);
  c.weight(0, 1) = c.weight(1, 0) = 1.0;  // component {0,1}
  c.weight(2, 3) = c.weight(3, 2) = 1.0;  // component {2,3}
  c.measure = {0.25, 0.25, 0.25, 0.25};
  const PotentialSolve h = equilibrium_potential(c, {0}, {1});
  CHECK(h.floating.size() == 2);
  CHECK(h.values[2] == 0.0);
  CHECK(h.values[3] == 0.0);
}

TEST_CASE("x-chain from the double-well landscape") {
  const PotentialSpec spec = parse_spec(fixtures::double_well(0.0));
  const FieldEval eval(spec);
  auto pts = find_critical_points(eval, 9);
  const LandscapeGraph g = build_landscape(std::move(pts), eval, spec.level_h);
  const ChainBuildResult r = chain_from_landscape(g);
  CHECK_FALSE(r.trivial);
  const double omega = 4.0 / (2.0 * M_PI * std::sqrt(8.0));
  CHECK(r.chain.weight(0, 1) == doctest::Approx(omega).epsilon(1e-10));
  CHECK(r.chain.measure[0] == doctest::Approx(0.5).epsilon(1e-12));
  // y rates: beta = omega, nu = 1/4 -> r_y = 4 omega
  const ChainArtifacts art = build_chain_artifacts(g, 1);
  CHECK(art.y_chain.rate(0, 1) == doctest::Approx(4.0 * omega).epsilon(1e-10));
  CHECK(art.oracle_max_diff < 1e-12);
  CHECK(art.extension_identity_diff < 1e-12);
}

TEST_CASE("triple well with a shallow middle reduces to a two-state chain") {
  const PotentialSpec spec = parse_spec(fixtures::triple_well());
  const FieldEval eval(spec);
  auto pts = find_critical_points(eval, 9);
  const LandscapeGraph g = build_landscape(std::move(pts), eval, spec.level_h);
  const ChainArtifacts art = build_chain_artifacts(g, 1);
  CHECK(art.beta.value.n == 2);
  // series gates: beta_13 = omega/2 with omega the per-gate weight
  const double omega = g.gate_weight(0, 1);
  CHECK(art.beta.value(0, 1) == doctest::Approx(0.5 * omega).epsilon(1e-10));
  CHECK(art.oracle_max_diff < 1e-12);
  CHECK(art.extension_identity_diff < 1e-12);
}

TEST_CASE("single deep well is rejected as trivial") {
  const PotentialSpec spec = parse_spec(fixtures::quadratic_bowl());
  const FieldEval eval(spec);
  auto pts = find_critical_points(eval, 9);
  const LandscapeGraph g = build_landscape(std::move(pts), eval, spec.level_h);
  CHECK_THROWS_AS(build_chain_artifacts(g, 1), ModelError);
}
