// Acceptance suite: every check below runs against the fixture potentials
// with the tolerances fixed in code. One [PASS]/[FAIL] line per criterion;
// the process exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "metastable/artifacts.hpp"
#include "metastable/rng.hpp"

using namespace metastable;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Criterion {
  std::string name;
  std::vector<std::string> problems;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  explicit Criterion(std::string n) : name(std::move(n)) {}
  void expect(bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  }
  void finish() {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (problems.empty()) {
      std::printf("[PASS] %s (%.1fs)\n", name.c_str(), wall);
    } else {
      ++g_failures;
      std::printf("[FAIL] %s (%.1fs)\n", name.c_str(), wall);
      for (const auto& p : problems) std::printf("       - %s\n", p.c_str());
    }
    std::fflush(stdout);
  }
};

std::string fixture_path(const std::string& name) {
  return std::string(SPEC_DIR) + "/" + name;
}

struct Fixture {
  PotentialSpec spec;
  FieldEval eval;
  LandscapeGraph graph;
  explicit Fixture(const std::string& file)
      : spec(parse_spec(read_file(fixture_path(file)))), eval(spec) {
    auto pts = find_critical_points(eval, 9);
    graph = build_landscape(std::move(pts), eval, spec.level_h);
  }
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Landscape exactness on the double well, c in {0, 1, 2}.
void criterion_1() {
  Criterion c("criterion 1: landscape exactness (double well, c in {0,1,2})");
  const Vec want_min_a = {-1.0, 0.0}, want_min_b = {1.0, 0.0}, want_sad = {0.0, 0.0};
  const std::map<std::string, double> fixtures = {{"double_well_c0.json", 0.0},
                                                  {"double_well_c1.json", 1.0},
                                                  {"double_well_c2.json", 2.0}};
  for (const auto& [file, cval] : fixtures) {
    const Fixture f(file);
    c.expect(f.graph.wells.size() == 2, file + ": expected 2 wells");
    c.expect(f.graph.gates.size() == 1, file + ": expected 1 gate");
    if (f.graph.wells.size() != 2 || f.graph.gates.size() != 1) continue;
    const auto& points = f.graph.points;
    c.expect(points.size() == 3, file + ": expected 3 critical points");
    c.expect(dist2(points[0].location, want_min_a) < 1e-8, file + ": minimum (-1,0)");
    c.expect(dist2(points[1].location, want_sad) < 1e-8, file + ": saddle (0,0)");
    c.expect(dist2(points[2].location, want_min_b) < 1e-8, file + ": minimum (1,0)");
    for (int w = 0; w < 2; ++w)
      c.expect(std::fabs(f.graph.wells[w].gauss_mass - 0.25) < 1e-10,
               file + ": well mass " + num(f.graph.wells[w].gauss_mass) +
                   " != 0.25 +- 1e-10");
    const double mu_want = 1.0 + std::sqrt(9.0 + 8.0 * cval * cval);
    const auto& gate = f.graph.points[f.graph.gates[0].point];
    c.expect(std::fabs(gate.escape_rate - mu_want) < 1e-10,
             file + ": escape rate " + num(gate.escape_rate) + " != " + num(mu_want));
    const double omega_want = mu_want / (2.0 * M_PI * std::sqrt(8.0));
    c.expect(std::fabs(f.graph.gates[0].rate_const - omega_want) < 1e-10,
             file + ": rate constant " + num(f.graph.gates[0].rate_const) +
                 " != " + num(omega_want));
  }
  c.finish();
}

// ---------------------------------------------------------------------------
// 2. Chain-reduction oracle equivalence on random chains.
void criterion_2() {
  Criterion c("criterion 2: chain reduction vs trace oracle (100 random chains)");
  PhiloxStream rng(20240517, 1);
  double worst_beta = 0.0, worst_extension = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const size_t n = 4 + static_cast<size_t>(rng.uniform() * 9);  // 4..12
    FiniteChain chain;
    chain.weight = Mat(n, n);
    for (size_t v = 1; v < n; ++v) {
      const size_t u = static_cast<size_t>(rng.uniform() * v);
      const double w = 0.2 + 1.8 * rng.uniform();
      chain.weight(u, v) = chain.weight(v, u) = w;
    }
    for (size_t e = 0; e < n / 2; ++e) {
      const size_t a = static_cast<size_t>(rng.uniform() * n);
      const size_t b = static_cast<size_t>(rng.uniform() * n);
      if (a == b) continue;
      const double w = 0.2 + 1.8 * rng.uniform();
      chain.weight(a, b) = chain.weight(b, a) = w;
    }
    chain.measure.assign(n, 0.0);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) total += chain.weight(i, j);
    for (size_t i = 0; i < n; ++i) {
      double wi = 0.0;
      for (size_t j = 0; j < n; ++j) wi += chain.weight(i, j);
      chain.measure[i] = wi / total;
    }
    const size_t s = 2 + static_cast<size_t>(rng.uniform() * 3);  // 2..4
    std::vector<size_t> deepest;
    while (deepest.size() < std::min(s, n)) {
      const size_t cand = static_cast<size_t>(rng.uniform() * n);
      bool seen = false;
      for (size_t v : deepest) seen = seen || v == cand;
      if (!seen) deepest.push_back(cand);
    }
    std::sort(deepest.begin(), deepest.end());

    const BetaMatrix beta = beta_matrix(chain, deepest);
    const TraceOracle oracle = trace_oracle(chain, deepest);
    for (size_t a = 0; a < deepest.size(); ++a)
      for (size_t b = 0; b < deepest.size(); ++b) {
        if (a == b) continue;
        worst_beta = std::max(worst_beta,
                              std::fabs(beta.value(a, b) - oracle.measure_rate(a, b)));
        c.expect(beta.value(a, b) == beta.value(b, a), "beta not exactly symmetric");
      }

    Vec nu(deepest.size());
    for (double& v : nu) v = 0.3 + rng.uniform();
    double nu_star = 0.0;
    for (double v : nu) nu_star += v;
    const FiniteChain y = limiting_chain(beta, nu);
    for (int rep = 0; rep < 10; ++rep) {
      Vec u(deepest.size()), v(deepest.size());
      for (auto& e : u) e = 2.0 * rng.uniform() - 1.0;
      for (auto& e : v) e = 2.0 * rng.uniform() - 1.0;
      const Vec ue = harmonic_extension(chain, deepest, u);
      const Vec ve = harmonic_extension(chain, deepest, v);
      worst_extension = std::max(
          worst_extension,
          std::fabs(dirichlet_form(chain, ue, ve) - nu_star * limiting_form(y, u, v)));
    }
  }
  c.expect(worst_beta < 1e-10,
           "beta vs trace-oracle max diff " + num(worst_beta) + " >= 1e-10");
  c.expect(worst_extension < 1e-10,
           "extension identity max diff " + num(worst_extension) + " >= 1e-10");
  c.finish();
}

// ---------------------------------------------------------------------------
// 3. Structure constraints and derivative self-checks.
void criterion_3() {
  Criterion c("criterion 3: structure constraints and finite-difference checks");
  for (const std::string file :
       {"double_well_c1.json", "double_well_c2.json", "triple_well.json"}) {
    const PotentialSpec spec = parse_spec(read_file(fixture_path(file)));
    const FieldEval eval(spec);
    const auto pts = default_structure_samples(spec, 10000);
    const StructureReport rep = check_structure(eval, pts, 1e-10);
    c.expect(rep.max_orthogonality < 1e-10,
             file + ": max |grad U . ell| = " + num(rep.max_orthogonality));
    c.expect(rep.max_divergence < 1e-10,
             file + ": max |div ell| = " + num(rep.max_divergence));
    for (const Vec x : {Vec{0.3, -0.7}, Vec{-1.1, 0.4}, Vec{0.05, 0.9}}) {
      const DerivativeReport d = derivative_selfcheck(eval, x, default_fd_step(x));
      c.expect(d.max_rel() < 1e-6,
               file + ": finite-difference max rel " + num(d.max_rel()));
    }
  }
  c.finish();
}

// ---------------------------------------------------------------------------
// 4. Laplace asymptotics by quadrature.
void criterion_4() {
  Criterion c("criterion 4: Laplace asymptotics (quadrature, double well)");
  const Fixture f("double_well_c0.json");
  std::map<double, LaplaceReport> reports;
  for (double eps : {0.04, 0.02, 0.01}) reports[eps] = laplace_check(f.eval, f.graph, eps);
  const LaplaceReport& mid = reports[0.02];
  c.expect(mid.z_ratio > 0.95 && mid.z_ratio < 1.05,
           "Z ratio at eps=0.02: " + num(mid.z_ratio) + " outside [0.95, 1.05]");
  for (double r : mid.valley_ratio)
    c.expect(r > 0.9 && r < 1.1,
             "valley mass ratio at eps=0.02: " + num(r) + " outside [0.9, 1.1]");
  auto dev = [](const LaplaceReport& r) {
    double d = std::fabs(r.z_ratio - 1.0);
    for (double v : r.valley_ratio) d = std::max(d, std::fabs(v - 1.0));
    return d;
  };
  c.expect(dev(reports.at(0.01)) < dev(reports.at(0.04)),
           "ratios not closer to 1 at eps=0.01 (" + num(dev(reports.at(0.01))) +
               ") than at eps=0.04 (" + num(dev(reports.at(0.04))) + ")");
  c.finish();
}

// ---------------------------------------------------------------------------
// 5. Eyring-Kramers transition times by simulation.
void criterion_5() {
  Criterion c("criterion 5: mean transition times vs the rate prediction");
  const Fixture f0("double_well_c0.json");

  struct Point {
    double eps;
    int traj;
    EnsembleStats stats;
  };
  std::vector<Point> ladder = {{0.15, 200, {}}, {0.12, 200, {}}, {0.10, 150, {}}};
  for (auto& pt : ladder) {
    SimConfig cfg;
    cfg.epsilon = pt.eps;
    cfg.n_trajectories = pt.traj;
    cfg.seed = 7;
    pt.stats = run_transition_ensemble(cfg, f0.graph, f0.eval);
    c.expect(!pt.stats.unreliable,
             "eps=" + num(pt.eps) + ": censored fraction above 20%");
  }

  // The prediction nu_1/omega_1 from the built landscape, cross-checked
  // against the closed form pi sqrt(8) / 8 for this potential.
  const double predicted = ladder[0].stats.predicted;
  c.expect(std::fabs(predicted - M_PI * std::sqrt(8.0) / 8.0) < 1e-12,
           "prediction is not pi*sqrt(8)/8: " + num(predicted));

  const EnsembleStats& at12 = ladder[1].stats;
  c.expect(std::fabs(at12.ratio - 1.0) <= 0.30,
           "eps=0.12 mean/prediction = " + num(at12.ratio) + " outside +-30%");

  // Three-point monotonicity of the deviation, one CI-overlap exception.
  int exceptions = 0;
  for (size_t k = 0; k + 1 < ladder.size(); ++k) {
    const auto& a = ladder[k].stats;
    const auto& b = ladder[k + 1].stats;
    const double dev_a = std::fabs(a.ratio - 1.0);
    const double dev_b = std::fabs(b.ratio - 1.0);
    if (dev_b < dev_a) continue;
    const double err_a = a.ci_half_width / a.predicted;
    const double err_b = b.ci_half_width / b.predicted;
    const bool overlap = dev_b - err_b <= dev_a + err_a;
    if (overlap) {
      ++exceptions;
      continue;
    }
    c.expect(false, "deviation grew from eps=" + num(ladder[k].eps) + " (" +
                        num(dev_a) + ") to eps=" + num(ladder[k + 1].eps) + " (" +
                        num(dev_b) + ") beyond CI overlap");
  }
  c.expect(exceptions <= 1,
           "more than one CI-overlap exception in the deviation ladder");

  // Non-reversible speed-up at eps = 0.12.
  const Fixture f1("double_well_c1.json");
  SimConfig cfg;
  cfg.epsilon = 0.12;
  cfg.n_trajectories = 200;
  cfg.seed = 7;
  const EnsembleStats fast = run_transition_ensemble(cfg, f1.graph, f1.eval);
  const double ratio = fast.mean_rescaled / at12.mean_rescaled;
  const double want = 4.0 / (1.0 + std::sqrt(17.0));
  c.expect(std::fabs(ratio / want - 1.0) <= 0.30,
           "speed-up ratio " + num(ratio) + " outside +-30% of " + num(want));
  c.finish();
}

// ---------------------------------------------------------------------------
// 6. Order-process convergence.
void criterion_6() {
  Criterion c("criterion 6: order-process rates, exponentiality, excursions");
  const Fixture f("double_well_c0.json");
  const double omega = f.graph.gates[0].rate_const;
  const double r_pred = 4.0 * omega;

  struct Run {
    double eps;
    double horizon;
    EmpiricalGenerator gen;
  };
  std::vector<Run> runs = {{0.15, 30.0, {}}, {0.12, 30.0, {}}, {0.10, 20.0, {}}};
  for (auto& run : runs) {
    SimConfig cfg;
    cfg.epsilon = run.eps;
    cfg.n_trajectories = 8;
    cfg.seed = 7;
    const auto logs = order_process(cfg, run.horizon, f.graph, f.eval);
    run.gen = empirical_generator(logs, f.graph.deepest.size());
  }

  const EmpiricalGenerator& at10 = runs[2].gen;
  for (int st : {0, 1}) {
    double jumps = 0.0;
    for (int to = 0; to < 2; ++to) jumps += at10.jump_count(st, to);
    c.expect(jumps >= 50.0, "state " + std::to_string(st + 1) + ": only " +
                                num(jumps) + " jumps at eps=0.10");
  }
  c.expect(std::fabs(at10.rate(0, 1) / r_pred - 1.0) <= 0.30,
           "rate(1->2) = " + num(at10.rate(0, 1)) + " outside +-30% of " +
               num(r_pred));
  for (int st : {0, 1})
    c.expect(at10.holding_cov[st] >= 0.8 && at10.holding_cov[st] <= 1.2,
             "holding-time CoV state " + std::to_string(st + 1) + " = " +
                 num(at10.holding_cov[st]) + " outside [0.8, 1.2]");

  c.expect(at10.delta_fraction < 0.1,
           "excursion fraction at eps=0.10: " + num(at10.delta_fraction));
  c.expect(runs[0].gen.delta_fraction > runs[1].gen.delta_fraction &&
               runs[1].gen.delta_fraction > runs[2].gen.delta_fraction,
           "excursion fraction not decreasing: " +
               num(runs[0].gen.delta_fraction) + ", " +
               num(runs[1].gen.delta_fraction) + ", " +
               num(runs[2].gen.delta_fraction));
  c.finish();
}

// ---------------------------------------------------------------------------
// 7. Test-function properties.
void criterion_7() {
  Criterion c("criterion 7: saddle test-function properties");

  // Boundary values and junction continuity at 1e3 sampled points per face.
  const Fixture f1("double_well_c1.json");
  const SaddleBox box =
      make_saddle_box(f1.graph.points[f1.graph.gates[0].point], f1.graph.level, 0.05);
  const BoundaryCheck bc = boundary_check(box, f1.eval, 1000);
  c.expect(bc.samples >= 1000, "fewer than 1e3 usable boundary samples");
  c.expect(bc.max_err_plus <= 1e-12,
           "p != 1 on the outer plus face: err " + num(bc.max_err_plus));
  c.expect(bc.max_err_minus <= 1e-12,
           "p != 0 on the outer minus face: err " + num(bc.max_err_minus));
  c.expect(bc.max_junction_jump < 1e-10,
           "junction jump " + num(bc.max_junction_jump) + " >= 1e-10");

  // Skew identity on every fixture gate.
  for (const std::string file : {"double_well_c0.json", "double_well_c1.json",
                                 "double_well_c2.json", "triple_well.json"}) {
    const Fixture f(file);
    for (const auto& gate : f.graph.gates) {
      const SkewIdentityReport rep = skew_identity_check(f.graph.points[gate.point]);
      c.expect(rep.identity_residual < 1e-10,
               file + ": gate identity residual " + num(rep.identity_residual));
      c.expect(rep.skew_residual < 1e-10,
               file + ": hess*D_ell skew residual " + num(rep.skew_residual));
    }
  }

  // Skew identity on 50 synthetic index-1 pairs (4x4).
  PhiloxStream rng(77, 2);
  int accepted = 0;
  double worst = 0.0;
  while (accepted < 50) {
    const size_t d = 4;
    Mat basis(d, d);
    for (size_t i = 0; i < d; ++i)
      for (size_t j = 0; j < d; ++j) basis(i, j) = 2.0 * rng.uniform() - 1.0;
    for (size_t col = 0; col < d; ++col) {
      for (size_t p = 0; p < col; ++p) {
        double proj = 0.0;
        for (size_t i = 0; i < d; ++i) proj += basis(i, col) * basis(i, p);
        for (size_t i = 0; i < d; ++i) basis(i, col) -= proj * basis(i, p);
      }
      double nrm = 0.0;
      for (size_t i = 0; i < d; ++i) nrm += basis(i, col) * basis(i, col);
      nrm = std::sqrt(nrm);
      for (size_t i = 0; i < d; ++i) basis(i, col) /= nrm;
    }
    const Vec lam = {-(0.5 + rng.uniform()), 0.5 + rng.uniform(), 1.0 + rng.uniform(),
                     1.5 + rng.uniform()};
    Mat H(d, d);
    for (size_t i = 0; i < d; ++i)
      for (size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (size_t k = 0; k < d; ++k) sum += basis(i, k) * lam[k] * basis(j, k);
        H(i, j) = sum;
      }
    Mat S(d, d);
    for (size_t i = 0; i < d; ++i)
      for (size_t j = i + 1; j < d; ++j) {
        S(i, j) = 0.5 * (2.0 * rng.uniform() - 1.0);
        S(j, i) = -S(i, j);
      }
    Mat L(d, d);
    for (size_t col = 0; col < d; ++col) {
      Vec rhs(d);
      for (size_t i = 0; i < d; ++i) rhs[i] = S(i, col);
      const Vec sol = lu_solve(H, rhs);
      for (size_t i = 0; i < d; ++i) L(i, col) = sol[i];
    }
    CriticalPoint cp;
    cp.location = Vec(d, 0.0);
    cp.hess = H;
    cp.ell_jac = L;
    const SymEigen he = jacobi_eigen(H);
    cp.hess_eigvals = he.values;
    cp.hess_eigvecs = he.vectors;
    cp.kind = PointKind::index1_saddle;
    cp.unstable_curvature = -he.values[0];
    cp.downhill.resize(d);
    for (size_t i = 0; i < d; ++i) cp.downhill[i] = he.vectors(i, 0);
    const auto eigs = eigenvalues(add(H, L));
    int neg = 0;
    bool real_neg = true;
    double mu = 0.0;
    for (auto z : eigs)
      if (z.real() < -1e-9) {
        ++neg;
        real_neg = real_neg && std::fabs(z.imag()) < 1e-9;
        mu = -z.real();
      }
    if (neg != 1 || !real_neg) continue;
    cp.escape_rate = mu;
    cp.profile_dir = eigenvector_for(add(H, transpose(L), -1.0), -mu);
    if (std::fabs(dot(cp.profile_dir, cp.downhill)) < 1e-6) continue;
    if (dot(cp.profile_dir, cp.downhill) < 0.0)
      for (double& v : cp.profile_dir) v = -v;
    worst = std::max(worst, skew_identity_check(cp).identity_residual);
    ++accepted;
  }
  c.expect(worst < 1e-10, "synthetic-pair identity residual " + num(worst));

  // Residual ladder, strictly decreasing. J = 2 keeps the desk-scale ladder
  // inside the scaling regime (at J = 4 the box out-spans the quartic scale
  // eps^(1/4) and the residual saturates).
  auto z_shifted = [&](const FieldEval& eval, const LandscapeGraph& g, double eps) {
    auto density = [&](const Vec& x) {
      return std::exp(-(eval.potential(x) - g.floor) / eps);
    };
    return integrate_box(density, eval.spec().domain_lo, eval.spec().domain_hi, 1e-7)
        .value;
  };
  double prev = 1e300;
  std::string ladder_str;
  for (double eps : {0.1, 0.05, 0.025}) {
    const SaddleBox b = make_saddle_box(f1.graph.points[f1.graph.gates[0].point],
                                        f1.graph.level, eps, 2.0);
    const ResidualReport rep = residual_quadrature(b, f1.eval,
                                                   z_shifted(f1.eval, f1.graph, eps));
    ladder_str += (ladder_str.empty() ? "" : ", ") + num(rep.value);
    c.expect(rep.value < prev, "residual not strictly decreasing: " + ladder_str);
    prev = rep.value;
  }
  c.finish();
}

// ---------------------------------------------------------------------------
// 8. Determinism of the full pipeline.
void criterion_8() {
  Criterion c("criterion 8: byte-identical outputs of repeated runs");
  const fs::path base = fs::temp_directory_path() / "msd_acceptance_det";
  fs::remove_all(base);
  fs::create_directories(base);
  const std::string spec = fixture_path("double_well_c1.json");
  const std::string flags = " --eps 0.2 --traj 6 --horizon 1.0 --seed 7 --J 2 "
                            "--quadrature --spec " + spec;
  for (const char* sub : {"a", "b"}) {
    const std::string cmd = std::string(CLI_PATH) + " all" + flags + " --out " +
                            (base / sub).string() + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    c.expect(WEXITSTATUS(rc) == 0, std::string("pipeline run '") + sub + "' exited " +
                                       std::to_string(WEXITSTATUS(rc)));
  }
  for (const char* name : {"landscape.json", "chains.json", "transitions.csv",
                           "orderpath.csv", "summary.json", "testfn_report.json"}) {
    const fs::path pa = base / "a" / name, pb = base / "b" / name;
    if (!fs::exists(pa) || !fs::exists(pb)) {
      c.expect(false, std::string(name) + " missing from a run");
      continue;
    }
    c.expect(read_file(pa.string()) == read_file(pb.string()),
             std::string(name) + " differs between runs");
  }
  // The manifest carries wall-clock timings; compare with timings masked.
  auto masked = [](const std::string& path) {
    std::string text = read_file(path);
    const auto at = text.find("\"timings_sec\"");
    return at == std::string::npos ? text : text.substr(0, at);
  };
  c.expect(masked((base / "a" / "manifest.json").string()) ==
               masked((base / "b" / "manifest.json").string()),
           "manifest differs beyond timings");
  fs::remove_all(base);
  c.finish();
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_7();
  criterion_8();
  criterion_5();
  criterion_6();
  if (g_failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  return 1;
}
