#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "metastable/artifacts.hpp"

namespace fs = std::filesystem;
using namespace metastable;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// Exit codes: 2 parse, 3 model, 4 stale artifact, 5 failed verification.
enum ExitCode { kOk = 0, kParse = 2, kModel = 3, kStale = 4, kVerifyFail = 5 };

struct Options {
  std::string spec_path;
  std::string out_dir = "out";
  std::vector<double> eps_override;
  int trajectories = 50;
  std::optional<uint64_t> seed_override;
  double horizon = 4.0;          // rescaled units per trajectory
  double box_mult = 4.0;         // J
  bool quadrature = false;
  double dt = 0.0;               // 0 -> default
  int threads = 1;
  double step_budget = 2.5e9;    // per-epsilon simulate budget
};

struct Manifest {
  std::string subcommand;
  json parameters;
  std::vector<std::string> outputs;
  std::map<std::string, double> timings;
};

class StageTimer {
 public:
  StageTimer(Manifest& m, std::string name)
      : m_(m), name_(std::move(name)), t0_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto dt = std::chrono::steady_clock::now() - t0_;
    m_.timings[name_] = std::chrono::duration<double>(dt).count();
  }

 private:
  Manifest& m_;
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
};

struct Pipeline {
  Options opt;
  PotentialSpec spec;
  std::string spec_hash;
  FieldEval* eval = nullptr;
  LandscapeGraph graph;
  Manifest manifest;

  Vec eps_list() const {
    return opt.eps_override.empty() ? spec.epsilons : Vec(opt.eps_override);
  }
  uint64_t seed() const { return opt.seed_override.value_or(spec.seed); }
};

void emit(Pipeline& p, const std::string& name, const std::string& content) {
  fs::create_directories(p.opt.out_dir);
  const std::string path = (fs::path(p.opt.out_dir) / name).string();
  write_file(path, content);
  p.manifest.outputs.push_back(name);
}

void write_manifest(Pipeline& p) {
  json j;
  j["schema"] = "manifest/1";
  j["tool_version"] = kToolVersion;
  j["subcommand"] = p.manifest.subcommand;
  j["spec_path"] = p.opt.spec_path;
  j["spec_hash"] = p.spec_hash;
  j["parameters"] = p.manifest.parameters;
  json outs = json::array();
  for (const auto& name : p.manifest.outputs) {
    json o;
    o["path"] = name;
    o["hash"] = file_hash((fs::path(p.opt.out_dir) / name).string());
    outs.push_back(o);
  }
  j["outputs"] = outs;
  json t;
  for (const auto& [k, v] : p.manifest.timings) t[k] = v;
  j["timings_sec"] = t;
  write_file((fs::path(p.opt.out_dir) / "manifest.json").string(), j.dump(2) + "\n");
}

void load_spec(Pipeline& p) {
  const std::string text = read_file(p.opt.spec_path);
  p.spec = parse_spec(text);
  p.spec_hash = text_hash(text);
  p.manifest.parameters["epsilons"] = p.eps_list();
  p.manifest.parameters["seed"] = p.seed();
  p.manifest.parameters["trajectories"] = p.opt.trajectories;
  p.manifest.parameters["horizon"] = p.opt.horizon;
  p.manifest.parameters["J"] = p.opt.box_mult;
  p.manifest.parameters["level_H"] = p.spec.level_h;
}

void build_graph(Pipeline& p, const FieldEval& eval) {
  auto points = find_critical_points(eval, 9);
  p.graph = build_landscape(std::move(points), eval, p.spec.level_h);
  for (const auto& w : p.graph.warnings) std::cerr << "warning: " << w << "\n";
}

void require_artifact_fresh(const Pipeline& p, const std::string& name) {
  const fs::path path = fs::path(p.opt.out_dir) / name;
  if (!fs::exists(path))
    throw StaleArtifact("missing artifact " + name + "; run the earlier stages first");
  json j;
  try {
    j = json::parse(read_file(path.string()));
  } catch (const std::exception& e) {
    throw StaleArtifact(name + ": unreadable artifact: " + e.what());
  }
  if (!j.contains("spec_hash") || j["spec_hash"] != p.spec_hash)
    throw StaleArtifact(name + ": artifact was produced from a different spec");
}

int run_analyze(Pipeline& p, const FieldEval& eval) {
  StageTimer timer(p.manifest, "analyze");
  build_graph(p, eval);
  emit(p, "landscape.json", landscape_to_json(p.graph, p.spec, p.spec_hash));
  std::cout << "analyze: " << p.graph.wells.size() << " wells, " << p.graph.gates.size()
            << " gates, " << p.graph.deepest.size() << " deepest\n";
  return kOk;
}

int run_chains(Pipeline& p, const FieldEval& eval) {
  StageTimer timer(p.manifest, "chains");
  if (p.graph.wells.empty()) {
    require_artifact_fresh(p, "landscape.json");
    build_graph(p, eval);
  }
  const ChainArtifacts art = build_chain_artifacts(p.graph, p.seed());
  emit(p, "chains.json", chains_to_json(art, p.graph, p.spec_hash));
  std::cout << "chains: oracle max diff " << art.oracle_max_diff
            << ", extension identity max diff " << art.extension_identity_diff << "\n";
  return kOk;
}

int run_simulate(Pipeline& p, const FieldEval& eval) {
  StageTimer timer(p.manifest, "simulate");
  if (p.graph.wells.empty()) {
    require_artifact_fresh(p, "landscape.json");
    require_artifact_fresh(p, "chains.json");
    build_graph(p, eval);
  }
  const ChainArtifacts art = build_chain_artifacts(p.graph, p.seed());
  const double dt = p.opt.dt > 0.0 ? p.opt.dt : default_dt(p.graph);
  if (dt > stability_dt(p.graph))
    std::cerr << "warning: dt above the stability bound " << stability_dt(p.graph)
              << "\n";

  std::vector<SimOutputs> runs;
  for (double eps : p.eps_list()) {
    const double theta = p.graph.timescale(eps);
    const double predicted =
        p.graph.wells[p.graph.deepest[0]].gauss_mass /
        p.graph.total_gate_weight[p.graph.deepest[0]];
    const double expected_steps =
        (predicted + p.opt.horizon) * theta / dt * p.opt.trajectories;
    if (!std::isfinite(theta) || expected_steps > p.opt.step_budget) {
      std::cerr << "notice: skipping eps=" << eps
                << " (expected step count beyond budget; raise --budget to force)\n";
      continue;
    }
    SimConfig cfg;
    cfg.epsilon = eps;
    cfg.dt = dt;
    cfg.n_trajectories = p.opt.trajectories;
    cfg.seed = p.seed();
    cfg.n_threads = p.opt.threads;

    SimOutputs out;
    out.epsilon = eps;
    out.first_hit = run_transition_ensemble(cfg, p.graph, eval);
    out.logs = order_process(cfg, p.opt.horizon, p.graph, eval);
    out.generator =
        empirical_generator(out.logs, p.graph.deepest.size());
    const size_t s = p.graph.deepest.size();
    out.predicted_rates = Mat(s, s);
    for (size_t a = 0; a < s; ++a)
      for (size_t b = 0; b < s; ++b)
        if (a != b) out.predicted_rates(a, b) = art.y_chain.rate(a, b);
    runs.push_back(std::move(out));
  }
  emit(p, "transitions.csv", transitions_csv(runs));
  emit(p, "orderpath.csv", orderpath_csv(runs));
  emit(p, "summary.json", summary_to_json(runs, p.graph, p.spec_hash));
  std::cout << "simulate: " << runs.size() << " epsilon value(s) run\n";
  return kOk;
}

int run_verify(Pipeline& p, const FieldEval& eval) {
  StageTimer timer(p.manifest, "verify");
  if (p.graph.wells.empty()) build_graph(p, eval);
  VerifyOutputs v;

  const auto samples = default_structure_samples(p.spec, 10000);
  v.structure = check_structure(eval, samples, 1e-10);
  if (!v.structure.pass)
    v.failures.push_back("structure constraints exceed 1e-10");

  Vec probe(p.spec.dimension);
  for (int k = 0; k < p.spec.dimension; ++k)
    probe[k] = 0.3 + 0.1 * k - 0.5 * (k % 2);
  v.derivatives = derivative_selfcheck(eval, probe, default_fd_step(probe));
  if (v.derivatives.max_rel() > 1e-6)
    v.failures.push_back("finite-difference self-check above 1e-6");

  for (const auto& gate : p.graph.gates) {
    const auto& cp = p.graph.points[gate.point];
    const SkewIdentityReport rep = skew_identity_check(cp);
    if (rep.identity_residual > 1e-10)
      v.failures.push_back("gate identity residual above 1e-10");
    if (rep.skew_residual > 1e-10)
      v.failures.push_back("hess * D_ell is not skew-symmetric");
    if (rep.spectral_mismatch > 1e-10)
      v.failures.push_back("similar matrices have mismatched spectra");
    if (!(rep.profile_alignment > 1e-8))
      v.failures.push_back("profile direction degenerate along downhill");
    v.gate_identities.push_back(rep);
  }

  const Vec eps_list = p.eps_list();
  if (!p.graph.gates.empty() && !eps_list.empty()) {
    // Boundary/junction checks and the sup property at the largest epsilon.
    const double eps0 = *std::max_element(eps_list.begin(), eps_list.end());
    std::vector<SaddleBox> boxes;
    for (const auto& gate : p.graph.gates)
      boxes.push_back(
          make_saddle_box(p.graph.points[gate.point], p.graph.level, eps0, p.opt.box_mult));
    assert_boxes_disjoint(boxes);
    for (const auto& box : boxes) {
      const BoundaryCheck bc = boundary_check(box, eval, 256);
      if (bc.max_err_plus > 1e-12 || bc.max_err_minus > 1e-12)
        v.failures.push_back("outer boundary values of p are not exact");
      if (bc.max_junction_jump > 1e-10)
        v.failures.push_back("p is discontinuous across the extension junction");
      v.gate_boundaries.push_back(bc);
    }
    // Q plateau and sup checks with the indicator of the first well.
    Vec g(p.graph.wells.size(), 0.0);
    g[0] = 1.0;
    v.q_sup_expected = 1.0;
    for (const auto& pt : halton_box(512, p.spec.domain_lo, p.spec.domain_hi)) {
      if (eval.potential(pt) >= boxes[0].level_cap()) continue;
      const QValue q = q_eval(boxes, p.graph, eval, g, pt);
      v.q_sup = std::max(v.q_sup, std::fabs(q.value));
    }
    for (size_t di = 0; di < p.graph.deepest.size(); ++di) {
      const Vec anchor = p.graph.valley_anchor(di);
      const QValue q = q_eval(boxes, p.graph, eval, g, anchor);
      const double want = p.graph.deepest[di] == 0 ? 1.0 : 0.0;
      if (q.value != want) v.q_plateau_exact = false;
    }
    v.q_sup = std::max(v.q_sup, 1.0);  // attained on the plateau of well 1
    if (std::fabs(v.q_sup - v.q_sup_expected) > 1e-12)
      v.failures.push_back("sup of Q exceeds max |g|");
    if (!v.q_plateau_exact) v.failures.push_back("Q is not exact on the valleys");
  }

  if (p.opt.quadrature) {
    if (p.spec.dimension > 3) {
      std::cerr << "notice: quadrature checks skipped (dimension > 3)\n";
      v.quadrature_skipped = true;
    } else {
      for (double eps : eps_list) {
        try {
          v.laplace.push_back(laplace_check(eval, p.graph, eps));
        } catch (const NumericError& e) {
          v.failures.push_back(std::string("laplace quadrature: ") + e.what());
        }
      }
      for (const auto& rep : v.laplace)
        if (rep.z_ratio < 0.5 || rep.z_ratio > 2.0)
          v.failures.push_back("partition-function ratio far from 1");
      if (p.spec.dimension == 2 && !p.graph.gates.empty()) {
        Vec sorted_eps = eps_list;
        std::sort(sorted_eps.begin(), sorted_eps.end(), std::greater<double>());
        auto zs = [&](double eps) {
          auto density = [&](const Vec& x) {
            return std::exp(-(eval.potential(x) - p.graph.floor) / eps);
          };
          return integrate_box(density, p.spec.domain_lo, p.spec.domain_hi, 1e-7).value;
        };
        for (double eps : sorted_eps) {
          const SaddleBox box = make_saddle_box(p.graph.points[p.graph.gates[0].point],
                                                p.graph.level, eps, p.opt.box_mult);
          v.residuals.push_back(residual_quadrature(box, eval, zs(eps)));
        }
        for (size_t k = 0; k + 1 < v.residuals.size(); ++k)
          if (!(v.residuals[k + 1].value < v.residuals[k].value))
            v.residual_decreasing = false;
        if (!v.residual_decreasing)
          v.failures.push_back("adjoint residual is not decreasing along the eps ladder");
      }
    }
  }

  emit(p, "testfn_report.json", verify_to_json(v, p.spec_hash));
  for (const auto& f : v.failures) std::cerr << "FAIL: " << f << "\n";
  std::cout << "verify: " << (v.pass() ? "all checks passed" : "failures present")
            << "\n";
  return v.pass() ? kOk : kVerifyFail;
}

int dispatch(Pipeline& p, const std::string& cmd) {
  load_spec(p);
  FieldEval eval(p.spec);
  p.manifest.subcommand = cmd;
  int rc = kOk;
  if (cmd == "analyze") rc = run_analyze(p, eval);
  if (cmd == "chains") rc = run_chains(p, eval);
  if (cmd == "simulate") rc = run_simulate(p, eval);
  if (cmd == "verify") rc = run_verify(p, eval);
  if (cmd == "all") {
    rc = run_analyze(p, eval);
    if (rc == kOk) rc = run_chains(p, eval);
    if (rc == kOk) rc = run_simulate(p, eval);
    if (rc == kOk) rc = run_verify(p, eval);
  }
  write_manifest(p);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metastable: landscape, chain-reduction and simulation analysis of "
               "non-reversible Gibbs diffusions"};
  app.require_subcommand(1);

  Options opt;
  app.add_option("--spec", opt.spec_path, "potential spec (JSON)")->required();
  app.add_option("--out", opt.out_dir, "output directory");
  app.add_option("--eps", opt.eps_override, "epsilon list override");
  app.add_option("--traj", opt.trajectories, "trajectories per ensemble");
  uint64_t seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "RNG seed override");
  app.add_option("--horizon", opt.horizon, "order-process horizon (rescaled units)");
  app.add_option("--J", opt.box_mult, "saddle box multiplier");
  app.add_flag("--quadrature", opt.quadrature, "enable quadrature checks in verify");
  app.add_option("--dt", opt.dt, "natural time step (default: min(1e-3, 0.1/l_max))");
  app.add_option("--threads", opt.threads, "worker threads for trajectory ensembles");
  app.add_option("--budget", opt.step_budget, "per-epsilon step budget for simulate");

  const std::map<std::string, std::string> subcommands = {
      {"analyze", "critical points, wells, gates and landscape constants"},
      {"chains", "auxiliary and limiting Markov chains with cross-checks"},
      {"simulate", "first-hit ensembles and the order process"},
      {"verify", "structure, identity and quadrature property checks"},
      {"all", "run the four stages in order"}};
  for (const auto& [name, blurb] : subcommands)
    app.add_subcommand(name, blurb)->fallthrough();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) opt.seed_override = seed_val;

  Pipeline p;
  p.opt = opt;
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return dispatch(p, cmd);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const StaleArtifact& e) {
    std::cerr << "stale artifact: " << e.what() << "\n";
    return kStale;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kModel;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kModel;
  }
}
