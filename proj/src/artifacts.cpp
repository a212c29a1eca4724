#include "metastable/artifacts.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "metastable/rng.hpp"

namespace metastable {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write file: " + path);
  out << content;
}

std::string text_hash(const std::string& text) {
  return hex64(fnv1a64(text.data(), text.size()));
}

std::string file_hash(const std::string& path) { return text_hash(read_file(path)); }

namespace {

// Shortest round-trip decimal form; used for the CSV cells so that repeated
// runs are byte-identical.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

json mat_json(const Mat& m) {
  json rows = json::array();
  for (size_t i = 0; i < m.n; ++i) {
    json row = json::array();
    for (size_t j = 0; j < m.m; ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

const char* kind_name(PointKind k) {
  switch (k) {
    case PointKind::minimum: return "minimum";
    case PointKind::index1_saddle: return "index1_saddle";
    default: return "other";
  }
}

}  // namespace

std::string landscape_to_json(const LandscapeGraph& g, const PotentialSpec& spec,
                              const std::string& spec_hash) {
  json j;
  j["schema"] = "landscape/1";
  j["spec_hash"] = spec_hash;
  j["dimension"] = spec.dimension;
  j["level_H"] = g.level;
  j["floor"] = g.floor;
  j["valley_radius"] = g.valley_radius;
  j["connected"] = g.connected;
  j["gauss_mass_star"] = g.gauss_mass_star;
  j["max_hessian_eigenvalue"] = g.max_hessian_eigenvalue;

  json pts = json::array();
  for (const auto& p : g.points) {
    json pj;
    pj["x"] = vec_json(p.location);
    pj["U"] = p.value;
    pj["kind"] = kind_name(p.kind);
    pj["hess_eigvals"] = vec_json(p.hess_eigvals);
    pts.push_back(pj);
  }
  j["critical_points"] = pts;

  json wells = json::array();
  for (size_t i = 0; i < g.wells.size(); ++i) {
    const auto& w = g.wells[i];
    json wj;
    wj["index"] = i + 1;
    wj["floor"] = w.floor;
    wj["gauss_mass"] = w.gauss_mass;
    json mins = json::array();
    for (size_t m : w.minima) mins.push_back(vec_json(g.points[m].location));
    wj["minima"] = mins;
    json deep = json::array();
    for (size_t m : w.deepest_minima) deep.push_back(vec_json(g.points[m].location));
    wj["deepest_minima"] = deep;
    wells.push_back(wj);
  }
  j["wells"] = wells;

  json gates = json::array();
  for (const auto& gate : g.gates) {
    const auto& cp = g.points[gate.point];
    json gj;
    gj["wells"] = {gate.well_lo + 1, gate.well_hi + 1};
    gj["x"] = vec_json(cp.location);
    gj["U"] = cp.value;
    gj["hess_eigvals"] = vec_json(cp.hess_eigvals);
    gj["unstable_curvature"] = cp.unstable_curvature;
    gj["escape_rate"] = cp.escape_rate;
    gj["rate_const"] = gate.rate_const;
    gj["downhill"] = vec_json(cp.downhill);
    gj["profile_dir"] = vec_json(cp.profile_dir);
    gates.push_back(gj);
  }
  j["gates"] = gates;
  j["gate_weight"] = mat_json(g.gate_weight);
  j["total_gate_weight"] = vec_json(g.total_gate_weight);

  json deepest = json::array();
  for (size_t i : g.deepest) deepest.push_back(i + 1);
  j["deepest"] = deepest;

  json comps = json::array();
  for (const auto& c : g.components) {
    json cj = json::array();
    for (size_t i : c) cj.push_back(i + 1);
    comps.push_back(cj);
  }
  j["components"] = comps;

  json ts = json::array();
  for (double eps : spec.epsilons) {
    json tj;
    tj["epsilon"] = eps;
    tj["log_theta"] = g.log_timescale(eps);
    const double theta = g.timescale(eps);
    if (std::isfinite(theta))
      tj["theta"] = theta;
    else
      tj["theta"] = nullptr;
    ts.push_back(tj);
  }
  j["timescales"] = ts;
  j["warnings"] = g.warnings;
  return j.dump(2) + "\n";
}

ChainArtifacts build_chain_artifacts(const LandscapeGraph& g, uint64_t seed) {
  if (g.deepest.size() < 2)
    throw ModelError("Markov chain description is trivial: fewer than two deepest wells");
  ChainArtifacts art;
  ChainBuildResult built = chain_from_landscape(g);
  art.x_chain = built.chain;
  art.notices = built.notices;
  if (built.trivial)
    throw ModelError("Markov chain description is trivial: disconnected gate graph");

  art.beta = beta_matrix(art.x_chain, g.deepest);
  {
    const size_t s = g.deepest.size();
    art.cap_single.assign(s, 0.0);
    art.cap_pair = Mat(s, s);
    auto rest = [&](const std::vector<size_t>& excl) {
      std::vector<size_t> r;
      for (size_t v : g.deepest)
        if (std::find(excl.begin(), excl.end(), v) == excl.end()) r.push_back(v);
      return r;
    };
    for (size_t a = 0; a < s; ++a)
      art.cap_single[a] = capacity(art.x_chain, {g.deepest[a]}, rest({g.deepest[a]}));
    for (size_t a = 0; a < s; ++a)
      for (size_t b = a + 1; b < s; ++b) {
        art.cap_pair(a, b) = capacity(art.x_chain, {g.deepest[a], g.deepest[b]},
                                      rest({g.deepest[a], g.deepest[b]}));
        art.cap_pair(b, a) = art.cap_pair(a, b);
      }
  }
  art.nu.resize(g.deepest.size());
  for (size_t a = 0; a < g.deepest.size(); ++a)
    art.nu[a] = g.wells[g.deepest[a]].gauss_mass;
  art.y_chain = limiting_chain(art.beta, art.nu);

  art.oracle = trace_oracle(art.x_chain, g.deepest);
  for (size_t a = 0; a < g.deepest.size(); ++a)
    for (size_t b = 0; b < g.deepest.size(); ++b) {
      if (a == b) continue;
      art.oracle_max_diff = std::max(
          art.oracle_max_diff,
          std::fabs(art.oracle.measure_rate(a, b) - art.beta.value(a, b)));
    }

  // Harmonic-extension bilinear identity on random data.
  double nu_star = 0.0;
  for (double v : art.nu) nu_star += v;
  PhiloxStream rng(seed, 0xd1e5);
  const size_t s = g.deepest.size();
  for (int trial = 0; trial < 10; ++trial) {
    Vec u(s), v(s);
    for (size_t i = 0; i < s; ++i) {
      u[i] = 2.0 * rng.uniform() - 1.0;
      v[i] = 2.0 * rng.uniform() - 1.0;
    }
    const Vec ue = harmonic_extension(art.x_chain, g.deepest, u);
    const Vec ve = harmonic_extension(art.x_chain, g.deepest, v);
    const double dx = dirichlet_form(art.x_chain, ue, ve);
    const double dy = limiting_form(art.y_chain, u, v);
    art.extension_identity_diff = std::max(art.extension_identity_diff, std::fabs(dx - nu_star * dy));
  }
  return art;
}

std::string chains_to_json(const ChainArtifacts& art, const LandscapeGraph& g,
                           const std::string& spec_hash) {
  json j;
  j["schema"] = "chains/1";
  j["spec_hash"] = spec_hash;
  j["x_chain"]["weights"] = mat_json(art.x_chain.weight);
  j["x_chain"]["measure"] = vec_json(art.x_chain.measure);
  {
    const size_t n = art.x_chain.size();
    Mat rates(n, n);
    for (size_t i = 0; i < n; ++i)
      for (size_t k = 0; k < n; ++k)
        rates(i, k) = i == k ? 0.0 : art.x_chain.rate(i, k);
    j["x_chain"]["rates"] = mat_json(rates);
  }
  json states = json::array();
  for (size_t i : g.deepest) states.push_back(i + 1);
  j["y_chain"]["states"] = states;
  j["y_chain"]["measure"] = vec_json(art.nu);
  {
    const size_t n = art.y_chain.size();
    Mat rates(n, n);
    for (size_t i = 0; i < n; ++i)
      for (size_t k = 0; k < n; ++k)
        rates(i, k) = i == k ? 0.0 : art.y_chain.rate(i, k);
    j["y_chain"]["rates"] = mat_json(rates);
  }
  j["capacities"]["single"] = vec_json(art.cap_single);
  j["capacities"]["pair"] = mat_json(art.cap_pair);
  j["beta"] = mat_json(art.beta.value);
  j["trace_oracle"]["measure_rate"] = mat_json(art.oracle.measure_rate);
  j["trace_oracle"]["max_abs_diff"] = art.oracle_max_diff;
  j["extension_identity"]["max_abs_diff"] = art.extension_identity_diff;
  j["notices"] = art.notices;
  return j.dump(2) + "\n";
}

std::string transitions_csv(const std::vector<SimOutputs>& runs) {
  std::ostringstream os;
  os << "trajectory,from_valley,to_valley,tau_natural,tau_rescaled\n";
  for (const auto& run : runs)
    for (const auto& h : run.first_hit.hits) {
      os << h.trajectory << "," << h.from_valley + 1 << ","
         << (h.to_valley ? static_cast<long>(*h.to_valley) + 1 : 0) << ","
         << fmt(h.tau_natural) << "," << fmt(h.tau_rescaled) << "\n";
    }
  return os.str();
}

std::string orderpath_csv(const std::vector<SimOutputs>& runs) {
  std::ostringstream os;
  os << "trajectory,state,holding_rescaled\n";
  for (const auto& run : runs)
    for (const auto& log : run.logs)
      for (const auto& st : log.order_path)
        os << log.trajectory << "," << st.state + 1 << "," << fmt(st.holding_rescaled)
           << "\n";
  return os.str();
}

std::string summary_to_json(const std::vector<SimOutputs>& runs,
                            const LandscapeGraph& g, const std::string& spec_hash) {
  json j;
  j["schema"] = "summary/1";
  j["spec_hash"] = spec_hash;
  json out = json::array();
  for (const auto& run : runs) {
    json rj;
    rj["epsilon"] = run.epsilon;
    rj["dt"] = run.first_hit.dt;
    rj["log_theta"] = g.log_timescale(run.epsilon);
    json fh;
    fh["n"] = run.first_hit.n;
    fh["censored_fraction"] = run.first_hit.censored_fraction;
    fh["unreliable"] = run.first_hit.unreliable;
    fh["mean_rescaled"] = run.first_hit.mean_rescaled;
    fh["ci_half_width"] = run.first_hit.ci_half_width;
    fh["predicted"] = run.first_hit.predicted;
    fh["ratio"] = run.first_hit.ratio;
    rj["first_hit"] = fh;
    json og;
    og["jump_count"] = mat_json(run.generator.jump_count);
    og["holding_total"] = vec_json(run.generator.holding_total);
    og["rates"] = mat_json(run.generator.rate);
    og["rate_ci_half"] = mat_json(run.generator.rate_ci_half);
    og["holding_cov"] = vec_json(run.generator.holding_cov);
    og["delta_fraction"] = run.generator.delta_fraction;
    og["predicted_rates"] = mat_json(run.predicted_rates);
    og["flags"] = run.generator.flags;
    rj["order"] = og;
    out.push_back(rj);
  }
  j["runs"] = out;
  return j.dump(2) + "\n";
}

std::string verify_to_json(const VerifyOutputs& v, const std::string& spec_hash) {
  json j;
  j["schema"] = "testfn/1";
  j["spec_hash"] = spec_hash;
  j["pass"] = v.pass();
  j["failures"] = v.failures;
  j["structure"]["max_orthogonality"] = v.structure.max_orthogonality;
  j["structure"]["max_divergence"] = v.structure.max_divergence;
  j["structure"]["samples"] = v.structure.samples;
  j["structure"]["pass"] = v.structure.pass;
  j["structure"]["growth_assumed"] = v.structure.growth_assumed;
  j["structure"]["warnings"] = v.structure.warnings;
  j["derivatives"]["grad_rel"] = v.derivatives.grad_rel;
  j["derivatives"]["hess_rel"] = v.derivatives.hess_rel;
  j["derivatives"]["ell_jac_rel"] = v.derivatives.ell_jac_rel;
  json gates = json::array();
  for (size_t k = 0; k < v.gate_identities.size(); ++k) {
    json gj;
    gj["identity_residual"] = v.gate_identities[k].identity_residual;
    gj["skew_residual"] = v.gate_identities[k].skew_residual;
    gj["spectral_mismatch"] = v.gate_identities[k].spectral_mismatch;
    gj["profile_alignment"] = v.gate_identities[k].profile_alignment;
    if (k < v.gate_boundaries.size()) {
      gj["boundary_err_plus"] = v.gate_boundaries[k].max_err_plus;
      gj["boundary_err_minus"] = v.gate_boundaries[k].max_err_minus;
      gj["junction_jump"] = v.gate_boundaries[k].max_junction_jump;
    }
    gates.push_back(gj);
  }
  j["gates"] = gates;
  json lap = json::array();
  for (const auto& rep : v.laplace) {
    json lj;
    lj["epsilon"] = rep.epsilon;
    lj["z_ratio"] = rep.z_ratio;
    lj["valley_mass"] = vec_json(rep.valley_mass);
    lj["valley_ratio"] = vec_json(rep.valley_ratio);
    lj["delta_mass"] = rep.delta_mass;
    lj["warnings"] = rep.warnings;
    lap.push_back(lj);
  }
  j["laplace"] = lap;
  json res = json::array();
  for (const auto& rep : v.residuals) {
    json rj;
    rj["epsilon"] = rep.eps;
    rj["J"] = rep.box_mult;
    rj["value"] = rep.value;
    res.push_back(rj);
  }
  j["residuals"] = res;
  j["residual_decreasing"] = v.residual_decreasing;
  j["q_sup"] = v.q_sup;
  j["q_sup_expected"] = v.q_sup_expected;
  j["q_plateau_exact"] = v.q_plateau_exact;
  j["quadrature_skipped"] = v.quadrature_skipped;
  return j.dump(2) + "\n";
}

namespace {

void validate_node(const json& value, const json& schema, const std::string& path,
                   std::vector<std::string>& problems) {
  if (schema.contains("type")) {
    const std::string t = schema["type"];
    const bool ok = (t == "object" && value.is_object()) ||
                    (t == "array" && value.is_array()) ||
                    (t == "string" && value.is_string()) ||
                    (t == "number" && (value.is_number() || value.is_null())) ||
                    (t == "integer" && value.is_number_integer()) ||
                    (t == "boolean" && value.is_boolean());
    if (!ok) {
      problems.push_back(path + ": expected " + t);
      return;
    }
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || e == value;
    if (!found) problems.push_back(path + ": value not in enum");
  }
  if (schema.contains("required"))
    for (const auto& key : schema["required"])
      if (!value.contains(key.get<std::string>()))
        problems.push_back(path + ": missing required member '" +
                           key.get<std::string>() + "'");
  if (schema.contains("properties") && value.is_object())
    for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it)
      if (value.contains(it.key()))
        validate_node(value[it.key()], it.value(), path + "." + it.key(), problems);
  if (schema.contains("items") && value.is_array())
    for (size_t i = 0; i < value.size(); ++i)
      validate_node(value[i], schema["items"],
                    path + "[" + std::to_string(i) + "]", problems);
}

}  // namespace

std::vector<std::string> validate_against_schema(const std::string& json_text,
                                                 const std::string& schema_text) {
  std::vector<std::string> problems;
  json value, schema;
  try {
    value = json::parse(json_text);
    schema = json::parse(schema_text);
  } catch (const json::parse_error& e) {
    problems.push_back(std::string("parse error: ") + e.what());
    return problems;
  }
  validate_node(value, schema, "$", problems);
  return problems;
}

}  // namespace metastable
