#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "fixtures.hpp"
#include "metastable/artifacts.hpp"

using namespace metastable;
namespace fs = std::filesystem;

namespace {

struct Built {
  PotentialSpec spec;
  FieldEval eval;
  LandscapeGraph graph;
  explicit Built(const std::string& doc) : spec(parse_spec(doc)), eval(spec) {
    auto pts = find_critical_points(eval, 9);
    graph = build_landscape(std::move(pts), eval, spec.level_h);
  }
};

std::string schema(const std::string& name) {
  return read_file(std::string(SCHEMA_DIR) + "/" + name);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("landscape artifact validates against its schema") {
  const Built b(fixtures::double_well(0.0));
  const std::string doc = landscape_to_json(b.graph, b.spec, "abc123");
  const auto problems = validate_against_schema(doc, schema("landscape.schema.json"));
  for (const auto& p : problems) MESSAGE(p);
  CHECK(problems.empty());
}

TEST_CASE("chains artifact validates against its schema") {
  const Built b(fixtures::triple_well());
  const ChainArtifacts art = build_chain_artifacts(b.graph, 3);
  const std::string doc = chains_to_json(art, b.graph, "abc123");
  const auto problems = validate_against_schema(doc, schema("chains.schema.json"));
  for (const auto& p : problems) MESSAGE(p);
  CHECK(problems.empty());
}

TEST_CASE("summary and verify artifacts validate against their schemas") {
  const Built b(fixtures::double_well(0.0));
  SimOutputs run;
  run.epsilon = 0.2;
  run.first_hit.n = 2;
  run.first_hit.dt = 1e-3;
  run.first_hit.hits.push_back({0, 0, 1, 12.5, 0.084});
  run.first_hit.hits.push_back({1, 0, std::nullopt, 99.0, 0.7});
  TransitionLog log;
  log.order_path = {{0, 0.5, false}, {1, 0.25, true}};
  run.logs.push_back(log);
  run.generator = empirical_generator(run.logs, 2, 1);
  run.predicted_rates = Mat(2, 2);
  const std::string sj = summary_to_json({run}, b.graph, "cafe");
  auto problems = validate_against_schema(sj, schema("summary.schema.json"));
  for (const auto& p : problems) MESSAGE(p);
  CHECK(problems.empty());

  VerifyOutputs v;
  v.structure.samples = 10;
  v.gate_identities.push_back({});
  v.gate_boundaries.push_back({});
  v.laplace.push_back({});
  v.residuals.push_back({});
  const std::string vj = verify_to_json(v, "cafe");
  problems = validate_against_schema(vj, schema("testfn.schema.json"));
  for (const auto& p : problems) MESSAGE(p);
  CHECK(problems.empty());
}

TEST_CASE("csv emitters produce the documented columns") {
  SimOutputs run;
  run.epsilon = 0.2;
  run.first_hit.hits.push_back({0, 0, 1, 12.5, 0.084});
  run.first_hit.n = 1;
  TransitionLog log;
  log.trajectory = 0;
  log.order_path = {{0, 0.5, false}, {1, 0.25, true}};
  run.logs.push_back(log);
  const std::string tr = transitions_csv({run});
  CHECK(tr.find("trajectory,from_valley,to_valley,tau_natural,tau_rescaled\n") == 0);
  CHECK(tr.find("0,1,2,12.5,0.084") != std::string::npos);
  const std::string op = orderpath_csv({run});
  CHECK(op.find("trajectory,state,holding_rescaled\n") == 0);
  CHECK(op.find("0,1,0.5") != std::string::npos);
  CHECK(op.find("0,2,0.25") != std::string::npos);
}

TEST_CASE("cli: analyze emits a landscape and exits cleanly") {
  TempDir out("msd_cli_analyze");
  const std::string spec = std::string(SPEC_DIR) + "/double_well_c0.json";
  CHECK(run_cli("analyze --spec " + spec + " --out " + out.str()) == 0);
  CHECK(fs::exists(out.path / "landscape.json"));
  CHECK(fs::exists(out.path / "manifest.json"));
  const std::string doc = read_file((out.path / "landscape.json").string());
  const auto problems = validate_against_schema(doc, schema("landscape.schema.json"));
  CHECK(problems.empty());
  CHECK(doc.find("\"rate_const\"") != std::string::npos);
  // manifest lists every emitted file
  const std::string man = read_file((out.path / "manifest.json").string());
  CHECK(man.find("landscape.json") != std::string::npos);
  CHECK(validate_against_schema(man, schema("manifest.schema.json")).empty());
}

TEST_CASE("cli: malformed spec exits 2 with no partial outputs") {
  TempDir out("msd_cli_bad");
  const std::string bad = (out.path / "bad.json").string();
  write_file(bad, "{ not json");
  CHECK(run_cli("analyze --spec " + bad + " --out " + out.str() + "/o") == 2);
  CHECK_FALSE(fs::exists(out.path / "o" / "landscape.json"));
}

TEST_CASE("cli: non-skew matrix is a parse failure") {
  TempDir out("msd_cli_skew");
  const std::string bad = (out.path / "bad_skew.json").string();
  std::string doc = fixtures::double_well(1.0);
  const std::string fwd = "[[0.0, 1.000000], [-1.000000, 0.0]]";
  doc.replace(doc.find(fwd), fwd.size(), "[[0.0, 1.0], [0.0, 0.0]]");
  write_file(bad, doc);
  CHECK(run_cli("verify --spec " + bad + " --out " + out.str() + "/o") == 2);
}

TEST_CASE("cli: chains guards the trivial single-well case with exit 3") {
  TempDir out("msd_cli_triv");
  const std::string spec = (out.path / "bowl.json").string();
  write_file(spec, fixtures::quadratic_bowl());
  CHECK(run_cli("analyze --spec " + spec + " --out " + out.str() + "/o") == 0);
  CHECK(run_cli("chains --spec " + spec + " --out " + out.str() + "/o") == 3);
}

TEST_CASE("cli: simulate without artifacts exits 4, stale hash exits 4") {
  TempDir out("msd_cli_stale");
  const std::string spec = std::string(SPEC_DIR) + "/double_well_c0.json";
  CHECK(run_cli("simulate --spec " + spec + " --out " + out.str()) == 4);
  // produce artifacts, then point simulate at a different spec
  CHECK(run_cli("analyze --spec " + spec + " --out " + out.str()) == 0);
  CHECK(run_cli("chains --spec " + spec + " --out " + out.str()) == 0);
  const std::string other = std::string(SPEC_DIR) + "/double_well_c1.json";
  CHECK(run_cli("simulate --spec " + other + " --out " + out.str()) == 4);
}

TEST_CASE("cli: below-saddle level reports gates empty and exits 0") {
  TempDir out("msd_cli_below");
  std::string doc = fixtures::double_well(0.0);
  const std::string level = "\"level_H\": 1.0";
  doc.replace(doc.find(level), level.size(), "\"level_H\": 0.5");
  const std::string spec = (out.path / "below.json").string();
  write_file(spec, doc);
  CHECK(run_cli("analyze --spec " + spec + " --out " + out.str() + "/o") == 0);
  const std::string art = read_file((out.path / "o" / "landscape.json").string());
  CHECK(art.find("\"gates\": []") != std::string::npos);
}

TEST_CASE("cli: analyze twice is byte-identical") {
  TempDir out("msd_cli_det");
  const std::string spec = std::string(SPEC_DIR) + "/double_well_c1.json";
  CHECK(run_cli("analyze --spec " + spec + " --out " + out.str() + "/a") == 0);
  CHECK(run_cli("analyze --spec " + spec + " --out " + out.str() + "/b") == 0);
  CHECK(read_file((out.path / "a" / "landscape.json").string()) ==
        read_file((out.path / "b" / "landscape.json").string()));
}

TEST_CASE("cli: d=4 spec skips quadrature parts with a notice") {
  TempDir out("msd_cli_d4");
  const std::string doc = R"({
    "dimension": 4,
    "potential": {"terms": [
      {"coeff": 1.0, "powers": [4, 0, 0, 0]},
      {"coeff": -2.0, "powers": [2, 0, 0, 0]},
      {"coeff": 1.0, "powers": [0, 0, 0, 0]},
      {"coeff": 1.0, "powers": [0, 2, 0, 0]},
      {"coeff": 1.0, "powers": [0, 0, 2, 0]},
      {"coeff": 1.0, "powers": [0, 0, 0, 2]}
    ]},
    "ell": {"kind": "zero"},
    "domain": {"lower": [-1.5, -1.5, -1.5, -1.5], "upper": [1.5, 1.5, 1.5, 1.5]},
    "level_H": 1.0, "epsilons": [0.1], "r0": 0.2, "seed": 2
  })";
  const std::string spec = (out.path / "d4.json").string();
  write_file(spec, doc);
  CHECK(run_cli("verify --quadrature --spec " + spec + " --out " + out.str() + "/o") ==
        0);
  const std::string rep = read_file((out.path / "o" / "testfn_report.json").string());
  CHECK(rep.find("\"quadrature_skipped\": true") != std::string::npos);
}

TEST_CASE("hashing is stable") {
  CHECK(text_hash("abc") == text_hash("abc"));
  CHECK(text_hash("abc") != text_hash("abd"));
  CHECK(text_hash("abc").size() == 16);
}
