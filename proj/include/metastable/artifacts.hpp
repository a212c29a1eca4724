#pragma once

#include <string>
#include <vector>

#include "metastable/chain.hpp"
#include "metastable/landscape.hpp"
#include "metastable/sde.hpp"
#include "metastable/testfn.hpp"

namespace metastable {

std::string read_file(const std::string& path);          // throws ParseError
void write_file(const std::string& path, const std::string& content);
std::string file_hash(const std::string& path);          // fnv1a64 hex of bytes
std::string text_hash(const std::string& text);

// landscape.json
std::string landscape_to_json(const LandscapeGraph& g, const PotentialSpec& spec,
                              const std::string& spec_hash);

// chains.json content bundle.
struct ChainArtifacts {
  FiniteChain x_chain;
  std::vector<std::string> notices;
  Vec cap_single;   // cap({i}, S* \ {i}) per deepest well
  Mat cap_pair;     // cap({i,j}, S* \ {i,j})
  BetaMatrix beta;
  FiniteChain y_chain;
  Vec nu;                      // well masses on the deepest set
  TraceOracle oracle;
  double oracle_max_diff = 0.0;
  double extension_identity_diff = 0.0;  // harmonic-extension bilinear-form identity
};

// Builds the x-chain, capacities, beta, y-chain and the trace-oracle
// comparison for a landscape with at least two deepest wells.
ChainArtifacts build_chain_artifacts(const LandscapeGraph& g, uint64_t seed);

std::string chains_to_json(const ChainArtifacts& art, const LandscapeGraph& g,
                           const std::string& spec_hash);

// Simulation outputs for one epsilon.
struct SimOutputs {
  double epsilon = 0.0;
  EnsembleStats first_hit;
  std::vector<TransitionLog> logs;
  EmpiricalGenerator generator;
  Mat predicted_rates;  // from the y-chain
};

std::string transitions_csv(const std::vector<SimOutputs>& runs);
std::string orderpath_csv(const std::vector<SimOutputs>& runs);
std::string summary_to_json(const std::vector<SimOutputs>& runs,
                            const LandscapeGraph& g, const std::string& spec_hash);

// Verification report (testfn_report.json).
struct VerifyOutputs {
  StructureReport structure;
  DerivativeReport derivatives;
  std::vector<SkewIdentityReport> gate_identities;
  std::vector<BoundaryCheck> gate_boundaries;
  std::vector<LaplaceReport> laplace;
  std::vector<ResidualReport> residuals;
  bool residual_decreasing = true;
  double q_sup = 0.0;
  double q_sup_expected = 0.0;
  bool q_plateau_exact = true;
  bool quadrature_skipped = false;
  std::vector<std::string> failures;
  bool pass() const { return failures.empty(); }
};

std::string verify_to_json(const VerifyOutputs& v, const std::string& spec_hash);

// Minimal structural validator for the shipped schemas: supports type,
// required, properties, items and enum. Returns human-readable problems.
std::vector<std::string> validate_against_schema(const std::string& json_text,
                                                 const std::string& schema_text);

}  // namespace metastable
