#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metastable/landscape.hpp"
#include "metastable/potential.hpp"

namespace metastable {

struct SimConfig {
  double epsilon = 0.1;
  double dt = 0.0;                  // 0 -> default min(1e-3, 0.1 / lambda_max)
  double max_natural_time = 0.0;    // 0 -> derived from the run kind
  int n_trajectories = 1;
  uint64_t seed = 0;
  size_t start_valley = 0;          // index into graph.deepest
  std::optional<Vec> start_point;   // overrides start_valley
  int n_threads = 1;
};

double default_dt(const LandscapeGraph& graph);
double stability_dt(const LandscapeGraph& graph);  // 0.2 / lambda_max

// One Euler-Maruyama update: x' = x - (grad U + ell) dt + sqrt(2 eps dt) * noise.
Vec em_step(const Vec& state, const FieldEval& eval, double eps, double dt,
            const Vec& noise);

// ---- First-hit ensemble -------------------------------------------------

struct FirstHitResult {
  size_t trajectory = 0;
  size_t from_valley = 0;       // deep-valley order index
  std::optional<size_t> to_valley;  // nullopt => censored
  double tau_natural = 0.0;
  double tau_rescaled = 0.0;    // tau / theta_eps
};

struct EnsembleStats {
  double epsilon = 0.0;
  double dt = 0.0;
  size_t n = 0;
  size_t censored = 0;
  double censored_fraction = 0.0;
  bool unreliable = false;          // censored fraction above 20%
  double mean_rescaled = 0.0;       // over uncensored hits
  double ci_half_width = 0.0;       // 1.96 * s / sqrt(n)
  double predicted = 0.0;           // nu_i / omega_i
  double ratio = 0.0;               // mean / predicted
  std::vector<FirstHitResult> hits;
};

// Mean first-hit time of the other deep valleys, compared with the
// rate-constant prediction.
EnsembleStats run_transition_ensemble(const SimConfig& cfg, const LandscapeGraph& graph,
                                      const FieldEval& eval);

// ---- Order process -------------------------------------------------------

struct OrderStep {
  size_t state = 0;           // deep-valley order index
  double holding_rescaled = 0.0;
  bool censored = false;      // cut off by the horizon, not by a jump
};

struct ValleyVisit {
  size_t state = 0;
  double entry_natural = 0.0;
  double exit_natural = 0.0;
};

struct TransitionLog {
  size_t trajectory = 0;
  double theta = 0.0;
  std::vector<OrderStep> order_path;
  std::vector<ValleyVisit> visits;      // merged visits, one per order step
  double first_hit_natural = -1.0;      // tau_{V* \ V_i}; -1 if never
  double total_natural = 0.0;
  double time_in_valleys_natural = 0.0;  // T_eps horizon in natural units
  double delta_natural = 0.0;            // excursion time outside the valleys
};

// Simulates the sped-up process with the clock running only inside the deep
// valleys; jumps of the excursion-free trace define the order-process path.
// The horizon is in rescaled units (natural horizon = horizon * theta_eps).
std::vector<TransitionLog> order_process(const SimConfig& cfg, double horizon_rescaled,
                                         const LandscapeGraph& graph,
                                         const FieldEval& eval);

// ---- Empirical generator -------------------------------------------------

struct EmpiricalGenerator {
  size_t n_states = 0;
  Mat jump_count;          // i -> j
  Vec holding_total;       // rescaled time per state
  Mat rate;                // jumps / holding
  Mat rate_ci_half;        // 1.96 / sqrt(n) relative band, absolute units
  Vec holding_cov;         // coefficient of variation of completed holdings
  double delta_fraction = 0.0;  // excursion share of natural time
  std::vector<std::string> flags;
};

EmpiricalGenerator empirical_generator(const std::vector<TransitionLog>& logs,
                                       size_t n_states, size_t min_jumps = 50);

// ---- Time change (exposed for tests) --------------------------------------

// Piecewise-constant indicator timeline: segments [t_k, t_{k+1}) with a flag
// for "inside the deep valleys".
struct IndicatorTimeline {
  Vec breaks;                 // ascending, size n+1
  std::vector<bool> inside;   // size n
};

double time_inside(const IndicatorTimeline& tl, double t);         // T_eps
double time_inside_inverse(const IndicatorTimeline& tl, double s);  // S_eps

}  // namespace metastable
