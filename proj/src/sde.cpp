#include "metastable/sde.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "metastable/rng.hpp"

namespace metastable {

double stability_dt(const LandscapeGraph& graph) {
  return 0.2 / std::max(graph.max_hessian_eigenvalue, 1e-12);
}

double default_dt(const LandscapeGraph& graph) {
  return std::min(1e-3, 0.1 / std::max(graph.max_hessian_eigenvalue, 1e-12));
}

Vec em_step(const Vec& state, const FieldEval& eval, double eps, double dt,
            const Vec& noise) {
  const size_t d = state.size();
  Vec out(d);
  Vec drift(d);
  eval.drift(state.data(), drift.data());
  const double sigma = std::sqrt(2.0 * eps * dt);
  for (size_t k = 0; k < d; ++k) out[k] = state[k] + drift[k] * dt + sigma * noise[k];
  for (double v : out)
    if (!std::isfinite(v))
      throw NumericError("em_step: non-finite state (step too large?)");
  return out;
}

namespace {

// Flattened deep-valley geometry for the hot loop.
struct ValleyIndex {
  size_t d = 0;
  double r2 = 0.0;
  std::vector<double> centers;      // n * d
  std::vector<size_t> valley_of_center;

  explicit ValleyIndex(const LandscapeGraph& g) {
    d = g.points.empty() ? 0 : g.points[0].location.size();
    r2 = g.valley_radius * g.valley_radius;
    for (size_t di = 0; di < g.deepest.size(); ++di)
      for (size_t m : g.wells[g.deepest[di]].deepest_minima) {
        const Vec& c = g.points[m].location;
        centers.insert(centers.end(), c.begin(), c.end());
        valley_of_center.push_back(di);
      }
  }

  // Returns deep-valley order index or SIZE_MAX.
  size_t locate(const double* x) const {
    const size_t n = valley_of_center.size();
    for (size_t c = 0; c < n; ++c) {
      const double* ctr = centers.data() + c * d;
      double s = 0.0;
      for (size_t k = 0; k < d; ++k) {
        const double dk = x[k] - ctr[k];
        s += dk * dk;
      }
      if (s <= r2) return valley_of_center[c];
    }
    return SIZE_MAX;
  }
};

void validate_cfg(const SimConfig& cfg, const LandscapeGraph& graph) {
  if (cfg.n_trajectories < 1) throw ModelError("sim: need at least one trajectory");
  if (!(cfg.epsilon > 0.0)) throw ModelError("sim: epsilon must be positive");
  if (cfg.dt < 0.0) throw ModelError("sim: dt must be non-negative");
  if (graph.deepest.empty()) throw ModelError("sim: landscape has no deep valleys");
  if (cfg.start_valley >= graph.deepest.size())
    throw ModelError("sim: start valley out of range");
}

template <typename Body>
void run_parallel(int n_threads, int n_trajectories, const Body& body) {
  if (n_threads <= 1) {
    for (int t = 0; t < n_trajectories; ++t) body(t);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::string first_error;
  std::vector<std::thread> pool;
  for (int w = 0; w < n_threads; ++w)
    pool.emplace_back([&] {
      try {
        for (int t = next.fetch_add(1); t < n_trajectories; t = next.fetch_add(1))
          body(t);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (first_error.empty()) first_error = e.what();
      }
    });
  for (auto& th : pool) th.join();
  if (!first_error.empty()) throw NumericError(first_error);
}

}  // namespace

EnsembleStats run_transition_ensemble(const SimConfig& cfg, const LandscapeGraph& graph,
                                      const FieldEval& eval) {
  validate_cfg(cfg, graph);
  const size_t d = static_cast<size_t>(eval.dim());
  const ValleyIndex valleys(graph);
  const double theta = graph.timescale(cfg.epsilon);
  const double dt = cfg.dt > 0.0 ? cfg.dt : default_dt(graph);

  const size_t from = cfg.start_valley;
  const size_t from_well = graph.deepest[from];
  const double omega_i = graph.total_gate_weight[from_well];
  if (!(omega_i > 0.0))
    throw ModelError("run_transition_ensemble: start well has no gates");
  const double predicted = graph.wells[from_well].gauss_mass / omega_i;

  const Vec start = cfg.start_point ? *cfg.start_point : graph.valley_anchor(from);
  const double horizon =
      cfg.max_natural_time > 0.0 ? cfg.max_natural_time : 40.0 * predicted * theta;
  const long max_steps = static_cast<long>(horizon / dt) + 1;

  EnsembleStats stats;
  stats.epsilon = cfg.epsilon;
  stats.dt = dt;
  stats.n = static_cast<size_t>(cfg.n_trajectories);
  stats.predicted = predicted;
  stats.hits.resize(stats.n);

  const double sigma = std::sqrt(2.0 * cfg.epsilon * dt);
  run_parallel(cfg.n_threads, cfg.n_trajectories, [&](int traj) {
    PhiloxStream rng(cfg.seed, static_cast<uint64_t>(traj));
    double xbuf[8];
    double dbuf[8];
    Vec xv(start), dv(d);
    double* x = d <= 8 ? xbuf : xv.data();
    double* dr = d <= 8 ? dbuf : dv.data();
    for (size_t k = 0; k < d; ++k) x[k] = start[k];

    FirstHitResult hit;
    hit.trajectory = static_cast<size_t>(traj);
    hit.from_valley = from;
    long step = 0;
    for (; step < max_steps; ++step) {
      eval.drift(x, dr);
      for (size_t k = 0; k < d; ++k) x[k] += dr[k] * dt + sigma * rng.normal();
      const size_t v = valleys.locate(x);
      if (v != SIZE_MAX && v != from) {
        hit.to_valley = v;
        break;
      }
    }
    if (!std::isfinite(x[0]))
      throw NumericError("trajectory diverged (step too large)");
    hit.tau_natural = static_cast<double>(std::min(step + 1, max_steps)) * dt;
    hit.tau_rescaled = hit.tau_natural / theta;
    stats.hits[static_cast<size_t>(traj)] = hit;
  });

  double sum = 0.0, sum2 = 0.0;
  size_t n_ok = 0;
  for (const auto& h : stats.hits) {
    if (!h.to_valley) {
      ++stats.censored;
      continue;
    }
    sum += h.tau_rescaled;
    sum2 += h.tau_rescaled * h.tau_rescaled;
    ++n_ok;
  }
  stats.censored_fraction = static_cast<double>(stats.censored) / stats.n;
  stats.unreliable = stats.censored_fraction > 0.20;
  if (n_ok > 0) {
    stats.mean_rescaled = sum / n_ok;
    if (n_ok > 1) {
      const double var = (sum2 - sum * sum / n_ok) / (n_ok - 1);
      stats.ci_half_width = 1.96 * std::sqrt(std::max(var, 0.0) / n_ok);
    }
    stats.ratio = stats.mean_rescaled / predicted;
  }
  return stats;
}

std::vector<TransitionLog> order_process(const SimConfig& cfg, double horizon_rescaled,
                                         const LandscapeGraph& graph,
                                         const FieldEval& eval) {
  validate_cfg(cfg, graph);
  if (!(horizon_rescaled > 0.0)) throw ModelError("order_process: horizon must be positive");
  const size_t d = static_cast<size_t>(eval.dim());
  const ValleyIndex valleys(graph);
  const double theta = graph.timescale(cfg.epsilon);
  const double dt = cfg.dt > 0.0 ? cfg.dt : default_dt(graph);
  const double horizon_nat = horizon_rescaled * theta;
  const double cap_nat = cfg.max_natural_time > 0.0 ? cfg.max_natural_time : 1e18;

  const Vec start = cfg.start_point ? *cfg.start_point : graph.valley_anchor(cfg.start_valley);
  {
    const size_t v0 = valleys.locate(start.data());
    if (v0 == SIZE_MAX)
      throw ModelError("order_process: start point is outside the deep valleys");
  }

  std::vector<TransitionLog> logs(static_cast<size_t>(cfg.n_trajectories));
  const double sigma = std::sqrt(2.0 * cfg.epsilon * dt);
  run_parallel(cfg.n_threads, cfg.n_trajectories, [&](int traj) {
    PhiloxStream rng(cfg.seed, static_cast<uint64_t>(traj));
    double xbuf[8];
    double dbuf[8];
    Vec xv(start), dv(d);
    double* x = d <= 8 ? xbuf : xv.data();
    double* dr = d <= 8 ? dbuf : dv.data();
    for (size_t k = 0; k < d; ++k) x[k] = start[k];

    TransitionLog log;
    log.trajectory = static_cast<size_t>(traj);
    log.theta = theta;
    size_t cur = valleys.locate(x);
    double t = 0.0, t_in = 0.0, t_delta = 0.0;
    double holding = 0.0;
    double entry = 0.0, last_in_cur = 0.0;
    while (t_in < horizon_nat && t < cap_nat) {
      eval.drift(x, dr);
      for (size_t k = 0; k < d; ++k) x[k] += dr[k] * dt + sigma * rng.normal();
      t += dt;
      const size_t v = valleys.locate(x);
      if (v == SIZE_MAX) {
        t_delta += dt;
        continue;
      }
      t_in += dt;
      if (v == cur) {
        holding += dt;
        last_in_cur = t;
        continue;
      }
      // Jump of the trace process.
      log.order_path.push_back({cur, holding / theta, false});
      log.visits.push_back({cur, entry, last_in_cur});
      if (log.first_hit_natural < 0.0) log.first_hit_natural = t;
      cur = v;
      holding = dt;
      entry = t;
      last_in_cur = t;
    }
    if (!std::isfinite(x[0]))
      throw NumericError("trajectory diverged (step too large)");
    log.order_path.push_back({cur, holding / theta, true});
    log.visits.push_back({cur, entry, last_in_cur});
    log.total_natural = t;
    log.time_in_valleys_natural = t_in;
    log.delta_natural = t_delta;
    logs[static_cast<size_t>(traj)] = std::move(log);
  });
  return logs;
}

EmpiricalGenerator empirical_generator(const std::vector<TransitionLog>& logs,
                                       size_t n_states, size_t min_jumps) {
  EmpiricalGenerator g;
  g.n_states = n_states;
  g.jump_count = Mat(n_states, n_states);
  g.holding_total.assign(n_states, 0.0);
  g.rate = Mat(n_states, n_states);
  g.rate_ci_half = Mat(n_states, n_states);
  g.holding_cov.assign(n_states, 0.0);

  std::vector<std::vector<double>> completed(n_states);
  double total_nat = 0.0, delta_nat = 0.0;
  for (const auto& log : logs) {
    total_nat += log.total_natural;
    delta_nat += log.delta_natural;
    for (size_t idx = 0; idx < log.order_path.size(); ++idx) {
      const OrderStep& st = log.order_path[idx];
      g.holding_total[st.state] += st.holding_rescaled;
      if (!st.censored && idx + 1 < log.order_path.size()) {
        g.jump_count(st.state, log.order_path[idx + 1].state) += 1.0;
        completed[st.state].push_back(st.holding_rescaled);
      }
    }
  }
  g.delta_fraction = total_nat > 0.0 ? delta_nat / total_nat : 0.0;

  for (size_t i = 0; i < n_states; ++i) {
    double out_jumps = 0.0;
    for (size_t j = 0; j < n_states; ++j) {
      if (i == j || g.holding_total[i] <= 0.0) continue;
      g.rate(i, j) = g.jump_count(i, j) / g.holding_total[i];
      if (g.jump_count(i, j) > 0.0)
        g.rate_ci_half(i, j) = 1.96 * g.rate(i, j) / std::sqrt(g.jump_count(i, j));
      out_jumps += g.jump_count(i, j);
    }
    if (out_jumps < static_cast<double>(min_jumps))
      g.flags.push_back("state " + std::to_string(i + 1) + ": only " +
                        std::to_string(static_cast<long>(out_jumps)) +
                        " jumps recorded; estimates are low-power");
    const auto& h = completed[i];
    if (h.size() > 1) {
      double m = 0.0;
      for (double v : h) m += v;
      m /= static_cast<double>(h.size());
      double var = 0.0;
      for (double v : h) var += (v - m) * (v - m);
      var /= static_cast<double>(h.size() - 1);
      g.holding_cov[i] = m > 0.0 ? std::sqrt(var) / m : 0.0;
    }
  }
  return g;
}

double time_inside(const IndicatorTimeline& tl, double t) {
  double acc = 0.0;
  for (size_t k = 0; k + 1 < tl.breaks.size(); ++k) {
    const double a = tl.breaks[k], b = tl.breaks[k + 1];
    if (t <= a) break;
    if (tl.inside[k]) acc += std::min(t, b) - a;
  }
  return acc;
}

double time_inside_inverse(const IndicatorTimeline& tl, double s) {
  // sup{ u : T(u) <= s }; constant (outside) stretches extend the sup.
  double acc = 0.0;
  for (size_t k = 0; k + 1 < tl.breaks.size(); ++k) {
    const double a = tl.breaks[k], b = tl.breaks[k + 1];
    if (!tl.inside[k]) continue;
    if (acc + (b - a) > s) return a + (s - acc);
    acc += b - a;
  }
  return tl.breaks.back();
}

}  // namespace metastable
