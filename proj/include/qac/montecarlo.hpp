#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "qac/csv.hpp"
#include "qac/digraph.hpp"
#include "qac/prng.hpp"
#include "qac/simulator.hpp"

namespace qac {

// Sweep over a bits x zoom-factor grid with repeated trials. Trial t draws
// from seed base_seed + t: the same seed feeds the graph generator (when no
// fixed graph is given) and the initial-state draw, so a trial sees the
// same graph and the same x0 in every cell of the grid.
struct ExperimentSpec {
  std::optional<Digraph> fixed_graph;
  int gen_n = 5;
  double gen_extra_edge_prob = 0.3;
  std::optional<int> sync_period;  // default: the per-trial graph diameter
  int trials = 50;
  std::vector<int> bits_grid;
  std::vector<double> alpha_grid;
  double surplus_gain = 0.1;
  std::optional<double> epsilon;   // present: distributed-stop runs; absent: asymptotic
  long max_rounds = 200000;
  double convergence_tol = 1e-8;
  double x0_lo = 0.0, x0_hi = 1000.0;
  std::optional<std::vector<double>> x0_explicit;
  CoordInit coord_init = CoordInit::FromState;
  double step0 = 1.0;
  double midpoint0 = 0.0;
  std::uint64_t base_seed = 1;
  int jobs = 1;

  void validate() const {
    if (trials < 1) throw std::invalid_argument("experiment: need at least one trial");
    if (bits_grid.empty() || alpha_grid.empty())
      throw std::invalid_argument("experiment: parameter grids must be nonempty");
    if (!x0_explicit && !(x0_lo < x0_hi))
      throw std::invalid_argument("experiment: initial-state interval must be nonempty");
    if (jobs < 1) throw std::invalid_argument("experiment: jobs must be at least 1");
    if (!fixed_graph && gen_n < 2)
      throw std::invalid_argument("experiment: generated graphs need at least two nodes");
  }
};

struct MonteCarloRow {
  int trial = 0;
  int n = 0;
  int sync_period = 0;
  int bits = 0;
  double alpha = 0.0;
  double gain = 0.0;
  std::optional<double> epsilon;
  bool converged = false;
  long rounds = 0;
  long long total_bits = 0;
  double final_err_l2 = 0.0;
};

// Per-cell arithmetic means. Round and bit means average the converged
// trials only (a censored mean; the converged count says over how many);
// the final-error mean averages every trial.
struct AggregateRow {
  int bits = 0;
  double alpha = 0.0;
  int trials = 0;
  int converged = 0;
  double mean_rounds = 0.0;
  double mean_total_bits = 0.0;
  double mean_final_err_l2 = 0.0;
};

struct MonteCarloResult {
  std::vector<MonteCarloRow> rows;        // (bits, alpha, trial) order
  std::vector<AggregateRow> aggregates;   // (bits, alpha) order
};

inline std::vector<double> draw_initial_state(int n, double lo, double hi,
                                              std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> x0(n);
  for (double& v : x0) v = rng.uniform(lo, hi);
  return x0;
}

inline SimConfig experiment_cell_config(const ExperimentSpec& spec, int bits,
                                        double alpha, int trial) {
  const std::uint64_t seed = spec.base_seed + static_cast<std::uint64_t>(trial);
  SimConfig cfg;
  cfg.graph = spec.fixed_graph
                  ? *spec.fixed_graph
                  : random_strongly_connected(spec.gen_n, spec.gen_extra_edge_prob, seed);
  cfg.params.surplus_gain = spec.surplus_gain;
  cfg.params.zoom_factor = alpha;
  cfg.params.bits = bits;
  cfg.params.sync_period = spec.sync_period ? *spec.sync_period : diameter(cfg.graph);
  cfg.params.epsilon = spec.epsilon;
  cfg.params.coord_init = spec.coord_init;
  cfg.params.step0 = spec.step0;
  cfg.params.midpoint0 = spec.midpoint0;
  cfg.x0 = spec.x0_explicit ? *spec.x0_explicit
                            : draw_initial_state(cfg.graph.n, spec.x0_lo, spec.x0_hi, seed);
  cfg.max_rounds = spec.max_rounds;
  cfg.mode = spec.epsilon ? SimMode::EpsilonStop : SimMode::Asymptotic;
  cfg.convergence_tol = spec.convergence_tol;
  cfg.snapshot_every = spec.max_rounds + 1;  // final snapshot only
  cfg.seed = seed;
  return cfg;
}

inline MonteCarloRow run_experiment_cell(const ExperimentSpec& spec, int bits,
                                         double alpha, int trial) {
  const SimConfig cfg = experiment_cell_config(spec, bits, alpha, trial);
  const Trace tr = run(cfg);
  MonteCarloRow row;
  row.trial = trial;
  row.n = cfg.graph.n;
  row.sync_period = cfg.params.sync_period;
  row.bits = bits;
  row.alpha = alpha;
  row.gain = spec.surplus_gain;
  row.epsilon = spec.epsilon;
  if (spec.epsilon) {
    row.converged = tr.terminated;
    row.rounds = tr.terminated ? *tr.k_star : tr.rounds_executed;
  } else {
    row.converged = tr.converged;
    row.rounds = (tr.converged && tr.rounds_to_tol) ? *tr.rounds_to_tol
                                                    : tr.rounds_executed;
  }
  row.total_bits = tr.total_bits;
  row.final_err_l2 = tr.snapshots.back().err_l2;
  return row;
}

inline MonteCarloResult run_montecarlo(const ExperimentSpec& spec) {
  spec.validate();
  struct Task {
    int bits;
    double alpha;
    int trial;
  };
  std::vector<Task> tasks;
  for (int bits : spec.bits_grid)
    for (double alpha : spec.alpha_grid)
      for (int t = 0; t < spec.trials; ++t) tasks.push_back({bits, alpha, t});

  MonteCarloResult res;
  res.rows.resize(tasks.size());
  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;
  const int workers =
      std::max(1, std::min<int>(spec.jobs, static_cast<int>(tasks.size())));
  auto worker = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= tasks.size() || failed.load()) return;
      try {
        res.rows[i] =
            run_experiment_cell(spec, tasks[i].bits, tasks[i].alpha, tasks[i].trial);
      } catch (...) {
        std::scoped_lock lk(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (int bits : spec.bits_grid) {
    for (double alpha : spec.alpha_grid) {
      AggregateRow agg;
      agg.bits = bits;
      agg.alpha = alpha;
      double sum_rounds = 0.0, sum_bits = 0.0, sum_err = 0.0;
      for (const auto& row : res.rows) {
        if (row.bits != bits || row.alpha != alpha) continue;
        ++agg.trials;
        sum_err += row.final_err_l2;
        if (row.converged) {
          ++agg.converged;
          sum_rounds += static_cast<double>(row.rounds);
          sum_bits += static_cast<double>(row.total_bits);
        }
      }
      agg.mean_rounds = agg.converged ? sum_rounds / agg.converged : std::nan("");
      agg.mean_total_bits = agg.converged ? sum_bits / agg.converged : std::nan("");
      agg.mean_final_err_l2 = agg.trials ? sum_err / agg.trials : std::nan("");
      res.aggregates.push_back(agg);
    }
  }
  return res;
}

inline void write_rows_csv(const MonteCarloResult& res, std::ostream& out) {
  out << "trial,n,dbar,bits,alpha,gamma,epsilon,converged,rounds,total_bits,final_err_l2\n";
  for (const auto& r : res.rows) {
    out << r.trial << ',' << r.n << ',' << r.sync_period << ',' << r.bits << ','
        << fmt_g(r.alpha) << ',' << fmt_g(r.gain) << ','
        << (r.epsilon ? fmt_g(*r.epsilon) : std::string("asymptotic")) << ','
        << (r.converged ? 1 : 0) << ',' << r.rounds << ',' << r.total_bits << ','
        << fmt_g(r.final_err_l2) << '\n';
  }
}

inline void write_aggregate_csv(const MonteCarloResult& res, std::ostream& out) {
  out << "bits,alpha,trials,converged,mean_rounds,mean_total_bits,mean_final_err_l2\n";
  for (const auto& a : res.aggregates) {
    out << a.bits << ',' << fmt_g(a.alpha) << ',' << a.trials << ',' << a.converged << ',';
    if (a.converged) out << fmt_g(a.mean_rounds) << ',' << fmt_g(a.mean_total_bits);
    else out << ',';
    out << ',' << fmt_g(a.mean_final_err_l2) << '\n';
  }
}

}  // namespace qac
