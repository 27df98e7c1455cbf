// Command-line harness: graph generation, single protocol runs with trace
// export, Monte Carlo sweeps, and the spectral certificate.
//
// Exit codes: 0 success, 1 usage/IO/precondition failure, 2 run did not
// meet its convergence or termination criterion within the round budget,
// 3 spectral certificate invalid.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qac/analysis.hpp"
#include "qac/csv.hpp"
#include "qac/digraph.hpp"
#include "qac/montecarlo.hpp"
#include "qac/prng.hpp"
#include "qac/simulator.hpp"
#include "qac/svg_plot.hpp"

namespace {

struct X0Spec {
  bool uniform = true;
  double lo = 0.0, hi = 1000.0;
  std::vector<double> explicit_values;
};

// "uniform:LO:HI" or a comma-separated value list.
X0Spec parse_x0(const std::string& s) {
  X0Spec spec;
  if (s.rfind("uniform:", 0) == 0) {
    const auto rest = s.substr(8);
    const auto colon = rest.find(':');
    if (colon == std::string::npos)
      throw CLI::ValidationError("--x0", "expected uniform:LO:HI");
    spec.lo = std::stod(rest.substr(0, colon));
    spec.hi = std::stod(rest.substr(colon + 1));
    if (!(spec.lo < spec.hi))
      throw CLI::ValidationError("--x0", "uniform range must satisfy LO < HI");
    return spec;
  }
  spec.uniform = false;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) spec.explicit_values.push_back(std::stod(tok));
  if (spec.explicit_values.empty())
    throw CLI::ValidationError("--x0", "expected uniform:LO:HI or a value list");
  return spec;
}

qac::CoordInit parse_coord_init(const std::string& s) {
  if (s == "from_state") return qac::CoordInit::FromState;
  if (s == "zeros") return qac::CoordInit::Zeros;
  throw CLI::ValidationError("--init-coord", "expected from_state or zeros");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  return out;
}

int cmd_gen_graph(int n, double prob, std::uint64_t seed, const std::string& out_path) {
  const qac::Digraph g = qac::random_strongly_connected(n, prob, seed);
  qac::write_graph_file(g, out_path);
  std::cout << "n " << g.n << "\nm " << g.edge_count() << "\ndiameter "
            << qac::diameter(g) << "\n";
  return 0;
}

struct RunArgs {
  std::string graph_path;
  int bits = 8;
  double alpha = 0.2;
  double gamma = 0.1;
  int dbar = 0;  // 0: use the computed diameter
  double epsilon = 0.0;
  bool has_epsilon = false;
  long max_rounds = 100000;
  double tol = 1e-8;
  std::uint64_t seed = 1;
  std::string x0 = "uniform:0:1000";
  std::string trace_path;
  long snapshot_every = 1;
  std::string init_coord = "from_state";
  double step0 = 1.0;
  double midpoint0 = 0.0;
};

int cmd_run(const RunArgs& a) {
  qac::SimConfig cfg;
  cfg.graph = qac::read_graph_file(a.graph_path);
  cfg.params.bits = a.bits;
  cfg.params.zoom_factor = a.alpha;
  cfg.params.surplus_gain = a.gamma;
  cfg.params.sync_period = a.dbar > 0 ? a.dbar : qac::diameter(cfg.graph);
  if (a.has_epsilon) cfg.params.epsilon = a.epsilon;
  cfg.params.coord_init = parse_coord_init(a.init_coord);
  cfg.params.step0 = a.step0;
  cfg.params.midpoint0 = a.midpoint0;
  cfg.max_rounds = a.max_rounds;
  cfg.mode = a.has_epsilon ? qac::SimMode::EpsilonStop : qac::SimMode::Asymptotic;
  cfg.convergence_tol = a.tol;
  cfg.snapshot_every = a.snapshot_every;
  cfg.seed = a.seed;
  const X0Spec x0 = parse_x0(a.x0);
  cfg.x0 = x0.uniform
               ? qac::draw_initial_state(cfg.graph.n, x0.lo, x0.hi, a.seed)
               : x0.explicit_values;

  const qac::Trace tr = qac::run(cfg);
  if (!a.trace_path.empty()) {
    auto out = open_out(a.trace_path);
    qac::write_trace_csv(tr, out);
  }
  const auto& last = tr.snapshots.back();
  std::cout << "mode " << (a.has_epsilon ? "epsilon-stop" : "asymptotic") << "\n"
            << "rounds " << tr.rounds_executed << "\n"
            << "converged " << (tr.converged ? "yes" : "no") << "\n"
            << "terminated " << (tr.terminated ? "yes" : "no") << "\n";
  if (tr.k_star) {
    std::cout << "k_star " << *tr.k_star << "\n"
              << "termination_ok "
              << (qac::verify_termination(tr, cfg.x0, *cfg.params.epsilon) ? "yes" : "no")
              << "\n";
  }
  if (tr.rounds_to_tol) std::cout << "rounds_to_tol " << *tr.rounds_to_tol << "\n";
  std::cout << "total_bits " << tr.total_bits << "\n"
            << "final_err_l2 " << qac::fmt_g(last.err_l2) << "\n"
            << "final_err_inf " << qac::fmt_g(last.err_inf) << "\n"
            << "max_mass_dev " << qac::fmt_g(tr.max_mass_dev) << "\n";
  const bool met = a.has_epsilon ? tr.terminated : tr.converged;
  return met ? 0 : 2;
}

struct MonteCarloArgs {
  std::string graph_path;
  int n = 5;
  double prob = 0.3;
  int trials = 50;
  std::vector<int> bits_grid;
  std::vector<double> alpha_grid;
  double gamma = 0.1;
  double epsilon = 0.0;
  bool has_epsilon = false;
  long max_rounds = 200000;
  double tol = 1e-8;
  double x0_lo = 0.0, x0_hi = 1000.0;
  std::uint64_t base_seed = 1;
  int jobs = 1;
  int dbar = 0;
  std::string rows_path;
  std::string aggregate_path;
  std::string plot_path;
  std::string init_coord = "from_state";
};

int cmd_montecarlo(const MonteCarloArgs& a) {
  qac::ExperimentSpec spec;
  if (!a.graph_path.empty()) spec.fixed_graph = qac::read_graph_file(a.graph_path);
  spec.gen_n = a.n;
  spec.gen_extra_edge_prob = a.prob;
  if (a.dbar > 0) spec.sync_period = a.dbar;
  spec.trials = a.trials;
  spec.bits_grid = a.bits_grid;
  spec.alpha_grid = a.alpha_grid;
  spec.surplus_gain = a.gamma;
  if (a.has_epsilon) spec.epsilon = a.epsilon;
  spec.max_rounds = a.max_rounds;
  spec.convergence_tol = a.tol;
  spec.x0_lo = a.x0_lo;
  spec.x0_hi = a.x0_hi;
  spec.coord_init = parse_coord_init(a.init_coord);
  spec.base_seed = a.base_seed;
  spec.jobs = a.jobs;

  const qac::MonteCarloResult res = qac::run_montecarlo(spec);
  {
    auto out = open_out(a.rows_path);
    qac::write_rows_csv(res, out);
  }
  if (!a.aggregate_path.empty()) {
    auto out = open_out(a.aggregate_path);
    qac::write_aggregate_csv(res, out);
  }
  if (!a.plot_path.empty()) {
    qac::LinePlot plot("mean rounds to convergence", "bits per value", "rounds");
    plot.set_log_y(true);
    for (double alpha : spec.alpha_grid) {
      std::vector<double> xs, ys;
      for (const auto& agg : res.aggregates) {
        if (agg.alpha != alpha || agg.converged == 0) continue;
        xs.push_back(agg.bits);
        ys.push_back(agg.mean_rounds);
      }
      char name[32];
      std::snprintf(name, sizeof name, "alpha=%g", alpha);
      if (!xs.empty()) plot.add_series(name, std::move(xs), std::move(ys));
    }
    auto out = open_out(a.plot_path);
    plot.write(out);
  }
  int converged = 0;
  for (const auto& r : res.rows) converged += r.converged ? 1 : 0;
  std::cout << "cells " << res.aggregates.size() << "\nrows " << res.rows.size()
            << "\nconverged " << converged << "\n";
  return 0;
}

int cmd_spectrum(const std::string& graph_path, double gamma, double unit_tol,
                 double margin, const std::string& csv_path) {
  const qac::Digraph g = qac::read_graph_file(graph_path);
  const qac::SpectralReport rep = qac::spectral_certificate(g, gamma, unit_tol, margin);
  std::cout << qac::spectral_report_text(rep);
  if (!csv_path.empty()) {
    auto out = open_out(csv_path);
    out << qac::spectral_report_csv(rep);
  }
  return rep.valid_gamma ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantized average-consensus protocol harness"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-graph", "generate a random strongly connected digraph");
  int gen_n = 5;
  double gen_prob = 0.3;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--n", gen_n, "node count (>= 2)")->required();
  gen->add_option("--prob", gen_prob, "extra-edge probability in [0,1]");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output graph file")->required();
  gen->set_config("--config", "", "flat key=value config file");

  auto* run = app.add_subcommand("run", "execute one protocol run");
  RunArgs ra;
  run->add_option("--graph", ra.graph_path, "graph file")->required();
  run->add_option("--bits", ra.bits, "wire bits per quantized value");
  run->add_option("--alpha", ra.alpha, "zoom factor");
  run->add_option("--gamma", ra.gamma, "surplus gain");
  run->add_option("--dbar", ra.dbar, "sync period (default: graph diameter)");
  auto* eps_opt = run->add_option("--epsilon", ra.epsilon, "accuracy target enabling the distributed stop rule");
  run->add_option("--max-rounds", ra.max_rounds, "round budget");
  run->add_option("--tol", ra.tol, "convergence tolerance on the estimate spread");
  run->add_option("--seed", ra.seed, "seed for the initial-state draw");
  run->add_option("--x0", ra.x0, "initial state: uniform:LO:HI or comma list");
  run->add_option("--trace", ra.trace_path, "write per-round trace CSV here");
  run->add_option("--snapshot-every", ra.snapshot_every, "trace snapshot stride");
  run->add_option("--init-coord", ra.init_coord, "coordination seeding: from_state or zeros");
  run->add_option("--step0", ra.step0, "initial quantizer step");
  run->add_option("--midpoint0", ra.midpoint0, "initial quantizer midpoint");
  run->set_config("--config", "", "flat key=value config file");

  auto* mc = app.add_subcommand("montecarlo", "sweep a bits x alpha grid over repeated trials");
  MonteCarloArgs ma;
  mc->add_option("--graph", ma.graph_path, "fixed graph file (default: regenerate per trial)");
  mc->add_option("--n", ma.n, "node count for generated graphs");
  mc->add_option("--prob", ma.prob, "extra-edge probability for generated graphs");
  mc->add_option("--trials", ma.trials, "trials per grid cell");
  mc->add_option("--bits-grid", ma.bits_grid, "bit budgets, comma separated")
      ->required()->delimiter(',');
  mc->add_option("--alpha-grid", ma.alpha_grid, "zoom factors, comma separated")
      ->required()->delimiter(',');
  mc->add_option("--gamma", ma.gamma, "surplus gain");
  auto* mc_eps = mc->add_option("--epsilon", ma.epsilon, "accuracy target (absent: asymptotic runs)");
  mc->add_option("--max-rounds", ma.max_rounds, "round budget per run");
  mc->add_option("--tol", ma.tol, "convergence tolerance");
  mc->add_option("--x0-lo", ma.x0_lo, "initial-state interval lower end");
  mc->add_option("--x0-hi", ma.x0_hi, "initial-state interval upper end");
  mc->add_option("--base-seed", ma.base_seed, "trial t uses seed base-seed + t");
  mc->add_option("--jobs", ma.jobs, "worker threads");
  mc->add_option("--dbar", ma.dbar, "sync period override");
  mc->add_option("--rows", ma.rows_path, "per-trial rows CSV")->required();
  mc->add_option("--aggregate", ma.aggregate_path, "per-cell aggregate CSV");
  mc->add_option("--plot", ma.plot_path, "mean-rounds-vs-bits SVG");
  mc->add_option("--init-coord", ma.init_coord, "coordination seeding: from_state or zeros");
  mc->set_config("--config", "", "flat key=value config file");

  auto* spec = app.add_subcommand("spectrum", "spectral certificate for a graph and gain");
  std::string sp_graph;
  double sp_gamma = 0.1, sp_tol = 1e-8, sp_margin = 1e-6;
  std::string sp_csv;
  spec->add_option("--graph", sp_graph, "graph file")->required();
  spec->add_option("--gamma", sp_gamma, "surplus gain to certify");
  spec->add_option("--tol", sp_tol, "unit-eigenvalue tolerance");
  spec->add_option("--margin", sp_margin, "contraction margin for the rest of the spectrum");
  spec->add_option("--csv", sp_csv, "write the report CSV here");
  spec->set_config("--config", "", "flat key=value config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_graph(gen_n, gen_prob, gen_seed, gen_out);
    if (run->parsed()) {
      ra.has_epsilon = eps_opt->count() > 0;
      return cmd_run(ra);
    }
    if (mc->parsed()) {
      ma.has_epsilon = mc_eps->count() > 0;
      return cmd_montecarlo(ma);
    }
    if (spec->parsed()) return cmd_spectrum(sp_graph, sp_gamma, sp_tol, sp_margin, sp_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
