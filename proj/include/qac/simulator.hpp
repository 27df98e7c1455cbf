#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "qac/csv.hpp"
#include "qac/digraph.hpp"
#include "qac/protocol.hpp"

namespace qac {

// Asymptotic runs iterate until the estimate spread falls below
// convergence_tol (or the round budget runs out); EpsilonStop runs iterate
// until the distributed stop rule fires, which requires an accuracy target.
enum class SimMode { Asymptotic, EpsilonStop };

struct SimConfig {
  Digraph graph;
  ProtocolParams params;
  std::vector<double> x0;
  long max_rounds = 100000;
  SimMode mode = SimMode::Asymptotic;
  double convergence_tol = 1e-8;
  long snapshot_every = 1;
  std::uint64_t seed = 0;  // provenance only; the round loop draws no randomness

  void validate() const {
    params.validate();
    if (!is_strongly_connected(graph))
      throw std::invalid_argument("simulator: graph must be strongly connected");
    if (params.sync_period < diameter(graph))
      throw std::invalid_argument("simulator: sync period must bound the graph diameter");
    if (static_cast<int>(x0.size()) != graph.n)
      throw std::invalid_argument("simulator: initial state size must equal the node count");
    for (double v : x0)
      if (!std::isfinite(v))
        throw std::invalid_argument("simulator: initial state must be finite");
    if (max_rounds < 0)
      throw std::invalid_argument("simulator: round budget must be nonnegative");
    if (!(convergence_tol > 0.0))
      throw std::invalid_argument("simulator: convergence tolerance must be positive");
    if (snapshot_every < 1)
      throw std::invalid_argument("simulator: snapshot stride must be at least 1");
    if (mode == SimMode::EpsilonStop && !params.epsilon)
      throw std::invalid_argument("simulator: stop mode needs an accuracy target");
  }
};

// Network state at the top of round k, after any frame update and before the
// round's messages are consumed. value_err and surplus_err are the local
// quantization errors of the codes broadcast this round (zero when the run
// halted before transmitting). cum_bits counts every bit sent in rounds
// 0..k inclusive.
struct RoundSnapshot {
  long k = 0;
  std::vector<double> value, surplus;
  double step = 0.0, midpoint = 0.0;
  std::vector<int> vote;
  std::vector<double> qmax, qmin;
  std::vector<double> value_err, surplus_err;
  double err_l2 = 0.0, err_inf = 0.0;
  long long cum_bits = 0;
};

// One applied frame update (or stop) at sync instant k.
struct SyncRecord {
  long k = 0;
  int vote = 0;
  double step = 0.0;      // step after the update
  double midpoint = 0.0;  // midpoint after the update
  bool stop = false;
};

struct Trace {
  std::vector<RoundSnapshot> snapshots;
  std::vector<SyncRecord> syncs;
  bool terminated = false;        // distributed stop rule fired
  std::optional<long> k_star;     // round at which it fired
  bool converged = false;         // asymptotic mode reached convergence_tol
  std::optional<long> rounds_to_tol;  // first round with spread <= convergence_tol
  long rounds_executed = 0;       // rounds in which messages were sent
  long long total_bits = 0;
  double max_mass_dev = 0.0;      // worst |sum(value + surplus) - sum(x0)| seen
};

// Every edge carries four codes and one 2-bit vote per round.
inline long long bits_per_round(const Digraph& g, int bits) {
  return static_cast<long long>(g.edge_count()) * (4LL * bits + 2);
}

// l2 deviation from the exact average, and the pairwise estimate spread
// max_ij |x_i - x_j|; the spread drives convergence detection.
inline std::pair<double, double> consensus_error(std::span<const double> x,
                                                 double x_ave) {
  if (x.empty())
    throw std::invalid_argument("consensus_error: empty state vector");
  double sq = 0.0, lo = x[0], hi = x[0];
  for (double v : x) {
    const double d = v - x_ave;
    sq += d * d;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {std::sqrt(sq), hi - lo};
}

inline Trace run(const SimConfig& cfg) {
  cfg.validate();
  const Digraph& g = cfg.graph;
  const ProtocolParams& p = cfg.params;
  const int n = g.n;
  const double mass0 = std::accumulate(cfg.x0.begin(), cfg.x0.end(), 0.0);
  const double x_ave = mass0 / n;
  const long long round_bits = bits_per_round(g, p.bits);

  QuantizerFrame frame = p.initial_frame();
  std::vector<AgentState> agents;
  agents.reserve(n);
  for (double v : cfg.x0) agents.push_back(init_agent(v, p, frame));

  // Receive-side weight rows, index 0 = self. Pull weights average over the
  // receiver's in-neighborhood; push weights split each transmitter's
  // surplus over its out-neighborhood.
  std::vector<std::vector<double>> pull_w(n), push_w(n);
  for (int j = 0; j < n; ++j) {
    pull_w[j].assign(g.in_degree(j) + 1, 1.0 / (1.0 + g.in_degree(j)));
    push_w[j].push_back(1.0 / (1.0 + g.out_degree(j)));
    for (int i : g.in_adj[j]) push_w[j].push_back(1.0 / (1.0 + g.out_degree(i)));
  }

  Trace tr;
  std::vector<RoundMessage> msgs(n);
  std::vector<AgentState> next(n);
  std::vector<double> values(n);

  for (long k = 0;; ++k) {
    for (int j = 0; j < n; ++j) values[j] = agents[j].value;
    const auto [l2, inf] = consensus_error(values, x_ave);
    double mass = 0.0;
    for (const auto& a : agents) mass += a.value + a.surplus;
    tr.max_mass_dev = std::max(tr.max_mass_dev, std::abs(mass - mass0));
    if (!tr.rounds_to_tol && inf <= cfg.convergence_tol) tr.rounds_to_tol = k;

    const bool out_of_budget = k >= cfg.max_rounds;
    const bool tol_reached =
        cfg.mode == SimMode::Asymptotic && inf <= cfg.convergence_tol;

    bool stop_now = false;
    FrameDecision applied;
    if (!out_of_budget && !tol_reached && p.is_sync_instant(k)) {
      // All agents run the frame update; the flooded window makes their
      // decisions identical, which the simulator insists on.
      auto [a0, d0] = sync_update(agents[0], frame, p);
      next[0] = a0;
      applied = d0;
      for (int j = 1; j < n; ++j) {
        auto [aj, dj] = sync_update(agents[j], frame, p);
        next[j] = aj;
        if (!(dj == d0))
          throw std::logic_error("simulator: frame decisions diverged across agents");
      }
      stop_now = applied.stop;
      if (!stop_now) {
        agents = next;
        frame = applied.frame;
      }
      tr.syncs.push_back({k, applied.vote, stop_now ? frame.step : applied.frame.step,
                          stop_now ? frame.midpoint : applied.frame.midpoint, stop_now});
    }

    if (out_of_budget || tol_reached || stop_now) {
      if (stop_now) {
        tr.terminated = true;
        tr.k_star = k;
        for (auto& a : agents) a.stopped = true;
      }
      if (tol_reached) tr.converged = true;
      RoundSnapshot s;
      s.k = k;
      s.step = frame.step;
      s.midpoint = frame.midpoint;
      s.err_l2 = l2;
      s.err_inf = inf;
      s.cum_bits = tr.total_bits;
      s.value_err.assign(n, 0.0);
      s.surplus_err.assign(n, 0.0);
      for (const auto& a : agents) {
        s.value.push_back(a.value);
        s.surplus.push_back(a.surplus);
        s.vote.push_back(a.vote);
        s.qmax.push_back(a.qmax);
        s.qmin.push_back(a.qmin);
      }
      tr.snapshots.push_back(std::move(s));
      break;
    }

    const QuantizerFrame fs = surplus_frame(frame);
    for (int j = 0; j < n; ++j) msgs[j] = make_message(agents[j], frame);
    tr.total_bits += round_bits;
    ++tr.rounds_executed;

    if (k % cfg.snapshot_every == 0) {
      RoundSnapshot s;
      s.k = k;
      s.step = frame.step;
      s.midpoint = frame.midpoint;
      s.err_l2 = l2;
      s.err_inf = inf;
      s.cum_bits = tr.total_bits;
      for (int j = 0; j < n; ++j) {
        const auto& a = agents[j];
        s.value.push_back(a.value);
        s.surplus.push_back(a.surplus);
        s.vote.push_back(a.vote);
        s.qmax.push_back(a.qmax);
        s.qmin.push_back(a.qmin);
        s.value_err.push_back(a.value - decode(msgs[j].value_code, frame));
        s.surplus_err.push_back(a.surplus - decode(msgs[j].surplus_code, fs));
      }
      tr.snapshots.push_back(std::move(s));
    }

    std::vector<DecodedPair> received;
    std::vector<CoordValues> coord;
    for (int j = 0; j < n; ++j) {
      received.clear();
      coord.clear();
      received.push_back({decode(msgs[j].value_code, frame),
                          decode(msgs[j].surplus_code, fs)});
      for (int i : g.in_adj[j]) {
        received.push_back({decode(msgs[i].value_code, frame),
                            decode(msgs[i].surplus_code, fs)});
        coord.push_back({msgs[i].vote, decode(msgs[i].qmax_code, frame),
                         decode(msgs[i].qmin_code, frame)});
      }
      next[j] = state_update(agents[j], p.surplus_gain, received, pull_w[j], push_w[j]);
      next[j] = merge_coordination(next[j], coord);
    }
    agents.swap(next);
  }
  return tr;
}

inline void write_trace_csv(const Trace& tr, std::ostream& out) {
  out << "k,agent,x,s,delta,sigma,w,M,m,err_l2,err_inf,cum_bits\n";
  for (const auto& s : tr.snapshots) {
    for (std::size_t j = 0; j < s.value.size(); ++j) {
      out << s.k << ',' << j << ',' << fmt_g(s.value[j]) << ',' << fmt_g(s.surplus[j])
          << ',' << fmt_g(s.step) << ',' << fmt_g(s.midpoint) << ',' << s.vote[j]
          << ',' << fmt_g(s.qmax[j]) << ',' << fmt_g(s.qmin[j]) << ','
          << fmt_g(s.err_l2) << ',' << fmt_g(s.err_inf) << ',' << s.cum_bits << '\n';
    }
  }
}

}  // namespace qac
