#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qac/digraph.hpp"
#include "qac/montecarlo.hpp"
#include "qac/simulator.hpp"

using qac::Digraph;
using qac::SimConfig;
using qac::SimMode;
using qac::Trace;

namespace {

Digraph fixture(const std::string& name) {
  return qac::read_graph_file(std::string(QAC_FIXTURE_DIR) + "/" + name);
}

SimConfig ring5_config() {
  SimConfig cfg;
  cfg.graph = fixture("ring5.txt");
  cfg.params.surplus_gain = 0.2;
  cfg.params.zoom_factor = 0.2;
  cfg.params.bits = 8;
  cfg.params.sync_period = 4;
  cfg.x0 = qac::draw_initial_state(5, 0.0, 1000.0, 1);
  return cfg;
}

}  // namespace

TEST_CASE("config validation rejects broken setups") {
  SimConfig cfg = ring5_config();
  CHECK_NOTHROW(cfg.validate());

  SimConfig bad = cfg;
  bad.graph = qac::build_digraph(3, {{0, 1}, {1, 2}});  // not strongly connected
  bad.x0 = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.params.sync_period = 3;  // below the cycle diameter
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.x0.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.mode = SimMode::EpsilonStop;  // no accuracy target set
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.snapshot_every = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("bits per round counts four codes and a vote per edge") {
  CHECK(qac::bits_per_round(fixture("ring5.txt"), 8) == 170);
  CHECK(qac::bits_per_round(fixture("two_node.txt"), 2) == 20);
  std::vector<std::pair<int, int>> complete;
  for (int u = 0; u < 5; ++u)
    for (int v = 0; v < 5; ++v)
      if (u != v) complete.emplace_back(u, v);
  CHECK(qac::bits_per_round(qac::build_digraph(5, complete), 16) == 1320);
}

TEST_CASE("consensus error returns the l2 norm and the pairwise spread") {
  const std::vector<double> flat{5.0, 5.0};
  auto [l0, s0] = qac::consensus_error(flat, 5.0);
  CHECK(l0 == 0.0);
  CHECK(s0 == 0.0);
  const std::vector<double> pair{0.0, 10.0};
  auto [l1, s1] = qac::consensus_error(pair, 5.0);
  CHECK(l1 == std::sqrt(50.0));
  CHECK(s1 == 10.0);
  const std::vector<double> three{1.0, 2.0, 3.0};
  auto [l2, s2] = qac::consensus_error(three, 2.0);
  CHECK(l2 == std::sqrt(2.0));
  CHECK(s2 == 2.0);
}

TEST_CASE("two agents with a fine quantizer converge to the average") {
  SimConfig cfg;
  cfg.graph = fixture("two_node.txt");
  cfg.params.surplus_gain = 0.2;
  cfg.params.zoom_factor = 0.2;
  cfg.params.bits = 32;
  cfg.params.sync_period = 1;
  cfg.params.step0 = 1e-6;
  cfg.x0 = {0.0, 10.0};
  cfg.max_rounds = 10000;
  const Trace tr = qac::run(cfg);
  CHECK(tr.converged);
  REQUIRE(tr.rounds_to_tol.has_value());
  const auto& last = tr.snapshots.back();
  CHECK(last.err_inf <= 1e-8);
  CHECK(std::abs(last.value[0] - 5.0) < 1e-6);
  CHECK(std::abs(last.value[1] - 5.0) < 1e-6);
  CHECK(tr.max_mass_dev <= 1e-9 * 10.0);
}

TEST_CASE("agreement on a quantization level is an immediate fixed point") {
  SimConfig cfg = ring5_config();
  cfg.x0 = {7.0, 7.0, 7.0, 7.0, 7.0};
  const Trace tr = qac::run(cfg);
  CHECK(tr.converged);
  CHECK(tr.rounds_executed == 0);
  CHECK(tr.total_bits == 0);
  REQUIRE(tr.snapshots.size() == 1);
  CHECK(tr.snapshots[0].k == 0);
  CHECK(tr.snapshots[0].err_inf == 0.0);
  for (double s : tr.snapshots[0].surplus) CHECK(s == 0.0);
}

TEST_CASE("coarse quantizers first vote to widen the grid") {
  SimConfig cfg = ring5_config();
  cfg.params.bits = 3;  // half range 3.5 against states in the hundreds
  cfg.max_rounds = 200;
  const Trace tr = qac::run(cfg);
  REQUIRE(tr.syncs.size() >= 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(tr.syncs[i].k == 4 * (i + 1));
    CHECK(tr.syncs[i].vote == 1);
  }
  CHECK(tr.syncs[1].step > tr.syncs[0].step);
}

TEST_CASE("distributed stop lands on a sync instant and is sound") {
  SimConfig cfg = ring5_config();
  cfg.params.surplus_gain = 0.1;
  cfg.params.epsilon = 1e-2;
  cfg.mode = SimMode::EpsilonStop;
  cfg.max_rounds = 200000;
  const Trace tr = qac::run(cfg);
  REQUIRE(tr.terminated);
  REQUIRE(tr.k_star.has_value());
  CHECK(*tr.k_star % 4 == 0);
  CHECK(tr.syncs.back().stop);
  CHECK(tr.syncs.back().k == *tr.k_star);
  CHECK(tr.total_bits == tr.rounds_executed * qac::bits_per_round(cfg.graph, 8));
  CHECK(tr.rounds_executed == *tr.k_star);

  double mass = 0.0;
  for (double v : cfg.x0) mass += v;
  const double ave = mass / 5.0;
  const auto& last = tr.snapshots.back();
  for (double v : last.value) CHECK(std::abs(v - ave) <= 1e-2);
}

TEST_CASE("budget exhaustion is recorded without crashing") {
  SimConfig cfg = ring5_config();
  cfg.params.bits = 2;
  cfg.params.zoom_factor = 4.0;
  cfg.max_rounds = 50;
  const Trace tr = qac::run(cfg);
  CHECK_FALSE(tr.converged);
  CHECK(tr.rounds_executed == 50);
  CHECK(tr.snapshots.back().k == 50);
  CHECK(tr.total_bits == 50 * qac::bits_per_round(cfg.graph, 2));
}

TEST_CASE("traces are bitwise reproducible") {
  SimConfig cfg = ring5_config();
  cfg.max_rounds = 2000;
  const Trace a = qac::run(cfg);
  const Trace b = qac::run(cfg);
  std::ostringstream sa, sb;
  qac::write_trace_csv(a, sa);
  qac::write_trace_csv(b, sb);
  CHECK(sa.str() == sb.str());
  CHECK(a.rounds_executed == b.rounds_executed);
  CHECK(a.total_bits == b.total_bits);
}

TEST_CASE("trace CSV carries the documented header and shape") {
  SimConfig cfg = ring5_config();
  cfg.max_rounds = 10;
  cfg.snapshot_every = 5;
  const Trace tr = qac::run(cfg);
  std::ostringstream out;
  qac::write_trace_csv(tr, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "k,agent,x,s,delta,sigma,w,M,m,err_l2,err_inf,cum_bits");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 11);
  }
  // snapshots at k = 0, 5 plus the final state at k = 10, five agents each
  CHECK(rows == 15);
}

TEST_CASE("cumulative bits advance by one round of traffic per round") {
  SimConfig cfg = ring5_config();
  cfg.max_rounds = 12;
  const Trace tr = qac::run(cfg);
  const long long per_round = qac::bits_per_round(cfg.graph, cfg.params.bits);
  REQUIRE(tr.snapshots.size() == 13);
  for (std::size_t i = 0; i + 1 < tr.snapshots.size(); ++i)
    CHECK(tr.snapshots[i].cum_bits == static_cast<long long>(i + 1) * per_round);
  CHECK(tr.snapshots.back().cum_bits == 12 * per_round);
}

TEST_CASE("mass stays conserved through zooms and shifts") {
  SimConfig cfg = ring5_config();
  cfg.max_rounds = 20000;
  const Trace tr = qac::run(cfg);
  double mass = 0.0;
  for (double v : cfg.x0) mass += v;
  CHECK(tr.max_mass_dev <= 1e-9 * std::max(1.0, std::abs(mass)));
}

TEST_CASE("updates depend only on transmitted codes") {
  SimConfig base = ring5_config();
  base.x0 = {100.0, 5.2, 300.0, 400.0, 500.0};
  base.max_rounds = 1;
  SimConfig shifted = base;
  shifted.x0[1] = 5.3;  // same code, same vote, same window values
  const Trace ta = qac::run(base);
  const Trace tb = qac::run(shifted);
  const auto& fa = ta.snapshots.back();
  const auto& fb = tb.snapshots.back();
  REQUIRE(fa.k == 1);
  REQUIRE(fb.k == 1);
  for (int j : {0, 2, 3, 4}) {
    CHECK(fa.value[j] == fb.value[j]);
    CHECK(fa.surplus[j] == fb.surplus[j]);
  }
  CHECK(fa.value[1] != fb.value[1]);
}
