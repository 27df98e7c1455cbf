#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <vector>

#include "qac/analysis.hpp"
#include "qac/digraph.hpp"
#include "qac/montecarlo.hpp"
#include "qac/prng.hpp"
#include "qac/simulator.hpp"

using qac::Digraph;

namespace {

Digraph fixture(const std::string& name) {
  return qac::read_graph_file(std::string(QAC_FIXTURE_DIR) + "/" + name);
}

}  // namespace

TEST_CASE("reference trajectory reproduces the two-node hand step") {
  const auto steps =
      qac::reference_consensus(fixture("two_node.txt"), std::vector<double>{0.0, 10.0}, 0.2, 1);
  REQUIRE(steps.size() == 2);
  CHECK(steps[1].value(0) == 5.0);
  CHECK(steps[1].value(1) == 5.0);
  CHECK(steps[1].surplus(0) == -5.0);
  CHECK(steps[1].surplus(1) == 5.0);
}

TEST_CASE("uniform initial states are a fixed point of the reference") {
  const std::vector<double> x0(5, 3.7);
  const auto steps = qac::reference_consensus(fixture("ring5.txt"), x0, 0.1, 20);
  for (const auto& p : steps) {
    for (int i = 0; i < 5; ++i) {
      CHECK(p.value(i) == 3.7);
      CHECK(p.surplus(i) == 0.0);
    }
  }
}

TEST_CASE("reference consensus contracts to the average on the cycle") {
  const auto x0 = qac::draw_initial_state(5, 0.0, 1000.0, 2024);
  double ave = 0.0;
  for (double v : x0) ave += v;
  ave /= 5.0;
  const auto steps = qac::reference_consensus(fixture("ring5.txt"), x0, 0.1, 10000);
  const auto& last = steps.back();
  double sq = 0.0;
  for (int i = 0; i < 5; ++i) sq += (last.value(i) - ave) * (last.value(i) - ave);
  CHECK(std::sqrt(sq) <= 1e-10);
}

TEST_CASE("quantization-disabled protocol equals the reference per step") {
  qac::SplitMix64 seeder(4242);
  for (const Digraph& g :
       {fixture("two_node.txt"), fixture("ring5.txt"),
        qac::random_strongly_connected(20, 0.15, 77)}) {
    const int n = g.n;
    std::vector<double> x0(n);
    for (double& v : x0) v = seeder.next_double();
    const long rounds = 1000;
    const auto oracle = qac::reference_consensus(g, x0, 0.1, rounds);

    // protocol route with identity "quantization": raw values on the wire
    std::vector<qac::AgentState> agents(n);
    for (int j = 0; j < n; ++j) agents[j].value = x0[j];
    std::vector<std::vector<double>> pull(n), push(n);
    for (int j = 0; j < n; ++j) {
      pull[j].assign(g.in_degree(j) + 1, 1.0 / (1.0 + g.in_degree(j)));
      push[j].push_back(1.0 / (1.0 + g.out_degree(j)));
      for (int i : g.in_adj[j]) push[j].push_back(1.0 / (1.0 + g.out_degree(i)));
    }
    for (long k = 1; k <= rounds; ++k) {
      std::vector<qac::AgentState> next(n);
      for (int j = 0; j < n; ++j) {
        std::vector<qac::DecodedPair> recv;
        recv.push_back({agents[j].value, agents[j].surplus});
        for (int i : g.in_adj[j]) recv.push_back({agents[i].value, agents[i].surplus});
        next[j] = qac::state_update(agents[j], 0.1, recv, pull[j], push[j]);
      }
      agents = next;
      for (int j = 0; j < n; ++j) {
        REQUIRE(std::abs(agents[j].value - oracle[k].value(j)) <= 1e-12);
        REQUIRE(std::abs(agents[j].surplus - oracle[k].surplus(j)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("mass audit sees the hand-computed saturated step and clean runs") {
  qac::SimConfig cfg;
  cfg.graph = fixture("two_node.txt");
  cfg.params.surplus_gain = 0.2;
  cfg.params.zoom_factor = 0.2;
  cfg.params.bits = 3;
  cfg.params.sync_period = 1;
  cfg.x0 = {0.0, 10.0};
  cfg.max_rounds = 1;
  const qac::Trace one = qac::run(cfg);
  REQUIRE(one.snapshots.back().k == 1);
  CHECK(one.snapshots.back().value[0] == 1.5);
  CHECK(one.snapshots.back().value[1] == 8.5);
  CHECK(qac::mass_audit(one, cfg.x0) == 0.0);

  qac::SimConfig longer = cfg;
  longer.params.bits = 8;
  longer.graph = fixture("ring5.txt");
  longer.params.sync_period = 4;
  longer.x0 = qac::draw_initial_state(5, 0.0, 1000.0, 5);
  longer.max_rounds = 5000;
  const qac::Trace tr = qac::run(longer);
  double mass = 0.0;
  for (double v : longer.x0) mass += v;
  const double audited = qac::mass_audit(tr, longer.x0);
  CHECK(audited <= 1e-9 * std::abs(mass));
  CHECK(audited == tr.max_mass_dev);  // snapshots cover every round here
}

TEST_CASE("system matrices match the frozen two-node assembly") {
  const auto m = qac::build_system_matrices(fixture("two_node.txt"), 0.1);
  const Eigen::MatrixXd t = m.feedback + m.mixing;
  Eigen::MatrixXd want(4, 4);
  want << 0.5, 0.5, 0.1, 0.0,
          0.5, 0.5, 0.0, 0.1,
          0.5, -0.5, 0.4, 0.5,
         -0.5, 0.5, 0.5, 0.4;
  CHECK((t - want).lpNorm<Eigen::Infinity>() == 0.0);

  Eigen::VectorXd vdag(4);
  vdag << 1, 1, 0, 0;
  CHECK((t * vdag - vdag).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("the mixing block conserves mass for random graphs") {
  qac::SplitMix64 rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const Digraph g = qac::random_strongly_connected(
        2 + static_cast<int>(rng.next_below(9)), 0.3, 600 + rep);
    const auto m = qac::build_system_matrices(g, 0.1);
    const Eigen::MatrixXd t = m.feedback + m.mixing;
    Eigen::VectorXd vdag = Eigen::VectorXd::Zero(2 * g.n);
    vdag.head(g.n).setOnes();
    CHECK((t * vdag - vdag).lpNorm<Eigen::Infinity>() <= 1e-14);
    Eigen::VectorXd z(2 * g.n);
    for (int i = 0; i < 2 * g.n; ++i) z(i) = rng.uniform(-5.0, 5.0);
    CHECK(std::abs((m.mixing * z).sum() - z.sum()) <= 1e-12 * std::max(1.0, std::abs(z.sum())));
  }
}

TEST_CASE("two-node eigenvalues match the closed form") {
  // symmetric/antisymmetric decoupling gives {1, 1-g} and the roots of
  // t^2 + g t - g = 0
  for (double gain : {0.1, 0.2, 0.9}) {
    const auto rep = qac::spectral_certificate(fixture("two_node.txt"), gain);
    REQUIRE(rep.decomposition_ok);
    REQUIRE(rep.eigenvalues.size() == 4);
    const double disc = std::sqrt(gain * gain + 4.0 * gain);
    const double want[4] = {1.0, 1.0 - gain, (-gain + disc) / 2.0, (-gain - disc) / 2.0};
    for (double w : want) {
      double best = 1e9;
      for (const auto& lam : rep.eigenvalues)
        best = std::min(best, std::abs(lam - std::complex<double>(w, 0.0)));
      CHECK(best <= 1e-12);
    }
  }
}

TEST_CASE("certificate validity follows the closed-form spectrum") {
  const auto good = qac::spectral_certificate(fixture("two_node.txt"), 0.1);
  CHECK(good.valid_gamma);
  CHECK(good.unit_eigenvalue_simple);
  CHECK(std::abs(good.second_largest_modulus - 0.9) <= 1e-9);
  CHECK(good.appendix_max_residual <= 1e-9);
  CHECK(good.basis_min_singular > 1e-8);

  // gain 0.9 pushes an antisymmetric eigenvalue to -1.5, outside the circle
  const auto bad = qac::spectral_certificate(fixture("two_node.txt"), 0.9);
  CHECK_FALSE(bad.valid_gamma);
  CHECK(std::abs(bad.second_largest_modulus - 1.5) <= 1e-9);
}

TEST_CASE("appendix eigenvector residuals hold on every fixture") {
  for (const char* name : {"two_node.txt", "ring5.txt", "net5.txt"}) {
    for (double gain : {0.1, 0.2}) {
      const auto rep = qac::spectral_certificate(fixture(name), gain);
      CHECK(rep.appendix_max_residual <= 1e-9);
      CHECK(rep.basis_min_singular > 1e-8);
      CHECK(rep.unit_eigenvalue_simple);
    }
  }
}

TEST_CASE("certificate validity is invariant under node relabeling") {
  const Digraph g = fixture("net5.txt");
  const int perm[5] = {3, 0, 4, 2, 1};
  std::vector<std::pair<int, int>> edges;
  for (const auto& [u, v] : g.edges) edges.emplace_back(perm[u], perm[v]);
  const Digraph h = qac::build_digraph(5, edges);
  const auto a = qac::spectral_certificate(g, 0.1);
  const auto b = qac::spectral_certificate(h, 0.1);
  CHECK(a.valid_gamma == b.valid_gamma);
  CHECK(a.unit_eigenvalue_simple == b.unit_eigenvalue_simple);
  CHECK(std::abs(a.second_largest_modulus - b.second_largest_modulus) <= 1e-9);
}

TEST_CASE("dominant push eigenvector solves C v = v with unit sum") {
  for (const char* name : {"two_node.txt", "ring5.txt", "net5.txt"}) {
    const Eigen::MatrixXd c = qac::push_weights(fixture(name));
    const Eigen::VectorXd v = qac::dominant_column_eigenvector(c);
    CHECK(std::abs(v.sum() - 1.0) <= 1e-12);
    CHECK((c * v - v).lpNorm<Eigen::Infinity>() <= 1e-11);
    CHECK(v.minCoeff() > 0.0);
  }
}

TEST_CASE("termination verification accepts sound stops and flags violations") {
  qac::SimConfig cfg;
  cfg.graph = fixture("ring5.txt");
  cfg.params.surplus_gain = 0.1;
  cfg.params.zoom_factor = 0.2;
  cfg.params.bits = 8;
  cfg.params.sync_period = 4;
  cfg.params.epsilon = 1e-2;
  cfg.mode = qac::SimMode::EpsilonStop;
  cfg.x0 = qac::draw_initial_state(5, 0.0, 1000.0, 9);
  cfg.max_rounds = 200000;
  const qac::Trace tr = qac::run(cfg);
  REQUIRE(tr.terminated);
  CHECK(qac::verify_termination(tr, cfg.x0, 1e-2));

  qac::Trace fake;
  fake.terminated = true;
  qac::RoundSnapshot snap;
  snap.value = {0.0, 0.04};  // average 0.02, one agent off by 2 epsilon
  fake.snapshots.push_back(snap);
  CHECK_FALSE(qac::verify_termination(fake, std::vector<double>{0.0, 0.04}, 1e-2));

  qac::Trace unfinished;
  CHECK_THROWS_AS(qac::verify_termination(unfinished, std::vector<double>{1.0}, 1e-2),
                  std::invalid_argument);
}

TEST_CASE("spectral report serializes to text and CSV") {
  const auto rep = qac::spectral_certificate(fixture("two_node.txt"), 0.1);
  const std::string text = qac::spectral_report_text(rep);
  CHECK(text.find("gamma valid: yes") != std::string::npos);
  const std::string csv = qac::spectral_report_csv(rep);
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "n,gamma,simple_unit,second_modulus,residual,valid");
  const std::string prefix = "2," + qac::fmt_g(0.1) + ",1,";
  CHECK(row.rfind(prefix, 0) == 0);
  CHECK(row.back() == '1');
}
