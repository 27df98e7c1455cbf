#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qac/csv.hpp"
#include "qac/digraph.hpp"
#include "qac/simulator.hpp"

namespace qac {

// Unquantized reference trajectory: the linear surplus-consensus iteration
//   x <- R x + gain * s,  s <- C s + x_prev - x
// starting from s = 0. Element [k] holds the pair at round k; element [0] is
// the initial condition. Implemented with dense matrix products so it shares
// no arithmetic path with the per-agent protocol code it cross-checks.
struct ReferencePoint {
  Eigen::VectorXd value;
  Eigen::VectorXd surplus;
};

inline std::vector<ReferencePoint> reference_consensus(const Digraph& g,
                                                       std::span<const double> x0,
                                                       double gain, long rounds) {
  if (!is_strongly_connected(g))
    throw std::invalid_argument("reference: graph must be strongly connected");
  if (!(gain > 0.0)) throw std::invalid_argument("reference: gain must be positive");
  if (static_cast<int>(x0.size()) != g.n)
    throw std::invalid_argument("reference: initial state size must equal the node count");
  const Eigen::MatrixXd r = pull_weights(g);
  const Eigen::MatrixXd c = push_weights(g);
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(x0.data(), g.n);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(g.n);
  std::vector<ReferencePoint> out;
  out.reserve(rounds + 1);
  out.push_back({x, s});
  for (long k = 0; k < rounds; ++k) {
    const Eigen::VectorXd xn = r * x + gain * s;
    s = c * s + x - xn;
    x = xn;
    out.push_back({x, s});
  }
  return out;
}

// Worst deviation of the conserved quantity sum(value) + sum(surplus) from
// its initial value, over the recorded snapshots.
inline double mass_audit(const Trace& tr, std::span<const double> x0) {
  double mass0 = 0.0;
  for (double v : x0) mass0 += v;
  double worst = 0.0;
  for (const auto& s : tr.snapshots) {
    double mass = 0.0;
    for (std::size_t j = 0; j < s.value.size(); ++j) mass += s.value[j] + s.surplus[j];
    worst = std::max(worst, std::abs(mass - mass0));
  }
  return worst;
}

// The linear part of the protocol in stacked [value; surplus] coordinates.
// feedback routes surplus into the estimate, mixing applies the averaging
// and splitting weights, augmented appends the constant-error channel.
struct SystemMatrices {
  Eigen::MatrixXd feedback;   // 2n x 2n, [[0, gain*I], [0, -gain*I]]
  Eigen::MatrixXd mixing;     // 2n x 2n, [[R, 0], [I-R, C]]
  Eigen::MatrixXd augmented;  // 4n x 4n, [[feedback+mixing, mixing-I], [0, I]]
};

inline SystemMatrices build_system_matrices(const Digraph& g, double gain) {
  if (!(gain > 0.0)) throw std::invalid_argument("system matrices: gain must be positive");
  const int n = g.n;
  const Eigen::MatrixXd r = pull_weights(g);
  const Eigen::MatrixXd c = push_weights(g);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  SystemMatrices m;
  m.feedback = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  m.feedback.topRightCorner(n, n) = gain * id;
  m.feedback.bottomRightCorner(n, n) = -gain * id;
  m.mixing = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  m.mixing.topLeftCorner(n, n) = r;
  m.mixing.bottomLeftCorner(n, n) = id - r;
  m.mixing.bottomRightCorner(n, n) = c;
  m.augmented = Eigen::MatrixXd::Zero(4 * n, 4 * n);
  m.augmented.topLeftCorner(2 * n, 2 * n) = m.feedback + m.mixing;
  m.augmented.topRightCorner(2 * n, 2 * n) =
      m.mixing - Eigen::MatrixXd::Identity(2 * n, 2 * n);
  m.augmented.bottomRightCorner(2 * n, 2 * n) =
      Eigen::MatrixXd::Identity(2 * n, 2 * n);
  return m;
}

// Dominant right eigenvector of a column-stochastic matrix by power
// iteration. The iteration preserves the column sums' action, so keeping
// 1'v = 1 needs no renormalization; the positive diagonal of the splitting
// weights guarantees convergence.
inline Eigen::VectorXd dominant_column_eigenvector(const Eigen::MatrixXd& c,
                                                   double tol = 1e-12,
                                                   long max_iters = 100000) {
  const int n = static_cast<int>(c.rows());
  Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (long it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd w = c * v;
    const double diff = (w - v).lpNorm<Eigen::Infinity>();
    v = w;
    if (diff <= tol) return v;
  }
  throw std::runtime_error("power iteration did not converge");
}

// Numerical certificate that the chosen surplus gain leaves the linear part
// with a single unit eigenvalue and everything else strictly contracting,
// plus a residual check of the structured unit-eigenvector basis of the
// error-augmented matrix.
struct SpectralReport {
  int n = 0;
  double gain = 0.0;
  std::vector<std::complex<double>> eigenvalues;  // of feedback + mixing
  double second_largest_modulus = 0.0;  // largest modulus outside the unit eigenvalue
  bool unit_eigenvalue_simple = false;
  double appendix_max_residual = 0.0;   // max ||augmented*w - w||_inf over the basis
  double basis_min_singular = 0.0;      // of the column-normalized basis matrix
  bool decomposition_ok = false;
  bool valid_gamma = false;
};

inline SpectralReport spectral_certificate(const Digraph& g, double gain,
                                           double unit_tol = 1e-8,
                                           double margin = 1e-6) {
  const int n = g.n;
  if (2 * n > 200)
    throw std::invalid_argument("spectral certificate: supported up to 2n = 200");
  SpectralReport rep;
  rep.n = n;
  rep.gain = gain;
  const SystemMatrices m = build_system_matrices(g, gain);
  const Eigen::MatrixXd t = m.feedback + m.mixing;

  Eigen::EigenSolver<Eigen::MatrixXd> es(t);
  rep.decomposition_ok = es.info() == Eigen::Success;
  if (rep.decomposition_ok) {
    int unit_count = 0;
    int unit_idx = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2 * n; ++i) {
      const std::complex<double> lam = es.eigenvalues()(i);
      rep.eigenvalues.push_back(lam);
      const double d = std::abs(lam - std::complex<double>(1.0, 0.0));
      if (d <= unit_tol) ++unit_count;
      if (d < best) {
        best = d;
        unit_idx = i;
      }
    }
    rep.unit_eigenvalue_simple = unit_count == 1;
    for (int i = 0; i < 2 * n; ++i)
      if (i != unit_idx)
        rep.second_largest_modulus =
            std::max(rep.second_largest_modulus, std::abs(rep.eigenvalues[i]));
    rep.valid_gamma = rep.unit_eigenvalue_simple &&
                      rep.second_largest_modulus <= 1.0 - margin;
  }

  // Structured unit-eigenvector basis of the augmented matrix, one column
  // per kernel direction of Omega - I. Writing a column as [z; u] with u the
  // persistent error channel, the eigenvector condition is the singular
  // linear system (T - I) z = (I - mixing) u, solvable for every u because
  // both sides annihilate the all-ones left eigenvector. Three families:
  //   - n columns with u = [-eta_i; 0] and the exact solution z = [eta_i; 0];
  //   - n columns with u = [0; phi_j], phi_1 the dominant eigenvector of the
  //     push weights (z = 0) and the rest completing it to a basis, with z
  //     the least-squares solution of the system above;
  //   - the unit eigenvector [1; 0] of T itself with u = 0.
  const Eigen::MatrixXd c = push_weights(g);
  const Eigen::VectorXd vstar = dominant_column_eigenvector(c);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(4 * n, 2 * n + 1);
  for (int i = 0; i < n; ++i) {
    basis(i, i) = 1.0;
    basis(2 * n + i, i) = -1.0;
  }
  {
    int skip = 0;
    vstar.cwiseAbs().maxCoeff(&skip);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(
        t - Eigen::MatrixXd::Identity(2 * n, 2 * n));
    int col = n;
    const auto add_error_direction = [&](const Eigen::VectorXd& phi) {
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n);
      rhs.tail(n) = phi - c * phi;
      basis.col(col).head(2 * n) = cod.solve(rhs);
      basis.col(col).tail(n) = phi;
      ++col;
    };
    add_error_direction(vstar);
    for (int j = 0; j < n; ++j)
      if (j != skip) add_error_direction(Eigen::VectorXd::Unit(n, j));
  }
  for (int j = 0; j < n; ++j) basis(j, 2 * n) = 1.0;

  for (int col = 0; col < 2 * n + 1; ++col) {
    const Eigen::VectorXd w = basis.col(col);
    const double res = (m.augmented * w - w).lpNorm<Eigen::Infinity>();
    rep.appendix_max_residual = std::max(rep.appendix_max_residual, res);
  }
  Eigen::MatrixXd normalized = basis;
  for (int col = 0; col < 2 * n + 1; ++col) normalized.col(col).normalize();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(normalized);
  rep.basis_min_singular = svd.singularValues().minCoeff();
  return rep;
}

// True when every final estimate in a terminated trace lies within eps of
// the exact average of x0.
inline bool verify_termination(const Trace& tr, std::span<const double> x0,
                               double eps) {
  if (!tr.terminated || tr.snapshots.empty())
    throw std::invalid_argument("verify_termination: trace did not terminate");
  double mass = 0.0;
  for (double v : x0) mass += v;
  const double ave = mass / static_cast<double>(x0.size());
  const auto& last = tr.snapshots.back();
  for (double v : last.value)
    if (std::abs(v - ave) > eps) return false;
  return true;
}

inline std::string spectral_report_text(const SpectralReport& rep) {
  std::ostringstream out;
  out << "spectral certificate: n=" << rep.n << " gamma=" << fmt_g(rep.gain) << "\n";
  if (!rep.decomposition_ok) {
    out << "  eigen-decomposition failed to converge\n";
  } else {
    out << "  unit eigenvalue simple: " << (rep.unit_eigenvalue_simple ? "yes" : "no")
        << "\n  second largest modulus: " << fmt_g(rep.second_largest_modulus) << "\n";
  }
  out << "  eigenvector basis max residual: " << fmt_g(rep.appendix_max_residual)
      << "\n  basis min singular value: " << fmt_g(rep.basis_min_singular)
      << "\n  gamma valid: " << (rep.valid_gamma ? "yes" : "no") << "\n";
  return out.str();
}

inline std::string spectral_report_csv(const SpectralReport& rep) {
  std::ostringstream out;
  out << "n,gamma,simple_unit,second_modulus,residual,valid\n"
      << rep.n << ',' << fmt_g(rep.gain) << ',' << (rep.unit_eigenvalue_simple ? 1 : 0)
      << ',' << fmt_g(rep.second_largest_modulus) << ','
      << fmt_g(rep.appendix_max_residual) << ',' << (rep.valid_gamma ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace qac
