#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qac/prng.hpp"

namespace qac {

// Undirected self-loops and parallel edges are rejected; an edge (u, v)
// means u transmits to v. Adjacency lists are kept sorted so that every
// traversal, weight matrix, and message ordering is deterministic.
struct Digraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> in_adj;   // in_adj[v]: transmitters into v
  std::vector<std::vector<int>> out_adj;  // out_adj[u]: receivers of u

  int edge_count() const { return static_cast<int>(edges.size()); }
  int in_degree(int v) const { return static_cast<int>(in_adj[v].size()); }
  int out_degree(int v) const { return static_cast<int>(out_adj[v].size()); }
};

inline Digraph build_digraph(int n, std::vector<std::pair<int, int>> edges) {
  if (n < 2) throw std::invalid_argument("digraph: need at least two nodes");
  Digraph g;
  g.n = n;
  std::sort(edges.begin(), edges.end());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto [u, v] = edges[i];
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw std::invalid_argument("digraph: edge endpoint out of range");
    if (u == v) throw std::invalid_argument("digraph: self-loops are not allowed");
    if (i > 0 && edges[i] == edges[i - 1])
      throw std::invalid_argument("digraph: duplicate edge");
  }
  g.edges = std::move(edges);
  g.in_adj.assign(n, {});
  g.out_adj.assign(n, {});
  for (const auto& [u, v] : g.edges) {
    g.out_adj[u].push_back(v);
    g.in_adj[v].push_back(u);
  }
  return g;
}

namespace detail {

// BFS distances from src; unreachable nodes stay at -1.
inline std::vector<int> bfs_dist(const std::vector<std::vector<int>>& adj, int src) {
  std::vector<int> dist(adj.size(), -1);
  std::queue<int> q;
  dist[src] = 0;
  q.push(src);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
    }
  }
  return dist;
}

}  // namespace detail

inline bool is_strongly_connected(const Digraph& g) {
  const auto fwd = detail::bfs_dist(g.out_adj, 0);
  const auto bwd = detail::bfs_dist(g.in_adj, 0);
  for (int v = 0; v < g.n; ++v)
    if (fwd[v] < 0 || bwd[v] < 0) return false;
  return true;
}

// Longest shortest path over ordered node pairs. Throws when some pair has
// no connecting path, so a finite return certifies strong connectivity.
inline int diameter(const Digraph& g) {
  int d = 0;
  for (int s = 0; s < g.n; ++s) {
    const auto dist = detail::bfs_dist(g.out_adj, s);
    for (int v = 0; v < g.n; ++v) {
      if (dist[v] < 0)
        throw std::invalid_argument("diameter: graph is not strongly connected");
      d = std::max(d, dist[v]);
    }
  }
  return d;
}

// Receiver-side averaging weights. Row j holds 1/(1 + in_degree(j)) on the
// diagonal and on each in-neighbor column, so every row sums to one.
inline Eigen::MatrixXd pull_weights(const Digraph& g) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(g.n, g.n);
  for (int j = 0; j < g.n; ++j) {
    const double w = 1.0 / (1.0 + g.in_degree(j));
    r(j, j) = w;
    for (int i : g.in_adj[j]) r(j, i) = w;
  }
  return r;
}

// Transmitter-side splitting weights. Column j holds 1/(1 + out_degree(j))
// on the diagonal and on each out-neighbor row, so every column sums to one.
inline Eigen::MatrixXd push_weights(const Digraph& g) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(g.n, g.n);
  for (int j = 0; j < g.n; ++j) {
    const double w = 1.0 / (1.0 + g.out_degree(j));
    c(j, j) = w;
    for (int l : g.out_adj[j]) c(l, j) = w;
  }
  return c;
}

// Random strongly connected digraph: a directed Hamiltonian cycle through a
// uniformly shuffled node order guarantees connectivity, then every other
// ordered pair is added independently with probability extra_edge_prob. The
// pair scan consumes one draw per pair regardless of acceptance, so a given
// seed always yields the same graph.
inline Digraph random_strongly_connected(int n, double extra_edge_prob,
                                         std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("digraph: need at least two nodes");
  if (!(extra_edge_prob >= 0.0 && extra_edge_prob <= 1.0))
    throw std::invalid_argument("digraph: edge probability must lie in [0, 1]");
  SplitMix64 rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i >= 1; --i) {
    const auto j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<char>> present(n, std::vector<char>(n, 0));
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    const int u = order[i];
    const int v = order[(i + 1) % n];
    present[u][v] = 1;
    edges.emplace_back(u, v);
  }
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u == v) continue;
      const double draw = rng.next_double();
      if (!present[u][v] && draw < extra_edge_prob) {
        present[u][v] = 1;
        edges.emplace_back(u, v);
      }
    }
  }
  return build_digraph(n, std::move(edges));
}

// Text format: '#' comment lines and blank lines are skipped; the first
// data line is "n m", followed by exactly m lines "u v".
inline Digraph read_graph(std::istream& in) {
  int n = -1, m = -1;
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("graph file line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    if (n < 0) {
      if (!(ls >> n >> m) || n < 2 || m < 0) fail("expected header \"n m\" with n >= 2");
    } else {
      int u, v;
      if (!(ls >> u >> v)) fail("expected edge \"u v\"");
      edges.emplace_back(u, v);
    }
    std::string rest;
    if (ls >> rest) fail("trailing tokens");
  }
  if (n < 0) throw std::runtime_error("graph file: missing \"n m\" header");
  if (static_cast<int>(edges.size()) != m)
    throw std::runtime_error("graph file: header promised " + std::to_string(m) +
                             " edges, found " + std::to_string(edges.size()));
  return build_digraph(n, std::move(edges));
}

inline Digraph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file: " + path);
  return read_graph(in);
}

inline void write_graph(const Digraph& g, std::ostream& out) {
  out << g.n << ' ' << g.edge_count() << '\n';
  for (const auto& [u, v] : g.edges) out << u << ' ' << v << '\n';
}

inline void write_graph_file(const Digraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open graph file for writing: " + path);
  write_graph(g, out);
}

}  // namespace qac
