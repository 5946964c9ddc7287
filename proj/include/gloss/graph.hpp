#pragma once

// Per-mode k-nearest-neighbour similarity graphs and their Laplacians.
//
// The vertices of the mode-n graph are the rows of the mode-n unfolding. Two
// rows are joined when either is among the other's k Euclidean nearest
// neighbours, with weight exp(-||r_s - r_s'||^2 / (2 sigma)).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <span>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gloss/error.hpp"
#include "gloss/tensor.hpp"

namespace gloss {

struct BandwidthRule {
  enum class Kind { median_kth_neighbor, fixed };
  Kind kind = Kind::median_kth_neighbor;
  double value = 0.0;  // used when kind == fixed

  static BandwidthRule median_kth_neighbor() { return {}; }
  static BandwidthRule fixed(double sigma) { return {Kind::fixed, sigma}; }
};

struct ModeGraph {
  int mode = 0;
  Index k = 0;
  double bandwidth = 1.0;  // sigma
  Matrix adjacency;        // W, symmetric, zero diagonal
  Matrix laplacian;        // D - W

  Index size() const { return adjacency.rows(); }
};

inline Matrix laplacian_from_adjacency(const Matrix& w) {
  Matrix l = -w;
  l.diagonal() = w.rowwise().sum();
  return l;
}

// Squared Euclidean distances between the rows of m, computed pairwise.
inline Matrix pairwise_sq_distances(const Matrix& m) {
  const Index n = m.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (m.row(i) - m.row(j)).squaredNorm();
  return d;
}

// Neighbour lists by ascending distance, ties broken by lower row index.
inline std::vector<std::vector<Index>> knn_lists(const Matrix& dist, Index k) {
  const Index n = dist.rows();
  std::vector<std::vector<Index>> out(n);
  std::vector<Index> order;
  for (Index s = 0; s < n; ++s) {
    order.clear();
    for (Index j = 0; j < n; ++j)
      if (j != s) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return dist(s, a) < dist(s, b); });
    out[s].assign(order.begin(), order.begin() + k);
  }
  return out;
}

inline ModeGraph build_mode_graph_from_rows(const Matrix& rows, int mode, Index k,
                                            BandwidthRule rule = BandwidthRule::median_kth_neighbor()) {
  const Index n = rows.rows();
  detail::require(n >= 2, ErrorKind::invalid_argument,
                  "mode " + std::to_string(mode) + " has extent 1; no graph can be built");
  detail::require(k >= 1 && k < n, ErrorKind::invalid_argument,
                  "neighbour count k=" + std::to_string(k) + " must be in [1, " + std::to_string(n - 1) + "]");
  detail::require(rows.allFinite(), ErrorKind::numerical, "graph input has non-finite entries");

  const Matrix dist = pairwise_sq_distances(rows);
  const auto nbrs = knn_lists(dist, k);

  double sigma = 0.0;
  if (rule.kind == BandwidthRule::Kind::fixed) {
    detail::require(rule.value > 0.0, ErrorKind::invalid_argument, "fixed bandwidth must be positive");
    sigma = rule.value;
  } else {
    std::vector<double> kth(n);
    for (Index s = 0; s < n; ++s) kth[s] = dist(s, nbrs[s].back());
    std::nth_element(kth.begin(), kth.begin() + n / 2, kth.end());
    double med = kth[n / 2];
    if (n % 2 == 0) {
      const double lower = *std::max_element(kth.begin(), kth.begin() + n / 2);
      med = 0.5 * (med + lower);
    }
    // All k-th neighbours coincide (e.g. a constant tensor): any positive sigma
    // gives the same weights on the zero-distance edges.
    sigma = med > 0.0 ? med : 1.0;
  }

  ModeGraph g;
  g.mode = mode;
  g.k = k;
  g.bandwidth = sigma;
  g.adjacency = Matrix::Zero(n, n);
  for (Index s = 0; s < n; ++s)
    for (Index t : nbrs[s]) {
      const double w = std::exp(-dist(s, t) / (2.0 * sigma));
      g.adjacency(s, t) = w;
      g.adjacency(t, s) = w;
    }
  g.adjacency.diagonal().setZero();
  g.laplacian = laplacian_from_adjacency(g.adjacency);
  return g;
}

inline ModeGraph build_mode_graph(const DenseTensor& t, int mode, Index k,
                                  BandwidthRule rule = BandwidthRule::median_kth_neighbor()) {
  return build_mode_graph_from_rows(unfold(t, mode), mode, k, rule);
}

// One graph per mode with k clamped to extent-1 (modes with extent 1 are rejected).
inline std::vector<ModeGraph> build_all_mode_graphs(const DenseTensor& t, Index k,
                                                    BandwidthRule rule = BandwidthRule::median_kth_neighbor()) {
  std::vector<ModeGraph> graphs;
  for (int n = 0; n < t.order(); ++n)
    graphs.push_back(build_mode_graph(t, n, std::min(k, t.shape()[n] - 1), rule));
  return graphs;
}

// tr(X^T Phi X) for X = unfold(l, mode).
inline double graph_quadratic_form(const DenseTensor& l, const ModeGraph& g) {
  const Matrix x = unfold(l, g.mode);
  detail::require(g.size() == x.rows(), ErrorKind::shape_mismatch,
                  "graph for mode " + std::to_string(g.mode) + " has " + std::to_string(g.size()) +
                      " vertices, tensor extent is " + std::to_string(x.rows()));
  return (g.laplacian * x).cwiseProduct(x).sum();
}

// theta * sum_n tr(L_(n)^T Phi^n L_(n)); graphs must cover every mode of l.
inline double laplacian_energy(const DenseTensor& l, std::span<const ModeGraph> graphs, double theta) {
  detail::require(static_cast<int>(graphs.size()) == l.order(), ErrorKind::shape_mismatch,
                  "expected one graph per mode (" + std::to_string(l.order()) + "), got " +
                      std::to_string(graphs.size()));
  double sum = 0.0;
  for (const auto& g : graphs) sum += graph_quadratic_form(l, g);
  return theta * sum;
}

// Sparse triplet text: a JSON header line, then "row col weight" per nonzero
// upper-triangular adjacency entry.
inline void write_graph(std::ostream& os, const ModeGraph& g) {
  nlohmann::json header{{"format", "gloss-graph"}, {"version", 1}, {"mode", g.mode},
                        {"vertices", g.size()},    {"k", g.k},     {"bandwidth", g.bandwidth}};
  os << header.dump() << '\n';
  os.precision(17);
  for (Index i = 0; i < g.size(); ++i)
    for (Index j = i + 1; j < g.size(); ++j)
      if (g.adjacency(i, j) != 0.0) os << i << ' ' << j << ' ' << g.adjacency(i, j) << '\n';
}

inline ModeGraph read_graph(std::istream& is) {
  std::string line;
  detail::require(static_cast<bool>(std::getline(is, line)), ErrorKind::io, "graph file: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    detail::fail(ErrorKind::io, std::string("graph file: bad header: ") + e.what());
  }
  detail::require(header.value("format", "") == "gloss-graph", ErrorKind::io, "graph file: wrong format tag");
  ModeGraph g;
  g.mode = header.at("mode").get<int>();
  g.k = header.at("k").get<Index>();
  g.bandwidth = header.at("bandwidth").get<double>();
  const auto n = header.at("vertices").get<Index>();
  g.adjacency = Matrix::Zero(n, n);
  Index i = 0, j = 0;
  double w = 0.0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    detail::require(static_cast<bool>(ls >> i >> j >> w), ErrorKind::io, "graph file: bad triplet '" + line + "'");
    detail::require(i >= 0 && i < n && j >= 0 && j < n && i != j, ErrorKind::io, "graph file: index out of range");
    g.adjacency(i, j) = g.adjacency(j, i) = w;
  }
  g.laplacian = laplacian_from_adjacency(g.adjacency);
  return g;
}

}  // namespace gloss
