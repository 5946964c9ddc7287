#pragma once

// Subproblem objectives written out term by term, independent of the closed
// forms in the solver, plus random instance builders.

#include <Eigen/SVD>
#include <algorithm>
#include <functional>
#include <limits>
#include <random>

#include "test_util.hpp"

namespace gloss::testing {

struct RandomInstance {
  DenseTensor y;
  SupportSet omega;
  std::vector<ModeGraph> graphs;
  SolverConfig config;
  SolverState state;
};

inline SolverConfig random_config(int order, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 2.0);
  SolverConfig c;
  c.variant = Variant::gloss;
  c.lambda = 0.3 * u(rng);
  c.gamma = 0.3 * u(rng);
  c.theta = u(rng);
  c.psi.resize(order);
  for (double& p : c.psi) p = u(rng);
  for (double& b : c.beta) b = u(rng);
  return c;
}

inline RandomInstance random_instance(const Shape& shape, std::mt19937_64& rng, double p_observed = 0.75) {
  RandomInstance r;
  r.y = random_tensor(shape, rng, -3.0, 3.0);
  r.omega = random_support(shape, p_observed, rng);
  r.graphs = build_all_mode_graphs(project(r.y, r.omega), 2);
  r.config = random_config(static_cast<int>(shape.size()), rng);
  SolverState& s = r.state;
  s = SolverState::zeros(shape);
  auto fill = [&](DenseTensor& t) { t = random_tensor(shape, rng, -1.0, 1.0); };
  fill(s.low_rank);
  fill(s.sparse);
  fill(s.sparse_copy);
  fill(s.tv);
  fill(s.dual_data);
  fill(s.dual_tv);
  fill(s.dual_copy);
  for (auto* v : {&s.nuclear_copies, &s.graph_copies, &s.dual_nuclear, &s.dual_graph})
    for (auto& t : *v) fill(t);
  return r;
}

inline double sq(const DenseTensor& t) { return t.vec().squaredNorm(); }

inline double nuclear_sum(const DenseTensor& t, int n) {
  return Eigen::JacobiSVD<Matrix>(unfold(t, n)).singularValues().sum();
}

inline DenseTensor masked(const DenseTensor& t, const SupportSet& omega) { return project(t, omega); }

inline DenseTensor times_diff(const DenseTensor& t) {
  // Fibre loop: (W x_1 Delta)[i, ...] = W[i, ...] - W[i+1 mod I1, ...].
  DenseTensor out(t.shape());
  const Index n1 = t.shape()[0];
  for (Index off = 0; off < t.size(); ++off) {
    auto idx = t.index_of(off);
    idx[0] = (idx[0] + 1) % n1;
    out[off] = t[off] - t[t.offset(idx)];
  }
  return out;
}

// beta1/2 ||P[L + S - Y - L1]||^2 + sum_n beta2/2 ||Lx - L - L2||^2 + beta3/2 ||L - Laux - L3||^2
inline double low_rank_objective(const DenseTensor& l, const RandomInstance& r, const SolverConfig& c) {
  const auto& s = r.state;
  double f = 0.5 * c.beta[0] * sq(masked(l + s.sparse - r.y - s.dual_data, r.omega));
  for (std::size_t n = 0; n < s.nuclear_copies.size(); ++n) {
    f += 0.5 * c.beta[1] * sq(s.nuclear_copies[n] - l - s.dual_nuclear[n]);
    if (c.theta > 0.0) f += 0.5 * c.beta[2] * sq(l - s.graph_copies[n] - s.dual_graph[n]);
  }
  return f;
}

// psi_n ||X_(n)||_* + beta2/2 ||X - L - L2^n||^2
inline double nuclear_copy_objective(const DenseTensor& x, const RandomInstance& r, const SolverConfig& c, int n) {
  return c.psi[n] * nuclear_sum(x, n) + 0.5 * c.beta[1] * sq(x - r.state.low_rank - r.state.dual_nuclear[n]);
}

// theta/2 tr(X_(n)^T Phi X_(n)) + beta3/2 ||L - X - L3^n||^2
inline double graph_copy_objective(const DenseTensor& x, const RandomInstance& r, const SolverConfig& c, int n) {
  const Matrix xn = unfold(x, n);
  const double quad = (xn.transpose() * r.graphs[n].laplacian * xn).trace();
  return 0.5 * c.theta * quad + 0.5 * c.beta[2] * sq(r.state.low_rank - x - r.state.dual_graph[n]);
}

// lambda ||S||_1 + beta1/2 ||P[S + L - Y - L1]||^2 + beta5/2 ||S - W - L5||^2 (last term only with TV)
inline double sparse_objective(const DenseTensor& x, const RandomInstance& r, const SolverConfig& c) {
  const auto& s = r.state;
  double f = c.lambda * l1_norm(x) + 0.5 * c.beta[0] * sq(masked(x + s.low_rank - r.y - s.dual_data, r.omega));
  if (c.gamma > 0.0) f += 0.5 * c.beta[4] * sq(x - s.sparse_copy - s.dual_copy);
  return f;
}

// beta4/2 ||W x_1 Delta - Z - L4||^2 + beta5/2 ||S - W - L5||^2
inline double sparse_copy_objective(const DenseTensor& w, const RandomInstance& r, const SolverConfig& c) {
  const auto& s = r.state;
  return 0.5 * c.beta[3] * sq(times_diff(w) - s.tv - s.dual_tv) + 0.5 * c.beta[4] * sq(s.sparse - w - s.dual_copy);
}

// gamma ||Z||_1 + beta4/2 ||W x_1 Delta - Z - L4||^2
inline double tv_objective(const DenseTensor& z, const RandomInstance& r, const SolverConfig& c) {
  const auto& s = r.state;
  return c.gamma * l1_norm(z) + 0.5 * c.beta[3] * sq(times_diff(s.sparse_copy) - z - s.dual_tv);
}

// Smallest f(x + eps d) - f(x) over random Gaussian directions; negative
// values mean the candidate is not the minimizer.
inline double worst_perturbation(const std::function<double(const DenseTensor&)>& f, const DenseTensor& x,
                                 std::mt19937_64& rng, int directions = 20, double eps = 1e-4) {
  const double base = f(x);
  double worst = std::numeric_limits<double>::infinity();
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < directions; ++k) {
    DenseTensor d(x.shape());
    for (double& v : d.values()) v = g(rng);
    worst = std::min(worst, f(x + eps * d) - base);
  }
  return worst;
}

// Runs each update rule once on a random instance and returns the worst
// perturbation gap per rule, in the order L, Lx, Laux, S, W, Z.
struct UpdateOptimality {
  std::array<double, 6> worst{};
};

inline UpdateOptimality check_update_optimality(const Shape& shape, std::mt19937_64& rng, bool tv = true) {
  RandomInstance r = random_instance(shape, rng);
  if (!tv) r.config.gamma = 0.0;
  const AdmmProblem p(r.y, r.omega, r.config, r.graphs);
  const SolverConfig& c = p.config();
  UpdateOptimality out;
  out.worst.fill(std::numeric_limits<double>::infinity());
  const DenseTensor l = update_low_rank(r.state, p);
  out.worst[0] = worst_perturbation([&](const DenseTensor& x) { return low_rank_objective(x, r, c); }, l, rng);
  for (int n = 0; n < static_cast<int>(shape.size()); ++n) {
    const DenseTensor lx = update_nuclear_copy(r.state, p, n);
    out.worst[1] = std::min(out.worst[1], worst_perturbation(
        [&](const DenseTensor& x) { return nuclear_copy_objective(x, r, c, n); }, lx, rng));
    const DenseTensor la = update_graph_copy(r.state, p, n);
    out.worst[2] = std::min(out.worst[2], worst_perturbation(
        [&](const DenseTensor& x) { return graph_copy_objective(x, r, c, n); }, la, rng));
  }
  const DenseTensor s = update_sparse(r.state, p);
  out.worst[3] = worst_perturbation([&](const DenseTensor& x) { return sparse_objective(x, r, c); }, s, rng);
  if (c.tv_active()) {
    const DenseTensor w = update_sparse_copy(r.state, p);
    out.worst[4] = worst_perturbation([&](const DenseTensor& x) { return sparse_copy_objective(x, r, c); }, w, rng);
    const DenseTensor z = update_tv(r.state, p);
    out.worst[5] = worst_perturbation([&](const DenseTensor& x) { return tv_objective(x, r, c); }, z, rng);
  }
  return out;
}

// Runs `iters` steps for two configurations from the zero state and returns
// the largest elementwise difference over every iterate of L and S.
inline double iterate_divergence(const DenseTensor& y, const SupportSet& omega, const SolverConfig& a,
                                 std::span<const ModeGraph> graphs_a, const SolverConfig& b,
                                 std::span<const ModeGraph> graphs_b, int iters) {
  const AdmmProblem pa(y, omega, a, graphs_a), pb(y, omega, b, graphs_b);
  SolverState sa = SolverState::zeros(y.shape()), sb = SolverState::zeros(y.shape());
  double worst = 0.0;
  for (int t = 0; t < iters; ++t) {
    admm_step(sa, pa);
    admm_step(sb, pb);
    worst = std::max({worst, max_abs_diff(sa.low_rank, sb.low_rank), max_abs_diff(sa.sparse, sb.sparse)});
  }
  return worst;
}

}  // namespace gloss::testing
