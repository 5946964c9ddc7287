#pragma once

// ADMM solver for the graph-regularized low-rank plus temporally smooth sparse
// decomposition and its ablations.
//
//   min  sum_n psi_n ||L_(n)||_* + theta sum_n tr(L_(n)^T Phi^n L_(n))
//        + lambda ||S||_1 + gamma ||S x_1 Delta||_1
//   s.t. P_Omega[L + S] = P_Omega[Y]
//
// The splitting introduces one nuclear-norm copy and one graph copy of L per
// mode, a copy W of S carrying the total-variation term, and Z = W x_1 Delta.
// Variants are presets of the same iteration:
//
//   GLOSS    all terms
//   LOSS     theta = 0
//   WHoRPCA  theta = gamma = 0
//   HoRPCA   theta = gamma = 0, psi_n = 1
//
// The graph branch runs iff theta > 0 and the TV branch iff gamma > 0, so a
// GLOSS configuration with theta = 0 produces exactly the LOSS iterates.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Eigenvalues>

#include "json.hpp"

#include "gloss/error.hpp"
#include "gloss/graph.hpp"
#include "gloss/prox.hpp"
#include "gloss/tensor.hpp"

namespace gloss {

enum class Variant { gloss, loss, whorpca, horpca };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::gloss: return "GLOSS";
    case Variant::loss: return "LOSS";
    case Variant::whorpca: return "WHORPCA";
    case Variant::horpca: return "HORPCA";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  std::string up(s);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "GLOSS") return Variant::gloss;
  if (up == "LOSS") return Variant::loss;
  if (up == "WHORPCA") return Variant::whorpca;
  if (up == "HORPCA") return Variant::horpca;
  detail::fail(ErrorKind::invalid_argument, "unknown variant '" + std::string(s) + "'");
}

struct SolverConfig {
  Variant variant = Variant::gloss;
  double lambda = 0.0;       // sparsity weight
  double gamma = 0.0;        // temporal TV weight
  double theta = 0.0;        // graph weight
  std::vector<double> psi;   // nuclear-norm weight per mode
  std::array<double, 5> beta{1.0, 1.0, 1.0, 1.0, 1.0};
  int max_iters = 200;
  double tol = 1e-6;

  bool graph_active() const { return theta > 0.0; }
  bool tv_active() const { return gamma > 0.0; }

  void validate(int order) const {
    using detail::require;
    const auto bad = ErrorKind::invalid_argument;
    require(static_cast<int>(psi.size()) == order, bad,
            "psi needs one weight per mode (" + std::to_string(order) + "), got " + std::to_string(psi.size()));
    for (double p : psi) require(p >= 0.0 && std::isfinite(p), bad, "psi weights must be finite and nonnegative");
    require(lambda >= 0.0 && std::isfinite(lambda), bad, "lambda must be finite and nonnegative");
    require(gamma >= 0.0 && std::isfinite(gamma), bad, "gamma must be finite and nonnegative");
    require(theta >= 0.0 && std::isfinite(theta), bad, "theta must be finite and nonnegative");
    for (double b : beta) require(b > 0.0 && std::isfinite(b), bad, "all beta penalties must be positive");
    require(max_iters >= 1, bad, "max_iters must be >= 1");
    require(tol > 0.0, bad, "tol must be positive");
  }
};

// Forces the terms a variant omits to their neutral values.
inline SolverConfig apply_variant(SolverConfig c) {
  if (c.variant != Variant::gloss) c.theta = 0.0;
  if (c.variant == Variant::whorpca || c.variant == Variant::horpca) c.gamma = 0.0;
  if (c.variant == Variant::horpca) std::fill(c.psi.begin(), c.psi.end(), 1.0);
  return c;
}

inline void to_json(nlohmann::json& j, const SolverConfig& c) {
  j = nlohmann::json{{"variant", to_string(c.variant)},
                     {"lambda", c.lambda},
                     {"gamma", c.gamma},
                     {"theta", c.theta},
                     {"psi", c.psi},
                     {"beta", c.beta},
                     {"max_iters", c.max_iters},
                     {"tol", c.tol}};
}

inline void from_json(const nlohmann::json& j, SolverConfig& c) {
  static const std::array<std::string_view, 8> known{"variant", "lambda", "gamma", "theta",
                                                     "psi",     "beta",   "max_iters", "tol"};
  for (const auto& [key, _] : j.items())
    detail::require(std::find(known.begin(), known.end(), key) != known.end(), ErrorKind::shape_mismatch,
                    "solver config: unknown key '" + key + "'");
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.lambda = j.at("lambda").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.theta = j.at("theta").get<double>();
  c.psi = j.at("psi").get<std::vector<double>>();
  c.beta = j.at("beta").get<std::array<double, 5>>();
  c.max_iters = j.value("max_iters", 200);
  c.tol = j.value("tol", 1e-6);
}

// Trace of the matrix square root of the row covariance of the mode-n unfolding.
inline double covariance_sqrt_trace(const DenseTensor& t, int mode) {
  Matrix x = unfold(t, mode);
  const Index samples = x.cols();
  x.colwise() -= x.rowwise().mean();
  const Matrix cov = (x * x.transpose()) / static_cast<double>(std::max<Index>(samples - 1, 1));
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

inline double population_std(const DenseTensor& t) {
  const double mean = t.vec().mean();
  return std::sqrt((t.array() - mean).square().mean());
}

// Data-driven defaults:
//   beta_i = 1 / (5 std(vec(P_Omega[Y])))
//   lambda = 1/||P_Omega[Y]||_0 (GLOSS), 1/max I_n (LOSS, WHoRPCA), 1/sqrt(max I_n) (HoRPCA)
//   gamma  = lambda for GLOSS/LOSS
//   psi_n  = p / tr(sqrt(Sigma_n)) with p chosen so min psi_n = 1 (all ones for HoRPCA)
//   theta  = geometric mean of psi (GLOSS)
inline SolverConfig default_hyperparameters(const DenseTensor& y, const SupportSet& omega, Variant variant) {
  detail::require(y.shape() == omega.shape(), ErrorKind::shape_mismatch, "support shape does not match data");
  detail::require(y.all_finite(), ErrorKind::numerical, "data tensor has non-finite entries");
  detail::require(omega.count() > 0, ErrorKind::invalid_argument, "support set is empty");
  const DenseTensor py = project(y, omega);
  const double sd = population_std(py);
  detail::require(sd > 0.0, ErrorKind::numerical, "observed data has zero variance; beta is undefined");

  SolverConfig c;
  c.variant = variant;
  c.beta.fill(1.0 / (5.0 * sd));
  const Index max_extent = *std::max_element(y.shape().begin(), y.shape().end());
  const Index nnz = (py.array() != 0.0).count();
  switch (variant) {
    case Variant::gloss: c.lambda = 1.0 / static_cast<double>(nnz); break;
    case Variant::loss:
    case Variant::whorpca: c.lambda = 1.0 / static_cast<double>(max_extent); break;
    case Variant::horpca: c.lambda = 1.0 / std::sqrt(static_cast<double>(max_extent)); break;
  }
  c.gamma = (variant == Variant::gloss || variant == Variant::loss) ? c.lambda : 0.0;

  c.psi.assign(y.order(), 1.0);
  if (variant != Variant::horpca) {
    std::vector<double> traces(y.order());
    for (int n = 0; n < y.order(); ++n) {
      traces[n] = covariance_sqrt_trace(py, n);
      detail::require(traces[n] > 0.0, ErrorKind::numerical,
                      "mode " + std::to_string(n) + " covariance is zero; psi is undefined");
    }
    const double p = *std::max_element(traces.begin(), traces.end());
    for (int n = 0; n < y.order(); ++n) c.psi[n] = p / traces[n];
  }
  if (variant == Variant::gloss) {
    double log_sum = 0.0;
    for (double p : c.psi) log_sum += std::log(p);
    c.theta = std::exp(log_sum / static_cast<double>(c.psi.size()));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Iteration state

struct SolverState {
  DenseTensor low_rank;                       // L
  DenseTensor sparse;                         // S
  DenseTensor sparse_copy;                    // W, carries the TV term
  DenseTensor tv;                             // Z = W x_1 Delta
  std::vector<DenseTensor> nuclear_copies;    // Lx^n
  std::vector<DenseTensor> graph_copies;      // Laux^n
  DenseTensor dual_data;                      // Lambda_1
  std::vector<DenseTensor> dual_nuclear;      // Lambda_2^n
  std::vector<DenseTensor> dual_graph;        // Lambda_3^n
  DenseTensor dual_tv;                        // Lambda_4
  DenseTensor dual_copy;                      // Lambda_5
  int iteration = 0;

  static SolverState zeros(const Shape& shape) {
    SolverState s;
    const DenseTensor z(shape);
    s.low_rank = s.sparse = s.sparse_copy = s.tv = s.dual_data = s.dual_tv = s.dual_copy = z;
    const auto n = shape.size();
    s.nuclear_copies.assign(n, z);
    s.graph_copies.assign(n, z);
    s.dual_nuclear.assign(n, z);
    s.dual_graph.assign(n, z);
    return s;
  }
};

// Everything that stays fixed across iterations: projected data, mask,
// validated config and the cached inverses.
class AdmmProblem {
 public:
  AdmmProblem(const DenseTensor& y, const SupportSet& omega, const SolverConfig& config,
              std::span<const ModeGraph> graphs = {})
      : config_(apply_variant(config)) {
    detail::require(y.shape() == omega.shape(), ErrorKind::shape_mismatch,
                    "support shape " + to_string(omega.shape()) + " does not match data " + to_string(y.shape()));
    detail::require(y.all_finite(), ErrorKind::numerical, "data tensor has non-finite entries");
    config_.validate(y.order());
    observed_ = project(y, omega);
    mask_ = omega.indicator();
    shape_ = y.shape();

    if (config_.variant == Variant::gloss)
      detail::require(static_cast<int>(graphs.size()) == y.order(), ErrorKind::shape_mismatch,
                      "GLOSS needs one graph per mode (" + std::to_string(y.order()) + "), got " +
                          std::to_string(graphs.size()));
    else
      detail::require(graphs.empty(), ErrorKind::invalid_argument,
                      std::string("graphs are only accepted by GLOSS, not ") + std::string(to_string(config_.variant)));
    graphs_.assign(graphs.begin(), graphs.end());
    for (const auto& g : graphs_)
      detail::require(g.mode >= 0 && g.mode < y.order() && g.size() == shape_[g.mode], ErrorKind::shape_mismatch,
                      "graph for mode " + std::to_string(g.mode) + " does not match the tensor extent");

    if (config_.graph_active()) {
      graph_inverses_.resize(y.order());
      for (const auto& g : graphs_)
        graph_inverses_[g.mode] = precompute_graph_inverse(g.laplacian, config_.theta, config_.beta[2]).matrix;
      for (int n = 0; n < y.order(); ++n)
        detail::require(graph_inverses_[n].size() > 0, ErrorKind::shape_mismatch,
                        "missing graph for mode " + std::to_string(n));
    }
    if (config_.tv_active()) {
      diff_ = build_diff_operator(shape_[0]);
      const auto inv = precompute_tv_inverse(diff_, config_.beta[3], config_.beta[4]);
      w_from_sparse_ = config_.beta[4] * inv.matrix;
      w_from_tv_ = config_.beta[3] * inv.matrix * diff_.matrix.transpose();
    }
  }

  const SolverConfig& config() const { return config_; }
  const Shape& shape() const { return shape_; }
  int order() const { return static_cast<int>(shape_.size()); }
  const DenseTensor& observed() const { return observed_; }  // P_Omega[Y]
  const Vector& mask() const { return mask_; }
  const DiffOperator& diff() const { return diff_; }
  std::span<const ModeGraph> graphs() const { return graphs_; }
  const Matrix& graph_inverse(int n) const { return graph_inverses_.at(n); }
  const Matrix& w_from_sparse() const { return w_from_sparse_; }  // beta5 * W_inv
  const Matrix& w_from_tv() const { return w_from_tv_; }          // beta4 * W_inv * Delta^T

 private:
  SolverConfig config_;
  Shape shape_;
  DenseTensor observed_;
  Vector mask_;
  std::vector<ModeGraph> graphs_;
  std::vector<Matrix> graph_inverses_;
  DiffOperator diff_;
  Matrix w_from_sparse_;
  Matrix w_from_tv_;
};

// L update: closed-form least squares over the data, nuclear-copy and graph-copy terms.
inline DenseTensor update_low_rank(const SolverState& s, const AdmmProblem& p) {
  const auto& c = p.config();
  const double n = static_cast<double>(p.order());
  const double b1 = c.beta[0], b2 = c.beta[1];
  const double b3 = c.graph_active() ? c.beta[2] : 0.0;

  DenseTensor consensus(p.shape());  // beta2 * T2 + beta3 * T3
  auto acc = consensus.array();
  for (int k = 0; k < p.order(); ++k) {
    acc += b2 * (s.nuclear_copies[k].array() - s.dual_nuclear[k].array());
    if (c.graph_active()) acc += b3 * (s.graph_copies[k].array() + s.dual_graph[k].array());
  }
  const double d_obs = b1 + n * (b2 + b3);
  const double d_unobs = n * (b2 + b3);
  DenseTensor out(p.shape());
  const auto m = p.mask().array();
  const auto fit = p.observed().array() - s.sparse.array() + s.dual_data.array();  // T1
  out.array() = m * (b1 * fit + acc) / d_obs + (1.0 - m) * acc / d_unobs;
  return out;
}

// Lx^n update: singular value thresholding of (L + Lambda_2^n)_(n) at psi_n / beta2.
inline DenseTensor update_nuclear_copy(const SolverState& s, const AdmmProblem& p, int n) {
  const auto& c = p.config();
  const DenseTensor arg = s.low_rank + s.dual_nuclear[n];
  return fold(svt(unfold(arg, n), c.psi[n] / c.beta[1]), n, p.shape());
}

// Laux^n update: beta3 * G_inv * (L - Lambda_3^n)_(n).
inline DenseTensor update_graph_copy(const SolverState& s, const AdmmProblem& p, int n) {
  if (!p.config().graph_active()) return DenseTensor(p.shape());
  const DenseTensor arg = s.low_rank - s.dual_graph[n];
  return mode_n_product(arg, p.config().beta[2] * p.graph_inverse(n), n);
}

// S update: soft thresholding of the blended target; without the TV branch
// the observed part uses the data term alone and the unobserved part is zero.
inline DenseTensor update_sparse(const SolverState& s, const AdmmProblem& p) {
  const auto& c = p.config();
  const double b1 = c.beta[0], b5 = c.beta[4];
  DenseTensor out(p.shape());
  const auto& mask = p.mask();
  const double* y = p.observed().data();
  const double* l = s.low_rank.data();
  const double* d1 = s.dual_data.data();
  const double* w = s.sparse_copy.data();
  const double* d5 = s.dual_copy.data();
  if (c.tv_active()) {
    const double thr_obs = c.lambda / (b1 + b5), thr_unobs = c.lambda / b5;
    for (Index i = 0; i < out.size(); ++i) {
      if (mask[i] != 0.0)
        out[i] = soft_threshold((b1 * (y[i] - l[i] + d1[i]) + b5 * (w[i] + d5[i])) / (b1 + b5), thr_obs);
      else
        out[i] = soft_threshold(w[i] + d5[i], thr_unobs);
    }
  } else {
    const double thr = c.lambda / b1;
    for (Index i = 0; i < out.size(); ++i)
      out[i] = mask[i] != 0.0 ? soft_threshold(y[i] - l[i] + d1[i], thr) : 0.0;
  }
  return out;
}

// W update: W_(1) = W_inv (beta5 (S - Lambda_5)_(1) + beta4 Delta^T (Lambda_4 + Z)_(1)).
inline DenseTensor update_sparse_copy(const SolverState& s, const AdmmProblem& p) {
  if (!p.config().tv_active()) return DenseTensor(p.shape());
  DenseTensor out = mode_n_product(s.sparse - s.dual_copy, p.w_from_sparse(), 0);
  out += mode_n_product(s.dual_tv + s.tv, p.w_from_tv(), 0);
  return out;
}

// Z update: eta(W x_1 Delta - Lambda_4, gamma / beta4).
inline DenseTensor update_tv(const SolverState& s, const AdmmProblem& p) {
  if (!p.config().tv_active()) return DenseTensor(p.shape());
  const auto& c = p.config();
  return soft_threshold(mode_n_product(s.sparse_copy, p.diff().matrix, 0) - s.dual_tv, c.gamma / c.beta[3]);
}

// Scaled dual ascent on every constraint.
inline void update_duals(SolverState& s, const AdmmProblem& p) {
  const auto& c = p.config();
  s.dual_data.array() -= p.mask().array() * (s.low_rank.array() + s.sparse.array() - p.observed().array());
  for (int n = 0; n < p.order(); ++n) {
    s.dual_nuclear[n].array() -= s.nuclear_copies[n].array() - s.low_rank.array();
    if (c.graph_active()) s.dual_graph[n].array() -= s.low_rank.array() - s.graph_copies[n].array();
  }
  if (c.tv_active()) {
    const DenseTensor dw = mode_n_product(s.sparse_copy, p.diff().matrix, 0);
    s.dual_tv.array() -= dw.array() - s.tv.array();
    s.dual_copy.array() -= s.sparse.array() - s.sparse_copy.array();
  }
}

// One full sweep in the fixed order L, Lx, Laux, S, W, Z, duals.
inline void admm_step(SolverState& s, const AdmmProblem& p) {
  s.low_rank = update_low_rank(s, p);
  for (int n = 0; n < p.order(); ++n) {
    s.nuclear_copies[n] = update_nuclear_copy(s, p, n);
    if (p.config().graph_active()) s.graph_copies[n] = update_graph_copy(s, p, n);
  }
  s.sparse = update_sparse(s, p);
  if (p.config().tv_active()) {
    s.sparse_copy = update_sparse_copy(s, p);
    s.tv = update_tv(s, p);
  }
  update_duals(s, p);
  ++s.iteration;
}

// ---------------------------------------------------------------------------
// Objective and diagnostics

// sum_n psi_n ||L_(n)||_* + theta sum_n tr(L_(n)^T Phi^n L_(n)) + lambda ||S||_1 + gamma ||S x_1 Delta||_1
inline double objective(const DenseTensor& l, const DenseTensor& s, const SolverConfig& config,
                        std::span<const ModeGraph> graphs) {
  detail::require(l.shape() == s.shape(), ErrorKind::shape_mismatch, "objective: L and S shapes differ");
  double value = 0.0;
  for (int n = 0; n < l.order(); ++n)
    if (config.psi.at(n) != 0.0) value += config.psi[n] * nuclear_norm(unfold(l, n));
  if (config.theta != 0.0) value += laplacian_energy(l, graphs, config.theta);
  value += config.lambda * l1_norm(s);
  if (config.gamma != 0.0) value += config.gamma * l1_norm(mode_n_product(s, build_diff_operator(s.shape()[0]).matrix, 0));
  return value;
}

struct IterationRecord {
  int iteration = 0;
  double feasibility = 0.0;      // ||P_Omega[L+S-Y]|| / ||P_Omega[Y]||
  double low_rank_change = 0.0;  // ||L^{t+1} - L^t|| / max(1, ||L^t||)
  double nuclear_gap = 0.0;      // max_n ||Lx^n - L|| / max(1, ||L||)
  double graph_gap = 0.0;        // max_n ||L - Laux^n|| / max(1, ||L||)
  double copy_gap = 0.0;         // ||S - W|| / max(1, ||S||)
  double tv_gap = 0.0;           // ||W x_1 Delta - Z|| / max(1, ||Z||)
  double objective = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;

  double max_primal_residual() const {
    return std::max({feasibility, nuclear_gap, graph_gap, copy_gap, tv_gap});
  }
};

struct SolveOptions {
  bool track_objective = true;
  std::function<void(const IterationRecord&)> on_iteration;
};

struct DecompositionResult {
  DenseTensor low_rank;
  DenseTensor sparse;
  std::vector<IterationRecord> history;
  int iterations = 0;
  bool converged = false;
  SolverConfig config;  // effective configuration after variant forcing
};

inline IterationRecord measure(const SolverState& s, const DenseTensor& previous_low_rank, const AdmmProblem& p) {
  IterationRecord r;
  r.iteration = s.iteration;
  const double y_norm = p.observed().vec().norm();
  const double resid =
      (p.mask().array() * (s.low_rank.array() + s.sparse.array() - p.observed().array())).matrix().norm();
  r.feasibility = resid / (y_norm > 0.0 ? y_norm : 1.0);
  const double l_prev = std::max(1.0, previous_low_rank.vec().norm());
  r.low_rank_change = (s.low_rank.vec() - previous_low_rank.vec()).norm() / l_prev;
  const double l_norm = std::max(1.0, s.low_rank.vec().norm());
  for (int n = 0; n < p.order(); ++n) {
    r.nuclear_gap = std::max(r.nuclear_gap, (s.nuclear_copies[n].vec() - s.low_rank.vec()).norm() / l_norm);
    if (p.config().graph_active())
      r.graph_gap = std::max(r.graph_gap, (s.low_rank.vec() - s.graph_copies[n].vec()).norm() / l_norm);
  }
  if (p.config().tv_active()) {
    r.copy_gap = (s.sparse.vec() - s.sparse_copy.vec()).norm() / std::max(1.0, s.sparse.vec().norm());
    const DenseTensor dw = mode_n_product(s.sparse_copy, p.diff().matrix, 0);
    r.tv_gap = (dw.vec() - s.tv.vec()).norm() / std::max(1.0, s.tv.vec().norm());
  }
  return r;
}

// Runs the iteration from the all-zero state until every primal residual and
// the relative change of L drop below tol, or max_iters is reached.
inline DecompositionResult solve(const DenseTensor& y, const SupportSet& omega, const SolverConfig& config,
                                 std::span<const ModeGraph> graphs = {}, const SolveOptions& options = {}) {
  const AdmmProblem problem(y, omega, config, graphs);
  const auto& c = problem.config();
  SolverState state = SolverState::zeros(y.shape());
  DecompositionResult result;
  result.config = c;

  for (int t = 0; t < c.max_iters; ++t) {
    const auto start = std::chrono::steady_clock::now();
    DenseTensor previous = state.low_rank;
    try {
      admm_step(state, problem);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::numerical) throw;
      detail::fail(ErrorKind::numerical, "iteration " + std::to_string(state.iteration + 1) + ": " + e.what());
    }
    if (!state.low_rank.all_finite() || !state.sparse.all_finite())
      detail::fail(ErrorKind::numerical, "non-finite iterate at iteration " + std::to_string(state.iteration));
    IterationRecord rec = measure(state, previous, problem);
    if (options.track_objective) rec.objective = objective(state.low_rank, state.sparse, c, problem.graphs());
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    if (options.on_iteration) options.on_iteration(rec);
    if (rec.max_primal_residual() < c.tol && rec.low_rank_change < c.tol) {
      result.converged = true;
      break;
    }
  }
  result.iterations = state.iteration;
  result.low_rank = std::move(state.low_rank);
  result.sparse = std::move(state.sparse);
  return result;
}

inline void write_diagnostics_csv(std::ostream& os, std::span<const IterationRecord> history) {
  os << "iteration,feasibility,low_rank_change,nuclear_gap,graph_gap,copy_gap,tv_gap,objective,wall_ms\n";
  os.precision(10);
  for (const auto& r : history)
    os << r.iteration << ',' << r.feasibility << ',' << r.low_rank_change << ',' << r.nuclear_gap << ','
       << r.graph_gap << ',' << r.copy_gap << ',' << r.tv_gap << ',' << r.objective << ',' << r.wall_ms << '\n';
}

}  // namespace gloss
