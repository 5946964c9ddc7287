#pragma once

// ROC/AUC evaluation, multi-seed trials, two-parameter sweeps and
// top-K event detection.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "gloss/data_io.hpp"
#include "gloss/error.hpp"
#include "gloss/graph.hpp"
#include "gloss/scoring.hpp"
#include "gloss/solver.hpp"
#include "gloss/synth.hpp"
#include "gloss/tensor.hpp"

namespace gloss {

// ---------------------------------------------------------------------------
// ROC / AUC

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0.0;
};

// Sweeps the threshold over the distinct scores from high to low. Equal
// scores enter in one step, so the trapezoid area equals the probability that
// a random positive outranks a random negative with ties counted as 1/2.
inline RocResult roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  detail::require(scores.size() == labels.size(), ErrorKind::shape_mismatch, "scores and labels differ in size");
  const auto positives = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](auto v) { return v != 0; }));
  const double negatives = static_cast<double>(labels.size()) - positives;
  detail::require(positives > 0 && negatives > 0, ErrorKind::invalid_argument,
                  "ROC needs at least one positive and one negative label");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult r;
  r.points.push_back({0.0, 0.0});
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] ? tp : fp) += 1.0;
      ++i;
    }
    const RocPoint next{fp / negatives, tp / positives};
    const RocPoint& prev = r.points.back();
    r.auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) * 0.5;
    r.points.push_back(next);
  }
  return r;
}

inline RocResult roc_auc(const DenseTensor& scores, const BoolTensor& labels) {
  detail::require(scores.shape() == labels.shape(), ErrorKind::shape_mismatch,
                  "score shape " + to_string(scores.shape()) + " does not match labels " + to_string(labels.shape()));
  return roc_auc(scores.values(), labels.values());
}

inline RocResult roc_auc(const ScoreTensor& st, const BoolTensor& labels) { return roc_auc(st.scores, labels); }

inline void write_roc_csv(std::ostream& os, const RocResult& r) {
  os << "fpr,tpr\n";
  os.precision(10);
  for (const auto& p : r.points) os << p.fpr << ',' << p.tpr << '\n';
}

// ---------------------------------------------------------------------------
// Pipelines

// Hyperparameter names accepted by overrides and sweeps:
// lambda, gamma, theta, psi1..psiN, beta (all five), beta1..beta5.
inline void apply_override(SolverConfig& c, const std::string& name, double value) {
  if (name == "lambda") {
    c.lambda = value;
  } else if (name == "gamma") {
    c.gamma = value;
  } else if (name == "theta") {
    c.theta = value;
  } else if (name == "beta") {
    c.beta.fill(value);
  } else if (name.size() == 5 && name.starts_with("beta") && name[4] >= '1' && name[4] <= '5') {
    c.beta[name[4] - '1'] = value;
  } else if (name.size() > 3 && name.starts_with("psi")) {
    std::size_t n = 0;
    try {
      n = std::stoul(name.substr(3));
    } catch (const std::exception&) {
      detail::fail(ErrorKind::invalid_argument, "unknown hyperparameter '" + name + "'");
    }
    detail::require(n >= 1 && n <= c.psi.size(), ErrorKind::invalid_argument, "no mode for '" + name + "'");
    c.psi[n - 1] = value;
  } else {
    detail::fail(ErrorKind::invalid_argument, "unknown hyperparameter '" + name + "'");
  }
}

struct PipelineSpec {
  Variant variant = Variant::gloss;
  ScoreMethod scorer = ScoreMethod::elliptic_envelope;
  SyntheticSpec synth;
  Index graph_k = 10;
  std::size_t lof_k = 10;
  int max_iters = 200;
  double tol = 1e-6;
  std::vector<std::pair<std::string, double>> overrides;  // applied after the defaults
};

inline void to_json(nlohmann::json& j, const PipelineSpec& p) {
  nlohmann::json ov = nlohmann::json::object();
  for (const auto& [k, v] : p.overrides) ov[k] = v;
  j = nlohmann::json{{"variant", to_string(p.variant)}, {"scorer", to_string(p.scorer)}, {"synth", p.synth},
                     {"graph_k", p.graph_k},            {"lof_k", p.lof_k},            {"max_iters", p.max_iters},
                     {"tol", p.tol},                    {"overrides", ov}};
}

// Solver configuration for an instance: data-driven defaults, then overrides.
inline SolverConfig pipeline_config(const PipelineSpec& spec, const DenseTensor& y, const SupportSet& omega) {
  SolverConfig c = default_hyperparameters(y, omega, spec.variant);
  c.max_iters = spec.max_iters;
  c.tol = spec.tol;
  for (const auto& [name, value] : spec.overrides) apply_override(c, name, value);
  return c;
}

struct PipelineOutput {
  DecompositionResult decomposition;
  ScoreTensor scores;
  double solve_seconds = 0.0;
};

// decompose -> score for one instance; graphs are built from P_Omega[Y].
inline PipelineOutput run_pipeline(const PipelineSpec& spec, const DenseTensor& y, const SupportSet& omega) {
  const SolverConfig config = pipeline_config(spec, y, omega);
  std::vector<ModeGraph> graphs;
  if (spec.variant == Variant::gloss) graphs = build_all_mode_graphs(project(y, omega), spec.graph_k);
  PipelineOutput out;
  const auto t0 = std::chrono::steady_clock::now();
  SolveOptions opts;
  opts.track_objective = false;
  out.decomposition = solve(y, omega, config, graphs, opts);
  out.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.scores = score_tensor(out.decomposition.sparse, spec.scorer, spec.lof_k);
  return out;
}

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  double auc = 0.0;
  int iterations = 0;
  bool converged = false;
  double feasibility = 0.0;
  double sparse_l1 = 0.0;
  double solve_seconds = 0.0;
};

struct TrialSummary {
  std::vector<TrialRecord> trials;
  double mean_auc = 0.0;
  double std_auc = 0.0;  // sample standard deviation, 0 for a single trial
};

inline TrialRecord run_trial(const PipelineSpec& spec, std::uint64_t seed, int trial_index = 0) {
  SyntheticSpec synth = spec.synth;
  synth.seed = seed;
  const SyntheticInstance inst = generate(synth);
  PipelineOutput out = run_pipeline(spec, inst.y, inst.omega);
  TrialRecord r;
  r.trial = trial_index;
  r.seed = seed;
  r.auc = roc_auc(out.scores, inst.labels).auc;
  r.iterations = out.decomposition.iterations;
  r.converged = out.decomposition.converged;
  r.feasibility = out.decomposition.history.empty() ? 0.0 : out.decomposition.history.back().feasibility;
  r.sparse_l1 = l1_norm(out.decomposition.sparse);
  r.solve_seconds = out.solve_seconds;
  return r;
}

inline TrialSummary summarize(std::vector<TrialRecord> trials) {
  TrialSummary s;
  s.trials = std::move(trials);
  const double n = static_cast<double>(s.trials.size());
  if (s.trials.empty()) return s;
  for (const auto& t : s.trials) s.mean_auc += t.auc;
  s.mean_auc /= n;
  if (s.trials.size() > 1) {
    double ss = 0.0;
    for (const auto& t : s.trials) ss += (t.auc - s.mean_auc) * (t.auc - s.mean_auc);
    s.std_auc = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

// Runs one trial per seed on a pool of `workers` threads; failures are
// rethrown with the trial index.
inline TrialSummary run_trials(const PipelineSpec& spec, const std::vector<std::uint64_t>& seeds,
                               unsigned workers = 1) {
  detail::require(!seeds.empty(), ErrorKind::invalid_argument, "run_trials needs at least one seed");
  std::vector<TrialRecord> records(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        records[i] = run_trial(spec, seeds[i], static_cast<int>(i));
      } catch (const Error& e) {
        errors[i] = std::make_exception_ptr(Error(e.kind(), "trial " + std::to_string(i) + ": " + e.what()));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(seeds.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return summarize(std::move(records));
}

inline void write_trials_csv(std::ostream& os, const PipelineSpec& spec, const TrialSummary& s) {
  os << "trial,seed,variant,scorer,c,P,auc,iterations,converged,feasibility,solve_seconds\n";
  os.precision(10);
  for (const auto& t : s.trials)
    os << t.trial << ',' << t.seed << ',' << to_string(spec.variant) << ',' << to_string(spec.scorer) << ','
       << spec.synth.c << ',' << spec.synth.missing_percent << ',' << t.auc << ',' << t.iterations << ','
       << (t.converged ? 1 : 0) << ',' << t.feasibility << ',' << t.solve_seconds << '\n';
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

struct SweepResult {
  SweepAxis rows, cols;
  Matrix mean_auc;  // rows.values.size() x cols.values.size()
};

inline SweepResult sweep(const SweepAxis& rows, const SweepAxis& cols, const PipelineSpec& spec,
                         const std::vector<std::uint64_t>& seeds, unsigned workers = 1) {
  detail::require(!rows.values.empty() && !cols.values.empty(), ErrorKind::invalid_argument, "sweep grid is empty");
  SweepResult r{rows, cols, Matrix(static_cast<Index>(rows.values.size()), static_cast<Index>(cols.values.size()))};
  for (std::size_t i = 0; i < rows.values.size(); ++i)
    for (std::size_t j = 0; j < cols.values.size(); ++j) {
      PipelineSpec point = spec;
      point.overrides.emplace_back(rows.name, rows.values[i]);
      point.overrides.emplace_back(cols.name, cols.values[j]);
      r.mean_auc(static_cast<Index>(i), static_cast<Index>(j)) = run_trials(point, seeds, workers).mean_auc;
    }
  return r;
}

// Long format: one line per grid point.
inline void write_sweep_csv(std::ostream& os, const SweepResult& r) {
  os << r.rows.name << ',' << r.cols.name << ",mean_auc\n";
  os.precision(10);
  for (std::size_t i = 0; i < r.rows.values.size(); ++i)
    for (std::size_t j = 0; j < r.cols.values.size(); ++j)
      os << r.rows.values[i] << ',' << r.cols.values[j] << ','
         << r.mean_auc(static_cast<Index>(i), static_cast<Index>(j)) << '\n';
}

// ---------------------------------------------------------------------------
// Event detection

struct EventDetectionRow {
  double k_percent = 0.0;
  Index detected = 0;
  std::vector<bool> hits;  // per event
};

// An event is detected at level K when any top-K flagged cell lies in its
// (zone, date, hour range). Scores must be hour x day x week x zone.
inline std::vector<EventDetectionRow> event_detection(const DenseTensor& scores, const EventList& events,
                                                      const std::vector<double>& k_grid, const Calendar& calendar,
                                                      const ZoneIndex& zones) {
  detail::require(scores.order() == 4, ErrorKind::shape_mismatch, "event detection needs an order-4 score tensor");
  detail::require(scores.shape()[3] == zones.size(), ErrorKind::shape_mismatch,
                  "zone index size does not match the score tensor");
  struct Cell {
    Index zone, day, week;
  };
  std::vector<Cell> cells;
  for (const auto& e : events) {
    const auto z = zones.find(e.zone_id);
    detail::require(z.has_value(), ErrorKind::invalid_argument, "event '" + e.name + "' has unknown zone '" + e.zone_id + "'");
    const auto loc = calendar.locate(e.date);
    detail::require(loc.has_value() && loc->week < scores.shape()[2], ErrorKind::invalid_argument,
                    "event '" + e.name + "' date " + format_date(e.date) + " is outside the tensor's weeks");
    detail::require(e.end_hour < scores.shape()[0], ErrorKind::invalid_argument, "event hours exceed the hour mode");
    cells.push_back({*z, loc->day, loc->week});
  }
  std::vector<EventDetectionRow> rows;
  for (double k : k_grid) {
    const BoolTensor flagged = top_k_labels(scores, k);
    EventDetectionRow row{k, 0, std::vector<bool>(events.size(), false)};
    for (std::size_t i = 0; i < events.size(); ++i) {
      for (Index h = events[i].start_hour; h <= events[i].end_hour; ++h)
        if (flagged(h, cells[i].day, cells[i].week, cells[i].zone)) {
          row.hits[i] = true;
          break;
        }
      row.detected += row.hits[i] ? 1 : 0;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace gloss
