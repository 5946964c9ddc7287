// gloss: command-line front end.
//
//   gloss ingest    trip CSV -> count tensor + mask
//   gloss synth     synthetic benchmark instance
//   gloss decompose Y -> L + S
//   gloss score     S -> anomaly scores
//   gloss eval      AUC / event detection / multi-seed trials
//   gloss sweep     two-parameter AUC grid
//
// Every option can also come from `--config FILE` (JSON). Top-level keys name
// options without the leading dashes; an object keyed by the subcommand name
// holds keys for that subcommand only. Flags given on the command line win.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "gloss/gloss.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gloss;

namespace {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kBadArguments = 2,
  kUnreadableInput = 3,
  kSchemaViolation = 4,
  kNumericalFailure = 5,
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return kBadArguments;
    case ErrorKind::io: return kUnreadableInput;
    case ErrorKind::shape_mismatch: return kSchemaViolation;
    case ErrorKind::numerical: return kNumericalFailure;
  }
  return kOther;
}

// 64-bit FNV-1a of a file's bytes, hex encoded.
std::string content_hash(const fs::path& path) {
  const std::string bytes = detail::read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Config files

std::vector<std::string> json_inputs(const json& v, const std::string& key) {
  auto scalar = [&](const json& x) -> std::string {
    if (x.is_string()) return x.get<std::string>();
    if (x.is_boolean()) return x.get<bool>() ? "true" : "false";
    if (x.is_number()) return x.dump();
    detail::fail(ErrorKind::shape_mismatch, "config key '" + key + "' must be a scalar or an array of scalars");
  };
  std::vector<std::string> out;
  if (v.is_array())
    for (const auto& x : v) out.push_back(scalar(x));
  else
    out.push_back(scalar(v));
  return out;
}

void apply_config_file(CLI::App& sub, const std::string& path) {
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const json::exception& e) {
    detail::fail(ErrorKind::shape_mismatch, "config " + path + ": " + e.what());
  }
  detail::require(j.is_object(), ErrorKind::shape_mismatch, "config " + path + " must be a JSON object");
  json merged = json::object();
  for (const auto& [k, v] : j.items())
    if (!v.is_object()) merged[k] = v;
  if (j.contains(sub.get_name()) && j[sub.get_name()].is_object())
    for (const auto& [k, v] : j[sub.get_name()].items()) merged[k] = v;

  for (const auto& [key, value] : merged.items()) {
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    detail::require(opt != nullptr && key != "config" && key != "help", ErrorKind::shape_mismatch,
                    "config " + path + ": unknown key '" + key + "' for '" + sub.get_name() + "'");
    if (opt->count() > 0) continue;  // command line wins
    for (const auto& in : json_inputs(value, key)) opt->add_result(in);
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      detail::fail(ErrorKind::shape_mismatch, "config " + path + ": key '" + key + "': " + e.what());
    }
  }
}

// Effective option values after merging flags, config file and defaults.
json effective_options(const CLI::App& sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (opt->get_type_size() == 0)
        j[name] = true;
      else if (r.size() == 1 && opt->get_expected_max() <= 1)
        j[name] = r.front();
      else
        j[name] = r;
    } else if (opt->get_default_str() == "{}") {
      j[name] = json::array();
    } else if (!opt->get_default_str().empty()) {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

// ---------------------------------------------------------------------------
// Provenance

class Provenance {
 public:
  Provenance(const CLI::App& sub, const std::vector<std::string>& argv) {
    doc_ = {{"tool", "gloss"}, {"version", kVersion}, {"command", sub.get_name()}, {"argv", argv},
            {"created", utc_now()}, {"inputs", json::object()}, {"outputs", json::array()}};
  }

  void input(const std::string& role, const fs::path& path) {
    doc_["inputs"][role] = {{"path", path.string()}, {"fnv1a64", content_hash(path)}};
  }
  void output(const fs::path& path) { doc_["outputs"].push_back(path.filename().string()); }
  json& operator[](const std::string& key) { return doc_[key]; }

  void write(const fs::path& dir) const { write_atomic(dir / "provenance.json", doc_.dump(2) + "\n"); }

 private:
  json doc_;
};

struct Output {
  fs::path dir;
  Provenance* prov;

  fs::path file(const std::string& name) const {
    prov->output(name);
    return dir / name;
  }
  void text(const std::string& name, const std::string& contents) const { write_atomic(file(name), contents); }
  void tensor(const std::string& name, const DenseTensor& t, const TensorMetadata& meta = {}) const {
    save_tensor(file(name), t, meta);
  }
  void mask(const std::string& name, const BoolTensor& t, const TensorMetadata& meta = {}) const {
    save_mask(file(name), t, meta);
  }
};

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  detail::require(!ec && fs::is_directory(dir), ErrorKind::io, "cannot create output directory " + dir.string());
}

SupportSet load_support(const std::string& path, const Shape& shape, Provenance& prov) {
  if (path.empty()) return SupportSet::full(shape);
  prov.input("omega", path);
  SupportSet omega(load_mask(path));
  detail::require(omega.shape() == shape, ErrorKind::shape_mismatch,
                  "mask " + path + " has shape " + to_string(omega.shape()) + ", data has " + to_string(shape));
  return omega;
}

std::string to_csv(const auto& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

// ---------------------------------------------------------------------------
// Shared option groups

struct SynthOptions {
  SyntheticSpec spec;
  std::string base;

  void add(CLI::App& sub) {
    sub.add_option("--zones", spec.zones, "zones in the built-in profile")->check(CLI::PositiveNumber);
    sub.add_option("--profile-seed", spec.profile_seed, "seed of the built-in profile");
    sub.add_option("--weeks", spec.weeks, "number of weeks")->check(CLI::PositiveNumber);
    sub.add_option("--c", spec.c, "anomaly amplitude multiplier");
    sub.add_option("--events", spec.n_events, "number of anomalous (day, zone) intervals");
    sub.add_option("--duration", spec.duration, "hours per anomalous interval");
    sub.add_option("--noise-var", spec.noise_var, "variance of the multiplicative noise");
    sub.add_option("--missing", spec.missing_percent, "percent of days removed");
    sub.add_option("--base", base, "custom base profile tensor (hours x days x zones)");
  }

  SyntheticSpec resolve(Provenance& prov) const {
    SyntheticSpec s = spec;
    if (!base.empty()) {
      prov.input("base", base);
      s.base = load_tensor(base);
    }
    s.validate();
    return s;
  }
};

struct PipelineOptions {
  std::string variant = "GLOSS";
  std::string scorer = "EE";
  Index graph_k = 10;
  std::size_t lof_k = 10;
  int max_iters = 200;
  double tol = 1e-6;
  std::vector<std::string> overrides;
  unsigned workers = 1;

  void add(CLI::App& sub) {
    sub.add_option("--variant", variant, "GLOSS, LOSS, WHORPCA or HORPCA");
    sub.add_option("--method", scorer, "EE or LOF");
    sub.add_option("--graph-k", graph_k, "nearest neighbours per mode graph")->check(CLI::PositiveNumber);
    sub.add_option("--lof-k", lof_k, "LOF neighbourhood size")->check(CLI::PositiveNumber);
    sub.add_option("--max-iters", max_iters, "iteration cap")->check(CLI::PositiveNumber);
    sub.add_option("--tol", tol, "stopping tolerance")->check(CLI::PositiveNumber);
    sub.add_option("--set", overrides, "hyperparameter override name=value (repeatable)");
    sub.add_option("--workers", workers, "concurrent trials")->check(CLI::PositiveNumber);
  }

  PipelineSpec resolve(const SyntheticSpec& synth) const {
    PipelineSpec p;
    p.variant = parse_variant(variant);
    p.scorer = parse_score_method(scorer);
    p.synth = synth;
    p.graph_k = graph_k;
    p.lof_k = lof_k;
    p.max_iters = max_iters;
    p.tol = tol;
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      detail::require(eq != std::string::npos, ErrorKind::invalid_argument, "--set expects name=value, got '" + o + "'");
      double v = 0.0;
      try {
        v = std::stod(o.substr(eq + 1));
      } catch (const std::exception&) {
        detail::fail(ErrorKind::invalid_argument, "--set value is not a number: '" + o + "'");
      }
      p.overrides.emplace_back(o.substr(0, eq), v);
    }
    // Reject unknown names before any trial starts.
    SolverConfig probe;
    probe.psi.assign(4, 1.0);
    for (const auto& [name, value] : p.overrides) apply_override(probe, name, value);
    return p;
  }
};

std::vector<std::uint64_t> seed_list(std::uint64_t first, int count) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(first + static_cast<std::uint64_t>(i));
  return seeds;
}

// ---------------------------------------------------------------------------
// Commands

struct IngestCmd {
  std::string trips, zones, epoch = "2018-01-01", ts_col = "timestamp", zone_col = "zone_id";
  std::string ts_format = "%Y-%m-%d %H:%M:%S", bad_rows = "fail";
  Index weeks = 52;

  void add(CLI::App& sub) {
    sub.add_option("--trips", trips, "trip records CSV")->required();
    sub.add_option("--zones", zones, "zone whitelist, one id per line")->required();
    sub.add_option("--epoch", epoch, "first day of week 1 (YYYY-MM-DD)");
    sub.add_option("--weeks", weeks, "number of weeks")->check(CLI::PositiveNumber);
    sub.add_option("--timestamp-column", ts_col, "timestamp column name");
    sub.add_option("--zone-column", zone_col, "zone column name");
    sub.add_option("--timestamp-format", ts_format, "strftime-style timestamp format");
    sub.add_option("--bad-rows", bad_rows, "fail or skip")->check(CLI::IsMember({"fail", "skip"}));
  }

  void run(const Output& out, Provenance& prov) const {
    prov.input("trips", trips);
    prov.input("zones", zones);
    std::ifstream zin(zones);
    detail::require(zin.good(), ErrorKind::io, "cannot open " + zones);
    const ZoneIndex index = ZoneIndex::read(zin);
    IngestOptions opt;
    opt.timestamp_column = ts_col;
    opt.zone_column = zone_col;
    opt.timestamp_format = ts_format;
    opt.calendar = Calendar::from_string(epoch, weeks);
    opt.bad_rows = bad_rows == "skip" ? BadRowPolicy::skip : BadRowPolicy::fail;
    std::ifstream in(trips);
    detail::require(in.good(), ErrorKind::io, "cannot open " + trips);
    const IngestResult r = ingest(in, index, opt);

    TensorMetadata meta;
    meta.units = "trips per hour";
    meta.provenance = {{"epoch", epoch}, {"zones", index.ids()}};
    out.tensor("y.bin", r.counts, meta);
    out.mask("omega.bin", r.omega.mask());
    const DatasetStats st = dataset_stats(r.counts);
    const json report{{"accepted", r.report.accepted},
                      {"out_of_range", r.report.out_of_range},
                      {"unknown_zone", r.report.unknown_zone},
                      {"malformed", r.report.malformed},
                      {"malformed_lines", r.report.malformed_lines},
                      {"stats", {{"mean_row_std", st.mean_row_std}, {"sparsity", st.sparsity}, {"max", st.max}, {"mean", st.mean}}}};
    out.text("ingest_report.json", report.dump(2) + "\n");
    spdlog::info("ingested {} records ({} out of range, {} unknown zone, {} malformed)", r.report.accepted,
                 r.report.out_of_range, r.report.unknown_zone, r.report.malformed);
  }
};

struct SynthCmd {
  SynthOptions synth;

  void add(CLI::App& sub) {
    synth.add(sub);
    sub.add_option("--seed", synth.spec.seed, "instance seed");
  }

  void run(const Output& out, Provenance& prov) const {
    const SyntheticSpec spec = synth.resolve(prov);
    const SyntheticInstance inst = generate(spec);
    prov["seed"] = spec.seed;
    TensorMetadata meta;
    meta.units = "synthetic counts";
    meta.provenance = inst.provenance;
    out.tensor("y.bin", inst.y, meta);
    out.mask("omega.bin", inst.omega.mask());
    out.mask("labels.bin", inst.labels);
    spdlog::info("generated {} with {} anomalous cells", to_string(inst.y.shape()), count_true(inst.labels));
  }
};

// Defaults for data without variance (e.g. all zeros), where the data-driven
// rules are undefined: unit penalties and weights, lambda from the extents.
SolverConfig flat_defaults(const DenseTensor& y, Variant v) {
  SolverConfig c;
  c.variant = v;
  c.psi.assign(y.order(), 1.0);
  const double max_extent = static_cast<double>(*std::max_element(y.shape().begin(), y.shape().end()));
  c.lambda = v == Variant::horpca ? 1.0 / std::sqrt(max_extent) : 1.0 / max_extent;
  c.gamma = (v == Variant::gloss || v == Variant::loss) ? c.lambda : 0.0;
  c.theta = v == Variant::gloss ? 1.0 : 0.0;
  return c;
}

struct DecomposeCmd {
  std::string y_path, omega_path, variant = "GLOSS", progress;
  std::optional<double> lambda, gamma, theta;
  std::vector<double> psi, beta;
  int max_iters = 200;
  double tol = 1e-6;
  Index graph_k = 10;

  void add(CLI::App& sub) {
    sub.add_option("--y", y_path, "data tensor")->required();
    sub.add_option("--omega", omega_path, "observation mask (default: all observed)");
    sub.add_option("--variant", variant, "GLOSS, LOSS, WHORPCA or HORPCA");
    sub.add_option("--lambda", lambda, "sparsity weight (default: data-driven)");
    sub.add_option("--gamma", gamma, "temporal smoothness weight (default: data-driven)");
    sub.add_option("--theta", theta, "graph weight (default: data-driven)");
    sub.add_option("--psi", psi, "nuclear-norm weight per mode (default: data-driven)");
    sub.add_option("--beta", beta, "one or five ADMM penalties (default: data-driven)");
    sub.add_option("--max-iters", max_iters, "iteration cap")->check(CLI::PositiveNumber);
    sub.add_option("--tol", tol, "stopping tolerance")->check(CLI::PositiveNumber);
    sub.add_option("--graph-k", graph_k, "nearest neighbours per mode graph")->check(CLI::PositiveNumber);
    sub.add_option("--progress", progress, "JSON-lines progress file, '-' for stderr");
  }

  void run(const Output& out, Provenance& prov) const {
    prov.input("y", y_path);
    const DenseTensor y = load_tensor(y_path);
    const SupportSet omega = load_support(omega_path, y.shape(), prov);
    const Variant v = parse_variant(variant);

    SolverConfig c;
    try {
      c = default_hyperparameters(y, omega, v);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::numerical || !y.all_finite()) throw;
      spdlog::warn("{}; using unit penalties and weights", e.what());
      c = flat_defaults(y, v);
    }
    if (lambda) c.lambda = *lambda;
    if (gamma) c.gamma = *gamma;
    if (theta) c.theta = *theta;
    if (!psi.empty()) {
      detail::require(static_cast<int>(psi.size()) == y.order(), ErrorKind::invalid_argument,
                      "--psi needs one value per mode (" + std::to_string(y.order()) + ")");
      c.psi = psi;
    }
    if (beta.size() == 1) {
      c.beta.fill(beta[0]);
    } else if (!beta.empty()) {
      detail::require(beta.size() == 5, ErrorKind::invalid_argument, "--beta needs one or five values");
      std::copy(beta.begin(), beta.end(), c.beta.begin());
    }
    c.max_iters = max_iters;
    c.tol = tol;
    c.validate(y.order());

    std::vector<ModeGraph> graphs;
    if (v == Variant::gloss) graphs = build_all_mode_graphs(project(y, omega), graph_k);

    std::ofstream progress_file;
    std::ostream* progress_stream = nullptr;
    if (progress == "-") {
      progress_stream = &std::cerr;
    } else if (!progress.empty()) {
      progress_file.open(progress);
      detail::require(progress_file.good(), ErrorKind::io, "cannot write " + progress);
      progress_stream = &progress_file;
    }
    SolveOptions opts;
    opts.on_iteration = [&](const IterationRecord& r) {
      spdlog::debug("iteration {} feasibility {:.3e} change {:.3e}", r.iteration, r.feasibility, r.low_rank_change);
      if (progress_stream)
        *progress_stream << json{{"iteration", r.iteration},
                                 {"feasibility", r.feasibility},
                                 {"residual", r.max_primal_residual()},
                                 {"low_rank_change", r.low_rank_change},
                                 {"objective", r.objective},
                                 {"wall_ms", r.wall_ms}}
                                .dump()
                         << '\n'
                         << std::flush;
    };
    const DecompositionResult res = solve(y, omega, c, graphs, opts);

    out.tensor("L.bin", res.low_rank);
    out.tensor("S.bin", res.sparse);
    out.text("diagnostics.csv", to_csv([&](std::ostream& os) { write_diagnostics_csv(os, res.history); }));
    out.text("solver_config.json", json(res.config).dump(2) + "\n");
    prov["solver_config"] = res.config;
    prov["converged"] = res.converged;
    prov["iterations"] = res.iterations;
    spdlog::info("{} after {} iterations, feasibility {:.3e}", res.converged ? "converged" : "stopped",
                 res.iterations, res.history.back().feasibility);
  }
};

struct ScoreCmd {
  std::string sparse_path, method = "EE";
  std::size_t lof_k = 10;
  int fiber_mode = 2;
  unsigned threads = 1;

  void add(CLI::App& sub) {
    sub.add_option("--sparse", sparse_path, "sparse tensor S")->required();
    sub.add_option("--method", method, "EE or LOF");
    sub.add_option("--lof-k", lof_k, "LOF neighbourhood size")->check(CLI::PositiveNumber);
    sub.add_option("--fiber-mode", fiber_mode, "mode along which fibers are scored")->check(CLI::NonNegativeNumber);
    sub.add_option("--threads", threads, "scoring threads")->check(CLI::PositiveNumber);
  }

  void run(const Output& out, Provenance& prov) const {
    prov.input("sparse", sparse_path);
    const DenseTensor s = load_tensor(sparse_path);
    const ScoreTensor st = score_tensor(s, parse_score_method(method), lof_k, fiber_mode, threads);
    TensorMetadata meta;
    meta.units = std::string(to_string(st.method)) + " score";
    out.tensor("scores.bin", st.scores, meta);
    spdlog::info("scored {} fibers with {}", s.size() / s.shape()[fiber_mode], to_string(st.method));
  }
};

struct EvalCmd {
  std::string scores_path, labels_path, events_path, zones_path, epoch = "2018-01-01";
  std::vector<double> k_grid{0.1, 0.5, 1, 2, 5, 10};
  int trials = 0;
  std::uint64_t first_seed = 1;
  SynthOptions synth;
  PipelineOptions pipeline;

  void add(CLI::App& sub) {
    sub.add_option("--scores", scores_path, "score tensor");
    sub.add_option("--labels", labels_path, "ground-truth label mask");
    sub.add_option("--event-file", events_path, "events CSV for top-K event detection");
    sub.add_option("--zone-list", zones_path, "zone whitelist matching the score tensor (with --events)");
    sub.add_option("--epoch", epoch, "calendar epoch of the score tensor (with --events)");
    sub.add_option("--k-grid", k_grid, "top-K percentages for event detection");
    sub.add_option("--trials", trials, "run N synthetic trials instead of scoring files")->check(CLI::NonNegativeNumber);
    sub.add_option("--seed", first_seed, "seed of the first trial");
    synth.add(sub);
    pipeline.add(sub);
  }

  void run(const Output& out, Provenance& prov) const {
    if (trials > 0) return run_trials_mode(out, prov);
    detail::require(!scores_path.empty(), ErrorKind::invalid_argument, "eval needs --scores or --trials");
    detail::require(!labels_path.empty() || !events_path.empty(), ErrorKind::invalid_argument,
                    "eval needs --labels and/or --event-file with --scores");
    prov.input("scores", scores_path);
    const DenseTensor scores = load_tensor(scores_path);
    json metrics = json::object();
    if (!labels_path.empty()) {
      prov.input("labels", labels_path);
      const BoolTensor labels = load_mask(labels_path);
      const RocResult roc = roc_auc(scores, labels);
      out.text("roc.csv", to_csv([&](std::ostream& os) { write_roc_csv(os, roc); }));
      metrics["auc"] = roc.auc;
      std::printf("%.6f\n", roc.auc);
    }
    if (!events_path.empty()) {
      detail::require(!zones_path.empty(), ErrorKind::invalid_argument, "--event-file needs --zone-list");
      prov.input("events", events_path);
      prov.input("zones", zones_path);
      std::ifstream ein(events_path), zin(zones_path);
      detail::require(ein.good() && zin.good(), ErrorKind::io, "cannot open events or zones file");
      const EventList events = read_events(ein);
      const ZoneIndex zones = ZoneIndex::read(zin);
      detail::require(scores.order() == 4, ErrorKind::shape_mismatch, "event detection needs an order-4 score tensor");
      const Calendar cal = Calendar::from_string(epoch, scores.shape()[2]);
      const auto rows = event_detection(scores, events, k_grid, cal, zones);
      std::ostringstream os;
      os << "k_percent,detected,total";
      for (const auto& e : events) os << ",\"" << e.name << '"';
      os << '\n';
      for (const auto& r : rows) {
        os << r.k_percent << ',' << r.detected << ',' << events.size();
        for (bool h : r.hits) os << ',' << (h ? 1 : 0);
        os << '\n';
      }
      out.text("event_detection.csv", os.str());
      metrics["events"] = events.size();
    }
    out.text("metrics.json", metrics.dump(2) + "\n");
  }

  void run_trials_mode(const Output& out, Provenance& prov) const {
    const PipelineSpec spec = pipeline.resolve(synth.resolve(prov));
    const auto seeds = seed_list(first_seed, trials);
    prov["pipeline"] = spec;
    prov["seeds"] = seeds;
    const TrialSummary s = run_trials(spec, seeds, pipeline.workers);
    out.text("trials.csv", to_csv([&](std::ostream& os) { write_trials_csv(os, spec, s); }));
    out.text("metrics.json", json{{"mean_auc", s.mean_auc}, {"std_auc", s.std_auc}, {"trials", s.trials.size()}}.dump(2) + "\n");
    std::printf("%.6f %.6f\n", s.mean_auc, s.std_auc);
  }
};

struct SweepCmd {
  std::string row_name = "lambda", col_name = "gamma";
  std::vector<double> row_values{1e-5, 1e-4, 1e-3, 1e-2, 1e-1}, col_values{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  int trials = 1;
  std::uint64_t first_seed = 1;
  SynthOptions synth;
  PipelineOptions pipeline;

  void add(CLI::App& sub) {
    sub.add_option("--row-param", row_name, "hyperparameter on the grid rows");
    sub.add_option("--row-values", row_values, "row values");
    sub.add_option("--col-param", col_name, "hyperparameter on the grid columns");
    sub.add_option("--col-values", col_values, "column values");
    sub.add_option("--trials", trials, "seeds per grid point")->check(CLI::PositiveNumber);
    sub.add_option("--seed", first_seed, "seed of the first trial");
    synth.add(sub);
    pipeline.add(sub);
  }

  void run(const Output& out, Provenance& prov) const {
    PipelineSpec spec = pipeline.resolve(synth.resolve(prov));
    SolverConfig probe;
    probe.psi.assign(4, 1.0);
    apply_override(probe, row_name, 1.0);
    apply_override(probe, col_name, 1.0);
    const auto seeds = seed_list(first_seed, trials);
    prov["pipeline"] = spec;
    prov["seeds"] = seeds;
    const SweepResult r = sweep({row_name, row_values}, {col_name, col_values}, spec, seeds, pipeline.workers);
    out.text("sweep.csv", to_csv([&](std::ostream& os) { write_sweep_csv(os, r); }));
  }
};

template <class Cmd>
CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, Cmd& cmd, std::string& out_dir,
                      std::string& config) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->option_defaults()->always_capture_default();
  cmd.add(*sub);
  sub->add_option("--out", out_dir, "output directory")->envname("GLOSS_OUT_DIR");
  sub->add_option("--config", config, "JSON config file; flags override its values");
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank plus smooth sparse tensor decomposition for spatiotemporal anomaly detection"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  std::string out_dir, config;
  IngestCmd ingest_cmd;
  SynthCmd synth_cmd;
  DecomposeCmd decompose_cmd;
  ScoreCmd score_cmd;
  EvalCmd eval_cmd;
  SweepCmd sweep_cmd;
  std::vector<std::pair<CLI::App*, std::function<void(const Output&, Provenance&)>>> commands{
      {add_command(app, "ingest", "aggregate trip records into a count tensor", ingest_cmd, out_dir, config),
       [&](const Output& o, Provenance& p) { ingest_cmd.run(o, p); }},
      {add_command(app, "synth", "generate a synthetic benchmark instance", synth_cmd, out_dir, config),
       [&](const Output& o, Provenance& p) { synth_cmd.run(o, p); }},
      {add_command(app, "decompose", "split a tensor into low-rank and sparse parts", decompose_cmd, out_dir, config),
       [&](const Output& o, Provenance& p) { decompose_cmd.run(o, p); }},
      {add_command(app, "score", "score the sparse part", score_cmd, out_dir, config),
       [&](const Output& o, Provenance& p) { score_cmd.run(o, p); }},
      {add_command(app, "eval", "AUC, event detection or synthetic trials", eval_cmd, out_dir, config),
       [&](const Output& o, Provenance& p) { eval_cmd.run(o, p); }},
      {add_command(app, "sweep", "two-parameter AUC grid on synthetic data", sweep_cmd, out_dir, config),
       [&](const Output& o, Provenance& p) { sweep_cmd.run(o, p); }},
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadArguments;
  }

  auto logger = spdlog::stderr_color_mt("gloss");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::from_str(log_level));

  const std::vector<std::string> args(argv, argv + argc);
  for (auto& [sub, run] : commands) {
    if (!sub->parsed()) continue;
    try {
      if (!config.empty()) apply_config_file(*sub, config);
      detail::require(!out_dir.empty(), ErrorKind::invalid_argument, "--out (or GLOSS_OUT_DIR) is required");
      Provenance prov(*sub, args);
      prov["options"] = effective_options(*sub);
      if (!config.empty()) prov.input("config", config);
      prepare_dir(out_dir);
      run(Output{out_dir, &prov}, prov);
      prov.write(out_dir);
      return kOk;
    } catch (const Error& e) {
      spdlog::error("{}", e.what());
      return exit_code(e.kind());
    } catch (const json::exception& e) {
      spdlog::error("schema: {}", e.what());
      return kSchemaViolation;
    } catch (const fs::filesystem_error& e) {
      spdlog::error("{}", e.what());
      return kUnreadableInput;
    } catch (const std::exception& e) {
      spdlog::error("{}", e.what());
      return kOther;
    }
  }
  return kOther;
}
