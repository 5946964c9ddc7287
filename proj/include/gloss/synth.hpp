#pragma once

// Synthetic spatiotemporal benchmark: a weekly base profile replicated over
// the weeks, multiplicative Gaussian week-to-week variation, injected
// interval anomalies and randomly missing days.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "gloss/error.hpp"
#include "gloss/tensor.hpp"

namespace gloss {

struct SyntheticSpec {
  std::optional<DenseTensor> base;  // hours x days x zones; built in when absent
  Index zones = 81;                 // used by the built-in profile
  std::uint64_t profile_seed = 2018;
  Index weeks = 52;
  double c = 2.5;                   // anomaly amplitude multiplier
  Index n_events = 700;             // anomalous (day, zone) intervals
  Index duration = 7;               // hours per interval
  double noise_var = 0.5;
  double missing_percent = 0.0;     // percent of hour fibers (days) removed
  std::uint64_t seed = 0;

  Index hours() const { return base ? base->shape()[0] : 24; }
  Index days() const { return base ? base->shape()[1] : 7; }
  Index zone_count() const { return base ? base->shape()[2] : zones; }

  void validate() const {
    using detail::require;
    const auto bad = ErrorKind::invalid_argument;
    if (base) {
      require(base->order() == 3, bad, "base profile must be hours x days x zones");
      require(base->all_finite(), ErrorKind::numerical, "base profile has non-finite entries");
    } else {
      require(zones >= 1, bad, "zone count must be >= 1");
    }
    require(weeks >= 1, bad, "weeks must be >= 1");
    require(c >= 0.0, bad, "anomaly amplitude c must be nonnegative");
    require(noise_var >= 0.0, bad, "noise variance must be nonnegative");
    require(missing_percent >= 0.0 && missing_percent < 100.0, bad, "missing percent must be in [0, 100)");
    require(duration >= 1 && duration <= hours(), bad,
            "event duration must be in [1, " + std::to_string(hours()) + "]");
    require(n_events >= 0, bad, "event count must be nonnegative");
    require(n_events <= days() * weeks * zone_count(), bad,
            "requested " + std::to_string(n_events) + " events but only " +
                std::to_string(days() * weeks * zone_count()) + " (day, zone) pairs exist");
  }
};

inline void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = nlohmann::json{{"base", s.base ? "custom" : "builtin"},
                     {"zones", s.zone_count()},
                     {"profile_seed", s.profile_seed},
                     {"weeks", s.weeks},
                     {"c", s.c},
                     {"n_events", s.n_events},
                     {"duration", s.duration},
                     {"noise_var", s.noise_var},
                     {"missing_percent", s.missing_percent},
                     {"seed", s.seed}};
}

// Reads the scalar fields; a custom base tensor must be attached separately.
inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  s.zones = j.value("zones", s.zones);
  s.profile_seed = j.value("profile_seed", s.profile_seed);
  s.weeks = j.value("weeks", s.weeks);
  s.c = j.value("c", s.c);
  s.n_events = j.value("n_events", s.n_events);
  s.duration = j.value("duration", s.duration);
  s.noise_var = j.value("noise_var", s.noise_var);
  s.missing_percent = j.value("missing_percent", s.missing_percent);
  s.seed = j.value("seed", s.seed);
}

struct SyntheticInstance {
  DenseTensor y;       // hours x days x weeks x zones
  BoolTensor labels;   // injected anomaly cells
  SupportSet omega;    // false on removed days
  nlohmann::json provenance;
};

// Smooth positive weekly profiles with a morning and an evening commuter peak
// on weekdays and a broad midday hump on weekends. Each zone mixes the shapes
// with its own weights and has a log-uniform amplitude in [5, 200].
inline DenseTensor builtin_base_profile(Index zones, std::uint64_t seed = 2018, Index hours = 24, Index days = 7) {
  detail::require(zones >= 1, ErrorKind::invalid_argument, "zone count must be >= 1");
  detail::require(hours >= 2 && days >= 1, ErrorKind::invalid_argument, "profile needs >= 2 hours and >= 1 day");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto bump = [](double h, double centre, double width) {
    const double d = (h - centre) / width;
    return std::exp(-0.5 * d * d);
  };
  DenseTensor base({hours, days, zones});
  const double scale = 24.0 / static_cast<double>(hours);
  for (Index z = 0; z < zones; ++z) {
    const double amplitude = std::exp(std::log(5.0) + unit(rng) * (std::log(200.0) - std::log(5.0)));
    const double morning = 0.3 + unit(rng);
    const double evening = 0.3 + unit(rng);
    const double leisure = 0.2 + 0.8 * unit(rng);
    const double floor = 0.05 + 0.1 * unit(rng);
    const double shift = unit(rng) - 0.5;
    for (Index d = 0; d < days; ++d) {
      const bool weekend = (d % 7) >= 5;
      for (Index h = 0; h < hours; ++h) {
        const double hh = static_cast<double>(h) * scale;
        double v = floor + 0.25 * bump(hh, 14.0, 5.0);
        if (weekend)
          v += leisure * bump(hh, 14.0 + shift, 3.5) + 0.3 * evening * bump(hh, 21.0, 2.0);
        else
          v += morning * bump(hh, 8.5 + shift, 1.5) + evening * bump(hh, 18.0 + shift, 2.0) +
               0.2 * leisure * bump(hh, 12.5, 1.5);
        base(h, d, z) = amplitude * v;
      }
    }
  }
  return base;
}

namespace detail {

// First `count` entries of a seeded Fisher-Yates shuffle of [0, n).
inline std::vector<Index> sample_without_replacement(Index n, Index count, std::mt19937_64& rng) {
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace detail

// Values are clipped at zero after injection since the data model is counts.
inline SyntheticInstance generate(const SyntheticSpec& spec) {
  spec.validate();
  const DenseTensor base = spec.base ? *spec.base : builtin_base_profile(spec.zones, spec.profile_seed);
  const Index H = base.shape()[0], D = base.shape()[1], Zn = base.shape()[2], W = spec.weeks;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(1.0, std::sqrt(spec.noise_var));

  SyntheticInstance inst;
  inst.y = DenseTensor({H, D, W, Zn});
  for (Index z = 0; z < Zn; ++z)
    for (Index w = 0; w < W; ++w)
      for (Index d = 0; d < D; ++d)
        for (Index h = 0; h < H; ++h) inst.y(h, d, w, z) = base(h, d, z) * noise(rng);

  inst.labels = BoolTensor(inst.y.shape(), 0);
  const Index day_slots = D * W * Zn;  // one hour fiber per (day, week, zone)
  const auto events = detail::sample_without_replacement(day_slots, spec.n_events, rng);
  std::uniform_int_distribution<Index> start_hour(0, H - spec.duration);
  std::bernoulli_distribution positive(0.5);
  for (Index slot : events) {
    const Index d = slot % D, w = (slot / D) % W, z = slot / (D * W);
    const Index start = start_hour(rng);
    const double sign = positive(rng) ? 1.0 : -1.0;
    double mean = 0.0;
    for (Index h = start; h < start + spec.duration; ++h) mean += base(h, d, z);
    mean /= static_cast<double>(spec.duration);
    for (Index h = start; h < start + spec.duration; ++h) {
      inst.y(h, d, w, z) += sign * spec.c * mean;
      inst.labels(h, d, w, z) = 1;
    }
  }
  for (double& v : inst.y.values()) v = std::max(v, 0.0);

  inst.omega = SupportSet::full(inst.y.shape());
  const auto n_missing = static_cast<Index>(std::llround(spec.missing_percent / 100.0 * static_cast<double>(day_slots)));
  for (Index slot : detail::sample_without_replacement(day_slots, n_missing, rng)) {
    const Index d = slot % D, w = (slot / D) % W, z = slot / (D * W);
    for (Index h = 0; h < H; ++h) {
      inst.y(h, d, w, z) = 0.0;
      inst.omega.mask()(h, d, w, z) = 0;
    }
  }

  inst.provenance = nlohmann::json{{"generator", "gloss-synth"}, {"spec", spec}, {"rng", "mt19937_64"},
                                   {"anomalous_points", count_true(inst.labels)},
                                   {"missing_fibers", n_missing}};
  return inst;
}

}  // namespace gloss
