#pragma once

// Univariate anomaly scores on the week fibers of the sparse tensor.
//
// Each fiber s[i_hour, i_day, :, i_zone] is scored independently, which is
// the same as fitting a one-dimensional model per (hour, day, zone).

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "gloss/error.hpp"
#include "gloss/tensor.hpp"

namespace gloss {

enum class ScoreMethod { elliptic_envelope, lof };

inline std::string_view to_string(ScoreMethod m) {
  return m == ScoreMethod::elliptic_envelope ? "EE" : "LOF";
}

inline ScoreMethod parse_score_method(std::string_view s) {
  if (s == "EE" || s == "ee") return ScoreMethod::elliptic_envelope;
  if (s == "LOF" || s == "lof") return ScoreMethod::lof;
  detail::fail(ErrorKind::invalid_argument, "unknown scoring method '" + std::string(s) + "'");
}

struct ScoreTensor {
  DenseTensor scores;
  ScoreMethod method = ScoreMethod::elliptic_envelope;
};

inline constexpr double kMinRobustScale = 1e-12;

struct RobustFit {
  double location = 0.0;
  double scale = 0.0;
};

// Exact univariate MCD with h = floor(n/2) + 1: the contiguous window of the
// sorted sample with the smallest range. Location and scale are the mean and
// standard deviation of that window.
inline RobustFit shortest_half(std::span<const double> x) {
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const std::size_t h = n / 2 + 1;
  std::size_t best = 0;
  double best_range = v[h - 1] - v[0];
  for (std::size_t i = 1; i + h <= n; ++i) {
    const double range = v[i + h - 1] - v[i];
    if (range < best_range) {
      best_range = range;
      best = i;
    }
  }
  double mean = 0.0;
  for (std::size_t i = best; i < best + h; ++i) mean += v[i];
  mean /= static_cast<double>(h);
  double var = 0.0;
  for (std::size_t i = best; i < best + h; ++i) var += (v[i] - mean) * (v[i] - mean);
  return {mean, std::sqrt(var / static_cast<double>(h))};
}

inline std::vector<double> ee_fiber_scores(std::span<const double> fiber) {
  detail::require(fiber.size() >= 4, ErrorKind::invalid_argument,
                  "elliptic envelope needs at least 4 samples, got " + std::to_string(fiber.size()));
  const RobustFit fit = shortest_half(fiber);
  const double scale = std::max(fit.scale, kMinRobustScale);
  std::vector<double> out(fiber.size());
  for (std::size_t i = 0; i < fiber.size(); ++i) {
    const double z = (fiber[i] - fit.location) / scale;
    out[i] = z * z;
  }
  return out;
}

// Local outlier factor of 1-D points with |a - b| distance. The k-distance
// neighbourhood includes every point tied with the k-th neighbour.
inline std::vector<double> lof_fiber_scores(std::span<const double> fiber, std::size_t k = 10) {
  const std::size_t n = fiber.size();
  detail::require(k >= 1 && k < n, ErrorKind::invalid_argument,
                  "LOF needs 1 <= k < fiber length, got k=" + std::to_string(k) + " for " + std::to_string(n) +
                      " samples");
  std::vector<double> kdist(n);
  std::vector<std::vector<std::size_t>> nbrs(n);
  std::vector<std::size_t> order;
  for (std::size_t p = 0; p < n; ++p) {
    order.clear();
    for (std::size_t o = 0; o < n; ++o)
      if (o != p) order.push_back(o);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(fiber[a] - fiber[p]) < std::abs(fiber[b] - fiber[p]);
    });
    kdist[p] = std::abs(fiber[order[k - 1]] - fiber[p]);
    std::size_t m = k;
    while (m < order.size() && std::abs(fiber[order[m]] - fiber[p]) <= kdist[p]) ++m;
    nbrs[p].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
  }
  // The 1e-10 offset keeps densities finite for duplicated points; identical
  // neighbourhoods then give a ratio of exactly 1.
  std::vector<double> lrd(n);
  for (std::size_t p = 0; p < n; ++p) {
    double reach = 0.0;
    for (std::size_t o : nbrs[p]) reach += std::max(kdist[o], std::abs(fiber[p] - fiber[o]));
    lrd[p] = 1.0 / (reach / static_cast<double>(nbrs[p].size()) + 1e-10);
  }
  std::vector<double> out(n);
  for (std::size_t p = 0; p < n; ++p) {
    double ratio = 0.0;
    for (std::size_t o : nbrs[p]) ratio += lrd[o] / lrd[p];
    out[p] = ratio / static_cast<double>(nbrs[p].size());
  }
  return out;
}

// Scores every fiber along `fiber_mode` (the week mode by default).
// `threads` > 1 splits the fibers across workers; the output does not depend on it.
inline ScoreTensor score_tensor(const DenseTensor& s, ScoreMethod method, std::size_t lof_k = 10,
                                int fiber_mode = 2, unsigned threads = 1) {
  detail::check_mode(s.shape(), fiber_mode);
  const auto [before, after] = detail::split_extents(s.shape(), fiber_mode);
  const Index len = s.shape()[fiber_mode];
  const Index fibers = before * after;
  ScoreTensor out{DenseTensor(s.shape()), method};

  auto work = [&](Index first, Index last) {
    std::vector<double> fiber(static_cast<std::size_t>(len));
    for (Index f = first; f < last; ++f) {
      const Index b = f % before, a = f / before;
      const Index base = b + a * before * len;
      for (Index i = 0; i < len; ++i) fiber[i] = s[base + i * before];
      std::vector<double> sc;
      try {
        sc = method == ScoreMethod::elliptic_envelope ? ee_fiber_scores(fiber) : lof_fiber_scores(fiber, lof_k);
      } catch (const Error& e) {
        auto idx = s.index_of(base);
        std::string where;
        for (std::size_t k = 0; k < idx.size(); ++k)
          where += (k ? "," : "") + (static_cast<int>(k) == fiber_mode ? std::string(":") : std::to_string(idx[k]));
        throw Error(e.kind(), "fiber (" + where + "): " + e.what());
      }
      for (Index i = 0; i < len; ++i) out.scores[base + i * before] = sc[i];
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<Index>(fibers, 1))));
  if (threads == 1) {
    work(0, fibers);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    const Index chunk = (fibers + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          work(std::min<Index>(fibers, t * chunk), std::min<Index>(fibers, (t + 1) * chunk));
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// Marks exactly ceil(k_percent/100 * size) entries, highest scores first;
// equal scores are taken in lexicographic index order (first index most significant).
inline BoolTensor top_k_labels(const DenseTensor& scores, double k_percent) {
  detail::require(k_percent > 0.0 && k_percent <= 100.0, ErrorKind::invalid_argument,
                  "top-K percent must be in (0, 100], got " + std::to_string(k_percent));
  const Index total = scores.size();
  const double exact = k_percent * static_cast<double>(total) / 100.0;
  Index count = static_cast<Index>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  count = std::clamp<Index>(count, 0, total);

  // Row-major rank of each offset for the lexicographic tie-break.
  const auto& shape = scores.shape();
  std::vector<Index> lex(static_cast<std::size_t>(total));
  for (Index off = 0; off < total; ++off) {
    Index rem = off, key = 0;
    std::vector<Index> idx(shape.size());
    for (std::size_t k = 0; k < shape.size(); ++k) {
      idx[k] = rem % shape[k];
      rem /= shape[k];
    }
    for (std::size_t k = 0; k < shape.size(); ++k) key = key * shape[k] + idx[k];
    lex[off] = key;
  }
  std::vector<Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Index{0});
  auto before = [&](Index a, Index b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return lex[a] < lex[b];
  };
  std::partial_sort(order.begin(), order.begin() + count, order.end(), before);
  BoolTensor labels(shape, 0);
  for (Index i = 0; i < count; ++i) labels[order[i]] = 1;
  return labels;
}

inline BoolTensor top_k_labels(const ScoreTensor& st, double k_percent) { return top_k_labels(st.scores, k_percent); }

}  // namespace gloss
