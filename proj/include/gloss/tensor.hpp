#pragma once

// Dense N-mode tensors and the mode-n algebra used by the solver.
//
// Storage is a single contiguous buffer with the first mode varying fastest:
//   offset(i_0, ..., i_{N-1}) = i_0 + I_0 * (i_1 + I_1 * (i_2 + ...)).
// The mode-n unfolding places index i_n on the rows; the column index is built
// from the remaining indices in increasing mode order, lowest mode fastest.
// Modes are zero-based throughout the library.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "gloss/error.hpp"

namespace gloss {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

namespace detail {

inline void check_shape(const Shape& shape) {
  require(!shape.empty(), ErrorKind::invalid_argument, "tensor must have at least one mode");
  for (Index e : shape)
    require(e >= 1, ErrorKind::invalid_argument, "tensor extents must be >= 1, got " + to_string(shape));
}

inline void check_mode(const Shape& shape, int mode) {
  require(mode >= 0 && mode < static_cast<int>(shape.size()), ErrorKind::invalid_argument,
          "mode index " + std::to_string(mode) + " out of range for order-" +
              std::to_string(shape.size()) + " tensor");
}

// Extents before and after `mode`: the tensor is viewed as (before x I_mode x after).
inline std::pair<Index, Index> split_extents(const Shape& shape, int mode) {
  Index before = 1, after = 1;
  for (int k = 0; k < mode; ++k) before *= shape[k];
  for (std::size_t k = mode + 1; k < shape.size(); ++k) after *= shape[k];
  return {before, after};
}

}  // namespace detail

// Elementwise-shaped container shared by real and boolean tensors.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    detail::check_shape(shape_);
    data_.assign(static_cast<std::size_t>(shape_size(shape_)), fill);
  }

  BasicTensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    detail::check_shape(shape_);
    detail::require(static_cast<Index>(data_.size()) == shape_size(shape_), ErrorKind::shape_mismatch,
                    "value count " + std::to_string(data_.size()) + " does not match shape " +
                        to_string(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  int order() const noexcept { return static_cast<int>(shape_.size()); }
  Index size() const noexcept { return static_cast<Index>(data_.size()); }
  Index extent(int mode) const {
    detail::check_mode(shape_, mode);
    return shape_[mode];
  }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  T& operator[](Index offset) { return data_[static_cast<std::size_t>(offset)]; }
  const T& operator[](Index offset) const { return data_[static_cast<std::size_t>(offset)]; }

  Index offset(std::span<const Index> index) const {
    detail::require(index.size() == shape_.size(), ErrorKind::invalid_argument, "index arity mismatch");
    Index off = 0;
    for (int k = order() - 1; k >= 0; --k) {
      detail::require(index[k] >= 0 && index[k] < shape_[k], ErrorKind::invalid_argument,
                      "index out of range in mode " + std::to_string(k));
      off = off * shape_[k] + index[k];
    }
    return off;
  }

  std::vector<Index> index_of(Index offset) const {
    std::vector<Index> idx(shape_.size());
    for (std::size_t k = 0; k < shape_.size(); ++k) {
      idx[k] = offset % shape_[k];
      offset /= shape_[k];
    }
    return idx;
  }

  template <class... I>
    requires(std::is_integral_v<I> && ...)
  T& operator()(I... i) {
    const std::array<Index, sizeof...(I)> idx{static_cast<Index>(i)...};
    return data_[static_cast<std::size_t>(offset(idx))];
  }

  template <class... I>
    requires(std::is_integral_v<I> && ...)
  const T& operator()(I... i) const {
    const std::array<Index, sizeof...(I)> idx{static_cast<Index>(i)...};
    return data_[static_cast<std::size_t>(offset(idx))];
  }

  bool operator==(const BasicTensor&) const = default;

 protected:
  Shape shape_;
  std::vector<T> data_;
};

class DenseTensor : public BasicTensor<double> {
 public:
  using BasicTensor::BasicTensor;

  DenseTensor(Shape shape, std::initializer_list<double> values)
      : BasicTensor(std::move(shape), std::vector<double>(values)) {}

  static DenseTensor zeros_like(const DenseTensor& t) { return DenseTensor(t.shape()); }

  Eigen::Map<Vector> vec() { return {data_.data(), size()}; }
  Eigen::Map<const Vector> vec() const { return {data_.data(), size()}; }
  auto array() { return vec().array(); }
  auto array() const { return vec().array(); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  DenseTensor& operator+=(const DenseTensor& o) {
    check_same(o);
    vec() += o.vec();
    return *this;
  }
  DenseTensor& operator-=(const DenseTensor& o) {
    check_same(o);
    vec() -= o.vec();
    return *this;
  }
  DenseTensor& operator*=(double a) {
    vec() *= a;
    return *this;
  }

  friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
  friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
  friend DenseTensor operator*(double s, DenseTensor a) { return a *= s; }
  friend DenseTensor operator*(DenseTensor a, double s) { return a *= s; }

 private:
  void check_same(const DenseTensor& o) const {
    detail::require(shape_ == o.shape(), ErrorKind::shape_mismatch,
                    "shape mismatch " + to_string(shape_) + " vs " + to_string(o.shape()));
  }
};

using BoolTensor = BasicTensor<std::uint8_t>;

inline Index count_true(const BoolTensor& t) {
  return std::count_if(t.values().begin(), t.values().end(), [](std::uint8_t v) { return v != 0; });
}

// Observed-entry mask Omega.
class SupportSet {
 public:
  SupportSet() = default;
  explicit SupportSet(BoolTensor mask) : mask_(std::move(mask)) {}

  static SupportSet full(const Shape& shape) { return SupportSet(BoolTensor(shape, 1)); }
  static SupportSet none(const Shape& shape) { return SupportSet(BoolTensor(shape, 0)); }

  const BoolTensor& mask() const noexcept { return mask_; }
  BoolTensor& mask() noexcept { return mask_; }
  const Shape& shape() const noexcept { return mask_.shape(); }
  bool contains(Index offset) const { return mask_[offset] != 0; }
  Index count() const { return count_true(mask_); }
  bool is_full() const { return count() == mask_.size(); }

  SupportSet complement() const {
    BoolTensor c(mask_.shape());
    for (Index i = 0; i < mask_.size(); ++i) c[i] = mask_[i] ? 0 : 1;
    return SupportSet(std::move(c));
  }

  // 1.0 on observed entries, 0.0 elsewhere.
  Vector indicator() const {
    Vector v(mask_.size());
    for (Index i = 0; i < mask_.size(); ++i) v[i] = mask_[i] ? 1.0 : 0.0;
    return v;
  }

  bool operator==(const SupportSet&) const = default;

 private:
  BoolTensor mask_;
};

// ---------------------------------------------------------------------------
// Mode-n algebra

inline Matrix unfold(const DenseTensor& t, int mode) {
  detail::check_mode(t.shape(), mode);
  const Index rows = t.shape()[mode];
  const auto [before, after] = detail::split_extents(t.shape(), mode);
  Matrix m(rows, before * after);
  if (before == 1) {
    m = Eigen::Map<const Matrix>(t.data(), rows, after);
    return m;
  }
  for (Index a = 0; a < after; ++a) {
    Eigen::Map<const Matrix> slab(t.data() + a * before * rows, before, rows);
    m.middleCols(a * before, before) = slab.transpose();
  }
  return m;
}

inline DenseTensor fold(const Matrix& m, int mode, const Shape& shape) {
  detail::check_shape(shape);
  detail::check_mode(shape, mode);
  const auto [before, after] = detail::split_extents(shape, mode);
  detail::require(m.rows() == shape[mode] && m.cols() == before * after, ErrorKind::shape_mismatch,
                  "cannot fold a " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                      " matrix along mode " + std::to_string(mode) + " into shape " + to_string(shape));
  DenseTensor t(shape);
  const Index rows = shape[mode];
  if (before == 1) {
    Eigen::Map<Matrix>(t.data(), rows, after) = m;
    return t;
  }
  for (Index a = 0; a < after; ++a) {
    Eigen::Map<Matrix> slab(t.data() + a * before * rows, before, rows);
    slab = m.middleCols(a * before, before).transpose();
  }
  return t;
}

// Computes t x_mode u, i.e. the tensor whose mode-n unfolding is u * unfold(t, mode).
inline DenseTensor mode_n_product(const DenseTensor& t, const Matrix& u, int mode) {
  detail::check_mode(t.shape(), mode);
  const Index in = t.shape()[mode];
  detail::require(u.cols() == in, ErrorKind::shape_mismatch,
                  "mode-" + std::to_string(mode) + " product needs " + std::to_string(in) +
                      " matrix columns, got " + std::to_string(u.cols()));
  Shape out_shape = t.shape();
  out_shape[mode] = u.rows();
  DenseTensor out(out_shape);
  const auto [before, after] = detail::split_extents(t.shape(), mode);
  const Index out_in = u.rows();
  if (before == 1) {
    Eigen::Map<Matrix>(out.data(), out_in, after).noalias() =
        u * Eigen::Map<const Matrix>(t.data(), in, after);
    return out;
  }
  for (Index a = 0; a < after; ++a) {
    Eigen::Map<const Matrix> src(t.data() + a * before * in, before, in);
    Eigen::Map<Matrix> dst(out.data() + a * before * out_in, before, out_in);
    dst.noalias() = src * u.transpose();
  }
  return out;
}

// Vertical stack of the mode-n unfoldings of equally shaped tensors.
inline Matrix cat_n(std::span<const DenseTensor> tensors, int mode) {
  detail::require(!tensors.empty(), ErrorKind::invalid_argument, "cat_n needs at least one tensor");
  const Shape& shape = tensors.front().shape();
  for (const auto& t : tensors)
    detail::require(t.shape() == shape, ErrorKind::shape_mismatch,
                    "cat_n inputs must share one shape: " + to_string(shape) + " vs " + to_string(t.shape()));
  detail::check_mode(shape, mode);
  const Index rows = shape[mode];
  Matrix out(rows * static_cast<Index>(tensors.size()), shape_size(shape) / rows);
  for (std::size_t i = 0; i < tensors.size(); ++i) out.middleRows(static_cast<Index>(i) * rows, rows) = unfold(tensors[i], mode);
  return out;
}

inline double frobenius_norm(const DenseTensor& t) { return t.vec().norm(); }
inline double l1_norm(const DenseTensor& t) { return t.vec().lpNorm<1>(); }

inline DenseTensor project(const DenseTensor& t, const SupportSet& s) {
  detail::require(t.shape() == s.shape(), ErrorKind::shape_mismatch,
                  "support shape " + to_string(s.shape()) + " does not match tensor " + to_string(t.shape()));
  DenseTensor out(t.shape());
  for (Index i = 0; i < t.size(); ++i) out[i] = s.contains(i) ? t[i] : 0.0;
  return out;
}

inline DenseTensor project_complement(const DenseTensor& t, const SupportSet& s) {
  detail::require(t.shape() == s.shape(), ErrorKind::shape_mismatch,
                  "support shape " + to_string(s.shape()) + " does not match tensor " + to_string(t.shape()));
  DenseTensor out(t.shape());
  for (Index i = 0; i < t.size(); ++i) out[i] = s.contains(i) ? 0.0 : t[i];
  return out;
}

}  // namespace gloss
