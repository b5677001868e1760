#pragma once

// Tensor-train containers and the basic TT algebra used throughout the library.
//
// A TTTensor is a chain of order-3 cores. Core k has shape (r_{k-1}, n_k, r_k)
// and is stored row-major, so the flat offset of (a, i, b) is (a * n_k + i) * r_k + b.
// Closed tensors have r_0 = r_d = 1. Factor tensors (the left factor of a global
// SVD, for instance) may carry an open boundary rank; an open boundary behaves
// like an extra leading or trailing mode in element access and densification.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ktt/errors.hpp"

namespace ktt {

using cplx = std::complex<double>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr std::size_t kDefaultDenseCap = 10'000'000;

enum class ScalarField : std::uint8_t { real = 0, complex = 1 };

template <typename Scalar>
struct scalar_traits;

template <>
struct scalar_traits<double> {
  static constexpr ScalarField field = ScalarField::real;
};

template <>
struct scalar_traits<cplx> {
  static constexpr ScalarField field = ScalarField::complex;
};

namespace detail {

// Saturating product, used to test dense sizes against caps without overflow.
inline std::size_t checked_product(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
    return std::numeric_limits<std::size_t>::max();
  }
  return a * b;
}

}  // namespace detail

template <typename Scalar>
class Core {
 public:
  using SliceMap = Eigen::Map<const RowMatrix<Scalar>, 0, Eigen::OuterStride<>>;
  using UnfoldingMap = Eigen::Map<const RowMatrix<Scalar>>;

  Core() = default;

  Core(std::size_t left, std::size_t modes, std::size_t right)
      : left_(left), modes_(modes), right_(right), data_(left * modes * right, Scalar(0)) {}

  Core(std::size_t left, std::size_t modes, std::size_t right, std::vector<Scalar> data)
      : left_(left), modes_(modes), right_(right), data_(std::move(data)) {
    if (data_.size() != left * modes * right) {
      throw ShapeError("core data length " + std::to_string(data_.size()) +
                       " does not match shape (" + std::to_string(left) + "," +
                       std::to_string(modes) + "," + std::to_string(right) + ")");
    }
  }

  /// Builds a core from its (left * modes) x right unfolding.
  template <typename Derived>
  static Core from_unfolding(const Eigen::MatrixBase<Derived>& m, std::size_t left,
                             std::size_t modes) {
    if (static_cast<std::size_t>(m.rows()) != left * modes) {
      throw ShapeError("unfolding has " + std::to_string(m.rows()) + " rows, expected " +
                       std::to_string(left * modes));
    }
    Core c(left, modes, static_cast<std::size_t>(m.cols()));
    Eigen::Map<RowMatrix<Scalar>>(c.data_.data(), m.rows(), m.cols()) = m.template cast<Scalar>();
    return c;
  }

  std::size_t left() const noexcept { return left_; }
  std::size_t modes() const noexcept { return modes_; }
  std::size_t right() const noexcept { return right_; }
  std::size_t size() const noexcept { return data_.size(); }

  Scalar& operator()(std::size_t a, std::size_t i, std::size_t b) {
    return data_[(a * modes_ + i) * right_ + b];
  }
  const Scalar& operator()(std::size_t a, std::size_t i, std::size_t b) const {
    return data_[(a * modes_ + i) * right_ + b];
  }

  /// The (left * modes) x right matrix view of the core.
  UnfoldingMap unfolding() const {
    return UnfoldingMap(data_.data(), static_cast<Eigen::Index>(left_ * modes_),
                        static_cast<Eigen::Index>(right_));
  }

  /// The left x right matrix at physical index i.
  SliceMap slice(std::size_t i) const {
    return SliceMap(data_.data() + i * right_, static_cast<Eigen::Index>(left_),
                    static_cast<Eigen::Index>(right_),
                    Eigen::OuterStride<>(static_cast<Eigen::Index>(modes_ * right_)));
  }

  std::span<const Scalar> data() const noexcept { return data_; }

  template <typename To>
  Core<To> cast() const {
    std::vector<To> out(data_.begin(), data_.end());
    return Core<To>(left_, modes_, right_, std::move(out));
  }

  /// Same core with the two rank indices swapped: shape (right, modes, left).
  Core transposed() const {
    Core t(right_, modes_, left_);
    for (std::size_t a = 0; a < left_; ++a)
      for (std::size_t i = 0; i < modes_; ++i)
        for (std::size_t b = 0; b < right_; ++b) t(b, i, a) = (*this)(a, i, b);
    return t;
  }

 private:
  std::size_t left_ = 0;
  std::size_t modes_ = 0;
  std::size_t right_ = 0;
  std::vector<Scalar> data_;
};

template <typename Scalar>
class TTTensor {
 public:
  using scalar_type = Scalar;

  TTTensor() = default;

  explicit TTTensor(std::vector<Core<Scalar>> cores) : cores_(std::move(cores)) {
    if (cores_.empty()) throw ShapeError("a TT tensor needs at least one core");
    for (std::size_t k = 0; k < cores_.size(); ++k) {
      const auto& c = cores_[k];
      if (c.left() == 0 || c.modes() == 0 || c.right() == 0) {
        throw ShapeError("core " + std::to_string(k) + " has a zero dimension");
      }
      if (k + 1 < cores_.size() && c.right() != cores_[k + 1].left()) {
        throw ShapeError("rank mismatch between cores " + std::to_string(k) + " and " +
                         std::to_string(k + 1) + ": " + std::to_string(c.right()) + " vs " +
                         std::to_string(cores_[k + 1].left()));
      }
    }
  }

  std::size_t order() const noexcept { return cores_.size(); }
  const Core<Scalar>& core(std::size_t k) const { return cores_.at(k); }
  const std::vector<Core<Scalar>>& cores() const noexcept { return cores_; }

  std::size_t mode_size(std::size_t k) const { return cores_.at(k).modes(); }

  std::vector<std::size_t> mode_sizes() const {
    std::vector<std::size_t> n;
    n.reserve(cores_.size());
    for (const auto& c : cores_) n.push_back(c.modes());
    return n;
  }

  /// r_0, ..., r_d.
  std::vector<std::size_t> ranks() const {
    std::vector<std::size_t> r;
    if (cores_.empty()) return r;
    r.reserve(cores_.size() + 1);
    r.push_back(cores_.front().left());
    for (const auto& c : cores_) r.push_back(c.right());
    return r;
  }

  std::size_t left_rank() const { return cores_.front().left(); }
  std::size_t right_rank() const { return cores_.back().right(); }
  bool closed() const { return left_rank() == 1 && right_rank() == 1; }

  /// Total number of stored scalars over all cores.
  std::size_t element_count() const noexcept {
    std::size_t n = 0;
    for (const auto& c : cores_) n += c.size();
    return n;
  }

  /// Number of entries of the densified tensor, open boundaries included (saturating).
  std::size_t dense_size() const {
    std::size_t n = detail::checked_product(left_rank(), right_rank());
    for (const auto& c : cores_) n = detail::checked_product(n, c.modes());
    return n;
  }

  template <typename To>
  TTTensor<To> cast() const {
    std::vector<Core<To>> out;
    out.reserve(cores_.size());
    for (const auto& c : cores_) out.push_back(c.template cast<To>());
    return TTTensor<To>(std::move(out));
  }

 private:
  std::vector<Core<Scalar>> cores_;
};

/// Row-major dense array; the first index is the most significant.
template <typename Scalar>
struct DenseArray {
  std::vector<std::size_t> shape;
  std::vector<Scalar> values;

  std::size_t offset(std::span<const std::size_t> idx) const {
    if (idx.size() != shape.size()) throw BoundsError("index length does not match array order");
    std::size_t off = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) {
      if (idx[k] >= shape[k]) throw BoundsError("dense index out of range");
      off = off * shape[k] + idx[k];
    }
    return off;
  }

  const Scalar& operator()(std::span<const std::size_t> idx) const { return values[offset(idx)]; }
};

/// Number of indices tt_entry expects: d, plus one per open boundary.
template <typename Scalar>
std::size_t entry_arity(const TTTensor<Scalar>& t) {
  return t.order() + (t.left_rank() > 1 ? 1 : 0) + (t.right_rank() > 1 ? 1 : 0);
}

/// Element evaluation by chained slice products.
template <typename Scalar>
Scalar tt_entry(const TTTensor<Scalar>& t, std::span<const std::size_t> idx) {
  if (idx.size() != entry_arity(t)) {
    throw BoundsError("expected " + std::to_string(entry_arity(t)) + " indices, got " +
                      std::to_string(idx.size()));
  }
  std::size_t pos = 0;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(
      static_cast<Eigen::Index>(t.left_rank()));
  if (t.left_rank() > 1) {
    if (idx[0] >= t.left_rank()) throw BoundsError("boundary index out of range");
    row(static_cast<Eigen::Index>(idx[pos++])) = Scalar(1);
  } else {
    row(0) = Scalar(1);
  }
  for (std::size_t k = 0; k < t.order(); ++k, ++pos) {
    const auto& c = t.core(k);
    if (idx[pos] >= c.modes()) {
      throw BoundsError("index " + std::to_string(idx[pos]) + " out of range for mode " +
                        std::to_string(k) + " of size " + std::to_string(c.modes()));
    }
    row = (row * c.slice(idx[pos])).eval();
  }
  if (t.right_rank() > 1) {
    if (idx[pos] >= t.right_rank()) throw BoundsError("boundary index out of range");
    return row(static_cast<Eigen::Index>(idx[pos]));
  }
  return row(0);
}

template <typename Scalar>
Scalar tt_entry(const TTTensor<Scalar>& t, std::initializer_list<std::size_t> idx) {
  return tt_entry(t, std::span<const std::size_t>(idx.begin(), idx.size()));
}

/// Dense (r_0 * n_1 * ... * n_d) x r_d matrix; rows follow the Kronecker ordering.
template <typename Scalar>
Matrix<Scalar> tt_to_matrix(const TTTensor<Scalar>& t, std::size_t cap = kDefaultDenseCap) {
  if (t.dense_size() > cap) {
    throw SizeError("dense reconstruction needs " + std::to_string(t.dense_size()) +
                    " entries, cap is " + std::to_string(cap));
  }
  // Rows of `acc` enumerate the prefix multi-index, columns the current rank.
  RowMatrix<Scalar> acc = RowMatrix<Scalar>::Identity(static_cast<Eigen::Index>(t.left_rank()),
                                                       static_cast<Eigen::Index>(t.left_rank()));
  for (const auto& c : t.cores()) {
    const auto rows = acc.rows();
    const auto n = static_cast<Eigen::Index>(c.modes());
    RowMatrix<Scalar> next(rows * n, static_cast<Eigen::Index>(c.right()));
    for (Eigen::Index p = 0; p < rows; ++p) {
      for (Eigen::Index i = 0; i < n; ++i) {
        next.row(p * n + i).noalias() = acc.row(p) * c.slice(static_cast<std::size_t>(i));
      }
    }
    acc = std::move(next);
  }
  return acc;
}

template <typename Scalar>
DenseArray<Scalar> tt_to_dense(const TTTensor<Scalar>& t, std::size_t cap = kDefaultDenseCap) {
  const RowMatrix<Scalar> m = tt_to_matrix(t, cap);
  DenseArray<Scalar> out;
  if (t.left_rank() > 1) out.shape.push_back(t.left_rank());
  for (std::size_t n : t.mode_sizes()) out.shape.push_back(n);
  if (t.right_rank() > 1) out.shape.push_back(t.right_rank());
  out.values.assign(m.data(), m.data() + m.size());
  return out;
}

/// Multiplies the trailing rank index of t by m. Other cores are copied unchanged.
template <typename Scalar, typename Derived>
auto contract_last_rank(const TTTensor<Scalar>& t, const Eigen::MatrixBase<Derived>& m) {
  using MScalar = typename Derived::Scalar;
  using Out = decltype(std::declval<Scalar>() * std::declval<MScalar>());
  if (static_cast<std::size_t>(m.rows()) != t.right_rank()) {
    throw ShapeError("trailing rank " + std::to_string(t.right_rank()) +
                     " does not match matrix with " + std::to_string(m.rows()) + " rows");
  }
  std::vector<Core<Out>> cores;
  cores.reserve(t.order());
  for (std::size_t k = 0; k + 1 < t.order(); ++k) cores.push_back(t.core(k).template cast<Out>());
  const auto& last = t.core(t.order() - 1);
  Matrix<Out> folded = last.unfolding().template cast<Out>() * m.template cast<Out>();
  cores.push_back(Core<Out>::from_unfolding(folded, last.left(), last.modes()));
  return TTTensor<Out>(std::move(cores));
}

/// Full contraction of two TTs over all physical modes, core by core from the left:
/// returns the r_d(a) x r_d(b) matrix  sum_i a(i)^T b(i). No conjugation is applied.
template <typename Scalar>
Matrix<Scalar> contract_physical(const TTTensor<Scalar>& a, const TTTensor<Scalar>& b) {
  if (a.order() != b.order() || a.mode_sizes() != b.mode_sizes()) {
    throw ShapeError("contract_physical: mode sizes differ");
  }
  if (a.left_rank() != 1 || b.left_rank() != 1) {
    throw ShapeError("contract_physical: leading ranks must be 1");
  }
  Matrix<Scalar> w = Matrix<Scalar>::Ones(1, 1);
  for (std::size_t k = 0; k < a.order(); ++k) {
    const auto& ca = a.core(k);
    const auto& cb = b.core(k);
    Matrix<Scalar> next = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(ca.right()),
                                               static_cast<Eigen::Index>(cb.right()));
    for (std::size_t i = 0; i < ca.modes(); ++i) {
      Matrix<Scalar> wb = w * cb.slice(i);
      next.noalias() += ca.slice(i).transpose() * wb;
    }
    w = std::move(next);
  }
  return w;
}

/// Rank-one TT whose core k holds vs[k].
template <typename Scalar>
TTTensor<Scalar> rank_one_tt(const std::vector<Vector<Scalar>>& vs) {
  std::vector<Core<Scalar>> cores;
  cores.reserve(vs.size());
  for (const auto& v : vs) {
    std::vector<Scalar> data(v.data(), v.data() + v.size());
    cores.emplace_back(1, static_cast<std::size_t>(v.size()), 1, std::move(data));
  }
  return TTTensor<Scalar>(std::move(cores));
}

}  // namespace ktt
