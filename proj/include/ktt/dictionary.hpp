#pragma once

// Tensor-product monomial dictionaries and the streaming global SVD of the
// transformed data tensor Psi(X).
//
// Each state coordinate x_k gets the basis [1, x_k, x_k^2, ..., x_k^n]. The full
// dictionary is psi_1(x_1) (x) psi_2(x_2) (x) ... (x) psi_d(x_d) in Kronecker order,
// so x_1's exponent is the most significant digit of the flat index.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ktt/errors.hpp"
#include "ktt/svd.hpp"
#include "ktt/tt_tensor.hpp"

namespace ktt {

class MonomialDictionary {
 public:
  MonomialDictionary() = default;

  MonomialDictionary(std::size_t dim, std::size_t degree) : dim_(dim), degree_(degree) {
    if (dim == 0) throw ValidationError("dictionary dimension must be positive");
    size_ = 1;
    for (std::size_t k = 0; k < dim; ++k) size_ = detail::checked_product(size_, degree + 1);
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t degree() const noexcept { return degree_; }
  std::size_t modes() const noexcept { return degree_ + 1; }
  /// (n + 1)^d, saturating at SIZE_MAX.
  std::size_t size() const noexcept { return size_; }

  Eigen::VectorXd eval_1d(double x) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(modes()));
    double p = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i, p *= x) v(i) = p;
    return v;
  }

  /// Rank-one TT of psi(x).
  TTTensor<double> eval_full(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    check_state(x);
    std::vector<Eigen::VectorXd> factors;
    factors.reserve(dim_);
    for (std::size_t k = 0; k < dim_; ++k) factors.push_back(eval_1d(x(static_cast<Eigen::Index>(k))));
    return rank_one_tt<double>(factors);
  }

  /// Kronecker vector psi(x) of length (n + 1)^d.
  Eigen::VectorXd eval_full_dense(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  std::size_t cap = kDefaultDenseCap) const {
    check_state(x);
    if (size_ > cap) {
      throw SizeError("dense dictionary of size " + std::to_string(size_) + " exceeds cap " +
                      std::to_string(cap));
    }
    Eigen::VectorXd acc = Eigen::VectorXd::Ones(1);
    for (std::size_t k = 0; k < dim_; ++k) {
      const Eigen::VectorXd f = eval_1d(x(static_cast<Eigen::Index>(k)));
      Eigen::VectorXd next(acc.size() * f.size());
      for (Eigen::Index a = 0; a < acc.size(); ++a) next.segment(a * f.size(), f.size()) = acc(a) * f;
      acc = std::move(next);
    }
    return acc;
  }

  std::size_t flat_index(std::span<const std::size_t> exponents) const {
    if (exponents.size() != dim_) throw BoundsError("exponent list length does not match dimension");
    std::size_t flat = 0;
    for (std::size_t e : exponents) {
      if (e > degree_) throw BoundsError("exponent exceeds dictionary degree");
      flat = flat * modes() + e;
    }
    return flat;
  }

  std::vector<std::size_t> exponents(std::size_t flat) const {
    if (flat >= size_) throw BoundsError("dictionary index out of range");
    std::vector<std::size_t> e(dim_);
    for (std::size_t k = dim_; k-- > 0;) {
      e[k] = flat % modes();
      flat /= modes();
    }
    return e;
  }

  /// Exponent multi-index of the full-state observable g_k(x) = x_k (k zero-based).
  std::vector<std::size_t> full_state_exponents(std::size_t k) const {
    if (k >= dim_) throw BoundsError("state component out of range");
    if (degree_ < 1) throw ValidationError("dictionary of degree 0 lacks the full-state observable");
    std::vector<std::size_t> e(dim_, 0);
    e[k] = 1;
    return e;
  }

  std::size_t full_state_index(std::size_t k) const { return flat_index(full_state_exponents(k)); }

  static std::string label(std::span<const std::size_t> exponents) {
    std::string s;
    for (std::size_t k = 0; k < exponents.size(); ++k) {
      if (exponents[k] == 0) continue;
      if (!s.empty()) s += '*';
      s += 'x' + std::to_string(k + 1);
      if (exponents[k] > 1) s += '^' + std::to_string(exponents[k]);
    }
    return s.empty() ? "1" : s;
  }

  std::string label(std::size_t flat) const {
    const auto e = exponents(flat);
    return label(e);
  }

  /// All exponent multi-indices with total degree <= max_total, in ascending flat order.
  std::vector<std::vector<std::size_t>> monomials_up_to(std::size_t max_total) const {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> e(dim_, 0);
    enumerate(0, max_total, e, out);
    return out;
  }

 private:
  void check_state(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (static_cast<std::size_t>(x.size()) != dim_) {
      throw ShapeError("state has " + std::to_string(x.size()) + " components, dictionary expects " +
                       std::to_string(dim_));
    }
  }

  void enumerate(std::size_t k, std::size_t budget, std::vector<std::size_t>& e,
                 std::vector<std::vector<std::size_t>>& out) const {
    if (k == dim_) {
      out.push_back(e);
      return;
    }
    for (std::size_t p = 0; p <= degree_ && p <= budget; ++p) {
      e[k] = p;
      enumerate(k + 1, budget - p, e, out);
    }
    e[k] = 0;
  }

  std::size_t dim_ = 0;
  std::size_t degree_ = 0;
  std::size_t size_ = 0;
};

/// Paired snapshots: column m of Y is the state one sampling interval after column m of X.
struct SnapshotSet {
  Eigen::MatrixXd X;  // d x N
  Eigen::MatrixXd Y;  // d x N
  double ts = 0.0;

  std::size_t pairs() const noexcept { return static_cast<std::size_t>(X.cols()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(X.rows()); }

  void validate() const {
    if (X.rows() != Y.rows() || X.cols() != Y.cols()) throw ShapeError("X and Y shapes differ");
    if (X.cols() == 0) throw ValidationError("snapshot set is empty");
    if (!(ts > 0.0)) throw ValidationError("sampling interval must be positive");
  }
};

/// Column-wise concatenation; pairs never span two sets.
inline SnapshotSet concatenate(const std::vector<SnapshotSet>& sets) {
  if (sets.empty()) throw ValidationError("nothing to concatenate");
  Eigen::Index total = 0;
  for (const auto& s : sets) {
    s.validate();
    if (s.X.rows() != sets.front().X.rows()) throw ShapeError("snapshot dimensions differ");
    if (s.ts != sets.front().ts) throw ValidationError("sampling intervals differ");
    total += s.X.cols();
  }
  SnapshotSet out{Eigen::MatrixXd(sets.front().X.rows(), total),
                  Eigen::MatrixXd(sets.front().X.rows(), total), sets.front().ts};
  Eigen::Index col = 0;
  for (const auto& s : sets) {
    out.X.middleCols(col, s.X.cols()) = s.X;
    out.Y.middleCols(col, s.Y.cols()) = s.Y;
    col += s.X.cols();
  }
  return out;
}

/// Stacked dense dictionary evaluations, one column per snapshot.
inline Eigen::MatrixXd psi_matrix(const MonomialDictionary& dict, const Eigen::MatrixXd& X,
                                  std::size_t cap = kDefaultDenseCap) {
  if (static_cast<std::size_t>(X.rows()) != dict.dim()) throw ShapeError("snapshot dimension mismatch");
  if (detail::checked_product(dict.size(), static_cast<std::size_t>(X.cols())) > cap) {
    throw SizeError("dense Psi(X) exceeds cap");
  }
  Eigen::MatrixXd psi(static_cast<Eigen::Index>(dict.size()), X.cols());
  for (Eigen::Index m = 0; m < X.cols(); ++m) psi.col(m) = dict.eval_full_dense(X.col(m), cap);
  return psi;
}

/// Explicit TT of Psi(X) with diagonal cores over the snapshot index:
/// core 1 is (1, n+1, N), cores 2..d are (N, n+1, N) diagonal, and the data core is
/// the (N, N, 1) identity. Quadratic in N, so only meant for small inputs.
inline TTTensor<double> data_tensor_tt(const MonomialDictionary& dict, const Eigen::MatrixXd& X,
                                       std::size_t cap = kDefaultDenseCap) {
  if (static_cast<std::size_t>(X.rows()) != dict.dim()) throw ShapeError("snapshot dimension mismatch");
  const auto n_samples = static_cast<std::size_t>(X.cols());
  if (n_samples == 0) throw ValidationError("no snapshots");
  if (detail::checked_product(n_samples * n_samples, dict.modes()) > cap) {
    throw SizeError("explicit data tensor exceeds cap");
  }
  const std::size_t n = dict.modes();
  std::vector<Core<double>> cores;
  for (std::size_t k = 0; k < dict.dim(); ++k) {
    const bool first = k == 0;
    Core<double> c(first ? 1 : n_samples, n, n_samples);
    for (std::size_t m = 0; m < n_samples; ++m) {
      const Eigen::VectorXd f = dict.eval_1d(X(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)));
      for (std::size_t i = 0; i < n; ++i) c(first ? 0 : m, i, m) = f(static_cast<Eigen::Index>(i));
    }
    cores.push_back(std::move(c));
  }
  Core<double> data(n_samples, n_samples, 1);
  for (std::size_t m = 0; m < n_samples; ++m) data(m, m, 0) = 1.0;
  cores.push_back(std::move(data));
  return TTTensor<double>(std::move(cores));
}

/// Global SVD of Psi(X) by a streaming sweep that never forms the data tensor.
///
/// R starts as the 1 x N all-ones row. At step k the (r (n+1)) x N matrix with
/// column m equal to R[:, m] (x) psi_k(x_{k,m}) is decomposed; its U becomes core k
/// and R becomes diag(sigma) V^T. The last step supplies sigma and V.
inline TTGlobalSVD data_tensor_svd(const MonomialDictionary& dict, const Eigen::MatrixXd& X,
                                   double eps) {
  if (static_cast<std::size_t>(X.rows()) != dict.dim()) throw ShapeError("snapshot dimension mismatch");
  if (X.cols() == 0) throw ValidationError("no snapshots");
  if (!X.allFinite()) throw DegenerateInputError("snapshots contain non-finite values");
  const Eigen::Index n = static_cast<Eigen::Index>(dict.modes());
  const Eigen::Index samples = X.cols();

  Eigen::MatrixXd R = Eigen::MatrixXd::Ones(1, samples);
  Eigen::MatrixXd powers(n, samples);
  std::vector<Core<double>> cores;
  cores.reserve(dict.dim());
  TruncatedSvd svd;
  for (std::size_t k = 0; k < dict.dim(); ++k) {
    powers.row(0).setOnes();
    for (Eigen::Index i = 1; i < n; ++i)
      powers.row(i) = powers.row(i - 1).cwiseProduct(X.row(static_cast<Eigen::Index>(k)));
    const Eigen::Index r = R.rows();
    Eigen::MatrixXd B(r * n, samples);
    for (Eigen::Index a = 0; a < r; ++a)
      for (Eigen::Index i = 0; i < n; ++i) B.row(a * n + i) = R.row(a).cwiseProduct(powers.row(i));
    svd = truncated_svd(B, eps);
    cores.push_back(Core<double>::from_unfolding(svd.U, static_cast<std::size_t>(r),
                                                 static_cast<std::size_t>(n)));
    if (k + 1 < dict.dim()) R = svd.sigma.asDiagonal() * svd.V.transpose();
  }
  return TTGlobalSVD{TTTensor<double>(std::move(cores)), std::move(svd.sigma), std::move(svd.V)};
}

}  // namespace ktt
