#pragma once

// Truncated SVD with the cumulative-sum retention rule, and the left-to-right
// global SVD of a TT whose last mode indexes data samples.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ktt/errors.hpp"
#include "ktt/tt_tensor.hpp"

namespace ktt {

struct TruncatedSvd {
  Eigen::MatrixXd U;      // m x r, orthonormal columns
  Eigen::VectorXd sigma;  // r values, non-increasing, strictly positive
  Eigen::MatrixXd V;      // n x r, orthonormal columns
  std::size_t rank = 0;
};

/// Left factor, singular values and right factor of a tensor with a trailing data mode.
struct TTGlobalSVD {
  TTTensor<double> U;  // left-orthonormal, open trailing rank r
  Eigen::VectorXd sigma;
  Eigen::MatrixXd V;  // N x r

  std::size_t rank() const { return static_cast<std::size_t>(sigma.size()); }
};

/// Count of singular values above eps_machine * sigma_1 * max(m, n).
inline std::size_t numerical_rank(const Eigen::VectorXd& sigma, Eigen::Index rows,
                                  Eigen::Index cols) {
  if (sigma.size() == 0 || !(sigma(0) > 0.0)) return 0;
  const double cutoff = std::numeric_limits<double>::epsilon() * sigma(0) *
                        static_cast<double>(std::max(rows, cols));
  std::size_t r = 0;
  while (r < static_cast<std::size_t>(sigma.size()) && sigma(static_cast<Eigen::Index>(r)) > cutoff) ++r;
  return r;
}

/// Smallest r with (sigma_1 + ... + sigma_r) / (sigma_1 + ... + sigma_all) >= eps.
/// `sigma` must be non-increasing and non-negative.
inline std::size_t retained_rank(const Eigen::VectorXd& sigma, double eps) {
  const auto n = static_cast<std::size_t>(sigma.size());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += sigma(static_cast<Eigen::Index>(i));
  if (!(total > 0.0)) return 0;
  // Same summation order as `total`, so the full prefix reaches exactly 1.
  double partial = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    partial += sigma(static_cast<Eigen::Index>(j));
    if (partial / total >= eps) return j + 1;
  }
  return n;
}

namespace detail {

inline void check_eps(double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) {
    throw ValidationError("truncation parameter must lie in (0, 1], got " + std::to_string(eps));
  }
}

// Thin SVD. Strongly wide inputs go through a QR of the transpose first, which
// keeps the bidiagonalization at the size of the short side.
inline void thin_svd(const Eigen::Ref<const Eigen::MatrixXd>& m, Eigen::MatrixXd& u,
                     Eigen::VectorXd& s, Eigen::MatrixXd& v) {
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  if (cols > 2 * rows) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m.transpose());
    const Eigen::MatrixXd r =
        qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(r.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU();
    s = svd.singularValues();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(cols, rows);
    w.topRows(rows) = svd.matrixV();
    v = qr.householderQ() * w;
    return;
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  u = svd.matrixU();
  s = svd.singularValues();
  v = svd.matrixV();
}

}  // namespace detail

/// Leading singular triplets selected by the cumulative-sum rule. Numerically
/// zero singular values are always dropped, whatever eps is.
inline TruncatedSvd truncated_svd(const Eigen::Ref<const Eigen::MatrixXd>& m, double eps) {
  detail::check_eps(eps);
  if (m.size() == 0) throw DegenerateInputError("truncated_svd: empty matrix");
  if (!m.allFinite()) throw DegenerateInputError("truncated_svd: non-finite entries");
  Eigen::MatrixXd u, v;
  Eigen::VectorXd s;
  detail::thin_svd(m, u, s, v);
  const std::size_t nonzero = numerical_rank(s, m.rows(), m.cols());
  if (nonzero == 0) throw DegenerateInputError("truncated_svd: matrix is numerically zero");
  const std::size_t r = retained_rank(s.head(static_cast<Eigen::Index>(nonzero)), eps);
  const auto ri = static_cast<Eigen::Index>(r);
  return TruncatedSvd{u.leftCols(ri), s.head(ri), v.leftCols(ri), r};
}

/// Global SVD of a closed TT with d + 1 cores whose last mode has size N.
/// Sweeps cores 1..d-1 (SVD of the unfolding, fold sigma * V^T into the next core);
/// the last physical core is merged with the data core so the final SVD yields
/// sigma and an N x r right factor with orthonormal columns.
inline TTGlobalSVD global_svd(const TTTensor<double>& t, double eps) {
  detail::check_eps(eps);
  if (t.order() < 2) throw ShapeError("global_svd needs at least one physical mode and a data mode");
  if (!t.closed()) throw ShapeError("global_svd expects a closed TT");
  const std::size_t d = t.order() - 1;
  std::vector<Core<double>> out;
  out.reserve(d);

  // carry: r x r_k factor to multiply into the next core from the left.
  Eigen::MatrixXd carry = Eigen::MatrixXd::Identity(1, 1);
  for (std::size_t k = 0; k + 1 < d; ++k) {
    const auto& c = t.core(k);
    const std::size_t left = static_cast<std::size_t>(carry.rows());
    Eigen::MatrixXd unf(static_cast<Eigen::Index>(left * c.modes()),
                        static_cast<Eigen::Index>(c.right()));
    for (std::size_t i = 0; i < c.modes(); ++i) {
      for (std::size_t a = 0; a < left; ++a) {
        unf.row(static_cast<Eigen::Index>(a * c.modes() + i)) =
            carry.row(static_cast<Eigen::Index>(a)) * c.slice(i);
      }
    }
    TruncatedSvd svd = truncated_svd(unf, eps);
    out.push_back(Core<double>::from_unfolding(svd.U, left, c.modes()));
    carry = svd.sigma.asDiagonal() * svd.V.transpose();
  }

  const auto& last = t.core(d - 1);
  const auto& data = t.core(d);
  const std::size_t left = static_cast<std::size_t>(carry.rows());
  if (data.right() != 1) throw ShapeError("global_svd: data core must close the chain");
  const Eigen::MatrixXd data_mat = Eigen::Map<const RowMatrix<double>>(
      data.data().data(), static_cast<Eigen::Index>(data.left()),
      static_cast<Eigen::Index>(data.modes()));
  Eigen::MatrixXd merged(static_cast<Eigen::Index>(left * last.modes()), data_mat.cols());
  for (std::size_t i = 0; i < last.modes(); ++i) {
    const Eigen::MatrixXd s = carry * last.slice(i);
    for (std::size_t a = 0; a < left; ++a) {
      merged.row(static_cast<Eigen::Index>(a * last.modes() + i)) =
          s.row(static_cast<Eigen::Index>(a)) * data_mat;
    }
  }
  TruncatedSvd svd = truncated_svd(merged, eps);
  out.push_back(Core<double>::from_unfolding(svd.U, left, last.modes()));
  return TTGlobalSVD{TTTensor<double>(std::move(out)), std::move(svd.sigma), std::move(svd.V)};
}

}  // namespace ktt
