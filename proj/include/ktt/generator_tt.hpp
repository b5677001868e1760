#pragma once

// Koopman generator in TT format via the logarithm of Koopman eigenvalues.
//
// With the eigentensor Xi = U_X Sigma_X A and its pseudo-inverse
// Xi^+ = A^+ Sigma_X^{-1} U_X^T, the generator is L = Xi diag(mu) Xi^+ with
// mu_i = log(lambda_i) / ts. The operator is stored as an order-2d chain:
//
//   U_1 .. U_{d-1} | U_d Sigma_X A | diag(mu) A^+ Sigma_X^{-1} U_d^T | U_{d-1}^T .. U_1^T
//
// Row modes come first (i_1 .. i_d), then the column modes in mirrored chain
// order (j_d .. j_1), giving the rank profile (r_1 .. r_{d-1}, r, r_{d-1} .. r_1).
// Only the two middle cores are complex; the U cores stay real.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ktt/amuset.hpp"
#include "ktt/dense_pipeline.hpp"
#include "ktt/dictionary.hpp"
#include "ktt/errors.hpp"
#include "ktt/tt_tensor.hpp"

namespace ktt {

inline constexpr double kPinvCondition = 1e12;

/// mu_i = (ln|lambda_i| + i Arg lambda_i) / ts with Arg in (-pi, pi].
inline Eigen::VectorXcd generator_eigenvalues(const Eigen::VectorXcd& lambdas, double ts,
                                              std::vector<std::string>* warnings = nullptr) {
  if (!(ts > 0.0)) throw ValidationError("sampling interval must be positive");
  Eigen::VectorXcd mu(lambdas.size());
  std::vector<std::string> local;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) mu(i) = log_eigenvalue(lambdas(i), ts, &local);
  if (warnings && !local.empty()) {
    warnings->push_back(std::to_string(local.size()) +
                        " Koopman eigenvalue(s) near the negative real axis; |Im mu| is close to pi/ts");
  }
  return mu;
}

/// Pseudo-inverse of the eigentensor, stored as the r x r factor acting on U_X^T.
struct XiPseudoInverse {
  Eigen::MatrixXcd tail;  // A^+ Sigma_X^{-1}
  std::size_t rank = 0;   // numerical rank of A
  double condition = 0.0;
  bool rank_deficient() const noexcept { return rank < static_cast<std::size_t>(tail.rows()); }
};

/// Xi^+ = { U_X Sigma_X^{-1} (A^+)^T }^T, reusing the left-orthonormal U_X cores.
inline XiPseudoInverse xi_pseudo_inverse(const Eigen::MatrixXcd& A, const Eigen::VectorXd& sigma_x) {
  if (A.rows() != A.cols() || A.rows() != sigma_x.size()) throw ShapeError("xi_pseudo_inverse: shape mismatch");
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > 0.0)) throw DegenerateInputError("eigenvector matrix is zero");
  std::size_t rank = 0;
  while (rank < static_cast<std::size_t>(s.size()) &&
         s(static_cast<Eigen::Index>(rank)) * kPinvCondition > s(0)) {
    ++rank;
  }
  const auto ri = static_cast<Eigen::Index>(rank);
  const Eigen::MatrixXcd a_pinv = svd.matrixV().leftCols(ri) *
                                  s.head(ri).cwiseInverse().cast<cplx>().asDiagonal() *
                                  svd.matrixU().leftCols(ri).adjoint();
  XiPseudoInverse out;
  out.tail = a_pinv * sigma_x.cwiseInverse().cast<cplx>().asDiagonal();
  out.rank = rank;
  out.condition = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
  return out;
}

inline XiPseudoInverse xi_pseudo_inverse(const EigenSolution& sol) {
  return xi_pseudo_inverse(sol.A, sol.svd_x.sigma);
}

/// Order-2d TT operator; see the file comment for the layout.
class TTOperator {
 public:
  TTOperator() = default;

  TTOperator(std::vector<Core<double>> row_cores, Core<cplx> row_tail, Core<cplx> col_tail,
             std::vector<Core<double>> col_cores)
      : row_cores_(std::move(row_cores)),
        row_tail_(std::move(row_tail)),
        col_tail_(std::move(col_tail)),
        col_cores_(std::move(col_cores)) {
    if (row_cores_.size() != col_cores_.size()) throw ShapeError("row and column halves differ in order");
    // The chain constructors check rank adjacency on both halves.
    (void)row_half();
    (void)col_half();
    if (row_tail_.right() != col_tail_.left()) throw ShapeError("connecting rank mismatch");
  }

  std::size_t dim() const noexcept { return row_cores_.size() + 1; }
  std::size_t connecting_rank() const noexcept { return row_tail_.right(); }

  /// Chain ranks r_0 .. r_{2d}.
  std::vector<std::size_t> ranks() const {
    std::vector<std::size_t> r{1};
    for (const auto& c : row_cores_) r.push_back(c.right());
    r.push_back(row_tail_.right());
    r.push_back(col_tail_.right());
    for (const auto& c : col_cores_) r.push_back(c.right());
    return r;
  }

  std::size_t element_count() const noexcept {
    std::size_t n = row_tail_.size() + col_tail_.size();
    for (const auto& c : row_cores_) n += c.size();
    for (const auto& c : col_cores_) n += c.size();
    return n;
  }

  /// L[i, j] for row and column exponent multi-indices by chained slice products.
  cplx entry(std::span<const std::size_t> row, std::span<const std::size_t> col) const {
    const std::size_t d = dim();
    if (row.size() != d || col.size() != d) throw BoundsError("operator index length mismatch");
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
    for (std::size_t k = 0; k + 1 < d; ++k) v = (v * checked_slice(row_cores_[k], row[k])).eval();
    Eigen::Matrix<cplx, 1, Eigen::Dynamic> w = v.cast<cplx>() * checked_slice(row_tail_, row[d - 1]);
    w = (w * checked_slice(col_tail_, col[d - 1])).eval();
    for (std::size_t m = 0; m + 1 < d; ++m) {
      // col_cores_[m] carries column mode j_{d-1-m}.
      w = (w * checked_slice(col_cores_[m], col[d - 2 - m]).cast<cplx>()).eval();
    }
    return w(0);
  }

  /// Row half as a TT over (i_1 .. i_d) with open trailing rank r.
  TTTensor<cplx> row_half() const {
    std::vector<Core<cplx>> cores;
    for (const auto& c : row_cores_) cores.push_back(c.cast<cplx>());
    cores.push_back(row_tail_);
    return TTTensor<cplx>(std::move(cores));
  }

  /// Column half transposed back into natural order: a TT over (j_1 .. j_d) with
  /// open trailing rank r, so that L = row_half * col_half^T.
  TTTensor<cplx> col_half() const {
    std::vector<Core<cplx>> cores;
    for (auto it = col_cores_.rbegin(); it != col_cores_.rend(); ++it) cores.push_back(it->transposed().cast<cplx>());
    cores.push_back(col_tail_.transposed());
    return TTTensor<cplx>(std::move(cores));
  }

  /// Dense N_dic x N_dic matrix by contracting both halves over the connecting rank.
  Eigen::MatrixXcd to_dense(std::size_t cap = kDefaultDenseCap) const {
    const Eigen::MatrixXcd left = tt_to_matrix(row_half(), cap);
    const Eigen::MatrixXcd right = tt_to_matrix(col_half(), cap);
    if (static_cast<std::size_t>(left.rows()) * static_cast<std::size_t>(right.rows()) > cap) {
      throw SizeError("dense generator exceeds cap");
    }
    return left * right.transpose();
  }

  const std::vector<Core<double>>& row_cores() const noexcept { return row_cores_; }
  const Core<cplx>& row_tail() const noexcept { return row_tail_; }
  const Core<cplx>& col_tail() const noexcept { return col_tail_; }
  const std::vector<Core<double>>& col_cores() const noexcept { return col_cores_; }

 private:
  template <typename S>
  static typename Core<S>::SliceMap checked_slice(const Core<S>& c, std::size_t i) {
    if (i >= c.modes()) throw BoundsError("operator index out of range");
    return c.slice(i);
  }

  std::vector<Core<double>> row_cores_;
  Core<cplx> row_tail_;
  Core<cplx> col_tail_;
  std::vector<Core<double>> col_cores_;
};

struct GeneratorTT {
  MonomialDictionary dict;
  double ts = 0.0;
  TTTensor<double> basis;          // U_X, shared by Xi and Xi^+
  Eigen::MatrixXcd xi_tail;        // Sigma_X A
  Eigen::MatrixXcd xi_plus_tail;   // A^+ Sigma_X^{-1}
  Eigen::VectorXcd lambdas;
  Eigen::VectorXcd mu;
  std::size_t pinv_rank = 0;
  std::optional<TTOperator> assembled;
  std::size_t element_count = 0;
  std::vector<std::string> warnings;

  std::size_t rank() const noexcept { return static_cast<std::size_t>(mu.size()); }

  const TTOperator& op() const {
    if (!assembled) throw ValidationError("generator has not been assembled");
    return *assembled;
  }
};

/// Links Xi and diag(mu) Xi^+ through the shared rank r into the order-2d operator.
/// diag(mu) is folded into the Xi^+ side first; no N_dic-sized object is formed.
inline TTOperator assemble_operator(const TTTensor<double>& basis, const Eigen::MatrixXcd& xi_tail,
                                    const Eigen::MatrixXcd& xi_plus_scaled) {
  const std::size_t d = basis.order();
  const auto& last = basis.core(d - 1);
  if (static_cast<std::size_t>(xi_tail.rows()) != last.right() ||
      static_cast<std::size_t>(xi_plus_scaled.cols()) != last.right()) {
    throw ShapeError("tail matrices do not match the basis rank");
  }
  std::vector<Core<double>> row_cores(basis.cores().begin(), basis.cores().end() - 1);

  const Eigen::MatrixXcd row_unf = last.unfolding().cast<cplx>() * xi_tail;
  Core<cplx> row_tail = Core<cplx>::from_unfolding(row_unf, last.left(), last.modes());

  const std::size_t r_out = static_cast<std::size_t>(xi_plus_scaled.rows());
  Core<cplx> col_tail(r_out, last.modes(), last.left());
  for (std::size_t j = 0; j < last.modes(); ++j) {
    const Eigen::MatrixXcd s = xi_plus_scaled * last.slice(j).transpose().cast<cplx>();
    for (std::size_t a = 0; a < r_out; ++a)
      for (std::size_t b = 0; b < last.left(); ++b)
        col_tail(a, j, b) = s(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }

  std::vector<Core<double>> col_cores;
  for (std::size_t k = d - 1; k-- > 0;) col_cores.push_back(basis.core(k).transposed());
  return TTOperator(std::move(row_cores), std::move(row_tail), std::move(col_tail), std::move(col_cores));
}

/// L = Xi diag(mu) Xi^+ in TT format from an AMUSEt eigen solution.
inline GeneratorTT assemble_generator(const EigenSolution& sol, const MonomialDictionary& dict, double ts) {
  if (sol.svd_x.U.order() != dict.dim()) throw ShapeError("eigen solution does not match the dictionary");
  GeneratorTT g;
  g.dict = dict;
  g.ts = ts;
  g.lambdas = sol.lambdas;
  g.mu = generator_eigenvalues(sol.lambdas, ts, &g.warnings);
  const XiPseudoInverse pinv = xi_pseudo_inverse(sol);
  g.pinv_rank = pinv.rank;
  if (pinv.rank_deficient()) {
    g.warnings.push_back("eigenvector matrix is rank deficient (rank " + std::to_string(pinv.rank) +
                         " of " + std::to_string(pinv.tail.rows()) + "); used its pseudo-inverse");
  }
  g.basis = sol.svd_x.U;
  g.xi_tail = sol.svd_x.sigma.cast<cplx>().asDiagonal() * sol.A;
  g.xi_plus_tail = pinv.tail;
  const Eigen::MatrixXcd scaled = g.mu.asDiagonal() * g.xi_plus_tail;
  g.assembled = assemble_operator(g.basis, g.xi_tail, scaled);
  g.element_count = g.assembled->element_count();
  return g;
}

/// Xi^+ Xi as an r x r matrix, contracting U_X^T U_X over the physical modes.
inline Eigen::MatrixXcd xi_plus_xi(const GeneratorTT& g) {
  const Eigen::MatrixXd uu = contract_physical(g.basis, g.basis);
  return g.xi_plus_tail * uu.cast<cplx>() * g.xi_tail;
}

struct CoefficientRow {
  TTTensor<cplx> coefficients;  // closed TT over (j_1 .. j_d)
  double max_imag = 0.0;        // over the probed entries
  double max_abs = 0.0;
};

/// Row of the generator at the full-state observable x_k as a TT over the
/// column modes. Imaginary parts are probed on `probes` (default: every monomial
/// of total degree <= 2).
inline CoefficientRow extract_vector_field_row(const GeneratorTT& g, std::size_t k,
                                               std::vector<std::vector<std::size_t>> probes = {}) {
  const TTOperator& op = g.op();
  const auto row = g.dict.full_state_exponents(k);
  const std::size_t d = op.dim();
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
  for (std::size_t m = 0; m + 1 < d; ++m) v = (v * op.row_cores()[m].slice(row[m])).eval();
  const Eigen::Matrix<cplx, 1, Eigen::Dynamic> w = v.cast<cplx>() * op.row_tail().slice(row[d - 1]);

  CoefficientRow out;
  out.coefficients = contract_last_rank(op.col_half(), w.transpose());
  if (probes.empty()) probes = g.dict.monomials_up_to(2);
  for (const auto& p : probes) {
    const cplx c = tt_entry(out.coefficients, std::span<const std::size_t>(p));
    out.max_imag = std::max(out.max_imag, std::abs(c.imag()));
    out.max_abs = std::max(out.max_abs, std::abs(c));
  }
  return out;
}

struct Coefficient {
  double value = 0.0;
  double imag = 0.0;
  bool non_real = false;  // |imag| above kImagTolerance
};

/// Single coefficient w_{k, monomial} by one chained entry evaluation.
inline Coefficient coefficient(const GeneratorTT& g, std::size_t k, std::span<const std::size_t> monomial) {
  const auto row = g.dict.full_state_exponents(k);
  if (monomial.size() != g.dict.dim()) throw BoundsError("monomial has the wrong number of exponents");
  const cplx c = g.op().entry(row, monomial);
  return Coefficient{c.real(), c.imag(), std::abs(c.imag()) > kImagTolerance};
}

}  // namespace ktt
