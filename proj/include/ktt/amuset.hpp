#pragma once

// Koopman eigenvalues and TT eigentensors from snapshot data (AMUSEt):
// global SVDs of Psi(X) and Psi(Y), the reduced r x r matrix, and its eigenpairs.

#include <algorithm>
#include <complex>
#include <cstddef>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ktt/dictionary.hpp"
#include "ktt/errors.hpp"
#include "ktt/svd.hpp"
#include "ktt/tt_tensor.hpp"

namespace ktt {

struct EigenSolution {
  Eigen::VectorXcd lambdas;  // eigenvalues of M, descending modulus
  Eigen::MatrixXcd A;        // eigenvectors of M, column i pairs with lambdas(i)
  Eigen::MatrixXd M;
  TTGlobalSVD svd_x;
  TTGlobalSVD svd_y;

  std::size_t rank() const noexcept { return static_cast<std::size_t>(lambdas.size()); }
};

/// M = Sigma_X^{-1} (U_X^T U_Y) Sigma_Y (V_Y^T V_X).
/// U_X^T U_Y is contracted core by core from the left, never densified.
inline Eigen::MatrixXd reduced_matrix(const TTGlobalSVD& svd_x, const TTGlobalSVD& svd_y) {
  if (svd_x.V.rows() != svd_y.V.rows()) {
    throw ShapeError("global SVDs were built from different snapshot counts");
  }
  const Eigen::MatrixXd uu = contract_physical(svd_x.U, svd_y.U);
  const Eigen::MatrixXd vv = svd_y.V.transpose() * svd_x.V;
  return svd_x.sigma.cwiseInverse().asDiagonal() * uu * svd_y.sigma.asDiagonal() * vv;
}

/// Orders eigenpairs by descending modulus, then descending real part, then descending imaginary part.
inline void sort_eigenpairs(Eigen::VectorXcd& lambdas, Eigen::MatrixXcd& vectors) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(lambdas.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ma = std::abs(lambdas(a)), mb = std::abs(lambdas(b));
    if (ma != mb) return ma > mb;
    if (lambdas(a).real() != lambdas(b).real()) return lambdas(a).real() > lambdas(b).real();
    return lambdas(a).imag() > lambdas(b).imag();
  });
  Eigen::VectorXcd l(lambdas.size());
  Eigen::MatrixXcd v(vectors.rows(), vectors.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    l(static_cast<Eigen::Index>(i)) = lambdas(order[i]);
    v.col(static_cast<Eigen::Index>(i)) = vectors.col(order[i]);
  }
  lambdas = std::move(l);
  vectors = std::move(v);
}

/// Eigenpairs of the reduced matrix for given global SVDs.
inline EigenSolution amuset_from_svds(TTGlobalSVD svd_x, TTGlobalSVD svd_y) {
  EigenSolution sol;
  sol.M = reduced_matrix(svd_x, svd_y);
  Eigen::EigenSolver<Eigen::MatrixXd> es(sol.M, true);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of the reduced matrix failed");
  sol.lambdas = es.eigenvalues();
  sol.A = es.eigenvectors();
  sort_eigenpairs(sol.lambdas, sol.A);
  sol.svd_x = std::move(svd_x);
  sol.svd_y = std::move(svd_y);
  return sol;
}

/// AMUSEt on paired snapshot matrices (columns of X and Y correspond).
inline EigenSolution amuset(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                            const MonomialDictionary& dict, double eps) {
  if (X.rows() != Y.rows() || X.cols() != Y.cols()) throw ShapeError("X and Y shapes differ");
  return amuset_from_svds(data_tensor_svd(dict, X, eps), data_tensor_svd(dict, Y, eps));
}

/// Dense N_dic x r eigentensor U_X Sigma_X A, for small validation cases.
inline Eigen::MatrixXcd dense_eigentensor(const EigenSolution& sol, std::size_t cap = kDefaultDenseCap) {
  const Eigen::MatrixXd u = tt_to_matrix(sol.svd_x.U, cap);
  return u.cast<cplx>() * (sol.svd_x.sigma.cast<cplx>().asDiagonal() * sol.A);
}

}  // namespace ktt
