#pragma once

// Dense baseline: EDMD Koopman matrix, generator by eigendecomposition-based
// matrix logarithm, and vector-field coefficients read off generator rows.
// Only practical for small dictionaries; it is the reference for the TT path.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ktt/dictionary.hpp"
#include "ktt/errors.hpp"
#include "ktt/svd.hpp"

namespace ktt {

inline constexpr std::size_t kDenseDictionaryCap = 2000;
inline constexpr double kMinEigenvalueModulus = 1e-12;
inline constexpr double kBranchCutAngle = 1e-6;
inline constexpr double kConditionWarning = 1e12;
inline constexpr double kImagTolerance = 1e-6;

struct KoopmanMatrix {
  Eigen::MatrixXd K;
  MonomialDictionary dict;
  double ts = 0.0;
  std::size_t effective_rank = 0;  // numerical rank of Psi(X)
};

struct DenseGenerator {
  Eigen::MatrixXd L;
  MonomialDictionary dict;
  double ts = 0.0;
  double imag_residual = 0.0;  // max |Im| discarded when taking the real part
  std::vector<std::string> warnings;
};

/// K = Psi(Y) Psi(X)^+, pseudo-inverse by SVD with a numerical-rank cutoff.
inline KoopmanMatrix edmd(const SnapshotSet& data, const MonomialDictionary& dict,
                          std::size_t dense_cap = kDenseDictionaryCap) {
  data.validate();
  if (dict.size() > dense_cap) {
    throw SizeError("dictionary size " + std::to_string(dict.size()) + " exceeds dense cap " +
                    std::to_string(dense_cap));
  }
  const Eigen::MatrixXd psi_x = psi_matrix(dict, data.X, std::numeric_limits<std::size_t>::max());
  const Eigen::MatrixXd psi_y = psi_matrix(dict, data.Y, std::numeric_limits<std::size_t>::max());
  Eigen::MatrixXd u, v;
  Eigen::VectorXd s;
  detail::thin_svd(psi_x, u, s, v);
  const std::size_t r = numerical_rank(s, psi_x.rows(), psi_x.cols());
  if (r == 0) throw DegenerateInputError("edmd: Psi(X) is numerically zero");
  const auto ri = static_cast<Eigen::Index>(r);
  const Eigen::MatrixXd pinv =
      v.leftCols(ri) * s.head(ri).cwiseInverse().asDiagonal() * u.leftCols(ri).transpose();
  return KoopmanMatrix{psi_y * pinv, dict, data.ts, r};
}

/// Principal logarithm of one eigenvalue divided by ts; flags branch-cut proximity.
inline std::complex<double> log_eigenvalue(std::complex<double> lambda, double ts,
                                           std::vector<std::string>* warnings) {
  if (std::abs(lambda) < kMinEigenvalueModulus) {
    throw SingularLogError("eigenvalue of modulus " + std::to_string(std::abs(lambda)) +
                           " has no logarithm");
  }
  if (std::abs(std::arg(lambda)) > std::numbers::pi - kBranchCutAngle && warnings) {
    warnings->push_back("eigenvalue near the negative real axis (" + std::to_string(lambda.real()) +
                        "): principal logarithm is branch-cut sensitive");
  }
  return std::log(lambda) / ts;
}

/// L = (1/ts) P log(Lambda) P^{-1} from K = P Lambda P^{-1}; returns the real part.
inline DenseGenerator matrix_log_generator(const KoopmanMatrix& km) {
  if (!(km.ts > 0.0)) throw ValidationError("sampling interval must be positive");
  DenseGenerator g{Eigen::MatrixXd(), km.dict, km.ts, 0.0, {}};
  Eigen::EigenSolver<Eigen::MatrixXd> es(km.K, true);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of K failed");
  const Eigen::VectorXcd lambda = es.eigenvalues();
  const Eigen::MatrixXcd P = es.eigenvectors();

  Eigen::VectorXcd mu(lambda.size());
  std::vector<std::string> branch;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) mu(i) = log_eigenvalue(lambda(i), km.ts, &branch);
  if (!branch.empty()) {
    g.warnings.push_back(std::to_string(branch.size()) + " eigenvalue(s) near the branch cut");
  }

  Eigen::JacobiSVD<Eigen::MatrixXcd> psvd(P);
  const auto& ps = psvd.singularValues();
  const double cond = ps(ps.size() - 1) > 0.0 ? ps(0) / ps(ps.size() - 1)
                                              : std::numeric_limits<double>::infinity();
  if (cond > kConditionWarning) {
    g.warnings.push_back("eigenvector matrix is ill-conditioned (condition " + std::to_string(cond) + ")");
  }

  const Eigen::MatrixXcd Pinv = P.partialPivLu().inverse();
  const Eigen::MatrixXcd Lc = P * mu.asDiagonal() * Pinv;
  g.L = Lc.real();
  g.imag_residual = Lc.imag().cwiseAbs().maxCoeff();
  const double scale = g.L.cwiseAbs().maxCoeff();
  if (g.imag_residual > kImagTolerance * scale && g.imag_residual > 1e-12) {
    g.warnings.push_back("generator has a non-negligible imaginary part (" +
                         std::to_string(g.imag_residual) + ")");
  }
  return g;
}

/// Row of L at the full-state observable x_k: the estimated coefficients of F_k.
inline Eigen::VectorXd extract_row(const DenseGenerator& g, std::size_t k) {
  return g.L.row(static_cast<Eigen::Index>(g.dict.full_state_index(k))).transpose();
}

}  // namespace ktt
