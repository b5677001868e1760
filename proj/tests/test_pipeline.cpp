#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "ktt/amuset.hpp"
#include "ktt/dense_pipeline.hpp"
#include "ktt/dictionary.hpp"
#include "ktt/dynamics.hpp"
#include "ktt/generator_io.hpp"
#include "ktt/generator_tt.hpp"
#include "oracles.hpp"

using namespace ktt;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

SnapshotSet simulate(const OdeSystem& sys, const State& x0, double ts, std::size_t pairs, double rtol,
                     double atol, std::size_t burn_in = 0) {
  IntegratorOptions opt;
  opt.rtol = rtol;
  opt.atol = atol;
  const auto traj = integrate(sys, x0, static_cast<double>(burn_in + pairs) * ts, opt);
  return sample_pairs(traj, ts, pairs, burn_in);
}

// vdP data as used throughout: x0 = (1, 1), Ts = 0.1, 1000 pairs.
const SnapshotSet& vdp_data() {
  static const SnapshotSet data = simulate(make_system("vdp"), State::Ones(2), 0.1, 1000, 1e-6, 1e-6);
  return data;
}

OdeSystem decay_system() {
  return OdeSystem{"decay", 1, [](const State& x) -> State { return -x; }};
}

std::vector<std::size_t> mono(std::size_t d, std::initializer_list<std::pair<std::size_t, std::size_t>> f) {
  std::vector<std::size_t> e(d, 0);
  for (auto [v, p] : f) e[v] += p;
  return e;
}

}  // namespace

// ---------------------------------------------------------------- vector fields

TEST(VectorField, VanDerPol) {
  EXPECT_EQ(vdp(Eigen::Vector2d(0, 0)), Eigen::Vector2d(0, 0));
  EXPECT_EQ(vdp(Eigen::Vector2d(1, 1)), Eigen::Vector2d(1, -1));
  EXPECT_EQ(vdp(Eigen::Vector2d(2, 1)), Eigen::Vector2d(1, -5));
}

TEST(VectorField, LotkaVolterra) {
  EXPECT_EQ(lotka_volterra(Eigen::Vector4d::Zero()), Eigen::Vector4d::Zero());
  // Hand evaluation at the uniform start x = 3.
  const Eigen::Vector4d expect(-0.12 * 9 + 0.6 * 3, 0.12 * 9 - 0.14 * 9 + 0.4 * 3, 0.08 * 9 - 0.14 * 9 + 0.2 * 3,
                               0.06 * 9 - 0.42 * 3);
  EXPECT_LT((lotka_volterra(Eigen::Vector4d::Constant(3)) - expect).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(expect(1), 1.02, 1e-14);
  EXPECT_NEAR(expect(2), 0.06, 1e-14);
  const Eigen::Vector4d fixed(29.0 / 6.0, 5.0, 7.0, 30.0 / 7.0);
  EXPECT_LT(lotka_volterra(fixed).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(VectorField, Lorenz96) {
  EXPECT_LT(lorenz96(State::Constant(10, 8.0)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(lorenz96(State::Zero(10)), State::Constant(10, 8.0));
  State x = State::Constant(10, 8.0);
  x(0) = 8.1;
  const State f = lorenz96(x);
  EXPECT_NEAR(f(0), -0.1, 1e-12);   // (x2 - x9) x10 - x1 + 8
  EXPECT_NEAR(f(1), 0.0, 1e-12);    // (x3 - x10) x1 - x2 + 8
  EXPECT_NEAR(f(2), -0.8, 1e-12);   // (x4 - x1) x2 - x3 + 8
  EXPECT_NEAR(f(9), 0.8, 1e-12);    // (x1 - x8) x9 - x10 + 8
  for (Eigen::Index i = 3; i < 9; ++i) EXPECT_NEAR(f(i), 0.0, 1e-12);
}

TEST(VectorField, SystemRegistry) {
  EXPECT_EQ(make_system("lorenz96").dim, 10u);
  EXPECT_EQ(make_system("lorenz96", 6).dim, 6u);
  EXPECT_EQ(make_system("lotka_volterra").dim, 4u);
  EXPECT_THROW(make_system("pendulum"), ValidationError);
  EXPECT_THROW(make_system("lorenz96", 3), ValidationError);
}

// ---------------------------------------------------------------- integrator

TEST(Integrator, ExponentialDecay) {
  IntegratorOptions opt;
  opt.rtol = 1e-8;
  opt.atol = 1e-10;
  const auto traj = integrate(decay_system(), State::Ones(1), 1.0, opt);
  EXPECT_NEAR(traj.at(1.0)(0), std::exp(-1.0), 1e-6);
  EXPECT_NEAR(traj.at(0.37)(0), std::exp(-0.37), 1e-6);
}

TEST(Integrator, DefaultTolerancesOnDecay) {
  const auto traj = integrate(decay_system(), State::Ones(1), 1.0);
  EXPECT_NEAR(traj.at(1.0)(0), std::exp(-1.0), 1e-3 * std::exp(-1.0) + 1e-6);
}

TEST(IntegratorProperty, OrderBandOnDecay) {
  auto error_at = [](double tol) {
    IntegratorOptions opt;
    opt.rtol = tol;
    opt.atol = tol;
    const auto traj = integrate(decay_system(), State::Ones(1), 1.0, opt);
    return std::abs(traj.at(1.0)(0) - std::exp(-1.0));
  };
  const double loose = error_at(1e-4), tight = error_at(1e-9);
  ASSERT_GT(tight, 0.0);
  const double factor = loose / tight;
  EXPECT_GE(factor, 1e3);
  EXPECT_LE(factor, 1e7);
}

TEST(IntegratorProperty, EquilibriaAreInvariant) {
  const IntegratorOptions opt;
  const auto l96 = integrate(make_system("lorenz96"), State::Constant(10, 8.0), 1.0, opt);
  EXPECT_LT((l96.at(1.0) - State::Constant(10, 8.0)).cwiseAbs().maxCoeff(), opt.atol);

  const State fixed = Eigen::Vector4d(29.0 / 6.0, 5.0, 7.0, 30.0 / 7.0);
  const auto lv = integrate(make_system("lotka_volterra"), fixed, 10.0, opt);
  for (double t = 0.0; t <= 10.0; t += 0.5) EXPECT_LT((lv.at(t) - fixed).cwiseAbs().maxCoeff(), 10 * opt.atol);
}

TEST(Integrator, BlowUpReportsLastGoodTime) {
  const OdeSystem blow{"blow", 1, [](const State& x) -> State { return x.cwiseProduct(x); }};
  try {
    integrate(blow, State::Ones(1), 2.0);
    FAIL() << "expected an integration failure";
  } catch (const IntegrationError& e) {
    EXPECT_LT(e.last_good_time(), 1.0);
    EXPECT_GT(e.last_good_time(), 0.9);
  }
}

TEST(Integrator, RejectsBadArguments) {
  EXPECT_THROW(integrate(decay_system(), State::Ones(1), -1.0), ValidationError);
  EXPECT_THROW(integrate(decay_system(), State::Ones(2), 1.0), ShapeError);
  IntegratorOptions bad;
  bad.rtol = 0.0;
  EXPECT_THROW(integrate(decay_system(), State::Ones(1), 1.0, bad), ValidationError);
}

TEST(Sampling, MinimalPairAndEquilibrium) {
  IntegratorOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;
  const auto traj = integrate(decay_system(), State::Ones(1), 1.0, opt);
  const auto s = sample_pairs(traj, 0.25, 1, 0);
  ASSERT_EQ(s.pairs(), 1u);
  EXPECT_NEAR(s.X(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(s.Y(0, 0), std::exp(-0.25), 1e-9);

  const auto eq = integrate(make_system("lorenz96"), State::Constant(10, 8.0), 1.0);
  const auto p = sample_pairs(eq, 0.1, 5, 2);
  EXPECT_LT(max_abs(p.X - p.Y), 1e-12);
  EXPECT_THROW(sample_pairs(eq, 0.1, 20, 0), ValidationError);
}

TEST(Sampling, BurnInShiftsWindow) {
  IntegratorOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;
  const auto traj = integrate(decay_system(), State::Ones(1), 2.0, opt);
  const auto s = sample_pairs(traj, 0.1, 3, 4);
  EXPECT_NEAR(s.X(0, 0), std::exp(-0.4), 1e-9);
  EXPECT_NEAR(s.Y(0, 2), std::exp(-0.7), 1e-9);
}

TEST(Sampling, VanDerPolTransient) {
  const auto& d = vdp_data();
  const Eigen::MatrixXd head = d.X.leftCols(100);
  // From (1, 1) the state swings out to the limit cycle of amplitude about 2.
  EXPECT_GT(head.row(0).maxCoeff(), 1.9);
  EXPECT_LT(head.row(0).minCoeff(), -1.9);
  EXPECT_LT(head.cwiseAbs().maxCoeff(), 3.0);
}

TEST(Sampling, Lorenz96StaysBounded) {
  State x0 = State::Constant(10, 8.0);
  x0(0) = 8.1;
  const auto traj = integrate(make_system("lorenz96"), x0, 120.0);
  double worst = 0.0;
  for (double t = 0.0; t <= 120.0; t += 0.05) worst = std::max(worst, traj.at(t).cwiseAbs().maxCoeff());
  EXPECT_LT(worst, 30.0);
}

// ---------------------------------------------------------------- ground truth

TEST(TrueCoefficients, Examples) {
  const auto v = true_coefficients("vdp", MonomialDictionary(2, 2));
  ASSERT_EQ(v.terms[0].size(), 1u);
  EXPECT_EQ(v.value(0, mono(2, {{1, 1}})), 1.0);

  const auto lv = true_coefficients("lotka_volterra", MonomialDictionary(4, 2));
  EXPECT_EQ(lv.terms[0].size(), 2u);
  EXPECT_EQ(lv.value(0, mono(4, {{0, 1}})), 0.6);
  EXPECT_EQ(lv.value(0, mono(4, {{0, 1}, {1, 1}})), -0.12);

  const auto l96 = true_coefficients("lorenz96", MonomialDictionary(10, 2));
  const auto& third = l96.terms[2];
  EXPECT_EQ(third.size(), 4u);
  EXPECT_EQ(l96.value(2, mono(10, {{3, 1}, {1, 1}})), 1.0);
  EXPECT_EQ(l96.value(2, mono(10, {{0, 1}, {1, 1}})), -1.0);
  EXPECT_EQ(l96.value(2, mono(10, {{2, 1}})), -1.0);
  EXPECT_EQ(l96.value(2, mono(10, {})), 8.0);

  EXPECT_THROW(true_coefficients("pendulum", MonomialDictionary(2, 2)), ValidationError);
  EXPECT_THROW(true_coefficients("vdp", MonomialDictionary(2, 1)), ValidationError);
  EXPECT_THROW(true_coefficients("vdp", MonomialDictionary(3, 2)), ShapeError);
}

TEST(TrueCoefficientsProperty, ReproduceVectorFields) {
  oracle::Gen g(7);
  for (const auto* tag : {"vdp", "lotka_volterra", "lotka_volterra3", "lorenz96"}) {
    const OdeSystem sys = make_system(tag);
    const MonomialDictionary dict(sys.dim, 2);
    const auto tc = true_coefficients(tag, dict);
    for (int trial = 0; trial < 100; ++trial) {
      const State x = g.matrix(static_cast<Eigen::Index>(sys.dim), 1, -10, 10);
      const State f = sys(x);
      const Eigen::VectorXd psi = dict.size() <= 100000 ? oracle::psi(x, 2) : Eigen::VectorXd();
      for (std::size_t k = 0; k < sys.dim; ++k) {
        EXPECT_NEAR(tc.evaluate(k, x), f(static_cast<Eigen::Index>(k)), 1e-12 * (1 + std::abs(f(static_cast<Eigen::Index>(k)))))
            << tag;
        if (sys.dim <= 4) {
          EXPECT_NEAR(tc.dense_row(dict, k).dot(psi), f(static_cast<Eigen::Index>(k)),
                      1e-12 * (1 + std::abs(f(static_cast<Eigen::Index>(k)))))
              << tag;
        }
      }
    }
  }
}

// ---------------------------------------------------------------- dense pipeline

TEST(Edmd, IdentityDynamics) {
  oracle::Gen g(50);
  const MonomialDictionary dict(2, 2);
  const Eigen::MatrixXd X = g.matrix(2, 40, -1, 1);
  const auto km = edmd(SnapshotSet{X, X, 0.1}, dict);
  const Eigen::MatrixXd psi = oracle::psi_matrix(X, 2);
  EXPECT_LT(max_abs(km.K * psi - psi), 1e-10);
  EXPECT_EQ(km.effective_rank, 9u);
}

TEST(Edmd, LinearDecayExactFlow) {
  oracle::Gen g(51);
  const double ts = 0.2;
  const Eigen::MatrixXd X = g.matrix(1, 30, -2, 2);
  const Eigen::MatrixXd Y = X * std::exp(-ts);
  const auto km = edmd(SnapshotSet{X, Y, ts}, MonomialDictionary(1, 1));
  EXPECT_LT(max_abs(km.K - Eigen::Vector2d(1.0, std::exp(-ts)).asDiagonal().toDenseMatrix()), 1e-12);
}

TEST(Edmd, RankDeficientRecordsEffectiveRank) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(2, 5);
  const auto km = edmd(SnapshotSet{X, X, 0.1}, MonomialDictionary(2, 2));
  EXPECT_EQ(km.effective_rank, 1u);
}

TEST(Edmd, DenseCapEnforced) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(7, 3);
  EXPECT_THROW(edmd(SnapshotSet{X, X, 0.1}, MonomialDictionary(7, 2)), SizeError);
}

TEST(MatrixLog, IdentityAndDiagonal) {
  const MonomialDictionary dict(1, 1);
  const auto zero = matrix_log_generator(KoopmanMatrix{Eigen::MatrixXd::Identity(2, 2), dict, 0.1, 2});
  EXPECT_LT(max_abs(zero.L), 1e-14);
  EXPECT_LT(max_abs(extract_row(zero, 0)), 1e-14);

  const Eigen::Matrix2d K = Eigen::Vector2d(std::exp(0.2), std::exp(-0.3)).asDiagonal();
  const auto g = matrix_log_generator(KoopmanMatrix{K, dict, 0.1, 2});
  EXPECT_LT(max_abs(g.L - Eigen::Vector2d(2, -3).asDiagonal().toDenseMatrix()), 1e-12);
  EXPECT_TRUE(g.warnings.empty());
}

TEST(MatrixLog, SingularAndBranchCut) {
  const MonomialDictionary dict(1, 1);
  EXPECT_THROW(matrix_log_generator(KoopmanMatrix{Eigen::Vector2d(1, 0).asDiagonal().toDenseMatrix(), dict, 0.1, 2}),
               SingularLogError);
  const auto g = matrix_log_generator(KoopmanMatrix{Eigen::Vector2d(1, -0.5).asDiagonal().toDenseMatrix(), dict, 0.1, 2});
  EXPECT_FALSE(g.warnings.empty());
}

TEST(MatrixLog, IllConditionedEigenvectorsWarn) {
  Eigen::Matrix2d K;
  K << 1.0, 1.0, 0.0, 1.0 + 1e-14;
  const auto g = matrix_log_generator(KoopmanMatrix{K, MonomialDictionary(1, 1), 0.1, 2});
  bool found = false;
  for (const auto& w : g.warnings) found |= w.find("ill-conditioned") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(DensePipeline, VanDerPolMatchesPrintedGenerator) {
  const MonomialDictionary dict(2, 2);
  const auto g = matrix_log_generator(edmd(vdp_data(), dict));
  const Eigen::VectorXd dx1 = extract_row(g, 0), dx2 = extract_row(g, 1);
  auto at = [&](const Eigen::VectorXd& row, std::size_t e1, std::size_t e2) {
    return row(static_cast<Eigen::Index>(dict.flat_index(std::vector<std::size_t>{e1, e2})));
  };
  EXPECT_NEAR(at(dx1, 0, 1), 1.0, 0.005);
  EXPECT_NEAR(at(dx2, 1, 0), -1.0, 0.005);
  EXPECT_NEAR(at(dx2, 0, 1), 1.0, 0.005);
  EXPECT_NEAR(at(dx2, 2, 1), -1.0, 0.005);
  for (std::size_t i = 0; i < 9; ++i) {
    const auto e = dict.exponents(i);
    if (!(e[0] == 0 && e[1] == 1)) EXPECT_LT(std::abs(dx1(static_cast<Eigen::Index>(i))), 0.005) << dict.label(i);
    const bool pattern = (e[0] == 1 && e[1] == 0) || (e[0] == 0 && e[1] == 1) || (e[0] == 2 && e[1] == 1);
    if (!pattern) EXPECT_LT(std::abs(dx2(static_cast<Eigen::Index>(i))), 0.005) << dict.label(i);
  }
}

TEST(DenseProperty, ExpLogRoundTrip) {
  const auto km = edmd(vdp_data(), MonomialDictionary(2, 2));
  const auto g = matrix_log_generator(km);
  const Eigen::MatrixXd back = oracle::expm(Eigen::MatrixXd(km.ts * g.L));
  EXPECT_LT((back - km.K).norm() / km.K.norm(), 1e-6);
}

TEST(DenseProperty, IdentityDataGivesZeroGenerator) {
  const auto& d = vdp_data();
  const auto g = matrix_log_generator(edmd(SnapshotSet{d.X, d.X, d.ts}, MonomialDictionary(2, 2)));
  EXPECT_LT(max_abs(g.L), 1e-8);
}

// ---------------------------------------------------------------- AMUSEt

TEST(Amuset, SameSvdGivesIdentityM) {
  const MonomialDictionary dict(2, 2);
  const auto s = data_tensor_svd(dict, vdp_data().X, 1.0);
  const Eigen::MatrixXd M = reduced_matrix(s, s);
  EXPECT_LT(max_abs(M - Eigen::MatrixXd::Identity(M.rows(), M.cols())), 1e-12);
}

TEST(Amuset, IdentityDataGivesUnitEigenvalues) {
  const auto& d = vdp_data();
  const auto sol = amuset(d.X, d.X, MonomialDictionary(2, 2), 1.0 - 1e-6);
  for (Eigen::Index i = 0; i < sol.lambdas.size(); ++i) EXPECT_LT(std::abs(sol.lambdas(i) - 1.0), 1e-10);
}

TEST(Amuset, SingleSnapshotRayleighQuotient) {
  const MonomialDictionary dict(2, 2);
  const Eigen::Vector2d x(0.3, -1.2), y(0.5, -0.9);
  const auto sol = amuset(x, y, dict, 1.0);
  ASSERT_EQ(sol.rank(), 1u);
  const Eigen::VectorXd px = oracle::psi(x, 2), py = oracle::psi(y, 2);
  EXPECT_NEAR(sol.M(0, 0), px.dot(py) / px.squaredNorm(), 1e-12);
}

TEST(Amuset, VanDerPolSpectrumMatchesDense) {
  const auto& d = vdp_data();
  const MonomialDictionary dict(2, 2);
  const auto sol = amuset(d.X, d.Y, dict, 1.0);
  const auto km = edmd(d, dict);
  ASSERT_EQ(sol.rank(), km.effective_rank);
  Eigen::VectorXcd dense = Eigen::EigenSolver<Eigen::MatrixXd>(km.K).eigenvalues();
  Eigen::MatrixXcd none(0, dense.size());
  sort_eigenpairs(dense, none);
  EXPECT_LT((dense - sol.lambdas).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(AmusetProperty, EigenpairsAndEigentensor) {
  const auto& d = vdp_data();
  const MonomialDictionary dict(2, 2);
  const auto sol = amuset(d.X, d.Y, dict, 1.0);
  const double mnorm = sol.M.norm();
  for (Eigen::Index i = 0; i < sol.lambdas.size(); ++i) {
    const Eigen::VectorXcd v = sol.A.col(i);
    EXPECT_LT((sol.M.cast<cplx>() * v - sol.lambdas(i) * v).norm(), 1e-8 * mnorm);
  }
  // Conjugate pairing.
  for (Eigen::Index i = 0; i < sol.lambdas.size(); ++i) {
    double best = 1e300;
    for (Eigen::Index j = 0; j < sol.lambdas.size(); ++j)
      best = std::min(best, std::abs(sol.lambdas(i) - std::conj(sol.lambdas(j))));
    EXPECT_LT(best, 1e-12);
  }
  // Descending modulus.
  for (Eigen::Index i = 1; i < sol.lambdas.size(); ++i)
    EXPECT_GE(std::abs(sol.lambdas(i - 1)), std::abs(sol.lambdas(i)) - 1e-15);
  // K Xi = Xi diag(lambda) against the dense Koopman matrix.
  const Eigen::MatrixXd K = edmd(d, dict).K;
  const Eigen::MatrixXcd xi = dense_eigentensor(sol);
  for (Eigen::Index i = 0; i < xi.cols(); ++i) {
    const Eigen::VectorXcd lhs = K.cast<cplx>() * xi.col(i);
    EXPECT_LT((lhs - sol.lambdas(i) * xi.col(i)).norm() / xi.col(i).norm(), 1e-6);
  }
  const Eigen::MatrixXd uu = contract_physical(sol.svd_x.U, sol.svd_x.U);
  EXPECT_LT(max_abs(uu - Eigen::MatrixXd::Identity(uu.rows(), uu.cols())), 1e-10);
}

TEST(Amuset, SortOrderBreaksTies) {
  Eigen::VectorXcd l(4);
  l << cplx(0, -1), cplx(-1, 0), cplx(0, 1), cplx(1, 0);
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Identity(4, 4);
  sort_eigenpairs(l, v);
  EXPECT_EQ(l(0), cplx(1, 0));
  EXPECT_EQ(l(1), cplx(0, 1));
  EXPECT_EQ(l(2), cplx(0, -1));
  EXPECT_EQ(l(3), cplx(-1, 0));
  EXPECT_EQ(v(3, 0), cplx(1, 0));
}

TEST(Amuset, MismatchedSnapshotsRejected) {
  const MonomialDictionary dict(2, 2);
  EXPECT_THROW(amuset(Eigen::MatrixXd::Ones(2, 3), Eigen::MatrixXd::Ones(2, 4), dict, 1.0), ShapeError);
}

TEST(Amuset, LotkaVolterraSpectrumNearUnitCircle) {
  const auto sys = make_system("lotka_volterra");
  std::vector<SnapshotSet> sets;
  for (double v : {3.0, 5.0, 8.0}) sets.push_back(simulate(sys, State::Constant(4, v), 0.1, 5000, 1e-3, 1e-6));
  const auto data = concatenate(sets);
  const auto sol = amuset(data.X, data.Y, MonomialDictionary(4, 2), 1.0 - 1e-6);
  EXPECT_LE(sol.lambdas.cwiseAbs().maxCoeff(), 1.1);
}

// ---------------------------------------------------------------- generator

TEST(GeneratorEigenvalues, Examples) {
  EXPECT_LT(std::abs(generator_eigenvalues(Eigen::VectorXcd::Ones(1), 0.3)(0)), 1e-15);
  Eigen::VectorXcd l(2);
  l << std::exp(0.1 * cplx(-1, 2)), std::exp(0.1 * 0.6);
  const auto mu = generator_eigenvalues(l, 0.1);
  EXPECT_LT(std::abs(mu(0) - cplx(-1, 2)), 1e-12);
  EXPECT_LT(std::abs(mu(1) - 0.6), 1e-12);
}

TEST(GeneratorEigenvalues, SingularAndBranchCut) {
  EXPECT_THROW(generator_eigenvalues(Eigen::VectorXcd::Zero(1), 0.1), SingularLogError);
  EXPECT_THROW(generator_eigenvalues(Eigen::VectorXcd::Ones(1), 0.0), ValidationError);
  std::vector<std::string> warnings;
  Eigen::VectorXcd l(1);
  l << cplx(-0.9, 0.0);
  const auto mu = generator_eigenvalues(l, 0.1, &warnings);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_NEAR(mu(0).imag(), std::numbers::pi / 0.1, 1e-9);
}

TEST(XiPseudoInverse, OrthonormalAndDiagonalCases) {
  const auto id = xi_pseudo_inverse(Eigen::MatrixXcd::Identity(3, 3), Eigen::VectorXd::Ones(3));
  EXPECT_LT((id.tail - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_FALSE(id.rank_deficient());

  const Eigen::MatrixXcd A = Eigen::Vector2cd(2, 4).asDiagonal();
  const auto p = xi_pseudo_inverse(A, Eigen::Vector2d(3, 5));
  EXPECT_LT(std::abs(p.tail(0, 0) - 1.0 / 6.0), 1e-14);
  EXPECT_LT(std::abs(p.tail(1, 1) - 1.0 / 20.0), 1e-14);
  EXPECT_LT(std::abs(p.tail(0, 1)), 1e-14);
}

TEST(XiPseudoInverse, RankDeficientFallsBack) {
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(3, 3);
  A.col(2) = A.col(1);
  const auto p = xi_pseudo_inverse(A, Eigen::VectorXd::Ones(3));
  EXPECT_TRUE(p.rank_deficient());
  EXPECT_EQ(p.rank, 2u);
  // Moore-Penrose conditions.
  const Eigen::MatrixXcd& P = p.tail;
  EXPECT_LT((A * P * A - A).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((P * A * P - P).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GeneratorTT, VanDerPolDenseEquivalence) {
  const auto& d = vdp_data();
  const MonomialDictionary dict(2, 2);
  const auto g = assemble_generator(amuset(d.X, d.Y, dict, 1.0), dict, d.ts);
  const auto dense = matrix_log_generator(edmd(d, dict));
  const Eigen::MatrixXcd L = g.op().to_dense();
  EXPECT_LT((L.real() - dense.L).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(L.imag().cwiseAbs().maxCoeff(), 1e-6 * L.cwiseAbs().maxCoeff());
  for (std::size_t k = 0; k < 2; ++k) {
    const auto row = extract_vector_field_row(g, k);
    const Eigen::VectorXcd w = tt_to_matrix(row.coefficients);
    EXPECT_LT((w.real() - extract_row(dense, k)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(GeneratorTTProperty, SpectralAndPseudoInverseIdentities) {
  const auto& d = vdp_data();
  const MonomialDictionary dict(2, 2);
  for (double eps : {1.0, 1.0 - 1e-6}) {
    const auto g = assemble_generator(amuset(d.X, d.Y, dict, eps), dict, d.ts);
    for (Eigen::Index i = 0; i < g.mu.size(); ++i)
      EXPECT_LT(std::abs(std::exp(g.ts * g.mu(i)) - g.lambdas(i)), 1e-10 * std::abs(g.lambdas(i)));
    const Eigen::MatrixXcd pp = xi_plus_xi(g);
    EXPECT_LT((pp - Eigen::MatrixXcd::Identity(pp.rows(), pp.cols())).cwiseAbs().maxCoeff(), 1e-8);
    // mu pairs up like lambda.
    for (Eigen::Index i = 0; i < g.mu.size(); ++i) {
      double best = 1e300;
      for (Eigen::Index j = 0; j < g.mu.size(); ++j) best = std::min(best, std::abs(g.mu(i) - std::conj(g.mu(j))));
      EXPECT_LT(best, 1e-8 * (1.0 + std::abs(g.mu(i))));
    }
  }
}

TEST(GeneratorTT, DenseXiPlusTimesXiIsIdentity) {
  const auto& d = vdp_data();
  const MonomialDictionary dict(2, 2);
  const auto sol = amuset(d.X, d.Y, dict, 1.0);
  const auto g = assemble_generator(sol, dict, d.ts);
  const Eigen::MatrixXcd xi = dense_eigentensor(sol);
  const Eigen::MatrixXcd xi_plus = g.xi_plus_tail * tt_to_matrix(g.basis).transpose().cast<cplx>();
  const Eigen::MatrixXcd pp = xi_plus * xi;
  EXPECT_LT((pp - Eigen::MatrixXcd::Identity(pp.rows(), pp.cols())).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(GeneratorTT, IdentityDataGivesZeroGenerator) {
  const auto& d = vdp_data();
  const MonomialDictionary dict(2, 2);
  const auto g = assemble_generator(amuset(d.X, d.X, dict, 1.0 - 1e-6), dict, d.ts);
  oracle::Gen rng(60);
  for (int probe = 0; probe < 100; ++probe) {
    const std::vector<std::size_t> row{rng.index(0, 2), rng.index(0, 2)}, col{rng.index(0, 2), rng.index(0, 2)};
    EXPECT_LT(std::abs(g.op().entry(row, col)), 1e-8);
  }
  const auto w = extract_vector_field_row(g, 0);
  EXPECT_LT(w.max_abs, 1e-8);
  EXPECT_LT(std::abs(coefficient(g, 1, std::vector<std::size_t>{1, 0}).value), 1e-8);
}

TEST(GeneratorTT, StructureAndElementCount) {
  oracle::Gen rng(61);
  const MonomialDictionary dict(3, 2);
  const Eigen::MatrixXd X = rng.matrix(3, 200, -1, 1);
  const Eigen::MatrixXd Y = X * 0.97 + 0.01 * rng.matrix(3, 200);
  const auto g = assemble_generator(amuset(X, Y, dict, 1.0), dict, 0.1);
  const auto& op = g.op();
  const auto ur = g.basis.ranks();
  const auto r = op.ranks();
  // (1, r1, r2, r, r2, r1, 1)
  ASSERT_EQ(r.size(), 7u);
  EXPECT_EQ(r[1], ur[1]);
  EXPECT_EQ(r[2], ur[2]);
  EXPECT_EQ(r[3], g.rank());
  EXPECT_EQ(r[4], ur[2]);
  EXPECT_EQ(r[5], ur[1]);
  std::size_t expect = 0;
  for (std::size_t k = 0; k < 6; ++k) expect += r[k] * 3 * r[k + 1];
  EXPECT_EQ(g.element_count, expect);
  std::size_t bound = 0;
  for (std::size_t k = 0; k < 3; ++k) bound += ur[k] * 3 * ur[k + 1];
  EXPECT_LE(g.element_count, 2 * bound + 2 * g.rank() * g.rank() * 3 * ur[2]);

  // Entry probe against the densified operator.
  const Eigen::MatrixXcd L = op.to_dense();
  for (int probe = 0; probe < 50; ++probe) {
    const std::size_t i = rng.index(0, 26), j = rng.index(0, 26);
    const auto ri = dict.exponents(i), cj = dict.exponents(j);
    EXPECT_LT(std::abs(op.entry(ri, cj) - L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))), 1e-10);
  }
}

TEST(GeneratorTT, SerializationRoundTrip) {
  const auto& d = vdp_data();
  const MonomialDictionary dict(2, 2);
  const auto g = assemble_generator(amuset(d.X, d.Y, dict, 1.0), dict, d.ts);
  std::stringstream ss;
  write_generator(ss, g, 1.0);
  GeneratorMeta meta;
  const auto back = read_generator(ss, &meta);
  EXPECT_EQ(meta.dim, 2u);
  EXPECT_EQ(meta.degree, 2u);
  EXPECT_EQ(meta.ts, d.ts);
  EXPECT_EQ(meta.eps, 1.0);
  EXPECT_EQ(back.element_count, g.element_count);
  EXPECT_LT((back.op().to_dense() - g.op().to_dense()).cwiseAbs().maxCoeff(), 1e-15);

  std::stringstream bad("KGN1garbage");
  EXPECT_THROW(read_generator(bad), ValidationError);
}

TEST(GeneratorTT, LotkaVolterraCoefficientsWithoutTruncation) {
  const auto sys = make_system("lotka_volterra");
  std::vector<SnapshotSet> sets;
  for (double v : {3.0, 5.0, 8.0}) sets.push_back(simulate(sys, State::Constant(4, v), 0.1, 5000, 1e-8, 1e-10));
  const auto data = concatenate(sets);
  const MonomialDictionary dict(4, 2);
  const auto g = assemble_generator(amuset(data.X, data.Y, dict, 1.0), dict, data.ts);
  EXPECT_NEAR(coefficient(g, 0, mono(4, {{0, 1}})).value, 0.6, 1e-3);
  EXPECT_NEAR(coefficient(g, 0, mono(4, {{0, 1}, {1, 1}})).value, -0.12, 1e-3);
  const auto row = extract_vector_field_row(g, 0);
  EXPECT_LT(row.max_imag, 1e-6 * row.max_abs);
}
