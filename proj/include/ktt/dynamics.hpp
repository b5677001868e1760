#pragma once

// Benchmark vector fields, an adaptive Dormand-Prince 5(4) integrator with
// continuous output, snapshot sampling and exact polynomial coefficients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ktt/dictionary.hpp"
#include "ktt/errors.hpp"

namespace ktt {

using State = Eigen::VectorXd;

/// Autonomous system x' = F(x).
struct OdeSystem {
  std::string name;
  std::size_t dim = 0;
  std::function<State(const State&)> field;

  State operator()(const State& x) const { return field(x); }
};

inline State vdp(const State& x) {
  State dx(2);
  dx(0) = x(1);
  dx(1) = (1.0 - x(0) * x(0)) * x(1) - x(0);
  return dx;
}

inline State lotka_volterra(const State& x) {
  State dx(4);
  dx(0) = -0.12 * x(0) * x(1) + 0.6 * x(0);
  dx(1) = 0.12 * x(0) * x(1) - 0.14 * x(1) * x(2) + 0.4 * x(1);
  dx(2) = 0.08 * x(1) * x(2) - 0.14 * x(2) * x(3) + 0.2 * x(2);
  dx(3) = 0.06 * x(2) * x(3) - 0.42 * x(3);
  return dx;
}

/// Three-species chain: the four-species model with the top predator removed,
/// a mortality term on x3, and states rescaled by 1/5 so values stay O(1).
inline State lotka_volterra3(const State& x) {
  State dx(3);
  dx(0) = -0.6 * x(0) * x(1) + 0.6 * x(0);
  dx(1) = 0.6 * x(0) * x(1) - 0.7 * x(1) * x(2) + 0.4 * x(1);
  dx(2) = 0.4 * x(1) * x(2) - 0.4 * x(2);
  return dx;
}

inline constexpr double kLorenz96Forcing = 8.0;

/// x_i' = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F with periodic indices; any d >= 4.
inline State lorenz96(const State& x) {
  const Eigen::Index d = x.size();
  State dx(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double next = x((i + 1) % d);
    const double prev = x((i + d - 1) % d);
    const double prev2 = x((i + d - 2) % d);
    dx(i) = (next - prev2) * prev - x(i) + kLorenz96Forcing;
  }
  return dx;
}

/// Builds a named system. `dim` is only consulted for lorenz96 (default 10).
inline OdeSystem make_system(std::string_view tag, std::size_t dim = 0) {
  if (tag == "vdp") return {"vdp", 2, vdp};
  if (tag == "lotka_volterra") return {"lotka_volterra", 4, lotka_volterra};
  if (tag == "lotka_volterra3") return {"lotka_volterra3", 3, lotka_volterra3};
  if (tag == "lorenz96") {
    const std::size_t d = dim == 0 ? 10 : dim;
    if (d < 4) throw ValidationError("lorenz96 needs at least 4 dimensions");
    return {"lorenz96", d, lorenz96};
  }
  throw ValidationError("unknown system tag '" + std::string(tag) + "'");
}

// ---------------------------------------------------------------------------
// Integrator

struct IntegratorOptions {
  double atol = 1e-6;
  double rtol = 1e-3;
  std::size_t max_steps = 100'000'000;
};

/// Piecewise quartic continuous extension of an accepted Dormand-Prince run.
class Trajectory {
 public:
  std::size_t dim() const noexcept { return dim_; }
  double t0() const noexcept { return times_.front(); }
  double t_end() const noexcept { return times_.back(); }
  std::size_t steps() const noexcept { return times_.size() - 1; }

  State at(double t) const {
    const double slack = 1e-9 * std::max(1.0, std::abs(t_end()));
    if (t < t0() - slack || t > t_end() + slack) {
      throw BoundsError("time " + std::to_string(t) + " outside trajectory span [" +
                        std::to_string(t0()) + ", " + std::to_string(t_end()) + "]");
    }
    t = std::clamp(t, t0(), t_end());
    if (steps() == 0) return initial_;
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t s = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
    s = std::min(s, steps() - 1);
    const double h = times_[s + 1] - times_[s];
    const double theta = (t - times_[s]) / h;
    const double theta1 = 1.0 - theta;
    const Eigen::Index d = static_cast<Eigen::Index>(dim_);
    Eigen::Map<const Eigen::MatrixXd> c(coeffs_.data() + s * 5 * dim_, d, 5);
    return c.col(0) + theta * (c.col(1) + theta1 * (c.col(2) + theta * (c.col(3) + theta1 * c.col(4))));
  }

 private:
  friend Trajectory integrate(const OdeSystem&, const State&, double, const IntegratorOptions&);

  std::size_t dim_ = 0;
  State initial_;
  std::vector<double> times_;
  std::vector<double> coeffs_;  // 5 * dim per step, column-major blocks
};

namespace detail {

inline double rms_scaled(const State& v, const State& scale) {
  return std::sqrt((v.array() / scale.array()).square().mean());
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) from t = 0 to t_end with standard embedded error
/// control (RMS norm, scale atol + rtol * max(|y_n|, |y_{n+1}|)) and the
/// Hairer-Wanner continuous extension.
inline Trajectory integrate(const OdeSystem& system, const State& x0, double t_end,
                            const IntegratorOptions& opt = {}) {
  if (!(t_end > 0.0)) throw ValidationError("t_end must be positive");
  if (!(opt.atol > 0.0) || !(opt.rtol > 0.0)) throw ValidationError("tolerances must be positive");
  if (static_cast<std::size_t>(x0.size()) != system.dim) throw ShapeError("initial state dimension mismatch");

  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                   a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                   d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                   d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
  (void)c2, (void)c3, (void)c4, (void)c5;

  const auto& f = system.field;
  Trajectory traj;
  traj.dim_ = system.dim;
  traj.initial_ = x0;
  traj.times_.push_back(0.0);

  State y = x0;
  State k1 = f(y);
  double t = 0.0;

  // Automatic initial step (Hairer, Norsett & Wanner, II.4).
  double h;
  {
    const State sc = opt.atol + opt.rtol * y.array().abs();
    const double n0 = detail::rms_scaled(y, sc);
    const double n1 = detail::rms_scaled(k1, sc);
    double h0 = (n0 < 1e-5 || n1 < 1e-5) ? 1e-6 : 0.01 * n0 / n1;
    h0 = std::min(h0, t_end);
    const State k = f(y + h0 * k1);
    const double n2 = detail::rms_scaled(k - k1, sc) / h0;
    const double nmax = std::max(n1, n2);
    const double h1 = nmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / nmax, 1.0 / 5.0);
    h = std::min({100.0 * h0, h1, t_end});
  }

  bool rejected = false;
  std::size_t step_count = 0;
  while (t < t_end) {
    if (++step_count > opt.max_steps) throw IntegrationError("step budget exhausted", t);
    const double h_min = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < h_min) throw IntegrationError("step size underflow", t);
    if (t + h > t_end || t_end - (t + h) < h_min) h = t_end - t;

    const State k2 = f(y + h * (a21 * k1));
    const State k3 = f(y + h * (a31 * k1 + a32 * k2));
    const State k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const State k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const State k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const State y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const State k7 = f(y1);
    const State err_vec = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const State sc = opt.atol + opt.rtol * y.array().abs().max(y1.array().abs());
    const double err = detail::rms_scaled(err_vec, sc);

    if (!std::isfinite(err)) {
      h *= 0.2;
      rejected = true;
      continue;
    }
    if (err <= 1.0) {
      const std::size_t d = system.dim;
      const std::size_t base = traj.coeffs_.size();
      traj.coeffs_.resize(base + 5 * d);
      Eigen::Map<Eigen::MatrixXd> c(traj.coeffs_.data() + base, static_cast<Eigen::Index>(d), 5);
      c.col(0) = y;
      c.col(1) = y1 - y;
      c.col(2) = h * k1 - c.col(1);
      c.col(3) = c.col(1) - h * k7 - c.col(2);
      c.col(4) = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);

      t = (t_end - (t + h) < h_min) ? t_end : t + h;
      traj.times_.push_back(t);
      y = y1;
      k1 = k7;
      double factor = err == 0.0 ? 10.0 : std::min(10.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
      if (rejected) factor = std::min(factor, 1.0);
      h *= factor;
      rejected = false;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      rejected = true;
    }
  }
  return traj;
}

/// States at times t0 + j * ts for j = 0 .. samples - 1, one column each.
inline Eigen::MatrixXd sample_states(const Trajectory& traj, double ts, std::size_t samples) {
  if (!(ts > 0.0)) throw ValidationError("sampling interval must be positive");
  const double needed = traj.t0() + static_cast<double>(samples - 1) * ts;
  if (samples == 0 || needed > traj.t_end() * (1.0 + 1e-12) + 1e-12) {
    throw ValidationError("trajectory too short for " + std::to_string(samples) + " samples");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(traj.dim()), static_cast<Eigen::Index>(samples));
  for (std::size_t j = 0; j < samples; ++j)
    out.col(static_cast<Eigen::Index>(j)) = traj.at(traj.t0() + static_cast<double>(j) * ts);
  return out;
}

/// Consecutive overlapping pairs (x_j, x_{j+1}) from a time-ordered state matrix,
/// skipping the first burn_in states.
inline SnapshotSet pairs_from_states(const Eigen::MatrixXd& states, std::size_t burn_in,
                                     std::size_t count, double ts) {
  if (count == 0) throw ValidationError("pair count must be positive");
  if (static_cast<std::size_t>(states.cols()) < burn_in + count + 1) {
    throw ValidationError("need " + std::to_string(burn_in + count + 1) + " states, have " +
                          std::to_string(states.cols()));
  }
  SnapshotSet s{states.middleCols(static_cast<Eigen::Index>(burn_in), static_cast<Eigen::Index>(count)),
                states.middleCols(static_cast<Eigen::Index>(burn_in + 1), static_cast<Eigen::Index>(count)),
                ts};
  s.validate();
  return s;
}

/// X column k = x(t0 + (burn_in + k) ts), Y column k = x(t0 + (burn_in + k + 1) ts).
inline SnapshotSet sample_pairs(const Trajectory& traj, double ts, std::size_t count,
                                std::size_t burn_in) {
  if (count == 0) throw ValidationError("pair count must be positive");
  return pairs_from_states(sample_states(traj, ts, burn_in + count + 1), burn_in, count, ts);
}

// ---------------------------------------------------------------------------
// Ground truth

/// Exact sparse coefficients w_{k, .} of each output component over the monomial basis.
struct TrueCoefficients {
  using Exponents = std::vector<std::size_t>;
  std::vector<std::map<Exponents, double>> terms;  // one map per output dimension

  std::size_t dim() const noexcept { return terms.size(); }

  double value(std::size_t k, const Exponents& e) const {
    const auto it = terms.at(k).find(e);
    return it == terms.at(k).end() ? 0.0 : it->second;
  }

  /// sum_i w_{k,i} psi_i(x).
  double evaluate(std::size_t k, const State& x) const {
    double acc = 0.0;
    for (const auto& [e, w] : terms.at(k)) {
      double m = w;
      for (std::size_t j = 0; j < e.size(); ++j) m *= std::pow(x(static_cast<Eigen::Index>(j)), static_cast<double>(e[j]));
      acc += m;
    }
    return acc;
  }

  /// Dense coefficient vector over the dictionary for output k.
  Eigen::VectorXd dense_row(const MonomialDictionary& dict, std::size_t k) const {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dict.size()));
    for (const auto& [e, c] : terms.at(k)) w(static_cast<Eigen::Index>(dict.flat_index(e))) = c;
    return w;
  }
};

namespace detail {

// Exponent vector with the listed (variable, power) factors; variables zero-based.
inline std::vector<std::size_t> mono(std::size_t d, std::initializer_list<std::pair<std::size_t, std::size_t>> f) {
  std::vector<std::size_t> e(d, 0);
  for (auto [v, p] : f) e[v] += p;
  return e;
}

}  // namespace detail

inline TrueCoefficients true_coefficients(std::string_view tag, const MonomialDictionary& dict) {
  using detail::mono;
  if (dict.degree() < 2) throw ValidationError("true coefficients need a dictionary of degree >= 2");
  const std::size_t d = dict.dim();
  TrueCoefficients tc;
  auto expect_dim = [&](std::size_t want) {
    if (d != want) throw ShapeError(std::string(tag) + " needs a " + std::to_string(want) + "-dimensional dictionary");
  };
  if (tag == "vdp") {
    expect_dim(2);
    tc.terms.resize(2);
    tc.terms[0][mono(2, {{1, 1}})] = 1.0;
    tc.terms[1][mono(2, {{1, 1}})] = 1.0;
    tc.terms[1][mono(2, {{0, 2}, {1, 1}})] = -1.0;
    tc.terms[1][mono(2, {{0, 1}})] = -1.0;
  } else if (tag == "lotka_volterra") {
    expect_dim(4);
    tc.terms.resize(4);
    tc.terms[0][mono(4, {{0, 1}, {1, 1}})] = -0.12;
    tc.terms[0][mono(4, {{0, 1}})] = 0.6;
    tc.terms[1][mono(4, {{0, 1}, {1, 1}})] = 0.12;
    tc.terms[1][mono(4, {{1, 1}, {2, 1}})] = -0.14;
    tc.terms[1][mono(4, {{1, 1}})] = 0.4;
    tc.terms[2][mono(4, {{1, 1}, {2, 1}})] = 0.08;
    tc.terms[2][mono(4, {{2, 1}, {3, 1}})] = -0.14;
    tc.terms[2][mono(4, {{2, 1}})] = 0.2;
    tc.terms[3][mono(4, {{2, 1}, {3, 1}})] = 0.06;
    tc.terms[3][mono(4, {{3, 1}})] = -0.42;
  } else if (tag == "lotka_volterra3") {
    expect_dim(3);
    tc.terms.resize(3);
    tc.terms[0][mono(3, {{0, 1}, {1, 1}})] = -0.6;
    tc.terms[0][mono(3, {{0, 1}})] = 0.6;
    tc.terms[1][mono(3, {{0, 1}, {1, 1}})] = 0.6;
    tc.terms[1][mono(3, {{1, 1}, {2, 1}})] = -0.7;
    tc.terms[1][mono(3, {{1, 1}})] = 0.4;
    tc.terms[2][mono(3, {{1, 1}, {2, 1}})] = 0.4;
    tc.terms[2][mono(3, {{2, 1}})] = -0.4;
  } else if (tag == "lorenz96") {
    if (d < 4) throw ShapeError("lorenz96 needs at least 4 dimensions");
    tc.terms.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t next = (i + 1) % d, prev = (i + d - 1) % d, prev2 = (i + d - 2) % d;
      tc.terms[i][mono(d, {{next, 1}, {prev, 1}})] += 1.0;
      tc.terms[i][mono(d, {{prev2, 1}, {prev, 1}})] += -1.0;
      tc.terms[i][mono(d, {{i, 1}})] += -1.0;
      tc.terms[i][mono(d, {})] += kLorenz96Forcing;
    }
  } else {
    throw ValidationError("unknown system tag '" + std::string(tag) + "'");
  }
  return tc;
}

}  // namespace ktt
