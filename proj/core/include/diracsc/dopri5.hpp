#ifndef DIRACSC_DOPRI5_HPP
#define DIRACSC_DOPRI5_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace diracsc {

/// One accepted step of the 5(4) pair together with the coefficients of the
/// quartic interpolant, so a trajectory can be evaluated anywhere after the
/// fact. cont columns follow Hairer's contd5 layout.
struct DenseStep {
  double t0 = 0.0;
  double h = 0.0;
  Eigen::Matrix<double, Eigen::Dynamic, 5> cont;

  Eigen::VectorXd eval(double t) const {
    const double theta = (t - t0) / h;
    const double theta1 = 1.0 - theta;
    return cont.col(0) +
           theta * (cont.col(1) +
                    theta1 * (cont.col(2) +
                              theta * (cont.col(3) + theta1 * cont.col(4))));
  }
};

struct DenseSolution {
  std::vector<DenseStep> steps;
  double t_begin = 0.0;
  double t_end = 0.0;

  bool forward() const { return t_end >= t_begin; }

  bool contains(double t) const {
    const double lo = std::min(t_begin, t_end), hi = std::max(t_begin, t_end);
    const double slack = 1e-12 * (1.0 + hi - lo);
    return t >= lo - slack && t <= hi + slack;
  }

  /// Evaluate the interpolant; t is clamped to the covered span.
  Eigen::VectorXd eval(double t) const {
    // binary search over step start times (monotone in integration direction)
    std::size_t lo = 0, hi = steps.size() - 1;
    const bool fwd = forward();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      const DenseStep& s = steps[mid];
      const double tend = s.t0 + s.h;
      if (fwd ? (t < s.t0) : (t > s.t0)) {
        hi = mid == 0 ? 0 : mid - 1;
      } else if (fwd ? (t > tend) : (t < tend)) {
        lo = mid + 1;
      } else {
        lo = hi = mid;
      }
    }
    return steps[lo].eval(t);
  }
};

struct IntegratorOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_init = 0.0;     // 0: choose automatically
  double h_max = 0.0;      // 0: |t1 - t0|
  std::size_t max_steps = 50'000'000;
};

struct StepFailure {
  bool failed = false;
  double t_last = 0.0;
  Eigen::VectorXd y_last;
  std::string reason;
};

namespace dopri5_detail {
// Dormand-Prince coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0,
                 d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0,
                 d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0,
                 d7 = 69997945.0 / 29380423.0;
}  // namespace dopri5_detail

/// Adaptive Dormand-Prince 5(4) with 4th-order dense output kept for every
/// accepted step. RHS signature: f(t, y, dydt). On step-size underflow the
/// failure struct carries the last good (t, y); the caller decides whether
/// that is an exception.
template <class RHS>
DenseSolution integrate_dopri5(RHS&& f, const Eigen::VectorXd& y_start,
                               double t0, double t1,
                               const IntegratorOptions& opt,
                               StepFailure* failure = nullptr) {
  using namespace dopri5_detail;
  using Vec = Eigen::VectorXd;

  DenseSolution sol;
  sol.t_begin = t0;
  sol.t_end = t1;
  if (failure) *failure = StepFailure{};

  const Eigen::Index n = y_start.size();
  const double dir = (t1 >= t0) ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const double hmax = opt.h_max > 0.0 ? opt.h_max : span;

  Vec y = y_start, ynew(n), ysti(n), err(n);
  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);

  double t = t0;
  f(t, y, k1);

  // initial step size: crude two-sample heuristic on f scale
  double h;
  if (opt.h_init > 0.0) {
    h = std::min(opt.h_init, hmax);
  } else {
    const double sc = opt.atol + opt.rtol * y.cwiseAbs().maxCoeff();
    const double d1n = k1.cwiseAbs().maxCoeff();
    h = (d1n > 1e-300) ? 0.01 * sc / d1n : 1e-6 * span;
    h = std::clamp(h, 1e-12 * span, 0.1 * span);
    if (h <= 0.0) h = 1e-6;
  }

  if (span == 0.0) {
    DenseStep st;
    st.t0 = t0;
    st.h = dir * std::numeric_limits<double>::min();
    st.cont.resize(n, 5);
    st.cont.setZero();
    st.cont.col(0) = y;
    sol.steps.push_back(std::move(st));
    return sol;
  }

  double err_prev = 1e-4;
  std::size_t nsteps = 0;
  bool last = false;

  while (!last) {
    if (++nsteps > opt.max_steps) {
      if (failure) *failure = {true, t, y, "max step count exceeded"};
      sol.t_end = t;
      return sol;
    }
    if (std::abs(h) < 16.0 * std::numeric_limits<double>::epsilon() *
                          std::max(std::abs(t), 1.0)) {
      if (failure) *failure = {true, t, y, "step size underflow"};
      sol.t_end = t;
      return sol;
    }
    h = std::min(std::abs(h), hmax);
    if (std::abs(t + dir * h - t0) >= span) {
      h = std::abs(t1 - t);
      last = true;
    }
    const double hs = dir * h;

    ysti = y + hs * (a21 * k1);
    f(t + c2 * hs, ysti, k2);
    ysti = y + hs * (a31 * k1 + a32 * k2);
    f(t + c3 * hs, ysti, k3);
    ysti = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * hs, ysti, k4);
    ysti = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * hs, ysti, k5);
    ysti = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + hs, ysti, k6);
    ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f(t + hs, ynew, k7);

    err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double errnorm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc =
          opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      const double q = err[i] / sc;
      errnorm += q * q;
    }
    errnorm = std::sqrt(errnorm / static_cast<double>(n));

    if (!std::isfinite(errnorm) || !ynew.allFinite()) {
      h *= 0.25;
      last = false;
      continue;
    }

    if (errnorm <= 1.0) {
      DenseStep st;
      st.t0 = t;
      st.h = hs;
      st.cont.resize(n, 5);
      st.cont.col(0) = y;
      st.cont.col(1) = ynew - y;                       // ydiff
      st.cont.col(2) = hs * k1 - st.cont.col(1);       // bspl
      st.cont.col(3) = st.cont.col(1) - hs * k7 - st.cont.col(2);
      st.cont.col(4) =
          hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      sol.steps.push_back(std::move(st));

      t += hs;
      y.swap(ynew);
      k1.swap(k7);  // FSAL

      const double e = std::max(errnorm, 1e-10);
      double fac = 0.9 * std::pow(e, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
      fac = std::clamp(fac, 0.2, 5.0);
      h = std::abs(h) * fac;
      err_prev = e;
    } else {
      const double fac = std::max(0.1, 0.9 * std::pow(errnorm, -0.2));
      h = std::abs(h) * fac;
      last = false;
    }
  }
  sol.t_end = t;
  return sol;
}

/// Locate a root of g(eval(t)) in [ta, tb] on a dense solution by bisection.
/// Assumes g changes sign across the bracket.
inline double refine_root(const DenseSolution& sol,
                          const std::function<double(double, const Eigen::VectorXd&)>& g,
                          double ta, double tb, double ttol = 0.0) {
  double ga = g(ta, sol.eval(ta));
  double gb = g(tb, sol.eval(tb));
  if (ga == 0.0) return ta;
  if (gb == 0.0) return tb;
  if (ttol <= 0.0) ttol = 1e-14 * (1.0 + std::abs(tb));
  // bisection with a secant refinement pass at the end
  for (int it = 0; it < 200 && std::abs(tb - ta) > ttol; ++it) {
    const double tm = 0.5 * (ta + tb);
    const double gm = g(tm, sol.eval(tm));
    if ((ga < 0.0) == (gm < 0.0)) {
      ta = tm;
      ga = gm;
    } else {
      tb = tm;
      gb = gm;
    }
  }
  const double denom = gb - ga;
  if (denom != 0.0) {
    const double ts = ta - ga * (tb - ta) / denom;
    if (ts >= std::min(ta, tb) && ts <= std::max(ta, tb)) return ts;
  }
  return 0.5 * (ta + tb);
}

}  // namespace diracsc

#endif
