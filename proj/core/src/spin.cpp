#include "diracsc/spin.hpp"

#include <algorithm>
#include <cmath>

#include "diracsc/errors.hpp"

namespace diracsc {

Mat2c pauli_dot(const Vec3& v) {
  Mat2c m;
  m << v.z(), cplx(v.x(), -v.y()), cplx(v.x(), v.y()), -v.z();
  return m;
}

Mat2c su2_exp(const Vec3& v) {
  const double a = v.norm();
  if (a < 1e-150) {
    Mat2c m = Mat2c::Identity();
    m -= cplx(0, 1) * pauli_dot(v);  // first order; exact to roundoff here
    return m;
  }
  const double ca = std::cos(a);
  const double sa = std::sin(a) / a;
  Mat2c m = ca * Mat2c::Identity();
  m -= cplx(0, 1) * sa * pauli_dot(v);
  return m;
}

Vec3 coupling_vector(const KineticFrame& kin, const EMSample& em,
                     const ParticleParams& params) {
  const double c = params.c;
  const double mc2 = params.m * c * c;
  const double pref_b = -params.e * c / (2.0 * kin.eps);
  const double pref_so = params.e * c * c / (2.0 * kin.eps * (kin.eps + mc2));
  return pref_b * em.B + pref_so * kin.pi.cross(em.E);
}

Mat2c coupling_m2(const KineticFrame& kin, const EMSample& em,
                  const ParticleParams& params) {
  return pauli_dot(coupling_vector(kin, em, params));
}

Vec3 precession_vector(const KineticFrame& kin, const EMSample& em,
                       const ParticleParams& params) {
  return -2.0 * coupling_vector(kin, em, params);
}

namespace {

double su2_defect(const Mat2c& d) {
  const double unit = (d.adjoint() * d - Mat2c::Identity()).cwiseAbs().maxCoeff();
  const double det = std::abs(d.determinant() - cplx(1, 0));
  return std::max(unit, det);
}

struct HopfData {
  Vec3 s;
  double theta;
  double abs_u, abs_v;
  double arg_u, arg_v;
  double sin_theta;
  double az;  // azimuth in the parametrization orientation, in (-pi, pi]
};

HopfData hopf_data(const Mat2c& d) {
  const cplx u = d(0, 0), v = d(1, 0);
  const cplx w = std::conj(u) * v;  // expectation-value convention
  HopfData h;
  h.s = Vec3(2.0 * w.real(), 2.0 * w.imag(), std::norm(u) - std::norm(v));
  h.abs_u = std::abs(u);
  h.abs_v = std::abs(v);
  h.arg_u = std::arg(u);
  h.arg_v = std::arg(v);
  h.theta = std::acos(std::clamp(h.s.z(), -1.0, 1.0));
  h.sin_theta = std::hypot(h.s.x(), h.s.y());
  // phi of u = cos(t/2) e^{i eta}, v = sin(t/2) e^{i(eta - phi)}
  h.az = (h.sin_theta > 0.0) ? std::atan2(-h.s.y(), h.s.x()) : 0.0;
  return h;
}

}  // namespace

Vec3 hopf(const Mat2c& d, double tol) {
  if (su2_defect(d) > tol)
    throw DomainError("hopf: matrix is not in SU(2) within tolerance");
  return hopf_data(d).s;
}

double hopf_theta(const Mat2c& d) { return hopf_data(d).theta; }
double hopf_phi(const Mat2c& d) { return hopf_data(d).az; }

double spin_trace_factor(const Mat2c& d) { return d.trace().real(); }

namespace {

double wrap_pi(double a) {
  return std::remainder(a, 2.0 * M_PI);
}

/// Incremental gauge-aware phase/azimuth unwrapping of a d(t) stream.
class PhaseTracker {
 public:
  PhaseTracker(const SpinTransportOptions& opts) : opts_(opts) {}

  /// Feed the next sample. Returns the frame; accumulates the geometric
  /// integral with the gauge that was active over the preceding interval.
  SpinFrame step(double t, const Mat2c& d, double* geo_increment) {
    const HopfData h = hopf_data(d);
    SpinFrame f;
    f.t = t;
    f.d = d;
    f.s = h.s;
    f.theta = h.theta;

    if (!started_) {
      gauge_ = opts_.initial_gauge.value_or(h.s.z() >= 0.0 ? Gauge::north
                                                           : Gauge::south);
      phi_ = h.az;
      phase_ = (gauge_ == Gauge::north) ? h.arg_u : h.arg_v;
      started_ = true;
      check_pole(h, t);
      if (geo_increment) *geo_increment = 0.0;
      f.phi_angle = phi_;
      f.eta = phase_;
      f.gauge = gauge_;
      prev_theta_ = h.theta;
      return f;
    }

    // unwrap azimuth (held through the poles, where it is undefined)
    double dphi = 0.0;
    if (h.sin_theta > 1e-12) {
      dphi = wrap_pi(h.az - phi_);
      phi_ += dphi;
    }

    // geometric increment over [prev, t] in the gauge active during it
    const double cth_avg = 0.5 * (std::cos(prev_theta_) + std::cos(h.theta));
    const double geo = (gauge_ == Gauge::north)
                           ? 0.5 * (1.0 - cth_avg) * dphi
                           : -0.5 * (1.0 + cth_avg) * dphi;
    if (geo_increment) *geo_increment = geo;

    // unwrap the active-gauge phase
    const double raw = (gauge_ == Gauge::north) ? h.arg_u : h.arg_v;
    phase_ += wrap_pi(raw - phase_);

    // gauge machine: hysteresis band, forced switch at pole proximity
    maybe_switch(h, t);

    f.phi_angle = phi_;
    f.eta = phase_;
    f.gauge = gauge_;
    prev_theta_ = h.theta;
    return f;
  }

  Gauge gauge() const { return gauge_; }
  std::vector<GaugeSwitchRecord>& switches() { return switches_; }

 private:
  void check_pole(const HopfData& h, double t) {
    const double amp = (gauge_ == Gauge::north) ? h.abs_u : h.abs_v;
    if (amp < opts_.pole_threshold) {
      const double other = (gauge_ == Gauge::north) ? h.abs_v : h.abs_u;
      if (other < opts_.pole_threshold)
        throw GaugePoleError("extract_eta: both gauge amplitudes vanish at t=" +
                             std::to_string(t));
      do_switch(h, t, true);
    }
  }

  void maybe_switch(const HopfData& h, double t) {
    const double cth = h.s.z();
    if (gauge_ == Gauge::north && cth < -opts_.hysteresis) {
      do_switch(h, t, false);
    } else if (gauge_ == Gauge::south && cth > opts_.hysteresis) {
      do_switch(h, t, false);
    } else {
      check_pole(h, t);
    }
  }

  void do_switch(const HopfData& h, double t, bool forced) {
    GaugeSwitchRecord rec;
    rec.t = t;
    rec.from = gauge_;
    rec.phase_before = phase_;
    rec.phi = phi_;
    rec.forced = forced;
    if (gauge_ == Gauge::north) {
      // lambda = eta - phi
      phase_ -= phi_;
      gauge_ = Gauge::south;
      // land on the branch of arg(v) nearest the matched value
      phase_ += wrap_pi(h.arg_v - phase_);
    } else {
      phase_ += phi_;
      gauge_ = Gauge::north;
      phase_ += wrap_pi(h.arg_u - phase_);
    }
    rec.to = gauge_;
    rec.phase_after = phase_;
    switches_.push_back(rec);
  }

  SpinTransportOptions opts_;
  bool started_ = false;
  Gauge gauge_ = Gauge::north;
  double phase_ = 0.0;
  double phi_ = 0.0;
  double prev_theta_ = 0.0;
  std::vector<GaugeSwitchRecord> switches_;
};

}  // namespace

SpinHistory transport_spin(const Trajectory& traj,
                           const SpinTransportOptions& opts) {
  const double t0 = traj.t_begin();
  const double t1 = traj.t_end();
  const double span = t1 - t0;
  const double aspan = std::abs(span);

  // substep count: dt cap plus a rotation-angle cap from sampled |m|
  double m_max = 0.0;
  for (int i = 0; i <= 32; ++i) {
    const double t = t0 + span * (i / 32.0);
    const PhaseState z = traj.state(t);
    const EMSample em = eval_em(traj.field(), z.x);
    m_max = std::max(m_max,
                     coupling_vector(kinetic_frame(z, em, traj.params()),
                                     em, traj.params()).norm());
  }
  std::size_t n = 1;
  if (aspan > 0.0) {
    n = static_cast<std::size_t>(std::ceil(aspan / opts.dt_max));
    if (m_max > 0.0)
      n = std::max(n, static_cast<std::size_t>(
                          std::ceil(aspan * m_max / opts.max_phase_per_step)));
    n = std::max<std::size_t>(n, 8);
  }
  const double dt = span / static_cast<double>(n);
  const std::size_t stride = std::max<std::size_t>(1, n / opts.max_stored_frames);

  SpinHistory hist;
  PhaseTracker tracker(opts);
  Mat2c d = opts.d0;

  auto omega_at = [&](double t, const PhaseState& z) {
    const EMSample em = eval_em(traj.field(), z.x);
    return precession_vector(kinetic_frame(z, em, traj.params()), em,
                             traj.params());
  };

  PhaseState z = traj.state(t0);
  Vec3 omega_prev = omega_at(t0, z);
  SpinFrame f = tracker.step(t0, d, nullptr);
  hist.frames.push_back(f);
  Vec3 s_prev = f.s;
  double track_start = f.eta;

  for (std::size_t i = 0; i < n; ++i) {
    const double ta = t0 + dt * static_cast<double>(i);
    const double tb = (i + 1 == n) ? t1 : ta + dt;
    const double tm = 0.5 * (ta + tb);

    const PhaseState zm = traj.state(tm);
    const EMSample em_m = eval_em(traj.field(), zm.x);
    const Vec3 m_mid =
        coupling_vector(kinetic_frame(zm, em_m, traj.params()), em_m,
                        traj.params());
    d = su2_exp(m_mid * (tb - ta)) * d;  // exp(-i M2 dt) d, exactly unitary

    double geo = 0.0;
    f = tracker.step(tb, d, &geo);
    hist.eta_geo += geo;

    const PhaseState zb = traj.state(tb);
    const Vec3 omega_b = omega_at(tb, zb);
    hist.eta_dyn += 0.25 * (s_prev.dot(omega_prev) + f.s.dot(omega_b)) * (tb - ta);
    omega_prev = omega_b;
    s_prev = f.s;

    hist.max_unitarity_defect = std::max(hist.max_unitarity_defect, su2_defect(d));

    if ((i + 1) % stride == 0 || i + 1 == n) hist.frames.push_back(f);
  }

  // in-gauge increments: total phase change minus the rebase jumps
  hist.eta_track = f.eta - track_start;
  for (const GaugeSwitchRecord& sw : tracker.switches())
    hist.eta_track -= (sw.phase_after - sw.phase_before);
  hist.switches = std::move(tracker.switches());
  return hist;
}

SpinHistory extract_eta(const std::vector<std::pair<double, Mat2c>>& frames,
                        const SpinTransportOptions& opts) {
  SpinHistory hist;
  if (frames.empty()) return hist;
  PhaseTracker tracker(opts);
  double track_start = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    double geo = 0.0;
    SpinFrame f = tracker.step(frames[i].first, frames[i].second,
                               i == 0 ? nullptr : &geo);
    hist.eta_geo += geo;
    hist.max_unitarity_defect =
        std::max(hist.max_unitarity_defect, su2_defect(frames[i].second));
    if (i == 0) track_start = f.eta;
    hist.frames.push_back(f);
  }
  hist.eta_track = hist.frames.back().eta - track_start;
  for (const GaugeSwitchRecord& sw : tracker.switches())
    hist.eta_track -= (sw.phase_after - sw.phase_before);
  hist.switches = std::move(tracker.switches());
  return hist;
}

PrecessionResult precess_spin(const Trajectory& traj, const Vec3& s0,
                              double tol) {
  if (std::abs(s0.norm() - 1.0) > 1e-8)
    throw DomainError("precess_spin: |s0| must be 1");

  auto rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const PhaseState z = traj.state(t);
    const EMSample em = eval_em(traj.field(), z.x);
    const Vec3 omega = precession_vector(kinetic_frame(z, em, traj.params()),
                                         em, traj.params());
    const Vec3 s(y[0], y[1], y[2]);
    dy.head<3>() = s.cross(omega);
  };

  IntegratorOptions opt;
  opt.rtol = tol;
  opt.atol = tol;
  StepFailure fail;
  Eigen::VectorXd y0 = s0;
  PrecessionResult res;
  res.sol = integrate_dopri5(rhs, y0, traj.t_begin(), traj.t_end(), opt, &fail);
  if (fail.failed)
    throw IntegrationError("precess_spin: " + fail.reason, fail.t_last,
                           traj.state(fail.t_last));
  return res;
}

PhaseDecomposition phase_decomposition(const SpinHistory& history) {
  PhaseDecomposition out;
  out.eta_dyn = history.eta_dyn;
  out.eta_geo = history.eta_geo;
  out.eta_extracted = history.eta_track;
  out.residual_mod_2pi =
      wrap_pi(out.eta_dyn + out.eta_geo - out.eta_extracted);
  return out;
}

EigenFrame eigenframe(const KineticFrame& kin, const ParticleParams& params) {
  const double mc2 = params.m * params.c * params.c;
  if (!(kin.eps + mc2 > 0.0))
    throw DomainError("eigenframe: eps + mc^2 must be positive");
  const double nrm = 1.0 / std::sqrt(2.0 * kin.eps * (kin.eps + mc2));
  const Mat2c sp = params.c * pauli_dot(kin.pi);

  EigenFrame f;
  f.V.topRows<2>() = nrm * (kin.eps + mc2) * Mat2c::Identity();
  f.V.bottomRows<2>() = nrm * sp;
  f.W.topRows<2>() = -nrm * sp;
  f.W.bottomRows<2>() = nrm * (kin.eps + mc2) * Mat2c::Identity();
  return f;
}

Mat4c dirac_symbol(const KineticFrame& kin, const ParticleParams& params) {
  const double mc2 = params.m * params.c * params.c;
  const Mat2c sp = params.c * pauli_dot(kin.pi);
  Mat4c h = Mat4c::Zero();
  h.topRightCorner<2, 2>() = sp;
  h.bottomLeftCorner<2, 2>() = sp;
  h.topLeftCorner<2, 2>() = mc2 * Mat2c::Identity();
  h.bottomRightCorner<2, 2>() = -mc2 * Mat2c::Identity();
  return h;
}

}  // namespace diracsc
