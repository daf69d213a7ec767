#ifndef DIRACSC_SPIN_HPP
#define DIRACSC_SPIN_HPP

#include <optional>
#include <utility>
#include <vector>

#include "diracsc/dynamics.hpp"
#include "diracsc/types.hpp"

namespace diracsc {

inline const Mat2c& pauli_x() {
  static const Mat2c s = (Mat2c() << 0, 1, 1, 0).finished();
  return s;
}
inline const Mat2c& pauli_y() {
  static const Mat2c s = (Mat2c() << 0, cplx(0, -1), cplx(0, 1), 0).finished();
  return s;
}
inline const Mat2c& pauli_z() {
  static const Mat2c s = (Mat2c() << 1, 0, 0, -1).finished();
  return s;
}

/// v . sigma
Mat2c pauli_dot(const Vec3& v);

/// exp(-i (v . sigma)) in closed form (unitary, det = 1).
Mat2c su2_exp(const Vec3& v);

/// Coupling vector m with M2 = m . sigma:
/// m = -(ec/2eps) B + (ec^2 / 2eps(eps+mc^2)) (pi x E).
Vec3 coupling_vector(const KineticFrame& kin, const EMSample& em,
                     const ParticleParams& params);

/// The hermitian traceless spin coupling matrix M2.
Mat2c coupling_m2(const KineticFrame& kin, const EMSample& em,
                  const ParticleParams& params);

/// Precession vector of the classical spin equation sdot = s x Omega;
/// Omega = (ec/eps) B - (ec^2/eps(eps+mc^2)) pi x E = -2 m.
Vec3 precession_vector(const KineticFrame& kin, const EMSample& em,
                       const ParticleParams& params);

/// Hopf map SU(2) -> S^2: the spin expectation s = xi^dag sigma xi of the
/// first column xi = (u, v) of d, i.e. (2Re(u v-bar), +-2Im, |u|^2-|v|^2) up
/// to the y-orientation fixed so the precession equation holds exactly.
/// Throws DomainError if d is not in SU(2) within tolerance.
Vec3 hopf(const Mat2c& d, double tol = 1e-8);

/// Polar angle of hopf(d) and the azimuth of the polar parametrization
/// u = cos(theta/2) e^{i eta}, v = sin(theta/2) e^{i(eta - phi)}; this phi
/// orientation makes the monopole-gauge phase decomposition hold as written.
double hopf_theta(const Mat2c& d);
double hopf_phi(const Mat2c& d);

/// Re tr d = 2 cos(theta/2) cos(eta): the spin weight of a periodic orbit.
double spin_trace_factor(const Mat2c& d);

enum class Gauge { north, south };
inline const char* gauge_label(Gauge g) { return g == Gauge::north ? "north" : "south"; }

struct SpinFrame {
  double t = 0.0;
  Mat2c d = Mat2c::Identity();
  Vec3 s = Vec3(0, 0, 1);
  double theta = 0.0;
  double phi_angle = 0.0;  // unwrapped azimuth
  double eta = 0.0;        // unwrapped phase of the active gauge
  Gauge gauge = Gauge::north;
};

struct GaugeSwitchRecord {
  double t = 0.0;
  Gauge from = Gauge::north;
  Gauge to = Gauge::south;
  double phase_before = 0.0;
  double phase_after = 0.0;  // matched via eta - lambda = phi
  double phi = 0.0;
  bool forced = false;  // pole proximity rather than hysteresis
};

struct SpinHistory {
  std::vector<SpinFrame> frames;
  std::vector<GaugeSwitchRecord> switches;
  // accumulated at substep resolution over the whole transport
  double eta_dyn = 0.0;      // (1/2) int s . Omega dt
  double eta_geo = 0.0;      // monopole-connection integral, gauge-appropriate
  double eta_track = 0.0;    // sum of in-gauge phase increments
  double max_unitarity_defect = 0.0;

  const SpinFrame& front() const { return frames.front(); }
  const SpinFrame& back() const { return frames.back(); }
};

struct SpinTransportOptions {
  /// Substep cap; the step is further reduced so the rotation per step stays
  /// small (midpoint-exponential scheme, second order, exactly unitary).
  double dt_max = 1e-4;
  double max_phase_per_step = 0.02;
  /// Keep roughly this many frames (phase tracking still runs per substep).
  std::size_t max_stored_frames = 20000;
  Mat2c d0 = Mat2c::Identity();
  std::optional<Gauge> initial_gauge;  // default: hemisphere of s(0)
  double pole_threshold = 1e-6;
  double hysteresis = 0.1;
};

/// Transport d along the trajectory by ddot + i M2 d = 0, d(0) = d0,
/// stepping with per-substep exact exponentials of the midpoint M2.
SpinHistory transport_spin(const Trajectory& traj,
                           const SpinTransportOptions& opts = {});

/// Phase track extracted from an externally supplied d(t) series (phase
/// increments per sample must stay below pi/2).
SpinHistory extract_eta(const std::vector<std::pair<double, Mat2c>>& frames,
                        const SpinTransportOptions& opts = {});

/// Classical spin precession sdot = s x Omega(t) along the trajectory.
struct PrecessionResult {
  DenseSolution sol;
  Vec3 at(double t) const {
    Eigen::VectorXd y = sol.eval(t);
    Vec3 s(y[0], y[1], y[2]);
    const double n = s.norm();
    return n > 0 ? Vec3(s / n) : s;
  }
};

PrecessionResult precess_spin(const Trajectory& traj, const Vec3& s0,
                              double tol = 1e-12);

struct PhaseDecomposition {
  double eta_dyn = 0.0;
  double eta_geo = 0.0;
  double eta_extracted = 0.0;  // sum of in-gauge increments
  /// (eta_dyn + eta_geo - eta_extracted) reduced to (-pi, pi]
  double residual_mod_2pi = 0.0;
};

/// Decomposition of the transported phase into dynamical and geometric
/// parts; the identity is accumulated during transport, this just packages
/// it with the mod-2pi residual.
PhaseDecomposition phase_decomposition(const SpinHistory& history);

/// Positive/negative-energy eigenvector frames of the symbol matrix.
struct EigenFrame {
  Mat42c V;  // branch +
  Mat42c W;  // branch -
};

EigenFrame eigenframe(const KineticFrame& kin, const ParticleParams& params);

/// 4x4 Dirac symbol matrix  c alpha.pi + beta m c^2 (no potential shift).
Mat4c dirac_symbol(const KineticFrame& kin, const ParticleParams& params);

}  // namespace diracsc

#endif
