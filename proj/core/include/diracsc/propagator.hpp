#ifndef DIRACSC_PROPAGATOR_HPP
#define DIRACSC_PROPAGATOR_HPP

#include <vector>

#include "diracsc/dynamics.hpp"
#include "diracsc/spin.hpp"
#include "diracsc/types.hpp"

namespace diracsc {

/// Multi-start shooting configuration for the two-point boundary problem.
struct ShootingOptions {
  Vec3 p_center = Vec3::Zero();
  double extent = 2.0;   // half-width of the seed grid
  int n_per_axis = 5;
  std::vector<Vec3> extra_seeds;
  bool planar = false;   // momenta restricted to the z = 0 plane
  double position_tol = 1e-9;
  double dedup_tol = 1e-6;
  int max_iters = 30;
  double traj_tol = 1e-11;
  double caustic_rel_tol = 1e-10;
};

/// A classical orbit connecting y to x in time t on one branch, with the
/// semiclassical data attached.
struct ConnectingOrbit {
  Branch branch = Branch::plus;
  Trajectory traj;         // from y, jacobians co-integrated
  Vec3 p0 = Vec3::Zero();  // initial canonical momentum
  double residual = 0.0;   // |x(t) - x_target|
  double R = 0.0;          // Hamilton principal function
  double D = 0.0;          // Van Vleck amplitude |det dx_t/dp_0|^{-1/2}
  int morse = 0;           // conjugate points in (0, t)
  Mat2c d_holonomy = Mat2c::Identity();
  Mat42c frame_0, frame_t;  // V (branch +) or W (branch -) at the endpoints
};

/// All orbits from y to x in time t found from the seed set, deduplicated by
/// initial momentum and sorted by it. An empty list is a legitimate result
/// (classically forbidden endpoints).
std::vector<ConnectingOrbit> find_connecting_orbits(
    const Vec3& x, const Vec3& y, double t, Branch branch,
    const FieldConfig& config, const ParticleParams& params,
    const ShootingOptions& opts);

/// R = int (p.xdot - H) dt along the orbit (accumulated by the integrator).
double principal_function(const ConnectingOrbit& orbit);

/// Van Vleck amplitude and Morse index recomputed from the orbit's
/// linearized flow; throws CausticError when the endpoint is conjugate.
std::pair<double, int> van_vleck_and_morse(const ConnectingOrbit& orbit,
                                           bool planar,
                                           double caustic_rel_tol = 1e-10);

/// Count zeros of det(dx_tau/dp_0) for tau in (t_from, t_to), multiplicity
/// from the rank drop at each zero crossing.
int count_conjugate_points(const Trajectory& traj, double t_from, double t_to,
                           bool planar);

struct KernelContribution {
  Branch branch = Branch::plus;
  Vec3 p0 = Vec3::Zero();
  double R = 0.0;
  double D = 0.0;
  int morse = 0;
  Mat2c d = Mat2c::Identity();
  Mat4c term = Mat4c::Zero();  // prefactor included
};

struct KernelValue {
  Mat4c K = Mat4c::Zero();
  std::vector<KernelContribution> contributions;
};

/// Leading-order semiclassical kernel at (x, y, t), both branches summed.
/// dim = 3 in spatial mode, 2 in planar mode (prefactor (2 pi i hbar)^{-dim/2}).
KernelValue semiclassical_kernel(const Vec3& x, const Vec3& y, double t,
                                 const FieldConfig& config,
                                 const ParticleParams& params,
                                 const ShootingOptions& opts);

// ---------------------------------------------------------------------------
// Fast planar path: reduced (x, y, px, py) shot with action, abelian spin
// phase and the 4x4 reduced variational flow carried along. In planar mode
// M2 is proportional to sigma_z, so the transported d is exp(-i Lambda
// sigma_z) with Lambda = int m3 dt. Used by the orbit search and the
// time-domain trace oracle, where full trajectories would be too heavy.
// ---------------------------------------------------------------------------

struct PlanarShot {
  Eigen::Vector2d x_end, p_end;
  double action = 0.0;      // int (p.xdot - H) dt
  double spin_phase = 0.0;  // Lambda
  Eigen::Matrix2d B;        // dx_t/dp_0
  Eigen::Matrix4d J;        // reduced monodromy-type Jacobian
  int conj_count = 0;       // sign changes of det B over (0, t)
  double min_abs_detB = 0.0;
  bool ok = false;
};

PlanarShot planar_shot(const Eigen::Vector2d& x0, const Eigen::Vector2d& p0,
                       Branch branch, const FieldConfig& config,
                       const ParticleParams& params, double t, double tol,
                       bool count_conjugates);

}  // namespace diracsc

#endif
