#ifndef DIRACSC_DYNAMICS_HPP
#define DIRACSC_DYNAMICS_HPP

#include <utility>
#include <vector>

#include "diracsc/dopri5.hpp"
#include "diracsc/fields.hpp"
#include "diracsc/types.hpp"

namespace diracsc {

/// pi = p - (e/c) A(x), eps = sqrt(c^2 pi^2 + m^2 c^4).
KineticFrame kinetic_frame(const PhaseState& state, const FieldConfig& config,
                           const ParticleParams& params);
KineticFrame kinetic_frame(const PhaseState& state, const EMSample& em,
                           const ParticleParams& params);

/// H_pm(x, p) = e phi(x) +- eps.
double hamiltonian(const PhaseState& state, Branch branch,
                   const FieldConfig& config, const ParticleParams& params);

/// First and second derivatives of H_pm, assembled from the field catalog's
/// closed-form derivatives. Hpx(i,j) = d2H / dp_i dx_j.
struct HamiltonianDerivs {
  double H = 0.0;
  Vec3 dHdx = Vec3::Zero();
  Vec3 dHdp = Vec3::Zero();
  Mat3 Hxx = Mat3::Zero();
  Mat3 Hpp = Mat3::Zero();
  Mat3 Hpx = Mat3::Zero();

  /// Jacobian of the Hamiltonian vector field, d(dz/dt)/dz.
  Mat6 flow_jacobian() const {
    Mat6 A;
    A.topLeftCorner<3, 3>() = Hpx;
    A.topRightCorner<3, 3>() = Hpp;
    A.bottomLeftCorner<3, 3>() = -Hxx;
    A.bottomRightCorner<3, 3>() = -Hpx.transpose();
    return A;
  }
};

HamiltonianDerivs hamiltonian_derivs(const PhaseState& state, Branch branch,
                                     const FieldConfig& config,
                                     const ParticleParams& params,
                                     bool second_order);
HamiltonianDerivs hamiltonian_derivs(const PhaseState& state, Branch branch,
                                     const EMSample& em,
                                     const ParticleParams& params,
                                     bool second_order);

/// A time-sampled integral curve of H_pm with dense output. The running
/// action integral int (p.xdot - H) dt is carried as an extra state
/// component; the 6x6 flow Jacobian J(t) = d z(t)/d z(0) is co-integrated
/// when requested.
class Trajectory {
 public:
  Trajectory() = default;

  Branch branch() const { return branch_; }
  const ParticleParams& params() const { return params_; }
  const FieldConfig& field() const { return field_; }
  bool has_jacobians() const { return with_jacobian_; }
  double tolerance() const { return tol_; }

  double t_begin() const { return sol_.t_begin; }
  double t_end() const { return sol_.t_end; }

  PhaseState initial_state() const { return state(t_begin()); }
  PhaseState final_state() const { return state(t_end()); }
  double energy() const { return energy_; }

  PhaseState state(double t) const;
  /// Hamilton principal function accumulated from t_begin to t.
  double action(double t) const;
  Mat6 jacobian(double t) const;
  KineticFrame kinetic(double t) const;
  EMSample em(double t) const;

  /// Accepted integrator steps as (t, state) pairs, endpoints included.
  std::vector<std::pair<double, PhaseState>> samples() const;
  /// Jacobian history at the accepted steps (empty unless co-integrated).
  std::vector<std::pair<double, Mat6>> jacobian_samples() const;

  /// Max |H(t)-H(0)| / |H(0)| over the accepted steps.
  double max_energy_drift() const { return max_drift_; }

  const DenseSolution& dense() const { return sol_; }

 private:
  friend Trajectory integrate_flow(const PhaseState&, Branch,
                                   const FieldConfig&, const ParticleParams&,
                                   double, double, bool);
  Branch branch_ = Branch::plus;
  ParticleParams params_;
  FieldConfig field_;
  double tol_ = 1e-10;
  bool with_jacobian_ = false;
  double energy_ = 0.0;
  double max_drift_ = 0.0;
  DenseSolution sol_;
};

/// Integrate the flow of H_pm from state0 over [0, t_final] (t_final of
/// either sign) at relative tolerance tol. Throws IntegrationError on
/// step-size underflow, carrying the last good state.
Trajectory integrate_flow(const PhaseState& state0, Branch branch,
                          const FieldConfig& config,
                          const ParticleParams& params, double t_final,
                          double tol, bool with_jacobian = false);

/// Same trajectory with the variational equations co-integrated.
Trajectory linearized_flow(const Trajectory& traj);

}  // namespace diracsc

#endif
