#include "diracsc/dynamics.hpp"

#include <cmath>

#include "diracsc/errors.hpp"

namespace diracsc {

namespace {
// State layout: y[0..2] = x, y[3..5] = p, y[6] = action accumulator,
// y[7..42] = J column-major when the variational equations ride along.
constexpr int kBase = 7;
constexpr int kFull = kBase + 36;
}  // namespace

KineticFrame kinetic_frame(const PhaseState& state, const EMSample& em,
                           const ParticleParams& params) {
  KineticFrame kf;
  kf.pi = state.p - (params.e / params.c) * em.A;
  const double c2 = params.c * params.c;
  const double mc2 = params.m * c2;
  kf.eps = std::sqrt(c2 * kf.pi.squaredNorm() + mc2 * mc2);
  return kf;
}

KineticFrame kinetic_frame(const PhaseState& state, const FieldConfig& config,
                           const ParticleParams& params) {
  return kinetic_frame(state, eval_em(config, state.x), params);
}

double hamiltonian(const PhaseState& state, Branch branch,
                   const FieldConfig& config, const ParticleParams& params) {
  const EMSample em = eval_em(config, state.x);
  const KineticFrame kf = kinetic_frame(state, em, params);
  return params.e * em.phi + branch_sign(branch) * kf.eps;
}

HamiltonianDerivs hamiltonian_derivs(const PhaseState& state, Branch branch,
                                     const FieldConfig& config,
                                     const ParticleParams& params,
                                     bool second_order) {
  return hamiltonian_derivs(state, branch, eval_em(config, state.x), params,
                            second_order);
}

HamiltonianDerivs hamiltonian_derivs(const PhaseState& state, Branch branch,
                                     const EMSample& em,
                                     const ParticleParams& params,
                                     bool second_order) {
  const KineticFrame kf = kinetic_frame(state, em, params);
  const double sgn = branch_sign(branch);
  const double c2 = params.c * params.c;
  const double inv_eps = 1.0 / kf.eps;

  HamiltonianDerivs d;
  d.H = params.e * em.phi + sgn * kf.eps;
  d.dHdp = sgn * c2 * inv_eps * kf.pi;

  // P(i,k) = d pi_i / d x_k
  const Mat3 P = -(params.e / params.c) * em.gradA;
  const Vec3 deps_dx = c2 * inv_eps * (P.transpose() * kf.pi);
  d.dHdx = params.e * em.gradPhi + sgn * deps_dx;

  if (second_order) {
    // G = d2 eps / d pi2 = (c^2/eps) (I - c^2 pi pi^T / eps^2)
    const Mat3 G =
        c2 * inv_eps *
        (Mat3::Identity() - (c2 * inv_eps * inv_eps) * (kf.pi * kf.pi.transpose()));
    d.Hpp = sgn * G;
    d.Hpx = sgn * (G * P);
    Mat3 Q = Mat3::Zero();
    for (int k = 0; k < 3; ++k) {
      const double w = -(params.e / params.c) * c2 * inv_eps * kf.pi[k];
      if (w != 0.0) Q += w * em.hessA[k];
    }
    d.Hxx = params.e * em.hessPhi + sgn * (P.transpose() * G * P + Q);
  }
  return d;
}

namespace {

struct FlowRHS {
  Branch branch;
  const FieldConfig* config;
  const ParticleParams* params;
  bool with_jacobian;

  void operator()(double /*t*/, const Eigen::VectorXd& y,
                  Eigen::VectorXd& dy) const {
    PhaseState z{y.segment<3>(0), y.segment<3>(3)};
    const HamiltonianDerivs d =
        hamiltonian_derivs(z, branch, *config, *params, with_jacobian);
    dy.segment<3>(0) = d.dHdp;
    dy.segment<3>(3) = -d.dHdx;
    dy[6] = z.p.dot(d.dHdp) - d.H;
    if (with_jacobian) {
      const Mat6 A = d.flow_jacobian();
      Eigen::Map<const Mat6> J(y.data() + kBase);
      Eigen::Map<Mat6> dJ(dy.data() + kBase);
      dJ = A * J;
    }
  }
};

}  // namespace

Trajectory integrate_flow(const PhaseState& state0, Branch branch,
                          const FieldConfig& config,
                          const ParticleParams& params, double t_final,
                          double tol, bool with_jacobian) {
  if (!(tol > 0.0)) throw std::invalid_argument("integrate_flow: tol must be > 0");
  if (!std::isfinite(t_final))
    throw std::invalid_argument("integrate_flow: t_final must be finite");
  if (!state0.finite()) throw DomainError("integrate_flow: non-finite state");

  const int n = with_jacobian ? kFull : kBase;
  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(n);
  y0.segment<3>(0) = state0.x;
  y0.segment<3>(3) = state0.p;
  if (with_jacobian)
    Eigen::Map<Mat6>(y0.data() + kBase) = Mat6::Identity();

  FlowRHS rhs{branch, &config, &params, with_jacobian};
  IntegratorOptions opt;
  opt.rtol = tol;
  opt.atol = tol * 1e-2;

  StepFailure fail;
  DenseSolution sol = integrate_dopri5(rhs, y0, 0.0, t_final, opt, &fail);
  if (fail.failed) {
    PhaseState last{fail.y_last.segment<3>(0), fail.y_last.segment<3>(3)};
    throw IntegrationError("integrate_flow: " + fail.reason, fail.t_last, last);
  }

  Trajectory traj;
  traj.branch_ = branch;
  traj.params_ = params;
  traj.field_ = config;
  traj.tol_ = tol;
  traj.with_jacobian_ = with_jacobian;
  traj.sol_ = std::move(sol);
  traj.energy_ = hamiltonian(state0, branch, config, params);

  const double escale = std::abs(traj.energy_) > 0 ? std::abs(traj.energy_) : 1.0;
  double drift = 0.0;
  for (const DenseStep& st : traj.sol_.steps) {
    PhaseState z{st.cont.col(0).segment<3>(0), st.cont.col(0).segment<3>(3)};
    drift = std::max(drift,
                     std::abs(hamiltonian(z, branch, config, params) - traj.energy_));
  }
  {
    PhaseState z = traj.final_state();
    drift = std::max(drift,
                     std::abs(hamiltonian(z, branch, config, params) - traj.energy_));
  }
  traj.max_drift_ = drift / escale;
  return traj;
}

Trajectory linearized_flow(const Trajectory& traj) {
  if (traj.has_jacobians()) return traj;
  return integrate_flow(traj.initial_state(), traj.branch(), traj.field(),
                        traj.params(), traj.t_end(), traj.tolerance(), true);
}

PhaseState Trajectory::state(double t) const {
  const Eigen::VectorXd y = sol_.eval(t);
  return {y.segment<3>(0), y.segment<3>(3)};
}

double Trajectory::action(double t) const { return sol_.eval(t)[6]; }

Mat6 Trajectory::jacobian(double t) const {
  if (!with_jacobian_)
    throw std::logic_error("Trajectory: jacobians were not co-integrated");
  const Eigen::VectorXd y = sol_.eval(t);
  return Eigen::Map<const Mat6>(y.data() + kBase);
}

KineticFrame Trajectory::kinetic(double t) const {
  return kinetic_frame(state(t), field_, params_);
}

EMSample Trajectory::em(double t) const {
  return eval_em(field_, state(t).x);
}

std::vector<std::pair<double, PhaseState>> Trajectory::samples() const {
  std::vector<std::pair<double, PhaseState>> out;
  out.reserve(sol_.steps.size() + 1);
  for (const DenseStep& st : sol_.steps) {
    out.emplace_back(st.t0, PhaseState{st.cont.col(0).segment<3>(0),
                                       st.cont.col(0).segment<3>(3)});
  }
  out.emplace_back(t_end(), final_state());
  return out;
}

std::vector<std::pair<double, Mat6>> Trajectory::jacobian_samples() const {
  std::vector<std::pair<double, Mat6>> out;
  if (!with_jacobian_) return out;
  out.reserve(sol_.steps.size() + 1);
  for (const DenseStep& st : sol_.steps) {
    Eigen::VectorXd y = st.cont.col(0);
    out.emplace_back(st.t0, Eigen::Map<const Mat6>(y.data() + kBase));
  }
  out.emplace_back(t_end(), jacobian(t_end()));
  return out;
}

}  // namespace diracsc
