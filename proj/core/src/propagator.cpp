#include "diracsc/propagator.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "diracsc/errors.hpp"

namespace diracsc {

namespace {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;

// Planar reduced state: [x, y, px, py, R, Lambda, J(16 col-major)].
constexpr int kPlanarBase = 6;
constexpr int kPlanarFull = kPlanarBase + 16;

struct PlanarRHS {
  Branch branch;
  const FieldConfig* config;
  const ParticleParams* params;

  void operator()(double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) const {
    PhaseState z;
    z.x = Vec3(y[0], y[1], 0.0);
    z.p = Vec3(y[2], y[3], 0.0);
    const EMSample em = eval_em(*config, z.x);
    const HamiltonianDerivs d = hamiltonian_derivs(z, branch, em, *params, true);
    dy[0] = d.dHdp[0];
    dy[1] = d.dHdp[1];
    dy[2] = -d.dHdx[0];
    dy[3] = -d.dHdx[1];
    dy[4] = z.p.dot(d.dHdp) - d.H;
    dy[5] = coupling_vector(kinetic_frame(z, em, *params), em, *params).z();

    Mat4 A;
    A.topLeftCorner<2, 2>() = d.Hpx.topLeftCorner<2, 2>();
    A.topRightCorner<2, 2>() = d.Hpp.topLeftCorner<2, 2>();
    A.bottomLeftCorner<2, 2>() = -d.Hxx.topLeftCorner<2, 2>();
    A.bottomRightCorner<2, 2>() = -d.Hpx.topLeftCorner<2, 2>().transpose();
    Eigen::Map<const Mat4> J(y.data() + kPlanarBase);
    Eigen::Map<Mat4> dJ(dy.data() + kPlanarBase);
    dJ = A * J;
  }
};

Mat2 planar_B(const Eigen::VectorXd& y) {
  Mat2 B;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) B(i, j) = y[kPlanarBase + (2 + j) * 4 + i];
  return B;
}

/// Count zeros of det B(tau) over the dense solution, tau in (ramp, t],
/// with multiplicity taken from the rank drop of B at each refined zero.
/// Near tau = 0, B ~ tau * Hpp block so det > 0 on both branches.
template <class BlockFn>
int scan_conjugates(const DenseSolution& sol, double t_total, BlockFn block,
                    double* min_abs_det) {
  const double ramp = 1e-9 * std::abs(t_total);
  auto det_at = [&](double t) { return block(sol.eval(t)).determinant(); };

  std::vector<double> ts, dets;
  for (const DenseStep& st : sol.steps) {
    for (int q = 1; q <= 4; ++q) {
      const double t = st.t0 + st.h * (q / 4.0);
      if (std::abs(t) <= ramp) continue;
      ts.push_back(t);
      dets.push_back(det_at(t));
    }
  }
  if (ts.empty()) {
    if (min_abs_det) *min_abs_det = 0.0;
    return 0;
  }

  double mx = 0.0, mn = std::numeric_limits<double>::max();
  for (double d : dets) {
    mx = std::max(mx, std::abs(d));
    mn = std::min(mn, std::abs(d));
  }
  if (min_abs_det) *min_abs_det = mn;

  auto multiplicity = [&](double t_zero) {
    const Eigen::MatrixXd B = block(sol.eval(t_zero));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
    const auto& sv = svd.singularValues();
    const double s0 = std::max(sv[0], 1e-300);
    int def = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] < 1e-6 * s0 || sv[i] < 1e-12 * std::sqrt(mx)) ++def;
    return std::max(1, def);
  };

  int count = 0;
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (dets[i - 1] != 0.0 && dets[i] != 0.0 &&
        (dets[i - 1] < 0.0) != (dets[i] < 0.0)) {
      // bisection refine inside the bracket
      double ta = ts[i - 1], tb = ts[i];
      double da = dets[i - 1];
      for (int it = 0; it < 80 && std::abs(tb - ta) > 1e-14 * std::abs(t_total);
           ++it) {
        const double tm = 0.5 * (ta + tb);
        const double dm = det_at(tm);
        if ((da < 0.0) == (dm < 0.0)) {
          ta = tm;
          da = dm;
        } else {
          tb = tm;
        }
      }
      count += multiplicity(0.5 * (ta + tb));
    } else if (i + 1 < ts.size() && std::abs(dets[i]) < 1e-11 * mx &&
               std::abs(dets[i]) <= std::abs(dets[i - 1]) &&
               std::abs(dets[i]) <= std::abs(dets[i + 1])) {
      // touching zero without a sign change: even rank drop
      const int def = multiplicity(ts[i]);
      if (def >= 2) count += def;
    }
  }
  return count;
}

Eigen::MatrixXd planar_block(const Eigen::VectorXd& y) {
  return planar_B(y);
}

}  // namespace

PlanarShot planar_shot(const Vec2& x0, const Vec2& p0, Branch branch,
                       const FieldConfig& config, const ParticleParams& params,
                       double t, double tol, bool count_conjugates) {
  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(kPlanarFull);
  y0[0] = x0[0];
  y0[1] = x0[1];
  y0[2] = p0[0];
  y0[3] = p0[1];
  Eigen::Map<Mat4>(y0.data() + kPlanarBase) = Mat4::Identity();

  PlanarRHS rhs{branch, &config, &params};
  IntegratorOptions opt;
  opt.rtol = tol;
  opt.atol = tol * 1e-2;

  StepFailure fail;
  DenseSolution sol = integrate_dopri5(rhs, y0, 0.0, t, opt, &fail);

  PlanarShot shot;
  if (fail.failed) return shot;
  const Eigen::VectorXd yf = sol.eval(t);
  shot.x_end = Vec2(yf[0], yf[1]);
  shot.p_end = Vec2(yf[2], yf[3]);
  shot.action = yf[4];
  shot.spin_phase = yf[5];
  shot.J = Eigen::Map<const Mat4>(yf.data() + kPlanarBase);
  shot.B = planar_B(yf);
  if (count_conjugates)
    shot.conj_count = scan_conjugates(sol, t, planar_block, &shot.min_abs_detB);
  shot.ok = true;
  return shot;
}

namespace {

Mat3 block_B3(const Mat6& J) { return J.topRightCorner<3, 3>(); }

Eigen::MatrixXd traj_block(const Eigen::VectorXd& y, bool planar) {
  Eigen::Map<const Mat6> J(y.data() + 7);
  if (planar) {
    Mat2 B;
    B << J(0, 3), J(0, 4), J(1, 3), J(1, 4);
    return B;
  }
  return Mat3(block_B3(J));
}

Eigen::MatrixXd endpoint_block(const Trajectory& traj, double t, bool planar) {
  const Mat6 J = traj.jacobian(t);
  if (planar) {
    Mat2 B;
    B << J(0, 3), J(0, 4), J(1, 3), J(1, 4);
    return B;
  }
  return Mat3(block_B3(J));
}

struct NewtonOutcome {
  bool converged = false;
  Eigen::VectorXd p;
  double residual = 0.0;
};

/// Damped Newton on the shooting residual x(t; y, p0) - x_target with the
/// exact Jacobian dx_t/dp_0 from the variational flow.
template <class ShotFn>
NewtonOutcome newton_shoot(ShotFn&& shoot, Eigen::VectorXd p,
                           const Eigen::VectorXd& target,
                           const ShootingOptions& opts) {
  NewtonOutcome out;
  double best = std::numeric_limits<double>::max();
  int worse_streak = 0;

  for (int it = 0; it < opts.max_iters; ++it) {
    Eigen::VectorXd x_end;
    Eigen::MatrixXd B;
    if (!shoot(p, x_end, B)) return out;

    const Eigen::VectorXd F = x_end - target;
    const double fn = F.norm();
    if (!std::isfinite(fn)) return out;
    if (fn <= opts.position_tol) {
      out.converged = true;
      out.p = p;
      out.residual = fn;
      return out;
    }
    if (fn < best) {
      best = fn;
      worse_streak = 0;
    } else if (++worse_streak > 4) {
      return out;
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    if (!lu.isInvertible()) return out;
    Eigen::VectorXd dp = lu.solve(-F);

    const double cap = std::max(1.0, p.norm());
    if (dp.norm() > cap) dp *= cap / dp.norm();
    p += dp;
  }
  return out;
}

std::vector<Eigen::VectorXd> build_seeds(const Vec3& x, const Vec3& y, double t,
                                         Branch branch,
                                         const ParticleParams& params,
                                         const ShootingOptions& opts) {
  const int dim = opts.planar ? 2 : 3;
  std::vector<Eigen::VectorXd> seeds;

  // ballistic guess from the free-particle inversion
  const Vec3 v = (x - y) / t;
  if (v.norm() < 0.999 * params.c) {
    const double gamma = 1.0 / std::sqrt(1.0 - v.squaredNorm() / (params.c * params.c));
    const Vec3 pb = branch_sign(branch) * gamma * params.m * v;
    seeds.push_back(pb.head(dim));
  }

  const int n = std::max(1, opts.n_per_axis);
  auto axis_val = [&](int i) {
    return n == 1 ? 0.0 : -opts.extent + 2.0 * opts.extent * i / (n - 1);
  };
  if (opts.planar) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Eigen::VectorXd s(2);
        s << opts.p_center.x() + axis_val(i), opts.p_center.y() + axis_val(j);
        seeds.push_back(s);
      }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          Eigen::VectorXd s(3);
          s << opts.p_center.x() + axis_val(i), opts.p_center.y() + axis_val(j),
              opts.p_center.z() + axis_val(k);
          seeds.push_back(s);
        }
  }
  for (const Vec3& s : opts.extra_seeds) seeds.push_back(s.head(dim));
  return seeds;
}

}  // namespace

int count_conjugate_points(const Trajectory& traj, double t_from, double t_to,
                           bool planar) {
  (void)t_from;  // scan always starts past the small-time ramp
  if (!traj.has_jacobians())
    throw std::logic_error("count_conjugate_points: trajectory lacks jacobians");
  double mn = 0.0;
  return scan_conjugates(traj.dense(), t_to, planar ? det2_fn : det3_fn, &mn);
}

std::vector<ConnectingOrbit> find_connecting_orbits(
    const Vec3& x, const Vec3& y, double t, Branch branch,
    const FieldConfig& config, const ParticleParams& params,
    const ShootingOptions& opts) {
  if (!(t > 0.0)) throw std::invalid_argument("find_connecting_orbits: t must be > 0");

  const int dim = opts.planar ? 2 : 3;
  const Eigen::VectorXd target = x.head(dim);

  auto shoot = [&](const Eigen::VectorXd& p, Eigen::VectorXd& x_end,
                   Eigen::MatrixXd& B) -> bool {
    if (opts.planar) {
      const PlanarShot s = planar_shot(Vec2(y.x(), y.y()), Vec2(p[0], p[1]),
                                       branch, config, params, t,
                                       opts.traj_tol, false);
      if (!s.ok) return false;
      x_end = s.x_end;
      B = s.B;
      return true;
    }
    PhaseState z0{y, Vec3(p[0], p[1], p[2])};
    try {
      const Trajectory traj =
          integrate_flow(z0, branch, config, params, t, opts.traj_tol, true);
      x_end = traj.final_state().x;
      B = endpoint_block(traj, t, false);
      return true;
    } catch (const IntegrationError&) {
      return false;
    }
  };

  // collect converged momenta, deduplicate, sort for reproducibility
  std::vector<Eigen::VectorXd> roots;
  for (const Eigen::VectorXd& seed : build_seeds(x, y, t, branch, params, opts)) {
    const NewtonOutcome res = newton_shoot(shoot, seed, target, opts);
    if (!res.converged) continue;
    bool dup = false;
    for (const Eigen::VectorXd& r : roots)
      if ((r - res.p).norm() < opts.dedup_tol) {
        dup = true;
        break;
      }
    if (!dup) roots.push_back(res.p);
  }
  std::sort(roots.begin(), roots.end(),
            [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
              for (int i = 0; i < a.size(); ++i)
                if (a[i] != b[i]) return a[i] < b[i];
              return false;
            });

  std::vector<ConnectingOrbit> orbits;
  for (const Eigen::VectorXd& p : roots) {
    ConnectingOrbit orb;
    orb.branch = branch;
    orb.p0 = Vec3::Zero();
    orb.p0.head(dim) = p;
    orb.traj = integrate_flow(PhaseState{y, orb.p0}, branch, config, params, t,
                              opts.traj_tol, true);
    orb.residual = (orb.traj.final_state().x.head(dim) - target).norm();
    if (orb.residual > opts.position_tol * 10.0) continue;
    orb.R = orb.traj.action(t);
    const auto [D, nu] = van_vleck_and_morse(orb, opts.planar, opts.caustic_rel_tol);
    orb.D = D;
    orb.morse = nu;
    orb.d_holonomy = transport_spin(orb.traj).back().d;
    const EigenFrame f0 = eigenframe(orb.traj.kinetic(0.0), params);
    const EigenFrame ft = eigenframe(orb.traj.kinetic(t), params);
    orb.frame_0 = branch == Branch::plus ? f0.V : f0.W;
    orb.frame_t = branch == Branch::plus ? ft.V : ft.W;
    orbits.push_back(std::move(orb));
  }
  return orbits;
}

double principal_function(const ConnectingOrbit& orbit) { return orbit.R; }

std::pair<double, int> van_vleck_and_morse(const ConnectingOrbit& orbit,
                                           bool planar,
                                           double caustic_rel_tol) {
  const double t = orbit.traj.t_end();
  const Eigen::MatrixXd B = endpoint_block(orbit.traj, t, planar);
  const double det = B.determinant();

  // scale from the short-time behaviour B ~ t Hpp
  const HamiltonianDerivs d0 = hamiltonian_derivs(
      orbit.traj.initial_state(), orbit.branch, orbit.traj.field(),
      orbit.traj.params(), true);
  const Eigen::MatrixXd Hpp = planar
                                  ? Eigen::MatrixXd(d0.Hpp.topLeftCorner<2, 2>())
                                  : Eigen::MatrixXd(d0.Hpp);
  const double scale = std::abs(std::pow(t, B.rows()) * Hpp.determinant());
  if (std::abs(det) < caustic_rel_tol * std::max(scale, 1e-300))
    throw CausticError("van_vleck_and_morse: endpoint is conjugate (det dx/dp0 ~ 0)");

  const double D = 1.0 / std::sqrt(std::abs(det));
  const int nu = count_conjugate_points(orbit.traj, 0.0, t, planar);
  return {D, nu};
}

KernelValue semiclassical_kernel(const Vec3& x, const Vec3& y, double t,
                                 const FieldConfig& config,
                                 const ParticleParams& params,
                                 const ShootingOptions& opts) {
  const int dim = opts.planar ? 2 : 3;
  const double hbar = params.hbar;
  const cplx prefactor =
      std::pow(2.0 * M_PI * hbar, -0.5 * dim) *
      std::exp(cplx(0.0, -0.25 * M_PI * dim));

  KernelValue kv;
  for (Branch branch : {Branch::plus, Branch::minus}) {
    for (ConnectingOrbit& orb :
         find_connecting_orbits(x, y, t, branch, config, params, opts)) {
      KernelContribution c;
      c.branch = branch;
      c.p0 = orb.p0;
      c.R = orb.R;
      c.D = orb.D;
      c.morse = orb.morse;
      c.d = orb.d_holonomy;
      const cplx phase =
          std::exp(cplx(0.0, orb.R / hbar - 0.5 * M_PI * orb.morse));
      c.term = prefactor * phase * orb.D *
               (orb.frame_t * orb.d_holonomy * orb.frame_0.adjoint());
      kv.K += c.term;
      kv.contributions.push_back(std::move(c));
    }
  }
  return kv;
}

}  // namespace diracsc
