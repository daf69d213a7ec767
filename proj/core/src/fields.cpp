#include "diracsc/fields.hpp"

#include <algorithm>
#include <cmath>

#include "diracsc/errors.hpp"

namespace diracsc {

const char* field_kind_name(FieldKind k) {
  switch (k) {
    case FieldKind::zero: return "zero";
    case FieldKind::uniform_magnetic: return "uniform_magnetic";
    case FieldKind::uniform_electric: return "uniform_electric";
    case FieldKind::harmonic_scalar: return "harmonic_scalar";
    case FieldKind::quartic_coupled: return "quartic_coupled";
  }
  return "?";
}

FieldKind field_kind_from_name(const std::string& name) {
  if (name == "zero") return FieldKind::zero;
  if (name == "uniform_magnetic") return FieldKind::uniform_magnetic;
  if (name == "uniform_electric") return FieldKind::uniform_electric;
  if (name == "harmonic_scalar") return FieldKind::harmonic_scalar;
  if (name == "quartic_coupled") return FieldKind::quartic_coupled;
  throw DomainError("unknown field kind '" + name + "'");
}

bool FieldConfig::planar_compatible() const {
  switch (kind) {
    case FieldKind::zero:
    case FieldKind::harmonic_scalar:   // E_z = -k3 z vanishes on the plane
    case FieldKind::quartic_coupled:
      return true;
    case FieldKind::uniform_magnetic:
      return B.x() == 0.0 && B.y() == 0.0;
    case FieldKind::uniform_electric:
      return E.z() == 0.0;
  }
  return false;
}

EMSample eval_em(const FieldConfig& config, const Vec3& x) {
  if (!x.allFinite()) throw DomainError("eval_em: non-finite position");

  EMSample s;
  switch (config.kind) {
    case FieldKind::zero:
      break;

    case FieldKind::uniform_magnetic: {
      // Symmetric gauge A = B x r / 2: div A = 0, curl A = B exactly.
      s.B = config.B;
      s.A = 0.5 * config.B.cross(x);
      // dA_j/dx_k for A = B x r / 2
      s.gradA << 0.0, -0.5 * config.B.z(), 0.5 * config.B.y(),
                 0.5 * config.B.z(), 0.0, -0.5 * config.B.x(),
                 -0.5 * config.B.y(), 0.5 * config.B.x(), 0.0;
      break;
    }

    case FieldKind::uniform_electric:
      s.E = config.E;
      s.phi = -config.E.dot(x);
      s.gradPhi = -config.E;
      break;

    case FieldKind::harmonic_scalar: {
      const Vec3& k = config.k;
      s.phi = 0.5 * (k.x() * x.x() * x.x() + k.y() * x.y() * x.y() +
                     k.z() * x.z() * x.z());
      s.gradPhi = Vec3(k.x() * x.x(), k.y() * x.y(), k.z() * x.z());
      s.E = -s.gradPhi;
      s.hessPhi = k.asDiagonal();
      break;
    }

    case FieldKind::quartic_coupled: {
      // phi = g x^2 y^2; keeps the z = 0 plane invariant.
      const double g = config.g;
      const double xx = x.x(), yy = x.y();
      s.phi = g * xx * xx * yy * yy;
      s.gradPhi = Vec3(2.0 * g * xx * yy * yy, 2.0 * g * xx * xx * yy, 0.0);
      s.E = -s.gradPhi;
      s.hessPhi << 2.0 * g * yy * yy, 4.0 * g * xx * yy, 0.0,
                   4.0 * g * xx * yy, 2.0 * g * xx * xx, 0.0,
                   0.0, 0.0, 0.0;
      break;
    }
  }
  return s;
}

FieldResidualReport verify_field_consistency(const FieldConfig& config,
                                             const std::vector<Vec3>& sample_points,
                                             double h) {
  FieldResidualReport rep;
  if (!(h > 0.0)) return rep;

  for (const Vec3& x : sample_points) {
    const EMSample c = eval_em(config, x);

    // Central differences of A and phi.
    Mat3 dA;       // dA(j,k) = dA_j/dx_k
    Vec3 dphi;
    for (int k = 0; k < 3; ++k) {
      Vec3 xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const EMSample sp = eval_em(config, xp);
      const EMSample sm = eval_em(config, xm);
      dA.col(k) = (sp.A - sm.A) / (2.0 * h);
      dphi[k] = (sp.phi - sm.phi) / (2.0 * h);
    }

    const double divA = dA(0, 0) + dA(1, 1) + dA(2, 2);
    const Vec3 curlA(dA(2, 1) - dA(1, 2), dA(0, 2) - dA(2, 0),
                     dA(1, 0) - dA(0, 1));

    rep.max_div_A = std::max(rep.max_div_A, std::abs(divA));
    rep.max_E_plus_grad_phi =
        std::max(rep.max_E_plus_grad_phi, (c.E + dphi).cwiseAbs().maxCoeff());
    rep.max_B_minus_curl_A =
        std::max(rep.max_B_minus_curl_A, (c.B - curlA).cwiseAbs().maxCoeff());
  }
  return rep;
}

double FieldResidualReport::max_all() const {
  return std::max({max_div_A, max_E_plus_grad_phi, max_B_minus_curl_A});
}

}  // namespace diracsc
