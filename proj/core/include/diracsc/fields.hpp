#ifndef DIRACSC_FIELDS_HPP
#define DIRACSC_FIELDS_HPP

#include <array>
#include <string>
#include <vector>

#include "diracsc/types.hpp"

namespace diracsc {

/// Closed catalog of electromagnetic scenarios in Coulomb gauge. The catalog
/// is an enum (not user code) so that every entry has closed-form potentials
/// and derivatives up to second order, which the variational equations need.
enum class FieldKind {
  zero,
  uniform_magnetic,
  uniform_electric,
  harmonic_scalar,
  quartic_coupled,
};

const char* field_kind_name(FieldKind k);
FieldKind field_kind_from_name(const std::string& name);

struct FieldConfig {
  FieldKind kind = FieldKind::zero;
  Vec3 B = Vec3::Zero();  // uniform_magnetic
  Vec3 E = Vec3::Zero();  // uniform_electric
  Vec3 k = Vec3::Zero();  // harmonic_scalar stiffness per axis
  double g = 0.0;         // quartic_coupled coupling, phi = g x^2 y^2

  /// True if the scenario keeps the z = 0 plane invariant (B along z,
  /// in-plane E on the plane), as planar mode requires.
  bool planar_compatible() const;
};

/// Potentials, fields and their spatial derivatives at one point.
struct EMSample {
  double phi = 0.0;
  Vec3 A = Vec3::Zero();
  Vec3 E = Vec3::Zero();
  Vec3 B = Vec3::Zero();
  Mat3 gradA = Mat3::Zero();    // gradA(j,k) = dA_j/dx_k
  Vec3 gradPhi = Vec3::Zero();
  Mat3 hessPhi = Mat3::Zero();  // d2phi/dx_j dx_k
  std::array<Mat3, 3> hessA{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
};

/// Evaluate the catalog entry at x with closed-form derivatives.
/// Throws DomainError for a non-finite position.
EMSample eval_em(const FieldConfig& config, const Vec3& x);

/// Central-difference residuals of the defining relations, maximized over
/// the sample cloud. Report-only; never throws.
struct FieldResidualReport {
  double max_div_A = 0.0;           // |div A|            (Coulomb gauge)
  double max_E_plus_grad_phi = 0.0; // |E + grad phi|
  double max_B_minus_curl_A = 0.0;  // |B - curl A|
  double max_all() const;
};

FieldResidualReport verify_field_consistency(const FieldConfig& config,
                                             const std::vector<Vec3>& sample_points,
                                             double h);

}  // namespace diracsc

#endif
