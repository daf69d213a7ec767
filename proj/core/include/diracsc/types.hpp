#ifndef DIRACSC_TYPES_HPP
#define DIRACSC_TYPES_HPP

#include <complex>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace diracsc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat2c = Eigen::Matrix2cd;
using Mat4c = Eigen::Matrix4cd;
using Mat42c = Eigen::Matrix<std::complex<double>, 4, 2>;
using cplx = std::complex<double>;

/// Upper (+) or lower (-) eigenvalue branch of the symbol matrix.
enum class Branch { plus, minus };

inline double branch_sign(Branch b) { return b == Branch::plus ? 1.0 : -1.0; }
inline const char* branch_label(Branch b) { return b == Branch::plus ? "+" : "-"; }

struct ParticleParams {
  double m = 1.0;     // rest mass
  double e = 1.0;     // charge
  double c = 1.0;     // light speed
  double hbar = 1.0;  // semiclassical parameter

  void validate() const {
    if (!(m > 0.0)) throw std::invalid_argument("ParticleParams: m must be > 0");
    if (!(c > 0.0)) throw std::invalid_argument("ParticleParams: c must be > 0");
    if (!(hbar > 0.0)) throw std::invalid_argument("ParticleParams: hbar must be > 0");
  }
  double rest_energy() const { return m * c * c; }
};

/// A point (x, p) in canonical phase space.
struct PhaseState {
  Vec3 x = Vec3::Zero();
  Vec3 p = Vec3::Zero();

  Vec6 packed() const {
    Vec6 z;
    z << x, p;
    return z;
  }
  static PhaseState unpack(const Vec6& z) { return {z.head<3>(), z.tail<3>()}; }
  bool finite() const { return x.allFinite() && p.allFinite(); }
};

/// Kinetic momentum and energy, pi = p - (e/c) A(x), eps = sqrt(c^2 pi^2 + m^2 c^4).
struct KineticFrame {
  Vec3 pi = Vec3::Zero();
  double eps = 0.0;
};

}  // namespace diracsc

#endif
