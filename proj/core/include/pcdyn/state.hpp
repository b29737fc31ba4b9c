#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcdyn {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorCode {
  InvalidArgument,
  CoincidentParticles,
  SingularSystem,
  QuadratureFailure,
  ConstraintFailure,
  OutOfRange,
  Config,
};

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a dense linear solve is refused; carries the 1-norm condition estimate.
class SingularSystemError : public Error {
 public:
  SingularSystemError(const std::string& what, double condition_estimate)
      : Error(ErrorCode::SingularSystem, what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

// Particle-indexed 3N vectors store particle a at entries [3a, 3a+3).
inline auto block3(Vector& v, int a) { return v.segment<3>(3 * a); }
inline auto block3(const Vector& v, int a) { return v.segment<3>(3 * a); }

inline int particle_count(const Vector& v) { return static_cast<int>(v.size() / 3); }

/// Positions and velocities of all N particles at one instant (6N numbers).
struct PhaseState {
  double t = 0.0;
  Vector r;
  Vector u;

  int n() const { return particle_count(r); }
};

/// Third-order system state: (r, u) plus the 3-dimensional fast variable y,
/// the charge-weighted acceleration e^{-2} sum_a e_a du_a/dt.
struct DAEState {
  double t = 0.0;
  Vector r;
  Vector u;
  Vec3 y = Vec3::Zero();

  int n() const { return particle_count(r); }
  PhaseState phase() const { return {t, r, u}; }
};

/// Packs a phase state as [r, u].
Vector pack(const PhaseState& s);
/// Packs a DAE state as [r, u, y].
Vector pack(const DAEState& s);
PhaseState unpack_phase(double t, const Vector& x);
DAEState unpack_dae(double t, const Vector& x);

}  // namespace pcdyn
