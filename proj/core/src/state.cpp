#include "pcdyn/state.hpp"

namespace pcdyn {

Vector pack(const PhaseState& s) {
  Vector x(s.r.size() + s.u.size());
  x << s.r, s.u;
  return x;
}

Vector pack(const DAEState& s) {
  Vector x(s.r.size() + s.u.size() + 3);
  x << s.r, s.u, s.y;
  return x;
}

PhaseState unpack_phase(double t, const Vector& x) {
  const Eigen::Index half = x.size() / 2;
  return {t, x.head(half), x.segment(half, half)};
}

DAEState unpack_dae(double t, const Vector& x) {
  const Eigen::Index half = (x.size() - 3) / 2;
  return {t, x.head(half), x.segment(half, half), x.tail<3>()};
}

}  // namespace pcdyn
