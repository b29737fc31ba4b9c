#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace pcdyn::detail {

// Adaptive Gauss-Kronrod (15/31 point pairs) with a relative tolerance.
template <class F>
double integrate_adaptive(F&& f, double lo, double hi, double rel_tol, double* error = nullptr) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, rel_tol, error);
}

}  // namespace pcdyn::detail
