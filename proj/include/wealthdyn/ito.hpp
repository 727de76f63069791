#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

namespace wealthdyn {

// Ito-lemma maps between linear wealth w and x = asinh(w). With s = sqrt(1 + w^2):
//   a drift term m with variance v maps to  m/s - w v / (2 s^3),  v / s^2
//   consumption c (entering the drift with a minus sign) maps to  c/s + w v / (2 s^3)

template <class Scalar>
struct DriftVar {
  Scalar drift;
  Scalar var;
};

template <class Scalar>
DriftVar<Scalar> to_asinh_scale(Scalar z, Scalar psi2, Scalar w) {
  using std::sqrt;
  if (psi2 < Scalar(0)) throw std::invalid_argument("negative variance");
  const Scalar s2 = Scalar(1) + w * w;
  const Scalar s = sqrt(s2);
  return {z / s - w * psi2 / (Scalar(2) * s2 * s), psi2 / s2};
}

template <class Scalar>
DriftVar<Scalar> drift_from_asinh_scale(Scalar zt, Scalar psi2t, Scalar w) {
  using std::sqrt;
  if (psi2t < Scalar(0)) throw std::invalid_argument("negative variance");
  const Scalar s2 = Scalar(1) + w * w;
  return {zt * sqrt(s2) + w * psi2t / Scalar(2), psi2t * s2};
}

template <class Scalar>
DriftVar<Scalar> consumption_to_asinh_scale(Scalar c, Scalar gamma2, Scalar w) {
  using std::sqrt;
  if (gamma2 < Scalar(0)) throw std::invalid_argument("negative variance");
  const Scalar s2 = Scalar(1) + w * w;
  const Scalar s = sqrt(s2);
  return {c / s + w * gamma2 / (Scalar(2) * s2 * s), gamma2 / s2};
}

/// c = c~ s - w gamma~^2 / 2, gamma^2 = gamma~^2 s^2.
template <class Scalar>
DriftVar<Scalar> from_asinh_scale(Scalar ct, Scalar gamma2t, Scalar w) {
  using std::sqrt;
  if (gamma2t < Scalar(0)) throw std::invalid_argument("negative variance");
  const Scalar s2 = Scalar(1) + w * w;
  return {ct * sqrt(s2) - w * gamma2t / Scalar(2), gamma2t * s2};
}

}  // namespace wealthdyn
