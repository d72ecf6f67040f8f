#pragma once

namespace mirror_em {

// Every numeric tolerance used by the library and its checks, in one place.
// Values are absolute unless the name says otherwise.
struct Tolerances {
  // Round trip inverse_mean_map(mean_map(theta)) in natural coordinates.
  static constexpr double round_trip = 1e-10;
  // Bregman duality, Fenchel identities, surrogate algebra.
  static constexpr double identity = 1e-8;
  // Finite-difference gradient agreement (relative, against analytic forms).
  static constexpr double fd_gradient_rel = 1e-6;
  // Finite-difference Hessian / Fisher agreement (relative).
  static constexpr double fd_hessian_rel = 1e-5;
  // Quadrature KL vs Bregman divergence for scalar families.
  static constexpr double quadrature_kl = 1e-6;
  // Exhaustive posterior enumeration vs one E-step.
  static constexpr double enumeration = 1e-10;
  // Exact-EM trace identities (three computations of the step KL).
  static constexpr double step_kl_match = 1e-8;
  // Slack added to the telescoping descent and rate inequalities.
  static constexpr double rate_slack = 1e-9;
  // Early-stop threshold on the Bregman stationarity certificate.
  static constexpr double stationarity_stop = 1e-12;
  // Natural decrement vs twice the stationarity certificate, relative,
  // applied once the certificate is below decrement_regime.
  static constexpr double decrement_rel = 5e-2;
  static constexpr double decrement_regime = 1e-4;
  // Parametrization-invariance of exact EM iterates (complete-data KL).
  static constexpr double reparam_em = 1e-10;
  // Lower bound certifying that plain gradient descent is not invariant.
  static constexpr double reparam_gd_gap = 1e-3;
  // Spectral missing-information identity via two independent Hessians.
  static constexpr double spectral_identity = 1e-4;
  // Allowed overshoot of the missing-information spectrum outside [0, 1].
  static constexpr double spectrum_overshoot = 1e-4;
  // Online EM vs stochastic mirror descent, sup over iterates.
  static constexpr double smd_match = 1e-10;
  // Running-average identity of the online mean iterates.
  static constexpr double online_average = 1e-12;
  // MAP-EM with vanishing prior strength vs maximum likelihood EM.
  static constexpr double map_vanishing_prior = 1e-6;
  // Default quadrature absolute error target.
  static constexpr double quadrature_target = 1e-9;
  // Responsibilities row-sum invariant.
  static constexpr double row_sum = 1e-12;
};

}  // namespace mirror_em
