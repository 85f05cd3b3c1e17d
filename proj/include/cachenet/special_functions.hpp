#pragma once

#include <functional>

namespace cachenet::special {

/// Tolerances for integrate_semi_infinite. Converged when the summed error
/// estimate is below max(abs_tol, rel_tol * |integral|).
struct QuadratureConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  int max_subdivisions = 200;

  /// Throws DomainError if any field is out of range.
  void validate() const;
};

/// ln Gamma(x) for x > 0.
double ln_gamma(double x);

/// Gamma(x) for any real x that is not a pole.
double gamma_fn(double x);

/// 1 / Gamma(x); zero at the poles x = 0, -1, -2, ...
double reciprocal_gamma(double x);

/// Gauss hypergeometric 2F1(a, b; c; z) restricted to z <= 0.
///
/// The argument is first moved to w = z/(z-1) in [0, 1) with a Pfaff
/// transformation. For w close to 1 the series is re-expanded around 1 - w
/// unless c - a - b is an integer, in which case the Pfaff series is summed
/// directly with a large term budget.
double gauss_2f1_neg(double a, double b, double c, double z);

/// Interference kernel (2 t/(beta-2)) 2F1(1, 1-2/beta; 2-2/beta; -t).
double z1(double t_bar, double beta);

/// Integral of f over (0, inf) by globally adaptive Gauss-Kronrod (21 point)
/// over a fixed set of log-spaced breakpoints plus a mapped tail.
double integrate_semi_infinite(const std::function<double(double)>& f,
                               const QuadratureConfig& cfg = {});

}  // namespace cachenet::special
