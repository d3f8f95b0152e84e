#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "memop/error.hpp"
#include "memop/numerics.hpp"
#include "memop/text.hpp"

namespace memop {

// Gaussian-pulse driven 2x2 model:
//   dG/dt = A(t) G + int_0^t cos(0.25 G(t-s) G(t-s)) G(s) ds
//   A(t)  = -i [[-beta exp(-(t-alpha1)^2/sigma), 1], [1, beta exp(-(t-alpha2)^2/sigma)]]
struct ToyParams {
  double alpha1 = 10.0;
  double alpha2 = 15.0;
  double sigma = 2.0;
  double beta = 1.0;

  friend bool operator==(const ToyParams&, const ToyParams&) = default;
};

// Bethe-lattice Dyson equation  i dG/dt = h G + int_0^t c^2 G(t-s) G(s) ds.
struct DysonParams {
  double h = -1.0;
  double c = 1.0;

  friend bool operator==(const DysonParams&, const DysonParams&) = default;
};

enum class ProblemKind { Toy, Dyson };

inline std::string to_string(ProblemKind k) { return k == ProblemKind::Toy ? "toy" : "dyson"; }

// Every problem is carried in the form dG/dt = F(G, t) + I(t), where I(t) is the full
// memory contribution (for Dyson this includes the -i from moving i d/dt to the left).
struct ProblemSpec {
  ProblemKind kind = ProblemKind::Toy;
  std::optional<ToyParams> toy;
  std::optional<DysonParams> dyson;
  int dim = 2;
  ComplexMatrix g0 = ComplexMatrix::scalar(2, kI);

  static ProblemSpec make_toy(const ToyParams& p) {
    if (!(p.sigma > 0.0)) throw DomainError("toy problem: sigma must be > 0");
    ProblemSpec s;
    s.kind = ProblemKind::Toy;
    s.toy = p;
    s.dim = 2;
    s.g0 = ComplexMatrix::scalar(2, kI);
    return s;
  }

  static ProblemSpec make_dyson(const DysonParams& p) {
    if (p.c == 0.0) throw DomainError("dyson problem: c must be nonzero");
    ProblemSpec s;
    s.kind = ProblemKind::Dyson;
    s.dyson = p;
    s.dim = 1;
    s.g0 = ComplexMatrix::scalar(1, -kI);
    return s;
  }

  // Explicit override of the initial condition.
  ProblemSpec with_initial(const ComplexMatrix& g) const {
    if (g.dim() != dim) throw ShapeError("initial condition dimension mismatch");
    ProblemSpec s = *this;
    s.g0 = g;
    return s;
  }

  void validate() const {
    if (kind == ProblemKind::Toy) {
      if (!toy || dyson || dim != 2) throw DomainError("toy spec must carry only ToyParams, dim 2");
      if (!(toy->sigma > 0.0)) throw DomainError("toy problem: sigma must be > 0");
    } else {
      if (!dyson || toy || dim != 1) throw DomainError("dyson spec must carry only DysonParams, dim 1");
      if (dyson->c == 0.0) throw DomainError("dyson problem: c must be nonzero");
    }
    if (g0.dim() != dim) throw ShapeError("initial condition dimension mismatch");
  }
};

inline ComplexMatrix toy_drive(const ToyParams& p, double t) {
  const double d1 = t - p.alpha1;
  const double d2 = t - p.alpha2;
  const double a00 = -p.beta * std::exp(-d1 * d1 / p.sigma);
  const double a11 = p.beta * std::exp(-d2 * d2 / p.sigma);
  return ComplexMatrix(2, {-kI * a00, -kI, -kI, -kI * a11});
}

inline ComplexMatrix streaming(const ProblemSpec& spec, double t, const ComplexMatrix& g) {
  if (g.dim() != spec.dim) throw ShapeError("streaming: state dimension mismatch");
  if (spec.kind == ProblemKind::Toy) return mat_mul(toy_drive(*spec.toy, t), g);
  return (-kI * spec.dyson->h) * g;
}

// K(G at lag) such that the integrand is kernel_factor(G(t-s)) * G(s).
inline ComplexMatrix kernel_factor(const ProblemSpec& spec, const ComplexMatrix& g_lag) {
  if (g_lag.dim() != spec.dim) throw ShapeError("kernel: state dimension mismatch");
  if (spec.kind == ProblemKind::Toy) return elementwise_cos(0.25 * mat_mul(g_lag, g_lag));
  const double c = spec.dyson->c;
  return (-kI * (c * c)) * g_lag;
}

inline ComplexMatrix kernel_term(const ProblemSpec& spec, const ComplexMatrix& g_hist_at,
                                 const ComplexMatrix& g_s) {
  if (g_s.dim() != spec.dim) throw ShapeError("kernel: state dimension mismatch");
  return mat_mul(kernel_factor(spec, g_hist_at), g_s);
}

inline bool same_parameters(const ProblemSpec& a, const ProblemSpec& b) {
  return a.kind == b.kind && a.toy == b.toy && a.dyson == b.dyson && a.g0 == b.g0;
}

inline std::string describe(const ProblemSpec& s) {
  if (s.kind == ProblemKind::Toy) {
    return "toy(alpha1=" + format_real(s.toy->alpha1) + ", alpha2=" + format_real(s.toy->alpha2) +
           ", sigma=" + format_real(s.toy->sigma) + ", beta=" + format_real(s.toy->beta) + ")";
  }
  return "dyson(h=" + format_real(s.dyson->h) + ", c=" + format_real(s.dyson->c) + ")";
}

// G(t) = -i exp(-iht) J1(2ct)/(ct).
inline Complex dyson_analytic(const DysonParams& p, double t) {
  if (!(t >= 0.0)) throw DomainError("dyson_analytic: t must be >= 0");
  const double x = 2.0 * p.c * t;
  const double envelope = std::abs(x) < 1e-6 ? 1.0 - x * x / 8.0 : 2.0 * bessel_j1(std::abs(x)) / std::abs(x);
  return -kI * std::exp(-kI * (p.h * t)) * envelope;
}

}  // namespace memop
