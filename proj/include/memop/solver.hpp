#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "memop/error.hpp"
#include "memop/numerics.hpp"
#include "memop/problems.hpp"

namespace memop {

struct TimeGrid {
  double dt = 0.01;
  std::size_t n_steps = 0;

  double t(std::size_t i) const noexcept { return static_cast<double>(i) * dt; }
  double horizon() const noexcept { return t(n_steps); }
  std::size_t n_points() const noexcept { return n_steps + 1; }

  // Grid with the same dt reaching t_final (which must be a whole number of steps).
  static TimeGrid until(double dt, double t_final) {
    if (!(dt > 0.0)) throw DomainError("TimeGrid: dt must be positive");
    const double steps = t_final / dt;
    const double rounded = std::round(steps);
    if (rounded < 0.0 || std::abs(steps - rounded) > 1e-6 * std::max(1.0, rounded)) {
      throw DomainError("TimeGrid: t_final " + std::to_string(t_final) +
                        " is not a whole number of steps of " + std::to_string(dt));
    }
    return {dt, static_cast<std::size_t>(rounded)};
  }
};

struct Trajectory {
  ProblemSpec spec;
  TimeGrid grid;
  std::vector<ComplexMatrix> g;
  std::vector<ComplexMatrix> i_int;

  // First n_steps+1 points as a trajectory of its own.
  Trajectory prefix(std::size_t n_steps) const {
    if (n_steps > grid.n_steps) throw DomainError("Trajectory::prefix: beyond horizon");
    Trajectory out{spec, {grid.dt, n_steps}, {}, {}};
    out.g.assign(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(n_steps + 1));
    out.i_int.assign(i_int.begin(), i_int.begin() + static_cast<std::ptrdiff_t>(n_steps + 1));
    return out;
  }
};

// Incremental Simpson history integral. Kernel factors K(G_j) are cached once per
// sample, so step i costs i+1 small matrix products.
class HistoryQuadrature {
 public:
  HistoryQuadrature(const ProblemSpec& spec, double dt) : spec_(spec), dt_(dt) {
    if (!(dt > 0.0)) throw DomainError("HistoryQuadrature: dt must be positive");
  }

  void reserve(std::size_t n) {
    g_.reserve(n);
    k_.reserve(n);
    w_.reserve(n);
  }

  void push(const ComplexMatrix& g) {
    if (g.dim() != spec_.dim) throw ShapeError("HistoryQuadrature: dimension mismatch");
    g_.push_back(g);
    k_.push_back(kernel_factor(spec_, g));
  }

  void pop() {
    g_.pop_back();
    k_.pop_back();
  }

  std::size_t size() const noexcept { return g_.size(); }

  // I at the latest pushed sample: sum_j w_j K(G_{m-j}) G_j dt.
  ComplexMatrix integral() {
    ComplexMatrix acc(spec_.dim);
    const std::size_t n = g_.size();
    if (n <= 1) return acc;
    w_.resize(n);
    simpson_weights(n, w_);
    const std::size_t m = n - 1;
    for (std::size_t j = 0; j <= m; ++j) mat_mul_acc(acc, w_[j], k_[m - j], g_[j]);
    acc *= dt_;
    return acc;
  }

 private:
  ProblemSpec spec_;
  double dt_;
  std::vector<ComplexMatrix> g_;
  std::vector<ComplexMatrix> k_;
  std::vector<double> w_;
};

inline ComplexMatrix history_integral(const ProblemSpec& spec, std::span<const ComplexMatrix> g_samples,
                                      std::size_t step, double dt) {
  if (g_samples.empty() || step > g_samples.size() - 1) {
    throw DomainError("history_integral: step " + std::to_string(step) + " out of range");
  }
  HistoryQuadrature q(spec, dt);
  q.reserve(step + 1);
  for (std::size_t j = 0; j <= step; ++j) q.push(g_samples[j]);
  return q.integral();
}

namespace detail {

inline void check_state(const ComplexMatrix& g, std::size_t step, const char* who) {
  if (!g.all_finite()) throw BlowUpError(std::string(who) + ": non-finite state", step);
}

// Kernel overflow while caching K(G) is reported as a blow-up at that step.
inline void push_sample(HistoryQuadrature& q, const ComplexMatrix& g, std::size_t step, const char* who) {
  try {
    q.push(g);
  } catch (const DomainError& e) {
    throw BlowUpError(std::string(who) + ": " + e.what(), step);
  }
}

inline ComplexMatrix derivative(const ProblemSpec& spec, double t, const ComplexMatrix& g,
                                const ComplexMatrix& i_int) {
  return streaming(spec, t, g) + i_int;
}

}  // namespace detail

inline Trajectory solve_fe(const ProblemSpec& spec, const TimeGrid& grid) {
  spec.validate();
  if (!(grid.dt > 0.0)) throw DomainError("solve_fe: dt must be positive");
  Trajectory tr{spec, grid, {}, {}};
  tr.g.reserve(grid.n_points());
  tr.i_int.reserve(grid.n_points());
  HistoryQuadrature q(spec, grid.dt);
  q.reserve(grid.n_points());

  tr.g.push_back(spec.g0);
  q.push(spec.g0);
  for (std::size_t i = 0;; ++i) {
    tr.i_int.push_back(q.integral());
    if (i == grid.n_steps) break;
    const ComplexMatrix d = detail::derivative(spec, grid.t(i), tr.g[i], tr.i_int[i]);
    ComplexMatrix next = tr.g[i] + grid.dt * d;
    detail::check_state(next, i + 1, "solve_fe");
    tr.g.push_back(next);
    detail::push_sample(q, next, i + 1, "solve_fe");
  }
  return tr;
}

// Third-order Adams-Bashforth. Steps 1 and 2 use Heun's method; its corrector
// evaluates the history integral on the uniform grid with the predicted sample.
inline Trajectory solve_ab3(const ProblemSpec& spec, const TimeGrid& grid) {
  spec.validate();
  if (!(grid.dt > 0.0)) throw DomainError("solve_ab3: dt must be positive");
  if (grid.n_steps < 3) throw DomainError("solve_ab3: needs at least 3 steps");
  const double dt = grid.dt;
  Trajectory tr{spec, grid, {}, {}};
  tr.g.reserve(grid.n_points());
  tr.i_int.reserve(grid.n_points());
  std::vector<ComplexMatrix> d;
  d.reserve(grid.n_points());
  HistoryQuadrature q(spec, dt);
  q.reserve(grid.n_points() + 1);

  tr.g.push_back(spec.g0);
  q.push(spec.g0);
  for (std::size_t i = 0;; ++i) {
    tr.i_int.push_back(q.integral());
    d.push_back(detail::derivative(spec, grid.t(i), tr.g[i], tr.i_int[i]));
    if (i == grid.n_steps) break;

    ComplexMatrix next(spec.dim);
    if (i < 2) {
      const ComplexMatrix predictor = tr.g[i] + dt * d[i];
      detail::check_state(predictor, i + 1, "solve_ab3");
      detail::push_sample(q, predictor, i + 1, "solve_ab3");
      const ComplexMatrix d_pred = detail::derivative(spec, grid.t(i + 1), predictor, q.integral());
      q.pop();
      next = tr.g[i] + (0.5 * dt) * (d[i] + d_pred);
    } else {
      next = tr.g[i] + (dt / 12.0) * (23.0 * d[i] - 16.0 * d[i - 1] + 5.0 * d[i - 2]);
    }
    detail::check_state(next, i + 1, "solve_ab3");
    tr.g.push_back(next);
    detail::push_sample(q, next, i + 1, "solve_ab3");
  }
  return tr;
}

enum class Stepper { FE, AB3 };

inline std::string to_string(Stepper s) { return s == Stepper::FE ? "fe" : "ab3"; }

// Max |G - analytic| over the grid for a Dyson problem.
inline double max_dyson_error(const Trajectory& tr) {
  if (tr.spec.kind != ProblemKind::Dyson) throw DomainError("max_dyson_error: needs a Dyson problem");
  double err = 0.0;
  for (std::size_t i = 0; i < tr.g.size(); ++i) {
    err = std::max(err, std::abs(tr.g[i][0] - dyson_analytic(*tr.spec.dyson, tr.grid.t(i))));
  }
  return err;
}

// Least-squares slope of log(max error) against log(dt), using the analytic Dyson solution.
inline double convergence_order(const ProblemSpec& spec, Stepper method, std::span<const double> dts,
                                double t_final) {
  if (spec.kind != ProblemKind::Dyson) {
    throw DomainError("convergence_order: only Dyson problems have an analytic reference");
  }
  if (dts.size() < 3) throw DomainError("convergence_order: needs at least 3 step sizes");
  std::vector<double> lx, ly;
  for (double dt : dts) {
    const TimeGrid grid = TimeGrid::until(dt, t_final);
    const Trajectory tr = method == Stepper::FE ? solve_fe(spec, grid) : solve_ab3(spec, grid);
    lx.push_back(std::log(dt));
    ly.push_back(std::log(max_dyson_error(tr)));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k] / n;
    my += ly[k] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  return sxy / sxx;
}

}  // namespace memop
