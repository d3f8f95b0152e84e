#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memop/error.hpp"
#include "memop/lstm.hpp"
#include "memop/problems.hpp"
#include "memop/solver.hpp"

namespace memop {

struct ExtrapolationResult {
  TimeGrid grid;
  std::vector<ComplexMatrix> g;
  std::vector<ComplexMatrix> i_hat;  // empty for methods that never form I
  std::size_t training_horizon_index = 0;
  double wall_clock_seconds = 0.0;
  std::optional<std::size_t> blow_up_step;
  std::string diagnostic;

  bool complete() const noexcept { return !blow_up_step; }
};

// RNN stand-in for the memory integral. warm() runs the prefix once and keeps the final
// states; next(g) is one cell advance per layer.
template <class Scalar>
class RnnSurrogate {
 public:
  RnnSurrogate(const RnnModel<Scalar>& model, int dim) : model_(model), stream_(model_), dim_(dim) {
    const auto w = static_cast<Eigen::Index>(2 * dim * dim);
    if (model_.input_size() != w || model_.output_size() != w) {
      throw ShapeError("model width " + std::to_string(model_.input_size()) + " does not fit a " +
                       std::to_string(dim) + "x" + std::to_string(dim) + " problem");
    }
    x_.resize(w, 1);
  }

  std::vector<ComplexMatrix> warm(std::span<const ComplexMatrix> prefix) {
    const auto tape = forward_sequence(model_, pack_sequence<Scalar>(prefix));
    stream_.reset();
    stream_.load_final_state(tape);
    std::vector<ComplexMatrix> out;
    out.reserve(prefix.size());
    for (Eigen::Index t = 0; t < tape.output.cols(); ++t) out.push_back(unpack_column(tape.output.col(t), dim_));
    return out;
  }

  ComplexMatrix next(const ComplexMatrix& g) {
    const std::size_t n = g.size();
    for (std::size_t k = 0; k < n; ++k) {
      x_(static_cast<Eigen::Index>(k)) = static_cast<Scalar>(g[k].real());
      x_(static_cast<Eigen::Index>(n + k)) = static_cast<Scalar>(g[k].imag());
    }
    return unpack_column(stream_.step(x_).col(0), dim_);
  }

 private:
  RnnModel<Scalar> model_;
  LstmStreamer<Scalar> stream_;
  int dim_;
  Mat<Scalar> x_;
};

// Exact Simpson quadrature in place of the RNN.
class QuadratureOracle {
 public:
  QuadratureOracle(const ProblemSpec& spec, double dt) : spec_(spec), dt_(dt), q_(spec, dt) {}

  std::vector<ComplexMatrix> warm(std::span<const ComplexMatrix> prefix) {
    q_ = HistoryQuadrature(spec_, dt_);
    std::vector<ComplexMatrix> out;
    out.reserve(prefix.size());
    for (const auto& g : prefix) {
      q_.push(g);
      out.push_back(q_.integral());
    }
    return out;
  }

  ComplexMatrix next(const ComplexMatrix& g) {
    q_.push(g);
    return q_.integral();
  }

 private:
  ProblemSpec spec_;
  double dt_;
  HistoryQuadrature q_;
};

namespace detail {

inline bool runaway(const ComplexMatrix& g) { return !g.all_finite() || g.max_abs() > 1e6; }

inline void finish(ExtrapolationResult& r, std::chrono::steady_clock::time_point start) {
  r.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

// Hybrid stepping: G advances with the problem's streaming term plus I from the surrogate,
// which sees each new G exactly once. The first new step uses the surrogate output for
// the last prefix sample. AB3 history is seeded from the last prefix derivatives; short
// prefixes bootstrap with forward Euler then AB2.
template <class Surrogate>
ExtrapolationResult extrapolate(Surrogate& surrogate, const Trajectory& prefix, double t_final,
                                Stepper stepper = Stepper::AB3) {
  const auto start = std::chrono::steady_clock::now();
  const ProblemSpec& spec = prefix.spec;
  const double dt = prefix.grid.dt;
  const std::size_t k0 = prefix.grid.n_steps;
  if (prefix.g.size() != k0 + 1) throw ShapeError("extrapolate: prefix length does not match its grid");
  const TimeGrid grid = TimeGrid::until(dt, t_final);
  if (grid.n_steps < k0) throw DomainError("extrapolate: t_final lies inside the prefix");

  ExtrapolationResult r;
  r.grid = grid;
  r.training_horizon_index = k0;
  r.g.reserve(grid.n_points());
  r.i_hat.reserve(grid.n_points());
  r.g.assign(prefix.g.begin(), prefix.g.end());
  r.i_hat = surrogate.warm(prefix.g);

  std::vector<ComplexMatrix> d;
  const std::size_t seed_from = k0 >= 2 ? k0 - 2 : 0;
  for (std::size_t j = seed_from; j <= k0; ++j) d.push_back(detail::derivative(spec, grid.t(j), r.g[j], r.i_hat[j]));

  for (std::size_t i = k0; i < grid.n_steps; ++i) {
    const std::size_t m = d.size();
    ComplexMatrix next(spec.dim);
    if (stepper == Stepper::FE || m == 1) {
      next = r.g[i] + dt * d[m - 1];
    } else if (m == 2) {
      next = r.g[i] + (0.5 * dt) * (3.0 * d[1] - d[0]);
    } else {
      next = r.g[i] + (dt / 12.0) * (23.0 * d[m - 1] - 16.0 * d[m - 2] + 5.0 * d[m - 3]);
    }
    if (detail::runaway(next)) {
      r.blow_up_step = i + 1;
      r.diagnostic = "extrapolated state exceeded 1e6 or became non-finite at t=" + format_real(grid.t(i + 1));
      break;
    }
    r.g.push_back(next);
    r.i_hat.push_back(surrogate.next(next));
    d.push_back(detail::derivative(spec, grid.t(i + 1), next, r.i_hat.back()));
    if (d.size() > 3) d.erase(d.begin());
  }
  detail::finish(r, start);
  return r;
}

struct RuntimeRow {
  double horizon = 0.0;
  double hybrid_seconds = 0.0;
  double solver_seconds = 0.0;
};

// Wall clock of the hybrid (from the initial condition alone) and of the full
// forward-Euler + Simpson solve, per horizon. One untimed warm-up of each runs first.
template <class Scalar>
std::vector<RuntimeRow> runtime_profile(const RnnModel<Scalar>& model, const ProblemSpec& spec,
                                        std::span<const double> horizons, double dt, Stepper stepper = Stepper::AB3,
                                        int repeats = 1) {
  for (std::size_t k = 1; k < horizons.size(); ++k) {
    if (!(horizons[k] > horizons[k - 1])) throw DomainError("runtime_profile: horizons must ascend");
  }
  Trajectory start{spec, {dt, 0}, {spec.g0}, {ComplexMatrix(spec.dim)}};
  auto time_hybrid = [&](double horizon) {
    RnnSurrogate<Scalar> s(model, spec.dim);
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = extrapolate(s, start, horizon, stepper);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!r.complete()) throw BlowUpError("runtime_profile: hybrid run " + r.diagnostic, *r.blow_up_step);
    return sec;
  };
  auto time_solver = [&](double horizon) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto tr = solve_fe(spec, TimeGrid::until(dt, horizon));
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (tr.g.empty()) throw DomainError("runtime_profile: empty solve");
    return sec;
  };
  std::vector<RuntimeRow> rows;
  if (horizons.empty()) return rows;
  time_hybrid(horizons.front());
  time_solver(horizons.front());
  for (double h : horizons) {
    RuntimeRow row{h, 1e300, 1e300};
    for (int k = 0; k < std::max(1, repeats); ++k) {
      row.hybrid_seconds = std::min(row.hybrid_seconds, time_hybrid(h));
      row.solver_seconds = std::min(row.solver_seconds, time_solver(h));
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace memop
