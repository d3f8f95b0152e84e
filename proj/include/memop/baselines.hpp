#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <chrono>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "memop/error.hpp"
#include "memop/extrapolate.hpp"
#include "memop/lstm.hpp"
#include "memop/solver.hpp"
#include "memop/text.hpp"

namespace memop {

// ---- direct solution-map learning ----

// Next-step RNN predictor: warm() consumes G_0..G_K and returns the prediction for
// G_{K+1}; next(g) consumes one more sample.
template <class Scalar>
class RnnNextStep {
 public:
  RnnNextStep(const RnnModel<Scalar>& model, int dim) : inner_(model, dim) {}

  ComplexMatrix warm(std::span<const ComplexMatrix> prefix) { return inner_.warm(prefix).back(); }
  ComplexMatrix next(const ComplexMatrix& g) { return inner_.next(g); }

 private:
  RnnSurrogate<Scalar> inner_;
};

// Recursive next-step prediction with no solver; the prediction is fed back as input.
template <class Predictor>
ExtrapolationResult extrapolate_direct(Predictor& predictor, const Trajectory& prefix, double t_final) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t k0 = prefix.grid.n_steps;
  if (prefix.g.size() != k0 + 1) throw ShapeError("extrapolate_direct: prefix length does not match its grid");
  const TimeGrid grid = TimeGrid::until(prefix.grid.dt, t_final);
  if (grid.n_steps < k0) throw DomainError("extrapolate_direct: t_final lies inside the prefix");
  ExtrapolationResult r;
  r.grid = grid;
  r.training_horizon_index = k0;
  r.g.reserve(grid.n_points());
  r.g.assign(prefix.g.begin(), prefix.g.end());
  if (grid.n_steps > k0) {
    ComplexMatrix pred = predictor.warm(prefix.g);
    for (std::size_t i = k0 + 1; i <= grid.n_steps; ++i) {
      if (detail::runaway(pred)) {
        r.blow_up_step = i;
        r.diagnostic = "direct prediction exceeded 1e6 or became non-finite at t=" + format_real(grid.t(i));
        break;
      }
      r.g.push_back(pred);
      if (i < grid.n_steps) pred = predictor.next(pred);
    }
  }
  detail::finish(r, start);
  return r;
}

// ---- dynamic mode decomposition ----

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

struct DmdModel {
  int rank = 0;
  int delay = 1;
  int dim = 1;
  double dt = 0.0;
  std::size_t n_samples = 0;  // training window length
  CMat modes;                 // (delay * dim^2) x rank
  CVec eigenvalues;
  CVec amplitudes;
  std::vector<double> singular_values;
};

// Delay-embedded snapshot k stacks the complex entries of g_k .. g_{k+delay-1}.
inline CMat hankel(std::span<const ComplexMatrix> g, int delay) {
  const std::size_t n = g.front().size();
  const std::size_t cols = g.size() - static_cast<std::size_t>(delay) + 1;
  CMat h(static_cast<Eigen::Index>(n) * delay, static_cast<Eigen::Index>(cols));
  for (std::size_t c = 0; c < cols; ++c)
    for (int d = 0; d < delay; ++d)
      for (std::size_t k = 0; k < n; ++k) h(static_cast<Eigen::Index>(d * n + k), static_cast<Eigen::Index>(c)) = g[c + d][k];
  return h;
}

// Exact DMD on a Hankel embedding of the complex entries. rank 0 keeps every singular
// value above 1e-10 of the largest.
inline DmdModel dmd_fit(std::span<const ComplexMatrix> g, double dt, int rank = 0, int delay = 32) {
  if (delay < 1) throw DomainError("dmd_fit: delay must be >= 1");
  if (g.size() < static_cast<std::size_t>(delay) + 2) {
    throw DomainError("dmd_fit: " + std::to_string(g.size()) + " samples are too few for delay " + std::to_string(delay));
  }
  const CMat h = hankel(g, delay);
  const CMat x = h.leftCols(h.cols() - 1);
  const CMat y = h.rightCols(h.cols() - 1);
  Eigen::BDCSVD<CMat> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  int numerical = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > 1e-10 * s(0)) ++numerical;
  }
  DmdModel m;
  m.singular_values.assign(s.data(), s.data() + s.size());
  if (rank == 0) rank = numerical;
  if (rank < 1 || rank > numerical) {
    std::string list;
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(s.size(), 16); ++k) list += (k ? ", " : "") + format_real(s(k));
    throw DomainError("dmd_fit: rank " + std::to_string(rank) + " exceeds numerical rank " + std::to_string(numerical) +
                      "; singular values: " + list + (s.size() > 16 ? ", ..." : ""));
  }
  const CMat u = svd.matrixU().leftCols(rank);
  const CMat v = svd.matrixV().leftCols(rank);
  const Eigen::VectorXd inv_s = s.head(rank).cwiseInverse();
  const CMat yv = y * v * inv_s.asDiagonal();
  const CMat a_tilde = u.adjoint() * yv;
  Eigen::ComplexEigenSolver<CMat> eig(a_tilde);
  if (eig.info() != Eigen::Success) throw DomainError("dmd_fit: eigen-decomposition failed");
  m.rank = rank;
  m.delay = delay;
  m.dim = g.front().dim();
  m.dt = dt;
  m.n_samples = g.size();
  m.eigenvalues = eig.eigenvalues();
  m.modes = yv * eig.eigenvectors();
  for (Eigen::Index j = 0; j < rank; ++j) {
    // exact-DMD mode phi = Y V S^-1 w / lambda, so that A phi = lambda phi reproduces x_0
    if (std::abs(m.eigenvalues(j)) > 0.0) m.modes.col(j) /= m.eigenvalues(j);
  }
  m.amplitudes = m.modes.colPivHouseholderQr().solve(h.col(0));
  return m;
}

// Sample k of the fitted signal (k = 0 is the first training sample).
inline ComplexMatrix dmd_sample(const DmdModel& m, std::size_t k) {
  const auto n = static_cast<Eigen::Index>(m.dim * m.dim);
  CVec coeff(m.rank);
  for (Eigen::Index j = 0; j < m.rank; ++j) {
    coeff(j) = m.amplitudes(j) * std::pow(m.eigenvalues(j), static_cast<double>(k));
  }
  const CVec x = m.modes.topRows(n) * coeff;
  ComplexMatrix out(m.dim);
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = x(i);
  return out;
}

// The n_future samples after the training window.
inline std::vector<ComplexMatrix> dmd_extrapolate(const DmdModel& m, std::size_t n_future) {
  std::vector<ComplexMatrix> out;
  out.reserve(n_future);
  for (std::size_t k = 0; k < n_future; ++k) out.push_back(dmd_sample(m, m.n_samples + k));
  return out;
}

inline std::string format_dmd(const DmdModel& m) {
  auto c = [](Complex z) { return format_real(z.real()) + " " + format_real(z.imag()); };
  std::string s = "memop-dmd 1\n";
  s += "rank " + std::to_string(m.rank) + "\ndelay " + std::to_string(m.delay) + "\ndim " + std::to_string(m.dim) +
       "\ndt " + format_real(m.dt) + "\nsamples " + std::to_string(m.n_samples) + "\n";
  s += "singular_values";
  for (double v : m.singular_values) s += " " + format_real(v);
  s += "\neigenvalues\n";
  for (Eigen::Index j = 0; j < m.rank; ++j) s += c(m.eigenvalues(j)) + "\n";
  s += "amplitudes\n";
  for (Eigen::Index j = 0; j < m.rank; ++j) s += c(m.amplitudes(j)) + "\n";
  s += "modes " + std::to_string(m.modes.rows()) + " " + std::to_string(m.modes.cols()) + "\n";
  for (Eigen::Index r = 0; r < m.modes.rows(); ++r) {
    for (Eigen::Index j = 0; j < m.modes.cols(); ++j) s += (j ? " " : "") + c(m.modes(r, j));
    s += "\n";
  }
  return s;
}

}  // namespace memop
