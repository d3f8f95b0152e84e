#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "memop/error.hpp"
#include "memop/lstm.hpp"

namespace memop {

// lr0 (1 + cos(pi epoch / total)) / 2
inline double cosine_lr(long epoch, long total_epochs, double lr0) {
  if (total_epochs <= 0 || epoch < 0 || epoch > total_epochs) {
    throw DomainError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total_epochs) +
                      "]");
  }
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(total_epochs)));
}

template <class Scalar>
struct AdamState {
  RnnModel<Scalar> m;
  RnnModel<Scalar> v;
  std::uint64_t step_count = 0;
  double lr0 = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_model(const RnnModel<Scalar>& model, double lr0) {
    if (!(lr0 > 0.0)) throw DomainError("AdamState: lr0 must be positive");
    AdamState s;
    s.m = model.zeros_like();
    s.v = model.zeros_like();
    s.lr0 = lr0;
    return s;
  }
};

// Bias-corrected Adam update with learning rate lr.
template <class Scalar>
void adam_step(RnnModel<Scalar>& params, RnnModel<Scalar>& grads, AdamState<Scalar>& opt, double lr) {
  if (!params.same_shape(grads) || !params.same_shape(opt.m) || !params.same_shape(opt.v)) {
    throw ShapeError("adam_step: parameter/gradient/state shape mismatch");
  }
  ++opt.step_count;
  const double t = static_cast<double>(opt.step_count);
  const Scalar b1 = static_cast<Scalar>(opt.beta1);
  const Scalar b2 = static_cast<Scalar>(opt.beta2);
  const Scalar c1 = static_cast<Scalar>(1.0 / (1.0 - std::pow(opt.beta1, t)));
  const Scalar c2 = static_cast<Scalar>(1.0 / (1.0 - std::pow(opt.beta2, t)));
  const Scalar step = static_cast<Scalar>(lr);
  const Scalar eps = static_cast<Scalar>(opt.eps);
  zip_tensors(
      [&](const std::string&, auto& p, auto& g, auto& m, auto& v) {
        m.array() = b1 * m.array() + (Scalar(1) - b1) * g.array();
        v.array() = b2 * v.array() + (Scalar(1) - b2) * g.array().square();
        p.array() -= step * (m.array() * c1) / ((v.array() * c2).sqrt() + eps);
      },
      params, grads, opt.m, opt.v);
}

template <class Scalar>
double global_norm(RnnModel<Scalar>& grads) {
  double sq = 0.0;
  zip_tensors([&](const std::string&, auto& g) { sq += g.template cast<double>().squaredNorm(); }, grads);
  return std::sqrt(sq);
}

// Rescales grads so their global L2 norm is at most max_norm; returns the norm before clipping.
template <class Scalar>
double clip_global_norm(RnnModel<Scalar>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const Scalar s = static_cast<Scalar>(max_norm / norm);
    zip_tensors([&](const std::string&, auto& g) { g *= s; }, grads);
  }
  return norm;
}

}  // namespace memop
