#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <type_traits>
#include <vector>

#include "memop/error.hpp"
#include "memop/numerics.hpp"

namespace memop {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// One LSTM layer. Gate rows are stacked in the order input, forget, cell, output.
template <class Scalar>
struct LstmLayerParams {
  Mat<Scalar> w_x;  // 4H x input
  Mat<Scalar> w_h;  // 4H x H
  Vec<Scalar> b;    // 4H

  Eigen::Index input_size() const noexcept { return w_x.cols(); }
  Eigen::Index hidden_size() const noexcept { return w_h.cols(); }
};

// Stacked LSTM with a linear head applied to the top hidden state at every step.
// The same type doubles as the gradient container.
template <class Scalar>
struct RnnModel {
  std::vector<LstmLayerParams<Scalar>> layers;
  Mat<Scalar> head_w;  // out x H_top
  Vec<Scalar> head_b;  // out
  std::uint64_t seed = 0;

  Eigen::Index input_size() const { return layers.front().input_size(); }
  Eigen::Index output_size() const { return head_w.rows(); }
  std::vector<int> hidden_sizes() const {
    std::vector<int> h;
    for (const auto& l : layers) h.push_back(static_cast<int>(l.hidden_size()));
    return h;
  }

  static RnnModel zeros(int input, const std::vector<int>& hidden, int output) {
    if (hidden.empty()) throw ShapeError("RnnModel: at least one layer required");
    if (input <= 0 || output <= 0) throw ShapeError("RnnModel: sizes must be positive");
    RnnModel m;
    int in = input;
    for (int h : hidden) {
      if (h <= 0) throw ShapeError("RnnModel: hidden size must be positive");
      m.layers.push_back({Mat<Scalar>::Zero(4 * h, in), Mat<Scalar>::Zero(4 * h, h), Vec<Scalar>::Zero(4 * h)});
      in = h;
    }
    m.head_w = Mat<Scalar>::Zero(output, in);
    m.head_b = Vec<Scalar>::Zero(output);
    return m;
  }

  // Uniform on [-1/sqrt(H), 1/sqrt(H)] for every weight and bias, plus 1 on the forget-gate bias.
  static RnnModel random(int input, const std::vector<int>& hidden, int output, std::uint64_t seed) {
    RnnModel m = zeros(input, hidden, output);
    m.seed = seed;
    std::mt19937_64 rng(seed);
    auto fill = [&rng](auto& t, double bound) {
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = static_cast<Scalar>(u(rng));
    };
    for (auto& l : m.layers) {
      const Eigen::Index h = l.hidden_size();
      const double bound = 1.0 / std::sqrt(static_cast<double>(h));
      fill(l.w_x, bound);
      fill(l.w_h, bound);
      fill(l.b, bound);
      l.b.segment(h, h).array() += Scalar(1);
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.head_w.cols()));
    fill(m.head_w, bound);
    fill(m.head_b, bound);
    return m;
  }

  RnnModel zeros_like() const {
    RnnModel z = zeros(static_cast<int>(input_size()), hidden_sizes(), static_cast<int>(output_size()));
    z.seed = seed;
    return z;
  }

  std::size_t parameter_count() const {
    std::size_t n = static_cast<std::size_t>(head_w.size() + head_b.size());
    for (const auto& l : layers) n += static_cast<std::size_t>(l.w_x.size() + l.w_h.size() + l.b.size());
    return n;
  }

  bool same_shape(const RnnModel& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      if (layers[k].w_x.rows() != o.layers[k].w_x.rows() || layers[k].w_x.cols() != o.layers[k].w_x.cols() ||
          layers[k].w_h.cols() != o.layers[k].w_h.cols()) {
        return false;
      }
    }
    return head_w.rows() == o.head_w.rows() && head_w.cols() == o.head_w.cols();
  }
};

// Calls f(name, t0, t1, ...) for each parameter tensor, walking the models in lockstep.
template <class F, class First, class... Rest>
void zip_tensors(F&& f, First& first, Rest&... rest) {
  for (std::size_t l = 0; l < first.layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    f(p + "w_x", first.layers[l].w_x, rest.layers[l].w_x...);
    f(p + "w_h", first.layers[l].w_h, rest.layers[l].w_h...);
    f(p + "b", first.layers[l].b, rest.layers[l].b...);
  }
  f(std::string("head.w"), first.head_w, rest.head_w...);
  f(std::string("head.b"), first.head_b, rest.head_b...);
}

namespace detail {

template <class Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& z) {
  using S = typename Derived::Scalar;
  return S(0.5) * (S(0.5) * z).tanh() + S(0.5);
}

// Turns pre-activations z (4H x B) into gates in place and advances (c, h).
template <class Scalar>
void cell_activate(Eigen::Ref<Mat<Scalar>> z, const Eigen::Ref<const Mat<Scalar>>& c_prev,
                   Eigen::Ref<Mat<Scalar>> c, Eigen::Ref<Mat<Scalar>> tanh_c, Eigen::Ref<Mat<Scalar>> h) {
  const Eigen::Index hs = c.rows();
  z.topRows(2 * hs) = sigmoid(z.topRows(2 * hs).array()).matrix();
  z.middleRows(2 * hs, hs) = z.middleRows(2 * hs, hs).array().tanh().matrix();
  z.bottomRows(hs) = sigmoid(z.bottomRows(hs).array()).matrix();
  c.array() = z.middleRows(hs, hs).array() * c_prev.array() + z.topRows(hs).array() * z.middleRows(2 * hs, hs).array();
  tanh_c.array() = c.array().tanh();
  h.array() = z.bottomRows(hs).array() * tanh_c.array();
}

}  // namespace detail

template <class Scalar>
struct CellOutput {
  Mat<Scalar> h;
  Mat<Scalar> c;
  Mat<Scalar> gates;  // post-activation i, f, g, o
  Mat<Scalar> tanh_c;
};

// One cell advance for a batch of column vectors x (input x B).
template <class Scalar>
CellOutput<Scalar> lstm_cell_forward(const LstmLayerParams<Scalar>& p, const std::type_identity_t<Mat<Scalar>>& x,
                                     const std::type_identity_t<Mat<Scalar>>& h_prev,
                                     const std::type_identity_t<Mat<Scalar>>& c_prev) {
  const Eigen::Index hs = p.hidden_size();
  if (x.rows() != p.input_size() || h_prev.rows() != hs || c_prev.rows() != hs || h_prev.cols() != x.cols() ||
      c_prev.cols() != x.cols()) {
    throw ShapeError("lstm_cell_forward: shape mismatch");
  }
  CellOutput<Scalar> out;
  out.gates = p.w_x * x + p.w_h * h_prev;
  out.gates.colwise() += p.b;
  out.c.resize(hs, x.cols());
  out.tanh_c.resize(hs, x.cols());
  out.h.resize(hs, x.cols());
  detail::cell_activate<Scalar>(out.gates, c_prev, out.c, out.tanh_c, out.h);
  return out;
}

template <class Scalar>
struct LayerTape {
  Mat<Scalar> gates;   // 4H x (T*B)
  Mat<Scalar> c;       // H x (T*B)
  Mat<Scalar> tanh_c;  // H x (T*B)
  Mat<Scalar> h;       // H x (T*B)
};

// Activation record of a batched sequence pass. Column t*B + b holds step t of member b.
template <class Scalar>
struct SequenceTape {
  Eigen::Index batch = 0;
  Eigen::Index steps = 0;
  Mat<Scalar> input;
  std::vector<LayerTape<Scalar>> layers;
  Mat<Scalar> output;  // out x (T*B)
};

// Sequence-to-sequence pass from zero states. inputs is (input x T*B), time-major columns.
template <class Scalar>
SequenceTape<Scalar> forward_sequence(const RnnModel<Scalar>& model, std::type_identity_t<Mat<Scalar>> inputs,
                                      Eigen::Index batch = 1) {
  if (batch <= 0 || inputs.cols() % batch != 0) throw ShapeError("forward_sequence: bad batch layout");
  if (inputs.rows() != model.input_size()) {
    throw ShapeError("forward_sequence: input width " + std::to_string(inputs.rows()) + " != model input " +
                     std::to_string(model.input_size()));
  }
  SequenceTape<Scalar> tape;
  tape.batch = batch;
  tape.steps = inputs.cols() / batch;
  tape.input = std::move(inputs);
  const Eigen::Index cols = tape.input.cols();
  const Mat<Scalar>* below = &tape.input;
  tape.layers.resize(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& p = model.layers[l];
    auto& lt = tape.layers[l];
    const Eigen::Index hs = p.hidden_size();
    lt.gates.noalias() = p.w_x * (*below);
    lt.gates.colwise() += p.b;
    lt.c.resize(hs, cols);
    lt.tanh_c.resize(hs, cols);
    lt.h.resize(hs, cols);
    const Mat<Scalar> zero = Mat<Scalar>::Zero(hs, batch);
    for (Eigen::Index t = 0; t < tape.steps; ++t) {
      const Eigen::Index c0 = t * batch;
      auto z = lt.gates.middleCols(c0, batch);
      if (t > 0) {
        z.noalias() += p.w_h * lt.h.middleCols(c0 - batch, batch);
        detail::cell_activate<Scalar>(z, lt.c.middleCols(c0 - batch, batch), lt.c.middleCols(c0, batch),
                                      lt.tanh_c.middleCols(c0, batch), lt.h.middleCols(c0, batch));
      } else {
        detail::cell_activate<Scalar>(z, zero, lt.c.middleCols(c0, batch), lt.tanh_c.middleCols(c0, batch),
                                      lt.h.middleCols(c0, batch));
      }
    }
    below = &lt.h;
  }
  tape.output.noalias() = model.head_w * (*below);
  tape.output.colwise() += model.head_b;
  return tape;
}

// Exact BPTT. d_output is dLoss/dOutput with the tape's layout; returns parameter gradients.
template <class Scalar>
RnnModel<Scalar> backward_sequence(const RnnModel<Scalar>& model, const SequenceTape<Scalar>& tape,
                                   const std::type_identity_t<Mat<Scalar>>& d_output) {
  if (tape.layers.size() != model.layers.size() || d_output.rows() != model.output_size() ||
      d_output.cols() != tape.output.cols()) {
    throw ShapeError("backward_sequence: tape/model/gradient mismatch");
  }
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    if (tape.layers[l].h.rows() != model.layers[l].hidden_size()) {
      throw ShapeError("backward_sequence: tape does not match model layer " + std::to_string(l));
    }
  }
  RnnModel<Scalar> grad = model.zeros_like();
  const Eigen::Index batch = tape.batch;
  const Eigen::Index cols = tape.output.cols();

  grad.head_w.noalias() = d_output * tape.layers.back().h.transpose();
  grad.head_b = d_output.rowwise().sum();
  Mat<Scalar> d_h_above = model.head_w.transpose() * d_output;

  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const auto& p = model.layers[li];
    const auto& lt = tape.layers[li];
    const Eigen::Index hs = p.hidden_size();
    Mat<Scalar> dz(4 * hs, cols);
    Mat<Scalar> dh_next = Mat<Scalar>::Zero(hs, batch);
    Mat<Scalar> dc_next = Mat<Scalar>::Zero(hs, batch);
    Mat<Scalar> dh(hs, batch), dc(hs, batch);
    for (Eigen::Index t = tape.steps; t-- > 0;) {
      const Eigen::Index c0 = t * batch;
      const auto gates = lt.gates.middleCols(c0, batch).array();
      const auto ig = gates.topRows(hs);
      const auto fg = gates.middleRows(hs, hs);
      const auto gg = gates.middleRows(2 * hs, hs);
      const auto og = gates.bottomRows(hs);
      const auto tc = lt.tanh_c.middleCols(c0, batch).array();

      dh = d_h_above.middleCols(c0, batch) + dh_next;
      dc.array() = dc_next.array() + dh.array() * og * (Scalar(1) - tc * tc);

      auto d = dz.middleCols(c0, batch).array();
      if (t > 0) {
        d.middleRows(hs, hs) = dc.array() * lt.c.middleCols(c0 - batch, batch).array() * fg * (Scalar(1) - fg);
      } else {
        d.middleRows(hs, hs).setZero();
      }
      d.topRows(hs) = dc.array() * gg * ig * (Scalar(1) - ig);
      d.middleRows(2 * hs, hs) = dc.array() * ig * (Scalar(1) - gg * gg);
      d.bottomRows(hs) = dh.array() * tc * og * (Scalar(1) - og);
      dc_next.array() = dc.array() * fg;
      if (t > 0) dh_next.noalias() = p.w_h.transpose() * dz.middleCols(c0, batch);
    }
    const Mat<Scalar>& below = li == 0 ? tape.input : tape.layers[li - 1].h;
    auto& gl = grad.layers[li];
    gl.w_x.noalias() = dz * below.transpose();
    if (cols > batch) gl.w_h.noalias() = dz.rightCols(cols - batch) * lt.h.leftCols(cols - batch).transpose();
    gl.b = dz.rowwise().sum();
    if (li > 0) d_h_above.noalias() = p.w_x.transpose() * dz;
  }
  return grad;
}

// Mean over every scalar entry of (pred - target)^2.
template <class Scalar>
double mse_loss(const Mat<Scalar>& pred, const Mat<Scalar>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("mse_loss: shape mismatch");
  if (pred.size() == 0) throw ShapeError("mse_loss: empty input");
  return (pred - target).template cast<double>().squaredNorm() / static_cast<double>(pred.size());
}

inline double mse_loss(std::span<const RealVector> pred, std::span<const RealVector> target) {
  if (pred.size() != target.size() || pred.empty()) throw ShapeError("mse_loss: length mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (pred[t].size() != target[t].size()) throw ShapeError("mse_loss: width mismatch");
    for (std::size_t k = 0; k < pred[t].size(); ++k) {
      const double d = pred[t][k] - target[t][k];
      sum += d * d;
    }
    n += pred[t].size();
  }
  return sum / static_cast<double>(n);
}

// Step-by-step inference carrying per-layer (h, c).
template <class Scalar>
class LstmStreamer {
 public:
  explicit LstmStreamer(const RnnModel<Scalar>& model) : model_(&model) { reset(); }

  void reset() {
    h_.clear();
    c_.clear();
    for (const auto& l : model_->layers) {
      h_.push_back(Mat<Scalar>::Zero(l.hidden_size(), 1));
      c_.push_back(Mat<Scalar>::Zero(l.hidden_size(), 1));
    }
    z_.resize(model_->layers.size());
    tanh_c_.resize(model_->layers.size());
  }

  // Adopts the final states of column `member` of a sequence tape.
  void load_final_state(const SequenceTape<Scalar>& tape, Eigen::Index member = 0) {
    const Eigen::Index col = (tape.steps - 1) * tape.batch + member;
    for (std::size_t l = 0; l < h_.size(); ++l) {
      h_[l] = tape.layers[l].h.col(col);
      c_[l] = tape.layers[l].c.col(col);
    }
  }

  const Mat<Scalar>& step(const Mat<Scalar>& x) {
    if (x.rows() != model_->input_size() || x.cols() != 1) throw ShapeError("LstmStreamer: bad input");
    const Mat<Scalar>* below = &x;
    for (std::size_t l = 0; l < model_->layers.size(); ++l) {
      const auto& p = model_->layers[l];
      z_[l].noalias() = p.w_x * (*below);
      z_[l].noalias() += p.w_h * h_[l];
      z_[l] += p.b;
      tanh_c_[l].resize(p.hidden_size(), 1);
      const Mat<Scalar> c_prev = c_[l];
      detail::cell_activate<Scalar>(z_[l], c_prev, c_[l], tanh_c_[l], h_[l]);
      below = &h_[l];
    }
    out_.noalias() = model_->head_w * (*below);
    out_ += model_->head_b;
    return out_;
  }

  const Mat<Scalar>& hidden(std::size_t layer) const { return h_[layer]; }
  const Mat<Scalar>& cell(std::size_t layer) const { return c_[layer]; }

 private:
  const RnnModel<Scalar>* model_;
  std::vector<Mat<Scalar>> h_, c_, z_, tanh_c_;
  Mat<Scalar> out_;
};

// Packs flattened complex matrices into a (2 dim^2 x T) column sequence.
template <class Scalar>
Mat<Scalar> pack_sequence(std::span<const ComplexMatrix> g) {
  if (g.empty()) throw ShapeError("pack_sequence: empty sequence");
  const Eigen::Index width = 2 * static_cast<Eigen::Index>(g.front().size());
  Mat<Scalar> m(width, static_cast<Eigen::Index>(g.size()));
  const std::size_t n = g.front().size();
  for (std::size_t t = 0; t < g.size(); ++t) {
    for (std::size_t k = 0; k < n; ++k) {
      m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = static_cast<Scalar>(g[t][k].real());
      m(static_cast<Eigen::Index>(n + k), static_cast<Eigen::Index>(t)) = static_cast<Scalar>(g[t][k].imag());
    }
  }
  return m;
}

template <class Derived>
ComplexMatrix unpack_column(const Eigen::MatrixBase<Derived>& col, int dim) {
  ComplexMatrix m(dim);
  const std::size_t n = m.size();
  if (static_cast<std::size_t>(col.size()) != 2 * n) throw ShapeError("unpack_column: width mismatch");
  for (std::size_t k = 0; k < n; ++k) {
    m[k] = Complex(static_cast<double>(col(static_cast<Eigen::Index>(k))),
                   static_cast<double>(col(static_cast<Eigen::Index>(n + k))));
  }
  return m;
}

}  // namespace memop
