#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "memop/error.hpp"
#include "memop/lstm.hpp"
#include "memop/optim.hpp"
#include "memop/parallel.hpp"
#include "memop/problems.hpp"
#include "memop/solver.hpp"

namespace memop {

// ---- datasets ----

enum class DatasetKind { Single, ToyGrid, DysonRandom };

inline std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::Single: return "single";
    case DatasetKind::ToyGrid: return "toy_grid";
    default: return "dyson_random";
  }
}

struct ToyGridSpec {
  int alpha_min = 1;
  int alpha_max = 20;
  std::vector<double> sigmas{1, 2, 3, 4, 5};
  double beta = 1.0;
};

struct DysonRandomSpec {
  double h_low = 1.0;
  double h_high = 10.0;
  double c = 1.0;
  std::size_t n_samples = 2000;
  std::uint64_t seed = 0;
};

struct DatasetSpec {
  DatasetKind kind = DatasetKind::Single;
  std::optional<ProblemSpec> single;
  std::optional<ToyGridSpec> toy_grid;
  std::optional<DysonRandomSpec> dyson_random;
  TimeGrid grid;
};

// Parameter points in dataset order: lattice row-major (alpha1, alpha2) then sigma
// ascending; Dyson by draw index with draw k seeded from seed ^ k.
inline std::vector<ProblemSpec> dataset_problems(const DatasetSpec& d) {
  std::vector<ProblemSpec> out;
  switch (d.kind) {
    case DatasetKind::Single:
      if (!d.single) throw DomainError("dataset: single kind needs a problem");
      out.push_back(*d.single);
      break;
    case DatasetKind::ToyGrid: {
      if (!d.toy_grid) throw DomainError("dataset: toy_grid kind needs grid parameters");
      const auto& g = *d.toy_grid;
      if (g.alpha_min > g.alpha_max || g.sigmas.empty()) throw DomainError("dataset: empty toy lattice");
      std::vector<double> sigmas = g.sigmas;
      std::sort(sigmas.begin(), sigmas.end());
      for (int a1 = g.alpha_min; a1 <= g.alpha_max; ++a1)
        for (int a2 = g.alpha_min; a2 <= g.alpha_max; ++a2)
          for (double s : sigmas) out.push_back(ProblemSpec::make_toy({double(a1), double(a2), s, g.beta}));
      break;
    }
    case DatasetKind::DysonRandom: {
      if (!d.dyson_random) throw DomainError("dataset: dyson_random kind needs sampling parameters");
      const auto& r = *d.dyson_random;
      if (!(r.h_low <= r.h_high) || r.n_samples == 0) throw DomainError("dataset: bad Dyson sampling range");
      for (std::size_t k = 0; k < r.n_samples; ++k) {
        std::mt19937_64 rng(r.seed ^ k);
        std::uniform_real_distribution<double> u(r.h_low, r.h_high);
        out.push_back(ProblemSpec::make_dyson({u(rng), r.c}));
      }
      break;
    }
  }
  return out;
}

// A fresh validation set drawn off the training lattice / from an independent stream.
inline std::vector<ProblemSpec> validation_problems(const DatasetSpec& d, std::size_t count, std::uint64_t seed) {
  std::vector<ProblemSpec> out;
  if (d.kind == DatasetKind::Single || count == 0) return out;
  const std::vector<ProblemSpec> train = dataset_problems(d);
  for (std::size_t k = 0; out.size() < count; ++k) {
    std::mt19937_64 rng(mix_seed(seed ^ 0x76616c6964ULL) ^ k);
    ProblemSpec p;
    if (d.kind == DatasetKind::ToyGrid) {
      const auto& g = *d.toy_grid;
      std::uniform_real_distribution<double> a(g.alpha_min, g.alpha_max);
      const auto [lo, hi] = std::minmax_element(g.sigmas.begin(), g.sigmas.end());
      std::uniform_real_distribution<double> s(*lo, *hi);
      const double a1 = a(rng), a2 = a(rng);
      p = ProblemSpec::make_toy({a1, a2, s(rng), g.beta});
    } else {
      const auto& r = *d.dyson_random;
      std::uniform_real_distribution<double> u(r.h_low, r.h_high);
      p = ProblemSpec::make_dyson({u(rng), r.c});
    }
    const bool clash = std::any_of(train.begin(), train.end(), [&](const ProblemSpec& t) { return same_parameters(t, p); });
    if (!clash) out.push_back(p);
  }
  return out;
}

// AB3 ground truth for every problem, in order. A blow-up names the offending parameters.
inline std::vector<Trajectory> solve_all(std::span<const ProblemSpec> problems, const TimeGrid& grid,
                                         unsigned threads = 1) {
  std::vector<Trajectory> out(problems.size());
  parallel_for(problems.size(), threads, [&](std::size_t k) {
    try {
      out[k] = solve_ab3(problems[k], grid);
    } catch (const BlowUpError& e) {
      throw BlowUpError("trajectory " + std::to_string(k) + " " + describe(problems[k]) + ": " + e.reason(), e.step());
    }
  });
  return out;
}

inline std::vector<Trajectory> build_dataset(const DatasetSpec& d, unsigned threads = 1) {
  const auto problems = dataset_problems(d);
  return solve_all(problems, d.grid, threads);
}

// ---- training ----

enum class TrainMode { Single, Multi };
enum class Batching { Sweep, OneRandom };
enum class Target { Integral, NextStep };

struct ValidationPolicy {
  enum class Kind { TimeSplit, HeldOut } kind = Kind::TimeSplit;
  double frac = 0.8;
};

struct TrainConfig {
  TrainMode mode = TrainMode::Single;
  long epochs = 750;
  std::size_t batch_size = 1;
  double lr0 = 0.01;
  ValidationPolicy validation;
  // Sweep: shuffle and visit every trajectory each epoch. OneRandom: one batch drawn with replacement.
  Batching batching = Batching::Sweep;
  Target target = Target::Integral;
  std::uint64_t seed = 0;
  double clip = 5.0;
  std::size_t chunk = 32;  // batch members per batched forward/backward pass
  unsigned threads = 1;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> lr;
  double wall_clock_seconds = 0.0;
  std::string checkpoint;

  long epochs_done() const noexcept { return static_cast<long>(train_loss.size()); }
};

template <class Scalar>
struct TrainState {
  RnnModel<Scalar> model;
  AdamState<Scalar> opt;
  TrainReport report;

  static TrainState fresh(RnnModel<Scalar> model, double lr0) {
    TrainState s;
    s.opt = AdamState<Scalar>::for_model(model, lr0);
    s.model = std::move(model);
    return s;
  }
};

template <class Scalar>
struct SequencePair {
  Mat<Scalar> x;
  Mat<Scalar> y;
};

// Integral: G_i -> I_i over every grid point. NextStep: G_i -> G_{i+1}.
template <class Scalar>
SequencePair<Scalar> make_pair(const Trajectory& tr, Target target) {
  if (target == Target::Integral) return {pack_sequence<Scalar>(tr.g), pack_sequence<Scalar>(tr.i_int)};
  if (tr.g.size() < 2) throw DomainError("make_pair: next-step targets need at least two samples");
  const std::span<const ComplexMatrix> g(tr.g);
  return {pack_sequence<Scalar>(g.first(g.size() - 1)), pack_sequence<Scalar>(g.subspan(1))};
}

template <class Scalar>
struct TrainingSet {
  std::vector<SequencePair<Scalar>> train;
  std::vector<SequencePair<Scalar>> validation;
};

template <class Scalar>
TrainingSet<Scalar> make_training_set(std::span<const Trajectory> train, std::span<const Trajectory> validation,
                                      Target target) {
  if (train.empty()) throw DomainError("training set is empty");
  for (const auto& v : validation) {
    for (const auto& t : train) {
      if (same_parameters(v.spec, t.spec)) {
        throw DomainError("validation trajectory " + describe(v.spec) + " also appears in the training set");
      }
    }
  }
  TrainingSet<Scalar> s;
  for (const auto& t : train) s.train.push_back(make_pair<Scalar>(t, target));
  for (const auto& t : validation) s.validation.push_back(make_pair<Scalar>(t, target));
  return s;
}

// Index of the last training column for a time split: floor(frac * (n_cols - 1)).
inline Eigen::Index split_index(Eigen::Index n_cols, double frac) {
  if (!(frac > 0.0 && frac < 1.0)) throw DomainError("time split fraction must lie in (0, 1)");
  const auto k = static_cast<Eigen::Index>(std::floor(frac * static_cast<double>(n_cols - 1)));
  if (k < 0 || k + 1 >= n_cols) throw DomainError("time split leaves no validation points");
  return k;
}

// MSE over the columns after the split, from a full-sequence pass.
template <class Scalar>
double validate_time_split(const RnnModel<Scalar>& model, const SequencePair<Scalar>& seq, double frac) {
  const Eigen::Index k = split_index(seq.x.cols(), frac);
  const auto tape = forward_sequence(model, seq.x);
  const Eigen::Index n = seq.x.cols() - k - 1;
  return mse_loss<Scalar>(tape.output.rightCols(n), seq.y.rightCols(n));
}

namespace detail {

// Interleaves members into time-major columns t*B + b.
template <class Scalar>
void interleave(std::span<const SequencePair<Scalar>> data, std::span<const std::size_t> members, Eigen::Index cols,
                Mat<Scalar>& x, Mat<Scalar>& y) {
  const auto b = static_cast<Eigen::Index>(members.size());
  x.resize(data[members[0]].x.rows(), cols * b);
  y.resize(data[members[0]].y.rows(), cols * b);
  for (Eigen::Index m = 0; m < b; ++m) {
    const auto& s = data[members[static_cast<std::size_t>(m)]];
    if (s.x.cols() < cols) throw ShapeError("training sequences must share one length");
    for (Eigen::Index t = 0; t < cols; ++t) {
      x.col(t * b + m) = s.x.col(t);
      y.col(t * b + m) = s.y.col(t);
    }
  }
}

// Gradient and summed squared error over `members`, chunked; chunk results are
// reduced in chunk order so the sum does not depend on the thread count.
template <class Scalar>
double batch_gradient(const RnnModel<Scalar>& model, std::span<const SequencePair<Scalar>> data,
                      std::span<const std::size_t> members, Eigen::Index cols, double scale, std::size_t chunk,
                      unsigned threads, RnnModel<Scalar>& grad) {
  const std::size_t n_chunks = (members.size() + chunk - 1) / chunk;
  std::vector<RnnModel<Scalar>> grads(n_chunks);
  std::vector<double> sq(n_chunks, 0.0);
  parallel_for(n_chunks, threads, [&](std::size_t c) {
    const auto part = members.subspan(c * chunk, std::min(chunk, members.size() - c * chunk));
    Mat<Scalar> x, y;
    interleave<Scalar>(data, part, cols, x, y);
    const auto tape = forward_sequence(model, std::move(x), static_cast<Eigen::Index>(part.size()));
    Mat<Scalar> diff = tape.output - y;
    sq[c] = diff.template cast<double>().squaredNorm();
    diff *= static_cast<Scalar>(2.0 * scale);
    grads[c] = backward_sequence(model, tape, diff);
  });
  grad = model.zeros_like();
  double total = 0.0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    zip_tensors([](const std::string&, auto& g, auto& gc) { g += gc; }, grad, grads[c]);
    total += sq[c];
  }
  return total;
}

// Held-out loss: mean over every entry of every validation sequence.
template <class Scalar>
double validate_held_out(const RnnModel<Scalar>& model, std::span<const SequencePair<Scalar>> data,
                         std::size_t chunk, unsigned threads) {
  if (data.empty()) throw DomainError("validation set is empty");
  const Eigen::Index cols = data[0].x.cols();
  std::vector<std::size_t> all(data.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  const std::size_t n_chunks = (all.size() + chunk - 1) / chunk;
  std::vector<double> sq(n_chunks, 0.0);
  parallel_for(n_chunks, threads, [&](std::size_t c) {
    const auto part = std::span<const std::size_t>(all).subspan(c * chunk, std::min(chunk, all.size() - c * chunk));
    Mat<Scalar> x, y;
    interleave<Scalar>(data, part, cols, x, y);
    const auto tape = forward_sequence(model, std::move(x), static_cast<Eigen::Index>(part.size()));
    sq[c] = (tape.output - y).template cast<double>().squaredNorm();
  });
  double total = 0.0;
  for (double s : sq) total += s;
  return total / static_cast<double>(data.size() * static_cast<std::size_t>(data[0].y.size()));
}

}  // namespace detail

template <class Scalar>
double validate(const RnnModel<Scalar>& model, const TrainingSet<Scalar>& data, const TrainConfig& cfg) {
  if (cfg.validation.kind == ValidationPolicy::Kind::TimeSplit) {
    return validate_time_split(model, data.train.at(0), cfg.validation.frac);
  }
  return detail::validate_held_out<Scalar>(model, data.validation, std::max<std::size_t>(1, cfg.chunk), cfg.threads);
}

inline void check_config(const TrainConfig& cfg, std::size_t n_train, std::size_t n_val) {
  if (cfg.epochs <= 0) throw DomainError("train: epochs must be positive");
  if (cfg.batch_size == 0 || cfg.batch_size > n_train) {
    throw DomainError("train: batch_size " + std::to_string(cfg.batch_size) + " must lie in [1, " +
                      std::to_string(n_train) + "]");
  }
  if (cfg.mode == TrainMode::Single) {
    if (n_train != 1) throw DomainError("train: single-trajectory mode needs exactly one trajectory");
    if (cfg.validation.kind != ValidationPolicy::Kind::TimeSplit) {
      throw DomainError("train: single-trajectory mode validates on a time split");
    }
  } else if (cfg.validation.kind == ValidationPolicy::Kind::HeldOut && n_val == 0) {
    throw DomainError("train: held-out validation needs a non-empty validation set");
  } else if (cfg.validation.kind == ValidationPolicy::Kind::TimeSplit) {
    throw DomainError("train: multi-trajectory mode validates on held-out trajectories");
  }
}

// Runs epochs [done, until) and appends to st.report. Per-epoch randomness is derived
// from (seed, epoch), so stopping and resuming replays the same run bit for bit.
// train_loss[e] is the loss seen by epoch e's gradients; val_loss[e] is after its updates.
template <class Scalar>
void train(TrainState<Scalar>& st, const TrainingSet<Scalar>& data, const TrainConfig& cfg, long until = -1) {
  check_config(cfg, data.train.size(), data.validation.size());
  if (until < 0) until = cfg.epochs;
  if (until > cfg.epochs) throw DomainError("train: cannot run past the configured epoch count");
  const Eigen::Index width = data.train[0].x.rows();
  if (width != st.model.input_size() || data.train[0].y.rows() != st.model.output_size()) {
    throw ShapeError("train: model width " + std::to_string(st.model.input_size()) + " does not match data width " +
                     std::to_string(width));
  }
  const Eigen::Index full_cols = data.train[0].x.cols();
  for (const auto& s : data.train) {
    if (s.x.cols() != full_cols) throw ShapeError("train: training sequences must share one length");
  }
  const Eigen::Index cols =
      cfg.mode == TrainMode::Single ? split_index(full_cols, cfg.validation.frac) + 1 : full_cols;
  const std::size_t chunk = std::max<std::size_t>(1, cfg.chunk);
  const auto started = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(data.train.size());
  RnnModel<Scalar> grad;
  for (long e = st.report.epochs_done(); e < until; ++e) {
    const double lr = cosine_lr(e, cfg.epochs, cfg.lr0);
    std::mt19937_64 rng(mix_seed(cfg.seed ^ mix_seed(static_cast<std::uint64_t>(e))));
    std::vector<std::vector<std::size_t>> batches;
    if (cfg.mode == TrainMode::Single) {
      batches.push_back({0});
    } else if (cfg.batching == Batching::OneRandom) {
      std::uniform_int_distribution<std::size_t> pick(0, data.train.size() - 1);
      std::vector<std::size_t> b(cfg.batch_size);
      for (auto& m : b) m = pick(rng);
      batches.push_back(std::move(b));
    } else {
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), s + cfg.batch_size)));
      }
    }

    double sq_sum = 0.0, entries = 0.0;
    for (const auto& b : batches) {
      const double n = static_cast<double>(b.size()) * static_cast<double>(cols * width);
      const double sq = detail::batch_gradient<Scalar>(st.model, data.train, b, cols, 1.0 / n, chunk, cfg.threads, grad);
      if (!std::isfinite(sq)) throw NanLossError(static_cast<std::size_t>(e));
      sq_sum += sq;
      entries += n;
      clip_global_norm(grad, cfg.clip);
      adam_step(st.model, grad, st.opt, lr);
    }
    const double val = validate(st.model, data, cfg);
    if (!std::isfinite(val)) throw NanLossError(static_cast<std::size_t>(e));
    st.report.train_loss.push_back(sq_sum / entries);
    st.report.val_loss.push_back(val);
    st.report.lr.push_back(lr);
  }
  st.report.wall_clock_seconds +=
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
}

}  // namespace memop
