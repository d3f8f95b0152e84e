#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "memop/error.hpp"
#include "memop/io.hpp"
#include "memop/problems.hpp"
#include "memop/solver.hpp"
#include "memop/text.hpp"
#include "memop/training.hpp"

namespace memop {

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  ProblemSpec problem;
  TimeGrid grid;
  DatasetSpec dataset;
  std::size_t validation_count = 0;
  int layers = 2;
  int hidden = 64;
  std::string precision = "float";
  TrainConfig train;
  std::size_t checkpoint_every = 50;
  std::size_t prefix_steps = 0;
  double t_final = 0.0;
  Stepper stepper = Stepper::AB3;
  std::optional<ProblemSpec> test;
  std::vector<double> horizons{20, 40, 80, 160};
  int bench_repeats = 3;
  int dmd_rank = 0;
  int dmd_delay = 32;

  const ProblemSpec& test_problem() const { return test ? *test : problem; }
};

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const KeyValueMap& kv, std::string source) : kv_(kv), source_(std::move(source)) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string where(const std::string& key) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? source_ : source_ + ":" + std::to_string(it->second.line);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw FormatError(where(key) + ": " + key + ": " + msg);
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    used_.insert(key);
    const auto it = kv_.find(key);
    if (it != kv_.end()) return it->second.value;
    if (!fallback) throw FormatError(source_ + ": missing required key '" + key + "'");
    return *fallback;
  }

  template <class T>
  T number(const std::string& key, std::optional<T> fallback = std::nullopt) {
    used_.insert(key);
    const auto it = kv_.find(key);
    if (it == kv_.end()) {
      if (!fallback) throw FormatError(source_ + ": missing required key '" + key + "'");
      return *fallback;
    }
    try {
      return parse_number<T>(it->second.value, key);
    } catch (const FormatError& e) {
      throw FormatError(where(key) + ": " + e.what());
    }
  }

  std::vector<double> list(const std::string& key, const std::string& fallback) {
    const std::string s = text(key, fallback);
    std::vector<double> out;
    for (auto part : split(s, ',')) {
      try {
        out.push_back(parse_number<double>(part, key));
      } catch (const FormatError& e) {
        throw FormatError(where(key) + ": " + e.what());
      }
    }
    return out;
  }

  std::string choice(const std::string& key, const std::string& fallback, std::initializer_list<const char*> options) {
    const std::string v = text(key, fallback);
    for (const char* o : options) {
      if (v == o) return v;
    }
    std::string all;
    for (const char* o : options) all += (all.empty() ? "" : ", ") + std::string(o);
    fail(key, "'" + v + "' is not one of: " + all);
  }

  void reject_unknown() const {
    for (const auto& [key, v] : kv_) {
      if (!used_.count(key)) throw FormatError(source_ + ":" + std::to_string(v.line) + ": unknown key '" + key + "'");
    }
  }

 private:
  const KeyValueMap& kv_;
  std::string source_;
  std::set<std::string> used_;
};

inline ProblemSpec read_problem(ConfigReader& in, const std::string& prefix) {
  const std::string kind = in.choice(prefix + ".kind", "", {"toy", "dyson"});
  try {
    if (kind == "toy") {
      return ProblemSpec::make_toy({in.number<double>(prefix + ".alpha1"), in.number<double>(prefix + ".alpha2"),
                                    in.number<double>(prefix + ".sigma"), in.number<double>(prefix + ".beta")});
    }
    return ProblemSpec::make_dyson({in.number<double>(prefix + ".h"), in.number<double>(prefix + ".c")});
  } catch (const DomainError& e) {
    in.fail(prefix + ".kind", e.what());
  }
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + format_real(x);
  return s;
}

}  // namespace detail

// Flat `key = value` config. Defaults follow the problem kind; unknown keys are errors.
inline ExperimentConfig parse_config(const KeyValueMap& kv, const std::string& source) {
  detail::ConfigReader in(kv, source);
  ExperimentConfig c;
  c.seed = in.number<std::uint64_t>("seed");
  c.output_dir = in.text("output_dir", "out");
  if (!in.has("problem.kind")) throw FormatError(source + ": missing required key 'problem.kind'");
  c.problem = detail::read_problem(in, "problem");
  const bool toy = c.problem.kind == ProblemKind::Toy;

  c.grid.dt = in.number<double>("grid.dt", 0.01);
  c.grid.n_steps = in.number<std::size_t>("grid.n_steps", toy ? 2000 : 1000);
  if (!(c.grid.dt > 0.0)) in.fail("grid.dt", "must be positive");
  if (c.grid.n_steps < 3) in.fail("grid.n_steps", "must be at least 3");

  const std::string dkind = in.choice("dataset.kind", "single", {"single", "toy_grid", "dyson_random"});
  c.dataset.grid = c.grid;
  if (dkind == "single") {
    c.dataset.kind = DatasetKind::Single;
    c.dataset.single = c.problem;
  } else if (dkind == "toy_grid") {
    if (!toy) in.fail("dataset.kind", "toy_grid needs problem.kind = toy");
    c.dataset.kind = DatasetKind::ToyGrid;
    ToyGridSpec g;
    g.alpha_min = in.number<int>("dataset.alpha_min", 1);
    g.alpha_max = in.number<int>("dataset.alpha_max", 20);
    g.sigmas = in.list("dataset.sigmas", "1,2,3,4,5");
    g.beta = in.number<double>("dataset.beta", 1.0);
    if (g.alpha_min > g.alpha_max) in.fail("dataset.alpha_max", "must be >= dataset.alpha_min");
    for (double s : g.sigmas) {
      if (!(s > 0.0)) in.fail("dataset.sigmas", "every sigma must be > 0");
    }
    c.dataset.toy_grid = g;
  } else {
    if (toy) in.fail("dataset.kind", "dyson_random needs problem.kind = dyson");
    c.dataset.kind = DatasetKind::DysonRandom;
    DysonRandomSpec r;
    r.h_low = in.number<double>("dataset.h_low", 1.0);
    r.h_high = in.number<double>("dataset.h_high", 10.0);
    r.c = in.number<double>("dataset.c", 1.0);
    r.n_samples = in.number<std::size_t>("dataset.n_samples", 2000);
    r.seed = c.seed;
    if (!(r.h_low <= r.h_high)) in.fail("dataset.h_high", "must be >= dataset.h_low");
    if (r.c == 0.0) in.fail("dataset.c", "must be nonzero");
    if (r.n_samples == 0) in.fail("dataset.n_samples", "must be positive");
    c.dataset.dyson_random = r;
  }
  const bool multi = c.dataset.kind != DatasetKind::Single;
  c.validation_count = in.number<std::size_t>("dataset.validation_count", multi ? 20 : 0);

  c.layers = in.number<int>("model.layers", 2);
  c.hidden = in.number<int>("model.hidden", toy ? 64 : 128);
  c.precision = in.choice("model.precision", "float", {"float", "double"});
  if (c.layers < 1) in.fail("model.layers", "must be >= 1");
  if (c.hidden < 1) in.fail("model.hidden", "must be >= 1");

  auto& t = c.train;
  const std::string mode = in.choice("train.mode", multi ? "multi" : "single", {"single", "multi"});
  t.mode = mode == "single" ? TrainMode::Single : TrainMode::Multi;
  if ((t.mode == TrainMode::Single) == multi) in.fail("train.mode", "does not match dataset.kind");
  t.epochs = in.number<long>("train.epochs", 750);
  t.batch_size = in.number<std::size_t>("train.batch_size", !multi ? 1 : toy ? 128 : 10);
  t.lr0 = in.number<double>("train.lr0", 0.01);
  const std::string val = in.choice("train.validation", multi ? "held_out" : "time_split", {"time_split", "held_out"});
  t.validation.kind = val == "time_split" ? ValidationPolicy::Kind::TimeSplit : ValidationPolicy::Kind::HeldOut;
  t.validation.frac = in.number<double>("train.split", 0.8);
  const std::string batching =
      in.choice("train.batching", dkind == "dyson_random" ? "one_random" : "sweep", {"sweep", "one_random"});
  t.batching = batching == "sweep" ? Batching::Sweep : Batching::OneRandom;
  t.clip = in.number<double>("train.clip", 5.0);
  t.chunk = in.number<std::size_t>("train.chunk", 32);
  t.seed = c.seed;
  c.checkpoint_every = in.number<std::size_t>("train.checkpoint_every", 50);
  if (t.epochs < 1) in.fail("train.epochs", "must be >= 1");
  if (!(t.lr0 > 0.0)) in.fail("train.lr0", "must be positive");
  if (t.batch_size < 1) in.fail("train.batch_size", "must be >= 1");
  if (!(t.validation.frac > 0.0 && t.validation.frac < 1.0)) in.fail("train.split", "must lie in (0, 1)");
  if (t.chunk < 1) in.fail("train.chunk", "must be >= 1");
  if (c.checkpoint_every < 1) in.fail("train.checkpoint_every", "must be >= 1");
  if (t.mode == TrainMode::Single && val != "time_split") in.fail("train.validation", "single mode uses time_split");
  if (t.mode == TrainMode::Multi && val != "held_out") in.fail("train.validation", "multi mode uses held_out");
  if (t.mode == TrainMode::Multi && c.validation_count == 0) in.fail("dataset.validation_count", "must be positive");

  c.prefix_steps = in.number<std::size_t>("extrapolation.prefix_steps", c.grid.n_steps);
  c.t_final = in.number<double>("extrapolation.t_final", toy ? 120.0 : 40.0);
  c.stepper = in.choice("extrapolation.stepper", "ab3", {"ab3", "fe"}) == "ab3" ? Stepper::AB3 : Stepper::FE;
  if (in.has("test.kind")) {
    c.test = detail::read_problem(in, "test");
    if (c.test->dim != c.problem.dim) in.fail("test.kind", "test problem must match the training problem's dimension");
  }
  try {
    const TimeGrid full = TimeGrid::until(c.grid.dt, c.t_final);
    if (full.n_steps < c.prefix_steps) in.fail("extrapolation.t_final", "lies inside the prefix");
  } catch (const DomainError& e) {
    in.fail("extrapolation.t_final", e.what());
  }

  c.horizons = in.list("benchmark.horizons", "20,40,80,160");
  c.bench_repeats = in.number<int>("benchmark.repeats", 3);
  for (std::size_t k = 0; k < c.horizons.size(); ++k) {
    if (!(c.horizons[k] > 0.0) || (k && !(c.horizons[k] > c.horizons[k - 1]))) {
      in.fail("benchmark.horizons", "must be positive and ascending");
    }
  }
  c.dmd_rank = in.number<int>("baseline.dmd_rank", 0);
  c.dmd_delay = in.number<int>("baseline.dmd_delay", 32);
  if (c.dmd_rank < 0) in.fail("baseline.dmd_rank", "must be >= 0");
  if (c.dmd_delay < 1) in.fail("baseline.dmd_delay", "must be >= 1");
  in.reject_unknown();
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  return parse_config(parse_key_values(read_file(path), path.string()), path.string());
}

// Every setting, resolved, in a form parse_config reads back to the same config.
inline std::string dump_config(const ExperimentConfig& c) {
  std::string s;
  auto kv = [&s](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
  auto problem = [&](const std::string& p, const ProblemSpec& spec) {
    kv(p + ".kind", to_string(spec.kind));
    if (spec.kind == ProblemKind::Toy) {
      kv(p + ".alpha1", format_real(spec.toy->alpha1));
      kv(p + ".alpha2", format_real(spec.toy->alpha2));
      kv(p + ".sigma", format_real(spec.toy->sigma));
      kv(p + ".beta", format_real(spec.toy->beta));
    } else {
      kv(p + ".h", format_real(spec.dyson->h));
      kv(p + ".c", format_real(spec.dyson->c));
    }
  };
  kv("seed", std::to_string(c.seed));
  kv("output_dir", c.output_dir);
  problem("problem", c.problem);
  kv("grid.dt", format_real(c.grid.dt));
  kv("grid.n_steps", std::to_string(c.grid.n_steps));
  kv("dataset.kind", to_string(c.dataset.kind));
  if (c.dataset.toy_grid) {
    kv("dataset.alpha_min", std::to_string(c.dataset.toy_grid->alpha_min));
    kv("dataset.alpha_max", std::to_string(c.dataset.toy_grid->alpha_max));
    kv("dataset.sigmas", detail::join(c.dataset.toy_grid->sigmas));
    kv("dataset.beta", format_real(c.dataset.toy_grid->beta));
  }
  if (c.dataset.dyson_random) {
    kv("dataset.h_low", format_real(c.dataset.dyson_random->h_low));
    kv("dataset.h_high", format_real(c.dataset.dyson_random->h_high));
    kv("dataset.c", format_real(c.dataset.dyson_random->c));
    kv("dataset.n_samples", std::to_string(c.dataset.dyson_random->n_samples));
  }
  kv("dataset.validation_count", std::to_string(c.validation_count));
  kv("model.layers", std::to_string(c.layers));
  kv("model.hidden", std::to_string(c.hidden));
  kv("model.precision", c.precision);
  const auto& t = c.train;
  kv("train.mode", t.mode == TrainMode::Single ? "single" : "multi");
  kv("train.epochs", std::to_string(t.epochs));
  kv("train.batch_size", std::to_string(t.batch_size));
  kv("train.lr0", format_real(t.lr0));
  kv("train.validation", t.validation.kind == ValidationPolicy::Kind::TimeSplit ? "time_split" : "held_out");
  kv("train.split", format_real(t.validation.frac));
  kv("train.batching", t.batching == Batching::Sweep ? "sweep" : "one_random");
  kv("train.clip", format_real(t.clip));
  kv("train.chunk", std::to_string(t.chunk));
  kv("train.checkpoint_every", std::to_string(c.checkpoint_every));
  kv("extrapolation.prefix_steps", std::to_string(c.prefix_steps));
  kv("extrapolation.t_final", format_real(c.t_final));
  kv("extrapolation.stepper", to_string(c.stepper));
  if (c.test) problem("test", *c.test);
  kv("benchmark.horizons", detail::join(c.horizons));
  kv("benchmark.repeats", std::to_string(c.bench_repeats));
  kv("baseline.dmd_rank", std::to_string(c.dmd_rank));
  kv("baseline.dmd_delay", std::to_string(c.dmd_delay));
  return s;
}

}  // namespace memop
