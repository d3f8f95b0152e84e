#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "memop/baselines.hpp"
#include "memop/checkpoint.hpp"
#include "memop/config.hpp"
#include "memop/extrapolate.hpp"
#include "memop/io.hpp"
#include "memop/parallel.hpp"
#include "memop/training.hpp"

namespace {

using namespace memop;

constexpr int kConfigError = 2;
constexpr int kSolverBlowUp = 3;
constexpr int kNanLoss = 4;
constexpr int kExtrapolationBlowUp = 5;

struct Options {
  std::string config;
  std::string out;
  std::string resume;
  std::string checkpoint;
  std::string dataset;
  std::string mode = "direct";
  std::uint64_t seed = 0;
  long stop_after = -1;
  bool seed_given = false;
  bool dump = false;
};

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig c = load_config(o.config);
  if (o.seed_given) {
    c.seed = o.seed;
    c.train.seed = o.seed;
    if (c.dataset.dyson_random) c.dataset.dyson_random->seed = o.seed;
  }
  if (!o.out.empty()) c.output_dir = o.out;
  return c;
}

fs::path out_dir(const ExperimentConfig& c) { return c.output_dir; }
fs::path dataset_dir(const ExperimentConfig& c, const Options& o) {
  return o.dataset.empty() ? out_dir(c) / "dataset" : fs::path(o.dataset);
}
fs::path checkpoint_path(const ExperimentConfig& c, const Options& o) {
  return o.checkpoint.empty() ? out_dir(c) / "checkpoint.txt" : fs::path(o.checkpoint);
}

// ---- dataset on disk ----

std::string file_name(const char* stem, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu.csv", stem, k);
  return buf;
}

std::string params_of(const ProblemSpec& p) {
  if (p.kind == ProblemKind::Toy) {
    return format_real(p.toy->alpha1) + " " + format_real(p.toy->alpha2) + " " + format_real(p.toy->sigma) + " " +
           format_real(p.toy->beta);
  }
  return format_real(p.dyson->h) + " " + format_real(p.dyson->c);
}

ProblemSpec spec_from(ProblemKind kind, std::string_view params, const std::string& where) {
  std::vector<double> v;
  for (auto f : split(trim(params), ' ')) {
    if (!f.empty()) v.push_back(parse_number<double>(f, where));
  }
  if (kind == ProblemKind::Toy) {
    if (v.size() != 4) throw FormatError(where + ": expected alpha1 alpha2 sigma beta");
    return ProblemSpec::make_toy({v[0], v[1], v[2], v[3]});
  }
  if (v.size() != 2) throw FormatError(where + ": expected h c");
  return ProblemSpec::make_dyson({v[0], v[1]});
}

CsvTrajectory to_csv(const Trajectory& tr) {
  CsvTrajectory c;
  c.dim = tr.spec.dim;
  for (std::size_t i = 0; i < tr.g.size(); ++i) c.t.push_back(tr.grid.t(i));
  c.g = tr.g;
  c.i_int = tr.i_int;
  return c;
}

void write_dataset(const fs::path& dir, const ExperimentConfig& c, const std::vector<Trajectory>& train,
                   const std::vector<Trajectory>& val) {
  parallel_for(train.size() + val.size(), thread_count(), [&](std::size_t k) {
    if (k < train.size()) atomic_write(dir / file_name("traj", k), format_csv(to_csv(train[k])));
    else atomic_write(dir / file_name("val", k - train.size()), format_csv(to_csv(val[k - train.size()])));
  });
  std::string m = "# memop dataset manifest\nformat = 1\n";
  m += "problem.kind = " + to_string(c.problem.kind) + "\n";
  m += "dataset.kind = " + to_string(c.dataset.kind) + "\n";
  m += "grid.dt = " + format_real(c.grid.dt) + "\n";
  m += "grid.n_steps = " + std::to_string(c.grid.n_steps) + "\n";
  m += "seed = " + std::to_string(c.seed) + "\n";
  m += "train.count = " + std::to_string(train.size()) + "\n";
  m += "validation.count = " + std::to_string(val.size()) + "\n";
  m += c.problem.kind == ProblemKind::Toy ? "# params: alpha1 alpha2 sigma beta\n" : "# params: h c\n";
  for (std::size_t k = 0; k < train.size(); ++k) m += "train." + std::to_string(k) + " = " + params_of(train[k].spec) + "\n";
  for (std::size_t k = 0; k < val.size(); ++k) m += "validation." + std::to_string(k) + " = " + params_of(val[k].spec) + "\n";
  atomic_write(dir / "manifest.txt", m);
}

struct Dataset {
  std::vector<Trajectory> train;
  std::vector<Trajectory> validation;
};

Dataset load_dataset(const fs::path& dir, const ExperimentConfig& c) {
  const fs::path mpath = dir / "manifest.txt";
  if (!fs::exists(mpath)) throw DomainError("no dataset manifest at " + mpath.string() + " (run generate first)");
  const auto kv = parse_key_values(read_file(mpath), mpath.string());
  auto get = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(mpath.string() + ": missing '" + key + "'");
    return it->second.value;
  };
  if (get("format") != "1") throw FormatError(mpath.string() + ": unsupported format " + get("format"));
  auto expect = [&](const std::string& key, const std::string& want) {
    if (get(key) != want) {
      throw DomainError("dataset " + mpath.string() + " has " + key + " = " + get(key) + " but the config has " + want);
    }
  };
  expect("problem.kind", to_string(c.problem.kind));
  expect("dataset.kind", to_string(c.dataset.kind));
  expect("grid.dt", format_real(c.grid.dt));
  expect("grid.n_steps", std::to_string(c.grid.n_steps));
  expect("seed", std::to_string(c.seed));

  auto load = [&](const char* key, const char* stem) {
    const std::size_t n = parse_number<std::size_t>(get(std::string(key) + ".count"), key);
    std::vector<Trajectory> out(n);
    parallel_for(n, thread_count(), [&](std::size_t k) {
      const std::string entry = std::string(key) + "." + std::to_string(k);
      const ProblemSpec spec = spec_from(c.problem.kind, get(entry), mpath.string() + ":" + std::to_string(kv.at(entry).line));
      const fs::path f = dir / file_name(stem, k);
      auto csv = parse_csv(read_file(f), f.string());
      if (csv.dim != spec.dim || csv.g.size() != c.grid.n_points()) {
        throw FormatError(f.string() + ": expected " + std::to_string(c.grid.n_points()) + " rows of a " +
                          std::to_string(spec.dim) + "x" + std::to_string(spec.dim) + " problem");
      }
      out[k] = Trajectory{spec, c.grid, std::move(csv.g), std::move(csv.i_int)};
    });
    return out;
  };
  return {load("train", "traj"), load("validation", "val")};
}

// ---- results ----

void write_result(const fs::path& path, const ExtrapolationResult& r, int dim) {
  CsvTrajectory c;
  c.dim = dim;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < r.g.size(); ++i) {
    c.t.push_back(r.grid.t(i));
    c.g.push_back(r.g[i]);
    if (i < r.i_hat.size()) {
      c.i_int.push_back(r.i_hat[i]);
    } else {
      ComplexMatrix m(dim);
      for (std::size_t k = 0; k < m.size(); ++k) m[k] = Complex(nan, nan);
      c.i_int.push_back(m);
    }
    c.extrapolated.push_back(i > r.training_horizon_index ? 1 : 0);
  }
  atomic_write(path, format_csv(c));
}

// Analytic solution for Dyson, an AB3 solve otherwise (nullopt if that solve blows up).
std::optional<std::vector<ComplexMatrix>> reference(const ProblemSpec& spec, const TimeGrid& grid) {
  if (spec.kind == ProblemKind::Dyson) {
    std::vector<ComplexMatrix> g;
    for (std::size_t i = 0; i < grid.n_points(); ++i) g.push_back(ComplexMatrix::scalar(1, dyson_analytic(*spec.dyson, grid.t(i))));
    return g;
  }
  try {
    return solve_ab3(spec, grid).g;
  } catch (const BlowUpError& e) {
    std::cerr << "warning: reference solve failed (" << e.what() << "); no error columns written\n";
    return std::nullopt;
  }
}

std::string error_header(int dim) {
  std::string h = "t,extrapolated";
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) h += ",abs_err_" + std::to_string(r) + std::to_string(c);
  }
  return h;
}

// Writes |G_pred - G_ref| per component and prints max / time-averaged error over the
// extrapolated window.
void write_errors(const fs::path& path, const ExtrapolationResult& r, const std::vector<ComplexMatrix>& ref, int dim) {
  const std::size_t n = std::min(r.g.size(), ref.size());
  const std::size_t comps = static_cast<std::size_t>(dim * dim);
  std::string s = error_header(dim) + "\n";
  std::vector<double> mean(comps, 0.0);
  double worst = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool ext = i > r.training_horizon_index;
    s += format_real(r.grid.t(i)) + (ext ? ",1" : ",0");
    for (std::size_t k = 0; k < comps; ++k) {
      const double e = std::abs(r.g[i][k] - ref[i][k]);
      s += "," + format_real(e);
      if (ext) {
        mean[k] += e;
        worst = std::max(worst, e);
      }
    }
    counted += ext;
    s += '\n';
  }
  atomic_write(path, s);
  if (counted) {
    std::cout << "  max |error| over extrapolated window: " << format_real(worst) << "\n  time-averaged |error| per component:";
    for (double m : mean) std::cout << " " << format_real(m / static_cast<double>(counted));
    std::cout << "\n";
  }
}

const char* kPlotScript = R"(#!/usr/bin/env python3
# Plots the CSV files found next to this script. Needs pandas and matplotlib.
import pathlib
import sys

import matplotlib.pyplot as plt
import pandas as pd

here = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else __file__).resolve()
here = here if here.is_dir() else here.parent

report = here / "train_report.csv"
if report.exists():
    r = pd.read_csv(report)
    plt.figure()
    plt.semilogy(r.epoch, r.train_loss, label="train")
    plt.semilogy(r.epoch, r.val_loss, label="validation")
    plt.xlabel("epoch"); plt.ylabel("MSE"); plt.legend()
    plt.savefig(here / "train_report.png", dpi=150)

for name in ["extrapolation", "baseline_direct", "baseline_dmd"]:
    f = here / f"{name}.csv"
    if not f.exists():
        continue
    d = pd.read_csv(f)
    cols = [c for c in d.columns if c.startswith("re_G_") or c.startswith("im_G_")]
    fig, axes = plt.subplots(len(cols), 1, figsize=(7, 1.8 * len(cols)), sharex=True, squeeze=False)
    start = d.t[d.extrapolated == 1].min() if (d.extrapolated == 1).any() else None
    for ax, c in zip(axes[:, 0], cols):
        ax.plot(d.t, d[c], lw=1)
        if start is not None:
            ax.axvline(start, color="k", ls=":", lw=0.8)
        ax.set_ylabel(c)
    axes[-1, 0].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(here / f"{name}.png", dpi=150)
    e = here / f"{name}_errors.csv"
    if e.exists():
        err = pd.read_csv(e)
        plt.figure()
        for c in [c for c in err.columns if c.startswith("abs_err_")]:
            plt.semilogy(err.t, err[c], lw=1, label=c)
        plt.xlabel("t"); plt.ylabel("|G - G_ref|"); plt.legend()
        plt.savefig(here / f"{name}_errors.png", dpi=150)

b = here / "benchmark.csv"
if b.exists():
    d = pd.read_csv(b)
    plt.figure()
    plt.loglog(d.horizon, d.hybrid_seconds, "o-", label="hybrid")
    plt.loglog(d.horizon, d.solver_seconds, "s-", label="full solver")
    plt.xlabel("horizon T"); plt.ylabel("seconds"); plt.legend()
    plt.savefig(here / "benchmark.png", dpi=150)
)";

void write_plot_script(const ExperimentConfig& c) { atomic_write(out_dir(c) / "plot.py", kPlotScript); }

// ---- commands ----

int cmd_generate(const ExperimentConfig& c, const Options& o) {
  const fs::path dir = dataset_dir(c, o);
  const unsigned threads = thread_count();
  const auto problems = dataset_problems(c.dataset);
  const auto vproblems = c.validation_count ? validation_problems(c.dataset, c.validation_count, c.seed)
                                            : std::vector<ProblemSpec>{};
  std::cout << "generate: " << problems.size() << " training and " << vproblems.size() << " validation trajectories, "
            << c.grid.n_steps << " steps of " << format_real(c.grid.dt) << " (" << threads << " threads)\n";
  const auto train = solve_all(problems, c.grid, threads);
  const auto val = solve_all(vproblems, c.grid, threads);
  write_dataset(dir, c, train, val);
  std::cout << "wrote " << (dir / "manifest.txt").string() << "\n";
  return 0;
}

template <class S>
RnnModel<S> fresh_model(const ExperimentConfig& c) {
  const int w = 2 * c.problem.dim * c.problem.dim;
  return RnnModel<S>::random(w, std::vector<int>(static_cast<std::size_t>(c.layers), c.hidden), w, c.seed);
}

template <class S>
TrainState<S> run_training(const ExperimentConfig& c, const Options& o, Target target, const std::string& stem) {
  const Dataset ds = load_dataset(dataset_dir(c, o), c);
  TrainConfig cfg = c.train;
  cfg.target = target;
  cfg.threads = thread_count();
  const auto data = make_training_set<S>(ds.train, ds.validation, target);
  const CheckpointMeta meta{cfg.clip, cfg.lr0, cfg.epochs, cfg.seed, target};

  TrainState<S> st = TrainState<S>::fresh(fresh_model<S>(c), cfg.lr0);
  if (!o.resume.empty()) {
    CheckpointMeta was;
    TrainState<S> back = load_checkpoint<S>(o.resume, &was);
    if (back.model.input_size() != st.model.input_size() || back.model.hidden_sizes() != st.model.hidden_sizes()) {
      throw ShapeError(o.resume + ": model shape does not match model.layers/model.hidden and the dataset width");
    }
    if (was.clip != meta.clip || was.lr0 != meta.lr0 || was.epochs != meta.epochs || was.seed != meta.seed ||
        was.target != meta.target) {
      throw DomainError(o.resume + ": checkpoint was written under different training settings");
    }
    st = std::move(back);
    std::cout << "resuming at epoch " << st.report.epochs_done() << "\n";
  }
  const fs::path ckpt = out_dir(c) / (stem + ".txt");
  const fs::path report = out_dir(c) / ("train_report" + stem.substr(std::string("checkpoint").size()) + ".csv");
  std::cout << "train: " << ds.train.size() << " trajectories, " << st.model.parameter_count() << " parameters ("
            << c.precision << "), " << cfg.epochs << " epochs, " << cfg.threads << " threads\n";
  const long last = o.stop_after < 0 ? cfg.epochs : std::min<long>(cfg.epochs, o.stop_after);
  while (st.report.epochs_done() < last) {
    const long until = std::min<long>(last, st.report.epochs_done() + static_cast<long>(c.checkpoint_every));
    train(st, data, cfg, until);
    save_checkpoint(st, meta, ckpt);
    atomic_write(report, format_report_csv(st.report));
    std::cout << "  epoch " << until << "/" << cfg.epochs << "  train " << format_real(st.report.train_loss.back())
              << "  val " << format_real(st.report.val_loss.back()) << "\n";
  }
  save_checkpoint(st, meta, ckpt);
  atomic_write(report, format_report_csv(st.report));
  std::cout << "wrote " << ckpt.string() << " (" << format_real(st.report.wall_clock_seconds) << " s of training)\n";
  return st;
}

int cmd_train(const ExperimentConfig& c, const Options& o) {
  if (c.precision == "double") run_training<double>(c, o, Target::Integral, "checkpoint");
  else run_training<float>(c, o, Target::Integral, "checkpoint");
  return 0;
}

Trajectory test_prefix(const ExperimentConfig& c) {
  return solve_ab3(c.test_problem(), {c.grid.dt, c.prefix_steps});
}

int report_result(const ExtrapolationResult& r, const ExperimentConfig& c, const std::string& stem) {
  const ProblemSpec& spec = c.test_problem();
  const fs::path out = out_dir(c) / (stem + ".csv");
  write_result(out, r, spec.dim);
  std::cout << stem << ": " << describe(spec) << ", prefix to t=" << format_real(r.grid.t(r.training_horizon_index))
            << ", horizon " << format_real(r.grid.horizon()) << " (" << format_real(r.wall_clock_seconds) << " s)\n";
  if (const auto ref = reference(spec, r.grid)) write_errors(out_dir(c) / (stem + "_errors.csv"), r, *ref, spec.dim);
  write_plot_script(c);
  if (!r.complete()) {
    std::cerr << stem << ": " << r.diagnostic << "; partial result kept in " << out.string() << "\n";
    return kExtrapolationBlowUp;
  }
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

template <class S>
int extrapolate_with(const ExperimentConfig& c, const Options& o) {
  const auto st = load_checkpoint<S>(checkpoint_path(c, o));
  RnnSurrogate<S> s(st.model, c.test_problem().dim);
  return report_result(extrapolate(s, test_prefix(c), c.t_final, c.stepper), c, "extrapolation");
}

int cmd_extrapolate(const ExperimentConfig& c, const Options& o) {
  const fs::path p = checkpoint_path(c, o);
  if (checkpoint_scalar(read_file(p), p.string()) == "double") return extrapolate_with<double>(c, o);
  return extrapolate_with<float>(c, o);
}

template <class S>
int benchmark_with(const ExperimentConfig& c, const Options& o) {
  const auto st = load_checkpoint<S>(checkpoint_path(c, o));
  const auto rows = runtime_profile(st.model, c.problem, c.horizons, c.grid.dt, c.stepper, c.bench_repeats);
  std::string s = "horizon,hybrid_seconds,solver_seconds,hybrid_ratio,solver_ratio\n";
  std::cout << "benchmark: " << describe(c.problem) << ", dt " << format_real(c.grid.dt) << "\n"
            << "  horizon  hybrid_s  solver_s  hybrid_ratio  solver_ratio\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::string hr, sr;
    if (k) {
      hr = format_real(rows[k].hybrid_seconds / rows[k - 1].hybrid_seconds);
      sr = format_real(rows[k].solver_seconds / rows[k - 1].solver_seconds);
    }
    s += format_real(rows[k].horizon) + "," + format_real(rows[k].hybrid_seconds) + "," +
         format_real(rows[k].solver_seconds) + "," + hr + "," + sr + "\n";
    std::printf("  %7g  %8.4f  %8.4f  %12s  %12s\n", rows[k].horizon, rows[k].hybrid_seconds, rows[k].solver_seconds,
                hr.substr(0, 6).c_str(), sr.substr(0, 6).c_str());
  }
  atomic_write(out_dir(c) / "benchmark.csv", s);
  std::string meta = "dt = " + format_real(c.grid.dt) + "\nseed = " + std::to_string(c.seed) +
                     "\nproblem = " + describe(c.problem) + "\nstepper = " + to_string(c.stepper) +
                     "\nprecision = " + std::string(scalar_name<S>()) + "\nhidden = " + std::to_string(c.hidden) +
                     "\nlayers = " + std::to_string(c.layers) + "\nrepeats = " + std::to_string(c.bench_repeats) +
                     "\nthreads = 1\nhardware_concurrency = " + std::to_string(std::thread::hardware_concurrency()) +
                     "\ncompiler = " + __VERSION__ + "\n";
  atomic_write(out_dir(c) / "benchmark_meta.txt", meta);

  // error curve of the hybrid from the configured prefix out to the longest horizon
  RnnSurrogate<S> sur(st.model, c.problem.dim);
  const auto r = extrapolate(sur, solve_ab3(c.problem, {c.grid.dt, c.prefix_steps}), c.horizons.back(), c.stepper);
  if (const auto ref = reference(c.problem, r.grid)) write_errors(out_dir(c) / "benchmark_errors.csv", r, *ref, c.problem.dim);
  write_plot_script(c);
  std::cout << "wrote " << (out_dir(c) / "benchmark.csv").string() << "\n";
  return 0;
}

int cmd_benchmark(const ExperimentConfig& c, const Options& o) {
  const fs::path p = checkpoint_path(c, o);
  if (checkpoint_scalar(read_file(p), p.string()) == "double") return benchmark_with<double>(c, o);
  return benchmark_with<float>(c, o);
}

template <class S>
int direct_baseline(const ExperimentConfig& c, const Options& o) {
  const auto st = run_training<S>(c, o, Target::NextStep, "checkpoint_direct");
  RnnNextStep<S> p(st.model, c.test_problem().dim);
  return report_result(extrapolate_direct(p, test_prefix(c), c.t_final), c, "baseline_direct");
}

int dmd_baseline(const ExperimentConfig& c) {
  const Trajectory prefix = test_prefix(c);
  const auto m = dmd_fit(prefix.g, c.grid.dt, c.dmd_rank, c.dmd_delay);
  atomic_write(out_dir(c) / "dmd_model.txt", format_dmd(m));
  const auto start = std::chrono::steady_clock::now();
  ExtrapolationResult r;
  r.grid = TimeGrid::until(c.grid.dt, c.t_final);
  r.training_horizon_index = prefix.grid.n_steps;
  r.g = prefix.g;
  for (const auto& g : dmd_extrapolate(m, r.grid.n_steps - prefix.grid.n_steps)) {
    if (detail::runaway(g)) {
      r.blow_up_step = r.g.size();
      r.diagnostic = "DMD continuation exceeded 1e6 at t=" + format_real(r.grid.t(r.g.size()));
      break;
    }
    r.g.push_back(g);
  }
  detail::finish(r, start);
  std::cout << "dmd: rank " << m.rank << ", delay " << m.delay << "\n";
  return report_result(r, c, "baseline_dmd");
}

int cmd_baseline(const ExperimentConfig& c, const Options& o) {
  if (o.mode == "dmd") return dmd_baseline(c);
  return c.precision == "double" ? direct_baseline<double>(c, o) : direct_baseline<float>(c, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memop: learned memory integrals for integro-differential equations"};
  app.require_subcommand(1, 1);
  Options o;
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const ExperimentConfig&, const Options&);
  };
  const Command commands[] = {
      {"generate", "solve the configured dataset and write trajectory CSVs", cmd_generate},
      {"train", "train the memory-integral model", cmd_train},
      {"extrapolate", "hybrid extrapolation of the test trajectory", cmd_extrapolate},
      {"benchmark", "hybrid vs full-solver wall clock", cmd_benchmark},
      {"baseline", "direct-learning or DMD baseline", cmd_baseline},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", o.config, "config file (key = value)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides output_dir)");
    sub->add_option("--seed", o.seed, "seed (overrides the config)");
    sub->add_flag("--dump-config", o.dump, "print the resolved config and exit");
    const std::string name = cmd.name;
    if (name == "train" || name == "baseline") {
      sub->add_option("--resume", o.resume, "checkpoint to resume from");
      sub->add_option("--stop-after", o.stop_after, "stop once this many epochs are done (continue with --resume)")
          ->check(CLI::NonNegativeNumber);
    }
    if (name == "train" || name == "extrapolate" || name == "baseline") {
      sub->add_option("--dataset", o.dataset, "dataset directory (default <out>/dataset)");
    }
    if (name == "generate") sub->add_option("--dataset", o.dataset, "dataset directory to write (default <out>/dataset)");
    if (name == "extrapolate" || name == "benchmark") {
      sub->add_option("--checkpoint", o.checkpoint, "checkpoint (default <out>/checkpoint.txt)");
    }
    if (name == "baseline") {
      sub->add_option("--mode", o.mode, "direct or dmd")->check(CLI::IsMember({"direct", "dmd"}));
    }
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    for (auto& [sub, cmd] : subs) {
      if (!sub->parsed()) continue;
      o.seed_given = sub->count("--seed") > 0;
      const ExperimentConfig c = resolve(o);
      if (o.dump) {
        std::cout << dump_config(c);
        return 0;
      }
      return cmd->run(c, o);
    }
  } catch (const BlowUpError& e) {
    std::cerr << "error: solver blow-up: " << e.what() << "\n";
    return kSolverBlowUp;
  } catch (const NanLossError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNanLoss;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
