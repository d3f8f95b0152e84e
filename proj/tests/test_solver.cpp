#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "memop/solver.hpp"

using namespace memop;

namespace {

const ProblemSpec kDyson = ProblemSpec::make_dyson({-1.0, 1.0});

double seconds_of(auto&& f) {
  double best = 1e300;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

}  // namespace

TEST(HistoryIntegral, EmptyDomainIsZero) {
  const std::vector<ComplexMatrix> g{kDyson.g0};
  EXPECT_EQ(history_integral(kDyson, g, 0, 0.01), ComplexMatrix(1));
  EXPECT_THROW(history_integral(kDyson, g, 1, 0.01), DomainError);
}

TEST(HistoryIntegral, ConstantHistory) {
  const std::vector<ComplexMatrix> g(101, ComplexMatrix::scalar(1, -kI));
  const ComplexMatrix i = history_integral(kDyson, g, 100, 0.01);
  EXPECT_NEAR(std::abs(i[0] - kI), 0.0, 1e-13);
}

TEST(HistoryIntegral, MatchesAnalyticResidual) {
  // With exact samples, I(t) must equal dG/dt - F(G, t) of the analytic solution.
  const DysonParams p{-1.0, 1.0};
  const double dt = 0.001, t = 2.0;
  std::vector<ComplexMatrix> g;
  for (int k = 0; k <= 2000; ++k) g.push_back(ComplexMatrix::scalar(1, dyson_analytic(p, k * dt)));
  const double delta = 1e-4;
  const Complex dgdt = (dyson_analytic(p, t + delta) - dyson_analytic(p, t - delta)) / (2.0 * delta);
  const Complex residual = dgdt - streaming(kDyson, t, g.back())[0];
  EXPECT_NEAR(std::abs(history_integral(kDyson, g, 2000, dt)[0] - residual), 0.0, 1e-5);
}

TEST(SolveFe, DysonAccuracyAndFirstOrder) {
  const double e1 = max_dyson_error(solve_fe(kDyson, TimeGrid::until(0.01, 10.0)));
  const double e2 = max_dyson_error(solve_fe(kDyson, TimeGrid::until(0.005, 10.0)));
  EXPECT_LE(e1, 0.05);
  EXPECT_NEAR(e1 / e2, 2.0, 0.5);
}

TEST(SolveAb3, DysonAccuracyAndThirdOrder) {
  const double e1 = max_dyson_error(solve_ab3(kDyson, TimeGrid::until(0.01, 10.0)));
  const double e2 = max_dyson_error(solve_ab3(kDyson, TimeGrid::until(0.005, 10.0)));
  EXPECT_LE(e1, 1e-4);
  EXPECT_NEAR(e1 / e2, 8.0, 2.0);
}

TEST(SolveAb3, MemorylessLinearOde) {
  // c so small that c^2 underflows to zero: the kernel vanishes exactly.
  const ProblemSpec s = ProblemSpec::make_dyson({-1.0, 1e-200});
  auto max_err = [&](double dt) {
    const Trajectory tr = solve_ab3(s, TimeGrid::until(dt, 5.0));
    double err = 0.0;
    for (std::size_t i = 0; i < tr.g.size(); ++i) {
      err = std::max(err, std::abs(tr.g[i][0] - std::exp(-kI * (-1.0 * tr.grid.t(i))) * (-kI)));
    }
    return err;
  };
  // AB3 on a unit-frequency oscillator: global error ~ (3/8) dt^3 T.
  const double e1 = max_err(0.01);
  EXPECT_LE(e1, 1.1 * 0.375 * 1e-6 * 5.0);
  EXPECT_NEAR(e1 / max_err(0.005), 8.0, 1.0);
}

TEST(SolveAb3, NeedsThreeSteps) { EXPECT_THROW(solve_ab3(kDyson, {0.01, 2}), DomainError); }

TEST(Solvers, ToyConstantDriveFeAgreesWithAb3) {
  // beta = 0 leaves A(t) = -i [[0,1],[1,0]]. The toy dynamics leave the representable
  // range near t = 3.7, so the cross-check covers [0, 1.5].
  const ProblemSpec s = ProblemSpec::make_toy({10.0, 15.0, 2.0, 0.0});
  EXPECT_EQ(toy_drive(*s.toy, 0.7), ComplexMatrix(2, {0.0, -kI, -kI, 0.0}));
  const Trajectory fe = solve_fe(s, TimeGrid::until(0.001, 1.5));
  const Trajectory ab = solve_ab3(s, TimeGrid::until(0.001, 1.5));
  const Trajectory ab_coarse = solve_ab3(s, TimeGrid::until(0.002, 1.5));
  double diff = 0.0, ab_err = 0.0;
  for (std::size_t i = 0; i < fe.g.size(); ++i) diff = std::max(diff, (fe.g[i] - ab.g[i]).max_abs());
  for (std::size_t i = 0; i < ab_coarse.g.size(); ++i) {
    ab_err = std::max(ab_err, (ab_coarse.g[i] - ab.g[2 * i]).max_abs());
  }
  // FE is first order: its gap to AB3 is O(dt) with an O(1) constant.
  EXPECT_LE(diff, 0.05);
  EXPECT_LE(ab_err, 1e-6);
}

TEST(Solvers, ToyBlowUpIsReportedWithStep) {
  try {
    solve_ab3(ProblemSpec::make_toy({10.0, 15.0, 2.0, 1.0}), TimeGrid::until(0.01, 20.0));
    FAIL() << "expected blow-up";
  } catch (const BlowUpError& e) {
    EXPECT_GT(e.step(), 100u);
    EXPECT_LT(e.step(), 2000u);
  }
}

TEST(ConvergenceOrder, DysonOrders) {
  const std::vector<double> dts{0.02, 0.01, 0.005};
  EXPECT_NEAR(convergence_order(kDyson, Stepper::FE, dts, 10.0), 1.0, 0.2);
  EXPECT_NEAR(convergence_order(kDyson, Stepper::AB3, dts, 10.0), 3.0, 0.3);
}

TEST(ConvergenceOrder, Preconditions) {
  const std::vector<double> one{0.01};
  EXPECT_THROW(convergence_order(kDyson, Stepper::FE, one, 1.0), DomainError);
  const std::vector<double> dts{0.02, 0.01, 0.005};
  EXPECT_THROW(convergence_order(ProblemSpec::make_toy({}), Stepper::FE, dts, 1.0), DomainError);
}

TEST(Trajectory, InitialRecordsAndDeterminism) {
  for (Stepper m : {Stepper::FE, Stepper::AB3}) {
    const TimeGrid grid = TimeGrid::until(0.01, 3.0);
    const Trajectory a = m == Stepper::FE ? solve_fe(kDyson, grid) : solve_ab3(kDyson, grid);
    const Trajectory b = m == Stepper::FE ? solve_fe(kDyson, grid) : solve_ab3(kDyson, grid);
    ASSERT_EQ(a.g.size(), grid.n_points());
    ASSERT_EQ(a.i_int.size(), grid.n_points());
    EXPECT_EQ(a.g[0], kDyson.g0);
    EXPECT_EQ(a.i_int[0], ComplexMatrix(1));
    EXPECT_EQ(a.g, b.g);
    EXPECT_EQ(a.i_int, b.i_int);
  }
}

TEST(Trajectory, RecordedIntegralIsTheStepperQuadrature) {
  const Trajectory tr = solve_ab3(kDyson, TimeGrid::until(0.01, 2.0));
  for (std::size_t i : {1u, 2u, 3u, 57u, 200u}) {
    EXPECT_EQ(tr.i_int[i], history_integral(kDyson, tr.g, i, 0.01)) << i;
  }
}

TEST(SolveFe, QuadraticWallClock) {
  const ProblemSpec s = ProblemSpec::make_dyson({-1.0, 1.0});
  volatile double sink = 0.0;
  auto run = [&](std::size_t n) { return seconds_of([&] { sink = solve_fe(s, {0.01, n}).g.back()[0].real(); }); };
  for (std::size_t n : {2000u, 4000u}) {
    const double ratio = run(2 * n) / run(n);
    EXPECT_GE(ratio, 2.5) << n;
    EXPECT_LE(ratio, 4.5) << n;
  }
}
