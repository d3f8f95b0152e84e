#include <gtest/gtest.h>

#include <chrono>

#include "memop/baselines.hpp"
#include "memop/extrapolate.hpp"

using namespace memop;

namespace {

const ProblemSpec kDyson = ProblemSpec::make_dyson({-1.0, 1.0});

// Returns ever larger I so the state runs away.
struct Exploding {
  std::vector<ComplexMatrix> warm(std::span<const ComplexMatrix> p) { return std::vector<ComplexMatrix>(p.size(), ComplexMatrix(1)); }
  ComplexMatrix next(const ComplexMatrix& g) { return 1e4 * g; }
};

// Next-step oracle reading off a known trajectory.
struct Lookup {
  const std::vector<ComplexMatrix>* truth;
  std::size_t k = 0;
  ComplexMatrix warm(std::span<const ComplexMatrix> p) {
    k = p.size();
    return (*truth)[k];
  }
  ComplexMatrix next(const ComplexMatrix&) { return (*truth)[++k]; }
};

}  // namespace

TEST(Extrapolate, OracleClosureReproducesAb3) {
  const auto truth = solve_ab3(kDyson, TimeGrid::until(0.01, 20.0));
  QuadratureOracle oracle(kDyson, 0.01);
  const auto r = extrapolate(oracle, truth.prefix(1000), 20.0);
  ASSERT_TRUE(r.complete());
  ASSERT_EQ(r.g.size(), truth.g.size());
  double err = 0.0;
  for (std::size_t i = 1000; i < r.g.size(); ++i) err = std::max(err, (r.g[i] - truth.g[i]).max_abs());
  EXPECT_LE(err, 1e-6);
  for (std::size_t i = 0; i < r.g.size(); ++i) EXPECT_EQ(r.i_hat[i], truth.i_int[i]) << i;
}

TEST(Extrapolate, OracleClosureWithEulerReproducesFe) {
  const auto truth = solve_fe(kDyson, TimeGrid::until(0.01, 5.0));
  QuadratureOracle oracle(kDyson, 0.01);
  const auto r = extrapolate(oracle, truth.prefix(200), 5.0, Stepper::FE);
  for (std::size_t i = 0; i < r.g.size(); ++i) EXPECT_EQ(r.g[i], truth.g[i]) << i;
}

TEST(Extrapolate, ZeroLengthExtensionReturnsPrefix) {
  const auto truth = solve_ab3(kDyson, TimeGrid::until(0.01, 1.0));
  RnnSurrogate<double> s(RnnModel<double>::random(2, {4}, 2, 1), 1);
  const auto r = extrapolate(s, truth, 1.0);
  EXPECT_EQ(r.g, truth.g);
  EXPECT_EQ(r.training_horizon_index, 100u);
  EXPECT_THROW(extrapolate(s, truth, 0.5), DomainError);
}

TEST(Extrapolate, PrefixAndWarmStateAreExact) {
  const auto truth = solve_ab3(kDyson, TimeGrid::until(0.01, 3.0));
  const auto model = RnnModel<double>::random(2, {8, 8}, 2, 5);
  RnnSurrogate<double> s(model, 1);
  const auto r = extrapolate(s, truth, 6.0);
  ASSERT_EQ(r.g.size(), 601u);
  for (std::size_t i = 0; i <= 300; ++i) EXPECT_EQ(r.g[i], truth.g[i]);
  const auto tape = forward_sequence(model, pack_sequence<double>(truth.g));
  for (std::size_t i = 0; i <= 300; ++i) {
    EXPECT_EQ(r.i_hat[i], unpack_column(tape.output.col(static_cast<Eigen::Index>(i)), 1));
  }
  // streaming the new samples continues the same recurrence as one long pass
  const auto tape_all = forward_sequence(model, pack_sequence<double>(r.g));
  for (std::size_t i = 301; i < 600; ++i) {
    EXPECT_LE((r.i_hat[i] - unpack_column(tape_all.output.col(static_cast<Eigen::Index>(i)), 1)).max_abs(), 1e-12);
  }
}

TEST(Extrapolate, ShortPrefixesBootstrap) {
  QuadratureOracle oracle(kDyson, 0.01);
  const Trajectory start{kDyson, {0.01, 0}, {kDyson.g0}, {ComplexMatrix(1)}};
  const auto r = extrapolate(oracle, start, 2.0);
  ASSERT_TRUE(r.complete());
  EXPECT_LE(std::abs(r.g.back()[0] - dyson_analytic({-1.0, 1.0}, 2.0)), 1e-4);
}

TEST(Extrapolate, BlowUpKeepsPartialResult) {
  const auto truth = solve_ab3(kDyson, TimeGrid::until(0.01, 1.0));
  Exploding e;
  const auto r = extrapolate(e, truth, 10.0);
  ASSERT_FALSE(r.complete());
  EXPECT_GT(*r.blow_up_step, 100u);
  EXPECT_EQ(r.g.size(), *r.blow_up_step);
  EXPECT_NE(r.diagnostic.find("1e6"), std::string::npos);
}

TEST(Extrapolate, WidthMismatch) {
  EXPECT_THROW(RnnSurrogate<double>(RnnModel<double>::random(8, {4}, 8, 1), 1), ShapeError);
}

TEST(Extrapolate, PerStepCostIsConstant) {
  const auto model = RnnModel<float>::random(2, {64, 64}, 2, 2);
  const Trajectory start{kDyson, {0.01, 0}, {kDyson.g0}, {ComplexMatrix(1)}};
  auto best = [&](double horizon) {
    double b = 1e300;
    for (int k = 0; k < 3; ++k) {
      RnnSurrogate<float> s(model, 1);
      b = std::min(b, extrapolate(s, start, horizon).wall_clock_seconds);
    }
    return b;
  };
  const double t1 = best(40.0), t2 = best(80.0);
  EXPECT_LE(t2 - t1, 1.5 * t1) << t1 << " " << t2;
}

TEST(Direct, ZeroLengthAndOracle) {
  const auto truth = solve_ab3(kDyson, TimeGrid::until(0.01, 4.0));
  Lookup l{&truth.g};
  EXPECT_EQ(extrapolate_direct(l, truth.prefix(100), 1.0).g, truth.prefix(100).g);
  const auto r = extrapolate_direct(l, truth.prefix(100), 4.0);
  EXPECT_EQ(r.g, truth.g);
  EXPECT_TRUE(r.i_hat.empty());
}

TEST(Direct, SeededModelIsDeterministic) {
  const auto truth = solve_ab3(kDyson, TimeGrid::until(0.01, 2.0));
  const auto model = RnnModel<double>::random(2, {6, 6}, 2, 3);
  RnnNextStep<double> a(model, 1), b(model, 1);
  EXPECT_EQ(extrapolate_direct(a, truth.prefix(100), 2.0).g, extrapolate_direct(b, truth.prefix(100), 2.0).g);
}
