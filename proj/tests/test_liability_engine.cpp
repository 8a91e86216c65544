#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "reinsurance/liability.hpp"
#include "reinsurance/solve.hpp"

using namespace reinsurance;
using fixtures::kInf;

namespace {

SolverOptions tight() {
  SolverOptions o;
  o.tol = 1e-13;
  o.max_iters = 200'000;
  return o;
}

double rel_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / (1.0 + b.cwiseAbs().maxCoeff());
}

LineGraphSystem single(double rate, double shock, double deductible, double cap) {
  return build_line_graph(fixtures::make({"A", "B"}, {{1, 0, rate, deductible, cap}}, {shock, 0.0}));
}

}  // namespace

TEST(Phi, ZeroSystem) {
  auto sys = single(0.5, 0.0, 0.0, kInf);
  EXPECT_EQ(phi(Eigen::VectorXd::Zero(1), sys)(0), 0.0);
}

TEST(Phi, SingleContractClosedForm) {
  auto sys = single(0.5, 10.0, 2.0, kInf);
  EXPECT_DOUBLE_EQ(phi(Eigen::VectorXd::Zero(1), sys)(0), 4.0);
  auto capped = single(0.5, 10.0, 2.0, 3.0);
  EXPECT_DOUBLE_EQ(phi(Eigen::VectorXd::Zero(1), capped)(0), 3.0);
}

TEST(Phi, SpiralStep) {
  auto sys = build_line_graph(fixtures::spiral());
  const Eigen::VectorXd out = phi(Eigen::Vector3d(5, 5, 5), sys);
  EXPECT_EQ(out, Eigen::Vector3d(10, 5, 5));
}

TEST(Phi, MonotoneAndBoundedOnRandomSystems) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 200.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto sys = build_line_graph(fixtures::random_network(rng, {15, 2.0, trial % 2 == 0, true}));
    const auto m = static_cast<Eigen::Index>(sys.size());
    Eigen::VectorXd lo(m), hi(m);
    for (Eigen::Index e = 0; e < m; ++e) {
      lo(e) = u(rng);
      hi(e) = lo(e) + u(rng);
    }
    const Eigen::VectorXd plo = phi(lo, sys), phi_hi = phi(hi, sys);
    EXPECT_TRUE((plo.array() <= phi_hi.array()).all());
    EXPECT_TRUE((plo.array() >= 0.0).all());
    EXPECT_TRUE((phi_hi.array() <= sys.c.array()).all());
  }
}

TEST(Activation, BelowDeductibles) {
  auto sys = single(1.0, 1.0, 2.0, 5.0);
  auto act = activation_state(Eigen::VectorXd::Zero(1), sys);
  EXPECT_EQ(act.B[0], 0);
  EXPECT_EQ(act.C[0], 0);
}

TEST(Activation, ExactTieActivates) {
  auto sys = single(1.0, 2.0, 2.0, kInf);
  EXPECT_EQ(activation_state(Eigen::VectorXd::Zero(1), sys).B[0], 1);
  auto capped = single(1.0, 7.0, 2.0, 5.0);
  EXPECT_EQ(activation_state(Eigen::VectorXd::Zero(1), capped).C[0], 1);
}

TEST(Activation, SpiralFixedPointFullyActive) {
  auto sys = build_line_graph(fixtures::spiral());
  auto act = activation_state(Eigen::Vector3d(10, 10, 10), sys);
  EXPECT_EQ(act.B, (std::vector<std::uint8_t>{1, 1, 1}));
  EXPECT_EQ(act.C, (std::vector<std::uint8_t>{1, 1, 1}));
}

TEST(Algorithm1, ZeroShockOneIteration) {
  auto net = fixtures::spiral();
  net.shock = {0.0, 0.0, 0.0};
  auto sol = solve_fixed_point_iteration(build_line_graph(net));
  EXPECT_EQ(sol.status, SolverStatus::converged);
  EXPECT_EQ(sol.iterations, 1);
  EXPECT_TRUE(sol.ell.isZero());
}

TEST(Algorithm1, SpiralReachesCaps) {
  auto sys = build_line_graph(fixtures::spiral());
  auto sol = solve_fixed_point_iteration(sys);
  ASSERT_EQ(sol.status, SolverStatus::converged);
  EXPECT_EQ(sol.ell, Eigen::Vector3d(10, 10, 10));
  EXPECT_EQ(sol.residual, 0.0);
  const Eigen::VectorXd delta = net_liabilities(liabilities_matrix(sys, sol.ell));
  EXPECT_TRUE(delta.isZero());
}

TEST(Algorithm1, IteratesAreNondecreasing) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto sys = build_line_graph(fixtures::random_network(rng, {12, 0.95, trial % 2 == 1, true}));
    Eigen::VectorXd ell = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.size()));
    for (int t = 0; t < 200; ++t) {
      Eigen::VectorXd next = phi(ell, sys);
      ASSERT_TRUE((next.array() >= ell.array()).all());
      ell = next;
    }
  }
}

TEST(Algorithm1, HundredPercentCycleDiverges) {
  auto sol = solve_fixed_point_iteration(build_line_graph(fixtures::hundred_percent_cycle()));
  EXPECT_EQ(sol.status, SolverStatus::diverging);
  EXPECT_LT(sol.iterations, 10 * 3 + 1000);
}

TEST(Algorithm1, CeilingTriggersDivergence) {
  SolverOptions opt;
  opt.divergence_factor = 10.0;
  auto sol = solve_fixed_point_iteration(build_line_graph(fixtures::hundred_percent_cycle()), opt);
  EXPECT_EQ(sol.status, SolverStatus::diverging);
  EXPECT_LE(sol.iterations, 64);
}

TEST(Algorithm1, MaxItersReported) {
  SolverOptions opt;
  opt.max_iters = 5;
  auto sol = solve_fixed_point_iteration(build_line_graph(fixtures::damped_cycle()), opt);
  EXPECT_EQ(sol.status, SolverStatus::max_iters_exceeded);
  EXPECT_FALSE(sol.converged());
}

TEST(Algorithm1, LeastFixedPointUnderMultiplicity) {
  auto sys = build_line_graph(fixtures::multiplicity());
  auto sol = solve_fixed_point_iteration(sys);
  ASSERT_EQ(sol.status, SolverStatus::converged);
  // Contract order: A->P, C->A, A->B, B->C.
  EXPECT_EQ(sol.ell, Eigen::Vector4d(5, 0, 0, 0));
  const Eigen::Vector4d larger(5, 7, 7, 7);
  EXPECT_EQ(fixtures::fixed_point_gap(sys, larger), 0.0);
  EXPECT_EQ(net_liabilities(liabilities_matrix(sys, sol.ell)), net_liabilities(liabilities_matrix(sys, larger)));
}

TEST(Algorithm2, ProportionalOneSolve) {
  auto sys = build_line_graph(fixtures::damped_cycle());
  auto sol = solve_no_caps(sys);
  ASSERT_EQ(sol.status, SolverStatus::converged);
  EXPECT_EQ(sol.iterations, 1);
  const double ba = 0.99 * 10.0 / (1.0 - 0.99 * 0.99);
  // Contract order: B->A, A->B, D->B.
  EXPECT_NEAR(sol.ell(0), ba, 1e-9 * ba);
  EXPECT_NEAR(sol.ell(1), 0.99 * ba, 1e-9 * ba);
  EXPECT_NEAR(sol.ell(2), 0.01 * ba, 1e-9 * ba);
  EXPECT_NEAR(sol.ell(0), 497.4874, 1e-4);
  EXPECT_NEAR(sol.ell(1), 492.5126, 1e-4);
  EXPECT_NEAR(sol.ell(2), 4.9749, 1e-4);
}

TEST(Algorithm2, ShockBelowDeductiblesIsZero) {
  auto net = fixtures::damped_cycle();
  for (auto& c : net.contracts) c.deductible = 50.0;
  auto sol = solve_no_caps(build_line_graph(net));
  EXPECT_EQ(sol.status, SolverStatus::converged);
  EXPECT_TRUE(sol.ell.isZero());
  EXPECT_EQ(sol.activation.B, (std::vector<std::uint8_t>{0, 0, 0}));
}

TEST(Algorithm2, RejectsFiniteCaps) {
  EXPECT_THROW(solve_no_caps(build_line_graph(fixtures::spiral())), std::invalid_argument);
}

TEST(Algorithm2, SingularSystemNamesActiveContracts) {
  try {
    solve_no_caps(build_line_graph(fixtures::hundred_percent_cycle()));
    FAIL() << "expected StructuralFailure";
  } catch (const StructuralFailure& err) {
    EXPECT_EQ(err.active_contracts().size(), 3u);
    EXPECT_NE(std::string(err.what()).find("active contracts"), std::string::npos);
  }
}

TEST(Algorithm2, DeductiblesGrowActivation) {
  // A cedes 80% to B with no deductible; B cedes 50% to C above 30.
  auto net = fixtures::make({"A", "B", "C"}, {{1, 0, 0.8, 0.0, kInf}, {2, 1, 0.5, 30.0, kInf}}, {50.0, 0.0, 0.0});
  auto sys = build_line_graph(net);
  auto sol = solve_no_caps(sys);
  ASSERT_EQ(sol.status, SolverStatus::converged);
  EXPECT_EQ(sol.iterations, 2);
  EXPECT_DOUBLE_EQ(sol.ell(0), 40.0);
  EXPECT_DOUBLE_EQ(sol.ell(1), 5.0);
}

TEST(Algorithm3, TowerLayers) {
  auto sys = build_line_graph(fixtures::tower());
  auto sol = solve_with_caps(sys);
  ASSERT_EQ(sol.status, SolverStatus::converged);
  EXPECT_EQ(sol.ell, Eigen::Vector2d(40, 40));
  EXPECT_FALSE(sol.multiplicity_warning);
  const Eigen::VectorXd delta = net_liabilities(liabilities_matrix(sys, sol.ell));
  EXPECT_DOUBLE_EQ(100.0 - delta(0), 20.0);  // retained by the firm
}

TEST(Algorithm3, SpiralMatchesAlgorithm1) {
  auto sys = build_line_graph(fixtures::spiral());
  auto sol = solve_with_caps(sys);
  ASSERT_EQ(sol.status, SolverStatus::converged);
  EXPECT_EQ(sol.ell, Eigen::Vector3d(10, 10, 10));
  EXPECT_FALSE(sol.multiplicity_warning);
  EXPECT_LE(sol.iterations, 6);
}

TEST(Algorithm3, UnmetDeductibleDoesNotDragTheSweepBelow) {
  // R1 covers A above 20 (A's shock is 10, so never), R2 covers all of R1,
  // R3 covers R2 above 5. By hand: l = (0, 12, 12 - 5).
  auto sys = build_line_graph(fixtures::make({"A", "R1", "R2", "R3"},
                                             {{1, 0, 1.0, 20.0, kInf}, {2, 1, 1.0, 0.0, kInf}, {3, 2, 1.0, 5.0, kInf}},
                                             {10.0, 12.0, 0.0, 0.0}));
  auto sol = solve_with_caps(sys);
  ASSERT_EQ(sol.status, SolverStatus::converged) << sol.note;
  EXPECT_EQ(sol.ell, Eigen::Vector3d(0, 12, 7));
  EXPECT_FALSE(sol.multiplicity_warning);
  EXPECT_LE(sol.iterations, 6);
}

TEST(Algorithm3, InfiniteCapsReduceToAlgorithm2) {
  auto sys = build_line_graph(fixtures::damped_cycle());
  auto a = solve_with_caps(sys);
  auto b = solve_no_caps(sys);
  EXPECT_LE(rel_gap(a.ell, b.ell), 1e-12);
}

TEST(Algorithm3, MultiplicityWarning) {
  // Upper iteration lands on a larger fixed point of the multiplicity fixture
  // once the cycle is capped.
  auto net = fixtures::multiplicity();
  for (std::size_t k = 1; k < net.contracts.size(); ++k) net.contracts[k].cap = Cap::finite(7.0);
  auto sys = build_line_graph(net);
  auto sol = solve_with_caps(sys);
  EXPECT_EQ(sol.status, SolverStatus::converged);
  EXPECT_TRUE(sol.multiplicity_warning);
  EXPECT_EQ(sol.ell, Eigen::Vector4d(5, 7, 7, 7));
}

TEST(CrossAlgorithm, RandomSystemsAgree) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const bool caps = trial % 2 == 1;
    auto sys = build_line_graph(fixtures::random_network(rng, {20, 0.95, caps, true}));
    auto ref = solve_fixed_point_iteration(sys, tight());
    ASSERT_EQ(ref.status, SolverStatus::converged);
    auto other = caps ? solve_with_caps(sys) : solve_no_caps(sys);
    ASSERT_EQ(other.status, SolverStatus::converged) << other.note;
    EXPECT_LE(rel_gap(other.ell, ref.ell), 1e-8);
    EXPECT_FALSE(other.multiplicity_warning);
    const int m = static_cast<int>(sys.size());
    EXPECT_LE(other.iterations, caps ? 2 * m : m);
    EXPECT_LE(fixtures::fixed_point_gap(sys, other.ell), 1e-9 * (1.0 + other.ell.maxCoeff()));
  }
}

TEST(SolveAuto, PicksAlgorithmByStructure) {
  auto prop = solve_auto(build_line_graph(fixtures::damped_cycle()));
  EXPECT_EQ(prop.solution.algorithm, Algorithm::no_caps);
  auto capped = solve_auto(build_line_graph(fixtures::tower()));
  EXPECT_EQ(capped.solution.algorithm, Algorithm::fixed_point_iteration);
  EXPECT_TRUE(capped.cross_checked);
  EXPECT_EQ(capped.solution.ell, Eigen::Vector2d(40, 40));
  auto cycle = solve_auto(build_line_graph(fixtures::hundred_percent_cycle()));
  EXPECT_EQ(cycle.solution.status, SolverStatus::diverging);
}
