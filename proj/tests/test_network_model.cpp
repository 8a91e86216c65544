#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "reinsurance/line_graph.hpp"
#include "reinsurance/network.hpp"

using namespace reinsurance;
using fixtures::Cover;
using fixtures::kInf;

namespace {

bool has_rule(const ValidationReport& r, Rule rule) {
  for (const auto& v : r.violations)
    if (v.rule == rule) return true;
  return false;
}

}  // namespace

TEST(Validate, FullCessionInOneLayerIsAllowed) {
  auto net = fixtures::make({"A", "B"}, {{1, 0, 1.0, 0.0, kInf}}, {1.0, 0.0});
  EXPECT_TRUE(validate_network(net).ok());
}

TEST(Validate, OverCessionNamesReinsuredFirm) {
  auto net = fixtures::make({"A", "B", "C"}, {{1, 0, 0.7, 0.0, kInf}, {2, 0, 0.5, 0.0, kInf}}, {1.0, 0.0, 0.0});
  auto rep = validate_network(net);
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].rule, Rule::layer_over_100_percent);
  EXPECT_EQ(rep.violations[0].firm, "A");
}

TEST(Validate, LayersAreCheckedSeparately) {
  auto net = fixtures::make({"A", "B", "C"}, {{1, 0, 1.0, 0.0, 10.0, 0}, {2, 0, 1.0, 10.0, 10.0, 1}},
                            {1.0, 0.0, 0.0});
  EXPECT_TRUE(validate_network(net).ok());
}

TEST(Validate, SumSlightlyAboveOneWithinTolerance) {
  auto net = fixtures::make({"A", "B", "C"}, {{1, 0, 0.7, 0.0, kInf}, {2, 0, 0.3 + 1e-12, 0.0, kInf}},
                            {1.0, 0.0, 0.0});
  EXPECT_TRUE(validate_network(net).ok());
}

TEST(Validate, RateWithoutCapIsSparsityViolation) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2), dd = g, cp = g;
  g(1, 0) = 0.5;
  std::vector<Firm> firms(2);
  firms[0].id = "A";
  firms[1].id = "B";
  auto net = from_matrices(firms, g, dd, cp, {1.0, 0.0});
  EXPECT_TRUE(has_rule(validate_network(net), Rule::sparsity));
}

TEST(Validate, DimensionMismatchThrows) {
  std::vector<Firm> firms(2);
  EXPECT_THROW(from_matrices(firms, Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(2, 2),
                             Eigen::MatrixXd::Zero(2, 2), {0.0, 0.0}),
               std::invalid_argument);
  auto net = fixtures::make({"A", "B"}, {{1, 0, 1.0, 0.0, kInf}}, {1.0});
  EXPECT_THROW(validate_network(net), std::invalid_argument);
  auto bad_index = fixtures::make({"A", "B"}, {{5, 0, 1.0, 0.0, kInf}}, {1.0, 0.0});
  EXPECT_THROW(validate_network(bad_index), std::invalid_argument);
}

TEST(Validate, ReinsurerRulesAndSigns) {
  auto net = fixtures::make({"A", "R"}, {{1, 0, 0.5, -1.0, kInf}}, {1.0, 2.0},
                            {Role::primary_insurer, Role::reinsurer});
  net.firms[1].primary_premiums = 3.0;
  net.firms[0].equity = -1.0;
  auto rep = validate_network(net);
  EXPECT_TRUE(has_rule(rep, Rule::negative_deductible));
  EXPECT_TRUE(has_rule(rep, Rule::reinsurer_shocked));
  EXPECT_TRUE(has_rule(rep, Rule::reinsurer_primary_premiums));
  EXPECT_TRUE(has_rule(rep, Rule::negative_equity));
}

TEST(Validate, SelfCoverDuplicateAndRateRange) {
  auto net = fixtures::make({"A", "B"}, {{0, 0, 0.5, 0.0, kInf}, {1, 0, 0.2, 0.0, kInf}, {1, 0, 0.2, 0.0, kInf}},
                            {1.0, 0.0});
  net.contracts.push_back(net.contracts[1]);
  net.contracts.back().layer = 3;
  net.contracts.back().rate = 1.5;
  auto rep = validate_network(net);
  EXPECT_TRUE(has_rule(rep, Rule::self_reinsurance));
  EXPECT_TRUE(has_rule(rep, Rule::duplicate_contract));
  EXPECT_TRUE(has_rule(rep, Rule::rate_range));
  EXPECT_THROW(require_valid(net), ValidationError);
}

TEST(Validate, DisconnectedIsWarningOnly) {
  auto net = fixtures::make({"A", "B", "C", "D"}, {{1, 0, 1.0, 0.0, kInf}, {3, 2, 1.0, 0.0, kInf}},
                            {1.0, 0.0, 1.0, 0.0});
  auto rep = validate_network(net);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.warnings.size(), 1u);
}

TEST(LineGraph, ThreeCycleIsPermutation) {
  auto sys = build_line_graph(fixtures::spiral());
  ASSERT_EQ(sys.size(), 3u);
  const Eigen::MatrixXd X = sys.dense_X();
  EXPECT_DOUBLE_EQ(X.sum(), 3.0);
  EXPECT_TRUE((X.rowwise().sum().array() == 1.0).all());
  EXPECT_TRUE((X.colwise().sum().array() == 1.0).all());
  EXPECT_DOUBLE_EQ(X.trace(), 0.0);
  // Ordering by reinsured firm: contracts on A, B, C.
  EXPECT_EQ(sys.edges[0].reinsured, 0u);
  EXPECT_EQ(sys.edges[1].reinsured, 1u);
  EXPECT_EQ(sys.edges[2].reinsured, 2u);
}

TEST(LineGraph, StarHasNoInternalEdges) {
  auto net = fixtures::make({"P", "R1", "R2", "R3"},
                            {{1, 0, 0.3, 0.0, kInf}, {2, 0, 0.3, 0.0, kInf}, {3, 0, 0.3, 0.0, kInf}},
                            {1.0, 0.0, 0.0, 0.0});
  auto sys = build_line_graph(net);
  EXPECT_EQ(sys.size(), 3u);
  EXPECT_EQ(sys.X.nonZeros(), 0);
}

TEST(LineGraph, TwoLevelChainHasOneLink) {
  // B covers A, C covers B: what B pays on its cover of A becomes a claim
  // under C's cover of B.
  auto net = fixtures::make({"A", "B", "C"}, {{1, 0, 1.0, 0.0, 10.0}, {2, 1, 1.0, 0.0, 10.0}}, {1.0, 0.0, 0.0});
  auto sys = build_line_graph(net);
  const Eigen::MatrixXd X = sys.dense_X();
  EXPECT_DOUBLE_EQ(X.sum(), 1.0);
  EXPECT_DOUBLE_EQ(X(1, 0), 1.0);
}

TEST(LineGraph, FieldsMatchSourceContracts) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto net = fixtures::random_network(rng, {12, 0.9, true, true});
    auto sys = build_line_graph(net);
    ASSERT_EQ(sys.size(), net.contracts.size());
    const Eigen::MatrixXd X = sys.dense_X();
    for (std::size_t e = 0; e < sys.size(); ++e) {
      const auto& src = net.contracts[sys.edges[e].source];
      const auto i = static_cast<Eigen::Index>(e);
      EXPECT_EQ(sys.gamma(i), src.rate);
      EXPECT_EQ(sys.d(i), src.deductible);
      EXPECT_EQ(sys.c(i), src.cap.value());
      EXPECT_EQ(sys.s(i), net.shock[src.reinsured]);
      for (std::size_t f = 0; f < sys.size(); ++f)
        EXPECT_EQ(X(i, static_cast<Eigen::Index>(f)), sys.edges[e].reinsured == sys.edges[f].reinsurer ? 1.0 : 0.0);
      if (e > 0) {
        const auto& a = sys.edges[e - 1];
        const auto& b = sys.edges[e];
        EXPECT_LT(std::tie(a.reinsured, a.reinsurer, a.layer), std::tie(b.reinsured, b.reinsurer, b.layer));
      }
    }
  }
}

TEST(LineGraph, BuildIsDeterministic) {
  std::mt19937_64 rng(11);
  auto net = fixtures::random_network(rng, {15, 0.9, true, true});
  auto a = build_line_graph(net);
  auto b = build_line_graph(net);
  EXPECT_EQ(a.edges, b.edges);
  EXPECT_TRUE(a.dense_X() == b.dense_X());
  EXPECT_TRUE(a.gamma == b.gamma && a.d == b.d && a.s == b.s);
}

TEST(LineGraph, InvalidNetworkRejected) {
  auto net = fixtures::make({"A", "B", "C"}, {{1, 0, 0.7, 0.0, kInf}, {2, 0, 0.5, 0.0, kInf}}, {1.0, 0.0, 0.0});
  EXPECT_THROW(build_line_graph(net), ValidationError);
}

TEST(LiabilitiesMatrix, ZeroAndSingleEdge) {
  auto single = build_line_graph(fixtures::make({"A", "B"}, {{1, 0, 1.0, 0.0, kInf}}, {1.0, 0.0}));
  EXPECT_TRUE(liabilities_matrix(single, Eigen::VectorXd::Zero(1)).isZero());
  const Eigen::MatrixXd L = liabilities_matrix(single, Eigen::VectorXd::Constant(1, 5.0));
  EXPECT_DOUBLE_EQ(L(1, 0), 5.0);
  EXPECT_DOUBLE_EQ(L.sum(), 5.0);
  EXPECT_THROW(liabilities_matrix(single, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST(LiabilitiesMatrix, SpiralCycle) {
  auto sys = build_line_graph(fixtures::spiral());
  const Eigen::MatrixXd L = liabilities_matrix(sys, Eigen::Vector3d(10, 10, 10));
  EXPECT_DOUBLE_EQ(L(2, 0), 10.0);  // C owes A
  EXPECT_DOUBLE_EQ(L(0, 1), 10.0);  // A owes B
  EXPECT_DOUBLE_EQ(L(1, 2), 10.0);  // B owes C
  EXPECT_DOUBLE_EQ(L.sum(), 30.0);
  EXPECT_TRUE(net_liabilities(L).isZero());
}

TEST(NetLiabilities, SingleTransfer) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_TRUE(net_liabilities(L).isZero());
  L(1, 0) = 5.0;
  const Eigen::VectorXd d = net_liabilities(L);
  EXPECT_DOUBLE_EQ(d(0), 5.0);
  EXPECT_DOUBLE_EQ(d(1), -5.0);
}

TEST(NetLiabilities, MassAndConservationOnRandomVectors) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto sys = build_line_graph(fixtures::random_network(rng, {20, 0.9, false, false}));
    Eigen::VectorXd ell(static_cast<Eigen::Index>(sys.size()));
    for (auto& v : ell) v = u(rng);
    const Eigen::MatrixXd L = liabilities_matrix(sys, ell);
    EXPECT_NEAR(L.sum(), ell.sum(), 1e-9 * (1.0 + ell.sum()));
    EXPECT_LE(std::abs(net_liabilities(L).sum()), 1e-9 * (1.0 + L.sum()));
  }
}
