#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mrelu/bench.hpp"
#include "mrelu/experiment.hpp"
#include "test_util.hpp"

using namespace mrelu;

namespace {

const Atlas& embedded_atlas() {
  static const Atlas a = make_atlas("circle_embedded", 10, 7, 8);
  return a;
}

}  // namespace

TEST(Budget, SharesRecombineToEta) {
  const ErrorBudget b = error_budget(0.2, 4, 0.05, 2.0);
  EXPECT_DOUBLE_EQ(b.pullback, 0.2 / 16);
  EXPECT_DOUBLE_EQ(b.tau, 0.2 / 16);
  EXPECT_DOUBLE_EQ(b.mult, 0.2 / 16);
  EXPECT_DOUBLE_EQ(b.chart, std::min(0.2 / 16, 0.05 / 4));
  EXPECT_LE(b.recombined(), 0.2 * (1 + 1e-12));
  // Rough targets: the chart share is raised to 1/beta.
  const ErrorBudget r = error_budget(0.4, 4, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(r.chart, std::pow(0.4 / 16, 2.0));
  EXPECT_NEAR(r.recombined(), 0.4, 1e-12);
  EXPECT_THROW(error_budget(0.0, 4, 0.1, 2.0), PreconditionError);
  EXPECT_THROW(error_budget(0.6, 4, 0.1, 2.0), PreconditionError);
  EXPECT_THROW(error_budget(0.2, 0, 0.1, 2.0), PreconditionError);
  EXPECT_THROW(error_budget(0.2, 4, 0.0, 2.0), PreconditionError);
}

TEST(Geometry, FattenedImagesStayInCharts) {
  const Atlas& a = embedded_atlas();
  const AtlasGeometry& g = a.geometry;
  EXPECT_GT(g.delta, 0.0);
  EXPECT_GT(g.delta_prime, 0.0);
  const Manifold& m = *a.manifold;
  for (std::size_t j = 0; j < m.chart_count(); ++j) {
    const Box& img = m.chart(j).image();
    EXPECT_GT(g.fattened[j].lo[0], img.lo[0]);
    EXPECT_LT(g.fattened[j].hi[0], img.hi[0]);
    EXPECT_FALSE(g.support[j].empty());
    for (std::size_t s : g.support[j]) {
      const auto u = m.chart(j).forward(g.samples[s]);
      EXPECT_TRUE(g.margin_image[j].contains(u, 1e-12));
    }
  }
}

TEST(Search, MeetsBudgetOnIndependentSamples) {
  const auto f = make_holder("sq", 1, 2.0, 2.0, Box::cube(1, 0.25, 0.75), [](const auto& x) { return x[0] * x[0]; });
  const double budget = 2e-3;
  const SearchResult s = search_holder(f, budget, "test");
  EXPECT_LE(s.measured, budget);
  EXPECT_GE(s.trials, 1u);
  HolderNetOptions o;
  o.enforce_threshold = false;
  const Network n = build_holder_net(f, s.N, s.m, o);
  EXPECT_LE(sup_error(n, f, box_sampler(f.domain), 20000, 9), budget);
  // One grid size smaller must miss the budget on the search's own audit.
  if (s.N > 5) {
    const Network smaller = build_holder_net(f, grid_size_for(s.N, 1), s.m, o);
    EXPECT_GT(sup_error(smaller, f, dense_points(f.domain, 4001, 0, 1)), 0.5 * budget);
  }
}

TEST(Search, UnreachableBudgetNamesStage) {
  const auto f = make_holder("sq", 1, 2.0, 2.0, Box::cube(1, 0.25, 0.75), [](const auto& x) { return x[0] * x[0]; });
  SearchOptions o;
  o.N_max = 40;
  try {
    search_holder(f, 1e-7, "pullback", o);
    FAIL();
  } catch (const BudgetError& e) {
    EXPECT_EQ(e.stage(), "pullback");
  }
}

TEST(Gadgets, GateAndSignedSum) {
  const double row[] = {0.6, -0.8};
  const Network g = detail::build_gate(row, 0.3);
  EXPECT_TRUE(validate(g).ok());
  std::mt19937_64 rng(5);
  for (int k = 0; k < 500; ++k) {
    const auto x = testutil::random_point(rng, 2);
    const double y = 0.6 * x[0] - 0.8 * x[1];
    EXPECT_NEAR(g.eval1(x), std::min(1.0, std::max(0.0, y) / 0.3), 1e-12);
  }
  const Network s = detail::signed_sum(3);
  EXPECT_DOUBLE_EQ(s.eval1(std::vector<double>{1, 2, 3, 5, 8, 13}), -1.0 - 2.0 - 5.0);
}

TEST(Stages, ChartNetTracksChartMap) {
  const Atlas& a = embedded_atlas();
  const Manifold& m = *a.manifold;
  const double budget = 0.01;
  StageReport rep;
  const Network n = build_chart_net(m, 1, budget, {}, &rep);
  EXPECT_TRUE(validate(n).ok());
  EXPECT_EQ(rep.stage, "chart");
  for (const auto& x : m.sample(4000, 31)) {
    if (!m.chart(1).member(x)) continue;
    EXPECT_LE(std::abs(n.eval1(x) - m.chart(1).forward(x)[0]), budget);
  }
}

TEST(Stages, PullbackPairOnFattenedImage) {
  const Atlas& a = embedded_atlas();
  const Manifold& m = *a.manifold;
  const HolderFunction f = make_manifold_target("sin(2x+y)", m);
  const double budget = 0.01;
  StageReport rep;
  const Network n = build_pullback_net(f, m, a.geometry, 2, budget, {}, &rep);
  EXPECT_TRUE(validate(n).ok());
  EXPECT_GT(rep.lipschitz, 0.0);
  const Box& dom = a.geometry.fattened[2];
  for (const auto& u : draw(box_sampler(dom), 3000, 32)) {
    const auto y = n.eval(u);
    EXPECT_GE(y[0], 0.0);
    EXPECT_GE(y[1], 0.0);
    EXPECT_TRUE(y[0] == 0.0 || y[1] == 0.0);
    EXPECT_LE(std::abs(y[0] - y[1] - f.eval1(m.chart(2).inverse(u))), budget);
  }
}

TEST(Stages, TauNetBelowPartitionAndZeroOffSupport) {
  const Atlas& a = embedded_atlas();
  const Manifold& m = *a.manifold;
  const double budget = 0.05;
  double shift = 0.0;
  std::size_t violations = 99;
  const Network n = build_tau_net(*a.partition, a.geometry, 0, budget, {}, nullptr, nullptr, &shift, &violations);
  EXPECT_EQ(violations, 0u);
  EXPECT_LE(2 * shift, budget);
  EXPECT_TRUE(validate(n).ok());
  for (const auto& x : m.sample(5000, 33)) {
    const double t = (*a.partition)(0, x);
    const double y = n.eval1(x);
    EXPECT_GE(y, 0.0);
    EXPECT_LE(std::abs(y - t), budget);
  }
}

TEST(Assemble, EmbeddedCircleCoordinate) {
  const Atlas& a = embedded_atlas();
  const Manifold& m = *a.manifold;
  const HolderFunction f = make_manifold_target("x", m);
  AssemblyReport rep;
  const double eta = 0.4;
  const Network n = assemble(f, *a.partition, a.geometry, eta, {}, &rep);
  EXPECT_TRUE(rep.strict_ok);
  EXPECT_TRUE(validate(n).ok());
  EXPECT_EQ(rep.off_support_violations, 0u);
  EXPECT_EQ(rep.m_star, mult_star_order(4, eta));
  EXPECT_EQ(rep.stages.size(), 12u);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_LE(rep.composed_error[j], rep.composed_bound[j] + 1e-12);
  EXPECT_EQ(rep.sparsity, sparsity(n).nonzero_count);
  // Fresh samples, seed unrelated to the assembler's own audit.
  EXPECT_LE(sup_error(n, f, [&m](std::mt19937_64& rng) {
              std::uniform_real_distribution<double> u(0.0, 2 * std::numbers::pi);
              return m.point(std::vector<double>{u(rng)});
            }, 20000, 77),
            eta);
}

TEST(Assemble, Preconditions) {
  const Atlas& a = embedded_atlas();
  const HolderFunction wrong = make_rate_function("square", 2, 2.0);
  EXPECT_THROW(assemble(wrong, *a.partition, a.geometry, 0.4), DimensionError);
  const HolderFunction f = make_manifold_target("x", *a.manifold);
  EXPECT_THROW(assemble(f, *a.partition, a.geometry, 0.7), PreconditionError);
}
