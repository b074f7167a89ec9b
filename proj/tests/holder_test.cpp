#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mrelu/bench.hpp"
#include "mrelu/holder.hpp"
#include "test_util.hpp"

using namespace mrelu;

namespace {

HolderFunction square(double beta = 2.0, Box U = Box::cube(1, 0.25, 0.75)) {
  return make_holder("square", 1, beta, 2.0, U, [](const auto& x) { return x[0] * x[0]; });
}

// Brute force: every grid index, sup distance, strict lexicographic order.
std::vector<std::size_t> brute_nearest(const std::vector<std::size_t>& l, const HolderFunction& f, const Grid& g) {
  std::vector<std::size_t> best;
  std::size_t best_d = static_cast<std::size_t>(-1);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto z = g.index(k);
    if (!f.contains(g.point(z))) continue;
    std::size_t d = 0;
    for (std::size_t j = 0; j < z.size(); ++j) d = std::max(d, l[j] > z[j] ? l[j] - z[j] : z[j] - l[j]);
    if (d < best_d || (d == best_d && z < best)) {
      best_d = d;
      best = z;
    }
  }
  return best;
}

}  // namespace

TEST(Taylor, QuadraticAtHalf) {
  const auto f = square();
  const double a[] = {0.5};
  const TaylorPolynomial p = taylor_poly(f, a);
  EXPECT_EQ(p.degree(), 1u);
  for (double x : {0.25, 0.4, 0.6, 0.75}) {
    EXPECT_NEAR(p(std::vector<double>{x}), 0.25 + (x - 0.5), 1e-15);
    EXPECT_NEAR(x * x - p(std::vector<double>{x}), (x - 0.5) * (x - 0.5), 1e-15);
  }
  const double out[] = {0.9};
  EXPECT_THROW(taylor_poly(f, out), DomainError);
}

TEST(Taylor, ConstantHasZeroRemainder) {
  const auto c = make_holder("c", 2, 3.0, 1.0, Box::cube(2, 0.0, 1.0),
                             [](const auto& x) { return constant_like(x[0], 0.375); });
  const double a[] = {0.2, 0.6};
  const TaylorPolynomial p = taylor_poly(c, a);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(p(testutil::random_point(rng, 2, 0.0, 1.0)), 0.375);
}

TEST(Taylor, SineThirdOrder) {
  const auto s = make_holder("sin", 1, 3.0, 1.0, Box::cube(1, -1.0, 1.0), [](const auto& x) {
    using std::sin;
    return sin(x[0]);
  });
  const double a[] = {0.0};
  const TaylorPolynomial p = taylor_poly(s, a);
  ASSERT_EQ(p.coeff.size(), 3u);
  EXPECT_NEAR(p.coeff[0], 0.0, 1e-15);
  EXPECT_NEAR(p.coeff[1], 1.0, 1e-15);
  EXPECT_NEAR(p.coeff[2], 0.0, 1e-15);
  for (int k = -20; k <= 20; ++k) {
    const double x = k / 20.0;
    EXPECT_LE(std::abs(std::sin(x) - p(std::vector<double>{x})), std::pow(std::abs(x), 3) / 6.0 + 1e-15);
  }
}

TEST(Taylor, FiniteDifferenceMatchesAnalytic) {
  const auto f = make_holder("g", 2, 3.0, 4.0, Box::cube(2, 0.0, 1.0), [](const auto& x) {
    using std::exp;
    return exp(x[0] - 0.5 * x[1]) * x[1];
  });
  const auto fd = as_finite_difference(f, 1e-4);
  const double a[] = {0.4, 0.3};
  const TaylorPolynomial p = taylor_poly(f, a), q = taylor_poly(fd, a);
  ASSERT_EQ(p.index, q.index);
  for (std::size_t i = 0; i < p.coeff.size(); ++i) EXPECT_NEAR(p.coeff[i], q.coeff[i], 1e-6);
}

TEST(Taylor, MonomialCoefficients) {
  const auto f = make_holder("p", 2, 3.0, 4.0, Box::cube(2, 0.0, 1.0),
                             [](const auto& x) { return x[0] * x[1] + x[0] * x[0] * 0.5 - x[1] + 0.25; });
  const double a[] = {0.3, 0.8};
  const auto m = taylor_poly(f, a).monomial_coefficients();
  // Index order: 1, x, y, x^2, xy, y^2.
  const double expect[] = {0.25, 0.0, -1.0, 0.5, 1.0, 0.0};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(m[i], expect[i], 1e-14);
}

TEST(Grid, SizesAndIndexing) {
  const Grid g(4, 2);
  EXPECT_EQ(g.size(), 25u);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(g.flat(g.index(k)), k);
  EXPECT_EQ(g.index(7), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(grid_size_for(25, 2), 4u);
  EXPECT_EQ(grid_size_for(24, 2), 3u);
  EXPECT_EQ(grid_size_for(97, 1), 96u);
  EXPECT_THROW(Grid(0, 1), PreconditionError);
}

TEST(Nearest, Examples) {
  const auto f = square(2.0, Box::cube(1, 0.3, 0.7));
  const Grid g(4, 1);
  EXPECT_EQ(nearest_indomain(std::vector<std::size_t>{0}, f, g), (std::vector<std::size_t>{2}));
  EXPECT_EQ(nearest_indomain(std::vector<std::size_t>{2}, f, g), (std::vector<std::size_t>{2}));
  const auto tiny = square(2.0, Box::cube(1, 0.3, 0.45));
  EXPECT_THROW(nearest_indomain(std::vector<std::size_t>{0}, tiny, g), PreconditionError);
}

TEST(Nearest, MatchesBruteForceOnBoxesAndPredicates) {
  const Grid g(6, 2);
  const auto box = make_holder("b", 2, 2.0, 1.0, Box::cube(2, 0.3, 0.7), [](const auto& x) { return x[0]; });
  auto disk = box;
  disk.domain = Box::cube(2, 0.0, 1.0);
  disk.inside = [](std::span<const double> x) {
    return (x[0] - 0.5) * (x[0] - 0.5) + (x[1] - 0.5) * (x[1] - 0.5) <= 0.1;
  };
  for (const HolderFunction* f : std::vector<const HolderFunction*>{&box, &disk})
    for (std::size_t k = 0; k < g.size(); ++k) {
      const auto l = g.index(k);
      EXPECT_EQ(nearest_indomain(l, *f, g), brute_nearest(l, *f, g)) << k;
    }
}

TEST(HatWeights, PartitionOfUnity) {
  std::mt19937_64 rng(4);
  for (std::size_t d = 1; d <= 3; ++d) {
    const Grid g(5, d);
    for (int k = 0; k < 200; ++k) {
      const auto x = testutil::random_point(rng, d, 0.0, 1.0);
      double s = 0.0;
      for (const HatWeight& h : hat_weights(g, x)) {
        // Independent evaluation of the product of unary hats.
        double w = 1.0;
        const auto z = g.point(g.index(h.flat));
        for (std::size_t j = 0; j < d; ++j) w *= std::max(0.0, 1.0 - 5.0 * std::abs(x[j] - z[j]));
        EXPECT_NEAR(h.weight, w, 1e-14);
        s += h.weight;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(LocalScheme, ReproducesPolynomials) {
  // Degree 1 with beta 2 on the full cube: every anchor is in the domain.
  const auto lin = make_holder("lin", 2, 2.0, 2.0, Box::cube(2, 0.0, 1.0),
                               [](const auto& x) { return x[0] * 0.3 - x[1] * 0.7 + 0.1; });
  const auto quad = make_holder("quad", 2, 3.0, 2.0, Box::cube(2, 0.0, 1.0),
                                [](const auto& x) { return x[0] * x[1] - x[0] * x[0] * 0.5; });
  std::mt19937_64 rng(5);
  for (const HolderFunction* f : std::vector<const HolderFunction*>{&lin, &quad}) {
    LocalScheme s(*f, Grid(7, 2));
    for (int k = 0; k < 300; ++k) {
      const auto x = testutil::random_point(rng, 2, 0.0, 1.0);
      EXPECT_NEAR(s(x), f->eval1(x), 1e-10);
    }
  }
}

TEST(LocalScheme, SquareErrorBoundAndRate) {
  const auto f = square();
  const auto xs = dense_points(f.domain, 2001, 0, 1);
  std::vector<std::pair<double, double>> pts;
  double prev = 1e9;
  for (std::size_t M : {4u, 8u, 16u, 32u}) {
    LocalScheme s(f, Grid(M, 1));
    double e = 0.0;
    for (const auto& x : xs) e = std::max(e, std::abs(s(x) - f.eval1(x)));
    EXPECT_LE(e, f.K * std::pow(3.0, f.beta) * std::pow(static_cast<double>(M), -f.beta));
    EXPECT_LE(e, prev * 1.05);
    prev = e;
    pts.emplace_back(static_cast<double>(M), e);
  }
  EXPECT_NEAR(rate_fit(pts), -2.0, 0.25);
}

TEST(Rescale, DomainAndValues) {
  const auto f = make_holder("f", 1, 2.0, 1.0, Box::cube(1, -1.0, 1.0), [](const auto& x) { return x[0] * 0.5; });
  const auto g = rescaled(f, 4.0);
  EXPECT_DOUBLE_EQ(g.domain.lo[0], 0.25);
  EXPECT_DOUBLE_EQ(g.domain.hi[0], 0.75);
  EXPECT_DOUBLE_EQ(g.eval1(std::vector<double>{0.75}), 0.5);
  EXPECT_DOUBLE_EQ(g.K, 16.0);
  const double a[] = {0.5};
  EXPECT_NEAR(taylor_poly(g, a).coeff[1], 2.0, 1e-14);
}

TEST(Estimates, HolderConstantAndLipschitz) {
  const auto f = make_holder("s", 2, 2.0, 4.0, Box::cube(2, 0.0, 1.0), [](const auto& x) {
    using std::sin;
    return sin(x[0] * 2.0 + x[1]);
  });
  const auto xs = dense_points(f.domain, 41, 0, 1);
  // 2x + y sweeps [0, 3], so the xx-derivative reaches 4 and the partials sum to 3.
  EXPECT_NEAR(estimate_holder_constant(f, xs), 4.0, 1e-3);
  EXPECT_NEAR(estimate_lipschitz(f, xs), 3.0, 1e-3);
}
