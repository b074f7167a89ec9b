#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mrelu/bench.hpp"
#include "mrelu/holder_net.hpp"
#include "test_util.hpp"

using namespace mrelu;

namespace {

// Scheme value of the rescaled target at the rescaled input.
double oracle(LocalScheme& s, double R, std::vector<double> x) {
  for (double& v : x) v = v / R + 0.5;
  return s(x);
}

}  // namespace

TEST(HolderNet, PaperFigures) {
  EXPECT_EQ(envelope_depth(2, 2.0, 10), 39u);
  EXPECT_EQ(holder_threshold(1, 2.0, 2.0), 9u);
  EXPECT_EQ(holder_threshold(2, 2.0, 1.0), 25u);
  EXPECT_DOUBLE_EQ(envelope_sparsity(1, 1, 2.0, 10, 4), 142.0 * 256.0 * 10.0 * 10.0);
}

TEST(HolderNet, ZeroFunction) {
  const auto f = make_holder("zero", 2, 2.0, 1.0, Box::cube(2, 0.25, 0.75),
                             [](const auto& x) { return constant_like(x[0], 0.0); });
  HolderNetReport rep;
  const Network n = build_holder_net(f, 49, 6, {}, &rep);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 200; ++k) EXPECT_EQ(n.eval1(testutil::random_point(rng, 2, 0.25, 0.75)), 0.0);
  EXPECT_TRUE(validate(n).ok());
}

TEST(HolderNet, MatchesSchemeWithinGadgetBound) {
  const auto f = make_holder("square", 1, 2.0, 2.0, Box::cube(1, 0.25, 0.75), [](const auto& x) { return x[0] * x[0]; });
  HolderNetReport rep;
  const Network n = build_holder_net(f, 25, 12, {}, &rep);
  EXPECT_EQ(rep.M, 24u);
  EXPECT_DOUBLE_EQ(rep.R, 3.0);
  EXPECT_GT(rep.c_gadget, 0.0);
  LocalScheme s(rescaled(f, rep.R), Grid(rep.M, 1));
  const auto xs = draw(box_sampler(f.domain), 10000, 2);
  double gap = 0.0, err = 0.0;
  for (const auto& x : xs) {
    gap = std::max(gap, std::abs(n.eval1(x) - oracle(s, rep.R, x)));
    err = std::max(err, std::abs(n.eval1(x) - f.eval1(x)));
  }
  EXPECT_LE(gap, rep.gadget_bound);
  EXPECT_LE(err, rep.envelope_error_bound);
  EXPECT_TRUE(validate(n).ok());
  EXPECT_LE(static_cast<double>(rep.sparsity), rep.envelope_sparsity);
  EXPECT_EQ(rep.depth, n.depth());
  EXPECT_EQ(rep.sparsity, sparsity(n).nonzero_count);
}

TEST(HolderNet, TwoDimensionalSine) {
  const auto f = make_holder("sine", 2, 2.0, 2.0, Box::cube(2, 0.25, 0.75), [](const auto& x) {
    using std::sin;
    return sin((x[0] + x[1]) * 2.0) * 0.5;
  });
  HolderNetReport rep;
  const Network n = build_holder_net(f, 169, 14, {}, &rep);
  LocalScheme s(rescaled(f, rep.R), Grid(rep.M, 2));
  std::mt19937_64 rng(3);
  for (int k = 0; k < 2000; ++k) {
    const auto x = testutil::random_point(rng, 2, 0.25, 0.75);
    EXPECT_LE(std::abs(n.eval1(x) - oracle(s, rep.R, x)), rep.gadget_bound);
  }
  EXPECT_TRUE(validate(n).ok());
}

TEST(HolderNet, ErrorShrinksWithN) {
  const auto f = make_holder("square", 1, 2.0, 2.0, Box::cube(1, 0.25, 0.75), [](const auto& x) { return x[0] * x[0]; });
  const auto xs = dense_points(f.domain, 4001, 0, 1);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t N : {13u, 25u, 49u, 97u}) {
    const Network n = build_holder_net(f, N, 22);
    pts.emplace_back(static_cast<double>(N), sup_error(n, f, xs));
  }
  EXPECT_NEAR(rate_fit(pts), -2.0, 0.25);
}

TEST(HolderNet, ProjectionAndMultipleOutputs) {
  const auto f = make_holder("pair", 1, 2.0, 2.0, Box::cube(1, -0.5, 0.5), [](const auto& x) {
    using std::cos;
    return std::vector<std::decay_t<decltype(x[0])>>{x[0] * x[0], cos(x[0])};
  });
  HolderNetOptions opt;
  opt.projection = {{0.6, 0.8}};
  const Network n = build_holder_net(f, 65, 16, opt);
  EXPECT_EQ(n.input_dim(), 2u);
  EXPECT_EQ(n.output_dim(), 2u);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 500; ++k) {
    const auto p = testutil::random_point(rng, 2, -0.3, 0.3);
    const double z = 0.6 * p[0] + 0.8 * p[1];
    const auto y = n.eval(p);
    EXPECT_NEAR(y[0], z * z, 0.01);
    EXPECT_NEAR(y[1], std::cos(z), 0.01);
  }
  EXPECT_TRUE(validate(n).ok());
}

TEST(HolderNet, Preconditions) {
  const auto f = make_holder("square", 1, 2.0, 2.0, Box::cube(1, 0.25, 0.75), [](const auto& x) { return x[0] * x[0]; });
  EXPECT_THROW(build_holder_net(f, 8, 10), PreconditionError);
  EXPECT_THROW(build_holder_net(f, 25, 0), PreconditionError);
  HolderNetOptions loose;
  loose.enforce_threshold = false;
  EXPECT_NO_THROW(build_holder_net(f, 8, 10, loose));
  HolderNetOptions bad;
  bad.projection = {{1.0}, {1.0}};
  EXPECT_THROW(build_holder_net(f, 25, 10, bad), DimensionError);
}
