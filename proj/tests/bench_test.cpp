#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mrelu/bench.hpp"
#include "mrelu/corpus.hpp"
#include "test_util.hpp"

using namespace mrelu;

TEST(RateFit, RecoversExactPowerLaw) {
  std::vector<std::pair<double, double>> pts;
  for (double n : {10.0, 20.0, 40.0, 80.0}) pts.emplace_back(n, 3.0 * std::pow(n, -0.75));
  EXPECT_NEAR(rate_fit(pts), -0.75, 1e-12);
  EXPECT_THROW(rate_fit({{1, 1}, {2, 2}}), PreconditionError);
  EXPECT_THROW(rate_fit({{1, 1}, {2, 0}, {3, 1}}), PreconditionError);
  EXPECT_THROW(rate_fit({{2, 1}, {2, 2}, {2, 3}}), PreconditionError);
}

TEST(SupError, AgainstDirectMaximum) {
  std::mt19937_64 rng(1);
  const Network n = testutil::random_network(rng, Architecture{1, {1, 4, 1}}, 1.0);
  const auto f = make_holder("lin", 1, 1.0, 1.0, Box::cube(1, 0.0, 1.0), [](const auto& x) { return x[0] * 0.5; });
  const auto xs = dense_points(f.domain, 101, 50, 3);
  double e = 0.0;
  for (const auto& x : xs) e = std::max(e, std::abs(testutil::reference_eval(n, x)[0] - 0.5 * x[0]));
  EXPECT_NEAR(sup_error(n, f, xs), e, 1e-12);
  EXPECT_THROW(sup_error(n, f, box_sampler(f.domain), 0, 1), PreconditionError);
}

TEST(DensePoints, GridPlusRandom) {
  const Box b = Box::cube(2, 0.25, 0.75);
  const auto xs = dense_points(b, 5, 7, 2);
  EXPECT_EQ(xs.size(), 25u + 7u);
  for (const auto& x : xs) EXPECT_TRUE(b.contains(x));
  EXPECT_EQ(xs.back(), (std::vector<double>{0.75, 0.75}));
  EXPECT_EQ(dense_points(b, 5, 7, 2), xs);
}

TEST(Report, CsvRoundTripIsExact) {
  ErrorReport r;
  ReportRow a;
  a.config_id = "kink/d1/b1";
  a.kind = "rate";
  a.size = 97;
  a.error = 0.1 + 0.2;
  a.depth = 12;
  a.width = 300;
  a.sparsity = 4567;
  a.envelope = 1e300;
  a.extra = -1.0 / 3.0;
  r.rows.push_back(a);
  ReportRow b = a;
  b.config_id = "odd, \"quoted\" id";
  b.status = "off";
  r.rows.push_back(b);
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kReportHeader);
  const ErrorReport back = parse_report(csv);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[0], a);
  EXPECT_EQ(back.rows[1], b);
  EXPECT_EQ(report_csv(back), csv);
}

TEST(Report, FileRoundTripAndErrors) {
  ErrorReport r;
  r.rows.push_back(slope_row("x", -1.9, -2.0, 0.25));
  const auto path = (std::filesystem::temp_directory_path() / "mrelu_bench_test.csv").string();
  emit_report(r, path);
  EXPECT_EQ(load_report(path).rows.front(), r.rows.front());
  std::remove(path.c_str());
  EXPECT_THROW(load_report(path), Error);
  EXPECT_THROW(parse_report("bad header\n"), ParseError);
  EXPECT_THROW(parse_report(std::string(kReportHeader) + "\na,b,c\n"), ParseError);
  EXPECT_THROW(parse_report(std::string(kReportHeader) + "\na,rate,x,1,1,1,1,1,1,ok\n"), ParseError);
}

TEST(Report, SlopeRowAndSummary) {
  EXPECT_EQ(slope_row("a", -1.9, -2.0, 0.25).status, "ok");
  EXPECT_EQ(slope_row("a", -1.7, -2.0, 0.25).status, "off");
  ErrorReport r;
  r.rows.push_back(slope_row("fit", -1.9, -2.0, 0.25));
  const std::string s = report_summary(r);
  EXPECT_NE(s.find("slope -1.900"), std::string::npos);
  EXPECT_NE(s.find("ok"), std::string::npos);
}

TEST(Corpus, DeclaredConstantsBoundSampledDerivatives) {
  for (double beta : {1.0, 2.0})
    for (std::size_t d : {1u, 2u})
      for (const auto& name : rate_corpus_names(beta)) {
        const HolderFunction f = make_rate_function(name, d, beta);
        EXPECT_EQ(f.dim, d);
        const auto xs = dense_points(f.domain, d == 1 ? 401 : 41, 0, 1);
        EXPECT_LE(estimate_holder_constant(f, xs), f.K * (1 + 1e-9)) << name << " d=" << d;
      }
  EXPECT_THROW(make_rate_function("nope", 1, 2.0), PreconditionError);
}

TEST(Corpus, KinkValues) {
  const HolderFunction k = make_rate_function("kink", 2, 1.0);
  EXPECT_NEAR(k.eval1(std::vector<double>{0.25, 0.75}), std::abs(0.5 - 1.0 / 3.0), 1e-15);
  const HolderFunction s = make_rate_function("square", 1, 2.0);
  EXPECT_NEAR(s.eval1(std::vector<double>{0.5}), 0.25, 1e-15);
}

TEST(Corpus, ManifoldTargetsReadPlaneCoordinates) {
  const Manifold m = make_circle_embedded(10, 7);
  const HolderFunction xy = make_manifold_target("xy", m);
  const HolderFunction sn = make_manifold_target("sin(2x+y)", m);
  for (const auto& p : m.sample(200, 4)) {
    const auto w = m.plane(p);
    EXPECT_NEAR(xy.eval1(p), w[0] * w[1], 1e-14);
    EXPECT_NEAR(sn.eval1(p), std::sin(2 * w[0] + w[1]), 1e-14);
  }
  EXPECT_EQ(make_manifold_target("half", m).eval1(m.sample(1, 1)[0]), 0.5);
  EXPECT_THROW(make_manifold_target("nope", m), PreconditionError);
}

TEST(RunRate, SmallSweepReportsRowsAndSlope) {
  const HolderFunction f = make_rate_function("square", 1, 2.0);
  RateOptions o;
  o.m = 20;
  const ErrorReport r = run_rate(f, {13, 25, 49, 97}, o);
  ASSERT_EQ(r.rows.size(), 5u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(r.rows[i].kind, "rate");
    EXPECT_EQ(r.rows[i].status, "ok");
    EXPECT_LE(r.rows[i].error, r.rows[i].extra);
  }
  EXPECT_EQ(r.rows[4].kind, "slope");
  EXPECT_EQ(r.rows[4].status, "ok");
  EXPECT_THROW(run_rate(f, {}, o), PreconditionError);
}
