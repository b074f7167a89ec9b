// Acceptance run: one PASS/FAIL line per criterion. `--only N` runs a single
// criterion; the exit code is 0 iff every criterion run passed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mrelu/calculus.hpp"
#include "mrelu/experiment.hpp"
#include "mrelu/holder_net.hpp"
#include "mrelu/primitives.hpp"
#include "mrelu/serialize.hpp"
#include "test_util.hpp"

using namespace mrelu;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> failures;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (failures.size() < 8) failures.push_back(what);
    }
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
  return e;
}

std::size_t nnz(const std::vector<double>& v) {
  std::size_t n = 0;
  for (double x : v) n += x != 0.0;
  return n;
}

std::size_t nz(const Network& n) { return sparsity(n).nonzero_count; }

// 1. Calculus semantics and shape arithmetic against a dense oracle.
Outcome criterion1() {
  Outcome o;
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t din = 1 + t % 3, dmid = 1 + (t / 3) % 3;
    const Network f = testutil::random_network(rng, testutil::random_arch(rng, din, dmid), 0.6);
    const Network g = testutil::random_network(rng, testutil::random_arch(rng, dmid, 2), 0.6);
    Architecture same = testutil::random_arch(rng, din, 2);
    same.depth = f.depth();
    same.widths.resize(f.depth() + 2);
    for (std::size_t i = 1; i <= f.depth(); ++i) same.widths[i] = 1 + rng() % 5;
    same.widths.back() = 2;
    const Network h = testutil::random_network(rng, same, 0.6);
    std::vector<double> v(dmid);
    for (double& x : v) x = rng() % 2 ? u(rng) : 0.0;

    const Network c = compose(g, f, v);
    const Network p = parallelize(f, h);
    Architecture wide = f.arch();
    for (std::size_t i = 1; i <= f.depth(); ++i) wide.widths[i] += 1 + t % 4;
    const Network e = embed(f, wide);
    const Network cw = canonical_width(f, nz(f));

    const std::string id = "pair " + std::to_string(t);
    std::vector<std::size_t> cwidths = f.arch().widths;
    cwidths.insert(cwidths.end(), g.arch().widths.begin() + 1, g.arch().widths.end());
    o.check(c.depth() == f.depth() + g.depth() + 1 && c.arch().widths == cwidths, id + ": compose shape");
    o.check(nz(c) == nz(f) + nz(g) + nnz(v), id + ": compose sparsity");
    std::vector<std::size_t> pwidths(f.depth() + 2);
    pwidths[0] = din;
    for (std::size_t i = 1; i < pwidths.size(); ++i) pwidths[i] = f.arch().widths[i] + h.arch().widths[i];
    o.check(p.depth() == f.depth() && p.arch().widths == pwidths, id + ": parallelize shape");
    o.check(nz(p) == nz(f) + nz(h), id + ": parallelize sparsity");
    o.check(e.arch() == wide && nz(e) == nz(f), id + ": embed shape/sparsity");
    o.check(cw.depth() == f.depth() && cw.input_dim() == din && cw.output_dim() == dmid, id + ": canonical shape");
    std::size_t hidden = 0;
    for (std::size_t i = 1; i <= cw.depth(); ++i) hidden = std::max(hidden, cw.arch().widths[i]);
    o.check(hidden <= std::max<std::size_t>(1, nz(f)) && nz(cw) <= nz(f), id + ": canonical width/sparsity");

    for (int k = 0; k < 1000; ++k) {
      const auto x = testutil::random_point(rng, din);
      const auto fx = testutil::reference_eval(f, x);
      auto mid = fx;
      for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = std::max(0.0, mid[i] - v[i]);
      auto ph = fx;
      const auto hx = testutil::reference_eval(h, x);
      ph.insert(ph.end(), hx.begin(), hx.end());
      const double err = std::max({max_diff(c.eval(x), testutil::reference_eval(g, mid)), max_diff(p.eval(x), ph),
                                   max_diff(e.eval(x), fx), max_diff(cw.eval(x), fx)});
      worst = std::max(worst, err);
    }
  }
  o.check(worst <= 1e-12, "semantic error " + fmt("%.3g", worst));
  o.detail = "200 pairs x 1000 probes, worst |error| " + fmt("%.2g", worst);
  return o;
}

// 2. Mult contracts on the 101 x 101 grid.
Outcome criterion2() {
  Outcome o;
  std::string det;
  for (unsigned m : {4u, 8u, 12u}) {
    const Network mult = build_mult(m);
    double worst = 0.0;
    for (int i = 0; i <= 100; ++i)
      for (int j = 0; j <= 100; ++j) {
        const double x = i / 100.0, y = j / 100.0;
        const double z = mult.eval1(std::vector<double>{x, y});
        worst = std::max(worst, std::abs(z - x * y));
        o.check(z >= 0.0 && z <= 1.0, "Mult range at m=" + std::to_string(m));
        if (i == 0 || j == 0) o.check(z == 0.0, "Mult zero annihilation at m=" + std::to_string(m));
      }
    o.check(worst <= std::ldexp(1.0, -static_cast<int>(m)), "Mult error at m=" + std::to_string(m));
    o.check(validate(mult).ok(), "Mult strict validity");
    const Network star = build_mult_star(m);
    for (int i = 0; i <= 100; ++i)
      for (int j = 0; j <= 100; ++j) {
        const auto r = star.eval(std::vector<double>{i / 100.0, j / 100.0, 0.0});
        o.check(r[0] == 0.0 && r[1] == 0.0, "Mult* zero at m=" + std::to_string(m));
      }
    det += "m=" + std::to_string(m) + " err " + fmt("%.3g", worst) + " (bound " +
           fmt("%.3g", std::ldexp(1.0, -static_cast<int>(m))) + ") ";
  }
  o.detail = det;
  return o;
}

// 3. Hat weights, polynomial reproduction and the x^2 bound.
Outcome criterion3() {
  Outcome o;
  std::mt19937_64 rng(1003);
  double hat_err = 0.0;
  for (std::size_t d : {1u, 2u})
    for (std::size_t M : {4u, 8u, 16u}) {
      const Grid grid(M, d);
      for (int k = 0; k < 2000; ++k) {
        auto x = testutil::random_point(rng, d, 0.0, 1.0);
        if (k < 200)
          for (double& t : x) t = std::round(t * M) / M;
        double s = 0.0;
        for (const HatWeight& h : hat_weights(grid, x)) s += h.weight;
        hat_err = std::max(hat_err, std::abs(s - 1.0));
      }
    }
  o.check(hat_err <= 1e-12, "hat weights sum " + fmt("%.3g", hat_err));

  // Polynomials of degree floor(beta) on the unit cube are reproduced.
  double rep_err = 0.0;
  const Box unit1 = Box::cube(1, 0.0, 1.0), unit2 = Box::cube(2, 0.0, 1.0);
  std::vector<HolderFunction> polys = {
      make_holder("c1", 1, 1.0, 1.0, unit1, [](const auto& x) { return x[0] * 0.0 + 0.3; }),
      make_holder("l1", 1, 2.0, 1.0, unit1, [](const auto& x) { return x[0] * 0.5 - 0.2; }),
      make_holder("q1", 1, 3.0, 1.0, unit1, [](const auto& x) { return x[0] * x[0] * 0.7 - x[0] * 0.4 + 0.1; }),
      make_holder("c2", 2, 1.0, 1.0, unit2, [](const auto& x) { return x[0] * 0.0 - 0.6; }),
      make_holder("l2", 2, 2.0, 1.0, unit2, [](const auto& x) { return x[0] * 0.5 - x[1] * 0.3 + 0.1; }),
      make_holder("q2", 2, 3.0, 1.0, unit2,
                  [](const auto& x) { return x[0] * x[1] * 0.6 + x[1] * x[1] * 0.2 - x[0] * 0.3 + 0.05; })};
  for (const HolderFunction& p : polys)
    for (std::size_t M : {4u, 8u, 16u}) {
      LocalScheme s(p, Grid(M, p.dim));
      for (int k = 0; k < 500; ++k) {
        const auto x = testutil::random_point(rng, p.dim, 0.0, 1.0);
        rep_err = std::max(rep_err, std::abs(s(x) - p.eval1(x)));
      }
    }
  o.check(rep_err <= 1e-10, "polynomial reproduction " + fmt("%.3g", rep_err));

  const HolderFunction sq =
      make_holder("x^2", 1, 2.0, 2.0, Box::cube(1, 0.25, 0.75), [](const auto& x) { return x[0] * x[0]; });
  const auto xs = dense_points(sq.domain, 4001, 0, 1);
  std::string det;
  for (std::size_t M : {4u, 8u, 16u, 32u, 64u}) {
    LocalScheme s(sq, Grid(M, 1));
    double e = 0.0;
    for (const auto& x : xs) e = std::max(e, std::abs(s(x) - sq.eval1(x)));
    const double bound = sq.K * std::pow(3.0, sq.beta) * std::pow(static_cast<double>(M), -sq.beta);
    o.check(e <= bound, "x^2 bound at M=" + std::to_string(M));
    det += " M=" + std::to_string(M) + ":" + fmt("%.2g", e) + "/" + fmt("%.2g", bound);
  }
  o.detail = "hat sum err " + fmt("%.2g", hat_err) + ", reproduction err " + fmt("%.2g", rep_err) +
             ", x^2 err/bound" + det;
  return o;
}

// 4. Hölder-net rate sweep over the corpus.
Outcome criterion4() {
  Outcome o;
  std::string det;
  for (std::size_t d : {1u, 2u})
    for (double beta : {1.0, 2.0}) {
      std::vector<std::size_t> grid = rate_grid_sizes();
      if (d == 1) grid.push_back(192);
      const auto Ns = sweep_sizes(grid, d);
      o.check(std::log2(static_cast<double>(Ns.back()) / static_cast<double>(Ns.front())) >= 3.0,
              "N sweep spans fewer than 3 octaves");
      for (const std::string& name : rate_corpus_names(beta)) {
        const HolderFunction f = make_rate_function(name, d, beta);
        const ErrorReport r = run_rate(f, Ns);
        const ReportRow& slope = r.rows.back();
        for (const ReportRow& w : r.rows) o.check(w.status == "ok", w.config_id + " " + w.kind + " status " + w.status);
        det += " " + name + "/d" + std::to_string(d) + "/b" + fmt("%g", beta) + ":" + fmt("%.3f", slope.error) +
               "(" + fmt("%.2f", -beta / static_cast<double>(d)) + ")";
      }
    }
  o.detail = "slopes" + det;
  return o;
}

// 5. Partition of unity on the circle and the torus.
Outcome criterion5() {
  Outcome o;
  std::string det;
  for (const std::string name : {"circle", "torus"}) {
    const Atlas a = make_atlas(name, 2, 7, 8);
    const PartitionOfUnity& pu = *a.partition;
    const Manifold& m = *a.manifold;
    const ComplementSampler cs(m, 10000);
    o.check(pu.delta() > 0.0, name + ": margin not positive");
    double sum_err = 0.0, min_tau = 0.0;
    std::size_t outside = 0;
    for (const auto& x : m.sample(10000, 1005)) {
      double s = 0.0;
      for (std::size_t j = 0; j < pu.size(); ++j) {
        const double t = pu(j, x);
        min_tau = std::min(min_tau, t);
        if (t > 0.0 && !in_margin(m, cs, x, j, pu.delta())) ++outside;
        s += t;
      }
      sum_err = std::max(sum_err, std::abs(s - 1.0));
    }
    o.check(sum_err <= 1e-9, name + ": sum error " + fmt("%.3g", sum_err));
    o.check(min_tau >= 0.0, name + ": negative tau");
    o.check(outside == 0, name + ": " + std::to_string(outside) + " support points outside the margin set");
    det += " " + name + ": " + std::to_string(pu.size()) + " charts, delta " + fmt("%.3g", pu.delta()) +
           ", sum err " + fmt("%.2g", sum_err) + ";";
  }
  o.detail = det;
  return o;
}

// 6. End-to-end assembly on S^1 in R^2 and R^10.
Outcome criterion6() {
  Outcome o;
  const std::vector<double> etas = {0.4, 0.2, 0.1};
  const Atlas plane = make_atlas("circle", 2, 7, 8), wide = make_atlas("circle_embedded", 10, 7, 8);
  AssemblyCache cache_plane, cache_wide;
  std::string det;
  for (const std::string fname : {"x", "xy", "sin(2x+y)"}) {
    std::vector<std::size_t> sp[2];
    int k = 0;
    for (const Atlas* a : {&plane, &wide}) {
      const HolderFunction f = make_manifold_target(fname, *a->manifold);
      std::vector<Network> nets;
      const ErrorReport r =
          assemble_sweep(f, *a, etas, 0.35, {}, k == 0 ? &cache_plane : &cache_wide, &nets, nullptr);
      const std::string id = a->manifold->name() + "/" + fname;
      for (const ReportRow& w : r.rows) o.check(w.status == "ok", id + " " + w.kind + " status " + w.status);
      if (nets.size() != etas.size()) continue;
      const auto xs = a->manifold->sample(10000, 1006);
      for (std::size_t i = 0; i < etas.size(); ++i) {
        const double e = sup_error(nets[i], f, xs);
        o.check(e <= etas[i], id + " error " + fmt("%.3g", e) + " > eta " + fmt("%g", etas[i]));
        sp[k].push_back(nz(nets[i]));
      }
      det += " " + id + ": slope " + fmt("%.3f", r.rows.back().error) + ", s =";
      for (std::size_t s : sp[k]) det += " " + std::to_string(s);
      det += ";";
      ++k;
    }
    if (sp[0].size() == etas.size() && sp[1].size() == etas.size())
      for (std::size_t i = 0; i < etas.size(); ++i) {
        const double ratio = static_cast<double>(sp[1][i]) / static_cast<double>(sp[0][i]);
        o.check(ratio <= 4.0 && ratio >= 0.25, fname + ": R^10 / R^2 sparsity ratio " + fmt("%.3g", ratio));
      }
  }
  o.detail = det;
  return o;
}

// 7. ERM sanity checks.
Outcome criterion7() {
  Outcome o;
  const auto m = std::make_shared<const Manifold>(make_manifold("circle"));
  const HolderFunction f0 = make_manifold_target("sin(2x+y)", *m);
  ErmOptions opt;
  const ErrorReport r = run_erm(*m, f0, opt);
  std::vector<double> medians;
  for (const ReportRow& w : r.rows) {
    if (w.kind == "erm") {
      o.check(w.status == "ok", w.config_id + " diverged");
      o.check(w.sparsity <= opt.sparsity, w.config_id + " sparsity " + std::to_string(w.sparsity));
    }
    if (w.kind == "erm_median") medians.push_back(w.error);
  }
  o.check(medians.size() == opt.n.size(), "missing median rows");
  for (std::size_t i = 1; i < medians.size(); ++i)
    o.check(medians[i] <= 1.1 * medians[i - 1], "median risk increases from n=" + std::to_string(opt.n[i - 1]) +
                                                    " to n=" + std::to_string(opt.n[i]));

  // Per-epoch constraint check on a direct run, then the strict class.
  const auto xs = m->sample(256, 1007);
  std::vector<double> ys;
  std::mt19937_64 rng(1007);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const auto& x : xs) ys.push_back(f0.eval1(x) + noise(rng));
  const TrainResult tr = train_erm(xs, ys, opt, 1008);
  o.check(!tr.diverged && tr.epochs_checked == opt.epochs, "constraints not checked every epoch");
  o.check(validate(tr.net).ok() && nz(tr.net) <= opt.sparsity, "trained network outside the class");

  const HolderFunction zero = make_manifold_target("zero", *m);
  ErmOptions zopt = opt;
  zopt.noise = false;
  zopt.n = {256};
  const ErrorReport z = run_erm(*m, zero, zopt);
  double zero_risk = 0.0;
  for (const ReportRow& w : z.rows)
    if (w.kind == "erm_median") zero_risk = w.error;
  o.check(zero_risk <= 1e-3, "zero target risk " + fmt("%.3g", zero_risk));

  std::string det = "median risk";
  for (std::size_t i = 0; i < medians.size(); ++i)
    det += " n=" + std::to_string(opt.n[i]) + ":" + fmt("%.4f", medians[i]);
  o.detail = det + ", zero target risk " + fmt("%.2g", zero_risk) + ", epochs checked " +
             std::to_string(tr.epochs_checked);
  return o;
}

// 8. Reproducibility and serialization round trips.
Outcome criterion8() {
  Outcome o;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mrelu_acceptance";
  fs::create_directories(dir);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  const std::vector<std::function<ErrorReport()>> runs = {
      [] { return run_rate(make_rate_function("sine", 2, 2.0), sweep_sizes({12, 24, 48}, 2)); },
      [] {
        const Atlas a = make_atlas("circle", 2, 7, 8);
        return assemble_sweep(make_manifold_target("xy", *a.manifold), a, {0.4}, 0.35);
      },
      [] {
        ErmOptions e;
        e.n = {64, 128};
        e.seeds = 2;
        e.epochs = 20;
        const Manifold m = make_manifold("circle");
        return run_erm(m, make_manifold_target("x", m), e);
      }};
  std::size_t identical = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path a = dir / ("a" + std::to_string(i) + ".csv"), b = dir / ("b" + std::to_string(i) + ".csv");
    emit_report(runs[i](), a.string());
    emit_report(runs[i](), b.string());
    const bool same = slurp(a) == slurp(b) && !slurp(a).empty();
    identical += same;
    o.check(same, "report " + std::to_string(i) + " differs between identical runs");
  }

  std::mt19937_64 rng(1008);
  std::vector<Network> nets;
  for (int t = 0; t < 100; ++t)
    nets.push_back(testutil::random_network(rng, testutil::random_arch(rng, 1 + t % 4, 1 + t % 3, 4, 8)));
  nets.push_back(build_mult(12));
  nets.push_back(build_holder_net(make_rate_function("gauss", 2, 2.0), 625, 16));
  nets.push_back(scale_output(build_mult(6), 3.5).with_mode(WeightMode::relaxed));
  std::size_t exact = 0;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    const Network& n = nets[i];
    const Network bin = deserialize(serialize(n));
    const Network js = from_json(nlohmann::json::parse(to_json(n).dump()));
    save_network(n, (dir / "n.json").string());
    save_network(n, (dir / "n.bin").string());
    const bool ok = bin == n && js == n && load_network((dir / "n.json").string()) == n &&
                    load_network((dir / "n.bin").string()) == n;
    exact += ok;
    o.check(ok, "network " + std::to_string(i) + " does not round-trip exactly");
  }
  fs::remove_all(dir);
  o.detail = std::to_string(identical) + "/" + std::to_string(runs.size()) + " reports byte-identical, " +
             std::to_string(exact) + "/" + std::to_string(nets.size()) + " networks round-trip exactly";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
      return 2;
    }
  }
  if (only < 0 || only > 8) {
    std::fprintf(stderr, "criterion must be 1..8\n");
    return 2;
  }
  const std::vector<std::pair<const char*, Outcome (*)()>> all = {
      {"calculus semantics", criterion1},  {"Mult contracts", criterion2},
      {"interpolation scheme", criterion3}, {"Hölder-net rate", criterion4},
      {"partition of unity", criterion5},   {"manifold assembly", criterion6},
      {"ERM sanity", criterion7},           {"reproducibility", criterion8}};
  bool ok = true;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = all[i].second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %zu %s: %s (%.1f s) %s\n", i + 1, all[i].first, r.pass ? "PASS" : "FAIL", secs,
                r.detail.c_str());
    for (const std::string& f : r.failures) std::printf("  %s\n", f.c_str());
    std::fflush(stdout);
    ok = ok && r.pass;
  }
  return ok ? 0 : 1;
}
