#pragma once

// Chart-based assembly of a network approximating f on a manifold:
//   per chart j: psi~_j (chart net), g~_j ~ f o psi_j^{-1} as a clamped
//   signed pair, tau~_j = (tau-bar_j - e_j)_+, three outputs E_j, Mult*;
//   then sum_j (M_j1 - M_j2) on one final layer.
// Stage sizes (N, m) are found by doubling plus bisection on measured errors.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mrelu/calculus.hpp"
#include "mrelu/error.hpp"
#include "mrelu/holder.hpp"
#include "mrelu/holder_net.hpp"
#include "mrelu/manifold.hpp"
#include "mrelu/network.hpp"
#include "mrelu/partition.hpp"
#include "mrelu/primitives.hpp"

namespace mrelu {

struct ErrorBudget {
  double eta = 0.0;
  std::size_t r = 1;
  double delta_prime = 0.0;
  double beta = 1.0;
  double chart = 0.0;
  double pullback = 0.0;
  double tau = 0.0;
  double mult = 0.0;

  // r (chart^{beta ^ 1} + pullback + tau + mult); at most eta by construction.
  double recombined() const {
    const double b1 = std::min(beta, 1.0);
    return static_cast<double>(r) * (std::pow(chart, b1) + pullback + tau + mult);
  }
};

inline ErrorBudget error_budget(double eta, std::size_t r, double delta_prime, double beta) {
  if (!(eta > 0.0 && eta <= 0.5)) throw PreconditionError("error_budget: eta must lie in (0, 1/2]");
  if (r == 0 || !(delta_prime > 0.0) || !(beta > 0.0)) {
    throw PreconditionError("error_budget: need r >= 1, delta' > 0, beta > 0");
  }
  ErrorBudget b;
  b.eta = eta;
  b.r = r;
  b.delta_prime = delta_prime;
  b.beta = beta;
  const double share = eta / (4.0 * static_cast<double>(r));
  b.chart = std::min(std::pow(share, 1.0 / std::min(beta, 1.0)), delta_prime / 4.0);
  b.pullback = share;
  b.tau = share;
  b.mult = share;
  return b;
}

// Sampled geometry of an atlas with its partition of unity.
struct AtlasGeometry {
  double delta = 0.0;        // support margin of the partition
  double delta_prime = 0.0;  // fattening that keeps psi_j(V_j^{-delta}) inside psi_j(V_j)
  std::vector<Box> margin_image;  // bounding box of psi_j(V_j^{-delta})
  std::vector<Box> fattened;      // margin_image grown by delta'
  std::vector<std::vector<double>> gate_threshold;
  std::vector<std::vector<double>> samples;
  std::vector<std::vector<std::size_t>> support;  // per chart: indices into samples with tau_j > 0
};

inline AtlasGeometry audit_geometry(const PartitionOfUnity& pu, std::size_t resolution = 8000,
                                    std::size_t complement_resolution = 10000) {
  const Manifold& m = pu.manifold();
  const ComplementSampler cs(m, complement_resolution);
  AtlasGeometry g;
  g.delta = pu.delta();
  g.samples = m.grid_points(resolution);
  const std::size_t r = m.chart_count();
  g.support.resize(r);
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < r; ++j) {
    const Chart& c = m.chart(j);
    Box box{std::vector<double>(c.dim(), std::numeric_limits<double>::infinity()),
            std::vector<double>(c.dim(), -std::numeric_limits<double>::infinity())};
    std::vector<double> thr(c.gates().size(), std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < g.samples.size(); ++s) {
      const auto& x = g.samples[s];
      if (!c.member(x)) continue;
      if (pu(j, x) > 0.0) {
        if (!in_margin(m, cs, x, j, g.delta)) {
          throw BudgetError("partition", "support of tau_" + std::to_string(j) + " leaves the margin set");
        }
        g.support[j].push_back(s);
      }
      if (cs.distance(x, j) < g.delta) continue;
      const auto u = c.forward(x);
      for (std::size_t k = 0; k < u.size(); ++k) {
        box.lo[k] = std::min(box.lo[k], u[k]);
        box.hi[k] = std::max(box.hi[k], u[k]);
      }
      for (std::size_t q = 0; q < thr.size(); ++q) {
        double y = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) y += c.gates()[q].row[i] * x[i];
        thr[q] = std::min(thr[q], y);
      }
    }
    for (std::size_t k = 0; k < c.dim(); ++k)
      gap = std::min({gap, box.lo[k] - c.image().lo[k], c.image().hi[k] - box.hi[k]});
    for (double& t : thr) {
      if (!(t > 0.0)) throw BudgetError("partition", "gate coordinate not positive on a margin set");
      t = std::min(1.0, 0.95 * t);
    }
    g.margin_image.push_back(box);
    g.gate_threshold.push_back(thr);
  }
  if (!(gap > 0.0)) throw BudgetError("margin", "margin image touches the chart image boundary");
  g.delta_prime = gap / 2.0;
  for (const Box& b : g.margin_image) {
    Box f = b;
    for (std::size_t k = 0; k < f.lo.size(); ++k) {
      f.lo[k] -= g.delta_prime;
      f.hi[k] += g.delta_prime;
    }
    g.fattened.push_back(f);
  }
  return g;
}

struct StageReport {
  std::string stage;
  std::size_t chart = 0;
  std::size_t N = 0;
  unsigned m = 0;
  double budget = 0.0;
  double measured = 0.0;
  std::size_t depth = 0;
  std::size_t width = 0;
  std::size_t sparsity = 0;
  std::size_t trials = 0;
  double lipschitz = 0.0;  // pullback stage: sampled Lipschitz constant of f o psi^{-1}
};

struct SearchOptions {
  std::size_t N_max = std::size_t{1} << 15;
  unsigned m_max = 48;
  int bisection_steps = 4;
  std::size_t oversample = 8;        // audit points per grid cell and axis
  std::size_t max_audit_points = 60000;
  double gadget_share = 0.25;        // part of the budget reserved for gadget error
};

namespace detail {

// Dense audit grid of a box for a scheme with grid size M and rescaling R.
inline std::vector<std::vector<double>> audit_grid(const Box& box, std::size_t M, double R, const SearchOptions& o) {
  const std::size_t d = box.dim();
  std::vector<std::size_t> n(d);
  std::size_t total = 1;
  for (std::size_t k = 0; k < d; ++k) {
    const double cells = (box.hi[k] - box.lo[k]) * static_cast<double>(M) / R;
    n[k] = static_cast<std::size_t>(std::ceil(cells * static_cast<double>(o.oversample))) + 2;
    total *= n[k];
  }
  while (total > o.max_audit_points) {
    total = 1;
    for (auto& v : n) {
      v = std::max<std::size_t>(3, v * 3 / 4);
      total *= v;
    }
  }
  std::vector<std::vector<double>> pts;
  std::vector<std::size_t> pick(d, 0);
  while (true) {
    std::vector<double> x(d);
    for (std::size_t k = 0; k < d; ++k)
      x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * static_cast<double>(pick[k]) / static_cast<double>(n[k] - 1);
    pts.push_back(std::move(x));
    std::size_t k = 0;
    while (k < d && ++pick[k] == n[k]) pick[k++] = 0;
    if (k == d) break;
  }
  return pts;
}

inline double sup_gap(const Network& net, const HolderFunction& f, const std::vector<std::vector<double>>& pts) {
  double e = 0.0;
  const auto ys = net.eval_batch(pts);
  for (std::size_t s = 0; s < pts.size(); ++s) {
    const auto& y = ys[s];
    const auto t = f.eval(pts[s]);
    for (std::size_t i = 0; i < y.size(); ++i) e = std::max(e, std::abs(y[i] - t[i]));
  }
  return e;
}

inline unsigned m_for(double c_gadget, double allowance, unsigned m_max) {
  const double need = std::ceil(std::log2(std::max(c_gadget, 1e-300) / allowance));
  return static_cast<unsigned>(std::clamp(need, 1.0, static_cast<double>(m_max)));
}

}  // namespace detail

// Smallest (N, m) found for which the Hölder net of f (read directly on its
// domain, no projection) meets the budget on a dense audit grid.
struct SearchResult {
  std::size_t N = 0;
  unsigned m = 0;
  double measured = 0.0;
  std::size_t trials = 0;
};

inline SearchResult search_holder(const HolderFunction& f, double budget, const std::string& stage,
                                  const SearchOptions& o = {}) {
  HolderNetOptions hopt;
  hopt.enforce_threshold = false;
  SearchResult res;
  unsigned m = 1;
  auto attempt = [&](std::size_t N, double& err) {
    HolderNetReport rep;
    Network net = build_holder_net(f, N, m, hopt, &rep);
    const unsigned need = detail::m_for(rep.c_gadget, o.gadget_share * budget, o.m_max);
    if (need != m) {
      m = need;
      net = build_holder_net(f, N, m, hopt, &rep);
    }
    ++res.trials;
    err = detail::sup_gap(net, f, detail::audit_grid(f.domain, rep.M, rep.R, o));
    return err <= budget;
  };
  const auto N0 = static_cast<std::size_t>(std::pow(5.0, static_cast<double>(f.dim)));
  std::size_t lo = 0, hi = N0;
  double err = 0.0;
  while (!attempt(hi, err)) {
    lo = hi;
    hi *= 2;
    if (hi > o.N_max) {
      throw BudgetError(stage, "measured error " + std::to_string(err) + " exceeds budget " + std::to_string(budget) +
                                   " at N = " + std::to_string(lo) + "; increase N/m");
    }
  }
  double best_err = err;
  unsigned best_m = m;
  for (int s = 0; s < o.bisection_steps && lo > 0 && hi - lo > 1; ++s) {
    const std::size_t mid = (lo + hi) / 2;
    if (grid_size_for(mid, f.dim) == grid_size_for(hi, f.dim)) {
      hi = mid;
      continue;
    }
    if (attempt(mid, err)) {
      hi = mid;
      best_err = err;
      best_m = m;
    } else {
      lo = mid;
    }
  }
  // The last attempt may have changed m; settle on the accepted pair.
  res.N = hi;
  res.m = best_m;
  res.measured = best_err;
  return res;
}

struct AssemblyOptions {
  double chart_beta = 2.0;
  double tau_beta = 2.0;
  SearchOptions search;
  std::size_t final_samples = 10000;
  std::uint64_t seed = 2024;
  bool verbose = false;
};

struct AssemblyReport {
  ErrorBudget budget;
  unsigned m_star = 0;
  double delta = 0.0;
  double delta_prime = 0.0;
  std::vector<StageReport> stages;
  std::vector<double> composed_error;  // per chart, on the support of tau_j
  std::vector<double> composed_bound;  // Lipschitz * chart error + pullback error
  std::vector<double> tau_shift;
  std::size_t off_support_violations = 0;
  double measured_error = 0.0;
  std::size_t depth = 0;
  std::size_t width = 0;
  std::size_t sparsity = 0;
  bool strict_ok = false;
  // s / (L eta^{-d*/beta}): empirical constant of the sparsity shape.
  double sparsity_constant = 0.0;
  double seconds = 0.0;
};

// Memo of searched (N, m) pairs keyed by a description of the target.
struct AssemblyCache {
  std::map<std::string, SearchResult> found;
};

namespace detail {

inline std::string key_of(const std::string& kind, std::size_t j, double budget, const Box& dom,
                          const std::string& extra) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s|%zu|%.17g|", kind.c_str(), j, budget);
  std::string k = buf + extra;
  for (std::size_t i = 0; i < dom.lo.size(); ++i) {
    std::snprintf(buf, sizeof buf, "|%.17g,%.17g", dom.lo[i], dom.hi[i]);
    k += buf;
  }
  return k;
}

inline SearchResult cached_search(AssemblyCache* cache, const std::string& key, const HolderFunction& f, double budget,
                                  const std::string& stage, const SearchOptions& o) {
  if (cache) {
    auto it = cache->found.find(key);
    if (it != cache->found.end()) return it->second;
  }
  SearchResult r = search_holder(f, budget, stage, o);
  if (cache) cache->found[key] = r;
  return r;
}

inline StageReport stage_of(const std::string& name, std::size_t j, const SearchResult& s, double budget,
                            const Network& net) {
  StageReport r;
  r.stage = name;
  r.chart = j;
  r.N = s.N;
  r.m = s.m;
  r.budget = budget;
  r.measured = s.measured;
  r.depth = net.depth();
  r.width = max_width(net);
  r.sparsity = sparsity(net).nonzero_count;
  r.trials = s.trials;
  return r;
}

// Linear net x -> sum of +-1 weighted inputs.
inline Network signed_sum(std::size_t pairs) {
  SparseMatrix w(1, 2 * pairs);
  for (std::size_t j = 0; j < pairs; ++j) {
    w.add(0, 2 * j, 1.0);
    w.add(0, 2 * j + 1, -1.0);
  }
  return Network(Architecture{0, {2 * pairs, 1}}, {w}, {});
}

// Gate x -> min(1, (row . x)_+ / t).
inline Network build_gate(std::span<const double> row, double t) {
  if (!(t > 0.0 && t <= 1.0)) throw PreconditionError("build_gate: threshold must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(std::ceil(1.0 / t));
  Builder b(row.size());
  const std::size_t layer = b.hidden(2 * k);
  for (std::size_t u = 0; u < k; ++u)
    for (std::size_t i = 0; i < row.size(); ++i) {
      b.link(layer, u, i, row[i]);
      b.link(layer, k + u, i, row[i]);
    }
  for (std::size_t u = 0; u < k; ++u) b.shift(layer, k + u, t);
  const std::size_t out = b.output(1);
  const double edge = std::min(1.0, 1.0 / (static_cast<double>(k) * t));
  for (std::size_t u = 0; u < k; ++u) {
    b.link(out, 0, u, edge);
    b.link(out, 0, k + u, -edge);
  }
  return b.finish();
}

// Values of f on a small grid of its domain; equal targets share searches.
inline std::string fingerprint(const HolderFunction& f) {
  SearchOptions o;
  o.oversample = 1;
  std::string k = std::to_string(f.beta) + "|" + std::to_string(f.K);
  char buf[32];
  for (const auto& x : audit_grid(f.domain, 15, f.domain.hi[0] - f.domain.lo[0], o))
    for (double y : f.eval(x)) {
      std::snprintf(buf, sizeof buf, "|%.10g", y);
      k += buf;
    }
  return std::to_string(std::hash<std::string>{}(k));
}

}  // namespace detail

// psi~_j: d* outputs, reads the ambient point. Each coordinate is a
// one-dimensional Hölder net in its reduced coordinate.
inline Network build_chart_net(const Manifold& m, std::size_t j, double budget, const AssemblyOptions& opt = {},
                               StageReport* report = nullptr, AssemblyCache* cache = nullptr) {
  const Chart& c = m.chart(j);
  const std::size_t ds = c.dim();
  std::vector<Block> blocks;
  std::vector<std::size_t> all(m.ambient_dim());
  std::iota(all.begin(), all.end(), 0);
  StageReport agg;
  agg.stage = "chart";
  agg.chart = j;
  agg.budget = budget;
  for (std::size_t k = 0; k < ds; ++k) {
    const Chart* cp = &c;
    HolderFunction h = make_holder("psi" + std::to_string(j) + "_" + std::to_string(k), 1, opt.chart_beta, 1.0,
                                   Box{{c.reduced_box().lo[k]}, {c.reduced_box().hi[k]}},
                                   [cp, k, ds](const auto& z) {
                                     using T = std::decay_t<decltype(z[0])>;
                                     std::vector<T> full(ds, z[0]);
                                     return cp->forward_reduced(full)[k];
                                   });
    h.K = std::max(1.0, estimate_holder_constant(h, detail::audit_grid(h.domain, 64, 1.0, opt.search)));
    const auto key = detail::key_of("chart", 0, budget, h.domain, detail::fingerprint(h));
    const SearchResult s = detail::cached_search(cache, key, h, budget, "chart", opt.search);
    HolderNetOptions hopt;
    hopt.enforce_threshold = false;
    hopt.projection = {c.projection()[k]};
    Network net = build_holder_net(h, s.N, s.m, hopt);
    blocks.push_back({net, all, true});
    agg.N = std::max(agg.N, s.N);
    agg.m = std::max(agg.m, s.m);
    agg.measured = std::max(agg.measured, s.measured);
    agg.trials += s.trials;
  }
  Network out = blocks.size() == 1 ? blocks.front().net : parallel_blocks(blocks, m.ambient_dim());
  if (report) {
    StageReport r = detail::stage_of("chart", j, {agg.N, agg.m, agg.measured, agg.trials}, budget, out);
    *report = r;
  }
  return out;
}

// Signed pullback pair on the fattened image: outputs
// (clamp01(g~), clamp01(-g~)) with g~ ~ (f o psi_j^{-1}) / (1 + e).
inline Network build_pullback_net(const HolderFunction& f, const Manifold& m, const AtlasGeometry& geo, std::size_t j,
                                  double budget, const AssemblyOptions& opt = {}, StageReport* report = nullptr,
                                  AssemblyCache* cache = nullptr) {
  if (!(budget > 0.0)) throw PreconditionError("build_pullback_net: budget must be positive");
  const Chart* c = &m.chart(j);
  HolderFunction g;
  g.name = f.name + "@psi" + std::to_string(j) + "^-1";
  g.dim = c->dim();
  g.out_dim = 1;
  g.beta = f.beta;
  g.domain = geo.fattened[j];
  g.eval = [f, c](std::span<const double> u) { return f.eval(c->inverse_generic<double>(u)); };
  if (f.jet) g.jet = [f, c](std::span<const Jet> u) { return f.jet(c->inverse_generic<Jet>(u)); };
  g.source = f.source;
  g.fd_step = f.fd_step;
  g.K = std::max(1.0, g.jet ? estimate_holder_constant(g, detail::audit_grid(g.domain, 16, 1.0, opt.search)) : f.K);
  const auto key = detail::key_of("pullback", 0, budget, g.domain, detail::fingerprint(g));
  // Half the budget for the fit: the 1/(1+e) normalization can double the error.
  const SearchResult s = detail::cached_search(cache, key, g, budget / 2.0, "pullback", opt.search);
  HolderNetOptions hopt;
  hopt.enforce_threshold = false;
  HolderNetReport hrep;
  Network net = build_holder_net(g, s.N, s.m, hopt, &hrep);
  net = scale_output(net, 1.0 / (1.0 + s.measured));
  SparseMatrix A(4, 1), W(2, 4);
  A.add(0, 0, 1.0);
  A.add(1, 0, 1.0);
  A.add(2, 0, -1.0);
  A.add(3, 0, -1.0);
  W.add(0, 0, 1.0);
  W.add(0, 1, -1.0);
  W.add(1, 2, 1.0);
  W.add(1, 3, -1.0);
  const double v[] = {0.0, 1.0, 0.0, 1.0};
  Network pair = append_layer(net, A, v, W);
  const auto pts = detail::audit_grid(g.domain, hrep.M, hrep.R, opt.search);
  const auto ys = pair.eval_batch(pts);
  double err = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) err = std::max(err, std::abs(ys[i][0] - ys[i][1] - g.eval1(pts[i])));
  if (err > budget) {
    throw BudgetError("pullback", "chart " + std::to_string(j) + ": measured error " + std::to_string(err) +
                                      " exceeds budget " + std::to_string(budget) + "; increase N2/m2");
  }
  if (report) {
    SearchResult s2 = s;
    s2.measured = err;
    *report = detail::stage_of("pullback", j, s2, budget, pair);
    report->lipschitz = g.jet ? estimate_lipschitz(g, detail::audit_grid(g.domain, 16, 1.0, opt.search)) : g.K;
  }
  return pair;
}

// tau~_j = (tau-bar_j - e)_+ with tau-bar_j = prod(clamp01(h~_j(P_j x)), gates),
// e the measured sup error of tau-bar_j on the geometry samples.
inline Network build_tau_net(const PartitionOfUnity& pu, const AtlasGeometry& geo, std::size_t j, double budget,
                             const AssemblyOptions& opt = {}, StageReport* report = nullptr,
                             AssemblyCache* cache = nullptr, double* shift_out = nullptr,
                             std::size_t* violations = nullptr) {
  if (!(budget > 0.0)) throw PreconditionError("build_tau_net: budget must be positive");
  const Manifold& m = pu.manifold();
  const Chart& c = m.chart(j);
  const std::size_t ds = c.dim();
  // The reduced function lives on the whole range of the reduced
  // coordinates on the gated side, where it vanishes off V_j.
  Box dom;
  for (std::size_t f = 0; f < ds; ++f) {
    const Factor& F = m.factors()[f];
    dom.lo.push_back(F.kind == Factor::Kind::circle ? -1.0 : F.a);
    dom.hi.push_back(F.kind == Factor::Kind::circle ? 1.0 : F.b);
  }
  const PartitionOfUnity* pp = &pu;
  HolderFunction h = make_holder("tau" + std::to_string(j), ds, opt.tau_beta, 1.0, dom,
                                 [pp, j](const auto& z) { return pp->tau_reduced(j, z); });
  h.K = std::max(1.0, estimate_holder_constant(h, detail::audit_grid(dom, 256, 1.0, opt.search)));
  const std::size_t n_gates = c.gates().size();
  // Split: holder part 80% of budget/2, product gadgets the rest.
  const double half = budget / 2.0;
  const unsigned m_prod = n_gates == 0 ? 1 : detail::m_for(static_cast<double>(n_gates), 0.2 * half, 60);
  const auto key = detail::key_of("tau", 0, budget, dom, detail::fingerprint(h));
  const SearchResult s = detail::cached_search(cache, key, h, 0.8 * half, "tau", opt.search);
  HolderNetOptions hopt;
  hopt.enforce_threshold = false;
  hopt.projection = c.projection();
  const Network hnet = compose(build_clamp01(1), build_holder_net(h, s.N, s.m, hopt));
  std::vector<std::size_t> all(m.ambient_dim());
  std::iota(all.begin(), all.end(), 0);
  Network bar = hnet;
  if (n_gates > 0) {
    std::vector<Block> blocks{{hnet, all, false}};
    for (std::size_t q = 0; q < n_gates; ++q)
      blocks.push_back({detail::build_gate(c.gates()[q].row, geo.gate_threshold[j][q]), all, false});
    std::vector<std::size_t> f(n_gates + 1);
    std::iota(f.begin(), f.end(), 0);
    bar = compose(build_product_tree(n_gates + 1, {f}, m_prod), parallel_blocks(blocks, m.ambient_dim()));
  }
  // Measured sup error of tau-bar on the geometry samples.
  double e = 0.0;
  std::vector<double> bar_v, tau_v;
  for (const auto& y : bar.eval_batch(geo.samples)) bar_v.push_back(y[0]);
  for (std::size_t i = 0; i < geo.samples.size(); ++i) {
    tau_v.push_back(pu(j, geo.samples[i]));
    e = std::max(e, std::abs(bar_v[i] - tau_v[i]));
  }
  if (2.0 * e > budget) {
    throw BudgetError("tau", "chart " + std::to_string(j) + ": 2 x measured error " + std::to_string(2 * e) +
                                 " exceeds budget " + std::to_string(budget) + "; increase N/m");
  }
  const double v[] = {e};
  Network out = compose(identity_net(1, 0), bar, v);
  if (shift_out) *shift_out = e;
  // tau~ = (bar - e)_+ exactly, so off-support zeros can be read from bar.
  if (violations) {
    *violations = 0;
    for (std::size_t i = 0; i < bar_v.size(); ++i)
      if (tau_v[i] == 0.0 && bar_v[i] - e > 0.0) ++*violations;
  }
  if (report) {
    SearchResult s2 = s;
    s2.measured = 2.0 * e;
    *report = detail::stage_of("tau", j, s2, budget, out);
  }
  return out;
}

inline Network assemble(const HolderFunction& f, const PartitionOfUnity& pu, const AtlasGeometry& geo, double eta,
                        const AssemblyOptions& opt = {}, AssemblyReport* report = nullptr,
                        AssemblyCache* cache = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!(eta > 0.0 && eta <= 0.5)) throw PreconditionError("assemble: eta must lie in (0, 1/2]");
  const Manifold& m = pu.manifold();
  if (f.dim != m.ambient_dim()) throw DimensionError("assemble: f must be defined on the ambient space");
  const std::size_t r = m.chart_count();
  AssemblyReport rep;
  rep.budget = error_budget(eta, r, geo.delta_prime, f.beta);
  if (rep.budget.recombined() > eta * (1 + 1e-12)) throw BudgetError("budget", "recombined budget exceeds eta");
  rep.m_star = mult_star_order(r, eta);
  rep.delta = geo.delta;
  rep.delta_prime = geo.delta_prime;
  const Network mstar = build_mult_star(rep.m_star);
  std::vector<std::size_t> all(m.ambient_dim());
  std::iota(all.begin(), all.end(), 0);
  std::vector<Block> pipes;
  for (std::size_t j = 0; j < r; ++j) {
    StageReport s1, s2, s3;
    const Network chart = build_chart_net(m, j, rep.budget.chart, opt, &s1, cache);
    const Network pull = build_pullback_net(f, m, geo, j, rep.budget.pullback, opt, &s2, cache);
    double shift = 0.0;
    std::size_t viol = 0;
    const Network tau = build_tau_net(pu, geo, j, rep.budget.tau, opt, &s3, cache, &shift, &viol);
    rep.stages.insert(rep.stages.end(), {s1, s2, s3});
    rep.tau_shift.push_back(shift);
    const Network P = compose(pull, chart);
    // Composed error on the support of tau_j, and off-support zeros.
    double ce = 0.0;
    std::vector<double> a, b;
    for (std::size_t idx : geo.support[j]) {
      const auto& x = geo.samples[idx];
      const auto y = P.eval(x, a, b);
      ce = std::max(ce, std::abs(y[0] - y[1] - f.eval1(x)));
    }
    rep.composed_error.push_back(ce);
    rep.composed_bound.push_back(s2.lipschitz * s1.measured + s2.measured);
    rep.off_support_violations += viol;
    const Block e_blocks[] = {{P, all, false}, {tau, all, false}};
    const Network E = parallel_blocks(e_blocks, m.ambient_dim());
    pipes.push_back({compose(mstar, E), all, false});
    if (opt.verbose) {
      std::fprintf(stderr, "chart %zu: chart N=%zu m=%u  pullback N=%zu m=%u  tau N=%zu m=%u  composed %.3g\n", j,
                   s1.N, s1.m, s2.N, s2.m, s3.N, s3.m, ce);
    }
  }
  const Network net = compose(detail::signed_sum(r), parallel_blocks(pipes, m.ambient_dim()));
  // Final audit on fresh manifold samples.
  double err = 0.0;
  const auto xs = m.sample(opt.final_samples, opt.seed);
  const auto ys = net.eval_batch(xs);
  for (std::size_t i = 0; i < xs.size(); ++i) err = std::max(err, std::abs(ys[i][0] - f.eval1(xs[i])));
  rep.measured_error = err;
  const SparsityReport sp = sparsity(net);
  rep.depth = net.depth();
  rep.width = max_width(net);
  rep.sparsity = sp.nonzero_count;
  rep.strict_ok = validate(net).ok();
  rep.sparsity_constant = static_cast<double>(rep.sparsity) /
                          (static_cast<double>(rep.depth) *
                           std::pow(eta, -static_cast<double>(m.intrinsic_dim()) / f.beta));
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (report) *report = rep;
  if (err > eta) {
    throw BudgetError("final", "measured sup error " + std::to_string(err) + " exceeds eta " + std::to_string(eta));
  }
  return net;
}

}  // namespace mrelu
