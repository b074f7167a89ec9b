#pragma once

// Network realization of the local Taylor scheme for a Hölder target:
//   u = T p = s(P p / R + 1/2)                       input rescaling
//   H_l(u) = prod_j hat_{l_j}(u_j)                    exact hats, Mult tree
//   q_l(u) = s(P_l(u) / B + 1/2)                      Taylor value in [0, 1]
//   out = B sum_l Mult(H_l, q_l) - (B/2) sum_l H_l
// Only anchors whose hat meets T(U) are built; the others vanish on U.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrelu/calculus.hpp"
#include "mrelu/error.hpp"
#include "mrelu/holder.hpp"
#include "mrelu/network.hpp"
#include "mrelu/primitives.hpp"

namespace mrelu {

struct HolderNetOptions {
  // Optional k x D matrix with rows of Euclidean norm <= 1: the network reads
  // p in R^D and the target is evaluated at z = P p in R^k (k = f.dim).
  std::vector<std::vector<double>> projection;
  // Check the N lower bound of the construction.
  bool enforce_threshold = true;
};

struct HolderNetReport {
  std::string name;
  std::size_t dim = 0;      // grid dimension d
  std::size_t out_dim = 1;  // d'
  double beta = 0.0;
  double K = 0.0;
  std::size_t N = 0;
  std::size_t M = 0;
  unsigned m = 0;
  double R = 1.0;
  double B = 1.0;
  std::size_t anchors = 0;
  std::size_t depth = 0;
  std::size_t width = 0;
  std::size_t sparsity = 0;
  // Figures of the construction's statement, for comparison.
  std::size_t envelope_depth = 0;
  double envelope_sparsity = 0.0;
  double envelope_error_bound = 0.0;
  // |network - scheme| <= c_gadget 2^{-m} on U.
  double c_gadget = 0.0;
  double gadget_bound = 0.0;
};

inline std::size_t holder_threshold(std::size_t d, double beta, double K) {
  const double a = std::pow(5.0, static_cast<double>(d));
  const double b = std::pow(beta + 1.0, static_cast<double>(d));
  const double c = (K + 1.0) * std::exp(static_cast<double>(d));
  return static_cast<std::size_t>(std::ceil(std::max({a, b, c})));
}

inline std::size_t envelope_depth(std::size_t d, double beta, unsigned m) {
  const double db = std::max(static_cast<double>(d), beta);
  return 9 + (m + 5) * (1 + static_cast<std::size_t>(std::ceil(std::log2(db))));
}

inline double envelope_sparsity(std::size_t d, std::size_t d_out, double beta, std::size_t N, unsigned m) {
  return 142.0 * static_cast<double>(d_out) * std::pow(d + beta + 1.0, 3.0 + static_cast<double>(d)) *
         static_cast<double>(N) * (m + 6.0);
}

inline double envelope_error_bound(std::size_t d, double beta, double K, double R, std::size_t N, unsigned m) {
  const double dd = static_cast<double>(d);
  const double Nd = static_cast<double>(N);
  return (2 * K * std::pow(R, beta) + 1) * (1 + dd * dd + beta * beta) * std::pow(6.0, dd) * Nd *
             std::ldexp(1.0, -static_cast<int>(m)) +
         K * std::pow(9 * R, beta) * std::pow(Nd, -beta / dd);
}

namespace detail {

// Sum of n nonnegative inputs carried through `depth` hidden layers.
inline Network sum_net(std::size_t n, std::size_t depth) {
  Builder b(n);
  std::size_t layer = b.hidden(1);
  for (std::size_t i = 0; i < n; ++i) b.link(layer, 0, i, 1.0);
  for (std::size_t t = 1; t < depth; ++t) {
    const std::size_t next = b.hidden(1);
    b.link(next, 0, 0, 1.0);
  }
  const std::size_t out = b.output(1);
  b.link(out, 0, 0, 1.0);
  return b.finish();
}

// Inputs (a, b) >= 0 -> w_a a + w_b b with |w| possibly > 1, via copies.
inline Network weighted_pair(double wa, double wb) {
  const auto ka = static_cast<std::size_t>(std::max(1.0, std::ceil(std::abs(wa))));
  const auto kb = static_cast<std::size_t>(std::max(1.0, std::ceil(std::abs(wb))));
  Builder b(2);
  const std::size_t layer = b.hidden(ka + kb);
  for (std::size_t u = 0; u < ka; ++u) b.link(layer, u, 0, 1.0);
  for (std::size_t u = 0; u < kb; ++u) b.link(layer, ka + u, 1, 1.0);
  const std::size_t out = b.output(1);
  for (std::size_t u = 0; u < ka; ++u) b.link(out, 0, u, wa / static_cast<double>(ka));
  for (std::size_t u = 0; u < kb; ++u) b.link(out, 0, ka + u, wb / static_cast<double>(kb));
  return b.finish();
}

// One output component of the realization, on the rescaled input u in [0,1]^k.
inline Network holder_core(const HolderFunction& g, const Grid& grid, unsigned m, std::size_t comp,
                           HolderNetReport& rep) {
  const std::size_t k = g.dim;
  const std::size_t M = grid.M();
  const double Md = static_cast<double>(M);
  // Anchors whose hat support meets the box of T(U).
  std::vector<std::vector<std::size_t>> axis(k);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i <= M; ++i) {
      const double x = static_cast<double>(i) / Md;
      if (x > g.domain.lo[j] - 1.0 / Md && x < g.domain.hi[j] + 1.0 / Md) axis[j].push_back(i);
    }
  }
  std::vector<std::vector<std::size_t>> anchors;
  {
    std::vector<std::size_t> pick(k, 0);
    while (true) {
      std::vector<std::size_t> l(k);
      for (std::size_t j = 0; j < k; ++j) l[j] = axis[j][pick[j]];
      anchors.push_back(l);
      std::size_t j = k;
      while (j-- > 0) {
        if (++pick[j] < axis[j].size()) break;
        pick[j] = 0;
      }
      if (j == static_cast<std::size_t>(-1)) break;
    }
  }
  const std::size_t A = anchors.size();
  rep.anchors += A;

  // Taylor polynomials in monomial form.
  std::vector<std::vector<double>> C(A);
  std::vector<MultiIndex> index;
  double sum_abs = 0.0;
  for (std::size_t a = 0; a < A; ++a) {
    const auto z = nearest_indomain(anchors[a], g, grid);
    const TaylorPolynomial p = taylor_poly(g, grid.point(z), comp);
    index = p.index;
    C[a] = p.monomial_coefficients();
    double s = 0.0;
    for (double c : C[a]) s += std::abs(c);
    sum_abs = std::max(sum_abs, s);
  }
  const double B = std::max(1.0, 2.0 * sum_abs);
  rep.B = std::max(rep.B, B);
  const unsigned deg = taylor_degree(g.beta);

  // Hat branch: shared unary hats, then products over axes.
  std::vector<HatSpec> specs;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> hat_pos;
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i : axis[j]) {
      hat_pos[{j, i}] = specs.size();
      specs.push_back({j, i});
    }
  Network hats = build_unary_hats(k, M, specs);
  if (k > 1) {
    std::vector<std::vector<std::size_t>> factors;
    for (const auto& l : anchors) {
      std::vector<std::size_t> f;
      for (std::size_t j = 0; j < k; ++j) f.push_back(hat_pos.at({j, l[j]}));
      factors.push_back(std::move(f));
    }
    hats = compose(build_product_tree(specs.size(), factors, m), hats);
  }

  // Monomials u^a for |a| >= 1, in `index` order (index[0] is the constant).
  std::vector<std::vector<std::size_t>> mono_factors;
  for (std::size_t i = 1; i < index.size(); ++i) {
    std::vector<std::size_t> f;
    for (std::size_t j = 0; j < k; ++j)
      for (unsigned p = 0; p < index[i][j]; ++p) f.push_back(j);
    mono_factors.push_back(std::move(f));
  }
  // Taylor-value layer on top of the monomials.
  const std::size_t n_mono = mono_factors.size();
  std::vector<std::vector<double>> Wq(A, std::vector<double>(std::max<std::size_t>(n_mono, 1), 0.0));
  std::vector<double> bq(A);
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t i = 0; i < n_mono; ++i) Wq[a][i] = C[a][i + 1] / B;
    bq[a] = C[a][0] / B + 0.5;
  }
  Network values;
  if (n_mono == 0) {
    // Constant polynomials: q_l = s(0 * u + b_l).
    std::vector<std::vector<double>> W(A, std::vector<double>(k, 0.0));
    values = build_affine(W, bq);
  } else if (deg <= 1) {
    values = build_affine(Wq, bq);
  } else {
    values = compose(build_affine(Wq, bq), build_product_tree(k, mono_factors, m));
  }

  std::vector<std::size_t> all(k);
  std::iota(all.begin(), all.end(), 0);
  const Block feature_blocks[] = {{hats, all, false}, {values, all, false}};
  const Network features = parallel_blocks(feature_blocks, k);

  // Mult(H_l, q_l) for every anchor plus the running sum of hats.
  const Network mult = build_mult(m);
  std::vector<Block> stage;
  for (std::size_t a = 0; a < A; ++a) stage.push_back({mult, {a, A + a}, false});
  std::vector<std::size_t> hat_idx(A);
  std::iota(hat_idx.begin(), hat_idx.end(), 0);
  stage.push_back({sum_net(A, mult.depth()), hat_idx, false});
  const Network products = parallel_blocks(stage, 2 * A);

  // B sum_l Q_l - (B/2) sum_l H_l.
  Builder sb(A + 1);
  const std::size_t s1 = sb.hidden(2);
  for (std::size_t a = 0; a < A; ++a) sb.link(s1, 0, a, 1.0);
  sb.link(s1, 1, A, 1.0);
  const std::size_t so = sb.output(2);
  sb.link(so, 0, 0, 1.0);
  sb.link(so, 1, 1, 1.0);
  const Network sums = sb.finish();
  const bool zero = sum_abs == 0.0;
  Network combine = compose(weighted_pair(zero ? 0.0 : B, zero ? 0.0 : -B / 2), sums);
  if (zero) {
    // Identically zero target: drop every edge into the output.
    std::vector<SparseMatrix> w = combine.weights();
    w.back() = SparseMatrix(w.back().rows(), w.back().cols());
    combine = Network(combine.arch(), std::move(w), combine.shifts(), combine.mode());
  }
  const Network core = compose(combine, compose(products, features));

  const double kd = static_cast<double>(k);
  const double mono_err = deg >= 2 ? 0.5 * (deg - 1.0) : 0.0;
  const double c = B * std::pow(2.0, kd) * (1.0 + 1.5 * (kd - 1.0) + mono_err);
  rep.c_gadget = std::max(rep.c_gadget, c);
  return core;
}

}  // namespace detail

// Strict-mode network approximating f on its domain U with grid size
// M = max{M : (M+1)^d <= N} and gadget accuracy m.
inline Network build_holder_net(const HolderFunction& f, std::size_t N, unsigned m,
                                const HolderNetOptions& opt = {}, HolderNetReport* report = nullptr) {
  const std::size_t d = f.dim;
  if (m == 0) throw PreconditionError("build_holder_net: m must be >= 1");
  const std::size_t threshold = holder_threshold(d, f.beta, f.K);
  if (opt.enforce_threshold && N < threshold) {
    throw PreconditionError("build_holder_net: N = " + std::to_string(N) +
                            " is below the threshold 5^d v (beta+1)^d v (K+1)e^d = " + std::to_string(threshold));
  }
  const std::size_t M = grid_size_for(N, d);
  if (M == 0) throw PreconditionError("build_holder_net: N too small for a grid");
  double maxabs = 0.0;
  for (std::size_t j = 0; j < d; ++j)
    maxabs = std::max({maxabs, std::abs(f.domain.lo[j]), std::abs(f.domain.hi[j])});
  const double R = std::max(1.0, 4.0 * maxabs);
  const HolderFunction g = rescaled(f, R);
  const Grid grid(M, d);

  HolderNetReport rep;
  rep.name = f.name;
  rep.dim = d;
  rep.out_dim = f.out_dim;
  rep.beta = f.beta;
  rep.K = f.K;
  rep.N = N;
  rep.M = M;
  rep.m = m;
  rep.R = R;

  std::vector<Network> comps;
  for (std::size_t c = 0; c < f.out_dim; ++c) comps.push_back(detail::holder_core(g, grid, m, c, rep));
  Network core = comps.front();
  if (comps.size() > 1) {
    std::vector<Block> blocks;
    std::vector<std::size_t> all(d);
    std::iota(all.begin(), all.end(), 0);
    for (const Network& n : comps) blocks.push_back({n, all, true});
    core = parallel_blocks(blocks, d);
  }

  // Input rescaling T.
  std::vector<std::vector<double>> P = opt.projection;
  if (P.empty()) {
    P.assign(d, std::vector<double>(d, 0.0));
    for (std::size_t j = 0; j < d; ++j) P[j][j] = 1.0;
  }
  if (P.size() != d) throw DimensionError("build_holder_net: projection must have f.dim rows");
  for (auto& row : P)
    for (double& v : row) v /= R;
  const Network T = build_affine(P, std::vector<double>(d, 0.5));
  Network net = compose(core, T);

  const SparsityReport sp = sparsity(net);
  rep.depth = net.depth();
  rep.width = max_width(net);
  rep.sparsity = sp.nonzero_count;
  rep.envelope_depth = envelope_depth(d, f.beta, m);
  rep.envelope_sparsity = envelope_sparsity(d, f.out_dim, f.beta, N, m);
  rep.envelope_error_bound = envelope_error_bound(d, f.beta, f.K, R, N, m);
  rep.gadget_bound = rep.c_gadget * std::ldexp(1.0, -static_cast<int>(m));
  if (report) *report = rep;
  return net;
}

}  // namespace mrelu
