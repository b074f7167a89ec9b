#pragma once

// Gadget networks with all weights and shifts in [-1, 1]: approximate
// multiplication, piecewise-linear hat functions, affine input maps and
// exact scaling by constants of any magnitude.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrelu/calculus.hpp"
#include "mrelu/error.hpp"
#include "mrelu/network.hpp"

namespace mrelu {

namespace detail {

// Incremental layer-by-layer construction. Layer 0 is the input; each call
// to hidden() opens a new hidden layer fed by the previous one.
class Builder {
 public:
  explicit Builder(std::size_t input_dim) { widths_.push_back(input_dim); }

  std::size_t hidden(std::size_t width) {
    open(width);
    shifts_.emplace_back(width, 0.0);
    return widths_.size() - 1;
  }
  // Weight from unit `from` of the previous layer to unit `to` of `layer`.
  void link(std::size_t layer, std::size_t to, std::size_t from, double value) {
    weights_[layer - 1].add(to, from, value);
  }
  void shift(std::size_t layer, std::size_t unit, double value) { shifts_[layer - 1][unit] = value; }

  std::size_t output(std::size_t width) {
    open(width);
    return widths_.size() - 1;
  }

  Network finish(WeightMode mode = WeightMode::strict) {
    Architecture arch{widths_.size() - 2, widths_};
    return Network(std::move(arch), std::move(weights_), std::move(shifts_), mode);
  }

 private:
  void open(std::size_t width) {
    weights_.emplace_back(width, widths_.back());
    widths_.push_back(width);
  }
  std::vector<std::size_t> widths_;
  std::vector<SparseMatrix> weights_;
  std::vector<std::vector<double>> shifts_;
};

}  // namespace detail

struct MultContract {
  unsigned m = 1;
  double error_bound() const { return std::ldexp(1.0, -static_cast<int>(m)); }
};

// Number of sawtooth stages used by build_mult(m). Truncating x(1-x) after n
// stages errs by at most 4^{-n-1} at each of the two evaluation points.
inline unsigned mult_stages(unsigned m) { return std::max(1u, (m + 1) / 2); }

// Approximate product on [0,1]^2 within 2^{-m}. Uses
//   xy = g((x-y+1)/2) - g((x+y)/2) + (x+y)/2 - 1/4,   g(t) = t(1-t),
// with g replaced by its sawtooth expansion sum_s T^s(t)/4^s (T the tent
// map), then clips the result to min(., x, y). The clipping makes
// out(0,y) = out(x,0) = 0 exact and keeps the output in [0, 1].
// Tent maps have slope 2, realized by duplicated units so every weight stays
// in [-1, 1]: depth n+4, width 17 with n = ceil(m/2).
inline Network build_mult(unsigned m) {
  if (m == 0) throw PreconditionError("build_mult: m must be >= 1");
  const unsigned n = mult_stages(m);
  detail::Builder b(2);
  // First layer: units 0..5 carry the chain for a = (x-y+1)/2, 6..11 the
  // chain for b = (x+y)/2. Inside a chain units 0,1 hold s(t) and units 2..5
  // hold s(t - 1/2), so T(t) = (sum of 0,1) - (sum of 2..5).
  std::size_t layer = b.hidden(15);
  for (std::size_t u = 0; u < 6; ++u) {
    b.link(layer, u, 0, 0.5);
    b.link(layer, u, 1, -0.5);
    b.shift(layer, u, u < 2 ? -0.5 : 0.0);
    b.link(layer, 6 + u, 0, 0.5);
    b.link(layer, 6 + u, 1, 0.5);
    b.shift(layer, 6 + u, u < 2 ? 0.0 : 0.5);
  }
  b.link(layer, 12, 0, 1.0);
  b.link(layer, 13, 1, 1.0);
  b.link(layer, 14, 0, 0.5);
  b.link(layer, 14, 1, 0.5);

  struct Layout {
    std::ptrdiff_t acc_a = -1, acc_b = -1;
    std::size_t x = 0, y = 0, lb = 0;
  };
  Layout prev{-1, -1, 12, 13, 14};
  for (unsigned s = 1; s <= n; ++s) {
    const bool more = s < n;
    const std::size_t off = more ? 12 : 0;
    Layout cur{static_cast<std::ptrdiff_t>(off), static_cast<std::ptrdiff_t>(off + 1), off + 2, off + 3, off + 4};
    layer = b.hidden(off + 5);
    const double scale = std::ldexp(1.0, -2 * static_cast<int>(s));
    for (std::size_t c = 0; c < 2; ++c) {
      const std::size_t base = 6 * c;
      const auto acc = static_cast<std::size_t>(c == 0 ? cur.acc_a : cur.acc_b);
      const std::ptrdiff_t prev_acc = c == 0 ? prev.acc_a : prev.acc_b;
      if (prev_acc >= 0) b.link(layer, acc, static_cast<std::size_t>(prev_acc), 1.0);
      for (std::size_t v = 0; v < 6; ++v) b.link(layer, acc, base + v, v < 2 ? scale : -scale);
      if (!more) continue;
      for (std::size_t u = 0; u < 6; ++u) {
        for (std::size_t v = 0; v < 6; ++v) b.link(layer, base + u, base + v, v < 2 ? 1.0 : -1.0);
        b.shift(layer, base + u, u < 2 ? 0.0 : 0.5);
      }
    }
    b.link(layer, cur.x, prev.x, 1.0);
    b.link(layer, cur.y, prev.y, 1.0);
    b.link(layer, cur.lb, prev.lb, 1.0);
    prev = cur;
  }
  // P = s(acc_a - acc_b + (x+y)/2 - 1/4), carried with x and y.
  layer = b.hidden(3);
  b.link(layer, 0, 0, 1.0);
  b.link(layer, 0, 1, -1.0);
  b.link(layer, 0, 4, 1.0);
  b.shift(layer, 0, 0.25);
  b.link(layer, 1, 2, 1.0);
  b.link(layer, 2, 3, 1.0);
  // (P, s(P - x), y): P - s(P - x) = min(P, x).
  layer = b.hidden(3);
  b.link(layer, 0, 0, 1.0);
  b.link(layer, 1, 0, 1.0);
  b.link(layer, 1, 1, -1.0);
  b.link(layer, 2, 2, 1.0);
  // (min(P,x), s(min(P,x) - y)).
  layer = b.hidden(2);
  b.link(layer, 0, 0, 1.0);
  b.link(layer, 0, 1, -1.0);
  b.link(layer, 1, 0, 1.0);
  b.link(layer, 1, 1, -1.0);
  b.link(layer, 1, 2, -1.0);
  const std::size_t out = b.output(1);
  b.link(out, 0, 0, 1.0);
  b.link(out, 0, 1, -1.0);
  return b.finish();
}

// Accuracy exponent for the signed combination step: ceil(log2(r/eta)) + 2.
inline unsigned mult_star_order(std::size_t r, double eta) {
  return static_cast<unsigned>(std::ceil(std::log2(static_cast<double>(r) / eta))) + 2;
}

// Three inputs (x, y, z) -> (Mult(x, z), Mult(y, z)). With y = (-x)_+ and
// x replaced by (x)_+, out0 - out1 approximates xz for signed x.
inline Network build_mult_star(unsigned m_star) {
  if (m_star == 0) throw PreconditionError("build_mult_star: m_star must be >= 1");
  const Network mult = build_mult(m_star);
  const std::size_t xz[] = {0, 2};
  const std::size_t yz[] = {1, 2};
  return parallelize(select_inputs(mult, 3, xz), select_inputs(mult, 3, yz));
}

// Which unary hat to build: coordinate `coord` of the input, grid index
// `index` on the grid {0, 1/M, ..., 1}.
struct HatSpec {
  std::size_t coord = 0;
  std::size_t index = 0;
};

// Number of doubling layers a unary hat with slope M needs.
inline std::size_t hat_doublings(std::size_t M) {
  std::size_t k = 0;
  while ((std::size_t{2} << k) < M) ++k;
  return k;
}

// Exact unary hats x -> (1 - M|x_j - l/M|)_+ for every HatSpec, all with depth
// hat_doublings(M) + 2. The slope M is reached by repeated doubling of two
// unit-weight copies, then one final weight M / 2^{k+1} <= 1.
inline Network build_unary_hats(std::size_t input_dim, std::size_t M, std::span<const HatSpec> specs) {
  if (M == 0) throw PreconditionError("build_unary_hats: M must be >= 1");
  for (const HatSpec& h : specs) {
    if (h.coord >= input_dim || h.index > M) {
      throw PreconditionError("build_unary_hats: grid index " + std::to_string(h.index) + " out of range {0.." +
                              std::to_string(M) + "}");
    }
  }
  const std::size_t k = hat_doublings(M);
  const std::size_t count = specs.size();
  detail::Builder b(input_dim);
  // Per hat four units: two copies of s(x - c), two copies of s(c - x).
  std::size_t layer = b.hidden(4 * count);
  for (std::size_t h = 0; h < count; ++h) {
    const double c = static_cast<double>(specs[h].index) / static_cast<double>(M);
    for (std::size_t u = 0; u < 2; ++u) {
      b.link(layer, 4 * h + u, specs[h].coord, 1.0);
      b.shift(layer, 4 * h + u, c);
      b.link(layer, 4 * h + 2 + u, specs[h].coord, -1.0);
      b.shift(layer, 4 * h + 2 + u, -c);
    }
  }
  for (std::size_t t = 0; t < k; ++t) {
    layer = b.hidden(4 * count);
    for (std::size_t h = 0; h < count; ++h) {
      for (std::size_t u = 0; u < 4; ++u) {
        const std::size_t pair = 4 * h + (u < 2 ? 0 : 2);
        b.link(layer, 4 * h + u, pair, 1.0);
        b.link(layer, 4 * h + u, pair + 1, 1.0);
      }
    }
  }
  const double slope = static_cast<double>(M) / std::ldexp(1.0, static_cast<int>(k + 1));
  layer = b.hidden(count);
  for (std::size_t h = 0; h < count; ++h) {
    for (std::size_t u = 0; u < 4; ++u) b.link(layer, h, 4 * h + u, -slope);
    b.shift(layer, h, -1.0);
  }
  const std::size_t out = b.output(count);
  for (std::size_t h = 0; h < count; ++h) b.link(out, h, h, 1.0);
  return b.finish();
}

// For each output k, the product of inputs factors[k] computed with a
// balanced tree of Mult_m gadgets. Inputs are expected in [0, 1]; each tree
// level adds at most 2^{-m} error per node, so a product of d factors errs by
// at most (d-1) 2^{-m}. Zero factors propagate exactly.
inline Network build_product_tree(std::size_t input_dim, const std::vector<std::vector<std::size_t>>& factors,
                                  unsigned m) {
  std::vector<std::vector<std::size_t>> current = factors;
  const Network mult = build_mult(m);
  const Network carry = identity_net(1, 1);
  std::optional<Network> net;
  std::size_t dim = input_dim;
  bool done = false;
  while (!done) {
    done = true;
    for (const auto& f : current)
      if (f.size() > 1) done = false;
    if (done && net) break;
    // One level: pair up neighbours, carry leftovers.
    std::vector<Block> blocks;
    std::vector<std::vector<std::size_t>> next;
    std::size_t out = 0;
    for (const auto& f : current) {
      if (f.empty()) throw PreconditionError("build_product_tree: empty factor list");
      std::vector<std::size_t> slots;
      std::size_t i = 0;
      for (; i + 1 < f.size(); i += 2) {
        blocks.push_back({mult, {f[i], f[i + 1]}, false});
        slots.push_back(out++);
      }
      if (i < f.size()) {
        blocks.push_back({carry, {f[i]}, false});
        slots.push_back(out++);
      }
      next.push_back(std::move(slots));
    }
    Network level = parallel_blocks(blocks, dim);
    net = net ? compose(level, *net) : level;
    dim = out;
    current = std::move(next);
  }
  return *net;
}

// Product over j of the unary hats (1 - M|x_j - l_j/M|)_+ on [0,1]^d.
inline Network build_hat_product(std::size_t M, std::span<const std::size_t> grid_index, unsigned m) {
  std::vector<HatSpec> specs;
  for (std::size_t j = 0; j < grid_index.size(); ++j) specs.push_back({j, grid_index[j]});
  Network hats = build_unary_hats(grid_index.size(), M, specs);
  if (specs.size() == 1) return hats;
  std::vector<std::size_t> all(specs.size());
  std::iota(all.begin(), all.end(), 0);
  return compose(build_product_tree(specs.size(), {all}, m), hats);
}

// x -> s(Ax + b), realized as s_{-b}(Ax) followed by an identity output.
inline Network build_affine(const std::vector<std::vector<double>>& A, std::span<const double> b,
                            WeightMode mode = WeightMode::strict) {
  const std::size_t rows = A.size();
  if (rows == 0 || b.size() != rows) throw DimensionError("build_affine: A and b disagree");
  const std::size_t cols = A.front().size();
  detail::Builder nb(cols);
  const std::size_t layer = nb.hidden(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    if (A[i].size() != cols) throw DimensionError("build_affine: ragged matrix");
    for (std::size_t j = 0; j < cols; ++j) {
      if (mode == WeightMode::strict && std::abs(A[i][j]) > 1.0) {
        throw PreconditionError("build_affine: |A[" + std::to_string(i) + "][" + std::to_string(j) +
                                "]| > 1 in strict mode; split it with scale_gadget");
      }
      nb.link(layer, i, j, A[i][j]);
    }
    if (mode == WeightMode::strict && std::abs(b[i]) > 1.0) {
      throw PreconditionError("build_affine: |b[" + std::to_string(i) + "]| > 1 in strict mode; use scale_gadget");
    }
    nb.shift(layer, i, -b[i]);
  }
  const std::size_t out = nb.output(rows);
  for (std::size_t i = 0; i < rows; ++i) nb.link(out, i, i, 1.0);
  return nb.finish(mode);
}

// x -> w x for x >= 0 with all entries in [-1, 1]. |w| <= 1 is a single
// edge; otherwise k = ceil(|w|) unit-weight copies of s(x) summed with
// weights w/k on the output edges.
inline Network scale_gadget(double w) {
  if (!std::isfinite(w)) throw PreconditionError("scale_gadget: weight must be finite");
  if (std::abs(w) <= 1.0) {
    detail::Builder b(1);
    const std::size_t out = b.output(1);
    b.link(out, 0, 0, w);
    return b.finish();
  }
  const auto k = static_cast<std::size_t>(std::ceil(std::abs(w)));
  detail::Builder b(1);
  const std::size_t layer = b.hidden(k);
  for (std::size_t u = 0; u < k; ++u) b.link(layer, u, 0, 1.0);
  const std::size_t out = b.output(1);
  const double edge = std::clamp(w / static_cast<double>(k), -1.0, 1.0);
  for (std::size_t u = 0; u < k; ++u) b.link(out, 0, u, edge);
  return b.finish();
}

// Coordinatewise clamp to [0, 1]: s(x) - s(x - 1).
inline Network build_clamp01(std::size_t dim) {
  detail::Builder b(dim);
  const std::size_t layer = b.hidden(2 * dim);
  for (std::size_t i = 0; i < dim; ++i) {
    b.link(layer, 2 * i, i, 1.0);
    b.link(layer, 2 * i + 1, i, 1.0);
    b.shift(layer, 2 * i + 1, 1.0);
  }
  const std::size_t out = b.output(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    b.link(out, i, 2 * i, 1.0);
    b.link(out, i, 2 * i + 1, -1.0);
  }
  return b.finish();
}

// Ramp y -> min(1, (y)_+ / t) for 0 < t <= 1, exact. The slope 1/t is
// spread over k = ceil(1/t) copies.
inline Network build_ramp(double t) {
  if (!(t > 0.0 && t <= 1.0)) throw PreconditionError("build_ramp: threshold must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(std::ceil(1.0 / t));
  detail::Builder b(1);
  const std::size_t layer = b.hidden(2 * k);
  for (std::size_t u = 0; u < k; ++u) {
    b.link(layer, u, 0, 1.0);
    b.link(layer, k + u, 0, 1.0);
    b.shift(layer, k + u, t);
  }
  const std::size_t out = b.output(1);
  const double edge = std::min(1.0, 1.0 / (static_cast<double>(k) * t));
  for (std::size_t u = 0; u < k; ++u) {
    b.link(out, 0, u, edge);
    b.link(out, 0, k + u, -edge);
  }
  return b.finish();
}

}  // namespace mrelu
