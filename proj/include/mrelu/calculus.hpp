#pragma once

// Combination rules for networks: enlargement, composition, depth padding,
// parallelization and removal of inactive units. Every rule returns a new
// network and leaves its arguments untouched.

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mrelu/error.hpp"
#include "mrelu/network.hpp"

namespace mrelu {

namespace detail {

inline WeightMode combine_mode(WeightMode a, WeightMode b) {
  return a == WeightMode::strict && b == WeightMode::strict ? WeightMode::strict : WeightMode::relaxed;
}

inline SparseMatrix identity_matrix(std::size_t n, double scale = 1.0) {
  SparseMatrix m(n, n);
  for (std::size_t k = 0; k < n; ++k) m.add(k, k, scale);
  return m;
}

// Copies `src` into a matrix of shape rows x cols at the given offsets.
inline void place(SparseMatrix& dst, const SparseMatrix& src, std::size_t row_off, std::size_t col_off,
                  double scale = 1.0) {
  for (const Entry& e : src.entries()) dst.add(e.row + row_off, e.col + col_off, scale * e.value);
}

}  // namespace detail

// Identity on R^dim. With depth 0 it is exact everywhere; with depth >= 1 it
// routes through ReLU layers and is exact on the nonnegative orthant.
inline Network identity_net(std::size_t dim, std::size_t depth = 0) {
  Architecture arch{depth, std::vector<std::size_t>(depth + 2, dim)};
  std::vector<SparseMatrix> w(depth + 1, detail::identity_matrix(dim));
  std::vector<std::vector<double>> v(depth, std::vector<double>(dim, 0.0));
  return Network(std::move(arch), std::move(w), std::move(v));
}

// Zero-pads `net` into a wider architecture of the same depth. The added
// units carry no connections, so evaluation and sparsity are unchanged.
// `extra_sparsity` only documents the enlarged class and is not used.
inline Network embed(const Network& net, const Architecture& target, std::size_t extra_sparsity = 0) {
  (void)extra_sparsity;
  const Architecture& a = net.arch();
  if (target.depth != a.depth || target.widths.size() != a.widths.size()) {
    throw DimensionError("embed: target depth " + std::to_string(target.depth) + " differs from network depth " +
                         std::to_string(a.depth));
  }
  for (std::size_t i = 0; i < a.widths.size(); ++i) {
    if (target.widths[i] < a.widths[i]) {
      throw DimensionError("embed: target width p_" + std::to_string(i) + " = " + std::to_string(target.widths[i]) +
                           " is smaller than " + std::to_string(a.widths[i]));
    }
  }
  std::vector<SparseMatrix> w;
  for (std::size_t i = 0; i <= a.depth; ++i) {
    SparseMatrix m(target.widths[i + 1], target.widths[i]);
    detail::place(m, net.weight(i), 0, 0);
    w.push_back(std::move(m));
  }
  std::vector<std::vector<double>> v;
  for (std::size_t i = 1; i <= a.depth; ++i) {
    auto s = net.shift(i);
    s.resize(target.widths[i], 0.0);
    v.push_back(std::move(s));
  }
  return Network(target, std::move(w), std::move(v), net.mode());
}

// x -> outer(s_v(inner(x))). Depth L_inner + L_outer + 1, widths
// (p_inner, p'_1, ..., p'_{L'+1}).
inline Network compose(const Network& outer, const Network& inner, std::span<const double> v) {
  if (inner.output_dim() != outer.input_dim()) {
    throw DimensionError("compose: inner output dimension " + std::to_string(inner.output_dim()) +
                         " != outer input dimension " + std::to_string(outer.input_dim()));
  }
  if (v.size() != inner.output_dim()) {
    throw DimensionError("compose: interface shift has length " + std::to_string(v.size()) + ", expected " +
                         std::to_string(inner.output_dim()));
  }
  Architecture arch;
  arch.depth = inner.depth() + outer.depth() + 1;
  arch.widths = inner.arch().widths;
  arch.widths.insert(arch.widths.end(), outer.arch().widths.begin() + 1, outer.arch().widths.end());
  std::vector<SparseMatrix> w = inner.weights();
  w.insert(w.end(), outer.weights().begin(), outer.weights().end());
  std::vector<std::vector<double>> s = inner.shifts();
  s.emplace_back(v.begin(), v.end());
  s.insert(s.end(), outer.shifts().begin(), outer.shifts().end());
  return Network(std::move(arch), std::move(w), std::move(s), detail::combine_mode(outer.mode(), inner.mode()));
}

inline Network compose(const Network& outer, const Network& inner) {
  const std::vector<double> zero(inner.output_dim(), 0.0);
  return compose(outer, inner, zero);
}

// Inserts q identity layers of width p_0 at the bottom of the network. The
// function is unchanged on inputs with all coordinates >= 0; sparsity grows
// by exactly q * p_0.
inline Network pad_depth(const Network& net, std::size_t q) {
  if (q == 0) throw PreconditionError("pad_depth: q must be >= 1");
  const std::size_t p0 = net.input_dim();
  Architecture arch;
  arch.depth = net.depth() + q;
  arch.widths.assign(q, p0);
  arch.widths.insert(arch.widths.end(), net.arch().widths.begin(), net.arch().widths.end());
  std::vector<SparseMatrix> w(q, detail::identity_matrix(p0));
  w.insert(w.end(), net.weights().begin(), net.weights().end());
  std::vector<std::vector<double>> s(q, std::vector<double>(p0, 0.0));
  s.insert(s.end(), net.shifts().begin(), net.shifts().end());
  return Network(std::move(arch), std::move(w), std::move(s), net.mode());
}

// Appends q identity layers after the output. Exact when every output is
// nonnegative on the inputs of interest; costs q * p_{L+1} nonzeros.
inline Network pad_top(const Network& net, std::size_t q) {
  if (q == 0) return net;
  const std::size_t out = net.output_dim();
  Architecture arch = net.arch();
  arch.depth += q;
  arch.widths.insert(arch.widths.end(), q, out);
  std::vector<SparseMatrix> w = net.weights();
  for (std::size_t k = 0; k < q; ++k) w.push_back(detail::identity_matrix(out));
  std::vector<std::vector<double>> s = net.shifts();
  for (std::size_t k = 0; k < q; ++k) s.emplace_back(out, 0.0);
  return Network(std::move(arch), std::move(w), std::move(s), net.mode());
}

// Appends q layers while carrying signed outputs through two channels
// (h)_+ and (-h)_+ that are recombined on the output layer. Exact for all
// inputs.
inline Network pad_top_signed(const Network& net, std::size_t q) {
  if (q == 0) return net;
  const std::size_t out = net.output_dim();
  Architecture arch = net.arch();
  arch.depth += q;
  arch.widths.pop_back();
  arch.widths.insert(arch.widths.end(), q, 2 * out);
  arch.widths.push_back(out);
  std::vector<SparseMatrix> w(net.weights().begin(), net.weights().end() - 1);
  const SparseMatrix& last = net.weights().back();
  SparseMatrix split(2 * out, last.cols());
  detail::place(split, last, 0, 0);
  detail::place(split, last, out, 0, -1.0);
  w.push_back(std::move(split));
  for (std::size_t k = 1; k < q; ++k) w.push_back(detail::identity_matrix(2 * out));
  SparseMatrix merge(out, 2 * out);
  for (std::size_t k = 0; k < out; ++k) {
    merge.add(k, k, 1.0);
    merge.add(k, out + k, -1.0);
  }
  w.push_back(std::move(merge));
  std::vector<std::vector<double>> s = net.shifts();
  for (std::size_t k = 0; k < q; ++k) s.emplace_back(2 * out, 0.0);
  return Network(std::move(arch), std::move(w), std::move(s), net.mode());
}

// Computes all networks side by side on a shared input: widths add
// layerwise (except the input), outputs are concatenated in order.
inline Network parallelize(std::span<const Network> nets) {
  if (nets.empty()) throw PreconditionError("parallelize: no networks");
  const std::size_t depth = nets.front().depth();
  const std::size_t p0 = nets.front().input_dim();
  WeightMode mode = WeightMode::strict;
  for (const Network& n : nets) {
    if (n.depth() != depth) {
      throw DimensionError("parallelize: depths " + std::to_string(depth) + " and " + std::to_string(n.depth()) +
                           " differ; synchronize with pad_depth first");
    }
    if (n.input_dim() != p0) {
      throw DimensionError("parallelize: input dimensions " + std::to_string(p0) + " and " +
                           std::to_string(n.input_dim()) + " differ; use embed first");
    }
    mode = detail::combine_mode(mode, n.mode());
  }
  Architecture arch{depth, std::vector<std::size_t>(depth + 2, 0)};
  arch.widths[0] = p0;
  for (const Network& n : nets)
    for (std::size_t i = 1; i < depth + 2; ++i) arch.widths[i] += n.arch().widths[i];
  std::vector<SparseMatrix> w;
  for (std::size_t i = 0; i <= depth; ++i) {
    SparseMatrix m(arch.widths[i + 1], arch.widths[i]);
    std::size_t row = 0, col = 0;
    for (const Network& n : nets) {
      detail::place(m, n.weight(i), row, i == 0 ? 0 : col);
      row += n.arch().widths[i + 1];
      col += n.arch().widths[i];
    }
    w.push_back(std::move(m));
  }
  std::vector<std::vector<double>> s;
  for (std::size_t i = 1; i <= depth; ++i) {
    std::vector<double> v;
    for (const Network& n : nets) v.insert(v.end(), n.shift(i).begin(), n.shift(i).end());
    s.push_back(std::move(v));
  }
  return Network(std::move(arch), std::move(w), std::move(s), mode);
}

inline Network parallelize(const Network& f, const Network& g) {
  const Network both[] = {f, g};
  return parallelize(both);
}

// Removes hidden units that cannot influence the output: units without
// outgoing connections, and units without incoming connections whose shift
// is >= 0 (they output s(0 - v) = 0). Repeats until nothing changes; a layer
// that would become empty keeps one disconnected unit.
inline Network canonical_width(const Network& net, std::size_t s_budget) {
  if (sparsity(net).nonzero_count > s_budget) {
    throw PreconditionError("canonical_width: network sparsity exceeds the budget " + std::to_string(s_budget));
  }
  std::vector<SparseMatrix> w = net.weights();
  std::vector<std::vector<double>> s = net.shifts();
  Architecture arch = net.arch();
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t layer = 1; layer <= arch.depth; ++layer) {
      const std::size_t width = arch.widths[layer];
      std::vector<char> has_in(width, 0), has_out(width, 0);
      for (const Entry& e : w[layer - 1].entries()) has_in[e.row] = 1;
      for (const Entry& e : w[layer].entries()) has_out[e.col] = 1;
      std::vector<std::size_t> keep;
      for (std::size_t k = 0; k < width; ++k) {
        const bool dead = !has_out[k] || (!has_in[k] && s[layer - 1][k] >= 0.0);
        if (!dead) keep.push_back(k);
      }
      if (keep.size() == width) continue;
      if (keep.empty() && width == 1) continue;
      changed = true;
      const bool placeholder = keep.empty();
      const std::size_t new_width = placeholder ? 1 : keep.size();
      std::vector<std::size_t> index(width, static_cast<std::size_t>(-1));
      for (std::size_t k = 0; k < keep.size(); ++k) index[keep[k]] = k;
      SparseMatrix in(new_width, arch.widths[layer - 1]);
      for (const Entry& e : w[layer - 1].entries())
        if (index[e.row] != static_cast<std::size_t>(-1)) in.add(index[e.row], e.col, e.value);
      SparseMatrix out(arch.widths[layer + 1], new_width);
      for (const Entry& e : w[layer].entries())
        if (index[e.col] != static_cast<std::size_t>(-1)) out.add(e.row, index[e.col], e.value);
      std::vector<double> v(new_width, 0.0);
      for (std::size_t k = 0; k < keep.size(); ++k) v[k] = s[layer - 1][keep[k]];
      in.finalize();
      out.finalize();
      w[layer - 1] = std::move(in);
      w[layer] = std::move(out);
      s[layer - 1] = std::move(v);
      arch.widths[layer] = new_width;
    }
  }
  return Network(std::move(arch), std::move(w), std::move(s), net.mode());
}

// For a single-output network h, returns a network with outputs
// ((h)_+, (-h)_+); channel 0 minus channel 1 reconstructs h. One extra layer.
inline Network sign_split(const Network& net) {
  if (net.output_dim() != 1) {
    throw DimensionError("sign_split: network has " + std::to_string(net.output_dim()) + " outputs, expected 1");
  }
  Architecture arch = net.arch();
  arch.depth += 1;
  arch.widths.back() = 2;
  arch.widths.push_back(2);
  std::vector<SparseMatrix> w(net.weights().begin(), net.weights().end() - 1);
  const SparseMatrix& last = net.weights().back();
  SparseMatrix split(2, last.cols());
  detail::place(split, last, 0, 0);
  detail::place(split, last, 1, 0, -1.0);
  w.push_back(std::move(split));
  w.push_back(detail::identity_matrix(2));
  std::vector<std::vector<double>> s = net.shifts();
  s.emplace_back(2, 0.0);
  return Network(std::move(arch), std::move(w), std::move(s), net.mode());
}

// Feeds the (linear) outputs h of `net` into one more hidden layer:
// x -> W s_v(A h(x)). The new hidden weights are the product A W_L.
inline Network append_layer(const Network& net, const SparseMatrix& A, std::span<const double> v,
                            const SparseMatrix& W) {
  if (A.cols() != net.output_dim() || v.size() != A.rows() || W.cols() != A.rows()) {
    throw DimensionError("append_layer: shapes of A, v and W do not chain with the network output");
  }
  const SparseMatrix& last = net.weights().back();
  SparseMatrix prod(A.rows(), last.cols());
  for (const Entry& a : A.entries())
    for (const Entry& e : last.entries())
      if (e.row == a.col) prod.add(a.row, e.col, a.value * e.value);
  prod.finalize();
  Architecture arch = net.arch();
  arch.depth += 1;
  arch.widths.back() = A.rows();
  arch.widths.push_back(W.rows());
  std::vector<SparseMatrix> w(net.weights().begin(), net.weights().end() - 1);
  w.push_back(std::move(prod));
  w.push_back(W);
  std::vector<std::vector<double>> s = net.shifts();
  s.emplace_back(v.begin(), v.end());
  return Network(std::move(arch), std::move(w), std::move(s), net.mode());
}

// Scales every output by c (folded into the last weight matrix).
inline Network scale_output(const Network& net, double c) {
  std::vector<SparseMatrix> w = net.weights();
  SparseMatrix scaled(w.back().rows(), w.back().cols());
  for (const Entry& e : w.back().entries()) scaled.add(e.row, e.col, c * e.value);
  scaled.finalize();
  w.back() = std::move(scaled);
  return Network(net.arch(), std::move(w), net.shifts(), net.mode());
}

// Rewires the input layer: the network reads coordinate map[c] of a new
// input of dimension new_dim wherever it used to read coordinate c.
inline Network select_inputs(const Network& net, std::size_t new_dim, std::span<const std::size_t> map) {
  if (map.size() != net.input_dim()) throw DimensionError("select_inputs: map length must equal input dimension");
  for (std::size_t c : map)
    if (c >= new_dim) throw DimensionError("select_inputs: map index out of range");
  Architecture arch = net.arch();
  arch.widths[0] = new_dim;
  std::vector<SparseMatrix> w = net.weights();
  SparseMatrix first(w[0].rows(), new_dim);
  for (const Entry& e : net.weight(0).entries()) first.add(e.row, map[e.col], e.value);
  first.finalize();
  w[0] = std::move(first);
  return Network(std::move(arch), std::move(w), net.shifts(), net.mode());
}

// One block of a parallel stage: a network reading selected coordinates of
// the shared input. `signed_output` selects sign-channel padding when the
// block must be deepened.
struct Block {
  Network net;
  std::vector<std::size_t> inputs;
  bool signed_output = false;
};

// Pads every block at the top to the common depth and runs them in parallel
// on a shared input of dimension input_dim.
inline Network parallel_blocks(std::span<const Block> blocks, std::size_t input_dim) {
  std::size_t depth = 0;
  for (const Block& b : blocks) depth = std::max(depth, b.net.depth());
  std::vector<Network> nets;
  nets.reserve(blocks.size());
  for (const Block& b : blocks) {
    Network n = select_inputs(b.net, input_dim, b.inputs);
    const std::size_t q = depth - n.depth();
    nets.push_back(b.signed_output ? pad_top_signed(n, q) : pad_top(n, q));
  }
  return parallelize(nets);
}

// Pads the shallower network (at the top) so both have the same depth.
inline std::pair<Network, Network> synchronize(const Network& a, bool a_signed, const Network& b, bool b_signed) {
  const std::size_t depth = std::max(a.depth(), b.depth());
  auto pad = [depth](const Network& n, bool sgn) {
    return sgn ? pad_top_signed(n, depth - n.depth()) : pad_top(n, depth - n.depth());
  };
  return {pad(a, a_signed), pad(b, b_signed)};
}

}  // namespace mrelu
