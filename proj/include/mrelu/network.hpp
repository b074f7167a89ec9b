#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mrelu/error.hpp"

namespace mrelu {

// Depth L (number of hidden layers) and widths p_0..p_{L+1}.
struct Architecture {
  std::size_t depth = 0;
  std::vector<std::size_t> widths;

  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }

  bool valid() const {
    if (widths.size() != depth + 2) return false;
    return std::all_of(widths.begin(), widths.end(), [](std::size_t w) { return w >= 1; });
  }

  bool operator==(const Architecture&) const = default;
};

// Number of weight and shift entries of a fully connected network with this
// architecture: sum_l (p_l + 1) p_{l+1} - p_{L+1}.
inline std::size_t count_params(const Architecture& arch) {
  std::size_t total = 0;
  for (std::size_t l = 0; l <= arch.depth; ++l) total += (arch.widths[l] + 1) * arch.widths[l + 1];
  return total - arch.widths.back();
}

struct Entry {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  double value = 0.0;

  bool operator==(const Entry&) const = default;
};

// Coordinate-list matrix, kept sorted row-major with unique coordinates.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<Entry>& entries() const { return entries_; }

  // Appends an entry; call finalize() before use if entries were added out of order.
  void add(std::size_t row, std::size_t col, double value) {
    if (value == 0.0) return;
    entries_.push_back({static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(col), value});
    sorted_ = false;
  }

  // Sorts and merges duplicate coordinates (summing them); drops exact zeros.
  void finalize() {
    if (sorted_) return;
    std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<Entry> merged;
    merged.reserve(entries_.size());
    for (const Entry& e : entries_) {
      if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col) {
        merged.back().value += e.value;
      } else {
        merged.push_back(e);
      }
    }
    std::erase_if(merged, [](const Entry& e) { return e.value == 0.0; });
    entries_ = std::move(merged);
    sorted_ = true;
  }

  std::size_t nonzeros() const {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [](const Entry& e) { return e.value != 0.0; }));
  }

  double max_abs() const {
    double m = 0.0;
    for (const Entry& e : entries_) m = std::max(m, std::abs(e.value));
    return m;
  }

  // out = this * in. Accumulation follows entry order, so identical entry
  // lists give bit-identical results.
  void apply(std::span<const double> in, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (const Entry& e : entries_) out[e.row] += e.value * in[e.col];
  }

  // Block form: in and out hold Block samples per row, sample-minor.
  template <std::size_t Block>
  void apply_block(const double* in, double* out) const {
    std::fill(out, out + rows_ * Block, 0.0);
    for (const Entry& e : entries_) {
      double* o = out + e.row * Block;
      const double* x = in + e.col * Block;
      const double w = e.value;
      for (std::size_t s = 0; s < Block; ++s) o[s] += w * x[s];
    }
  }

  bool operator==(const SparseMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && entries_ == o.entries_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Entry> entries_;
  bool sorted_ = true;
};

enum class WeightMode { strict, relaxed };

inline const char* to_string(WeightMode m) { return m == WeightMode::strict ? "strict" : "relaxed"; }

struct SparsityReport {
  std::size_t nonzero_count = 0;
  std::size_t total_count = 0;
  double max_abs_weight = 0.0;
};

struct Violation {
  enum class Kind { shape, weight_bound, shift_bound };
  Kind kind = Kind::shape;
  std::size_t layer = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Layered ReLU network x -> W_L s_{v_L} W_{L-1} ... W_1 s_{v_1} W_0 x with
// s_v(y) = max(y - v, 0). v_0 does not exist; the output activation is the
// identity. Immutable once constructed.
class Network {
 public:
  Network() = default;
  Network(Architecture arch, std::vector<SparseMatrix> weights, std::vector<std::vector<double>> shifts,
          WeightMode mode = WeightMode::strict)
      : arch_(std::move(arch)), weights_(std::move(weights)), shifts_(std::move(shifts)), mode_(mode) {
    for (auto& w : weights_) w.finalize();
  }

  const Architecture& arch() const { return arch_; }
  std::size_t depth() const { return arch_.depth; }
  std::size_t input_dim() const { return arch_.input_dim(); }
  std::size_t output_dim() const { return arch_.output_dim(); }
  // Weight matrix W_i, i = 0..L.
  const SparseMatrix& weight(std::size_t i) const { return weights_[i]; }
  const std::vector<SparseMatrix>& weights() const { return weights_; }
  // Shift vector v_i for hidden layer i = 1..L.
  const std::vector<double>& shift(std::size_t i) const { return shifts_[i - 1]; }
  const std::vector<std::vector<double>>& shifts() const { return shifts_; }
  WeightMode mode() const { return mode_; }

  Network with_mode(WeightMode mode) const {
    Network copy = *this;
    copy.mode_ = mode;
    return copy;
  }

  std::vector<double> eval(std::span<const double> x) const {
    std::vector<double> a, b;
    return eval(x, a, b);
  }

  // Evaluation with caller-owned scratch buffers, for hot loops.
  std::vector<double> eval(std::span<const double> x, std::vector<double>& a, std::vector<double>& b) const {
    if (x.size() != input_dim()) {
      throw DimensionError("layer 0: input has dimension " + std::to_string(x.size()) + ", network expects " +
                           std::to_string(input_dim()));
    }
    a.assign(x.begin(), x.end());
    for (std::size_t i = 0; i <= arch_.depth; ++i) {
      const SparseMatrix& w = weights_[i];
      if (w.cols() != a.size() || w.rows() != arch_.widths[i + 1]) {
        throw DimensionError("layer " + std::to_string(i) + ": weight matrix is " + std::to_string(w.rows()) + "x" +
                             std::to_string(w.cols()) + ", expected " + std::to_string(arch_.widths[i + 1]) + "x" +
                             std::to_string(a.size()));
      }
      b.resize(w.rows());
      w.apply(a, b);
      if (i < arch_.depth) {
        const auto& v = shifts_[i];
        if (v.size() != b.size()) {
          throw DimensionError("layer " + std::to_string(i + 1) + ": shift has length " + std::to_string(v.size()) +
                               ", expected " + std::to_string(b.size()));
        }
        for (std::size_t k = 0; k < b.size(); ++k) b[k] = std::max(b[k] - v[k], 0.0);
      }
      std::swap(a, b);
    }
    return a;
  }

  double eval1(std::span<const double> x) const { return eval(x).front(); }

  // Many inputs at once; results match eval() bit for bit.
  std::vector<std::vector<double>> eval_batch(const std::vector<std::vector<double>>& xs) const {
    constexpr std::size_t kBlock = 16;
    std::vector<std::vector<double>> out(xs.size());
    if (xs.empty()) return out;
    std::vector<double> a, b;
    for (std::size_t start = 0; start < xs.size(); start += kBlock) {
      const std::size_t n = std::min(kBlock, xs.size() - start);
      a.assign(input_dim() * kBlock, 0.0);
      for (std::size_t s = 0; s < n; ++s) {
        const auto& x = xs[start + s];
        if (x.size() != input_dim()) {
          throw DimensionError("layer 0: input has dimension " + std::to_string(x.size()) + ", network expects " +
                               std::to_string(input_dim()));
        }
        for (std::size_t k = 0; k < x.size(); ++k) a[k * kBlock + s] = x[k];
      }
      for (std::size_t i = 0; i <= arch_.depth; ++i) {
        b.resize(weights_[i].rows() * kBlock);
        weights_[i].apply_block<kBlock>(a.data(), b.data());
        if (i < arch_.depth) {
          const auto& v = shifts_[i];
          for (std::size_t k = 0; k < v.size(); ++k)
            for (std::size_t s = 0; s < kBlock; ++s) b[k * kBlock + s] = std::max(b[k * kBlock + s] - v[k], 0.0);
        }
        std::swap(a, b);
      }
      for (std::size_t s = 0; s < n; ++s) {
        out[start + s].resize(output_dim());
        for (std::size_t k = 0; k < output_dim(); ++k) out[start + s][k] = a[k * kBlock + s];
      }
    }
    return out;
  }

  bool operator==(const Network& o) const {
    return arch_ == o.arch_ && weights_ == o.weights_ && shifts_ == o.shifts_ && mode_ == o.mode_;
  }

 private:
  Architecture arch_;
  std::vector<SparseMatrix> weights_;
  std::vector<std::vector<double>> shifts_;
  WeightMode mode_ = WeightMode::strict;
};

inline SparsityReport sparsity(const Network& net) {
  SparsityReport r;
  r.total_count = count_params(net.arch());
  for (const auto& w : net.weights()) {
    r.nonzero_count += w.nonzeros();
    r.max_abs_weight = std::max(r.max_abs_weight, w.max_abs());
  }
  for (const auto& v : net.shifts()) {
    for (double x : v) {
      if (x != 0.0) ++r.nonzero_count;
      r.max_abs_weight = std::max(r.max_abs_weight, std::abs(x));
    }
  }
  return r;
}

inline std::size_t max_width(const Network& net) {
  const auto& p = net.arch().widths;
  if (p.size() <= 2) return 0;
  return *std::max_element(p.begin() + 1, p.end() - 1);
}

// Checks shapes against the architecture and, in strict mode, that every
// weight and shift lies in [-1, 1]. Never throws.
inline ValidationReport validate(const Network& net) {
  ValidationReport rep;
  const Architecture& arch = net.arch();
  auto shape = [&](std::size_t layer, std::string msg) {
    rep.violations.push_back({Violation::Kind::shape, layer, 0, 0, 0.0, std::move(msg)});
  };
  if (!arch.valid()) {
    shape(0, "architecture invalid: need depth+2 widths, all >= 1");
    return rep;
  }
  if (net.weights().size() != arch.depth + 1) shape(0, "expected depth+1 weight matrices");
  if (net.shifts().size() != arch.depth) shape(0, "expected depth shift vectors");
  if (!rep.ok()) return rep;
  for (std::size_t i = 0; i <= arch.depth; ++i) {
    const SparseMatrix& w = net.weight(i);
    if (w.rows() != arch.widths[i + 1] || w.cols() != arch.widths[i]) {
      shape(i, "weight matrix " + std::to_string(i) + " has wrong shape");
      continue;
    }
    for (const Entry& e : w.entries()) {
      if (e.row >= w.rows() || e.col >= w.cols()) {
        shape(i, "weight entry outside matrix");
      } else if (net.mode() == WeightMode::strict && !(std::abs(e.value) <= 1.0)) {
        rep.violations.push_back({Violation::Kind::weight_bound, i, e.row, e.col, e.value,
                                  "|W_" + std::to_string(i) + "[" + std::to_string(e.row) + "," +
                                      std::to_string(e.col) + "]| > 1"});
      }
    }
  }
  for (std::size_t i = 1; i <= arch.depth; ++i) {
    const auto& v = net.shift(i);
    if (v.size() != arch.widths[i]) {
      shape(i, "shift vector " + std::to_string(i) + " has wrong length");
      continue;
    }
    if (net.mode() != WeightMode::strict) continue;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!(std::abs(v[k]) <= 1.0)) {
        rep.violations.push_back({Violation::Kind::shift_bound, i, k, 0, v[k],
                                  "|v_" + std::to_string(i) + "[" + std::to_string(k) + "]| > 1"});
      }
    }
  }
  return rep;
}

}  // namespace mrelu
