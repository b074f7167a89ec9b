#pragma once

// Least squares over sparse bounded ReLU networks, approximated by projected
// minibatch gradient descent: weights clipped to [-1, 1] after every step,
// magnitude pruning to the sparsity budget, predictions clipped to [-1, 1].

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mrelu/bench.hpp"
#include "mrelu/error.hpp"
#include "mrelu/holder.hpp"
#include "mrelu/manifold.hpp"
#include "mrelu/network.hpp"

namespace mrelu {

struct ErmOptions {
  std::vector<std::size_t> n = {64, 256, 1024};
  std::size_t seeds = 5;
  std::size_t epochs = 200;
  std::size_t batch = 32;
  double learning_rate = 0.05;
  std::size_t sparsity = 200;
  std::size_t depth = 2;
  std::size_t width = 16;
  bool noise = true;  // standard normal noise on the responses
  std::size_t mc_samples = 4000;
  std::size_t prune_every = 1;
  std::uint64_t seed = 1;
};

// Risk penalty of the oracle inequality with the universal constant set to 1:
// ((s+1) log(4n(L+1)(s+1)^L(d+1)) + 1) / n.
inline double complexity_term(std::size_t s, std::size_t L, std::size_t d, std::size_t n) {
  const double sd = static_cast<double>(s) + 1.0;
  const double lg = std::log(4.0 * static_cast<double>(n) * (static_cast<double>(L) + 1.0)) +
                    static_cast<double>(L) * std::log(sd) + std::log(static_cast<double>(d) + 1.0);
  return (sd * lg + 1.0) / static_cast<double>(n);
}

// Dense parameters of a depth-L network; weights W[l] are row-major
// widths[l+1] x widths[l], shifts v[l] belong to hidden layer l+1.
class DenseNet {
 public:
  DenseNet(std::vector<std::size_t> widths, std::mt19937_64& rng) : p_(std::move(widths)) {
    for (std::size_t l = 0; l + 1 < p_.size(); ++l) {
      const double a = 1.0 / std::sqrt(static_cast<double>(p_[l]));
      std::uniform_real_distribution<double> u(-a, a);
      std::vector<double> w(p_[l + 1] * p_[l]);
      for (double& x : w) x = u(rng);
      W_.push_back(std::move(w));
      if (l + 2 < p_.size()) v_.emplace_back(p_[l + 1], 0.0);
    }
  }

  std::size_t depth() const { return p_.size() - 2; }

  double forward(std::span<const double> x, std::vector<std::vector<double>>* acts = nullptr) const {
    std::vector<double> a(x.begin(), x.end());
    if (acts) acts->assign(1, a);
    for (std::size_t l = 0; l < W_.size(); ++l) {
      std::vector<double> b(p_[l + 1], 0.0);
      for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t k = 0; k < a.size(); ++k) b[i] += W_[l][i * p_[l] + k] * a[k];
      if (l < v_.size())
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::max(b[i] - v_[l][i], 0.0);
      a = std::move(b);
      if (acts) acts->push_back(a);
    }
    return a[0];
  }

  // Gradient of 0.5 (clip(f(x)) - y)^2, accumulated with weight `scale`.
  void accumulate(std::span<const double> x, double y, double scale, DenseNet& g) const {
    std::vector<std::vector<double>> acts;
    const double out = forward(x, &acts);
    if (std::abs(out) >= 1.0) return;  // clipped prediction: zero gradient
    std::vector<double> delta{(out - y) * scale};
    for (std::size_t l = W_.size(); l-- > 0;) {
      const auto& in = acts[l];
      for (std::size_t i = 0; i < delta.size(); ++i)
        for (std::size_t k = 0; k < in.size(); ++k) g.W_[l][i * p_[l] + k] += delta[i] * in[k];
      if (l == 0) break;
      std::vector<double> back(p_[l], 0.0);
      for (std::size_t i = 0; i < delta.size(); ++i)
        for (std::size_t k = 0; k < back.size(); ++k) back[k] += W_[l][i * p_[l] + k] * delta[i];
      // Through sigma_v: active units only; d/dv = -d/dpre.
      for (std::size_t k = 0; k < back.size(); ++k) {
        if (acts[l][k] <= 0.0) back[k] = 0.0;
        g.v_[l - 1][k] -= back[k];
      }
      delta = std::move(back);
    }
  }

  void zero() {
    for (auto& w : W_) std::fill(w.begin(), w.end(), 0.0);
    for (auto& v : v_) std::fill(v.begin(), v.end(), 0.0);
  }

  void step(const DenseNet& g, double lr) {
    for (std::size_t l = 0; l < W_.size(); ++l)
      for (std::size_t i = 0; i < W_[l].size(); ++i) W_[l][i] = std::clamp(W_[l][i] - lr * g.W_[l][i], -1.0, 1.0);
    for (std::size_t l = 0; l < v_.size(); ++l)
      for (std::size_t i = 0; i < v_[l].size(); ++i) v_[l][i] = std::clamp(v_[l][i] - lr * g.v_[l][i], -1.0, 1.0);
  }

  // Keeps the s largest magnitudes (ties by position), zeroes the rest.
  void prune(std::size_t s) {
    std::vector<double*> all;
    for (auto& w : W_)
      for (double& x : w) all.push_back(&x);
    for (auto& v : v_)
      for (double& x : v) all.push_back(&x);
    if (all.size() <= s) return;
    std::vector<std::size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(*all[a]) > std::abs(*all[b]); });
    for (std::size_t i = s; i < idx.size(); ++i) *all[idx[i]] = 0.0;
  }

  std::size_t nonzeros() const {
    std::size_t n = 0;
    for (const auto& w : W_) n += static_cast<std::size_t>(std::count_if(w.begin(), w.end(), [](double x) { return x != 0.0; }));
    for (const auto& v : v_) n += static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; }));
    return n;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& w : W_)
      for (double x : w) m = std::max(m, std::abs(x));
    for (const auto& v : v_)
      for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }

  Network to_network() const {
    std::vector<SparseMatrix> ws;
    for (std::size_t l = 0; l < W_.size(); ++l) {
      SparseMatrix m(p_[l + 1], p_[l]);
      for (std::size_t i = 0; i < p_[l + 1]; ++i)
        for (std::size_t k = 0; k < p_[l]; ++k) m.add(i, k, W_[l][i * p_[l] + k]);
      ws.push_back(std::move(m));
    }
    return Network(Architecture{depth(), p_}, std::move(ws), v_);
  }

 private:
  std::vector<std::size_t> p_;
  std::vector<std::vector<double>> W_;
  std::vector<std::vector<double>> v_;
};

struct TrainResult {
  Network net;
  double train_loss = 0.0;
  bool diverged = false;
  std::size_t epochs_checked = 0;  // epochs whose end state passed the constraint check
};

inline double clip_unit(double y) { return std::clamp(y, -1.0, 1.0); }

inline TrainResult train_erm(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
                             const ErmOptions& o, std::uint64_t seed) {
  if (xs.empty() || xs.size() != ys.size()) throw PreconditionError("train_erm: need matching nonempty data");
  if (o.batch == 0 || o.prune_every == 0) throw PreconditionError("train_erm: batch and prune_every must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> widths{xs.front().size()};
  for (std::size_t l = 0; l < o.depth; ++l) widths.push_back(o.width);
  widths.push_back(1);
  DenseNet net(widths, rng), grad(widths, rng);
  net.prune(o.sparsity);
  TrainResult res;
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= o.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += o.batch) {
      const std::size_t end = std::min(order.size(), start + o.batch);
      grad.zero();
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) net.accumulate(xs[order[i]], ys[order[i]], scale, grad);
      net.step(grad, o.learning_rate);
    }
    if (epoch % o.prune_every == 0 || epoch == o.epochs) net.prune(o.sparsity);
    const double mx = net.max_abs();
    if (!std::isfinite(mx)) {
      res.diverged = true;
      break;
    }
    if (epoch % o.prune_every == 0 || epoch == o.epochs) {
      if (mx > 1.0 || net.nonzeros() > o.sparsity) throw Error("train_erm: constraint violated after epoch");
      ++res.epochs_checked;
    } else if (mx > 1.0) {
      throw Error("train_erm: weight bound violated after epoch");
    }
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = clip_unit(net.forward(xs[i])) - ys[i];
    loss += r * r;
  }
  res.train_loss = loss / static_cast<double>(xs.size());
  if (!std::isfinite(res.train_loss)) res.diverged = true;
  res.net = net.to_network();
  return res;
}

// Monte-Carlo prediction risk E (clip(net(X)) - f0(X))^2.
inline double mc_risk(const Network& net, const HolderFunction& f0, const std::vector<std::vector<double>>& xs) {
  double r = 0.0;
  const auto ys = net.eval_batch(xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = clip_unit(ys[i][0]) - f0.eval1(xs[i]);
    r += e * e;
  }
  return r / static_cast<double>(xs.size());
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw PreconditionError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// One row per (n, seed), one median row per n and an informational slope of
// the median risk against n. `baseline` (may be null) is the constructive
// network, reported as a feasible point of the class.
inline ErrorReport run_erm(const Manifold& m, const HolderFunction& f0, const ErmOptions& o,
                           const Network* baseline = nullptr, double beta = 2.0) {
  if (o.n.empty() || o.seeds == 0) throw PreconditionError("run_erm: sweeps must be nonempty");
  ErrorReport rep;
  const std::string id = "erm/" + m.name() + "/" + f0.name;
  const auto mc = m.sample(o.mc_samples, o.seed * 1000003ULL + 17);
  const double base_risk = baseline ? mc_risk(*baseline, f0, mc) : 0.0;
  std::vector<std::pair<double, double>> med_pts;
  for (std::size_t row = 0; row < o.n.size(); ++row) {
    const std::size_t n = o.n[row];
    std::vector<double> risks;
    for (std::size_t k = 0; k < o.seeds; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      std::seed_seq sq{o.seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k)};
      std::mt19937_64 rng(sq);
      const std::uint64_t data_seed = rng(), train_seed = rng();
      const auto xs = m.sample(n, data_seed);
      std::normal_distribution<double> noise(0.0, 1.0);
      std::vector<double> ys;
      for (const auto& x : xs) ys.push_back(f0.eval1(x) + (o.noise ? noise(rng) : 0.0));
      const TrainResult tr = train_erm(xs, ys, o, train_seed);
      ReportRow w;
      w.config_id = id + "/seed" + std::to_string(k);
      w.kind = "erm";
      w.size = static_cast<double>(n);
      w.error = tr.diverged ? std::numeric_limits<double>::quiet_NaN() : mc_risk(tr.net, f0, mc);
      w.depth = tr.net.depth();
      w.width = max_width(tr.net);
      w.sparsity = sparsity(tr.net).nonzero_count;
      w.envelope = base_risk;
      w.extra = complexity_term(o.sparsity, o.depth, m.ambient_dim(), n);
      w.status = tr.diverged ? "diverged" : "ok";
      w.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (!tr.diverged) risks.push_back(w.error);
      rep.rows.push_back(w);
    }
    ReportRow md;
    md.config_id = id + "/median";
    md.kind = "erm_median";
    md.size = static_cast<double>(n);
    md.error = risks.empty() ? std::numeric_limits<double>::quiet_NaN() : median(risks);
    md.envelope = base_risk;
    md.extra = complexity_term(o.sparsity, o.depth, m.ambient_dim(), n);
    md.status = risks.empty() ? "diverged" : "ok";
    if (!risks.empty() && md.error > 0.0) med_pts.emplace_back(md.size, md.error);
    rep.rows.push_back(md);
  }
  if (med_pts.size() >= 3) {
    const double ds = static_cast<double>(m.intrinsic_dim());
    ReportRow s = slope_row(id, rate_fit(med_pts), -2.0 * beta / (2.0 * beta + ds), 0.0);
    s.status = "info";
    rep.rows.push_back(s);
  }
  return rep;
}

}  // namespace mrelu
