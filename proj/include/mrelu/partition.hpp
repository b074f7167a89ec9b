#pragma once

// Smooth partition of unity subordinate to an atlas: mollifier bumps placed
// on a grid of centers in each chart image, sigma_j = sum of bumps o psi_j
// (zero off V_j), tau_j = G(sigma_j, sum_l sigma_l).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "mrelu/error.hpp"
#include "mrelu/jet.hpp"
#include "mrelu/manifold.hpp"

namespace mrelu {

// phi(t) = exp(-1/t) for t > 0, else 0.
template <typename T>
T smooth_flank(const T& t) {
  using std::exp;
  if (value_of(t) <= 0.0) return constant_like(t, 0.0);
  return exp(-1.0 / t);
}

// Smooth step: 0 below 1/4, 1 above 3/4.
template <typename T>
T smooth_step(const T& x) {
  const double v = value_of(x);
  if (v <= 0.25) return constant_like(x, 0.0);
  if (v >= 0.75) return constant_like(x, 1.0);
  const T a = smooth_flank(x - 0.25);
  const T b = smooth_flank(0.75 - x);
  return a / (a + b);
}

// Smooth G with G(u, v) = u / v whenever 0 <= u <= s_hi and s_lo <= v <= s_hi;
// G vanishes unless s_lo/4 < v < s_hi + 3/4 and -3 s_lo/4 < u < s_hi + 3/4.
template <typename T>
T smoothed_division(const T& u, const T& v, double s_lo, double s_hi) {
  if (!(s_lo > 0.0) || !(s_hi >= s_lo)) throw PreconditionError("smoothed_division: need 0 < s_lo <= s_hi");
  const T kv = smooth_step(v * (1.0 / s_lo)) * smooth_step((s_hi + 1.0) - v);
  if (value_of(kv) == 0.0) return constant_like(u, 0.0);
  const T ku = smooth_step(u * (1.0 / s_lo) + 1.0) * smooth_step((s_hi + 1.0) - u);
  if (value_of(ku) == 0.0) return constant_like(u, 0.0);
  return kv * ku * u / v;
}

// Standard mollifier exp(-1 / (1 - |u - c|^2 / rho^2)) on the open ball.
struct Bump {
  std::vector<double> center;
  double rho = 0.0;

  template <typename T>
  T operator()(std::span<const T> u) const {
    using std::exp;
    T r2 = constant_like(u.front(), 0.0);
    for (std::size_t k = 0; k < center.size(); ++k) {
      const T d = u[k] - center[k];
      r2 = r2 + d * d;
    }
    const double q = value_of(r2) / (rho * rho);
    if (q >= 1.0) return constant_like(u.front(), 0.0);
    return exp(-1.0 / (1.0 - r2 * (1.0 / (rho * rho))));
  }
};

struct PartitionAudit {
  std::size_t samples = 0;
  double sigma_min = 0.0;  // empirical min / max of sum_l sigma_l
  double sigma_max = 0.0;
  double min_center_distance = 0.0;  // min over centers of delta(x_c)
};

class PartitionOfUnity {
 public:
  PartitionOfUnity(std::shared_ptr<const Manifold> m, std::vector<std::vector<Bump>> bumps, double s_lo, double s_hi,
                   double delta, PartitionAudit audit)
      : m_(std::move(m)), bumps_(std::move(bumps)), s_lo_(s_lo), s_hi_(s_hi), delta_(delta), audit_(audit) {}

  const Manifold& manifold() const { return *m_; }
  std::size_t size() const { return bumps_.size(); }
  const std::vector<Bump>& bumps(std::size_t j) const { return bumps_[j]; }
  double sigma_lo() const { return s_lo_; }
  double sigma_hi() const { return s_hi_; }
  // Support margin: tau_j > 0 implies x in V_j^{-delta}.
  double delta() const { return delta_; }
  const PartitionAudit& audit() const { return audit_; }

  template <typename T>
  T sigma(std::size_t j, const std::vector<T>& x) const {
    std::vector<double> xv(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xv[i] = value_of(x[i]);
    const Chart& c = m_->chart(j);
    if (!c.member(xv)) return constant_like(x.front(), 0.0);
    std::vector<T> z;
    for (const auto& row : c.projection()) {
      T s = constant_like(x.front(), 0.0);
      for (std::size_t i = 0; i < x.size(); ++i)
        if (row[i] != 0.0) s = s + row[i] * x[i];
      z.push_back(s);
    }
    const std::vector<T> u = c.forward_reduced(z);
    T s = constant_like(x.front(), 0.0);
    for (const Bump& b : bumps_[j]) s = s + b(std::span<const T>(u));
    return s;
  }

  template <typename T>
  T tau(std::size_t j, const std::vector<T>& x) const {
    const T sj = sigma(j, x);
    if (value_of(sj) == 0.0) return constant_like(x.front(), 0.0);
    T total = constant_like(x.front(), 0.0);
    for (std::size_t l = 0; l < size(); ++l) total = total + (l == j ? sj : sigma(l, x));
    return smoothed_division(sj, total, s_lo_, s_hi_);
  }

  double operator()(std::size_t j, std::span<const double> x) const {
    return tau<double>(j, std::vector<double>(x.begin(), x.end()));
  }

  // tau_j(lift_j(z)): tau_j in the reduced coordinates of chart j, on its
  // gated side.
  template <typename T>
  T tau_reduced(std::size_t j, const std::vector<T>& z) const {
    const Chart& c = m_->chart(j);
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double v = value_of(z[k]);
      if (v < c.reduced_box().lo[k] || v > c.reduced_box().hi[k]) return constant_like(z.front(), 0.0);
    }
    const std::vector<T> x = c.lift(z);
    return tau(j, x);
  }

 private:
  std::shared_ptr<const Manifold> m_;
  std::vector<std::vector<Bump>> bumps_;
  double s_lo_;
  double s_hi_;
  double delta_;
  PartitionAudit audit_;
};

struct PartitionOptions {
  std::size_t complement_resolution = 10000;
  std::size_t coverage_samples = 20000;
  std::size_t directions = 32;  // sphere directions for the radius search when d* >= 2
  // Centers fill the middle `center_fraction` of each image axis.
  double center_fraction = 2.0 / 3.0;
};

// Bumps at a grid of centers_per_chart points per chart axis. Each radius is
// the largest (found by bisection on sampled spheres) whose coordinate ball
// lies in the chart image and maps into the sup-norm ball of radius
// delta(x_c)/2 around the center's preimage.
inline PartitionOfUnity build_partition(std::shared_ptr<const Manifold> mp, std::size_t centers_per_chart,
                                        const PartitionOptions& opt = {}) {
  if (centers_per_chart == 0) throw PreconditionError("build_partition: centers_per_chart must be >= 1");
  const Manifold& m = *mp;
  const ComplementSampler cs(m, opt.complement_resolution);
  const std::size_t ds = m.intrinsic_dim();

  // Unit directions for the sphere check.
  std::vector<std::vector<double>> dirs;
  if (ds == 1) {
    dirs = {{1.0}, {-1.0}};
  } else {
    for (std::size_t i = 0; i < opt.directions; ++i) {
      std::vector<double> v(ds, 0.0);
      const double a = 2 * std::numbers::pi * static_cast<double>(i) / opt.directions;
      v[0] = std::cos(a);
      v[1] = std::sin(a);
      dirs.push_back(v);
    }
    // Higher intrinsic dimensions: add the coordinate axes.
    for (std::size_t k = 2; k < ds; ++k)
      for (double s : {1.0, -1.0}) {
        std::vector<double> v(ds, 0.0);
        v[k] = s;
        dirs.push_back(v);
      }
  }

  std::vector<std::vector<Bump>> bumps(m.chart_count());
  double min_delta = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m.chart_count(); ++j) {
    const Chart& c = m.chart(j);
    const Box& img = c.image();
    std::vector<std::size_t> pick(ds, 0);
    while (true) {
      std::vector<double> ctr(ds);
      for (std::size_t k = 0; k < ds; ++k)
        ctr[k] = 0.5 * (img.lo[k] + img.hi[k]) +
                 opt.center_fraction * (img.hi[k] - img.lo[k]) *
                     ((pick[k] + 0.5) / static_cast<double>(centers_per_chart) - 0.5);
      const auto xc = c.inverse(ctr);
      const double delta = cs.distance(xc, j);
      min_delta = std::min(min_delta, delta);
      auto fits = [&](double rho) {
        for (const auto& dvec : dirs) {
          // Several radii along each direction, since the image distance
          // need not grow monotonically.
          for (double frac : {0.25, 0.5, 0.75, 1.0}) {
            std::vector<double> u(ds);
            for (std::size_t k = 0; k < ds; ++k) u[k] = ctr[k] + frac * rho * dvec[k];
            if (!c.image_contains(u)) return false;
            const auto y = c.inverse(u);
            double dist = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) dist = std::max(dist, std::abs(y[i] - xc[i]));
            if (!(dist < delta / 2)) return false;
          }
        }
        return true;
      };
      double lo = 0.0, hi = img.hi[0] - img.lo[0];
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (fits(mid) ? lo : hi) = mid;
      }
      if (lo > 0.0) bumps[j].push_back({ctr, lo});
      std::size_t k = 0;
      while (k < ds && ++pick[k] == centers_per_chart) pick[k++] = 0;
      if (k == ds) break;
    }
  }

  // Coverage: sum of sigmas on a dense sample plus the parameter grid.
  PartitionOfUnity probe(mp, bumps, 1.0, 1.0, 0.0, {});
  auto pts = m.sample(opt.coverage_samples, 0x5eed);
  const auto grid = m.grid_points(opt.coverage_samples);
  pts.insert(pts.end(), grid.begin(), grid.end());
  double smin = std::numeric_limits<double>::infinity(), smax = 0.0;
  for (const auto& x : pts) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.chart_count(); ++j) s += probe.sigma<double>(j, x);
    smin = std::min(smin, s);
    smax = std::max(smax, s);
  }
  if (!(smin > 1e-12)) {
    throw PreconditionError("build_partition: bumps do not cover the manifold; increase centers_per_chart");
  }
  PartitionAudit audit;
  audit.samples = pts.size();
  audit.sigma_min = smin;
  audit.sigma_max = smax;
  audit.min_center_distance = min_delta;
  // Safety factors: the exact-division box of G must contain every value of
  // the sum, including unsampled ones.
  return PartitionOfUnity(mp, std::move(bumps), smin / 2, 2 * smax, min_delta / 2, audit);
}

}  // namespace mrelu
