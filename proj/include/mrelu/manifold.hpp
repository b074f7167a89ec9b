#pragma once

// Built-in manifolds as products of factors (circles, intervals) living in
// an intrinsic plane R^P that is embedded isometrically into R^d by a matrix
// Q with orthonormal columns.
//
// A circle factor is parameterized as (X, Y) = (sin t, cos t). It carries four
// charts centered at t0 = 0, pi/2, pi, 3pi/2 with half-width 3pi/8; chart c
// reads one reduced coordinate z (X for c = 0, 2 and Y for c = 1, 3) and
// recovers t through arcsin or arccos. The other plane coordinate has a fixed
// sign on the chart ("gate"). Coordinates are shifted so that the image of
// every chart is the open interval (1, 1 + 3pi/4).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mrelu/error.hpp"
#include "mrelu/holder.hpp"
#include "mrelu/jet.hpp"

namespace mrelu {

inline constexpr double kArcHalfWidth = 3.0 * std::numbers::pi / 8.0;

struct Factor {
  enum class Kind { circle, interval };
  Kind kind = Kind::circle;
  double a = 0.0;  // interval bounds
  double b = 1.0;
  std::size_t plane_offset = 0;

  std::size_t plane_dim() const { return kind == Kind::circle ? 2 : 1; }
  std::size_t chart_count() const { return kind == Kind::circle ? 4 : 1; }
};

// Circular distance between angles.
inline double angle_gap(double s, double t) {
  double g = std::fmod(std::abs(s - t), 2 * std::numbers::pi);
  return std::min(g, 2 * std::numbers::pi - g);
}

inline double angle_of(double X, double Y) {
  double t = std::atan2(X, Y);
  return t < 0 ? t + 2 * std::numbers::pi : t;
}

// Sign condition separating a chart from the other points with the same
// reduced coordinates: (row . x) > 0 on the chart.
struct Gate {
  std::vector<double> row;
};

class Manifold;

// Chart j of a manifold: one factor chart per factor.
class Chart {
 public:
  Chart(const Manifold& m, std::vector<std::size_t> factor_charts);

  std::size_t dim() const { return local_.size(); }
  const std::vector<std::size_t>& factor_charts() const { return local_; }

  bool member(std::span<const double> x) const;
  // psi_j for x in V_j.
  std::vector<double> forward(std::span<const double> x) const;
  // psi_j^{-1} for u in the image.
  std::vector<double> inverse(std::span<const double> u) const { return inverse_generic<double>(u); }
  // Closure of psi_j(V_j).
  const Box& image() const { return image_; }
  bool image_contains(std::span<const double> u) const {
    for (std::size_t k = 0; k < u.size(); ++k)
      if (!(u[k] > image_.lo[k] && u[k] < image_.hi[k])) return false;
    return true;
  }

  // Reduced representation: z = P x with one row per chart coordinate.
  const std::vector<std::vector<double>>& projection() const { return projection_; }
  // Range of z over the closure of V_j.
  const Box& reduced_box() const { return reduced_box_; }
  const std::vector<Gate>& gates() const { return gates_; }

  // psi_j as a function of the reduced coordinates, valid on V_j.
  template <typename T>
  std::vector<T> forward_reduced(const std::vector<T>& z) const;
  // The point of M on the chart's gated side with reduced coordinates z.
  template <typename T>
  std::vector<T> lift(const std::vector<T>& z) const;
  template <typename T>
  std::vector<T> inverse_generic(std::span<const T> u) const;

 private:
  const Manifold* m_;
  std::vector<std::size_t> local_;
  Box image_;
  Box reduced_box_;
  std::vector<std::vector<double>> projection_;
  std::vector<Gate> gates_;
};

class Manifold {
 public:
  Manifold(std::string name, std::vector<Factor> factors, std::vector<std::vector<double>> Q)
      : name_(std::move(name)), factors_(std::move(factors)), Q_(std::move(Q)) {
    std::size_t off = 0;
    for (Factor& f : factors_) {
      f.plane_offset = off;
      off += f.plane_dim();
    }
    plane_dim_ = off;
    if (Q_.empty() || Q_.front().size() != plane_dim_) throw DimensionError("Manifold: embedding has wrong shape");
    build_charts();
  }
  Manifold(const Manifold& o) : name_(o.name_), factors_(o.factors_), Q_(o.Q_), plane_dim_(o.plane_dim_) {
    build_charts();
  }
  Manifold& operator=(const Manifold& o) {
    if (this != &o) {
      name_ = o.name_;
      factors_ = o.factors_;
      Q_ = o.Q_;
      plane_dim_ = o.plane_dim_;
      build_charts();
    }
    return *this;
  }

  const std::string& name() const { return name_; }
  std::size_t ambient_dim() const { return Q_.size(); }
  std::size_t intrinsic_dim() const { return factors_.size(); }
  std::size_t plane_dim() const { return plane_dim_; }
  const std::vector<Factor>& factors() const { return factors_; }
  const std::vector<std::vector<double>>& embedding() const { return Q_; }
  const std::vector<Chart>& charts() const { return charts_; }
  std::size_t chart_count() const { return charts_.size(); }
  const Chart& chart(std::size_t j) const { return charts_.at(j); }

  // Intrinsic plane coordinates w = Q^T x.
  std::vector<double> plane(std::span<const double> x) const {
    std::vector<double> w(plane_dim_, 0.0);
    for (std::size_t i = 0; i < Q_.size(); ++i)
      for (std::size_t k = 0; k < plane_dim_; ++k) w[k] += Q_[i][k] * x[i];
    return w;
  }
  template <typename T>
  std::vector<T> embed(const std::vector<T>& w) const {
    std::vector<T> x;
    for (std::size_t i = 0; i < Q_.size(); ++i) {
      T s = constant_like(w.front(), 0.0);
      for (std::size_t k = 0; k < plane_dim_; ++k)
        if (Q_[i][k] != 0.0) s = s + Q_[i][k] * w[k];
      x.push_back(s);
    }
    return x;
  }

  // Point from factor parameters (angle t for circles, position for intervals).
  std::vector<double> point(std::span<const double> params) const {
    std::vector<double> w(plane_dim_);
    for (std::size_t f = 0; f < factors_.size(); ++f) {
      const Factor& F = factors_[f];
      if (F.kind == Factor::Kind::circle) {
        w[F.plane_offset] = std::sin(params[f]);
        w[F.plane_offset + 1] = std::cos(params[f]);
      } else {
        w[F.plane_offset] = params[f];
      }
    }
    return embed(w);
  }

  // Factor parameters of a point on M.
  std::vector<double> params(std::span<const double> x) const {
    const auto w = plane(x);
    std::vector<double> p(factors_.size());
    for (std::size_t f = 0; f < factors_.size(); ++f) {
      const Factor& F = factors_[f];
      p[f] = F.kind == Factor::Kind::circle ? angle_of(w[F.plane_offset], w[F.plane_offset + 1]) : w[F.plane_offset];
    }
    return p;
  }

  // Uniform in the factor parameters; deterministic given the seed.
  std::vector<std::vector<double>> sample(std::size_t n, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> out;
    out.reserve(n);
    std::vector<double> p(factors_.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < factors_.size(); ++f) {
        const double u = std::ldexp(static_cast<double>(rng() >> 11), -53);
        const Factor& F = factors_[f];
        p[f] = F.kind == Factor::Kind::circle ? 2 * std::numbers::pi * u : F.a + (F.b - F.a) * u;
      }
      out.push_back(point(p));
    }
    return out;
  }

  // Parameter grid with about `total` points (per-factor resolution
  // total^{1/d*}), including every chart boundary parameter.
  std::vector<std::vector<double>> grid_points(std::size_t total) const {
    const auto per = static_cast<std::size_t>(
        std::ceil(std::pow(static_cast<double>(total), 1.0 / static_cast<double>(factors_.size()))));
    std::vector<std::vector<double>> axes;
    for (const Factor& F : factors_) {
      std::vector<double> ax;
      if (F.kind == Factor::Kind::circle) {
        for (std::size_t i = 0; i < per; ++i) ax.push_back(2 * std::numbers::pi * static_cast<double>(i) / per);
        for (int c = 0; c < 4; ++c)
          for (double s : {-1.0, 1.0}) {
            double t = c * std::numbers::pi / 2 + s * kArcHalfWidth;
            if (t < 0) t += 2 * std::numbers::pi;
            ax.push_back(t);
          }
      } else {
        for (std::size_t i = 0; i < per; ++i) ax.push_back(F.a + (F.b - F.a) * static_cast<double>(i) / (per - 1));
      }
      std::sort(ax.begin(), ax.end());
      axes.push_back(std::move(ax));
    }
    std::vector<std::vector<double>> out;
    std::vector<std::size_t> pick(axes.size(), 0);
    std::vector<double> p(axes.size());
    while (true) {
      for (std::size_t f = 0; f < axes.size(); ++f) p[f] = axes[f][pick[f]];
      out.push_back(point(p));
      std::size_t f = 0;
      while (f < axes.size() && ++pick[f] == axes[f].size()) pick[f++] = 0;
      if (f == axes.size()) break;
    }
    return out;
  }

  bool on_manifold(std::span<const double> x, double tol = 1e-9) const {
    const auto w = plane(x);
    const auto back = embed(w);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (std::abs(back[i] - x[i]) > tol) return false;
    for (const Factor& F : factors_) {
      if (F.kind == Factor::Kind::circle) {
        const double X = w[F.plane_offset], Y = w[F.plane_offset + 1];
        if (std::abs(X * X + Y * Y - 1.0) > tol) return false;
      } else if (w[F.plane_offset] < F.a - tol || w[F.plane_offset] > F.b + tol) {
        return false;
      }
    }
    return true;
  }

 private:
  void build_charts() {
    charts_.clear();
    std::vector<std::size_t> pick(factors_.size(), 0);
    while (true) {
      charts_.emplace_back(*this, pick);
      // Last factor varies fastest: chart index = k * r_B + l for products.
      std::size_t f = factors_.size();
      while (f-- > 0) {
        if (++pick[f] < factors_[f].chart_count()) break;
        pick[f] = 0;
      }
      if (f == static_cast<std::size_t>(-1)) break;
    }
  }

  std::string name_;
  std::vector<Factor> factors_;
  std::vector<std::vector<double>> Q_;
  std::size_t plane_dim_ = 0;
  std::vector<Chart> charts_;
};

// ---- Chart implementation ----

inline Chart::Chart(const Manifold& m, std::vector<std::size_t> factor_charts)
    : m_(&m), local_(std::move(factor_charts)) {
  const auto& Q = m.embedding();
  const double sa = std::sin(kArcHalfWidth);
  for (std::size_t f = 0; f < local_.size(); ++f) {
    const Factor& F = m.factors()[f];
    std::vector<double> row(Q.size());
    if (F.kind == Factor::Kind::circle) {
      const std::size_t c = local_[f];
      const std::size_t zc = F.plane_offset + (c % 2 == 0 ? 0 : 1);
      const std::size_t gc = F.plane_offset + (c % 2 == 0 ? 1 : 0);
      const double gs = (c == 0 || c == 1) ? 1.0 : -1.0;
      for (std::size_t i = 0; i < Q.size(); ++i) row[i] = Q[i][zc];
      std::vector<double> grow(Q.size());
      for (std::size_t i = 0; i < Q.size(); ++i) grow[i] = gs * Q[i][gc];
      gates_.push_back({std::move(grow)});
      image_.lo.push_back(1.0);
      image_.hi.push_back(1.0 + 2 * kArcHalfWidth);
      reduced_box_.lo.push_back(-sa);
      reduced_box_.hi.push_back(sa);
    } else {
      for (std::size_t i = 0; i < Q.size(); ++i) row[i] = Q[i][F.plane_offset];
      image_.lo.push_back(1.0);
      image_.hi.push_back(1.0 + F.b - F.a);
      reduced_box_.lo.push_back(F.a);
      reduced_box_.hi.push_back(F.b);
    }
    projection_.push_back(std::move(row));
  }
}

inline bool Chart::member(std::span<const double> x) const {
  const auto w = m_->plane(x);
  for (std::size_t f = 0; f < local_.size(); ++f) {
    const Factor& F = m_->factors()[f];
    if (F.kind == Factor::Kind::circle) {
      const double t = angle_of(w[F.plane_offset], w[F.plane_offset + 1]);
      if (!(angle_gap(t, local_[f] * std::numbers::pi / 2) < kArcHalfWidth)) return false;
    } else if (w[F.plane_offset] < F.a || w[F.plane_offset] > F.b) {
      return false;
    }
  }
  return true;
}

inline std::vector<double> Chart::forward(std::span<const double> x) const {
  std::vector<double> z(local_.size(), 0.0);
  for (std::size_t k = 0; k < local_.size(); ++k)
    for (std::size_t i = 0; i < x.size(); ++i) z[k] += projection_[k][i] * x[i];
  return forward_reduced(z);
}

template <typename T>
std::vector<T> Chart::forward_reduced(const std::vector<T>& z) const {
  using std::acos;
  using std::asin;
  const double a = kArcHalfWidth;
  const double pi = std::numbers::pi;
  std::vector<T> u;
  for (std::size_t f = 0; f < local_.size(); ++f) {
    const Factor& F = m_->factors()[f];
    if (F.kind == Factor::Kind::interval) {
      u.push_back(z[f] + (1.0 - F.a));
      continue;
    }
    switch (local_[f]) {
      case 0: u.push_back(asin(z[f]) + (a + 1.0)); break;
      case 1: u.push_back(acos(z[f]) + (a + 1.0 - pi / 2)); break;
      case 2: u.push_back((a + 1.0) - asin(z[f])); break;
      default: u.push_back((pi / 2 + a + 1.0) - acos(z[f])); break;
    }
  }
  return u;
}

template <typename T>
std::vector<T> Chart::lift(const std::vector<T>& z) const {
  using std::sqrt;
  std::vector<T> w(m_->plane_dim(), constant_like(z.front(), 0.0));
  for (std::size_t f = 0; f < local_.size(); ++f) {
    const Factor& F = m_->factors()[f];
    if (F.kind == Factor::Kind::interval) {
      w[F.plane_offset] = z[f];
      continue;
    }
    const double v = value_of(z[f]);
    const T other = (v * v < 1.0) ? sqrt(1.0 - z[f] * z[f]) : constant_like(z[f], 0.0);
    const std::size_t c = local_[f];
    const double s = (c == 0 || c == 1) ? 1.0 : -1.0;
    if (c % 2 == 0) {
      w[F.plane_offset] = z[f];
      w[F.plane_offset + 1] = s * other;
    } else {
      w[F.plane_offset] = s * other;
      w[F.plane_offset + 1] = z[f];
    }
  }
  return m_->embed(w);
}

template <typename T>
std::vector<T> Chart::inverse_generic(std::span<const T> u) const {
  using std::cos;
  using std::sin;
  std::vector<T> w(m_->plane_dim(), constant_like(u.front(), 0.0));
  for (std::size_t f = 0; f < local_.size(); ++f) {
    const Factor& F = m_->factors()[f];
    if (F.kind == Factor::Kind::interval) {
      w[F.plane_offset] = u[f] + (F.a - 1.0);
      continue;
    }
    const double t_lo = local_[f] * std::numbers::pi / 2 - kArcHalfWidth;
    const T t = u[f] + (t_lo - 1.0);
    w[F.plane_offset] = sin(t);
    w[F.plane_offset + 1] = cos(t);
  }
  return m_->embed(w);
}

// ---- Built-in manifolds ----

inline Manifold make_circle() { return Manifold("circle", {Factor{}}, {{1.0, 0.0}, {0.0, 1.0}}); }

inline Manifold make_interval(double a, double b) {
  if (!(a < b)) throw PreconditionError("make_interval: need a < b");
  Factor F;
  F.kind = Factor::Kind::interval;
  F.a = a;
  F.b = b;
  return Manifold("interval", {F}, {{1.0}});
}

// d x k matrix with orthonormal columns from Gram-Schmidt on Gaussian vectors.
inline std::vector<std::vector<double>> random_orthonormal(std::size_t d, std::size_t k, std::uint64_t seed) {
  if (k > d) throw PreconditionError("random_orthonormal: k > d");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> cols;
  while (cols.size() < k) {
    std::vector<double> v(d);
    for (double& x : v) x = normal(rng);
    for (const auto& c : cols) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += c[i] * v[i];
      for (std::size_t i = 0; i < d; ++i) v[i] -= dot * c[i];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-8) continue;
    for (double& x : v) x /= n;
    cols.push_back(std::move(v));
  }
  std::vector<std::vector<double>> Q(d, std::vector<double>(k));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < k; ++j) Q[i][j] = cols[j][i];
  return Q;
}

inline Manifold make_circle_embedded(std::size_t d, std::uint64_t seed = 7) {
  if (d < 2 || d > 16) throw PreconditionError("make_circle_embedded: ambient dimension must be in [2, 16]");
  return Manifold("circle_embedded", {Factor{}}, random_orthonormal(d, 2, seed));
}

inline Manifold make_product(const Manifold& A, const Manifold& B) {
  std::vector<Factor> f = A.factors();
  f.insert(f.end(), B.factors().begin(), B.factors().end());
  const std::size_t da = A.ambient_dim(), db = B.ambient_dim();
  const std::size_t pa = A.plane_dim(), pb = B.plane_dim();
  std::vector<std::vector<double>> Q(da + db, std::vector<double>(pa + pb, 0.0));
  for (std::size_t i = 0; i < da; ++i)
    for (std::size_t k = 0; k < pa; ++k) Q[i][k] = A.embedding()[i][k];
  for (std::size_t i = 0; i < db; ++i)
    for (std::size_t k = 0; k < pb; ++k) Q[da + i][pa + k] = B.embedding()[i][k];
  return Manifold(A.name() + "x" + B.name(), std::move(f), std::move(Q));
}

inline Manifold make_torus() {
  Manifold t = make_product(make_circle(), make_circle());
  return Manifold("torus", t.factors(), t.embedding());
}

inline Manifold make_manifold(const std::string& name, std::size_t ambient = 10, std::uint64_t seed = 7) {
  if (name == "circle") return make_circle();
  if (name == "torus") return make_torus();
  if (name == "circle_embedded") return make_circle_embedded(ambient, seed);
  throw PreconditionError("unknown manifold '" + name + "' (expected circle, torus or circle_embedded)");
}

// ---- Margin sets ----

// Dense sample of M \ V_j for sup-norm distance queries.
class ComplementSampler {
 public:
  ComplementSampler(const Manifold& m, std::size_t resolution = 10000) {
    const auto grid = m.grid_points(resolution);
    dim_ = m.ambient_dim();
    for (std::size_t j = 0; j < m.chart_count(); ++j) {
      std::vector<double> flat;
      for (const auto& x : grid)
        if (!m.chart(j).member(x)) flat.insert(flat.end(), x.begin(), x.end());
      points_.push_back(std::move(flat));
    }
  }

  // Estimated |x - (M \ V_j)|_inf; infinity when the complement is empty.
  double distance(std::span<const double> x, std::size_t j) const {
    const auto& p = points_[j];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < p.size(); s += dim_) {
      double d = 0.0;
      for (std::size_t i = 0; i < dim_ && d < best; ++i) d = std::max(d, std::abs(p[s + i] - x[i]));
      best = std::min(best, d);
    }
    return best;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> points_;
};

inline bool in_margin(const Manifold& m, const ComplementSampler& cs, std::span<const double> x, std::size_t j,
                      double delta) {
  if (!m.on_manifold(x, 1e-8) || !m.chart(j).member(x)) return false;
  if (delta <= 0.0) return true;
  return cs.distance(x, j) >= delta;
}

}  // namespace mrelu
