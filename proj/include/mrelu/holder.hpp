#pragma once

// Hölder targets, local Taylor polynomials and the grid interpolation scheme
// x -> sum_l P_{z(l)} g(x) prod_j (1 - M|x_j - l_j/M|)_+ used as the
// function-level oracle for the network realization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "mrelu/error.hpp"
#include "mrelu/jet.hpp"

namespace mrelu {

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const { return lo.size(); }
  bool contains(std::span<const double> x, double tol = 0.0) const {
    for (std::size_t j = 0; j < lo.size(); ++j)
      if (x[j] < lo[j] - tol || x[j] > hi[j] + tol) return false;
    return true;
  }
  static Box cube(std::size_t d, double lo, double hi) {
    return {std::vector<double>(d, lo), std::vector<double>(d, hi)};
  }
};

enum class TaylorSource { analytic, finite_difference };

// Target function with Hölder metadata. `eval` returns out_dim values;
// `jet` (analytic mode) returns the same values as truncated Taylor series.
struct HolderFunction {
  std::string name;
  std::size_t dim = 1;
  std::size_t out_dim = 1;
  double beta = 1.0;
  double K = 1.0;
  Box domain;
  // Optional finer membership test; the box is always a bounding box.
  std::function<bool(std::span<const double>)> inside;
  std::function<std::vector<double>(std::span<const double>)> eval;
  std::function<std::vector<Jet>(std::span<const Jet>)> jet;
  TaylorSource source = TaylorSource::analytic;
  double fd_step = 1e-4;

  bool contains(std::span<const double> x) const {
    if (x.size() != dim || !domain.contains(x)) return false;
    return !inside || inside(x);
  }
  double eval1(std::span<const double> x) const { return eval(x).front(); }
};

// Largest integer strictly smaller than beta.
inline unsigned taylor_degree(double beta) { return static_cast<unsigned>(std::ceil(beta)) - 1; }

namespace detail {

template <typename T, typename F>
std::vector<T> call_generic(const F& f, std::span<const T> x) {
  std::vector<T> v(x.begin(), x.end());
  auto r = f(v);
  if constexpr (std::is_same_v<std::decay_t<decltype(r)>, T>) {
    return {r};
  } else {
    return std::vector<T>(r.begin(), r.end());
  }
}

}  // namespace detail

// Wraps a generic callable f(const std::vector<T>&) -> T or std::vector<T>,
// usable with T = double and T = Jet.
template <typename F>
HolderFunction make_holder(std::string name, std::size_t dim, double beta, double K, Box domain, F f) {
  if (!(beta > 0.0) || !(K > 0.0)) throw PreconditionError("make_holder: beta and K must be positive");
  HolderFunction h;
  h.name = std::move(name);
  h.dim = dim;
  h.beta = beta;
  h.K = K;
  h.domain = std::move(domain);
  h.eval = [f](std::span<const double> x) { return detail::call_generic<double>(f, x); };
  h.jet = [f](std::span<const Jet> x) { return detail::call_generic<Jet>(f, x); };
  h.out_dim = h.eval(std::vector<double>(h.domain.lo)).size();
  return h;
}

// Same function with jets dropped, forcing central finite differences.
inline HolderFunction as_finite_difference(HolderFunction f, double h) {
  f.source = TaylorSource::finite_difference;
  f.fd_step = h;
  f.jet = nullptr;
  return f;
}

// g(u) = f(R (u - 1/2)): the target seen through the input rescaling.
inline HolderFunction rescaled(const HolderFunction& f, double R) {
  HolderFunction g = f;
  g.name = f.name + "@T";
  for (std::size_t j = 0; j < f.dim; ++j) {
    g.domain.lo[j] = f.domain.lo[j] / R + 0.5;
    g.domain.hi[j] = f.domain.hi[j] / R + 0.5;
  }
  auto back = [R](std::span<const double> u) {
    std::vector<double> x(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) x[j] = R * (u[j] - 0.5);
    return x;
  };
  if (f.inside) g.inside = [in = f.inside, back](std::span<const double> u) { return in(back(u)); };
  g.eval = [e = f.eval, back](std::span<const double> u) { return e(back(u)); };
  if (f.jet) {
    g.jet = [j = f.jet, R](std::span<const Jet> u) {
      std::vector<Jet> x;
      for (const Jet& v : u) x.push_back((v - 0.5) * R);
      return j(x);
    };
  }
  g.fd_step = f.fd_step / R;
  // Hölder constant in the new variables: derivatives of order k scale by R^k.
  g.K = f.K * std::pow(std::max(1.0, R), f.beta);
  return g;
}

// sum_{|a| <= deg} coeff[a] (x - anchor)^a.
struct TaylorPolynomial {
  std::vector<double> anchor;
  std::vector<MultiIndex> index;
  std::vector<double> coeff;

  unsigned degree() const {
    unsigned d = 0;
    for (const auto& a : index) d = std::max(d, mrelu::degree(a));
    return d;
  }

  double operator()(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < index.size(); ++i) {
      double t = coeff[i];
      for (std::size_t j = 0; j < anchor.size(); ++j)
        for (unsigned p = 0; p < index[i][j]; ++p) t *= x[j] - anchor[j];
      s += t;
    }
    return s;
  }

  // Coefficients of the same polynomial in plain monomials x^a, same index order.
  std::vector<double> monomial_coefficients() const {
    std::vector<double> out(index.size(), 0.0);
    std::map<MultiIndex, std::size_t> pos;
    for (std::size_t i = 0; i < index.size(); ++i) pos[index[i]] = i;
    for (std::size_t i = 0; i < index.size(); ++i) {
      // prod_j (x_j - a_j)^{k_j} = prod_j sum_{t} C(k_j, t) x_j^t (-a_j)^{k_j - t}
      const MultiIndex& k = index[i];
      std::vector<unsigned> t(k.size(), 0);
      while (true) {
        double w = coeff[i];
        for (std::size_t j = 0; j < k.size(); ++j) {
          double binom = 1.0;
          for (unsigned q = 0; q < t[j]; ++q) binom = binom * (k[j] - q) / (q + 1);
          w *= binom * std::pow(-anchor[j], static_cast<double>(k[j] - t[j]));
        }
        out[pos.at(t)] += w;
        std::size_t j = 0;
        while (j < k.size() && t[j] == k[j]) t[j++] = 0;
        if (j == k.size()) break;
        ++t[j];
      }
    }
    return out;
  }
};

namespace detail {

// Central-difference estimate of d^a f(x) for |a| <= 2.
inline double fd_derivative(const HolderFunction& f, std::size_t comp, std::span<const double> x,
                            const MultiIndex& a) {
  const double h = f.fd_step;
  std::vector<std::size_t> dirs;
  for (std::size_t j = 0; j < a.size(); ++j)
    for (unsigned p = 0; p < a[j]; ++p) dirs.push_back(j);
  std::vector<double> y(x.begin(), x.end());
  auto at = [&](std::span<const double> z) { return f.eval(z)[comp]; };
  if (dirs.empty()) return at(y);
  if (dirs.size() == 1) {
    const std::size_t j = dirs[0];
    y[j] = x[j] + h;
    const double p = at(y);
    y[j] = x[j] - h;
    return (p - at(y)) / (2 * h);
  }
  if (dirs.size() == 2) {
    const std::size_t i = dirs[0], j = dirs[1];
    if (i == j) {
      y[i] = x[i] + h;
      const double p = at(y);
      y[i] = x[i] - h;
      const double m = at(y);
      return (p - 2 * at(x) + m) / (h * h);
    }
    double s = 0.0;
    for (int si : {1, -1})
      for (int sj : {1, -1}) {
        y[i] = x[i] + si * h;
        y[j] = x[j] + sj * h;
        s += si * sj * at(y);
      }
    return s / (4 * h * h);
  }
  throw PreconditionError("finite-difference Taylor mode supports degree <= 2 only");
}

}  // namespace detail

// Taylor polynomial of degree taylor_degree(beta) of output `comp` at a.
inline TaylorPolynomial taylor_poly(const HolderFunction& f, std::span<const double> a, std::size_t comp = 0) {
  if (!f.contains(a)) throw DomainError("taylor_poly: anchor outside the domain of " + f.name);
  const unsigned deg = taylor_degree(f.beta);
  TaylorPolynomial p;
  p.anchor.assign(a.begin(), a.end());
  if (f.jet) {
    const auto vars = Jet::variables(a, deg);
    const std::vector<Jet> out = f.jet(vars);
    p.index = out[comp].indices();
    p.coeff = out[comp].coefficients();
  } else {
    p.index = multi_indices(f.dim, deg);
    for (const auto& idx : p.index) p.coeff.push_back(detail::fd_derivative(f, comp, a, idx) / factorial(idx));
  }
  return p;
}

// Uniform grid {l / M : l in {0..M}^d}; points are addressed by a flat index
// with the first coordinate varying slowest.
class Grid {
 public:
  Grid(std::size_t M, std::size_t d) : M_(M), d_(d) {
    if (M == 0) throw PreconditionError("Grid: M must be >= 1");
  }
  std::size_t M() const { return M_; }
  std::size_t dim() const { return d_; }
  std::size_t size() const {
    std::size_t n = 1;
    for (std::size_t j = 0; j < d_; ++j) n *= M_ + 1;
    return n;
  }
  std::vector<std::size_t> index(std::size_t flat) const {
    std::vector<std::size_t> l(d_);
    for (std::size_t j = d_; j-- > 0;) {
      l[j] = flat % (M_ + 1);
      flat /= M_ + 1;
    }
    return l;
  }
  std::size_t flat(std::span<const std::size_t> l) const {
    std::size_t f = 0;
    for (std::size_t j = 0; j < d_; ++j) f = f * (M_ + 1) + l[j];
    return f;
  }
  std::vector<double> point(std::span<const std::size_t> l) const {
    std::vector<double> x(d_);
    for (std::size_t j = 0; j < d_; ++j) x[j] = static_cast<double>(l[j]) / static_cast<double>(M_);
    return x;
  }

 private:
  std::size_t M_;
  std::size_t d_;
};

// M = max{M : (M+1)^d <= N}.
inline std::size_t grid_size_for(std::size_t N, std::size_t d) {
  std::size_t M = 0;
  while (true) {
    double n = std::pow(static_cast<double>(M + 2), static_cast<double>(d));
    if (n > static_cast<double>(N)) break;
    ++M;
  }
  return M;
}

// In-domain grid point closest to grid index l in sup norm; ties go to the
// lexicographically smallest index.
inline std::vector<std::size_t> nearest_indomain(std::span<const std::size_t> l, const HolderFunction& f,
                                                 const Grid& grid) {
  const std::size_t d = grid.dim();
  const double M = static_cast<double>(grid.M());
  // Per-axis range of grid indices inside the bounding box.
  std::vector<std::size_t> lo(d), hi(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double a = std::max(0.0, std::ceil(f.domain.lo[j] * M - 1e-9));
    const double b = std::min(M, std::floor(f.domain.hi[j] * M + 1e-9));
    if (a > b) throw PreconditionError("grid too coarse for U");
    lo[j] = static_cast<std::size_t>(a);
    hi[j] = static_cast<std::size_t>(b);
  }
  auto ok = [&](std::span<const std::size_t> z) { return !f.inside || f.inside(grid.point(z)); };
  if (!f.inside) {
    // Box: the minimal sup distance D is the largest per-axis gap; the
    // lexicographically smallest minimizer takes the lowest admissible value
    // on each axis.
    std::size_t D = 0;
    for (std::size_t j = 0; j < d; ++j) {
      if (l[j] < lo[j]) D = std::max(D, lo[j] - l[j]);
      if (l[j] > hi[j]) D = std::max(D, l[j] - hi[j]);
    }
    std::vector<std::size_t> z(d);
    for (std::size_t j = 0; j < d; ++j) z[j] = std::max(lo[j], l[j] >= D ? l[j] - D : 0);
    return z;
  }
  std::vector<std::size_t> best;
  std::size_t best_dist = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> z(lo);
  while (true) {
    std::size_t dist = 0;
    for (std::size_t j = 0; j < d; ++j) dist = std::max(dist, l[j] > z[j] ? l[j] - z[j] : z[j] - l[j]);
    if (dist < best_dist && ok(z)) {
      best_dist = dist;
      best = z;
    }
    std::size_t j = d;
    while (j-- > 0) {
      if (z[j] < hi[j]) {
        ++z[j];
        break;
      }
      z[j] = lo[j];
    }
    if (j == static_cast<std::size_t>(-1)) break;
  }
  if (best.empty()) throw PreconditionError("grid too coarse for U");
  return best;
}

struct HatWeight {
  std::size_t flat = 0;
  double weight = 0.0;
};

// Grid points whose hat prod_j (1 - M|x_j - l_j/M|)_+ is nonzero at x, with weights.
inline std::vector<HatWeight> hat_weights(const Grid& grid, std::span<const double> x) {
  const std::size_t d = grid.dim();
  const double M = static_cast<double>(grid.M());
  std::vector<std::vector<std::pair<std::size_t, double>>> axis(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double t = std::clamp(x[j], 0.0, 1.0) * M;
    const double base = std::min(std::floor(t), M - 1.0);
    for (double c : {base, base + 1.0}) {
      const double w = std::max(0.0, 1.0 - std::abs(t - c));
      if (w > 0.0) axis[j].push_back({static_cast<std::size_t>(c), w});
    }
  }
  std::vector<HatWeight> out;
  std::vector<std::size_t> pick(d, 0), l(d);
  while (true) {
    double w = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      l[j] = axis[j][pick[j]].first;
      w *= axis[j][pick[j]].second;
    }
    out.push_back({grid.flat(l), w});
    std::size_t j = 0;
    while (j < d && ++pick[j] == axis[j].size()) pick[j++] = 0;
    if (j == d) break;
  }
  return out;
}

// Evaluates the scheme, caching each anchor's Taylor polynomial.
class LocalScheme {
 public:
  LocalScheme(const HolderFunction& f, Grid grid, std::size_t comp = 0) : f_(f), grid_(grid), comp_(comp) {
    if (f.dim != grid.dim()) throw DimensionError("LocalScheme: grid and function dimensions differ");
  }

  const Grid& grid() const { return grid_; }

  const TaylorPolynomial& anchor_poly(std::size_t flat) {
    auto it = cache_.find(flat);
    if (it != cache_.end()) return it->second;
    const auto l = grid_.index(flat);
    const auto z = nearest_indomain(l, f_, grid_);
    return cache_.emplace(flat, taylor_poly(f_, grid_.point(z), comp_)).first->second;
  }

  double operator()(std::span<const double> x) {
    double s = 0.0;
    for (const HatWeight& h : hat_weights(grid_, x)) s += h.weight * anchor_poly(h.flat)(x);
    return s;
  }

 private:
  HolderFunction f_;
  Grid grid_;
  std::size_t comp_;
  std::map<std::size_t, TaylorPolynomial> cache_;
};

inline double local_scheme_eval(const HolderFunction& f, const Grid& grid, std::span<const double> x,
                                std::size_t comp = 0) {
  LocalScheme s(f, grid, comp);
  return s(x);
}

// Sampled estimate of the Hölder radius: the largest |d^a f| over the points
// for |a| <= ceil(beta) (for integer beta the top order bounds the Lipschitz
// constant of the degree floor(beta) derivatives). Needs analytic jets.
inline double estimate_holder_constant(const HolderFunction& f, const std::vector<std::vector<double>>& points) {
  if (!f.jet) throw PreconditionError("estimate_holder_constant: analytic jets required");
  const auto order = static_cast<unsigned>(std::ceil(f.beta));
  double K = 0.0;
  for (const auto& x : points) {
    const auto out = f.jet(Jet::variables(x, order));
    for (const Jet& j : out)
      for (std::size_t i = 0; i < j.coefficients().size(); ++i)
        K = std::max(K, factorial(j.indices()[i]) * std::abs(j.coefficient(i)));
  }
  return K;
}

// Sampled sup-norm Lipschitz constant: max of sum_k |d_k f| over points.
inline double estimate_lipschitz(const HolderFunction& f, const std::vector<std::vector<double>>& points) {
  if (!f.jet) throw PreconditionError("estimate_lipschitz: analytic jets required");
  double L = 0.0;
  for (const auto& x : points)
    for (const Jet& j : f.jet(Jet::variables(x, 1))) {
      double s = 0.0;
      for (std::size_t i = 0; i < j.coefficients().size(); ++i)
        if (degree(j.indices()[i]) == 1) s += std::abs(j.coefficient(i));
      L = std::max(L, s);
    }
  return L;
}

}  // namespace mrelu
