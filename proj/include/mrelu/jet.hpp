#pragma once

// Truncated multivariate Taylor arithmetic. A Jet in `dim` variables of
// order n holds the coefficients c_a of sum_{|a| <= n} c_a h^a, so c_a equals
// (d^a f)(x0) / a!. Functions written once as generic lambdas can be
// evaluated on doubles or on jets.

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "mrelu/error.hpp"

namespace mrelu {

using MultiIndex = std::vector<unsigned>;

inline unsigned degree(const MultiIndex& a) {
  unsigned s = 0;
  for (unsigned v : a) s += v;
  return s;
}

inline double factorial(const MultiIndex& a) {
  double f = 1.0;
  for (unsigned v : a)
    for (unsigned k = 2; k <= v; ++k) f *= k;
  return f;
}

// All multi-indices in `dim` variables with degree <= order, graded, then
// lexicographically descending inside a degree (x before y).
inline std::vector<MultiIndex> multi_indices(std::size_t dim, unsigned order) {
  std::vector<MultiIndex> out;
  for (unsigned deg = 0; deg <= order; ++deg) {
    MultiIndex a(dim, 0);
    auto rec = [&](auto&& self, std::size_t j, unsigned left) -> void {
      if (j + 1 == dim) {
        a[j] = left;
        out.push_back(a);
        return;
      }
      for (unsigned v = left + 1; v-- > 0;) {
        a[j] = v;
        self(self, j + 1, left - v);
      }
    };
    if (dim == 0) {
      if (deg == 0) out.push_back({});
      continue;
    }
    rec(rec, 0, deg);
  }
  return out;
}

namespace detail {

struct JetTable {
  std::vector<MultiIndex> index;
  // For each pair (i, j) with deg_i + deg_j <= order: (i, j, position of sum).
  std::vector<std::array<std::size_t, 3>> products;
};

inline std::shared_ptr<const JetTable> jet_table(std::size_t dim, unsigned order) {
  static std::mutex mu;
  static std::map<std::pair<std::size_t, unsigned>, std::shared_ptr<const JetTable>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{dim, order}];
  if (slot) return slot;
  auto t = std::make_shared<JetTable>();
  t->index = multi_indices(dim, order);
  std::map<MultiIndex, std::size_t> pos;
  for (std::size_t i = 0; i < t->index.size(); ++i) pos[t->index[i]] = i;
  for (std::size_t i = 0; i < t->index.size(); ++i) {
    for (std::size_t j = 0; j < t->index.size(); ++j) {
      if (degree(t->index[i]) + degree(t->index[j]) > order) continue;
      MultiIndex s = t->index[i];
      for (std::size_t k = 0; k < dim; ++k) s[k] += t->index[j][k];
      t->products.push_back({i, j, pos.at(s)});
    }
  }
  slot = std::move(t);
  return slot;
}

}  // namespace detail

class Jet {
 public:
  Jet() = default;
  Jet(std::size_t dim, unsigned order, double value = 0.0)
      : table_(detail::jet_table(dim, order)), dim_(dim), order_(order), c_(table_->index.size(), 0.0) {
    c_[0] = value;
  }

  // The k-th coordinate function around x0[k].
  static Jet variable(std::size_t dim, unsigned order, std::size_t k, double x0) {
    Jet j(dim, order, x0);
    if (order >= 1) j.c_[1 + k] = 1.0;
    return j;
  }

  static std::vector<Jet> variables(std::span<const double> x0, unsigned order) {
    std::vector<Jet> v;
    for (std::size_t k = 0; k < x0.size(); ++k) v.push_back(variable(x0.size(), order, k, x0[k]));
    return v;
  }

  std::size_t dim() const { return dim_; }
  unsigned order() const { return order_; }
  double value() const { return c_[0]; }
  const std::vector<MultiIndex>& indices() const { return table_->index; }
  const std::vector<double>& coefficients() const { return c_; }
  double coefficient(std::size_t i) const { return c_[i]; }

  Jet constant_like(double v) const { return Jet(dim_, order_, v); }

  Jet& operator+=(const Jet& o) {
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator+=(double v) {
    c_[0] += v;
    return *this;
  }
  Jet& operator*=(double v) {
    for (double& x : c_) x *= v;
    return *this;
  }
  Jet operator-() const {
    Jet r = *this;
    r *= -1.0;
    return r;
  }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r(a.dim_, a.order_, 0.0);
    for (const auto& p : a.table_->products) r.c_[p[2]] += a.c_[p[0]] * b.c_[p[1]];
    return r;
  }

  // sum_k f[k] (this - value)^k for univariate Taylor coefficients f.
  Jet compose(std::span<const double> f) const {
    Jet h = *this;
    h.c_[0] = 0.0;
    Jet r(dim_, order_, f.empty() ? 0.0 : f.back());
    for (std::size_t k = f.size(); k-- > 1;) {
      r = r * h;
      r.c_[0] += f[k - 1];
    }
    return r;
  }

 private:
  std::shared_ptr<const detail::JetTable> table_;
  std::size_t dim_ = 0;
  unsigned order_ = 0;
  std::vector<double> c_;
};

inline Jet operator+(Jet a, const Jet& b) { return a += b; }
inline Jet operator-(Jet a, const Jet& b) { return a -= b; }
inline Jet operator+(Jet a, double b) { return a += b; }
inline Jet operator+(double a, Jet b) { return b += a; }
inline Jet operator-(Jet a, double b) { return a += -b; }
inline Jet operator-(double a, const Jet& b) { return -b + a; }
inline Jet operator*(Jet a, double b) { return a *= b; }
inline Jet operator*(double a, Jet b) { return b *= a; }

// Univariate Taylor coefficient series of elementary functions at a, to order n.
namespace series {

inline std::vector<double> exp(double a, unsigned n) {
  std::vector<double> f(n + 1);
  double c = std::exp(a);
  for (unsigned k = 0; k <= n; ++k) {
    f[k] = c;
    c /= (k + 1);
  }
  return f;
}

inline std::vector<double> log(double a, unsigned n) {
  if (!(a > 0.0)) throw DomainError("log of nonpositive value");
  std::vector<double> f(n + 1);
  f[0] = std::log(a);
  double p = 1.0;
  for (unsigned k = 1; k <= n; ++k) {
    p /= a;
    f[k] = (k % 2 ? 1.0 : -1.0) * p / k;
  }
  return f;
}

// Generalized binomial series of x^p.
inline std::vector<double> pow(double a, double p, unsigned n) {
  std::vector<double> f(n + 1);
  double binom = 1.0;
  for (unsigned k = 0; k <= n; ++k) {
    f[k] = binom * std::pow(a, p - k);
    binom *= (p - k) / (k + 1);
  }
  return f;
}

inline std::vector<double> sin(double a, unsigned n) {
  std::vector<double> f(n + 1);
  double fact = 1.0;
  for (unsigned k = 0; k <= n; ++k) {
    if (k > 0) fact *= k;
    f[k] = std::sin(a + k * std::numbers::pi / 2) / fact;
  }
  return f;
}

inline std::vector<double> cos(double a, unsigned n) {
  std::vector<double> f(n + 1);
  double fact = 1.0;
  for (unsigned k = 0; k <= n; ++k) {
    if (k > 0) fact *= k;
    f[k] = std::cos(a + k * std::numbers::pi / 2) / fact;
  }
  return f;
}

// Coefficients of F with F(a) = value, F' = g where g has series gs (order n-1).
inline std::vector<double> integrate(double value, const std::vector<double>& gs, unsigned n) {
  std::vector<double> f(n + 1, 0.0);
  f[0] = value;
  for (unsigned k = 1; k <= n; ++k) f[k] = gs[k - 1] / k;
  return f;
}

}  // namespace series

inline Jet exp(const Jet& x) { return x.compose(series::exp(x.value(), x.order())); }
inline Jet log(const Jet& x) { return x.compose(series::log(x.value(), x.order())); }
inline Jet pow(const Jet& x, double p) { return x.compose(series::pow(x.value(), p, x.order())); }
inline Jet sqrt(const Jet& x) { return pow(x, 0.5); }
inline Jet sin(const Jet& x) { return x.compose(series::sin(x.value(), x.order())); }
inline Jet cos(const Jet& x) { return x.compose(series::cos(x.value(), x.order())); }

inline Jet operator/(const Jet& a, const Jet& b) { return a * pow(b, -1.0); }
inline Jet operator/(const Jet& a, double b) { return a * (1.0 / b); }
inline Jet operator/(double a, const Jet& b) { return a * pow(b, -1.0); }

inline Jet asin(const Jet& x) {
  const unsigned n = x.order();
  if (!(std::abs(x.value()) < 1.0)) throw DomainError("asin derivative undefined at |x| >= 1");
  if (n == 0) return x.constant_like(std::asin(x.value()));
  // d/dx asin = (1 - x^2)^(-1/2), expanded around x.value() to order n-1.
  const Jet u = Jet::variable(1, n - 1, 0, x.value());
  const Jet g = pow(1.0 - u * u, -0.5);
  return x.compose(series::integrate(std::asin(x.value()), g.coefficients(), n));
}

inline Jet acos(const Jet& x) { return std::numbers::pi / 2 - asin(x); }

inline Jet atan(const Jet& x) {
  const unsigned n = x.order();
  if (n == 0) return x.constant_like(std::atan(x.value()));
  const Jet u = Jet::variable(1, n - 1, 0, x.value());
  const Jet g = pow(1.0 + u * u, -1.0);
  return x.compose(series::integrate(std::atan(x.value()), g.coefficients(), n));
}

// Generic code calls these unqualified after `using std::sin;` etc., so the
// jet overloads are found by argument-dependent lookup.

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.value(); }

// A constant of the same kind as `like` (a double, or a jet of matching shape).
inline double constant_like(double, double v) { return v; }
inline Jet constant_like(const Jet& like, double v) { return like.constant_like(v); }

}  // namespace mrelu
