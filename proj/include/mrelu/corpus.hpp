#pragma once

// Named target functions: the rate corpus on [1/4, 3/4]^d and the manifold
// targets, which read the first two plane coordinates (x, y) = Q^T X.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mrelu/error.hpp"
#include "mrelu/holder.hpp"
#include "mrelu/jet.hpp"
#include "mrelu/manifold.hpp"

namespace mrelu {

namespace detail {

template <typename T>
T kink(const T& t) {
  return value_of(t) < 0.0 ? -t : t;
}

template <typename T>
T positive_part(const T& t) {
  return value_of(t) > 0.0 ? t : constant_like(t, 0.0);
}

template <typename V>
auto coordinate_mean(const V& x) {
  auto s = x[0];
  for (std::size_t i = 1; i < x.size(); ++i) s = s + x[i];
  return s * (1.0 / static_cast<double>(x.size()));
}

}  // namespace detail

inline Box rate_domain(std::size_t d) {
  return Box{std::vector<double>(d, 0.25), std::vector<double>(d, 0.75)};
}

// Names per smoothness: beta <= 1 uses kinked Lipschitz functions, beta > 1
// smooth ones. Kinks sit on x = 1/3: for grid sizes M = 12 * 2^k (rescaling
// R = 3) that is always a third of a cell away from the nearest node.
// Grid sizes whose domain edges fall on grid nodes for U = [1/4, 3/4]^d.
inline std::vector<std::size_t> rate_grid_sizes() { return {12, 24, 48, 96}; }

inline std::vector<std::string> rate_corpus_names(double beta) {
  if (beta <= 1.0) return {"kink", "skew_kink", "kink_ramp"};
  return {"square", "sine", "gauss"};
}

inline HolderFunction make_rate_function(const std::string& name, std::size_t d, double beta) {
  using detail::coordinate_mean;
  using detail::kink;
  using detail::positive_part;
  const Box dom = rate_domain(d);
  if (name == "kink") {
    return make_holder(name, d, beta, 1.0, dom, [](const auto& x) { return kink(coordinate_mean(x) - 1.0 / 3.0); });
  }
  if (name == "skew_kink") {
    return make_holder(name, d, beta, 1.0, dom, [](const auto& x) {
      return kink(x[0] - 1.0 / 3.0) * 0.5 + positive_part(coordinate_mean(x) - 1.0 / 3.0) * 0.5;
    });
  }
  if (name == "kink_ramp") {
    return make_holder(name, d, beta, 2.0, dom,
                       [](const auto& x) { return kink(x[0] - 1.0 / 3.0) * (coordinate_mean(x) + 0.5); });
  }
  if (name == "square") {
    return make_holder(name, d, beta, 2.0, dom, [](const auto& x) {
      const auto s = coordinate_mean(x);
      return s * s;
    });
  }
  if (name == "sine") {
    return make_holder(name, d, beta, 2.0, dom, [](const auto& x) {
      using std::sin;
      return sin(coordinate_mean(x) * 2.0) * 0.5;
    });
  }
  if (name == "gauss") {
    return make_holder(name, d, beta, 2.0, dom, [](const auto& x) {
      using std::exp;
      auto r2 = (x[0] - 0.5) * (x[0] - 0.5);
      for (std::size_t i = 1; i < x.size(); ++i) r2 = r2 + (x[i] - 0.5) * (x[i] - 0.5);
      return exp(-r2);
    });
  }
  throw PreconditionError("unknown rate function '" + name + "'");
}

inline std::vector<std::string> manifold_target_names() { return {"zero", "one", "half", "x", "xy", "sin(2x+y)"}; }

// f on the ambient space of m with values in [-1, 1]; declared beta.
inline HolderFunction make_manifold_target(const std::string& name, const Manifold& m, double beta = 2.0) {
  const std::size_t D = m.ambient_dim();
  const auto Q = m.embedding();
  const Box dom{std::vector<double>(D, -1.0), std::vector<double>(D, 1.0)};
  auto plane = [Q](const auto& X, std::size_t k) {
    auto s = constant_like(X[0], 0.0);
    for (std::size_t i = 0; i < X.size(); ++i)
      if (Q[i][k] != 0.0) s = s + Q[i][k] * X[i];
    return s;
  };
  if (name == "zero" || name == "one" || name == "half") {
    const double c = name == "zero" ? 0.0 : name == "one" ? 1.0 : 0.5;
    return make_holder(name, D, beta, 1.0, dom, [c](const auto& X) { return constant_like(X[0], c); });
  }
  if (name == "x") {
    return make_holder(name, D, beta, 1.0, dom, [plane](const auto& X) { return plane(X, 0); });
  }
  if (m.plane_dim() < 2) throw PreconditionError("target '" + name + "' needs two plane coordinates");
  if (name == "xy") {
    return make_holder(name, D, beta, 2.0, dom, [plane](const auto& X) { return plane(X, 0) * plane(X, 1); });
  }
  if (name == "sin(2x+y)") {
    return make_holder(name, D, beta, 9.0, dom, [plane](const auto& X) {
      using std::sin;
      return sin(plane(X, 0) * 2.0 + plane(X, 1));
    });
  }
  throw PreconditionError("unknown manifold target '" + name + "'");
}

}  // namespace mrelu
