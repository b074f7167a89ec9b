#pragma once

// Measurement and report plumbing: sup errors, log-log slopes, the CSV
// report codec and the Hölder-rate sweep.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mrelu/error.hpp"
#include "mrelu/holder.hpp"
#include "mrelu/holder_net.hpp"
#include "mrelu/network.hpp"

namespace mrelu {

using Sampler = std::function<std::vector<double>(std::mt19937_64&)>;

inline std::vector<std::vector<double>> draw(const Sampler& sampler, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> xs;
  xs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) xs.push_back(sampler(rng));
  return xs;
}

inline Sampler box_sampler(const Box& b) {
  return [b](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(b.dim());
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = b.lo[k] + (b.hi[k] - b.lo[k]) * u(rng);
    return x;
  };
}

// max over points of |net(x) - f(x)|_inf.
inline double sup_error(const Network& net, const HolderFunction& f, const std::vector<std::vector<double>>& xs) {
  double e = 0.0;
  const auto ys = net.eval_batch(xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto t = f.eval(xs[i]);
    if (t.size() != ys[i].size()) throw DimensionError("sup_error: network and target output sizes differ");
    for (std::size_t k = 0; k < t.size(); ++k) e = std::max(e, std::abs(ys[i][k] - t[k]));
  }
  return e;
}

inline double sup_error(const Network& net, const HolderFunction& f, const Sampler& sampler, std::size_t n,
                        std::uint64_t seed) {
  if (n == 0) throw PreconditionError("sup_error: need at least one sample");
  return sup_error(net, f, draw(sampler, n, seed));
}

// Least-squares slope of log(error) against log(size).
inline double rate_fit(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3) throw PreconditionError("rate_fit: need at least 3 points");
  std::vector<double> xs, ys;
  for (const auto& [s, e] : pts) {
    if (!(s > 0.0) || !(e > 0.0)) throw PreconditionError("rate_fit: sizes and errors must be positive");
    xs.push_back(std::log(s));
    ys.push_back(std::log(e));
  }
  const double n = static_cast<double>(pts.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 1e-24)) throw PreconditionError("rate_fit: sizes must not all coincide");
  return sxy / sxx;
}

// One CSV row. Column meaning per kind:
//   rate:     size = N, error = sup error, envelope = sparsity envelope, extra = error bound
//   assemble: size = eta, error = sup error, envelope = sparsity constant, extra = eta
//   erm:      size = n, error = Monte-Carlo risk, envelope = baseline risk, extra = complexity term
//   slope:    error = fitted slope, envelope = expected slope, extra = tolerance
struct ReportRow {
  std::string config_id;
  std::string kind;
  double size = 0.0;
  double error = 0.0;
  std::size_t depth = 0;
  std::size_t width = 0;
  std::size_t sparsity = 0;
  double envelope = 0.0;
  double extra = 0.0;
  std::string status = "ok";
  double seconds = 0.0;  // summary only, never written to CSV

  bool operator==(const ReportRow& o) const {
    return config_id == o.config_id && kind == o.kind && size == o.size && error == o.error && depth == o.depth &&
           width == o.width && sparsity == o.sparsity && envelope == o.envelope && extra == o.extra &&
           status == o.status;
  }
};

struct ErrorReport {
  std::vector<ReportRow> rows;
};

inline constexpr const char* kReportHeader =
    "config_id,kind,size,sup_error,depth,max_width,sparsity,envelope,extra,status";

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::string report_csv(const ErrorReport& r) {
  std::string s = std::string(kReportHeader) + "\n";
  for (const ReportRow& w : r.rows) {
    s += detail::csv_field(w.config_id) + "," + detail::csv_field(w.kind) + "," + detail::fmt_double(w.size) + "," +
         detail::fmt_double(w.error) + "," + std::to_string(w.depth) + "," + std::to_string(w.width) + "," +
         std::to_string(w.sparsity) + "," + detail::fmt_double(w.envelope) + "," + detail::fmt_double(w.extra) +
         "," + detail::csv_field(w.status) + "\n";
  }
  return s;
}

inline ErrorReport parse_report(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) throw ParseError("report: missing or wrong header", 0);
  ErrorReport r;
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 10) throw ParseError("report: expected 10 fields", offset);
    try {
      ReportRow w;
      w.config_id = f[0];
      w.kind = f[1];
      w.size = std::stod(f[2]);
      w.error = std::stod(f[3]);
      w.depth = std::stoull(f[4]);
      w.width = std::stoull(f[5]);
      w.sparsity = std::stoull(f[6]);
      w.envelope = std::stod(f[7]);
      w.extra = std::stod(f[8]);
      w.status = f[9];
      r.rows.push_back(std::move(w));
    } catch (const std::logic_error&) {
      throw ParseError("report: bad number", offset);
    }
    offset += line.size() + 1;
  }
  return r;
}

inline void emit_report(const ErrorReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << report_csv(r);
  if (!out) throw Error("write to '" + path + "' failed");
}

inline ErrorReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

inline std::string report_summary(const ErrorReport& r) {
  std::string s;
  char buf[256];
  for (const ReportRow& w : r.rows) {
    if (w.kind == "slope") {
      std::snprintf(buf, sizeof buf, "%-28s slope %+.3f (expected %+.3f +- %.2f)  %s\n", w.config_id.c_str(), w.error,
                    w.envelope, w.extra, w.status.c_str());
    } else {
      std::snprintf(buf, sizeof buf, "%-28s %-8s size %-10.4g err %-10.4g L %-4zu W %-7zu s %-9zu %6.2fs  %s\n",
                    w.config_id.c_str(), w.kind.c_str(), w.size, w.error, w.depth, w.width, w.sparsity, w.seconds,
                    w.status.c_str());
    }
    s += buf;
  }
  return s;
}

// Slope row comparing a fitted slope against an expected one.
inline ReportRow slope_row(const std::string& id, double slope, double expected, double tol) {
  ReportRow w;
  w.config_id = id;
  w.kind = "slope";
  w.error = slope;
  w.envelope = expected;
  w.extra = tol;
  w.status = std::abs(slope - expected) <= tol ? "ok" : "off";
  return w;
}

// Dense evaluation points for a box: a grid with `per_axis` points per axis
// plus `random` seeded uniform points.
inline std::vector<std::vector<double>> dense_points(const Box& b, std::size_t per_axis, std::size_t random,
                                                     std::uint64_t seed) {
  std::vector<std::vector<double>> xs = draw(box_sampler(b), random, seed);
  const std::size_t d = b.dim();
  std::vector<std::size_t> pick(d, 0);
  while (per_axis >= 2) {
    std::vector<double> x(d);
    for (std::size_t k = 0; k < d; ++k)
      x[k] = b.lo[k] + (b.hi[k] - b.lo[k]) * static_cast<double>(pick[k]) / static_cast<double>(per_axis - 1);
    xs.push_back(std::move(x));
    std::size_t k = 0;
    while (k < d && ++pick[k] == per_axis) pick[k++] = 0;
    if (k == d) break;
  }
  return xs;
}

struct RateOptions {
  unsigned m = 20;
  std::size_t grid_per_axis = 0;  // 0: 8 points per cell of the finest grid, capped
  std::size_t random_samples = 2000;
  std::uint64_t seed = 1;
  double tolerance = 0.25;
  bool strict = true;  // enforce the sample-size threshold of the Hölder net
};

// Hölder-net sup error over an N sweep for one function.
inline ErrorReport run_rate(const HolderFunction& f, const std::vector<std::size_t>& Ns, const RateOptions& o = {}) {
  ErrorReport rep;
  if (Ns.empty()) throw PreconditionError("run_rate: empty N sweep");
  std::size_t per_axis = o.grid_per_axis;
  if (per_axis == 0) {
    const std::size_t Mmax = grid_size_for(*std::max_element(Ns.begin(), Ns.end()), f.dim);
    per_axis = std::min<std::size_t>(8 * Mmax + 1, f.dim == 1 ? 20001 : 201);
  }
  const auto xs = dense_points(f.domain, per_axis, o.random_samples, o.seed);
  std::vector<std::pair<double, double>> pts;
  const std::string id = f.name + "/d" + std::to_string(f.dim) + "/b" + detail::fmt_double(f.beta);
  for (std::size_t N : Ns) {
    const auto t0 = std::chrono::steady_clock::now();
    HolderNetOptions hopt;
    hopt.enforce_threshold = o.strict;
    HolderNetReport hr;
    const Network net = build_holder_net(f, N, o.m, hopt, &hr);
    ReportRow w;
    w.config_id = id;
    w.kind = "rate";
    w.size = static_cast<double>(N);
    w.error = sup_error(net, f, xs);
    w.depth = net.depth();
    w.width = max_width(net);
    w.sparsity = sparsity(net).nonzero_count;
    w.envelope = hr.envelope_sparsity;
    w.extra = hr.envelope_error_bound;
    const bool ok = validate(net).ok() && static_cast<double>(w.sparsity) <= w.envelope;
    w.status = ok ? "ok" : "invalid";
    w.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    pts.emplace_back(w.size, w.error);
    rep.rows.push_back(w);
  }
  if (pts.size() >= 3) {
    rep.rows.push_back(slope_row(id, rate_fit(pts), -f.beta / static_cast<double>(f.dim), o.tolerance));
  }
  return rep;
}

}  // namespace mrelu
