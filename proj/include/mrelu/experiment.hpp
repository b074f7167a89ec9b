#pragma once

// Experiment drivers shared by the command line tool and the acceptance run.

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mrelu/assembler.hpp"
#include "mrelu/bench.hpp"
#include "mrelu/config.hpp"
#include "mrelu/corpus.hpp"
#include "mrelu/erm.hpp"
#include "mrelu/manifold.hpp"
#include "mrelu/partition.hpp"

namespace mrelu {

// Manifold, partition and sampled geometry, built once per configuration.
struct Atlas {
  std::shared_ptr<const Manifold> manifold;
  std::shared_ptr<const PartitionOfUnity> partition;
  AtlasGeometry geometry;
};

inline Atlas make_atlas(const std::string& name, std::size_t ambient_dim, std::uint64_t seed,
                        std::size_t centers_per_chart) {
  Atlas a;
  a.manifold = std::make_shared<const Manifold>(make_manifold(name, ambient_dim, seed));
  a.partition = std::make_shared<const PartitionOfUnity>(build_partition(a.manifold, centers_per_chart));
  a.geometry = audit_geometry(*a.partition);
  return a;
}

inline Atlas make_atlas(const ExperimentConfig& c) {
  return make_atlas(c.manifold, c.ambient_dim, c.embedding_seed, c.centers_per_chart);
}

inline HolderFunction config_target(const ExperimentConfig& c, const Manifold* m) {
  HolderFunction f = c.kind == "manifold" ? make_manifold_target(c.function, *m, c.beta)
                                          : make_rate_function(c.function, c.dim, c.beta);
  if (c.K > 0.0) f.K = c.K;
  return f;
}

inline std::vector<std::size_t> sweep_sizes(const std::vector<std::size_t>& grid, std::size_t d) {
  std::vector<std::size_t> Ns;
  for (std::size_t M : grid) {
    std::size_t N = 1;
    for (std::size_t k = 0; k < d; ++k) N *= M + 1;
    Ns.push_back(N);
  }
  return Ns;
}

// Assembles f at every eta; one row per eta plus the sparsity-vs-eta slope
// against -d*/beta. Budget failures become rows with status "budget".
inline ErrorReport assemble_sweep(const HolderFunction& f, const Atlas& atlas, const std::vector<double>& etas,
                                  double tolerance, const AssemblyOptions& opt = {}, AssemblyCache* cache = nullptr,
                                  std::vector<Network>* nets = nullptr, std::vector<AssemblyReport>* reports = nullptr) {
  ErrorReport rep;
  const std::string id = "assemble/" + atlas.manifold->name() + "/" + f.name;
  std::vector<std::pair<double, double>> pts;
  for (double eta : etas) {
    ReportRow w;
    w.config_id = id;
    w.kind = "assemble";
    w.size = eta;
    w.extra = eta;
    AssemblyReport ar;
    try {
      Network net = assemble(f, *atlas.partition, atlas.geometry, eta, opt, &ar, cache);
      w.status = ar.strict_ok ? "ok" : "invalid";
      if (nets) nets->push_back(std::move(net));
    } catch (const BudgetError& e) {
      w.status = "budget";
    }
    w.error = ar.measured_error;
    w.depth = ar.depth;
    w.width = ar.width;
    w.sparsity = ar.sparsity;
    w.envelope = ar.sparsity_constant;
    w.seconds = ar.seconds;
    if (w.status == "ok") pts.emplace_back(eta, static_cast<double>(w.sparsity));
    if (reports) reports->push_back(ar);
    rep.rows.push_back(w);
  }
  if (pts.size() >= 3) {
    const double expected = -static_cast<double>(atlas.manifold->intrinsic_dim()) / f.beta;
    rep.rows.push_back(slope_row(id, rate_fit(pts), expected, tolerance));
  }
  return rep;
}

inline ErrorReport erm_experiment(const ExperimentConfig& c, const Atlas& atlas) {
  const HolderFunction f0 = config_target(c, atlas.manifold.get());
  ErmOptions o = c.erm;
  o.seed = c.seed;
  if (c.erm_baseline) {
    const Network base = assemble(f0, *atlas.partition, atlas.geometry, c.erm_baseline_eta);
    return run_erm(*atlas.manifold, f0, o, &base, c.beta);
  }
  return run_erm(*atlas.manifold, f0, o, nullptr, c.beta);
}

inline void append(ErrorReport& into, const ErrorReport& more) {
  into.rows.insert(into.rows.end(), more.rows.begin(), more.rows.end());
}

inline bool all_ok(const ErrorReport& r) {
  for (const ReportRow& w : r.rows)
    if (w.status != "ok" && w.status != "info") return false;
  return true;
}

}  // namespace mrelu
