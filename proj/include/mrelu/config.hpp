#pragma once

// Experiment configuration, read from JSON. Unknown keys are rejected so
// typos surface as config errors.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrelu/erm.hpp"
#include "mrelu/error.hpp"

namespace mrelu {

struct ExperimentConfig {
  // Target: kind "manifold" assembles on a manifold, "holder" builds a Hölder
  // net on [1/4, 3/4]^dim.
  std::string kind = "manifold";
  std::string manifold = "circle";
  std::size_t ambient_dim = 10;  // for circle_embedded
  std::uint64_t embedding_seed = 7;
  std::size_t centers_per_chart = 8;
  std::string function = "x";
  double beta = 2.0;
  double K = 0.0;  // 0: keep the function's declared constant
  std::size_t dim = 1;

  std::vector<double> eta = {0.4, 0.2, 0.1};
  std::vector<std::size_t> grid = {12, 24, 48, 96};  // Hölder sweep: N = (M + 1)^dim
  unsigned m = 20;
  double slope_tolerance = 0.25;

  std::size_t samples = 10000;
  std::uint64_t seed = 1;

  ErmOptions erm;
  bool erm_baseline = true;
  double erm_baseline_eta = 0.4;

  std::string csv = "report.csv";
  std::string summary;  // empty: stdout only
  std::string network = "network.json";
  std::string points;
  std::string output;  // eval output; empty: stdout
};

namespace detail {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ParseError("config: unknown key '" + where + it.key() + "'", 0);
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("config: top level must be an object", 0);
  detail::reject_unknown(j,
                         {"kind", "manifold", "ambient_dim", "embedding_seed", "centers_per_chart", "function", "beta",
                          "K", "dim", "eta", "grid", "m", "slope_tolerance", "samples", "seed", "erm", "output"},
                         "");
  ExperimentConfig c;
  try {
    detail::read_key(j, "kind", c.kind);
    detail::read_key(j, "manifold", c.manifold);
    detail::read_key(j, "ambient_dim", c.ambient_dim);
    detail::read_key(j, "embedding_seed", c.embedding_seed);
    detail::read_key(j, "centers_per_chart", c.centers_per_chart);
    detail::read_key(j, "function", c.function);
    detail::read_key(j, "beta", c.beta);
    detail::read_key(j, "K", c.K);
    detail::read_key(j, "dim", c.dim);
    detail::read_key(j, "eta", c.eta);
    detail::read_key(j, "grid", c.grid);
    detail::read_key(j, "m", c.m);
    detail::read_key(j, "slope_tolerance", c.slope_tolerance);
    detail::read_key(j, "samples", c.samples);
    detail::read_key(j, "seed", c.seed);
    if (j.contains("erm")) {
      const auto& e = j.at("erm");
      detail::reject_unknown(e,
                             {"n", "seeds", "epochs", "batch", "learning_rate", "sparsity", "depth", "width", "noise",
                              "mc_samples", "prune_every", "baseline", "baseline_eta"},
                             "erm.");
      detail::read_key(e, "n", c.erm.n);
      detail::read_key(e, "seeds", c.erm.seeds);
      detail::read_key(e, "epochs", c.erm.epochs);
      detail::read_key(e, "batch", c.erm.batch);
      detail::read_key(e, "learning_rate", c.erm.learning_rate);
      detail::read_key(e, "sparsity", c.erm.sparsity);
      detail::read_key(e, "depth", c.erm.depth);
      detail::read_key(e, "width", c.erm.width);
      detail::read_key(e, "noise", c.erm.noise);
      detail::read_key(e, "mc_samples", c.erm.mc_samples);
      detail::read_key(e, "prune_every", c.erm.prune_every);
      detail::read_key(e, "baseline", c.erm_baseline);
      detail::read_key(e, "baseline_eta", c.erm_baseline_eta);
    }
    if (j.contains("output")) {
      const auto& o = j.at("output");
      detail::reject_unknown(o, {"csv", "summary", "network", "points", "eval"}, "output.");
      detail::read_key(o, "csv", c.csv);
      detail::read_key(o, "summary", c.summary);
      detail::read_key(o, "network", c.network);
      detail::read_key(o, "points", c.points);
      detail::read_key(o, "eval", c.output);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  }
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["kind"] = c.kind;
  j["manifold"] = c.manifold;
  j["ambient_dim"] = c.ambient_dim;
  j["embedding_seed"] = c.embedding_seed;
  j["centers_per_chart"] = c.centers_per_chart;
  j["function"] = c.function;
  j["beta"] = c.beta;
  j["K"] = c.K;
  j["dim"] = c.dim;
  j["eta"] = c.eta;
  j["grid"] = c.grid;
  j["m"] = c.m;
  j["slope_tolerance"] = c.slope_tolerance;
  j["samples"] = c.samples;
  j["seed"] = c.seed;
  j["erm"] = {{"n", c.erm.n},
              {"seeds", c.erm.seeds},
              {"epochs", c.erm.epochs},
              {"batch", c.erm.batch},
              {"learning_rate", c.erm.learning_rate},
              {"sparsity", c.erm.sparsity},
              {"depth", c.erm.depth},
              {"width", c.erm.width},
              {"noise", c.erm.noise},
              {"mc_samples", c.erm.mc_samples},
              {"prune_every", c.erm.prune_every},
              {"baseline", c.erm_baseline},
              {"baseline_eta", c.erm_baseline_eta}};
  j["output"] = {
      {"csv", c.csv}, {"summary", c.summary}, {"network", c.network}, {"points", c.points}, {"eval", c.output}};
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), e.byte);
  }
  return config_from_json(j);
}

inline void check_config(const ExperimentConfig& c) {
  if (c.kind != "manifold" && c.kind != "holder") throw PreconditionError("config: kind must be manifold or holder");
  if (c.eta.empty() || c.grid.empty() || c.erm.n.empty()) throw PreconditionError("config: sweeps must be nonempty");
  for (double e : c.eta)
    if (!(e > 0.0 && e <= 0.5)) throw PreconditionError("config: eta values must lie in (0, 1/2]");
  if (c.samples == 0) throw PreconditionError("config: samples must be >= 1");
  if (c.m == 0) throw PreconditionError("config: m must be >= 1");
}

}  // namespace mrelu
