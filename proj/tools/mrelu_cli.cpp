// mrelu: build, audit, rate, erm and eval subcommands.
// Exit codes: 0 success, 1 validation or budget failure, 2 I/O or config error.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mrelu/config.hpp"
#include "mrelu/experiment.hpp"
#include "mrelu/serialize.hpp"

namespace {

using namespace mrelu;

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kConfig = 2;

struct Outputs {
  ErrorReport report;
  std::string text;  // extra human-readable lines
};

void write_outputs(const ExperimentConfig& c, const Outputs& out) {
  if (!c.csv.empty()) emit_report(out.report, c.csv);
  const std::string summary = out.text + report_summary(out.report);
  std::cout << summary;
  if (!c.summary.empty()) {
    std::ofstream s(c.summary);
    if (!s) throw Error("cannot open '" + c.summary + "' for writing");
    s << summary;
  }
}

void add_options(CLI::App* app, ExperimentConfig& c, std::size_t& N) {
  app->add_option("--config", "JSON experiment config (loaded before other flags)");
  app->add_option("--kind", c.kind, "manifold or holder")->capture_default_str();
  app->add_option("--manifold", c.manifold, "circle, circle_embedded or torus")->capture_default_str();
  app->add_option("--ambient-dim", c.ambient_dim, "ambient dimension of circle_embedded")->capture_default_str();
  app->add_option("--embedding-seed", c.embedding_seed)->capture_default_str();
  app->add_option("--centers", c.centers_per_chart, "partition centers per chart axis")->capture_default_str();
  app->add_option("--function", c.function, "target function name")->capture_default_str();
  app->add_option("--beta", c.beta)->capture_default_str();
  app->add_option("--K", c.K, "Hölder constant override (0 keeps the declared one)")->capture_default_str();
  app->add_option("--dim", c.dim, "dimension of the Hölder domain")->capture_default_str();
  app->add_option("--eta", c.eta, "target accuracies")->capture_default_str();
  app->add_option("--grid", c.grid, "grid sizes M of the Hölder sweep")->capture_default_str();
  app->add_option("--N", N, "single Hölder sample size for build/audit (0: from --grid)");
  app->add_option("--m", c.m, "multiplication accuracy order")->capture_default_str();
  app->add_option("--slope-tolerance", c.slope_tolerance)->capture_default_str();
  app->add_option("--samples", c.samples)->capture_default_str();
  app->add_option("--seed", c.seed)->capture_default_str();
  app->add_option("--erm-n", c.erm.n)->capture_default_str();
  app->add_option("--erm-seeds", c.erm.seeds)->capture_default_str();
  app->add_option("--erm-epochs", c.erm.epochs)->capture_default_str();
  app->add_option("--erm-batch", c.erm.batch)->capture_default_str();
  app->add_option("--erm-lr", c.erm.learning_rate)->capture_default_str();
  app->add_option("--erm-sparsity", c.erm.sparsity)->capture_default_str();
  app->add_option("--erm-depth", c.erm.depth)->capture_default_str();
  app->add_option("--erm-width", c.erm.width)->capture_default_str();
  app->add_option("--erm-noise", c.erm.noise)->capture_default_str();
  app->add_option("--erm-mc", c.erm.mc_samples)->capture_default_str();
  app->add_option("--erm-prune-every", c.erm.prune_every)->capture_default_str();
  app->add_option("--erm-baseline", c.erm_baseline)->capture_default_str();
  app->add_option("--erm-baseline-eta", c.erm_baseline_eta)->capture_default_str();
  app->add_option("--csv", c.csv, "CSV report path (empty: none)")->capture_default_str();
  app->add_option("--summary", c.summary, "summary text path")->capture_default_str();
  app->add_option("--network", c.network, "network file (.json text, else binary)")->capture_default_str();
  app->add_option("--points", c.points, "eval input: one point per line")->capture_default_str();
  app->add_option("--output", c.output, "eval output (empty: stdout)")->capture_default_str();
}

std::size_t holder_N(const ExperimentConfig& c, std::size_t N) {
  return N ? N : sweep_sizes({c.grid.back()}, c.dim).front();
}

// Builds the configured network; fills one report row.
Network build_one(const ExperimentConfig& c, std::size_t N, Outputs& out, bool detailed) {
  if (c.kind == "holder") {
    const HolderFunction f = config_target(c, nullptr);
    HolderNetReport hr;
    const Network net = build_holder_net(f, holder_N(c, N), c.m, {}, &hr);
    ReportRow w;
    w.config_id = "holder/" + f.name + "/d" + std::to_string(c.dim);
    w.kind = "rate";
    w.size = static_cast<double>(hr.N);
    const auto xs = dense_points(f.domain, c.dim == 1 ? 8 * hr.M + 1 : 101, c.samples, c.seed);
    w.error = sup_error(net, f, xs);
    w.depth = net.depth();
    w.width = max_width(net);
    w.sparsity = sparsity(net).nonzero_count;
    w.envelope = hr.envelope_sparsity;
    w.extra = hr.envelope_error_bound;
    const bool ok = validate(net).ok() && static_cast<double>(w.sparsity) <= w.envelope && w.error <= w.extra;
    w.status = ok ? "ok" : "invalid";
    out.report.rows.push_back(w);
    if (detailed) {
      char buf[512];
      std::snprintf(buf, sizeof buf,
                    "holder net %s: N=%zu M=%zu m=%u R=%g B=%g anchors=%zu\n"
                    "  depth %zu (envelope %zu)  width %zu  sparsity %zu (envelope %.4g)\n"
                    "  sup error %.4g  error bound %.4g  gadget bound %.4g\n",
                    f.name.c_str(), hr.N, hr.M, hr.m, hr.R, hr.B, hr.anchors, hr.depth, hr.envelope_depth, hr.width,
                    hr.sparsity, hr.envelope_sparsity, w.error, hr.envelope_error_bound, hr.gadget_bound);
      out.text += buf;
    }
    return net;
  }
  const Atlas atlas = make_atlas(c);
  const HolderFunction f = config_target(c, atlas.manifold.get());
  AssemblyOptions opt;
  opt.final_samples = c.samples;
  opt.seed = c.seed;
  std::vector<Network> nets;
  std::vector<AssemblyReport> reps;
  const ErrorReport r = assemble_sweep(f, atlas, {c.eta.front()}, c.slope_tolerance, opt, nullptr, &nets, &reps);
  append(out.report, r);
  if (detailed && !reps.empty()) {
    const AssemblyReport& a = reps.front();
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "assembly of %s on %s at eta %g: r=%zu m*=%u delta=%.4g delta'=%.4g\n"
                  "  budgets: chart %.4g pullback %.4g tau %.4g mult %.4g (recombined %.4g)\n",
                  f.name.c_str(), atlas.manifold->name().c_str(), a.budget.eta, a.budget.r, a.m_star, a.delta,
                  a.delta_prime, a.budget.chart, a.budget.pullback, a.budget.tau, a.budget.mult,
                  a.budget.recombined());
    out.text += buf;
    for (const StageReport& s : a.stages) {
      std::snprintf(buf, sizeof buf, "  chart %zu %-8s N=%-6zu m=%-3u measured %.4g / budget %.4g  L=%zu s=%zu\n",
                    s.chart, s.stage.c_str(), s.N, s.m, s.measured, s.budget, s.depth, s.sparsity);
      out.text += buf;
    }
    for (std::size_t j = 0; j < a.composed_error.size(); ++j) {
      std::snprintf(buf, sizeof buf, "  chart %zu composed error %.4g (bound %.4g), tau shift %.4g\n", j,
                    a.composed_error[j], a.composed_bound[j], a.tau_shift[j]);
      out.text += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "  off-support violations %zu; strict %s; sparsity constant s/(L eta^-d*/beta) = %.4g\n",
                  a.off_support_violations, a.strict_ok ? "yes" : "no", a.sparsity_constant);
    out.text += buf;
  }
  if (nets.empty()) throw BudgetError("assemble", "no network within budget");
  return nets.front();
}

std::vector<std::vector<double>> read_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open points file '" + path + "'");
  std::vector<std::vector<double>> pts;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    for (char& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    std::istringstream ls(line);
    std::vector<double> p;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        p.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::logic_error&) {
        throw ParseError("points: bad number '" + tok + "'", offset);
      }
    }
    if (!p.empty()) pts.push_back(std::move(p));
    offset += line.size() + 1;
  }
  return pts;
}

int run(int argc, char** argv) {
  ExperimentConfig cfg;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) cfg = load_config(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) cfg = load_config(a.substr(9));
  }
  std::size_t N = 0;
  CLI::App app{"Constructive sparse ReLU approximation on manifolds"};
  app.require_subcommand(1);
  CLI::App* build = app.add_subcommand("build", "construct and save one network");
  CLI::App* audit = app.add_subcommand("audit", "budget and parameter report against the envelopes");
  CLI::App* rate = app.add_subcommand("rate", "N or eta sweep with slope fit");
  CLI::App* erm = app.add_subcommand("erm", "regression experiment with the trained sparse class");
  CLI::App* eval = app.add_subcommand("eval", "apply a saved network to points");
  std::string audit_file;
  audit->add_option("--file", audit_file, "audit a saved network instead of building one");
  for (CLI::App* s : {build, audit, rate, erm, eval}) add_options(s, cfg, N);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  check_config(cfg);

  Outputs out;
  if (*build) {
    const Network net = build_one(cfg, N, out, false);
    save_network(net, cfg.network);
    out.text += "saved " + cfg.network + "\n";
    write_outputs(cfg, out);
    return all_ok(out.report) ? kOk : kFail;
  }
  if (*audit) {
    if (!audit_file.empty()) {
      const Network net = load_network(audit_file);
      const ValidationReport v = validate(net.with_mode(WeightMode::strict));
      const SparsityReport sp = sparsity(net);
      char buf[256];
      std::snprintf(buf, sizeof buf, "%s: depth %zu, max width %zu, nonzeros %zu of %zu, max |w| %.6g, strict %s\n",
                    audit_file.c_str(), net.depth(), max_width(net), sp.nonzero_count, sp.total_count,
                    sp.max_abs_weight, v.ok() ? "yes" : "no");
      std::cout << buf;
      for (const Violation& x : v.violations) std::cout << "  " << x.message << "\n";
      return v.ok() ? kOk : kFail;
    }
    build_one(cfg, N, out, true);
    write_outputs(cfg, out);
    return all_ok(out.report) ? kOk : kFail;
  }
  if (*rate) {
    if (cfg.kind == "holder") {
      RateOptions ro;
      ro.m = cfg.m;
      ro.seed = cfg.seed;
      ro.random_samples = cfg.samples;
      ro.tolerance = cfg.slope_tolerance;
      out.report = run_rate(config_target(cfg, nullptr), sweep_sizes(cfg.grid, cfg.dim), ro);
    } else {
      const Atlas atlas = make_atlas(cfg);
      AssemblyOptions opt;
      opt.final_samples = cfg.samples;
      opt.seed = cfg.seed;
      AssemblyCache cache;
      out.report = assemble_sweep(config_target(cfg, atlas.manifold.get()), atlas, cfg.eta, cfg.slope_tolerance,
                                  opt, &cache);
    }
    write_outputs(cfg, out);
    return all_ok(out.report) ? kOk : kFail;
  }
  if (*erm) {
    if (cfg.kind != "manifold") throw PreconditionError("erm: kind must be manifold");
    out.report = erm_experiment(cfg, make_atlas(cfg));
    write_outputs(cfg, out);
    return kOk;
  }
  // eval
  if (cfg.points.empty()) throw PreconditionError("eval: --points is required");
  const Network net = load_network(cfg.network);
  const auto ys = net.eval_batch(read_points(cfg.points));
  std::string text;
  for (const auto& y : ys) {
    for (std::size_t k = 0; k < y.size(); ++k) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%s%.17g", k ? "," : "", y[k]);
      text += buf;
    }
    text += "\n";
  }
  if (cfg.output.empty()) {
    std::cout << text;
  } else {
    std::ofstream o(cfg.output);
    if (!o) throw Error("cannot open '" + cfg.output + "' for writing");
    o << text;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mrelu::BudgetError& e) {
    std::cerr << "budget failure: " << e.what() << "\n";
    return kFail;
  } catch (const mrelu::DimensionError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kFail;
  } catch (const mrelu::DomainError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kFail;
  } catch (const mrelu::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
}
