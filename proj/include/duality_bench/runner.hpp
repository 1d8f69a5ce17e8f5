#ifndef DUALITY_BENCH_RUNNER_HPP
#define DUALITY_BENCH_RUNNER_HPP

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "duality_bench/cavi.hpp"
#include "duality_bench/config.hpp"
#include "duality_bench/diagnostics.hpp"
#include "duality_bench/discrete.hpp"
#include "duality_bench/gaussian.hpp"
#include "duality_bench/gibbs.hpp"
#include "duality_bench/io.hpp"
#include "duality_bench/report.hpp"

namespace duality_bench {

enum ExitCode : int {
  kExitOk = 0,
  kExitDiagnosticFailure = 1,
  kExitConfigError = 2,
  kExitModelError = 3,
};

struct CliOptions {
  std::string command;  // run-gibbs | run-cavi | diagnose | verify-duality
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;  // overrides gibbs.seed and suite_seed
  std::size_t parallel_chains = 1;
};

using AnyModel = std::variant<GaussianTarget, DiscreteTarget>;

inline AnyModel build_model(const ModelConfig& m) {
  if (m.family == "gaussian") {
    return GaussianTarget(m.mean, m.covariance, BlockDecomposition(m.block_dims));
  }
  return DiscreteTarget(m.shape, m.pmf);
}

/// --out, then output.directory, then $DUALITY_BENCH_OUT, then ".".
inline std::filesystem::path output_directory(const CliOptions& o,
                                              const RunConfig& rc) {
  if (o.out) return *o.out;
  if (rc.output.directory) return *rc.output.directory;
  if (const char* env = std::getenv("DUALITY_BENCH_OUT"); env && *env) {
    return env;
  }
  return ".";
}

namespace runner_detail {

struct Context {
  const CliOptions& opts;
  RunConfig rc;
  std::filesystem::path out_dir;
  std::ostream& log;
};

inline const GibbsSection& need_gibbs(const RunConfig& rc) {
  if (!rc.gibbs) throw ConfigError("config.gibbs: missing section");
  return *rc.gibbs;
}
inline const CaviSection& need_cavi(const RunConfig& rc) {
  if (!rc.cavi) throw ConfigError("config.cavi: missing section");
  return *rc.cavi;
}

inline GibbsConfig gibbs_config(const GibbsSection& g) {
  GibbsConfig c = GibbsConfig::with_default_burn_in(g.n_cycles, g.seed);
  if (g.burn_in) c.burn_in = *g.burn_in;
  c.init = g.init;
  return c;
}

inline std::vector<std::string> trace_file_names(std::size_t chains) {
  if (chains == 1) return {"trace.csv"};
  std::vector<std::string> out;
  for (std::size_t k = 1; k <= chains; ++k) {
    out.push_back("trace_chain" + std::to_string(k) + ".csv");
  }
  return out;
}

template <class M>
std::vector<ChainTrace> gibbs_stage(Context& ctx, const M& model, bool write) {
  const auto cfg = gibbs_config(need_gibbs(ctx.rc));
  const auto traces = run_chains(model, cfg, ctx.opts.parallel_chains);
  if (write) {
    const auto& dec = model.decomposition();
    if (ctx.rc.output.csv) {
      const auto names = trace_file_names(traces.size());
      for (std::size_t k = 0; k < traces.size(); ++k) {
        write_file(ctx.out_dir / names[k], trace_csv(dec, traces[k]));
      }
    }
    if (ctx.rc.output.json) {
      write_file(ctx.out_dir / "estimates.json", dump(estimates_json(dec, traces)));
    }
  }
  return traces;
}

inline MeanFieldState<GaussianFactor> initial_state(const GaussianTarget& t,
                                                    const std::string& init) {
  if (init == "default" || init == "marginal") return marginal_init(t);
  if (init == "standard_normal") return standard_normal_init(t);
  throw ConfigError("cavi.init: expected \"default\", \"marginal\" or "
                    "\"standard_normal\" for a gaussian model");
}

inline MeanFieldState<DiscreteFactor> initial_state(const DiscreteTarget& t,
                                                    const std::string& init) {
  if (init == "default" || init == "uniform") return uniform_init(t);
  throw ConfigError("cavi.init: expected \"default\" or \"uniform\" for a "
                    "discrete model");
}

template <class M>
auto cavi_stage(Context& ctx, const M& model, bool write) {
  const auto& sec = need_cavi(ctx.rc);
  auto state = cavi_run(model, CaviConfig{sec.max_cycles, sec.tolerance},
                        initial_state(model, sec.init));
  if (write && ctx.rc.output.json) {
    write_file(ctx.out_dir / "state.json",
               dump(state_json(ctx.rc.model.family, state)));
  }
  ctx.log << "cavi: " << (state.converged ? "converged" : "not converged")
          << " after " << state.iterations << " cycles\n";
  return state;
}

template <class M>
int diagnose(Context& ctx, const M& model) {
  const DiagnosticsSection dsec =
      ctx.rc.diagnostics ? *ctx.rc.diagnostics : DiagnosticsSection{};
  const auto traces = gibbs_stage(ctx, model, false);
  using F = std::conditional_t<M::is_discrete, DiscreteFactor, GaussianFactor>;
  MeanFieldState<F> state;
  if (dsec.state_file) {
    state = state_from_json<F>(Json::parse(read_file(*dsec.state_file)));
    ctx.log << "cavi: state loaded from " << dsec.state_file->filename().string()
            << "\n";
  } else {
    state = cavi_stage(ctx, model, false);
  }
  DiagnosticsReport rep = build_report(model, traces, state, dsec.options);
  rep.model = ctx.rc.model.echo;
  Json cfg;
  const auto& g = ctx.rc.gibbs;
  const GibbsConfig gc = gibbs_config(*g);
  cfg["gibbs"] = {{"n_cycles", gc.n_cycles},
                  {"burn_in", gc.burn_in},
                  {"seed", gc.seed},
                  {"chains", ctx.opts.parallel_chains}};
  if (dsec.state_file) {
    cfg["cavi"] = {{"state_file", dsec.state_file->filename().string()}};
  } else {
    const auto& c = need_cavi(ctx.rc);
    cfg["cavi"] = {{"max_cycles", c.max_cycles},
                   {"tolerance", c.tolerance},
                   {"init", c.init},
                   {"converged", state.converged},
                   {"iterations", state.iterations}};
  }
  const auto& o = dsec.options;
  cfg["diagnostics"] = {{"grid_points", o.grid_points},
                        {"tensor_points", o.tensor_points},
                        {"squash_points", o.squash_points},
                        {"property_samples", o.property_samples},
                        {"concavity_samples", o.concavity_samples},
                        {"complement_points", o.complement_points},
                        {"suite_seed", o.suite_seed}};
  rep.config = std::move(cfg);
  if (ctx.rc.output.json) write_file(ctx.out_dir / "report.json", dump(to_json(rep)));
  if (ctx.rc.output.csv) write_file(ctx.out_dir / "report.csv", to_csv(rep));
  for (const auto& r : rep.blocks) {
    if (r.raw_log_positive) {
      ctx.log << "note: block " << r.block
              << " has a positive raw KL-bound log value\n";
    }
  }
  if (rep.passed) {
    ctx.log << "diagnose: all " << rep.checks.size() << " checks passed\n";
    return kExitOk;
  }
  ctx.log << "diagnose: failed checks:";
  for (const auto& f : rep.failures()) ctx.log << ' ' << f;
  ctx.log << '\n';
  return kExitDiagnosticFailure;
}

inline int verify_duality(Context& ctx) {
  const DiagnosticsSection dsec =
      ctx.rc.diagnostics ? *ctx.rc.diagnostics : DiagnosticsSection{};
  if (dsec.duality_trials == 0) {
    throw ConfigError("diagnostics.duality_trials: must be positive");
  }
  const bool discrete = ctx.rc.model.family == "discrete";
  Rng rng(dsec.options.suite_seed);
  std::ostringstream csv;
  csv << "trial,gap,at_optimum_flag\n";
  bool ok = true;
  for (std::size_t t = 1; t <= dsec.duality_trials; ++t) {
    DualityProblem p = discrete
                           ? random_discrete_duality_problem(rng)
                           : random_gaussian_duality_problem(
                                 rng, dsec.options.grid_points);
    const double gap = duality_gap(p);
    p.log_q = exponential_tilt(p.grid, p.log_p, p.h);
    const double tilt_gap = duality_gap(p);
    ok = ok && gap >= -1e-10 && tilt_gap >= -1e-10 && tilt_gap <= 1e-8;
    csv << t << ',' << format_double(gap) << ",0\n";
    csv << t << ',' << format_double(tilt_gap) << ",1\n";
  }
  if (ctx.rc.output.csv) write_file(ctx.out_dir / "gaps.csv", csv.str());
  ctx.log << "verify-duality: " << dsec.duality_trials << " trials, "
          << (ok ? "all gaps within tolerance" : "tolerance violated") << "\n";
  return ok ? kExitOk : kExitDiagnosticFailure;
}

}  // namespace runner_detail

/// Runs one subcommand. Messages go to `log`; failures are mapped to exit
/// codes rather than thrown.
inline int run_command(const CliOptions& opts, std::ostream& log) {
  using namespace runner_detail;
  RunConfig rc;
  std::filesystem::path out_dir;
  try {
    if (opts.parallel_chains == 0) {
      throw ConfigError("--parallel-chains: must be positive");
    }
    rc = load_config(opts.config);
    if (opts.seed) {
      if (rc.gibbs) rc.gibbs->seed = *opts.seed;
      if (!rc.diagnostics) rc.diagnostics = DiagnosticsSection{};
      rc.diagnostics->options.suite_seed = *opts.seed;
    }
    out_dir = output_directory(opts, rc);
    if (opts.command == "run-gibbs") need_gibbs(rc);
    if (opts.command == "run-cavi") need_cavi(rc);
    if (opts.command == "diagnose") {
      need_gibbs(rc);
      if (!rc.diagnostics || !rc.diagnostics->state_file) need_cavi(rc);
    }
    if (opts.command != "run-gibbs" && opts.command != "run-cavi" &&
        opts.command != "diagnose" && opts.command != "verify-duality") {
      throw ConfigError("unknown command \"" + opts.command + "\"");
    }
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    std::filesystem::create_directories(out_dir);
    Context ctx{opts, rc, out_dir, log};
    if (opts.command == "verify-duality") return verify_duality(ctx);
    const AnyModel model = build_model(rc.model);
    return std::visit(
        [&](const auto& m) -> int {
          if (opts.command == "run-gibbs") {
            const auto traces = gibbs_stage(ctx, m, true);
            log << "run-gibbs: " << traces.size() << " chain(s), "
                << traces.front().size() << " retained cycles each\n";
            return kExitOk;
          }
          if (opts.command == "run-cavi") {
            cavi_stage(ctx, m, true);
            return kExitOk;
          }
          return diagnose(ctx, m);
        },
        model);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    log << "model error: " << e.what() << "\n";
    return kExitModelError;
  }
}

}  // namespace duality_bench

#endif  // DUALITY_BENCH_RUNNER_HPP
