#ifndef DUALITY_BENCH_REPORT_HPP
#define DUALITY_BENCH_REPORT_HPP

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "duality_bench/cavi.hpp"
#include "duality_bench/diagnostics.hpp"
#include "duality_bench/gibbs.hpp"

namespace duality_bench {

using Json = nlohmann::ordered_json;

struct DiagnosticsOptions {
  std::size_t grid_points = 4097;    // 1-D block grids
  std::size_t tensor_points = 513;   // per axis on joint grids
  std::size_t squash_points = 1001;  // pointwise squash grid
  std::size_t property_samples = 50;
  std::size_t concavity_samples = 100;
  std::size_t complement_points = 2;  // extra θ₋ᵢ taken from the trace
  std::uint64_t suite_seed = 0;

  void validate() const {
    if (grid_points < 2 || tensor_points < 2 || squash_points < 2) {
      throw std::invalid_argument("grid sizes must be at least 2");
    }
  }
};

/// Trace average of a log-density functional next to its analytic value.
struct McCheck {
  double estimate = 0.0;
  std::optional<double> standard_error;
  double analytic = 0.0;
};

struct BlockRecord {
  std::size_t block = 0;  // 1-based
  // F_i at the reference complement
  Eigen::VectorXd reference_complement;
  double log_complement_marginal = 0.0;
  double f_at_full_conditional = 0.0;
  double duality_gap = 0.0;  // log π(θ₋ᵢ) − F_i(q*ᵢ)
  double attainment_error = 0.0;  // max |F_i(full conditional) − log π(θ₋ᵢ)|
  double f_max_excess = 0.0;
  double f_min_shortfall = 0.0;
  double f_identity_error = 0.0;
  std::size_t f_near_conditional = 0;
  double concavity_min_slack = 0.0;
  std::size_t complement_points = 0;
  // information terms
  double mutual_information = 0.0;
  double complement_entropy = 0.0;
  double complement_conditional_entropy = 0.0;
  double block_entropy = 0.0;
  double block_conditional_entropy = 0.0;
  double info_residual = 0.0;
  double info_symmetric_residual = 0.0;
  // squashing
  double squashing_constant = 0.0;
  double squash_log_numerator = 0.0;
  double complement_kl = 0.0;
  double squash_min_slack = 0.0;
  Eigen::VectorXd squash_argmin;
  // KL bound
  double kl_factor_marginal = 0.0;
  double kl_lower_bound = 0.0;
  double kl_bound_raw_log = 0.0;
  bool raw_log_positive = false;
  // Monte Carlo
  McCheck mc_mutual_information;
  McCheck mc_complement_entropy;
  McCheck mc_complement_conditional_entropy;
};

struct Check {
  std::string name;
  std::size_t block = 0;  // 1-based
  double value = 0.0;
  std::string comparison;  // "<=", ">=", "in (0, t]", ">"
  double threshold = 0.0;
  bool passed = false;
};

struct DiagnosticsReport {
  std::string family;
  Json model;   // echo
  Json config;  // echo
  std::vector<BlockRecord> blocks;
  std::vector<Check> checks;
  bool passed = false;

  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks) {
      if (!c.passed) out.push_back(c.name + "[block" + std::to_string(c.block) + "]");
    }
    return out;
  }
};

namespace detail {

inline void require_same_model(const BlockDecomposition& dec,
                               const std::vector<ChainTrace>& traces,
                               std::size_t n_factors) {
  if (traces.empty()) throw std::invalid_argument("no trace supplied");
  if (n_factors != dec.num_blocks()) {
    throw std::invalid_argument("trace and state do not belong to the same model");
  }
  for (const auto& t : traces) {
    for (const auto& s : t.samples) {
      if (static_cast<std::size_t>(s.size()) != dec.total_dim()) {
        throw std::invalid_argument(
            "trace and state do not belong to the same model");
      }
    }
  }
}

inline void check_factor_shape(const GaussianTarget& t,
                               const MeanFieldState<GaussianFactor>& s) {
  for (std::size_t j = 0; j < s.factors.size(); ++j) {
    if (static_cast<std::size_t>(s.factors[j].dim()) !=
        t.decomposition().block_dim(j)) {
      throw std::invalid_argument("trace and state do not belong to the same model");
    }
  }
}

inline void check_factor_shape(const DiscreteTarget& t,
                               const MeanFieldState<DiscreteFactor>& s) {
  for (std::size_t j = 0; j < s.factors.size(); ++j) {
    if (s.factors[j].size() != t.support_sizes()[j]) {
      throw std::invalid_argument("trace and state do not belong to the same model");
    }
  }
}

inline McCheck mc_check(const std::vector<ChainTrace>& traces, double analytic,
                        const auto& fn) {
  std::vector<Estimate> parts;
  for (const auto& t : traces) parts.push_back(estimate(t, fn));
  const Estimate e = pool(parts);
  return McCheck{e.mean, e.standard_error, analytic};
}

inline constexpr double kInfoTolContinuous = 1e-8;
inline constexpr double kInfoTolDiscrete = 1e-12;

}  // namespace detail

inline double info_tolerance(bool discrete) {
  return discrete ? detail::kInfoTolDiscrete : detail::kInfoTolContinuous;
}

/// Thresholds applied to every record.
inline std::vector<Check> evaluate_checks(const std::vector<BlockRecord>& blocks,
                                          bool discrete) {
  std::vector<Check> out;
  auto le = [&](std::string name, std::size_t b, double v, double t) {
    out.push_back({std::move(name), b, v, "<=", t, v <= t});
  };
  auto ge = [&](std::string name, std::size_t b, double v, double t) {
    out.push_back({std::move(name), b, v, ">=", t, v >= t});
  };
  const double info_tol = info_tolerance(discrete);
  for (const auto& r : blocks) {
    const std::size_t b = r.block;
    ge("duality_gap", b, r.duality_gap, -1e-10);
    le("full_conditional_attainment", b, r.attainment_error, 1e-8);
    le("functional_upper_bound", b, r.f_max_excess, 1e-8);
    out.push_back({"functional_strictly_below", b, r.f_min_shortfall, ">", 1e-8,
                   r.f_min_shortfall > 1e-8});
    le("functional_gap_identity", b, r.f_identity_error, 1e-8);
    ge("concavity", b, r.concavity_min_slack, -1e-8);
    le("information_equality", b, r.info_residual, info_tol);
    le("information_equality_symmetric", b, r.info_symmetric_residual, info_tol);
    out.push_back({"squashing_constant_range", b, r.squashing_constant,
                   "in (0, t]", 1.0 + 1e-10,
                   r.squashing_constant > 0.0 &&
                       r.squashing_constant <= 1.0 + 1e-10});
    ge("squash_pointwise", b, r.squash_min_slack, -1e-10);
    ge("kl_lower_bound", b, r.kl_factor_marginal - r.kl_lower_bound, -1e-10);
    ge("kl_nonnegative", b, r.kl_factor_marginal, 0.0);
    const std::pair<const char*, const McCheck*> mcs[] = {
        {"mc_mutual_information", &r.mc_mutual_information},
        {"mc_complement_entropy", &r.mc_complement_entropy},
        {"mc_complement_conditional_entropy",
         &r.mc_complement_conditional_entropy}};
    for (const auto& [name, mc] : mcs) {
      if (!mc->standard_error) continue;
      // constant estimands give a zero error; allow summation roundoff
      const double tol = std::max(3.0 * *mc->standard_error, 1e-10);
      le(name, b, std::abs(mc->estimate - mc->analytic), tol);
    }
  }
  return out;
}

/// Runs every theory diagnostic on each block. `traces` feed the Monte Carlo
/// cross-checks and supply extra complement points; `state` is the CAVI
/// result whose factors are examined.
template <class M, class F>
DiagnosticsReport build_report(const M& model,
                               const std::vector<ChainTrace>& traces,
                               const MeanFieldState<F>& state,
                               const DiagnosticsOptions& opt) {
  opt.validate();
  const auto& dec = model.decomposition();
  detail::require_same_model(dec, traces, state.factors.size());
  detail::check_factor_shape(model, state);
  if (!dec.all_scalar_blocks()) {
    throw std::invalid_argument("diagnostics need scalar blocks");
  }
  constexpr bool discrete = M::is_discrete;
  const std::size_t K = dec.num_blocks();

  std::vector<ParamVector> points{reference_point(model)};
  const auto& first = traces.front().samples;
  for (std::size_t m = 1; m <= opt.complement_points && !first.empty(); ++m) {
    points.push_back(first[m * first.size() / (opt.complement_points + 1)]);
  }

  DiagnosticsReport rep;
  rep.family = discrete ? "discrete" : "gaussian";
  Rng rng(opt.suite_seed);
  for (std::size_t i = 0; i < K; ++i) {
    BlockRecord r;
    r.block = i + 1;
    const SupportGrid grid = model.block_support(i, opt.grid_points);
    const TabulatedFactor qi =
        tabulate_factor(model, i, state.factors[i], opt.grid_points);

    // functional bound
    r.reference_complement = split(dec, points.front(), i).complement_values;
    r.log_complement_marginal =
        model.log_complement_marginal(i, r.reference_complement);
    r.duality_gap =
        duality_gap(functional_problem(model, i, r.reference_complement, qi));
    r.f_max_excess = kNegInf;
    r.f_min_shortfall = std::numeric_limits<double>::infinity();
    r.concavity_min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < points.size(); ++p) {
      const Eigen::VectorXd c = split(dec, points[p], i).complement_values;
      const auto s = functional_suite(model, i, c, grid, rng,
                                      opt.property_samples, opt.concavity_samples);
      if (p == 0) r.f_at_full_conditional = s.at_full_conditional;
      r.attainment_error = std::max(
          r.attainment_error, std::abs(s.at_full_conditional - s.reference));
      r.f_max_excess = std::max(r.f_max_excess, s.max_excess);
      r.f_min_shortfall = std::min(r.f_min_shortfall, s.min_shortfall);
      r.f_identity_error = std::max(r.f_identity_error, s.max_identity_error);
      r.f_near_conditional += s.near_conditional;
      r.concavity_min_slack =
          std::min(r.concavity_min_slack, s.min_concavity_slack);
    }
    r.complement_points = points.size();

    // information equality
    const InformationTerms info = information_terms(model, i, opt.tensor_points);
    r.mutual_information = info.mutual_information;
    r.complement_entropy = info.complement_entropy;
    r.complement_conditional_entropy = info.complement_conditional_entropy;
    r.block_entropy = info.block_entropy;
    r.block_conditional_entropy = info.block_conditional_entropy;
    r.info_residual = info.residual();
    r.info_symmetric_residual = info.symmetric_residual();

    auto parts = [&](const ParamVector& th) {
      const auto v = split(dec, th, i);
      return std::array<double, 3>{model.log_posterior_density(th),
                                   model.log_block_marginal(i, v.values),
                                   model.log_complement_marginal(
                                       i, v.complement_values)};
    };
    r.mc_mutual_information =
        detail::mc_check(traces, info.mutual_information, [&](const ParamVector& th) {
          const auto a = parts(th);
          return a[0] - a[1] - a[2];
        });
    r.mc_complement_entropy =
        detail::mc_check(traces, info.complement_entropy, [&](const ParamVector& th) {
          return -parts(th)[2];
        });
    r.mc_complement_conditional_entropy = detail::mc_check(
        traces, info.complement_conditional_entropy, [&](const ParamVector& th) {
          const auto a = parts(th);
          return -(a[0] - a[1]);
        });

    // squashing and KL bound
    const auto R = squashing_constant(model, state, i, opt.tensor_points);
    r.squashing_constant = R.value;
    r.squash_log_numerator = R.log_numerator;
    r.complement_kl = R.complement_kl;
    const SupportGrid sgrid =
        discrete ? model.block_support(i, 0)
                 : [&] {
                     const double lo = grid.nodes(0, 0);
                     const double hi = grid.nodes(0, grid.nodes.cols() - 1);
                     return trapezoid_grid(lo, hi, opt.squash_points);
                   }();
    const auto slack = squash_pointwise_check(model, state, i, sgrid, R.value);
    r.squash_min_slack = slack.min_slack;
    r.squash_argmin = slack.argmin;
    const auto b = kl_lower_bound(model, state, i, opt.tensor_points);
    r.kl_factor_marginal = b.kl;
    r.kl_lower_bound = b.bound;
    r.kl_bound_raw_log = b.raw_log;
    r.raw_log_positive = b.raw_positive();
    rep.blocks.push_back(std::move(r));
  }
  rep.checks = evaluate_checks(rep.blocks, discrete);
  rep.passed = true;
  for (const auto& c : rep.checks) rep.passed = rep.passed && c.passed;
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline Json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}
inline double num_from(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}
inline Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(num(v[k]));
  return a;
}
inline Eigen::VectorXd vec_from(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    v[static_cast<Eigen::Index>(k)] = num_from(j[k]);
  }
  return v;
}
inline Json mc_json(const McCheck& m) {
  Json j;
  j["estimate"] = num(m.estimate);
  j["standard_error"] = m.standard_error ? num(*m.standard_error) : Json(nullptr);
  j["analytic"] = num(m.analytic);
  return j;
}
inline McCheck mc_from(const Json& j) {
  McCheck m;
  m.estimate = num_from(j.at("estimate"));
  if (!j.at("standard_error").is_null()) {
    m.standard_error = j.at("standard_error").get<double>();
  }
  m.analytic = num_from(j.at("analytic"));
  return m;
}

}  // namespace detail

inline Json to_json(const BlockRecord& r) {
  using detail::num;
  Json j;
  j["block"] = r.block;
  j["reference_complement"] = detail::vec(r.reference_complement);
  j["log_complement_marginal"] = num(r.log_complement_marginal);
  j["f_at_full_conditional"] = num(r.f_at_full_conditional);
  j["duality_gap"] = num(r.duality_gap);
  j["attainment_error"] = num(r.attainment_error);
  j["f_max_excess"] = num(r.f_max_excess);
  j["f_min_shortfall"] = num(r.f_min_shortfall);
  j["f_identity_error"] = num(r.f_identity_error);
  j["f_near_conditional"] = r.f_near_conditional;
  j["concavity_min_slack"] = num(r.concavity_min_slack);
  j["complement_points"] = r.complement_points;
  j["mutual_information"] = num(r.mutual_information);
  j["complement_entropy"] = num(r.complement_entropy);
  j["complement_conditional_entropy"] = num(r.complement_conditional_entropy);
  j["block_entropy"] = num(r.block_entropy);
  j["block_conditional_entropy"] = num(r.block_conditional_entropy);
  j["info_residual"] = num(r.info_residual);
  j["info_symmetric_residual"] = num(r.info_symmetric_residual);
  j["squashing_constant"] = num(r.squashing_constant);
  j["squash_log_numerator"] = num(r.squash_log_numerator);
  j["complement_kl"] = num(r.complement_kl);
  j["squash_min_slack"] = num(r.squash_min_slack);
  j["squash_argmin"] = detail::vec(r.squash_argmin);
  j["kl_factor_marginal"] = num(r.kl_factor_marginal);
  j["kl_lower_bound"] = num(r.kl_lower_bound);
  j["kl_bound_raw_log"] = num(r.kl_bound_raw_log);
  j["raw_log_positive"] = r.raw_log_positive;
  j["mc"] = {{"mutual_information", detail::mc_json(r.mc_mutual_information)},
             {"complement_entropy", detail::mc_json(r.mc_complement_entropy)},
             {"complement_conditional_entropy",
              detail::mc_json(r.mc_complement_conditional_entropy)}};
  return j;
}

inline BlockRecord block_record_from_json(const Json& j) {
  using detail::num_from;
  BlockRecord r;
  r.block = j.at("block").get<std::size_t>();
  r.reference_complement = detail::vec_from(j.at("reference_complement"));
  r.log_complement_marginal = num_from(j.at("log_complement_marginal"));
  r.f_at_full_conditional = num_from(j.at("f_at_full_conditional"));
  r.duality_gap = num_from(j.at("duality_gap"));
  r.attainment_error = num_from(j.at("attainment_error"));
  r.f_max_excess = num_from(j.at("f_max_excess"));
  r.f_min_shortfall = num_from(j.at("f_min_shortfall"));
  r.f_identity_error = num_from(j.at("f_identity_error"));
  r.f_near_conditional = j.at("f_near_conditional").get<std::size_t>();
  r.concavity_min_slack = num_from(j.at("concavity_min_slack"));
  r.complement_points = j.at("complement_points").get<std::size_t>();
  r.mutual_information = num_from(j.at("mutual_information"));
  r.complement_entropy = num_from(j.at("complement_entropy"));
  r.complement_conditional_entropy =
      num_from(j.at("complement_conditional_entropy"));
  r.block_entropy = num_from(j.at("block_entropy"));
  r.block_conditional_entropy = num_from(j.at("block_conditional_entropy"));
  r.info_residual = num_from(j.at("info_residual"));
  r.info_symmetric_residual = num_from(j.at("info_symmetric_residual"));
  r.squashing_constant = num_from(j.at("squashing_constant"));
  r.squash_log_numerator = num_from(j.at("squash_log_numerator"));
  r.complement_kl = num_from(j.at("complement_kl"));
  r.squash_min_slack = num_from(j.at("squash_min_slack"));
  r.squash_argmin = detail::vec_from(j.at("squash_argmin"));
  r.kl_factor_marginal = num_from(j.at("kl_factor_marginal"));
  r.kl_lower_bound = num_from(j.at("kl_lower_bound"));
  r.kl_bound_raw_log = num_from(j.at("kl_bound_raw_log"));
  r.raw_log_positive = j.at("raw_log_positive").get<bool>();
  const auto& mc = j.at("mc");
  r.mc_mutual_information = detail::mc_from(mc.at("mutual_information"));
  r.mc_complement_entropy = detail::mc_from(mc.at("complement_entropy"));
  r.mc_complement_conditional_entropy =
      detail::mc_from(mc.at("complement_conditional_entropy"));
  return r;
}

inline Json to_json(const DiagnosticsReport& rep) {
  Json j;
  j["family"] = rep.family;
  j["model"] = rep.model;
  j["config"] = rep.config;
  j["blocks"] = Json::array();
  for (const auto& b : rep.blocks) j["blocks"].push_back(to_json(b));
  j["checks"] = Json::array();
  for (const auto& c : rep.checks) {
    j["checks"].push_back({{"name", c.name},
                           {"block", c.block},
                           {"value", detail::num(c.value)},
                           {"comparison", c.comparison},
                           {"threshold", c.threshold},
                           {"passed", c.passed}});
  }
  j["failures"] = rep.failures();
  j["passed"] = rep.passed;
  return j;
}

inline DiagnosticsReport report_from_json(const Json& j) {
  DiagnosticsReport rep;
  rep.family = j.at("family").get<std::string>();
  rep.model = j.at("model");
  rep.config = j.at("config");
  for (const auto& b : j.at("blocks")) rep.blocks.push_back(block_record_from_json(b));
  for (const auto& c : j.at("checks")) {
    rep.checks.push_back(Check{c.at("name").get<std::string>(),
                               c.at("block").get<std::size_t>(),
                               detail::num_from(c.at("value")),
                               c.at("comparison").get<std::string>(),
                               c.at("threshold").get<double>(),
                               c.at("passed").get<bool>()});
  }
  rep.passed = j.at("passed").get<bool>();
  return rep;
}

/// %.17g, with nan/inf spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One row per block, plot-ready.
inline std::string to_csv(const DiagnosticsReport& rep) {
  std::ostringstream out;
  out << "block,duality_gap,f_at_full_conditional,log_complement_marginal,"
         "mutual_information,complement_entropy,complement_conditional_entropy,"
         "info_residual,info_symmetric_residual,squashing_constant,"
         "squash_min_slack,kl_factor_marginal,kl_lower_bound,kl_bound_raw_log,"
         "passed\n";
  for (const auto& r : rep.blocks) {
    bool ok = true;
    for (const auto& c : rep.checks) {
      if (c.block == r.block) ok = ok && c.passed;
    }
    const double vals[] = {r.duality_gap,
                           r.f_at_full_conditional,
                           r.log_complement_marginal,
                           r.mutual_information,
                           r.complement_entropy,
                           r.complement_conditional_entropy,
                           r.info_residual,
                           r.info_symmetric_residual,
                           r.squashing_constant,
                           r.squash_min_slack,
                           r.kl_factor_marginal,
                           r.kl_lower_bound,
                           r.kl_bound_raw_log};
    out << r.block;
    for (double v : vals) out << ',' << format_double(v);
    out << ',' << (ok ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace duality_bench

#endif  // DUALITY_BENCH_REPORT_HPP
