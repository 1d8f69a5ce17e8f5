#ifndef DUALITY_BENCH_GIBBS_HPP
#define DUALITY_BENCH_GIBBS_HPP

#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "duality_bench/block.hpp"
#include "duality_bench/model.hpp"
#include "duality_bench/rng.hpp"

namespace duality_bench {

struct GibbsConfig {
  std::size_t n_cycles = 0;
  std::size_t burn_in = 0;
  std::uint64_t seed = 0;
  /// Starting point θ⁽¹⁾; when empty the model's initializer h(θ) is drawn.
  std::optional<ParamVector> init;

  /// Burn-in defaults to 10% of the cycles.
  static GibbsConfig with_default_burn_in(std::size_t n_cycles,
                                          std::uint64_t seed) {
    return GibbsConfig{n_cycles, n_cycles / 10, seed, std::nullopt};
  }

  void validate() const {
    if (n_cycles == 0) throw std::invalid_argument("n_cycles must be positive");
    if (burn_in >= n_cycles) {
      throw std::invalid_argument("burn_in must be smaller than n_cycles");
    }
  }
};

/// Post-burn-in samples of one chain. samples[k] is the state after cycle
/// burn_in + k + 1.
struct ChainTrace {
  std::vector<ParamVector> samples;
  std::size_t cycle_count = 0;
  std::size_t burn_in = 0;
  std::uint64_t seed = 0;
  std::string init_kind;  // "point" or the model initializer name
  ParamVector initial;

  std::size_t size() const { return samples.size(); }
  std::size_t first_cycle() const { return burn_in + 1; }
};

/// One systematic-scan sweep: block i is drawn from π(θᵢ | θ₋ᵢ) where the
/// blocks before i already hold this sweep's draws.
template <TargetModel M>
ParamVector gibbs_cycle(const M& model, const ParamVector& theta, Rng& rng) {
  const auto& dec = model.decomposition();
  dec.check_vector(theta);
  ParamVector state = theta;
  for (std::size_t i = 0; i < dec.num_blocks(); ++i) {
    const auto view = split(dec, state, i);
    const auto conditional = model.full_conditional(i, view.complement_values);
    state = substitute(dec, state, i, conditional.sample(rng));
  }
  return state;
}

template <TargetModel M>
ChainTrace run_chain(const M& model, const GibbsConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  ChainTrace trace;
  trace.cycle_count = cfg.n_cycles;
  trace.burn_in = cfg.burn_in;
  trace.seed = cfg.seed;
  if (cfg.init) {
    model.decomposition().check_vector(*cfg.init);
    trace.initial = *cfg.init;
    trace.init_kind = "point";
  } else {
    trace.initial = model.initial_draw(rng);
    trace.init_kind = std::string(model.initializer_name());
  }
  trace.samples.reserve(cfg.n_cycles - cfg.burn_in);
  ParamVector state = trace.initial;
  for (std::size_t s = 1; s <= cfg.n_cycles; ++s) {
    state = gibbs_cycle(model, state, rng);
    if (s > cfg.burn_in) trace.samples.push_back(state);
  }
  return trace;
}

/// Runs n_chains chains concurrently with seeds seed, seed + 1, ...
template <TargetModel M>
std::vector<ChainTrace> run_chains(const M& model, const GibbsConfig& cfg,
                                   std::size_t n_chains) {
  if (n_chains == 0) throw std::invalid_argument("need at least one chain");
  cfg.validate();
  std::vector<ChainTrace> traces(n_chains);
  if (n_chains == 1) {
    traces[0] = run_chain(model, cfg);
    return traces;
  }
  std::vector<std::exception_ptr> errors(n_chains);
  {
    std::vector<std::jthread> workers;
    for (std::size_t c = 0; c < n_chains; ++c) {
      workers.emplace_back([&, c] {
        try {
          GibbsConfig local = cfg;
          local.seed = cfg.seed + c;
          traces[c] = run_chain(model, local);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return traces;
}

/// log K_G(from, to) = Σᵢ log π(toᵢ | to_j for j < i, from_j for j > i).
template <TargetModel M>
double kernel_log_density(const M& model, const ParamVector& from,
                          const ParamVector& to) {
  const auto& dec = model.decomposition();
  dec.check_vector(from);
  dec.check_vector(to);
  ParamVector state = from;
  double acc = 0.0;
  for (std::size_t i = 0; i < dec.num_blocks(); ++i) {
    const auto view = split(dec, state, i);
    const auto target_block = split(dec, to, i).values;
    acc += model.full_conditional(i, view.complement_values)
               .log_density(target_block);
    state = substitute(dec, state, i, target_block);
  }
  return acc;
}

/// Sample mean with a batch-means standard error. The error is only
/// reported for at least 64 values.
struct Estimate {
  double mean = 0.0;
  std::optional<double> standard_error;
  std::size_t count = 0;
};

inline constexpr std::size_t kBatches = 32;
inline constexpr std::size_t kMinSamplesForError = 64;

inline Estimate batch_means(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("empty trace");
  Estimate est;
  est.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  est.mean = sum / static_cast<double>(values.size());
  if (values.size() < kMinSamplesForError) return est;

  const std::size_t b = values.size() / kBatches;
  std::vector<double> means(kBatches, 0.0);
  double grand = 0.0;
  for (std::size_t k = 0; k < kBatches; ++k) {
    for (std::size_t j = 0; j < b; ++j) means[k] += values[k * b + j];
    means[k] /= static_cast<double>(b);
    grand += means[k];
  }
  grand /= static_cast<double>(kBatches);
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  est.standard_error =
      std::sqrt(ss / static_cast<double>(kBatches - 1) / kBatches);
  return est;
}

template <class Fn>
Estimate estimate(const ChainTrace& trace, Fn&& functional) {
  std::vector<double> values;
  values.reserve(trace.size());
  for (const auto& s : trace.samples) values.push_back(functional(s));
  return batch_means(values);
}

/// Pools per-chain estimates of equal-length chains: the mean of means and
/// the root-sum-square of errors divided by the number of chains.
inline Estimate pool(const std::vector<Estimate>& parts) {
  if (parts.empty()) throw std::invalid_argument("nothing to pool");
  Estimate out;
  double var = 0.0;
  bool have_error = true;
  for (const auto& p : parts) {
    out.mean += p.mean * static_cast<double>(p.count);
    out.count += p.count;
    if (p.standard_error) {
      var += *p.standard_error * *p.standard_error;
    } else {
      have_error = false;
    }
  }
  out.mean /= static_cast<double>(out.count);
  if (have_error) {
    out.standard_error = std::sqrt(var) / static_cast<double>(parts.size());
  }
  return out;
}

}  // namespace duality_bench

#endif  // DUALITY_BENCH_GIBBS_HPP
