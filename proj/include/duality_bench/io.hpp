#ifndef DUALITY_BENCH_IO_HPP
#define DUALITY_BENCH_IO_HPP

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "duality_bench/cavi.hpp"
#include "duality_bench/discrete.hpp"
#include "duality_bench/gaussian.hpp"
#include "duality_bench/gibbs.hpp"
#include "duality_bench/report.hpp"

namespace duality_bench {

/// Column names block{b}_dim{d}, 1-based.
inline std::vector<std::string> coordinate_names(const BlockDecomposition& dec) {
  std::vector<std::string> out;
  for (std::size_t b = 0; b < dec.num_blocks(); ++b) {
    for (std::size_t d = 0; d < dec.block_dim(b); ++d) {
      out.push_back("block" + std::to_string(b + 1) + "_dim" +
                    std::to_string(d + 1));
    }
  }
  return out;
}

inline std::string trace_csv(const BlockDecomposition& dec,
                             const ChainTrace& trace) {
  std::ostringstream out;
  out << "cycle";
  for (const auto& n : coordinate_names(dec)) out << ',' << n;
  out << '\n';
  for (std::size_t k = 0; k < trace.size(); ++k) {
    out << trace.first_cycle() + k;
    const auto& s = trace.samples[k];
    for (Eigen::Index d = 0; d < s.size(); ++d) out << ',' << format_double(s[d]);
    out << '\n';
  }
  return out.str();
}

/// Per-coordinate pooled means with batch-means errors, plus the sample
/// correlation matrix of all retained draws.
inline Json estimates_json(const BlockDecomposition& dec,
                           const std::vector<ChainTrace>& traces) {
  Json j;
  j["n_cycles"] = traces.front().cycle_count;
  j["burn_in"] = traces.front().burn_in;
  j["chains"] = Json::array();
  for (const auto& t : traces) {
    j["chains"].push_back({{"seed", t.seed},
                           {"init", t.init_kind},
                           {"initial", detail::vec(t.initial)},
                           {"retained", t.size()}});
  }
  const auto names = coordinate_names(dec);
  j["coordinates"] = Json::array();
  for (std::size_t d = 0; d < names.size(); ++d) {
    std::vector<Estimate> parts;
    for (const auto& t : traces) {
      parts.push_back(estimate(t, [d](const ParamVector& th) {
        return th[static_cast<Eigen::Index>(d)];
      }));
    }
    const Estimate e = pool(parts);
    j["coordinates"].push_back(
        {{"name", names[d]},
         {"mean", detail::num(e.mean)},
         {"standard_error",
          e.standard_error ? detail::num(*e.standard_error) : Json(nullptr)}});
  }
  const auto D = static_cast<Eigen::Index>(names.size());
  std::size_t n = 0;
  for (const auto& t : traces) n += t.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), D);
  Eigen::Index row = 0;
  for (const auto& t : traces) {
    for (const auto& s : t.samples) x.row(row++) = s.transpose();
  }
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  Json corr = Json::array();
  for (Eigen::Index a = 0; a < D; ++a) {
    Json r = Json::array();
    for (Eigen::Index b = 0; b < D; ++b) {
      r.push_back(detail::num(cov(a, b) / std::sqrt(cov(a, a) * cov(b, b))));
    }
    corr.push_back(std::move(r));
  }
  j["correlation"] = std::move(corr);
  return j;
}

// ---------------------------------------------------------------------------
// Mean-field state

inline Json factor_json(const GaussianFactor& f) {
  Json cov = Json::array();
  for (Eigen::Index r = 0; r < f.dim(); ++r) {
    cov.push_back(detail::vec(f.covariance().row(r).transpose()));
  }
  return {{"mean", detail::vec(f.mean())}, {"covariance", std::move(cov)}};
}

inline Json factor_json(const DiscreteFactor& f) {
  Json p = Json::array();
  for (double v : f.pmf) p.push_back(detail::num(v));
  return {{"pmf", std::move(p)}};
}

template <class F>
Json state_json(const std::string& family, const MeanFieldState<F>& s) {
  Json j;
  j["family"] = family;
  j["converged"] = s.converged;
  j["iterations"] = s.iterations;
  j["last_change"] = detail::num(s.last_change);
  Json hist = Json::array();
  for (double v : s.objective_history) hist.push_back(detail::num(v));
  j["objective_history"] = std::move(hist);
  j["factors"] = Json::array();
  for (std::size_t i = 0; i < s.factors.size(); ++i) {
    Json f = factor_json(s.factors[i]);
    Json rec = {{"block", i + 1}};
    rec.update(f);
    j["factors"].push_back(std::move(rec));
  }
  return j;
}

inline GaussianFactor gaussian_factor_from_json(const Json& j) {
  const Eigen::VectorXd mean = detail::vec_from(j.at("mean"));
  const auto& c = j.at("covariance");
  Eigen::MatrixXd cov(mean.size(), mean.size());
  if (static_cast<Eigen::Index>(c.size()) != mean.size()) {
    throw std::invalid_argument("factor covariance has the wrong shape");
  }
  for (Eigen::Index r = 0; r < mean.size(); ++r) {
    const Eigen::VectorXd row = detail::vec_from(c.at(static_cast<std::size_t>(r)));
    if (row.size() != mean.size()) {
      throw std::invalid_argument("factor covariance has the wrong shape");
    }
    cov.row(r) = row.transpose();
  }
  return GaussianFactor(mean, cov);
}

inline DiscreteFactor discrete_factor_from_json(const Json& j) {
  DiscreteFactor f{j.at("pmf").get<std::vector<double>>()};
  f.validate();
  return f;
}

template <class F>
MeanFieldState<F> state_from_json(const Json& j) {
  MeanFieldState<F> s;
  s.converged = j.at("converged").get<bool>();
  s.iterations = j.at("iterations").get<std::size_t>();
  s.last_change = detail::num_from(j.at("last_change"));
  for (const auto& v : j.at("objective_history")) {
    s.objective_history.push_back(detail::num_from(v));
  }
  for (const auto& f : j.at("factors")) {
    if constexpr (std::is_same_v<F, GaussianFactor>) {
      s.factors.push_back(gaussian_factor_from_json(f));
    } else {
      s.factors.push_back(discrete_factor_from_json(f));
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error(p.string() + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Writes bytes verbatim (LF line endings on every platform).
inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(p.string() + ": cannot write");
  out << text;
  if (!out) throw std::runtime_error(p.string() + ": write failed");
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace duality_bench

#endif  // DUALITY_BENCH_IO_HPP
