#ifndef DUALITY_BENCH_CONFIG_HPP
#define DUALITY_BENCH_CONFIG_HPP

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "duality_bench/block.hpp"
#include "duality_bench/report.hpp"

namespace duality_bench {

inline constexpr int kConfigVersion = 1;

/// Malformed or incomplete configuration. The message names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  std::string family;  // "gaussian" | "discrete"
  Json echo;
  // gaussian
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::vector<std::size_t> block_dims;
  // discrete
  std::vector<std::size_t> shape;
  std::vector<double> pmf;
};

struct GibbsSection {
  std::size_t n_cycles = 0;
  std::optional<std::size_t> burn_in;
  std::uint64_t seed = 0;
  std::optional<ParamVector> init;  // empty: draw from the model initializer
};

struct CaviSection {
  std::size_t max_cycles = 100;
  double tolerance = 1e-10;
  std::string init = "default";
};

struct DiagnosticsSection {
  DiagnosticsOptions options;
  std::size_t duality_trials = 100;
  std::optional<std::filesystem::path> state_file;
};

struct OutputSection {
  std::optional<std::string> directory;
  bool json = true;
  bool csv = true;
};

struct RunConfig {
  int config_version = kConfigVersion;
  ModelConfig model;
  std::optional<GibbsSection> gibbs;
  std::optional<CaviSection> cavi;
  std::optional<DiagnosticsSection> diagnostics;
  OutputSection output;
  Json raw;
};

namespace config_detail {

inline const Json& field(const Json& obj, const std::string& path,
                         const std::string& name) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  const auto it = obj.find(name);
  if (it == obj.end()) {
    throw ConfigError(path + "." + name + ": missing field");
  }
  return *it;
}

inline const Json* optional_field(const Json& obj, const std::string& name) {
  const auto it = obj.find(name);
  return it == obj.end() ? nullptr : &*it;
}

inline std::uint64_t as_u64(const Json& v, const std::string& where) {
  if (!v.is_number_unsigned()) {
    throw ConfigError(where + ": expected an unsigned 64-bit integer");
  }
  return v.get<std::uint64_t>();
}

inline std::size_t as_count(const Json& v, const std::string& where,
                            bool positive) {
  const auto n = as_u64(v, where);
  if (positive && n == 0) throw ConfigError(where + ": must be positive");
  return static_cast<std::size_t>(n);
}

inline double as_real(const Json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

inline std::string as_string(const Json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected a string");
  return v.get<std::string>();
}

inline std::vector<double> as_reals(const Json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out.push_back(as_real(v[k], where + "[" + std::to_string(k) + "]"));
  }
  return out;
}

inline std::vector<std::size_t> as_counts(const Json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) {
    throw ConfigError(where + ": expected a non-empty array");
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out.push_back(as_count(v[k], where + "[" + std::to_string(k) + "]", true));
  }
  return out;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

inline ModelConfig parse_model(const Json& m) {
  ModelConfig mc;
  mc.echo = m;
  mc.family = as_string(field(m, "model", "family"), "model.family");
  if (mc.family == "gaussian") {
    mc.mean = to_vector(as_reals(field(m, "model", "mean"), "model.mean"));
    const Json& cov = field(m, "model", "covariance");
    const auto d = mc.mean.size();
    if (!cov.is_array() || static_cast<Eigen::Index>(cov.size()) != d) {
      throw ConfigError("model.covariance: expected " + std::to_string(d) +
                        " rows");
    }
    mc.covariance.resize(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      const auto row = as_reals(cov[static_cast<std::size_t>(r)],
                                "model.covariance[" + std::to_string(r) + "]");
      if (static_cast<Eigen::Index>(row.size()) != d) {
        throw ConfigError("model.covariance[" + std::to_string(r) +
                          "]: expected " + std::to_string(d) + " columns");
      }
      for (Eigen::Index c = 0; c < d; ++c) {
        mc.covariance(r, c) = row[static_cast<std::size_t>(c)];
      }
    }
    mc.block_dims = as_counts(field(m, "model", "block_dims"), "model.block_dims");
    std::size_t total = 0;
    for (auto b : mc.block_dims) total += b;
    if (total != static_cast<std::size_t>(d)) {
      throw ConfigError("model.block_dims: dimensions sum to " +
                        std::to_string(total) + ", mean has " +
                        std::to_string(d));
    }
    if (mc.block_dims.size() < 2) {
      throw ConfigError("model.block_dims: K must exceed 1");
    }
  } else if (mc.family == "discrete") {
    mc.shape = as_counts(field(m, "model", "shape"), "model.shape");
    mc.pmf = as_reals(field(m, "model", "pmf"), "model.pmf");
    std::size_t n = 1;
    for (auto s : mc.shape) n *= s;
    if (mc.pmf.size() != n) {
      throw ConfigError("model.pmf: expected " + std::to_string(n) +
                        " entries for the declared shape");
    }
    if (mc.shape.size() < 2) throw ConfigError("model.shape: K must exceed 1");
  } else {
    throw ConfigError("model.family: expected \"gaussian\" or \"discrete\"");
  }
  return mc;
}

inline GibbsSection parse_gibbs(const Json& g, std::size_t dim) {
  GibbsSection s;
  s.n_cycles = as_count(field(g, "gibbs", "n_cycles"), "gibbs.n_cycles", true);
  s.seed = as_u64(field(g, "gibbs", "seed"), "gibbs.seed");
  if (const Json* b = optional_field(g, "burn_in")) {
    s.burn_in = as_count(*b, "gibbs.burn_in", false);
    if (*s.burn_in >= s.n_cycles) {
      throw ConfigError("gibbs.burn_in: must be smaller than gibbs.n_cycles");
    }
  }
  if (const Json* init = optional_field(g, "init")) {
    if (init->is_string()) {
      if (init->get<std::string>() != "draw") {
        throw ConfigError("gibbs.init: expected \"draw\" or an array");
      }
    } else {
      const auto v = as_reals(*init, "gibbs.init");
      if (v.size() != dim) {
        throw ConfigError("gibbs.init: expected " + std::to_string(dim) +
                          " entries");
      }
      s.init = to_vector(v);
    }
  }
  return s;
}

inline CaviSection parse_cavi(const Json& c) {
  if (!c.is_object()) throw ConfigError("cavi: expected an object");
  CaviSection s;
  if (const Json* v = optional_field(c, "max_cycles")) {
    s.max_cycles = as_count(*v, "cavi.max_cycles", true);
  }
  if (const Json* v = optional_field(c, "tolerance")) {
    s.tolerance = as_real(*v, "cavi.tolerance");
    if (!(s.tolerance > 0.0)) throw ConfigError("cavi.tolerance: must be positive");
  }
  if (const Json* v = optional_field(c, "init")) {
    s.init = as_string(*v, "cavi.init");
  }
  return s;
}

inline DiagnosticsSection parse_diagnostics(const Json& d,
                                            const std::filesystem::path& base) {
  if (!d.is_object()) throw ConfigError("diagnostics: expected an object");
  DiagnosticsSection s;
  auto& o = s.options;
  const std::pair<const char*, std::size_t*> counts[] = {
      {"grid_points", &o.grid_points},
      {"tensor_points", &o.tensor_points},
      {"squash_points", &o.squash_points},
      {"property_samples", &o.property_samples},
      {"concavity_samples", &o.concavity_samples},
      {"complement_points", &o.complement_points}};
  for (const auto& [name, target] : counts) {
    if (const Json* v = optional_field(d, name)) {
      *target = as_count(*v, std::string("diagnostics.") + name, false);
    }
  }
  for (const char* name : {"grid_points", "tensor_points", "squash_points"}) {
    if (const Json* v = optional_field(d, name); v && v->get<std::size_t>() < 2) {
      throw ConfigError(std::string("diagnostics.") + name + ": must be at least 2");
    }
  }
  if (const Json* v = optional_field(d, "suite_seed")) {
    o.suite_seed = as_u64(*v, "diagnostics.suite_seed");
  }
  if (const Json* v = optional_field(d, "duality_trials")) {
    s.duality_trials = as_count(*v, "diagnostics.duality_trials", false);
  }
  if (const Json* v = optional_field(d, "state_file")) {
    std::filesystem::path p = as_string(*v, "diagnostics.state_file");
    s.state_file = p.is_absolute() ? p : base / p;
  }
  return s;
}

inline OutputSection parse_output(const Json& o) {
  if (!o.is_object()) throw ConfigError("output: expected an object");
  OutputSection s;
  if (const Json* v = optional_field(o, "directory")) {
    s.directory = as_string(*v, "output.directory");
  }
  if (const Json* v = optional_field(o, "formats")) {
    if (!v->is_array() || v->empty()) {
      throw ConfigError("output.formats: expected a non-empty array");
    }
    s.json = s.csv = false;
    for (const auto& f : *v) {
      const auto name = as_string(f, "output.formats");
      if (name == "json") {
        s.json = true;
      } else if (name == "csv") {
        s.csv = true;
      } else {
        throw ConfigError("output.formats: unknown format \"" + name + "\"");
      }
    }
  }
  return s;
}

}  // namespace config_detail

/// Parses a config document. Relative paths inside it resolve against
/// `base`.
inline RunConfig parse_config(const Json& j, const std::filesystem::path& base = {}) {
  using namespace config_detail;
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  RunConfig rc;
  rc.raw = j;
  const Json& ver = field(j, "config", "config_version");
  if (!ver.is_number_integer() || ver.get<long long>() != kConfigVersion) {
    throw ConfigError("config.config_version: unsupported version (expected " +
                      std::to_string(kConfigVersion) + ")");
  }
  rc.model = parse_model(field(j, "config", "model"));
  const std::size_t dim = rc.model.family == "gaussian"
                              ? static_cast<std::size_t>(rc.model.mean.size())
                              : rc.model.shape.size();
  if (const Json* g = optional_field(j, "gibbs")) rc.gibbs = parse_gibbs(*g, dim);
  if (const Json* c = optional_field(j, "cavi")) rc.cavi = parse_cavi(*c);
  if (const Json* d = optional_field(j, "diagnostics")) {
    rc.diagnostics = parse_diagnostics(*d, base);
  }
  if (const Json* o = optional_field(j, "output")) rc.output = parse_output(*o);
  return rc;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  Json j;
  try {
    j = Json::parse(buf.str());
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

}  // namespace duality_bench

#endif  // DUALITY_BENCH_CONFIG_HPP
