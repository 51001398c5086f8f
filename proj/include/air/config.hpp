#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "air/data_io.hpp"
#include "air/error.hpp"
#include "air/noise.hpp"
#include "air/sadmm.hpp"
#include "air/sgd.hpp"

namespace air {

enum class SolverChoice { air_sadmm, air_sgd, l2_sgd, hinge_sgd };

inline const char* to_string(SolverChoice s) {
  switch (s) {
    case SolverChoice::air_sadmm: return "air-sadmm";
    case SolverChoice::air_sgd: return "air-sgd";
    case SolverChoice::l2_sgd: return "l2-sgd";
    case SolverChoice::hinge_sgd: return "hinge-sgd";
  }
  return "unknown";
}

struct IdxSource {
  std::string images;
  std::string labels;
};

struct FileSource {
  std::string features;
  std::string labels;
  FeatureFormat format = FeatureFormat::binary;
  std::optional<std::size_t> num_classes;
};

struct DatasetSpec {
  std::optional<BlobSpec> blobs;
  std::optional<IdxSource> idx;
  std::optional<FileSource> files;
  double test_fraction = 0.3;
};

struct NoiseSpec {
  enum class Kind { none, confusion, flip };
  Kind kind = Kind::none;
  double level = 0.0;
  NoiseConvention convention = NoiseConvention::keep_prob;
  double fraction = 0.0;
};

struct SgdTuning {
  /// Empty: use sgd.rate0 as given. Otherwise pick the candidate with the best
  /// accuracy on a holdout carved from the (noisy) training set.
  std::vector<double> rate_candidates{1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3};
  double holdout_fraction = 0.2;
};

struct MetricsSpec {
  std::vector<std::size_t> top_n{1, 3, 5};
  bool activations = true;
};

struct SweepSpec {
  enum class Axis { noise, groups };
  Axis axis = Axis::noise;
  std::vector<double> values;
  /// Empty: the run seed only.
  std::vector<std::uint64_t> seeds;
  /// Empty: the configured solver only.
  std::vector<SolverChoice> solvers;
};

/// Everything one experiment needs. The resolved JSON form (to_json) is the
/// canonical snapshot and re-parses to an identical config.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  DatasetSpec dataset;
  NoiseSpec noise;
  SolverChoice solver = SolverChoice::air_sadmm;
  SolverConfig sadmm;
  SgdConfig sgd;
  SgdTuning sgd_tuning;
  RegConfig reg;
  MetricsSpec metrics;
  std::optional<SweepSpec> sweep;
};

namespace detail {

using nlohmann::json;

class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j_.is_object(), ErrorKind::config, path_ + " must be an object");
  }

  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, value] : j_.items())
      require(used_.count(key) != 0, ErrorKind::config, "unknown field " + name(key));
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& at(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorKind::config, "field " + name(key) + " has the wrong type");
    }
  }

  std::string get_enum(const std::string& key, const std::string& fallback, const std::set<std::string>& allowed) {
    std::string v = fallback;
    get(key, v);
    require(allowed.count(v) != 0, ErrorKind::config, "field " + name(key) + " has invalid value '" + v + "'");
    return v;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline BlobSpec parse_blobs(const json& j) {
  Fields f(j, "dataset.blobs");
  BlobSpec b;
  f.get("n", b.n);
  f.get("p", b.p);
  f.get("classes", b.num_classes);
  f.get("separation", b.separation);
  f.get("stddev", b.stddev);
  f.get("rectify", b.rectify);
  return b;
}

inline RegConfig parse_reg(const json& j) {
  Fields f(j, "reg");
  RegConfig r;
  f.get("lambda1", r.lambda1);
  f.get("subsample_fraction", r.subsample_fraction);
  if (f.has("group_weight")) {
    Fields g(f.at("group_weight"), "reg.group_weight");
    const auto rule = g.get_enum("rule", "inverse-dim", {"inverse-dim", "constant"});
    r.group_weight.kind = rule == "constant" ? GroupWeightRule::Kind::constant : GroupWeightRule::Kind::inverse_dim;
    g.get("scale", r.group_weight.scale);
  }
  return r;
}

}  // namespace detail

inline SolverChoice solver_from_string(const std::string& s, const std::string& field) {
  if (s == "air-sadmm") return SolverChoice::air_sadmm;
  if (s == "air-sgd") return SolverChoice::air_sgd;
  if (s == "l2-sgd") return SolverChoice::l2_sgd;
  if (s == "hinge-sgd") return SolverChoice::hinge_sgd;
  throw Error(ErrorKind::config, "field " + field + " has invalid value '" + s + "'");
}

/// Points the SGD block at the objective implied by the solver choice.
inline void apply_solver(ExperimentConfig& c, SolverChoice s) {
  c.solver = s;
  c.sgd.objective = s == SolverChoice::air_sgd     ? SgdObjective::air
                    : s == SolverChoice::hinge_sgd ? SgdObjective::l2_hinge
                                                   : SgdObjective::l2_softmax;
}

/// Parses and validates a config. Errors name the offending field.
inline ExperimentConfig parse_config(const nlohmann::json& root) {
  using detail::Fields;
  ExperimentConfig c;
  Fields top(root, "");
  require(top.has("seed"), ErrorKind::config, "missing required field seed");
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);

  require(top.has("dataset"), ErrorKind::config, "missing required field dataset");
  {
    Fields d(top.at("dataset"), "dataset");
    int sources = 0;
    if (d.has("blobs")) {
      c.dataset.blobs = detail::parse_blobs(d.at("blobs"));
      ++sources;
    }
    if (d.has("idx")) {
      Fields x(d.at("idx"), "dataset.idx");
      IdxSource s;
      require(x.has("images") && x.has("labels"), ErrorKind::config, "dataset.idx needs images and labels");
      x.get("images", s.images);
      x.get("labels", s.labels);
      c.dataset.idx = s;
      ++sources;
    }
    if (d.has("files")) {
      Fields x(d.at("files"), "dataset.files");
      FileSource s;
      require(x.has("features") && x.has("labels"), ErrorKind::config, "dataset.files needs features and labels");
      x.get("features", s.features);
      x.get("labels", s.labels);
      s.format = x.get_enum("format", "binary", {"binary", "csv"}) == "csv" ? FeatureFormat::csv : FeatureFormat::binary;
      if (x.has("classes")) {
        std::size_t k = 0;
        x.get("classes", k);
        s.num_classes = k;
      }
      c.dataset.files = s;
      ++sources;
    }
    require(sources == 1, ErrorKind::config, "dataset needs exactly one source (blobs, idx or files)");
    d.get("test_fraction", c.dataset.test_fraction);
    require(c.dataset.test_fraction > 0.0 && c.dataset.test_fraction < 1.0, ErrorKind::config,
            "field dataset.test_fraction must be in (0, 1)");
  }

  if (top.has("noise")) {
    Fields n(top.at("noise"), "noise");
    const auto kind = n.get_enum("kind", "none", {"none", "confusion", "flip"});
    c.noise.kind = kind == "confusion" ? NoiseSpec::Kind::confusion
                   : kind == "flip"    ? NoiseSpec::Kind::flip
                                       : NoiseSpec::Kind::none;
    n.get("level", c.noise.level);
    n.get("fraction", c.noise.fraction);
    c.noise.convention = n.get_enum("convention", "keep-prob", {"keep-prob", "paper-literal"}) == "paper-literal"
                             ? NoiseConvention::paper_literal
                             : NoiseConvention::keep_prob;
    require(c.noise.level >= 0.0 && c.noise.level <= 1.0, ErrorKind::config, "field noise.level must be in [0, 1]");
    require(c.noise.fraction >= 0.0 && c.noise.fraction <= 1.0, ErrorKind::config,
            "field noise.fraction must be in [0, 1]");
  }

  {
    std::string s = "air-sadmm";
    top.get("solver", s);
    c.solver = solver_from_string(s, "solver");
  }

  if (top.has("reg")) c.reg = detail::parse_reg(top.at("reg"));
  c.reg.validate();

  if (top.has("sadmm")) {
    Fields s(top.at("sadmm"), "sadmm");
    s.get("rho0", c.sadmm.rho0);
    s.get("beta", c.sadmm.beta);
    s.get("rho_max", c.sadmm.rho_max);
    s.get("batch_size", c.sadmm.batch_size);
    s.get("epochs", c.sadmm.epochs);
    s.get("tolerance", c.sadmm.tolerance);
    s.get("scale_gradient", c.sadmm.scale_gradient);
    c.sadmm.ridge_mode = s.get_enum("ridge_mode", "exact-quadratic", {"exact-quadratic", "paper-literal"}) ==
                                 "paper-literal"
                             ? RidgeMode::paper_literal
                             : RidgeMode::exact_quadratic;
  }
  c.sadmm.reg = c.reg;
  c.sadmm.validate();

  if (top.has("sgd")) {
    Fields s(top.at("sgd"), "sgd");
    s.get("rate0", c.sgd.rate0);
    s.get("decay", c.sgd.decay);
    s.get("batch_size", c.sgd.batch_size);
    s.get("epochs", c.sgd.epochs);
    s.get("margin", c.sgd.margin);
    s.get("scale_gradient", c.sgd.scale_gradient);
    s.get("rate_candidates", c.sgd_tuning.rate_candidates);
    s.get("holdout_fraction", c.sgd_tuning.holdout_fraction);
    for (double r : c.sgd_tuning.rate_candidates)
      require(r >= 0.0, ErrorKind::config, "field sgd.rate_candidates must be nonnegative");
    require(c.sgd_tuning.holdout_fraction > 0.0 && c.sgd_tuning.holdout_fraction < 1.0, ErrorKind::config,
            "field sgd.holdout_fraction must be in (0, 1)");
  }
  c.sgd.reg = c.reg;
  apply_solver(c, c.solver);
  c.sgd.validate();

  if (top.has("metrics")) {
    Fields m(top.at("metrics"), "metrics");
    m.get("top_n", c.metrics.top_n);
    m.get("activations", c.metrics.activations);
    for (auto n : c.metrics.top_n) require(n >= 1, ErrorKind::config, "field metrics.top_n entries must be >= 1");
  }

  if (top.has("sweep")) {
    Fields w(top.at("sweep"), "sweep");
    SweepSpec sw;
    sw.axis = w.get_enum("axis", "noise", {"noise", "groups"}) == "groups" ? SweepSpec::Axis::groups
                                                                           : SweepSpec::Axis::noise;
    require(w.has("values"), ErrorKind::config, "missing required field sweep.values");
    w.get("values", sw.values);
    require(!sw.values.empty(), ErrorKind::config, "field sweep.values must be nonempty");
    for (double v : sw.values) {
      if (sw.axis == SweepSpec::Axis::groups)
        require(v > 0.0 && v <= 1.0, ErrorKind::config, "field sweep.values must be in (0, 1] for the groups axis");
      else
        require(v >= 0.0 && v <= 1.0, ErrorKind::config, "field sweep.values must be in [0, 1] for the noise axis");
    }
    w.get("seeds", sw.seeds);
    std::vector<std::string> solvers;
    w.get("solvers", solvers);
    for (const auto& s : solvers) sw.solvers.push_back(solver_from_string(s, "sweep.solvers"));
    c.sweep = sw;
  }
  return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json dataset = json::object();
  if (c.dataset.blobs) {
    const auto& b = *c.dataset.blobs;
    dataset["blobs"] = {{"n", b.n},           {"p", b.p},           {"classes", b.num_classes},
                        {"separation", b.separation}, {"stddev", b.stddev}, {"rectify", b.rectify}};
  }
  if (c.dataset.idx) dataset["idx"] = {{"images", c.dataset.idx->images}, {"labels", c.dataset.idx->labels}};
  if (c.dataset.files) {
    dataset["files"] = {{"features", c.dataset.files->features},
                        {"labels", c.dataset.files->labels},
                        {"format", c.dataset.files->format == FeatureFormat::csv ? "csv" : "binary"}};
    if (c.dataset.files->num_classes) dataset["files"]["classes"] = *c.dataset.files->num_classes;
  }
  dataset["test_fraction"] = c.dataset.test_fraction;

  const char* kind = c.noise.kind == NoiseSpec::Kind::confusion ? "confusion"
                     : c.noise.kind == NoiseSpec::Kind::flip    ? "flip"
                                                                : "none";
  json noise = {{"kind", kind},
                {"level", c.noise.level},
                {"fraction", c.noise.fraction},
                {"convention", c.noise.convention == NoiseConvention::paper_literal ? "paper-literal" : "keep-prob"}};

  json reg = {{"lambda1", c.reg.lambda1},
              {"subsample_fraction", c.reg.subsample_fraction},
              {"group_weight",
               {{"rule", c.reg.group_weight.kind == GroupWeightRule::Kind::constant ? "constant" : "inverse-dim"},
                {"scale", c.reg.group_weight.scale}}}};

  json sadmm = {{"rho0", c.sadmm.rho0},
                {"beta", c.sadmm.beta},
                {"rho_max", c.sadmm.rho_max},
                {"batch_size", c.sadmm.batch_size},
                {"epochs", c.sadmm.epochs},
                {"tolerance", c.sadmm.tolerance},
                {"scale_gradient", c.sadmm.scale_gradient},
                {"ridge_mode", c.sadmm.ridge_mode == RidgeMode::paper_literal ? "paper-literal" : "exact-quadratic"}};

  json sgd = {{"rate0", c.sgd.rate0},
              {"decay", c.sgd.decay},
              {"batch_size", c.sgd.batch_size},
              {"epochs", c.sgd.epochs},
              {"margin", c.sgd.margin},
              {"scale_gradient", c.sgd.scale_gradient},
              {"rate_candidates", c.sgd_tuning.rate_candidates},
              {"holdout_fraction", c.sgd_tuning.holdout_fraction}};

  json out = {{"seed", c.seed},
          {"output_dir", c.output_dir},
          {"dataset", dataset},
          {"noise", noise},
          {"solver", to_string(c.solver)},
          {"reg", reg},
          {"sadmm", sadmm},
          {"sgd", sgd},
          {"metrics", {{"top_n", c.metrics.top_n}, {"activations", c.metrics.activations}}}};
  if (c.sweep) {
    std::vector<std::string> solvers;
    for (auto s : c.sweep->solvers) solvers.emplace_back(to_string(s));
    out["sweep"] = {{"axis", c.sweep->axis == SweepSpec::Axis::groups ? "groups" : "noise"},
                    {"values", c.sweep->values},
                    {"seeds", c.sweep->seeds},
                    {"solvers", solvers}};
  }
  return out;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace air
