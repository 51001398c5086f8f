#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "air/config.hpp"
#include "air/data_io.hpp"
#include "air/log.hpp"
#include "air/metrics.hpp"
#include "air/model_io.hpp"
#include "air/noise.hpp"
#include "air/sadmm.hpp"
#include "air/sgd.hpp"

namespace air {

/// Seed streams derived from the run seed.
namespace seed_stream {
inline constexpr std::uint64_t blobs = 10;
inline constexpr std::uint64_t split = 11;
inline constexpr std::uint64_t noise = 12;
inline constexpr std::uint64_t solver = 13;
inline constexpr std::uint64_t groups = 14;
inline constexpr std::uint64_t holdout = 15;
}  // namespace seed_stream

inline Dataset load_source(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.blobs) {
    BlobSpec b = *spec.blobs;
    b.seed = derive_seed(seed, seed_stream::blobs);
    return generate_blobs(b);
  }
  if (spec.idx) return load_idx(spec.idx->images, spec.idx->labels);
  require(spec.files.has_value(), ErrorKind::config, "dataset needs exactly one source (blobs, idx or files)");
  return load_features(spec.files->features, spec.files->labels, spec.files->format, spec.files->num_classes);
}

/// Applies the noise spec to a dataset. `none` leaves it untouched.
inline Dataset apply_noise(const Dataset& data, const NoiseSpec& noise, std::uint64_t seed) {
  if (noise.kind == NoiseSpec::Kind::none) return data;
  require(!data.multi_label, ErrorKind::config, "label noise needs single-label data");
  const auto labels = single_labels(data);
  if (noise.kind == NoiseSpec::Kind::flip)
    return with_noisy_labels(data, flip_uniform(labels, noise.fraction, data.num_classes, seed));
  const auto q = confusion_from_noise_level(data.num_classes, noise.level, noise.convention);
  return with_noisy_labels(data, corrupt_labels(labels, q, seed));
}

struct PreparedData {
  /// Training split with (possibly) corrupted labels.
  Dataset train;
  /// Held-out split with clean labels.
  Dataset test;
};

inline PreparedData prepare_data(const ExperimentConfig& cfg) {
  const Dataset all = load_source(cfg.dataset, cfg.seed);
  auto [train, test] = split(all, cfg.dataset.test_fraction, derive_seed(cfg.seed, seed_stream::split));
  return {apply_noise(train, cfg.noise, derive_seed(cfg.seed, seed_stream::noise)), std::move(test)};
}

/// Solver configs with the run seed streams filled in.
inline SolverConfig effective_sadmm(const ExperimentConfig& cfg) {
  SolverConfig s = cfg.sadmm;
  s.reg = cfg.reg;
  s.reg.subsample_seed = derive_seed(cfg.seed, seed_stream::groups);
  s.seed = derive_seed(cfg.seed, seed_stream::solver);
  return s;
}

inline SgdConfig effective_sgd(const ExperimentConfig& cfg) {
  SgdConfig s = cfg.sgd;
  s.reg = cfg.reg;
  s.reg.subsample_seed = derive_seed(cfg.seed, seed_stream::groups);
  s.seed = derive_seed(cfg.seed, seed_stream::solver);
  return s;
}

/// Picks the SGD rate with the best accuracy on a holdout of the training set,
/// scored against the observed labels. Diverging candidates are skipped;
/// ties keep the earlier candidate.
inline double tune_sgd_rate(const Dataset& train, const SgdConfig& base, const SgdTuning& tuning, std::uint64_t seed) {
  if (tuning.rate_candidates.empty()) return base.rate0;
  auto [fit, hold] = split(train, tuning.holdout_fraction, derive_seed(seed, seed_stream::holdout));
  hold.true_labels.reset();
  hold.clean_mask.reset();
  double best_rate = base.rate0, best_acc = -1.0;
  for (double r : tuning.rate_candidates) {
    SgdConfig c = base;
    c.rate0 = r;
    try {
      const double acc = accuracy(sgd_train(fit, c).model, hold);
      log::debug("rate " + std::to_string(r) + " holdout accuracy " + std::to_string(acc));
      if (acc > best_acc) {
        best_acc = acc;
        best_rate = r;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::divergence && e.kind() != ErrorKind::nonfinite) throw;
      log::debug("rate " + std::to_string(r) + " diverged");
    }
  }
  return best_rate;
}

struct FitResult {
  Weights model;
  std::vector<StepRecord> history;
  std::size_t epochs_run = 0;
  bool converged = false;
  /// SGD rate actually used (after tuning); 0 for SADMM.
  double rate0 = 0.0;
  /// Per-epoch activation of each training example's observed-label group.
  std::vector<std::vector<double>> epoch_activations;
  /// Regularized objective of the final model on the training split: the AIR
  /// objective over the solver's active groups, or loss + ridge for the L2
  /// baselines.
  double objective = 0.0;
};

inline std::vector<std::size_t> observed_labels(const Dataset& data) {
  std::vector<std::size_t> obs(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) obs[i] = data.labels[i].empty() ? 0 : data.labels[i].front();
  return obs;
}

/// Activations ||X_g w|| of each example's observed-label group over all groups.
inline std::vector<double> response_activations(const Weights& w, const GroupOperator& full,
                                                const std::vector<std::size_t>& observed) {
  return example_activations(full.forward(w), full, observed);
}

struct FitHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(std::size_t epoch, const std::optional<ActivationStats>&)> on_epoch;
};

/// Trains the configured solver on prepared.train. Activations are tracked
/// when requested and the training labels carry a clean mask: v-bar for
/// AIR-SADMM, ||X_g w|| for the SGD solvers.
inline FitResult fit(const ExperimentConfig& cfg, const Dataset& train, const FitHooks& hooks = {}) {
  FitResult out;
  const bool track = cfg.metrics.activations && train.clean_mask.has_value() && !train.multi_label;
  const auto observed = observed_labels(train);
  std::optional<GroupOperator> full;
  if (track) full.emplace(train.features, train.num_classes, cfg.reg.group_weight);

  auto record = [&](std::size_t epoch, std::vector<double> acts) {
    std::optional<ActivationStats> stats;
    if (track) {
      stats = activation_stats(acts, *train.clean_mask, epoch);
      out.epoch_activations.push_back(std::move(acts));
    }
    if (hooks.on_epoch) hooks.on_epoch(epoch, stats);
  };

  if (cfg.solver == SolverChoice::air_sadmm) {
    const SolverConfig sc = effective_sadmm(cfg);
    SadmmSolver probe(train, sc);
    TrainHooks th;
    th.on_step = hooks.on_step;
    th.on_epoch = [&](std::size_t epoch, const SolverState& st) {
      record(epoch, track ? example_activations(st.v_bar, probe.op(), observed) : std::vector<double>{});
    };
    TrainResult r = train_sadmm(train, sc, th);
    out.model = std::move(r.model);
    out.history = std::move(r.history);
    out.epochs_run = r.epochs_run;
    out.converged = r.converged;
    out.objective = air_objective(out.model, train, probe.op(), sc.reg.lambda1, probe.loss());
    return out;
  }

  SgdConfig gc = effective_sgd(cfg);
  gc.rate0 = tune_sgd_rate(train, gc, cfg.sgd_tuning, cfg.seed);
  log::info(std::string("sgd rate0 = ") + std::to_string(gc.rate0));
  SgdHooks sh;
  sh.on_step = hooks.on_step;
  sh.on_epoch = [&](std::size_t epoch, const Weights& w) {
    record(epoch, track ? response_activations(w, *full, observed) : std::vector<double>{});
  };
  SgdResult r = sgd_train(train, gc, sh);
  out.model = std::move(r.model);
  out.history = std::move(r.history);
  out.epochs_run = r.epochs_run;
  out.rate0 = gc.rate0;
  const LossKind loss = gc.loss_for(train);
  out.objective = loss_gradient(loss, out.model, train, MiniBatch::full(train.size()), false, gc.margin).value +
                  gc.reg.lambda1 * dot(out.model.values(), out.model.values());
  if (gc.objective == SgdObjective::air) {
    const GroupOperator op = make_operator(train.features, train.num_classes, gc.reg);
    out.objective += group_norm_value(op.forward(out.model), op);
  }
  return out;
}

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<std::pair<std::size_t, PrecisionRecall>> precision_recall;
  MapResult map_label;
  MapResult map_image;
  std::optional<ActivationReport> activations;
  double objective = 0.0;
  std::size_t epochs_run = 0;
  bool converged = false;
  double rate0 = 0.0;
  std::vector<double> residual_history;
};

inline MetricsReport evaluate(const Weights& model, const Dataset& test, const std::vector<std::size_t>& top_n) {
  MetricsReport m;
  const Matrix scores = score_matrix(model, test);
  const auto truth = ground_truth(test);
  m.accuracy = accuracy(scores, truth);
  for (std::size_t n : top_n) m.precision_recall.emplace_back(n, precision_recall_at_n(scores, truth, n));
  m.map_label = mean_average_precision(scores, truth, MapAxis::per_label);
  m.map_image = mean_average_precision(scores, truth, MapAxis::per_image);
  return m;
}

inline MetricsReport build_report(const ExperimentConfig& cfg, const PreparedData& data, const FitResult& fr) {
  MetricsReport m = evaluate(fr.model, data.test, cfg.metrics.top_n);
  m.activations = activation_report(fr.epoch_activations, data.train.clean_mask);
  m.objective = fr.objective;
  m.epochs_run = fr.epochs_run;
  m.converged = fr.converged;
  m.rate0 = fr.rate0;
  for (const auto& s : fr.history) m.residual_history.push_back(s.primal_residual);
  return m;
}

inline nlohmann::json to_json(const ActivationStats& s) {
  return {{"epoch", s.epoch},       {"clean_mean", s.clean_mean}, {"clean_sd", s.clean_sd},
          {"noisy_mean", s.noisy_mean}, {"noisy_sd", s.noisy_sd},   {"gap", s.gap},
          {"auc", s.auc},           {"clean_count", s.clean_count}, {"noisy_count", s.noisy_count}};
}

inline nlohmann::json to_json(const MetricsReport& m, const std::string& solver) {
  using nlohmann::json;
  json pr = json::array();
  for (const auto& [n, r] : m.precision_recall)
    pr.push_back({{"n", n}, {"precision", r.precision}, {"recall", r.recall}, {"skipped", r.skipped}});
  json j = {{"solver", solver},
            {"accuracy", m.accuracy},
            {"precision_recall", pr},
            {"map_label", {{"value", m.map_label.value}, {"skipped", m.map_label.skipped}}},
            {"map_image", {{"value", m.map_image.value}, {"skipped", m.map_image.skipped}}},
            {"objective", m.objective},
            {"epochs_run", m.epochs_run},
            {"converged", m.converged},
            {"sgd_rate0", m.rate0},
            {"residual_history", m.residual_history}};
  if (m.activations) {
    json series = json::array();
    for (const auto& s : m.activations->series) series.push_back(to_json(s));
    j["activations"] = {{"series", series},
                        {"first_auc", m.activations->series.front().auc},
                        {"final_auc", m.activations->series.back().auc},
                        {"final_gap", m.activations->series.back().gap}};
  }
  return j;
}

namespace detail {

/// Shortest text that round-trips exactly; locale-independent.
inline std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::io, "cannot write '" + path.string() + "'");
  out << text;
  require(out.good(), ErrorKind::io, "write failed for '" + path.string() + "'");
}

}  // namespace detail

struct RunOutput {
  MetricsReport metrics;
  Weights model;
};

/// Full experiment: prepare data, train, evaluate, and write
///   config.resolved.json, train_log.jsonl, model.airw, metrics.json,
///   precision_recall.csv and (with a clean mask) activations.csv and
///   activation_ranking.csv into `out_dir`.
inline RunOutput run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  detail::write_text(out_dir / "config.resolved.json", to_json(cfg).dump(2) + "\n");

  const PreparedData data = prepare_data(cfg);
  log::info("train " + std::to_string(data.train.size()) + " / test " + std::to_string(data.test.size()) +
            " examples, solver " + to_string(cfg.solver));

  std::ostringstream logbuf;
  FitHooks hooks;
  hooks.on_step = [&](const StepRecord& r) {
    logbuf << nlohmann::json{{"type", "step"},
                             {"k", r.k},
                             {"epoch", r.epoch},
                             {"rho", r.rho},
                             {"primal_residual", r.primal_residual},
                             {"dual_residual", r.dual_residual},
                             {"objective_estimate", r.objective_estimate}}
                  .dump()
           << '\n';
  };
  hooks.on_epoch = [&](std::size_t epoch, const std::optional<ActivationStats>& s) {
    nlohmann::json j = {{"type", "epoch"}, {"epoch", epoch}};
    if (s) {
      j["activation_auc"] = s->auc;
      j["activation_gap"] = s->gap;
    }
    logbuf << j.dump() << '\n';
    log::debug("epoch " + std::to_string(epoch) + (s ? " auc " + std::to_string(s->auc) : std::string{}));
  };

  FitResult fr = fit(cfg, data.train, hooks);
  detail::write_text(out_dir / "train_log.jsonl", logbuf.str());
  save_model((out_dir / "model.airw").string(), fr.model);

  RunOutput out{build_report(cfg, data, fr), fr.model};
  detail::write_text(out_dir / "metrics.json", to_json(out.metrics, to_string(cfg.solver)).dump(2) + "\n");

  std::ostringstream pr;
  pr << "n,precision,recall\n";
  for (const auto& [n, r] : out.metrics.precision_recall)
    pr << n << ',' << detail::fmt(r.precision) << ',' << detail::fmt(r.recall) << '\n';
  detail::write_text(out_dir / "precision_recall.csv", pr.str());

  if (out.metrics.activations) {
    const auto& rep = *out.metrics.activations;
    std::ostringstream a;
    a << "epoch,clean_mean,clean_sd,noisy_mean,noisy_sd,gap,auc\n";
    for (const auto& s : rep.series)
      a << s.epoch << ',' << detail::fmt(s.clean_mean) << ',' << detail::fmt(s.clean_sd) << ','
        << detail::fmt(s.noisy_mean) << ',' << detail::fmt(s.noisy_sd) << ',' << detail::fmt(s.gap) << ','
        << detail::fmt(s.auc) << '\n';
    detail::write_text(out_dir / "activations.csv", a.str());

    std::ostringstream rk;
    rk << "rank,example,activation,clean\n";
    const auto& last = fr.epoch_activations.back();
    for (std::size_t r = 0; r < rep.ranking.size(); ++r) {
      const std::size_t i = rep.ranking[r];
      rk << r << ',' << i << ',' << detail::fmt(last[i]) << ',' << ((*data.train.clean_mask)[i] ? 1 : 0) << '\n';
    }
    detail::write_text(out_dir / "activation_ranking.csv", rk.str());
  }
  log::info("accuracy " + std::to_string(out.metrics.accuracy));
  return out;
}

struct SweepRow {
  std::string solver;
  double value = 0.0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double gap = 0.0;
  double auc = 0.5;
};

/// Config for one sweep cell: the axis value applied to the noise level (or
/// flip fraction) or to the group fraction.
inline ExperimentConfig sweep_cell(const ExperimentConfig& base, SweepSpec::Axis axis, double value,
                                   std::uint64_t seed, SolverChoice solver) {
  ExperimentConfig c = base;
  c.seed = seed;
  c.sweep.reset();
  apply_solver(c, solver);
  if (axis == SweepSpec::Axis::groups) {
    c.reg.subsample_fraction = value;
  } else if (c.noise.kind == NoiseSpec::Kind::flip) {
    c.noise.fraction = value;
  } else {
    c.noise.kind = value > 0.0 ? NoiseSpec::Kind::confusion : NoiseSpec::Kind::none;
    c.noise.level = value;
  }
  c.sadmm.reg = c.reg;
  c.sgd.reg = c.reg;
  return c;
}

/// Runs every (solver, value, seed) cell in memory and writes sweep.csv.
inline std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  require(cfg.sweep.has_value(), ErrorKind::config, "sweep needs a sweep block");
  const SweepSpec& sw = *cfg.sweep;
  const auto seeds = sw.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : sw.seeds;
  const auto solvers = sw.solvers.empty() ? std::vector<SolverChoice>{cfg.solver} : sw.solvers;
  std::filesystem::create_directories(out_dir);
  detail::write_text(out_dir / "config.resolved.json", to_json(cfg).dump(2) + "\n");

  std::vector<SweepRow> rows;
  for (SolverChoice s : solvers)
    for (double v : sw.values)
      for (std::uint64_t seed : seeds) {
        const ExperimentConfig c = sweep_cell(cfg, sw.axis, v, seed, s);
        const PreparedData data = prepare_data(c);
        const FitResult fr = fit(c, data.train);
        const MetricsReport m = build_report(c, data, fr);
        SweepRow row{to_string(s), v, seed, m.accuracy, 0.0, 0.5};
        if (m.activations) {
          row.gap = m.activations->series.back().gap;
          row.auc = m.activations->series.back().auc;
        }
        log::info(row.solver + " value " + detail::fmt(v) + " seed " + std::to_string(seed) + " accuracy " +
                  std::to_string(row.accuracy));
        rows.push_back(row);
      }

  std::ostringstream csv;
  csv << "solver,value,seed,accuracy,gap,auc\n";
  for (const auto& r : rows)
    csv << r.solver << ',' << detail::fmt(r.value) << ',' << r.seed << ',' << detail::fmt(r.accuracy) << ','
        << detail::fmt(r.gap) << ',' << detail::fmt(r.auc) << '\n';
  detail::write_text(out_dir / "sweep.csv", csv.str());
  return rows;
}

}  // namespace air
