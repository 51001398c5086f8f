#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "air/air.hpp"
#include "air/config.hpp"
#include "air/experiment.hpp"
#include "air/log.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 1;
};

void add_common(CLI::App* app, Common& c, bool need_config) {
  auto* opt = app->add_option("--config", c.config, "experiment config (JSON)");
  if (need_config) opt->required();
  app->add_option("--seed", c.seed, "overrides the config seed");
  app->add_option("--out", c.out, "output directory (overrides config output_dir)");
  app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

air::ExperimentConfig load(const Common& c) {
  air::ExperimentConfig cfg = air::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  air::set_num_threads(c.threads);
  return cfg;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw air::Error(air::ErrorKind::io, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

int cmd_generate(const Common& c) {
  const auto cfg = load(c);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const air::Dataset data = air::load_source(cfg.dataset, cfg.seed);
  air::write_dataset_binary(data, (dir / "features.airf").string(), (dir / "labels.airl").string());
  air::log::info("wrote " + std::to_string(data.size()) + " examples to " + dir.string());
  return 0;
}

struct CorruptArgs {
  std::string labels;
  std::string confusion;
  double level = -1.0;
  double fraction = -1.0;
  std::string convention = "keep-prob";
};

int cmd_corrupt(const Common& c, const CorruptArgs& a) {
  air::set_num_threads(c.threads);
  const std::uint64_t seed = c.seed.value_or(0);
  const fs::path dir = c.out.empty() ? fs::path("out") : fs::path(c.out);
  const auto lf = air::read_labels_binary(air::detail::read_file(a.labels), a.labels);
  if (lf.multi_label) throw air::Error(air::ErrorKind::config, "corrupt needs single-label data");
  std::vector<air::Label> labels;
  for (const auto& s : lf.labels) labels.push_back(s.front());

  const int modes = (a.confusion.empty() ? 0 : 1) + (a.level >= 0.0 ? 1 : 0) + (a.fraction >= 0.0 ? 1 : 0);
  if (modes != 1) throw air::Error(air::ErrorKind::config, "give exactly one of --confusion, --level, --fraction");

  std::optional<air::ConfusionMatrix> q;
  air::NoisyLabels noisy;
  if (a.fraction >= 0.0) {
    noisy = air::flip_uniform(labels, a.fraction, lf.num_classes, seed);
  } else {
    if (!a.confusion.empty()) {
      std::ifstream in(a.confusion);
      if (!in) throw air::Error(air::ErrorKind::io, "cannot open '" + a.confusion + "'");
      q = air::read_confusion(in);
    } else {
      q = air::confusion_from_noise_level(
          lf.num_classes, a.level,
          a.convention == "paper-literal" ? air::NoiseConvention::paper_literal : air::NoiseConvention::keep_prob);
    }
    noisy = air::corrupt_labels(labels, *q, seed);
  }

  fs::create_directories(dir);
  std::vector<air::LabelSet> sets;
  for (auto l : noisy.labels) sets.push_back({l});
  {
    std::ofstream out(dir / "labels.airl", std::ios::binary);
    air::write_labels_binary(out, sets, lf.num_classes, false);
  }
  {
    std::ofstream out(dir / "clean_mask.csv");
    out << "example,clean\n";
    for (std::size_t i = 0; i < noisy.clean_mask.size(); ++i) out << i << ',' << (noisy.clean_mask[i] ? 1 : 0) << '\n';
  }
  if (q) {
    std::ofstream out(dir / "confusion.txt");
    air::write_confusion(out, *q);
  }
  std::size_t flipped = 0;
  for (bool b : noisy.clean_mask) flipped += b ? 0 : 1;
  air::log::info("corrupted " + std::to_string(flipped) + " of " + std::to_string(labels.size()) + " labels");
  return 0;
}

int cmd_train(const Common& c) {
  const auto cfg = load(c);
  air::run(cfg, cfg.output_dir);
  return 0;
}

int cmd_eval(const Common& c, const std::string& model_path) {
  const auto cfg = load(c);
  const auto data = air::prepare_data(cfg);
  const air::Weights w = air::load_model(model_path);
  const auto report = air::evaluate(w, data.test, cfg.metrics.top_n);
  const auto j = air::to_json(report, "eval");
  if (c.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    fs::create_directories(c.out);
    write_json(fs::path(c.out) / "eval.json", j);
  }
  return 0;
}

int cmd_sweep(const Common& c) {
  const auto cfg = load(c);
  air::sweep(cfg, cfg.output_dir);
  return 0;
}

int cmd_activations(const Common& c, const std::string& model_path) {
  const auto cfg = load(c);
  const auto data = air::prepare_data(cfg);
  const air::Weights w = air::load_model(model_path);
  const air::GroupOperator full(data.train.features, data.train.num_classes, cfg.reg.group_weight);
  full.check_weights(w);
  const auto acts = air::response_activations(w, full, air::observed_labels(data.train));
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  std::ofstream out(dir / "model_activations.csv");
  out << "example,observed_label,activation" << (data.train.clean_mask ? ",clean" : "") << '\n';
  for (std::size_t i = 0; i < acts.size(); ++i) {
    out << i << ',' << data.train.labels[i].front() << ',' << air::detail::fmt(acts[i]);
    if (data.train.clean_mask) out << ',' << ((*data.train.clean_mask)[i] ? 1 : 0);
    out << '\n';
  }
  if (data.train.clean_mask) {
    const auto s = air::activation_stats(acts, *data.train.clean_mask);
    write_json(dir / "model_activations.json", air::to_json(s));
    air::log::info("activation auc " + std::to_string(s.auc) + " gap " + std::to_string(s.gap));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Auxiliary image regularizer experiments"};
  app.require_subcommand(1);

  Common gen_c, cor_c, train_c, eval_c, sweep_c, act_c;
  CorruptArgs cor;
  std::string eval_model, act_model;

  auto* gen = app.add_subcommand("generate", "write the configured dataset as binary feature/label files");
  add_common(gen, gen_c, true);

  auto* corrupt = app.add_subcommand("corrupt", "inject label noise into a binary label file");
  add_common(corrupt, cor_c, false);
  corrupt->add_option("--labels", cor.labels, "binary label file")->required();
  corrupt->add_option("--confusion", cor.confusion, "confusion matrix text file");
  corrupt->add_option("--level", cor.level, "noise level")->check(CLI::Range(0.0, 1.0));
  corrupt->add_option("--fraction", cor.fraction, "fraction of labels to flip")->check(CLI::Range(0.0, 1.0));
  corrupt->add_option("--convention", cor.convention, "keep-prob | paper-literal")
      ->check(CLI::IsMember({"keep-prob", "paper-literal"}));

  auto* train = app.add_subcommand("train", "train, evaluate and write all run artifacts");
  add_common(train, train_c, true);

  auto* eval = app.add_subcommand("eval", "evaluate a saved model on the configured test split");
  add_common(eval, eval_c, true);
  eval->add_option("--model", eval_model, "model file")->required();

  auto* sw = app.add_subcommand("sweep", "repeat runs over noise levels or group fractions");
  add_common(sw, sweep_c, true);

  auto* act = app.add_subcommand("activations", "per-example activations of a saved model");
  add_common(act, act_c, true);
  act->add_option("--model", act_model, "model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(gen_c);
    if (*corrupt) return cmd_corrupt(cor_c, cor);
    if (*train) return cmd_train(train_c);
    if (*eval) return cmd_eval(eval_c, eval_model);
    if (*sw) return cmd_sweep(sweep_c);
    if (*act) return cmd_activations(act_c, act_model);
  } catch (const air::Error& e) {
    air::log::error(e.what());
    if (e.kind() == air::ErrorKind::config) return kExitConfig;
    if (e.kind() == air::ErrorKind::divergence || e.kind() == air::ErrorKind::nonfinite) return kExitDivergence;
    return kExitOther;
  } catch (const std::exception& e) {
    air::log::error(e.what());
    return kExitOther;
  }
  return kExitOther;
}
