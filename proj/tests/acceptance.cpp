// Acceptance runner: one PASS/FAIL line per criterion.
//   acceptance                   run all criteria
//   acceptance --criterion N     run one; exit 0 pass, 1 fail, 77 skipped

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"

#include "air/air.hpp"
#include "air/experiment.hpp"
#include "metric_fixture.hpp"
#include "oracles.hpp"

using namespace air;
namespace fs = std::filesystem;

namespace {

enum class Outcome { pass, fail, skip };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Verdict verdict(bool ok, std::string detail) { return {ok ? Outcome::pass : Outcome::fail, std::move(detail)}; }

// 1. prox: optimality to 1e-10, firm nonexpansiveness, brute force to 1e-6.
Verdict prox_correctness() {
  Rng rng(101);
  double worst_opt = 0.0, worst_brute = 0.0, worst_firm = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 1 + rng.index(16);
    const double scale = std::exp(rng.normal());
    std::vector<double> z(d), z2(d);
    for (std::size_t i = 0; i < d; ++i) {
      z[i] = scale * rng.normal();
      z2[i] = scale * rng.normal();
    }
    const double alpha = scale * 2.0 * rng.uniform() * std::sqrt(static_cast<double>(d));
    const auto y = prox_group(z, alpha);
    const double ny = norm2(y), nz = norm2(z);
    double opt = 0.0;
    if (ny == 0.0) {
      opt = std::max(0.0, nz - alpha);
    } else {
      for (std::size_t i = 0; i < d; ++i) opt = std::max(opt, std::abs(y[i] - z[i] + alpha * y[i] / ny));
    }
    worst_opt = std::max(worst_opt, opt / std::max(1.0, nz));

    const auto b = oracle::brute_force_prox(z, alpha);
    for (std::size_t i = 0; i < d; ++i) worst_brute = std::max(worst_brute, std::abs(b[i] - y[i]));

    const auto y2 = prox_group(z2, alpha);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      lhs += (y[i] - y2[i]) * (y[i] - y2[i]);
      rhs += (y[i] - y2[i]) * (z[i] - z2[i]);
    }
    worst_firm = std::max(worst_firm, (lhs - rhs) / std::max(1.0, rhs));
  }
  return verdict(worst_opt <= 1e-10 && worst_brute <= 1e-6 && worst_firm <= 1e-12,
                 fmt("1000 instances: optimality residual %.2e (<=1e-10), brute-force gap %.2e (<=1e-6), "
                     "firm-nonexpansive excess %.2e",
                     worst_opt, worst_brute, worst_firm));
}

// 2. implicit F against a dense materialization.
Verdict operator_equivalence() {
  Rng rng(202);
  double worst = 0.0;
  std::size_t offdiag_nonzero = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.index(8), p = 1 + rng.index(8), C = 1 + rng.index(4);
    auto x = std::make_shared<const Matrix>(oracle::random_matrix(rng, n, p));
    std::optional<std::vector<std::size_t>> active;
    if (t % 2 == 1) active = sample_groups(n * C, 0.5, rng.index(1000));
    const GroupOperator op(x, C, {}, active);
    const Matrix f = oracle::dense_f(*x, C, op.active_groups());

    const Matrix w = oracle::random_matrix(rng, p, C);
    const auto fw = oracle::matvec(f, oracle::vec(w));
    const auto v = op.forward(w);
    for (std::size_t k = 0; k < v.rows(); ++k)
      for (std::size_t j = 0; j < p; ++j) worst = std::max(worst, std::abs(v(k, j) - fw[k * p + j]));

    const Matrix r = oracle::random_matrix(rng, op.num_groups(), p);
    const auto ftr = oracle::matvec_t(f, std::vector<double>(r.values().begin(), r.values().end()));
    const Matrix adj = op.adjoint(r);
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t c = 0; c < C; ++c) worst = std::max(worst, std::abs(adj(j, c) - ftr[oracle::wcol(j, c, p)]));

    const Matrix g = oracle::gram(f);
    const Matrix dg = op.gram_diagonal();
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t col = oracle::wcol(j, c, p);
        worst = std::max(worst, std::abs(dg(j, c) - g(col, col)));
        // column of the implicit F^T F through adjoint(forward(e))
        Matrix e(p, C, 0.0);
        e(j, c) = 1.0;
        const Matrix ftfe = op.adjoint(op.forward(e));
        for (std::size_t jj = 0; jj < p; ++jj)
          for (std::size_t cc = 0; cc < C; ++cc) {
            const std::size_t row = oracle::wcol(jj, cc, p);
            if (row == col) continue;
            offdiag_nonzero += ftfe(jj, cc) != 0.0;
            offdiag_nonzero += g(row, col) != 0.0;
          }
      }
  }
  return verdict(worst <= 1e-12 && offdiag_nonzero == 0,
                 fmt("200 instances: max |implicit - dense| %.2e (<=1e-12), nonzero F^T F off-diagonals %zu",
                     worst, offdiag_nonzero));
}

// 3. loss gradients against central differences of the naive formulas.
Verdict gradient_checks() {
  Rng rng(303);
  double worst_soft = 0.0, worst_hinge = 0.0;
  int hinge_done = 0, attempts = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.index(10), p = 1 + rng.index(6), C = 2 + rng.index(4);
    const auto d = oracle::random_dataset(rng, std::max(n, C), p, C);
    std::vector<std::size_t> idx(d.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const Matrix w = oracle::random_matrix(rng, p, C);
    const auto lg = softmax_loss_gradient(w, d, MiniBatch::full(d.size()));
    const auto fd =
        oracle::finite_difference([&](const Matrix& m) { return oracle::naive_softmax_loss(m, d, idx); }, w, 1e-5);
    worst_soft = std::max(worst_soft, oracle::max_relative_error(lg.gradient, fd));
  }
  while (hinge_done < 100 && attempts < 10000) {
    ++attempts;
    const std::size_t p = 1 + rng.index(6), C = 2 + rng.index(4), n = C + rng.index(8);
    const auto d = oracle::random_dataset(rng, n, p, C);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    const Matrix w = oracle::random_matrix(rng, p, C);
    // the hinge is not differentiable at its kink; keep a margin of 1e-3
    bool near_kink = false;
    for (std::size_t i = 0; i < n && !near_kink; ++i) {
      const auto s = predict_scores(w, d.x().row(i));
      for (std::size_t c = 0; c < C; ++c)
        near_kink |= std::abs(1.0 - (c == d.label(i) ? 1.0 : -1.0) * s[c]) < 1e-3;
    }
    if (near_kink) continue;
    ++hinge_done;
    const auto lg = hinge_loss_gradient(w, d, MiniBatch::full(n));
    const auto fd = oracle::finite_difference(
        [&](const Matrix& m) { return oracle::naive_hinge_loss(m, d, idx, 1.0); }, w, 1e-5);
    worst_hinge = std::max(worst_hinge, oracle::max_relative_error(lg.gradient, fd));
  }
  return verdict(worst_soft <= 1e-5 && worst_hinge <= 1e-5 && hinge_done == 100,
                 fmt("softmax max rel err %.2e, hinge max rel err %.2e over %d instances (<=1e-5)", worst_soft,
                     worst_hinge, hinge_done));
}

// 4. SADMM against a long proximal-subgradient run on a tiny instance.
Verdict solver_oracle() {
  BlobSpec b;
  b.n = 20;
  b.p = 5;
  b.num_classes = 2;
  b.separation = 2.0;
  b.seed = 7;
  const Dataset d = generate_blobs(b);
  SolverConfig cfg;
  cfg.batch_size = 20;
  cfg.epochs = 2000;
  cfg.tolerance = 1e-300;  // spend the whole budget
  cfg.rho_max = 100.0;
  cfg.reg.group_weight = {GroupWeightRule::Kind::constant, 0.3};
  const auto r = train_sadmm(d, cfg);
  const double f = oracle::air_objective(r.model, d, cfg.reg.lambda1, 0.3);
  const double ref = oracle::proximal_subgradient_reference(d, cfg.reg.lambda1, 0.3, 1000000);
  const double rel = std::abs(f - ref) / std::abs(ref);
  const double resid = r.history.back().primal_residual;
  return verdict(rel <= 1e-3 && resid < 1e-4,
                 fmt("SADMM objective %.10f vs reference %.10f: rel gap %.2e (<=1e-3); final primal residual %.2e "
                     "(<1e-4)",
                     f, ref, rel, resid));
}

// ---- benchmark (criteria 5 to 8) ----

ExperimentConfig benchmark_config() { return load_config(std::string(AIR_SOURCE_DIR) + "/configs/benchmark.json"); }

struct BenchRun {
  double accuracy = 0.0;
  double objective = 0.0;
  double first_auc = 0.5;
  double final_auc = 0.5;
};

constexpr std::uint64_t kSeeds = 5;

BenchRun bench(SolverChoice solver, double noise, double fraction, std::uint64_t seed) {
  static std::map<std::tuple<int, double, double, std::uint64_t>, BenchRun> cache;
  const auto key = std::make_tuple(static_cast<int>(solver), noise, fraction, seed);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  ExperimentConfig c = benchmark_config();
  c = sweep_cell(c, SweepSpec::Axis::noise, noise, seed, solver);
  c.reg.subsample_fraction = fraction;
  c.sadmm.reg = c.reg;
  c.sgd.reg = c.reg;
  const PreparedData data = prepare_data(c);
  const FitResult fr = fit(c, data.train);
  const MetricsReport m = build_report(c, data, fr);
  BenchRun r;
  r.accuracy = m.accuracy;
  r.objective = fr.objective;
  if (m.activations) {
    r.first_auc = m.activations->series.front().auc;
    r.final_auc = m.activations->series.back().auc;
  }
  std::fprintf(stderr, "  [%s noise %.1f groups %.2f seed %llu] accuracy %.4f objective %.2f auc %.3f -> %.3f\n",
               to_string(solver), noise, fraction, static_cast<unsigned long long>(seed), r.accuracy, r.objective,
               r.first_auc, r.final_auc);
  return cache[key] = r;
}

BenchRun mean_over_seeds(SolverChoice solver, double noise, double fraction = 1.0) {
  BenchRun m;
  m.first_auc = m.final_auc = 0.0;
  for (std::uint64_t s = 0; s < kSeeds; ++s) {
    const BenchRun r = bench(solver, noise, fraction, s);
    m.accuracy += r.accuracy / kSeeds;
    m.objective += r.objective / kSeeds;
    m.first_auc += r.first_auc / kSeeds;
    m.final_auc += r.final_auc / kSeeds;
  }
  return m;
}

Verdict noise_robustness() {
  const auto air5 = mean_over_seeds(SolverChoice::air_sadmm, 0.5), air0 = mean_over_seeds(SolverChoice::air_sadmm, 0.0);
  const auto l25 = mean_over_seeds(SolverChoice::l2_sgd, 0.5), l20 = mean_over_seeds(SolverChoice::l2_sgd, 0.0);
  const double drop_air = air0.accuracy - air5.accuracy, drop_l2 = l20.accuracy - l25.accuracy;
  return verdict(air5.accuracy > l25.accuracy && drop_air < drop_l2,
                 fmt("noise 0.5 accuracy AIR %.4f vs L2 %.4f; drop 0->0.5 AIR %.4f vs L2 %.4f", air5.accuracy,
                     l25.accuracy, drop_air, drop_l2));
}

Verdict sadmm_vs_sgd() {
  const auto admm = mean_over_seeds(SolverChoice::air_sadmm, 0.5), sgd = mean_over_seeds(SolverChoice::air_sgd, 0.5);
  return verdict(admm.objective <= sgd.objective && admm.accuracy >= sgd.accuracy,
                 fmt("mean objective SADMM %.3f vs SGD %.3f; accuracy SADMM %.4f vs SGD %.4f", admm.objective,
                     sgd.objective, admm.accuracy, sgd.accuracy));
}

Verdict activation_separation() {
  const auto air = mean_over_seeds(SolverChoice::air_sadmm, 0.5), l2 = mean_over_seeds(SolverChoice::l2_sgd, 0.5);
  const double first = air.first_auc, final = air.final_auc, base = l2.final_auc;
  return verdict(final - first >= 0.05 && final - base >= 0.05,
                 fmt("AIR AUC first epoch %.4f -> final %.4f (+%.4f, need +0.05); baseline final %.4f (AIR +%.4f, "
                     "need +0.05)",
                     first, final, final - first, base, final - base));
}

Verdict group_subsampling() {
  const auto full = mean_over_seeds(SolverChoice::air_sadmm, 0.5), sub = mean_over_seeds(SolverChoice::air_sadmm, 0.5, 0.1);
  const double diff = std::abs(full.accuracy - sub.accuracy);
  return verdict(diff <= 0.02, fmt("accuracy full %.4f vs 10%% groups %.4f: |diff| %.4f (<=0.02)", full.accuracy,
                                   sub.accuracy, diff));
}

// 9. metric fixtures.
Verdict metric_fixtures() {
  const auto s = fixture::metric_scores();
  const auto t = fixture::metric_truth();
  std::vector<std::pair<double, double>> pairs;
  pairs.emplace_back(accuracy(s, t), fixture::kAccuracy);
  const auto pr1 = precision_recall_at_n(s, t, 1), pr2 = precision_recall_at_n(s, t, 2);
  pairs.emplace_back(pr1.precision, fixture::kP1);
  pairs.emplace_back(pr1.recall, fixture::kR1);
  pairs.emplace_back(pr2.precision, fixture::kP2);
  pairs.emplace_back(pr2.recall, fixture::kR2);
  std::vector<bool> rel(4, false);
  for (Label l : t[1]) rel[l] = true;
  pairs.emplace_back(average_precision(s.row(1), rel).value_or(-1.0), fixture::kApEx1);
  pairs.emplace_back(mean_average_precision(s, t, MapAxis::per_image).value, fixture::kMapImage);
  pairs.emplace_back(mean_average_precision(s, t, MapAxis::per_label).value, fixture::kMapLabel);
  double worst = 0.0;
  for (const auto& [got, want] : pairs) worst = std::max(worst, std::abs(got - want));
  return verdict(worst <= 1e-15, fmt("%zu hand-enumerated values (accuracy, P/R@1,2, AP=5/6, mAP_I, mAP_L): "
                                     "max |diff| %.1e",
                                     pairs.size(), worst));
}

// 10. byte-identical artifacts, serial and threaded.
Verdict determinism() {
  ExperimentConfig c = benchmark_config();
  c.reg.subsample_fraction = 0.5;
  c.sadmm.reg = c.reg;
  c.sgd.reg = c.reg;
  const fs::path root = fs::temp_directory_path() / "air_acceptance_determinism";
  fs::remove_all(root);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  bool same = true;
  std::size_t compared = 0;
  for (SolverChoice solver : {SolverChoice::air_sadmm, SolverChoice::air_sgd}) {
    apply_solver(c, solver);
    std::vector<fs::path> dirs;
    for (std::size_t threads : {1, 1, 4}) {
      set_num_threads(threads);
      dirs.push_back(root / (std::string(to_string(solver)) + "_" + std::to_string(dirs.size())));
      run(c, dirs.back());
    }
    set_num_threads(1);
    for (const char* f : {"metrics.json", "model.airw", "train_log.jsonl", "activations.csv"}) {
      const auto a = slurp(dirs[0] / f);
      same &= !a.empty() && a == slurp(dirs[1] / f) && a == slurp(dirs[2] / f);
      ++compared;
    }
  }
  fs::remove_all(root);
  return verdict(same, fmt("%zu artifacts compared across runs with 1, 1 and 4 threads: %s", compared,
                           same ? "byte-identical" : "DIFFERENT"));
}

// 11. MNIST, only when the raw files are present.
Verdict mnist(const fs::path& dir) {
  const fs::path img = dir / "train-images-idx3-ubyte", lab = dir / "train-labels-idx1-ubyte";
  if (!fs::exists(img) || !fs::exists(lab)) return {Outcome::skip, "MNIST files not found in " + dir.string()};
  ExperimentConfig c = benchmark_config();
  c.dataset = {};
  c.dataset.idx = IdxSource{img.string(), lab.string()};
  c.dataset.test_fraction = 0.3;
  // 1% of the (example, class) groups keeps the response buffers small
  c.reg.subsample_fraction = 0.01;
  c.metrics.activations = false;
  double acc[2] = {0, 0};
  const SolverChoice solvers[2] = {SolverChoice::air_sadmm, SolverChoice::l2_sgd};
  for (int s = 0; s < 2; ++s) {
    ExperimentConfig cs = sweep_cell(c, SweepSpec::Axis::noise, 0.5, c.seed, solvers[s]);
    const PreparedData data = prepare_data(cs);
    acc[s] = evaluate(fit(cs, data.train).model, data.test, {1}).accuracy;
  }
  return verdict(acc[0] >= acc[1], fmt("MNIST raw pixels, keep-prob noise 0.5: AIR %.4f vs L2 %.4f", acc[0], acc[1]));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  std::string mnist_dir = std::string(AIR_SOURCE_DIR) + "/data/mnist";
  app.add_option("--criterion", only, "run a single criterion (1-11)")->check(CLI::Range(1, 11));
  app.add_option("--mnist-dir", mnist_dir, "directory with the raw MNIST IDX files");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"prox correctness", prox_correctness},
      {"operator equivalence", operator_equivalence},
      {"gradient checks", gradient_checks},
      {"solver oracle equivalence", solver_oracle},
      {"noise robustness", noise_robustness},
      {"SADMM vs SGD on the AIR objective", sadmm_vs_sgd},
      {"activation separation", activation_separation},
      {"group subsampling", group_subsampling},
      {"metric fixtures", metric_fixtures},
      {"determinism", determinism},
      {"MNIST raw pixels", [&] { return mnist(mnist_dir); }},
  };

  int failed = 0, skipped = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i + 1) != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {Outcome::fail, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "SKIP";
    std::printf("criterion %zu: %s  %s: %s [%.1f s]\n", i + 1, tag, criteria[i].first.c_str(), v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += v.outcome == Outcome::fail;
    skipped += v.outcome == Outcome::skip;
  }
  if (failed) return 1;
  if (only != 0 && skipped) return 77;
  return 0;
}
