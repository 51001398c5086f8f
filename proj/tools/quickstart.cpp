// Library use without the config layer: blobs, label noise, AIR via SADMM.

#include <cstdio>

#include "air/air.hpp"

int main() {
  air::BlobSpec spec;
  spec.n = 1000;
  spec.p = 20;
  spec.num_classes = 5;
  spec.separation = 6.0;
  spec.rectify = true;
  auto [train, test] = air::split(air::generate_blobs(spec), 0.3, 1);

  const auto q = air::confusion_from_noise_level(train.num_classes, 0.4);
  train = air::with_noisy_labels(train, air::corrupt_labels(air::single_labels(train), q, 2));

  air::SolverConfig cfg;
  cfg.rho0 = 1.0;
  cfg.beta = 1.15;
  cfg.rho_max = 50.0;
  cfg.batch_size = 100;
  cfg.epochs = 20;
  cfg.reg.group_weight = {air::GroupWeightRule::Kind::constant, 0.02};

  const auto result = air::train_sadmm(train, cfg);
  std::printf("epochs %zu, final primal residual %.3e, test accuracy %.4f\n", result.epochs_run,
              result.history.back().primal_residual, air::accuracy(result.model, test));
}
