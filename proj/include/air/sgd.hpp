#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "air/dataset.hpp"
#include "air/error.hpp"
#include "air/group_operator.hpp"
#include "air/loss.hpp"
#include "air/regularizer.hpp"
#include "air/sadmm.hpp"

namespace air {

enum class SgdObjective { air, l2_softmax, l2_hinge };

inline const char* to_string(SgdObjective o) {
  switch (o) {
    case SgdObjective::air: return "air";
    case SgdObjective::l2_softmax: return "l2-softmax";
    case SgdObjective::l2_hinge: return "l2-hinge";
  }
  return "unknown";
}

struct SgdConfig {
  double rate0 = 1e-3;
  /// r_k = rate0 / (1 + decay * k)
  double decay = 0.0;
  std::size_t batch_size = 100;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  SgdObjective objective = SgdObjective::l2_softmax;
  RegConfig reg{};
  double margin = 1.0;
  bool scale_gradient = true;

  void validate() const {
    require(rate0 >= 0.0, ErrorKind::config, "sgd.rate0 must be >= 0");
    require(decay >= 0.0, ErrorKind::config, "sgd.decay must be >= 0");
    require(batch_size >= 1, ErrorKind::config, "sgd.batch_size must be >= 1");
    reg.validate();
  }

  LossKind loss_for(const Dataset& data) const {
    if (objective == SgdObjective::l2_hinge) return LossKind::hinge;
    return default_loss(data);
  }
};

/// F^T s with s_g = lambda_g F_g w / ||F_g w|| (0 where F_g w = 0): a
/// subgradient of ||F w||_g, the minimal-norm one at zero groups.
inline Weights group_norm_subgradient(const Weights& w, const GroupOperator& op) {
  GroupedResponse s = op.forward(w);
  parallel_for(s.rows(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      auto row = s.row(k);
      const double nrm = norm2(row);
      const double f = nrm > 0.0 ? op.weight(k) / nrm : 0.0;
      for (auto& x : row) x *= f;
    }
  });
  return op.adjoint(s);
}

struct SgdResult {
  Weights model;
  std::vector<StepRecord> history;
  std::size_t epochs_run = 0;
};

struct SgdHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(std::size_t, const Weights&)> on_epoch;
};

/// Minibatch (sub)gradient descent on loss + lambda1 ||w||^2 [+ ||F w||_g].
inline SgdResult sgd_train(const Dataset& data, const SgdConfig& cfg, const SgdHooks& hooks = {}) {
  data.validate();
  cfg.validate();
  const LossKind loss = cfg.loss_for(data);
  std::optional<GroupOperator> op;
  if (cfg.objective == SgdObjective::air) op.emplace(make_operator(data.features, data.num_classes, cfg.reg));

  SgdResult out;
  out.model = Weights(data.dim(), data.num_classes);
  if (cfg.epochs == 0) return out;

  Weights& w = out.model;
  BatchSampler sampler(data.size(), cfg.batch_size, derive_seed(cfg.seed, 1), cfg.scale_gradient);
  double reference = 0.0;
  for (std::size_t k = 0;; ++k) {
    const MiniBatch batch = sampler.next();
    LossGradient lg = loss_gradient(loss, w, data, batch, true, cfg.margin);
    Weights& g = lg.gradient;
    const auto wv = w.values();
    auto gv = g.values();
    for (std::size_t e = 0; e < gv.size(); ++e) gv[e] += 2.0 * cfg.reg.lambda1 * wv[e];
    double reg_value = cfg.reg.lambda1 * dot(w.values(), w.values());
    if (op) {
      const Weights sub = group_norm_subgradient(w, *op);
      const auto sv = sub.values();
      for (std::size_t e = 0; e < gv.size(); ++e) gv[e] += sv[e];
      reg_value += group_norm_value(op->forward(w), *op);
    }
    require(all_finite(g.values()), ErrorKind::nonfinite, "nonfinite gradient at iteration " + std::to_string(k));

    const double rate = cfg.rate0 / (1.0 + cfg.decay * static_cast<double>(k));
    for (std::size_t e = 0; e < wv.size(); ++e) w.values()[e] -= rate * gv[e];

    StepRecord rec;
    rec.k = k;
    rec.epoch = sampler.epoch();
    rec.objective_estimate = lg.value * batch.scale + reg_value;
    rec.primal_residual = rate * norm2(gv);  // step length
    out.history.push_back(rec);
    if (hooks.on_step) hooks.on_step(rec);

    const double wn = frobenius_norm(w);
    if (!std::isfinite(wn)) throw Error(ErrorKind::divergence, "weights became nonfinite at iteration " + std::to_string(k));
    if (reference == 0.0 && wn > 0.0) reference = wn;
    if (reference > 0.0 && wn > 1e6 * reference)
      throw Error(ErrorKind::divergence, "weight norm grew by more than 1e6x by iteration " + std::to_string(k));

    if (sampler.at_epoch_end()) {
      out.epochs_run = sampler.epoch() + 1;
      if (hooks.on_epoch) hooks.on_epoch(sampler.epoch(), w);
      if (out.epochs_run >= cfg.epochs) break;
    }
  }
  return out;
}

}  // namespace air
