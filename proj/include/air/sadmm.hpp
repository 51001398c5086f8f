#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "air/dataset.hpp"
#include "air/error.hpp"
#include "air/group_operator.hpp"
#include "air/loss.hpp"
#include "air/matrix.hpp"
#include "air/random.hpp"
#include "air/regularizer.hpp"

namespace air {

/// How the ridge term enters the closed-form w-update.
///  exact_quadratic: 2*lambda1 joins the diagonal (exact minimizer).
///  paper_literal:   -(lambda1/2) w_k is added to the right-hand side.
enum class RidgeMode { exact_quadratic, paper_literal };

struct SolverConfig {
  double rho0 = 10.0;
  double beta = 1.1;
  double rho_max = 1e4;
  std::size_t batch_size = 100;
  std::size_t epochs = 30;
  RegConfig reg{};
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  RidgeMode ridge_mode = RidgeMode::exact_quadratic;
  /// Scale minibatch gradients by n / |batch|.
  bool scale_gradient = true;
  /// Residual growth factor (relative to the first positive residual) treated as divergence.
  double divergence_factor = 1e6;
  /// With subsampled groups, multiply rho0 and rho_max by total / active
  /// groups so rho * diag(F^T F) keeps the scale of the full operator.
  bool normalize_penalty = true;

  void validate() const {
    require(rho0 > 0.0, ErrorKind::config, "solver.rho0 must be > 0");
    require(beta >= 1.0, ErrorKind::config, "solver.beta must be >= 1");
    require(rho_max >= rho0, ErrorKind::config, "solver.rho_max must be >= solver.rho0");
    require(batch_size >= 1, ErrorKind::config, "solver.batch_size must be >= 1");
    require(tolerance > 0.0, ErrorKind::config, "solver.tolerance must be > 0");
    reg.validate();
  }
};

/// Iterates of the splitting w / v = Fw / u plus their running averages.
/// `fw` caches F w for the current w between the v- and u-updates.
struct SolverState {
  Weights w;
  GroupedResponse v;
  GroupedResponse u;
  double rho = 10.0;
  std::size_t k = 0;
  Weights w_bar;
  GroupedResponse v_bar;
  GroupedResponse u_bar;
  GroupedResponse fw;
  std::vector<double> residual_history;

  /// w0 = 0, v0 = 0, u0 = 0 (so v0 = F w0); averages start at the iterates.
  static SolverState initial(const GroupOperator& op, double rho0) {
    SolverState s;
    const std::size_t p = op.feature_dim(), C = op.num_classes(), G = op.num_groups();
    s.w = Weights(p, C);
    s.v = GroupedResponse(G, p);
    s.u = GroupedResponse(G, p);
    s.rho = rho0;
    s.w_bar = s.w;
    s.v_bar = s.v;
    s.u_bar = s.u;
    s.fw = GroupedResponse(G, p);
    return s;
  }

  bool operator==(const SolverState&) const = default;
};

struct StepRecord {
  std::size_t k = 0;
  std::size_t epoch = 0;
  double rho = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective_estimate = 0.0;
};

/// Step size eta_{k+1} = 2 / (k + 2) used at iteration k.
inline double step_size(std::size_t k) { return 2.0 / (static_cast<double>(k) + 2.0); }

/// Closed-form linearized w-update. F^T F is diagonal, so the solve is
/// elementwise: w = rhs / (rho * d + 1/eta [+ 2 lambda1]).
inline Weights update_w(const SolverState& state, const Weights& gradient, const GroupOperator& op,
                        const Matrix& gram, const SolverConfig& cfg) {
  op.check_weights(gradient);
  require(all_finite(gradient.values()), ErrorKind::nonfinite,
          "nonfinite gradient at iteration " + std::to_string(state.k) + " (rho=" + std::to_string(state.rho) + ")");
  const double inv_eta = 1.0 / step_size(state.k);
  const double lambda1 = cfg.reg.lambda1;
  const Weights ftv = op.adjoint(state.v);
  const Weights ftu = op.adjoint(state.u);
  Weights next(state.w.rows(), state.w.cols());
  for (std::size_t j = 0; j < next.rows(); ++j) {
    for (std::size_t c = 0; c < next.cols(); ++c) {
      double rhs = -gradient(j, c) + state.rho * ftv(j, c) + ftu(j, c) + inv_eta * state.w(j, c);
      double denom = state.rho * gram(j, c) + inv_eta;
      if (cfg.ridge_mode == RidgeMode::exact_quadratic)
        denom += 2.0 * lambda1;
      else
        rhs -= 0.5 * lambda1 * state.w(j, c);
      next(j, c) = rhs / denom;
    }
  }
  return next;
}

/// v = prox(F w - u / rho, lambda / rho), groupwise. Refreshes state.fw.
inline GroupedResponse update_v(SolverState& state, const GroupOperator& op) {
  op.forward_into(state.w, state.fw);
  GroupedResponse target = state.fw;
  const double inv_rho = 1.0 / state.rho;
  auto t = target.values();
  const auto u = state.u.values();
  for (std::size_t e = 0; e < t.size(); ++e) t[e] -= u[e] * inv_rho;
  return prox_all(std::move(target), op, state.rho);
}

/// Dual ascent u += rho (v - F w), then rho <- min(beta rho, rho_max).
/// Expects state.fw to hold F w for the current w. Returns ||v - F w||.
inline double update_u_rho(SolverState& state, const SolverConfig& cfg) {
  auto u = state.u.values();
  const auto v = state.v.values();
  const auto fw = state.fw.values();
  double r2 = 0.0;
  for (std::size_t e = 0; e < u.size(); ++e) {
    const double r = v[e] - fw[e];
    r2 += r * r;
    u[e] += state.rho * r;
  }
  state.rho = std::min(cfg.beta * state.rho, cfg.rho_max);
  return std::sqrt(r2);
}

/// Weighted running average with theta_k = 2 / (k + 2), k the index of the
/// current raw iterate (theta_0 = 1 copies the iterate).
inline void average_iterates(SolverState& state) {
  const double theta = 2.0 / (static_cast<double>(state.k) + 2.0);
  auto blend = [theta](Matrix& avg, const Matrix& cur) {
    auto a = avg.values();
    const auto c = cur.values();
    for (std::size_t e = 0; e < a.size(); ++e) a[e] = (1.0 - theta) * a[e] + theta * c[e];
  };
  blend(state.w_bar, state.w);
  blend(state.v_bar, state.v);
  blend(state.u_bar, state.u);
}

/// Epoch-wise shuffled minibatches: a fresh permutation per epoch, consumed
/// in consecutive slices of batch_size (the last slice may be shorter).
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed, bool scale_gradient = true)
      : n_(n), batch_(std::min(batch_size, n)), rng_(seed), scale_(scale_gradient), order_(n) {
    require(n >= 1 && batch_size >= 1, ErrorKind::invalid_input, "sampler needs n >= 1 and batch >= 1");
    reshuffle();
  }

  MiniBatch next() {
    if (pos_ >= n_) {
      reshuffle();
      ++epoch_;
    }
    const std::size_t end = std::min(n_, pos_ + batch_);
    MiniBatch b;
    b.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(pos_), order_.begin() + static_cast<std::ptrdiff_t>(end));
    b.scale = scale_ ? static_cast<double>(n_) / static_cast<double>(b.indices.size()) : 1.0;
    pos_ = end;
    return b;
  }

  /// Epoch index of the batch most recently returned.
  std::size_t epoch() const noexcept { return epoch_; }
  bool at_epoch_end() const noexcept { return pos_ >= n_; }
  std::size_t batches_per_epoch() const noexcept { return (n_ + batch_ - 1) / batch_; }

 private:
  void reshuffle() {
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
    rng_.shuffle(std::span<std::size_t>(order_));
    pos_ = 0;
  }

  std::size_t n_, batch_;
  Rng rng_;
  bool scale_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::size_t epoch_ = 0;
};

/// Full regularized objective L(w) + lambda1 ||w||^2 + ||F w||_g.
inline double air_objective(const Weights& w, const Dataset& data, const GroupOperator& op, double lambda1,
                            LossKind loss) {
  const double l = loss_gradient(loss, w, data, MiniBatch::full(data.size()), false).value;
  const double ridge = lambda1 * dot(w.values(), w.values());
  return l + ridge + group_norm_value(op.forward(w), op);
}

/// Bound context for one SADMM run: dataset, operator and its F^T F diagonal.
class SadmmSolver {
 public:
  SadmmSolver(const Dataset& data, SolverConfig cfg)
      : data_(checked(data)),
        cfg_(checked(std::move(cfg))),
        op_(make_operator(data_.features, data_.num_classes, cfg_.reg)),
        gram_(op_.gram_diagonal()),
        loss_(default_loss(data_)) {
    if (cfg_.normalize_penalty && op_.is_subsampled()) {
      const double s = static_cast<double>(op_.total_groups()) / static_cast<double>(op_.num_groups());
      cfg_.rho0 *= s;
      cfg_.rho_max *= s;
    }
  }

  const GroupOperator& op() const noexcept { return op_; }
  const Matrix& gram() const noexcept { return gram_; }
  const SolverConfig& config() const noexcept { return cfg_; }
  LossKind loss() const noexcept { return loss_; }

  SolverState initial_state() const {
    SolverState s = SolverState::initial(op_, cfg_.rho0);
    average_iterates(s);
    return s;
  }

  /// One iteration: gradient at w_k on a minibatch, then the w, v, u/rho
  /// updates and the averaging, in that order.
  StepRecord step(SolverState& state, BatchSampler& sampler) const {
    const MiniBatch batch = sampler.next();
    LossGradient lg = loss_gradient(loss_, state.w, data_, batch, true);

    state.w = update_w(state, lg.gradient, op_, gram_, cfg_);
    GroupedResponse v_next = update_v(state, op_);

    double dv2 = 0.0;
    {
      const auto a = v_next.values();
      const auto b = state.v.values();
      for (std::size_t e = 0; e < a.size(); ++e) dv2 += (a[e] - b[e]) * (a[e] - b[e]);
    }
    state.v = std::move(v_next);

    StepRecord rec;
    rec.k = state.k;
    rec.epoch = sampler.epoch();
    rec.rho = state.rho;
    rec.dual_residual = state.rho * std::sqrt(dv2);
    rec.primal_residual = update_u_rho(state, cfg_);
    rec.objective_estimate = lg.value * batch.scale + cfg_.reg.lambda1 * dot(state.w.values(), state.w.values()) +
                             group_norm_value(state.v, op_);

    ++state.k;
    average_iterates(state);
    state.residual_history.push_back(rec.primal_residual);

    require(all_finite(state.w.values()), ErrorKind::divergence,
            "nonfinite weights after iteration " + std::to_string(rec.k));
    return rec;
  }

 private:
  template <typename T>
  static T checked(T value) {
    value.validate();
    return value;
  }

  Dataset data_;
  SolverConfig cfg_;
  GroupOperator op_;
  Matrix gram_;
  LossKind loss_;
};

struct TrainResult {
  /// Averaged iterate w-bar, the reported model.
  Weights model;
  SolverState state;
  std::vector<StepRecord> history;
  std::size_t epochs_run = 0;
  bool converged = false;
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  /// Called after each completed epoch with (epoch index, state).
  std::function<void(std::size_t, const SolverState&)> on_epoch;
};

/// Runs SADMM until the epoch budget is spent or the primal residual drops
/// below the tolerance, whichever comes first.
inline TrainResult train_sadmm(const Dataset& data, const SolverConfig& cfg, const TrainHooks& hooks = {}) {
  SadmmSolver solver(data, cfg);
  const SolverConfig& eff = solver.config();
  TrainResult out;
  out.state = solver.initial_state();
  if (cfg.epochs == 0) {
    out.model = out.state.w_bar;
    return out;
  }
  BatchSampler sampler(data.size(), cfg.batch_size, derive_seed(cfg.seed, 1), cfg.scale_gradient);
  double reference = 0.0;
  while (true) {
    const StepRecord rec = solver.step(out.state, sampler);
    out.history.push_back(rec);
    if (hooks.on_step) hooks.on_step(rec);

    if (!std::isfinite(rec.primal_residual))
      throw Error(ErrorKind::divergence, "nonfinite primal residual at iteration " + std::to_string(rec.k));
    if (reference == 0.0 && rec.primal_residual > 0.0) reference = rec.primal_residual;
    if (reference > 0.0 && rec.primal_residual > eff.divergence_factor * reference)
      throw Error(ErrorKind::divergence, "primal residual grew from " + std::to_string(reference) + " to " +
                                             std::to_string(rec.primal_residual) + " by iteration " +
                                             std::to_string(rec.k));

    const bool epoch_done = sampler.at_epoch_end();
    if (epoch_done) {
      out.epochs_run = sampler.epoch() + 1;
      if (hooks.on_epoch) hooks.on_epoch(sampler.epoch(), out.state);
    }
    if (rec.primal_residual < cfg.tolerance) {
      out.converged = true;
      if (!epoch_done) out.epochs_run = sampler.epoch() + 1;
      break;
    }
    if (epoch_done && out.epochs_run >= cfg.epochs) break;
  }
  out.model = out.state.w_bar;
  return out;
}

}  // namespace air
