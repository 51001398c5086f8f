#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "air/error.hpp"
#include "air/group_operator.hpp"
#include "air/matrix.hpp"
#include "air/parallel.hpp"
#include "air/random.hpp"

namespace air {

/// Ridge weight, group-weight rule and optional group subsampling.
struct RegConfig {
  double lambda1 = 1e-4;
  GroupWeightRule group_weight{};
  double subsample_fraction = 1.0;
  std::uint64_t subsample_seed = 0;

  void validate() const {
    require(lambda1 >= 0.0, ErrorKind::config, "reg.lambda1 must be >= 0");
    require(group_weight.scale > 0.0, ErrorKind::config, "reg.group_weight must be > 0");
    require(subsample_fraction > 0.0 && subsample_fraction <= 1.0, ErrorKind::config,
            "reg.subsample_fraction must be in (0, 1]");
  }
};

/// sum_k lambda_k * ||v_k||_2 over the operator's groups.
inline double group_norm_value(const GroupedResponse& v, const GroupOperator& op) {
  op.check_response(v);
  double total = 0.0;
  for (std::size_t k = 0; k < v.rows(); ++k) total += op.weight(k) * norm2(v.row(k));
  return total;
}

inline double group_norm_value(const GroupedResponse& v, std::span<const double> weights) {
  require(weights.size() == v.rows(), ErrorKind::dimension_mismatch, "one weight per group required");
  double total = 0.0;
  for (std::size_t k = 0; k < v.rows(); ++k) total += weights[k] * norm2(v.row(k));
  return total;
}

/// Group soft-thresholding in place: zero when ||z|| <= alpha, otherwise
/// shrink the norm by alpha. Returns the input norm.
inline double prox_group_inplace(std::span<double> z, double alpha) {
  const double nrm = norm2(z);
  if (nrm <= alpha) {
    std::fill(z.begin(), z.end(), 0.0);
  } else if (alpha > 0.0) {
    const double s = (nrm - alpha) / nrm;
    for (auto& e : z) e *= s;
  }
  return nrm;
}

inline std::vector<double> prox_group(std::span<const double> z, double alpha) {
  require(alpha >= 0.0, ErrorKind::invalid_input, "prox threshold must be >= 0");
  std::vector<double> out(z.begin(), z.end());
  prox_group_inplace(out, alpha);
  return out;
}

/// Applies the group prox to every row of `target` with thresholds alpha[k].
/// Rows are independent, so the result does not depend on the thread count.
inline GroupedResponse prox_all(GroupedResponse target, std::span<const double> alpha) {
  require(alpha.size() == target.rows(), ErrorKind::dimension_mismatch, "one threshold per group required");
  parallel_for(target.rows(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) prox_group_inplace(target.row(k), alpha[k]);
  });
  return target;
}

/// Thresholds lambda_k / rho for every group of the operator.
inline GroupedResponse prox_all(GroupedResponse target, const GroupOperator& op, double rho) {
  op.check_response(target);
  std::vector<double> alpha(op.num_groups());
  for (std::size_t k = 0; k < alpha.size(); ++k) alpha[k] = op.weight(k) / rho;
  return prox_all(std::move(target), alpha);
}

/// Subset of round(fraction * total) group ids (at least one), ascending,
/// sampled uniformly without replacement.
inline std::vector<std::size_t> sample_groups(std::size_t total, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, ErrorKind::invalid_input, "group fraction must be in (0, 1]");
  const auto count = std::max<std::size_t>(
      1, std::min<std::size_t>(total, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)))));
  if (count == total) {
    std::vector<std::size_t> all(total);
    for (std::size_t g = 0; g < total; ++g) all[g] = g;
    return all;
  }
  Rng rng(seed);
  return rng.sample_without_replacement(total, count);
}

/// Per-group Euclidean norm.
inline std::vector<double> group_activations(const GroupedResponse& v) {
  std::vector<double> a(v.rows());
  for (std::size_t k = 0; k < v.rows(); ++k) a[k] = norm2(v.row(k));
  return a;
}

/// Activation of each example's group for its observed label (first label
/// for multi-label data). Examples whose group is not active get NaN.
inline std::vector<double> example_activations(const GroupedResponse& v, const GroupOperator& op,
                                               const std::vector<std::size_t>& observed_label) {
  op.check_response(v);
  std::vector<double> out(op.num_examples(), std::nan(""));
  for (std::size_t k = 0; k < op.num_groups(); ++k) {
    const auto [i, c] = op.group(k);
    if (observed_label[i] == c) out[i] = norm2(v.row(k));
  }
  return out;
}

/// Builds the operator implied by a regularizer config, sampling the active
/// groups when subsample_fraction < 1.
inline GroupOperator make_operator(std::shared_ptr<const Matrix> features, std::size_t num_classes,
                                   const RegConfig& reg) {
  std::optional<std::vector<std::size_t>> active;
  if (reg.subsample_fraction < 1.0)
    active = sample_groups(features->rows() * num_classes, reg.subsample_fraction, reg.subsample_seed);
  return GroupOperator(std::move(features), num_classes, reg.group_weight, std::move(active));
}

}  // namespace air
