#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "air/error.hpp"
#include "air/matrix.hpp"
#include "air/parallel.hpp"

namespace air {

/// p x C classifier weights, one column per class.
using Weights = Matrix;

/// One row of p coefficients per active group, in the operator's group order.
using GroupedResponse = Matrix;

/// How group weights are chosen. The default gives every group 10/p, which
/// equalizes groups of identical size p.
struct GroupWeightRule {
  enum class Kind { inverse_dim, constant };
  Kind kind = Kind::inverse_dim;
  double scale = 10.0;

  double weight_for(std::size_t p) const {
    return kind == Kind::inverse_dim ? scale / static_cast<double>(p) : scale;
  }
};

struct GroupIndex {
  std::size_t example;
  std::size_t cls;
};

/// Implicit form of the response operator F.
///
/// F maps weights w (p x C) to the stacked response whose group (i, c) is the
/// elementwise product x_i * w_c. F has a single nonzero per row, so it is
/// never materialized: only the features and index arithmetic are kept, and
/// F^T F is the diagonal returned by gram_diagonal().
///
/// With a group subset, only the listed groups exist; the others carry
/// neither a penalty nor a constraint row.
class GroupOperator {
 public:
  GroupOperator(std::shared_ptr<const Matrix> features, std::size_t num_classes,
                GroupWeightRule rule = {},
                std::optional<std::vector<std::size_t>> active = std::nullopt)
      : features_(std::move(features)), num_classes_(num_classes) {
    require(features_ && !features_->empty(), ErrorKind::invalid_input, "group operator needs a nonempty feature matrix");
    require(num_classes_ >= 1, ErrorKind::invalid_input, "group operator needs C >= 1");
    const std::size_t total = total_groups();
    if (active) {
      for (std::size_t k = 0; k < active->size(); ++k) {
        require((*active)[k] < total, ErrorKind::invalid_input, "active group index out of range");
        require(k == 0 || (*active)[k] > (*active)[k - 1], ErrorKind::invalid_input,
                "active groups must be strictly increasing");
      }
      active_ = std::move(*active);
    } else {
      active_.resize(total);
      for (std::size_t g = 0; g < total; ++g) active_[g] = g;
    }
    group_weight_ = rule.weight_for(feature_dim());
    require(group_weight_ >= 0.0, ErrorKind::invalid_input, "group weight must be nonnegative");
  }

  std::size_t num_examples() const noexcept { return features_->rows(); }
  std::size_t feature_dim() const noexcept { return features_->cols(); }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t total_groups() const noexcept { return num_examples() * num_classes_; }
  std::size_t num_groups() const noexcept { return active_.size(); }
  bool is_subsampled() const noexcept { return active_.size() != total_groups(); }

  const Matrix& features() const noexcept { return *features_; }
  const std::vector<std::size_t>& active_groups() const noexcept { return active_; }

  /// Group k of the active list -> (example, class).
  GroupIndex group(std::size_t k) const noexcept {
    const std::size_t g = active_[k];
    return {g / num_classes_, g % num_classes_};
  }

  double weight(std::size_t /*k*/) const noexcept { return group_weight_; }

  GroupedResponse forward(const Weights& w) const {
    GroupedResponse v(num_groups(), feature_dim());
    forward_into(w, v);
    return v;
  }

  void forward_into(const Weights& w, GroupedResponse& v) const {
    check_weights(w);
    require(v.rows() == num_groups() && v.cols() == feature_dim(), ErrorKind::dimension_mismatch,
            "grouped response buffer has wrong shape");
    const std::size_t p = feature_dim();
    parallel_for(num_groups(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        const auto [i, c] = group(k);
        const auto x = features_->row(i);
        auto out = v.row(k);
        for (std::size_t j = 0; j < p; ++j) out[j] = x[j] * w(j, c);
      }
    });
  }

  /// F^T v: entry (j, c) sums x_ij * v[(i, c), j] over the active groups of class c.
  Weights adjoint(const GroupedResponse& v) const {
    check_response(v);
    const std::size_t p = feature_dim();
    Weights out(p, num_classes_);
    // Partitioned over feature index; each (j, c) sums groups in list order.
    parallel_for(p, [&](std::size_t jb, std::size_t je) {
      for (std::size_t k = 0; k < num_groups(); ++k) {
        const auto [i, c] = group(k);
        const auto x = features_->row(i);
        const auto vk = v.row(k);
        for (std::size_t j = jb; j < je; ++j) out(j, c) += x[j] * vk[j];
      }
    });
    return out;
  }

  /// Diagonal of F^T F as a p x C matrix: d(j, c) = sum of x_ij^2 over active
  /// groups of class c. Without subsampling every column equals sum_i x_ij^2.
  Matrix gram_diagonal() const {
    const std::size_t p = feature_dim();
    Matrix d(p, num_classes_);
    for (std::size_t k = 0; k < num_groups(); ++k) {
      const auto [i, c] = group(k);
      const auto x = features_->row(i);
      for (std::size_t j = 0; j < p; ++j) d(j, c) += x[j] * x[j];
    }
    return d;
  }

  void check_weights(const Weights& w) const {
    require(w.rows() == feature_dim() && w.cols() == num_classes_, ErrorKind::dimension_mismatch,
            "weights are " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) + ", operator expects " +
                std::to_string(feature_dim()) + "x" + std::to_string(num_classes_));
  }

  void check_response(const GroupedResponse& v) const {
    require(v.rows() == num_groups() && v.cols() == feature_dim(), ErrorKind::dimension_mismatch,
            "grouped response does not match the operator's group layout");
  }

 private:
  std::shared_ptr<const Matrix> features_;
  std::size_t num_classes_;
  std::vector<std::size_t> active_;
  double group_weight_ = 0.0;
};

inline GroupOperator assemble_group_operator(std::shared_ptr<const Matrix> features, std::size_t num_classes,
                                             GroupWeightRule rule = {},
                                             std::optional<std::vector<std::size_t>> active = std::nullopt) {
  return GroupOperator(std::move(features), num_classes, rule, std::move(active));
}

}  // namespace air
