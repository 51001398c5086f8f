#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "air/dataset.hpp"
#include "air/error.hpp"
#include "air/group_operator.hpp"
#include "air/matrix.hpp"
#include "air/parallel.hpp"

namespace air {

/// Indices into a dataset plus the factor applied to the gradient. With
/// scale = n / |batch| the minibatch gradient is an unbiased estimate of the
/// full-sum gradient.
struct MiniBatch {
  std::vector<std::size_t> indices;
  double scale = 1.0;

  static MiniBatch full(std::size_t n) {
    MiniBatch b;
    b.indices.resize(n);
    std::iota(b.indices.begin(), b.indices.end(), std::size_t{0});
    return b;
  }

  void validate(std::size_t n) const {
    require(scale > 0.0, ErrorKind::invalid_input, "minibatch scale must be positive");
    std::vector<bool> seen(n, false);
    for (auto i : indices) {
      require(i < n, ErrorKind::invalid_input, "minibatch index out of range");
      require(!seen[i], ErrorKind::invalid_input, "minibatch indices must be unique");
      seen[i] = true;
    }
  }
};

enum class LossKind { softmax, hinge, logistic };

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::softmax: return "softmax";
    case LossKind::hinge: return "hinge";
    case LossKind::logistic: return "logistic";
  }
  return "unknown";
}

struct LossGradient {
  double value = 0.0;
  Weights gradient;
};

/// Class scores w^T x.
inline std::vector<double> predict_scores(const Weights& w, std::span<const double> x) {
  require(w.rows() == x.size(), ErrorKind::dimension_mismatch, "feature vector length != weight rows");
  std::vector<double> s(w.cols(), 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto wj = w.row(j);
    for (std::size_t c = 0; c < s.size(); ++c) s[c] += x[j] * wj[c];
  }
  return s;
}

/// Argmax with ties broken toward the lowest class index.
inline std::size_t argmax(std::span<const double> s) {
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

namespace detail {

inline void check_conforming(const Weights& w, const Dataset& data) {
  require(w.rows() == data.dim() && w.cols() == data.num_classes, ErrorKind::dimension_mismatch,
          "weights do not conform to the dataset");
}

inline void require_single_label(const Dataset& data, LossKind kind) {
  require(!data.multi_label, ErrorKind::unsupported_loss,
          std::string(to_string(kind)) + " loss needs a single-label dataset");
}

// g = scale * sum_k x_{idx[k]} r_k^T, with r the per-example residual rows.
inline Weights accumulate_gradient(const Dataset& data, const MiniBatch& batch, const Matrix& residual) {
  const std::size_t p = data.dim(), C = data.num_classes;
  Weights g(p, C);
  parallel_for(p, [&](std::size_t jb, std::size_t je) {
    for (std::size_t k = 0; k < batch.indices.size(); ++k) {
      const auto x = data.x().row(batch.indices[k]);
      const auto r = residual.row(k);
      for (std::size_t j = jb; j < je; ++j) {
        const double xj = x[j];
        if (xj == 0.0) continue;
        auto gj = g.row(j);
        for (std::size_t c = 0; c < C; ++c) gj[c] += xj * r[c];
      }
    }
  });
  for (auto& e : g.values()) e *= batch.scale;
  return g;
}

// Per-example loss terms and residual rows, computed independently per example.
template <typename PerExample>
LossGradient evaluate(const Weights& w, const Dataset& data, const MiniBatch& batch, PerExample&& per_example,
                      bool want_gradient) {
  const std::size_t m = batch.indices.size(), C = data.num_classes;
  Matrix residual(m, C);
  std::vector<double> terms(m, 0.0);
  parallel_for(m, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const std::size_t i = batch.indices[k];
      const auto scores = predict_scores(w, data.x().row(i));
      terms[k] = per_example(i, scores, residual.row(k));
    }
  });
  LossGradient out;
  for (double t : terms) out.value += t;
  if (want_gradient) out.gradient = accumulate_gradient(data, batch, residual);
  return out;
}

inline double softmax_term(std::span<const double> scores, Label y, std::span<double> residual) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  for (std::size_t c = 0; c < scores.size(); ++c) residual[c] = std::exp(scores[c] - mx) / z;
  residual[y] -= 1.0;
  return std::log(z) + mx - scores[y];
}

}  // namespace detail

/// Softmax cross-entropy summed over the batch (unscaled) and its gradient
/// scaled by batch.scale.
inline LossGradient softmax_loss_gradient(const Weights& w, const Dataset& data, const MiniBatch& batch,
                                          bool want_gradient = true) {
  detail::require_single_label(data, LossKind::softmax);
  detail::check_conforming(w, data);
  return detail::evaluate(
      w, data, batch,
      [&](std::size_t i, std::span<const double> s, std::span<double> r) {
        return detail::softmax_term(s, data.label(i), r);
      },
      want_gradient);
}

inline double softmax_loss(const Weights& w, const Dataset& data, const MiniBatch& batch) {
  return softmax_loss_gradient(w, data, batch, false).value;
}

inline Weights softmax_gradient(const Weights& w, const Dataset& data, const MiniBatch& batch) {
  return softmax_loss_gradient(w, data, batch, true).gradient;
}

/// One-vs-rest hinge: per class c, max(0, margin - sign * w_c^T x) with
/// sign = +1 for the labelled class and -1 otherwise. The subgradient at the
/// kink is taken as 0.
inline LossGradient hinge_loss_gradient(const Weights& w, const Dataset& data, const MiniBatch& batch,
                                        double margin = 1.0, bool want_gradient = true) {
  detail::require_single_label(data, LossKind::hinge);
  detail::check_conforming(w, data);
  return detail::evaluate(
      w, data, batch,
      [&](std::size_t i, std::span<const double> s, std::span<double> r) {
        const Label y = data.label(i);
        double loss = 0.0;
        for (std::size_t c = 0; c < s.size(); ++c) {
          const double sign = c == y ? 1.0 : -1.0;
          const double slack = margin - sign * s[c];
          r[c] = slack > 0.0 ? -sign : 0.0;
          loss += std::max(0.0, slack);
        }
        return loss;
      },
      want_gradient);
}

/// Multi-label mode: independent binary logistic loss per label.
inline LossGradient logistic_loss_gradient(const Weights& w, const Dataset& data, const MiniBatch& batch,
                                           bool want_gradient = true) {
  detail::check_conforming(w, data);
  return detail::evaluate(
      w, data, batch,
      [&](std::size_t i, std::span<const double> s, std::span<double> r) {
        const LabelSet& set = data.labels[i];
        double loss = 0.0;
        for (std::size_t c = 0; c < s.size(); ++c) {
          const double t = std::find(set.begin(), set.end(), static_cast<Label>(c)) != set.end() ? 1.0 : 0.0;
          // log(1 + e^s) - t s, stable for either sign of s
          loss += std::max(s[c], 0.0) + std::log1p(std::exp(-std::abs(s[c]))) - t * s[c];
          const double sig = s[c] >= 0 ? 1.0 / (1.0 + std::exp(-s[c])) : std::exp(s[c]) / (1.0 + std::exp(s[c]));
          r[c] = sig - t;
        }
        return loss;
      },
      want_gradient);
}

inline LossGradient loss_gradient(LossKind kind, const Weights& w, const Dataset& data, const MiniBatch& batch,
                                  bool want_gradient = true, double margin = 1.0) {
  switch (kind) {
    case LossKind::softmax: return softmax_loss_gradient(w, data, batch, want_gradient);
    case LossKind::hinge: return hinge_loss_gradient(w, data, batch, margin, want_gradient);
    case LossKind::logistic: return logistic_loss_gradient(w, data, batch, want_gradient);
  }
  throw Error(ErrorKind::unsupported_loss, "unknown loss");
}

/// The natural loss for a dataset: softmax for single-label, logistic otherwise.
inline LossKind default_loss(const Dataset& data) { return data.multi_label ? LossKind::logistic : LossKind::softmax; }

}  // namespace air
