#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "air/dataset.hpp"
#include "air/error.hpp"
#include "air/loss.hpp"
#include "air/matrix.hpp"

namespace air {

/// n x C matrix of class scores.
inline Matrix score_matrix(const Weights& w, const Dataset& data) {
  Matrix s(data.size(), data.num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = predict_scores(w, data.x().row(i));
    std::copy(row.begin(), row.end(), s.row(i).begin());
  }
  return s;
}

/// Fraction of examples whose argmax score (lowest index on ties) equals the
/// ground-truth label.
inline double accuracy(const Matrix& scores, const std::vector<LabelSet>& truth) {
  require(scores.rows() == truth.size(), ErrorKind::dimension_mismatch, "one truth set per scored example");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (!truth[i].empty() && argmax(scores.row(i)) == truth[i].front()) ++hits;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

inline std::vector<LabelSet> ground_truth(const Dataset& data) {
  std::vector<LabelSet> t(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) t[i] = data.truth(i);
  return t;
}

inline double accuracy(const Weights& w, const Dataset& data) {
  return accuracy(score_matrix(w, data), ground_truth(data));
}

/// Indices ordered by descending value, ascending index on ties.
inline std::vector<std::size_t> rank_descending(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t skipped = 0;
};

/// Per-image precision |top-n & truth| / n and recall |top-n & truth| / |truth|,
/// averaged over images. Images with an empty truth set are skipped.
inline PrecisionRecall precision_recall_at_n(const Matrix& scores, const std::vector<LabelSet>& truth, std::size_t n) {
  require(n >= 1, ErrorKind::invalid_input, "n must be >= 1");
  require(scores.rows() == truth.size(), ErrorKind::dimension_mismatch, "one truth set per scored example");
  PrecisionRecall out;
  std::size_t used = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].empty()) {
      ++out.skipped;
      continue;
    }
    const auto order = rank_descending(scores.row(i));
    const std::size_t top = std::min(n, order.size());
    std::size_t hit = 0;
    for (std::size_t r = 0; r < top; ++r)
      if (std::find(truth[i].begin(), truth[i].end(), static_cast<Label>(order[r])) != truth[i].end()) ++hit;
    out.precision += static_cast<double>(hit) / static_cast<double>(n);
    out.recall += static_cast<double>(hit) / static_cast<double>(truth[i].size());
    ++used;
  }
  if (used) {
    out.precision /= static_cast<double>(used);
    out.recall /= static_cast<double>(used);
  }
  return out;
}

/// AP = mean over relevant items of (relevant within top r) / r, r the item's
/// rank. Empty when nothing is relevant.
inline std::optional<double> average_precision(std::span<const double> scores, const std::vector<bool>& relevant) {
  require(scores.size() == relevant.size(), ErrorKind::dimension_mismatch, "one relevance flag per item");
  const auto order = rank_descending(scores);
  std::size_t seen = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!relevant[order[r]]) continue;
    ++seen;
    sum += static_cast<double>(seen) / static_cast<double>(r + 1);
  }
  if (seen == 0) return std::nullopt;
  return sum / static_cast<double>(seen);
}

enum class MapAxis { per_label, per_image };

struct MapResult {
  double value = 0.0;
  std::size_t skipped = 0;
};

/// per_label: each label ranks the images (mAP_L); per_image: each image
/// ranks the labels (mAP_I). Rankings with no relevant item are skipped.
inline MapResult mean_average_precision(const Matrix& scores, const std::vector<LabelSet>& truth, MapAxis axis) {
  require(scores.rows() == truth.size(), ErrorKind::dimension_mismatch, "one truth set per scored example");
  const std::size_t m = scores.rows(), C = scores.cols();
  auto is_relevant = [&](std::size_t i, std::size_t c) {
    return std::find(truth[i].begin(), truth[i].end(), static_cast<Label>(c)) != truth[i].end();
  };
  MapResult out;
  std::size_t used = 0;
  const std::size_t rankings = axis == MapAxis::per_label ? C : m;
  for (std::size_t q = 0; q < rankings; ++q) {
    std::vector<double> s;
    std::vector<bool> rel;
    if (axis == MapAxis::per_label) {
      for (std::size_t i = 0; i < m; ++i) {
        s.push_back(scores(i, q));
        rel.push_back(is_relevant(i, q));
      }
    } else {
      const auto row = scores.row(q);
      s.assign(row.begin(), row.end());
      for (std::size_t c = 0; c < C; ++c) rel.push_back(is_relevant(q, c));
    }
    if (const auto ap = average_precision(s, rel)) {
      out.value += *ap;
      ++used;
    } else {
      ++out.skipped;
    }
  }
  if (used) out.value /= static_cast<double>(used);
  return out;
}

/// Probability that a random positive outranks a random negative (ties count
/// one half). 0.5 when either population is empty.
inline double roc_auc(std::span<const double> values, const std::vector<bool>& positive) {
  require(values.size() == positive.size(), ErrorKind::dimension_mismatch, "one flag per value");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  // rank-sum with midranks for ties
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t r = 0; r < order.size();) {
    std::size_t e = r;
    while (e < order.size() && values[order[e]] == values[order[r]]) ++e;
    const double mid = 0.5 * static_cast<double>(r + 1 + e);
    for (std::size_t t = r; t < e; ++t)
      if (positive[order[t]]) {
        pos_rank_sum += mid;
        ++n_pos;
      }
    r = e;
  }
  const std::size_t n_neg = values.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.5;
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct ActivationStats {
  std::size_t epoch = 0;
  double clean_mean = 0.0;
  double clean_sd = 0.0;
  double noisy_mean = 0.0;
  double noisy_sd = 0.0;
  double gap = 0.0;
  double auc = 0.5;
  std::size_t clean_count = 0;
  std::size_t noisy_count = 0;
};

/// Clean-vs-noisy statistics of per-example activations. NaN activations
/// (examples without an active group) are left out.
inline ActivationStats activation_stats(std::span<const double> activations, const std::vector<bool>& clean_mask,
                                        std::size_t epoch = 0) {
  require(activations.size() == clean_mask.size(), ErrorKind::dimension_mismatch, "one mask flag per activation");
  std::vector<double> vals;
  std::vector<bool> pos;
  double sum[2] = {0, 0}, sq[2] = {0, 0};
  std::size_t cnt[2] = {0, 0};
  for (std::size_t i = 0; i < activations.size(); ++i) {
    const double a = activations[i];
    if (std::isnan(a)) continue;
    const int clean = clean_mask[i] ? 1 : 0;
    sum[clean] += a;
    sq[clean] += a * a;
    ++cnt[clean];
    vals.push_back(a);
    pos.push_back(clean_mask[i]);
  }
  auto mean = [&](int g) { return cnt[g] ? sum[g] / static_cast<double>(cnt[g]) : 0.0; };
  auto sd = [&](int g) {
    if (cnt[g] < 2) return 0.0;
    const double m = mean(g);
    return std::sqrt(std::max(0.0, (sq[g] - static_cast<double>(cnt[g]) * m * m) / static_cast<double>(cnt[g] - 1)));
  };
  ActivationStats s;
  s.epoch = epoch;
  s.clean_mean = mean(1);
  s.clean_sd = sd(1);
  s.noisy_mean = mean(0);
  s.noisy_sd = sd(0);
  s.gap = s.clean_mean - s.noisy_mean;
  s.auc = roc_auc(vals, pos);
  s.clean_count = cnt[1];
  s.noisy_count = cnt[0];
  return s;
}

struct ActivationReport {
  std::vector<ActivationStats> series;
  /// Example indices by descending final activation.
  std::vector<std::size_t> ranking;
};

/// Per-epoch separation statistics plus the final-epoch ranking. Without a
/// clean mask there is nothing to report.
inline std::optional<ActivationReport> activation_report(const std::vector<std::vector<double>>& epoch_activations,
                                                         const std::optional<std::vector<bool>>& clean_mask) {
  if (!clean_mask || epoch_activations.empty()) return std::nullopt;
  ActivationReport r;
  for (std::size_t e = 0; e < epoch_activations.size(); ++e)
    r.series.push_back(activation_stats(epoch_activations[e], *clean_mask, e));
  std::vector<double> last = epoch_activations.back();
  for (auto& a : last)
    if (std::isnan(a)) a = -1.0;
  r.ranking = rank_descending(last);
  return r;
}

}  // namespace air
