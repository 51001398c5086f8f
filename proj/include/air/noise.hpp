#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "air/dataset.hpp"
#include "air/error.hpp"
#include "air/matrix.hpp"
#include "air/random.hpp"

namespace air {

/// Row-stochastic C x C matrix; q(i, j) is the probability that true label i
/// is recorded as j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(Matrix q) : q_(std::move(q)) {
    require(q_.rows() == q_.cols() && q_.rows() >= 1, ErrorKind::invalid_input, "confusion matrix must be square");
    for (std::size_t i = 0; i < q_.rows(); ++i) {
      double sum = 0.0;
      for (double e : q_.row(i)) {
        require(e >= 0.0 && e <= 1.0, ErrorKind::invalid_input, "confusion entries must lie in [0, 1]");
        sum += e;
      }
      require(std::abs(sum - 1.0) <= 1e-12, ErrorKind::invalid_input,
              "confusion row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }

  std::size_t num_classes() const noexcept { return q_.rows(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return q_(i, j); }
  const Matrix& matrix() const noexcept { return q_; }

 private:
  Matrix q_;
};

/// keep_prob:     the noise level is the corruption probability; diagonal 1 - level.
/// paper_literal: the diagonal is set to the level itself.
/// Off-diagonal mass is spread evenly in both cases.
enum class NoiseConvention { keep_prob, paper_literal };

inline ConfusionMatrix confusion_from_noise_level(std::size_t num_classes, double level,
                                                  NoiseConvention convention = NoiseConvention::keep_prob) {
  require(num_classes >= 2, ErrorKind::invalid_input, "confusion matrix needs C >= 2");
  require(level >= 0.0 && level <= 1.0, ErrorKind::invalid_input, "noise level must be in [0, 1]");
  const double diag = convention == NoiseConvention::keep_prob ? 1.0 - level : level;
  const double off = (1.0 - diag) / static_cast<double>(num_classes - 1);
  Matrix q(num_classes, num_classes, off);
  for (std::size_t i = 0; i < num_classes; ++i) q(i, i) = diag;
  return ConfusionMatrix(std::move(q));
}

struct NoisyLabels {
  std::vector<Label> labels;
  std::vector<bool> clean_mask;
};

/// Resamples each label independently from its row of Q. A draw may map a
/// label to itself, in which case the example counts as clean.
inline NoisyLabels corrupt_labels(const std::vector<Label>& labels, const ConfusionMatrix& q, std::uint64_t seed) {
  const std::size_t C = q.num_classes();
  Rng rng(seed);
  NoisyLabels out;
  out.labels.reserve(labels.size());
  out.clean_mask.reserve(labels.size());
  for (Label y : labels) {
    require(y < C, ErrorKind::dimension_mismatch,
            "label " + std::to_string(y) + " outside confusion matrix of size " + std::to_string(C));
    const double u = rng.uniform();
    double acc = 0.0;
    Label pick = y;
    std::size_t last_positive = y;
    for (std::size_t j = 0; j < C; ++j) {
      const double qj = q(y, j);
      if (qj > 0.0) last_positive = j;
      acc += qj;
      if (u < acc) {
        pick = static_cast<Label>(j);
        break;
      }
      // rounding can leave acc a hair under 1
      if (j + 1 == C) pick = static_cast<Label>(last_positive);
    }
    out.labels.push_back(pick);
    out.clean_mask.push_back(pick == y);
  }
  return out;
}

/// Flips exactly round(fraction * n) labels, chosen without replacement, each
/// to a uniformly drawn different class.
inline NoisyLabels flip_uniform(const std::vector<Label>& labels, double fraction, std::size_t num_classes,
                                std::uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 1.0, ErrorKind::invalid_input, "flip fraction must be in [0, 1]");
  require(num_classes >= 2, ErrorKind::invalid_input, "flipping needs C >= 2");
  Rng rng(seed);
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(labels.size())));
  NoisyLabels out{labels, std::vector<bool>(labels.size(), true)};
  for (std::size_t i : rng.sample_without_replacement(labels.size(), count)) {
    require(labels[i] < num_classes, ErrorKind::dimension_mismatch, "label out of range");
    out.labels[i] = static_cast<Label>((labels[i] + 1 + rng.index(num_classes - 1)) % num_classes);
    out.clean_mask[i] = false;
  }
  return out;
}

/// Replaces a single-label dataset's labels with noisy ones, keeping the
/// originals as ground truth and recording the clean mask.
inline Dataset with_noisy_labels(const Dataset& data, const NoisyLabels& noisy) {
  require(!data.multi_label, ErrorKind::invalid_input, "label noise applies to single-label datasets");
  require(noisy.labels.size() == data.size(), ErrorKind::count_mismatch, "noisy label count mismatch");
  Dataset out = data;
  out.true_labels = data.true_labels ? *data.true_labels : data.labels;
  for (std::size_t i = 0; i < data.size(); ++i) out.labels[i] = {noisy.labels[i]};
  out.clean_mask = noisy.clean_mask;
  out.validate();
  return out;
}

inline std::vector<Label> single_labels(const Dataset& data) {
  std::vector<Label> y;
  y.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) y.push_back(data.label(i));
  return y;
}

inline void write_confusion(std::ostream& os, const ConfusionMatrix& q) {
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < q.num_classes(); ++i) {
    for (std::size_t j = 0; j < q.num_classes(); ++j) os << (j ? " " : "") << q(i, j);
    os << '\n';
  }
  os.precision(old);
}

/// Plain-text C x C grid, whitespace separated, one row per line.
inline ConfusionMatrix read_confusion(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    std::string cell;
    while (ls >> cell) {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      require(used == cell.size(), ErrorKind::parse, "non-numeric confusion cell '" + cell + "'");
      row.push_back(value);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorKind::parse, "empty confusion matrix");
  Matrix q(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == rows.size(), ErrorKind::parse, "confusion matrix must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) q(i, j) = rows[i][j];
  }
  return ConfusionMatrix(std::move(q));
}

}  // namespace air
