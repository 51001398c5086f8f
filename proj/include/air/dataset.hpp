#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "air/error.hpp"
#include "air/matrix.hpp"

namespace air {

using Label = std::uint32_t;
using LabelSet = std::vector<Label>;

/// Feature matrix (n x p) with labels. Features are shared and immutable so
/// that operators built over a dataset stay valid while copies circulate.
struct Dataset {
  std::shared_ptr<const Matrix> features;
  /// Single-label datasets hold exactly one entry per set.
  std::vector<LabelSet> labels;
  std::size_t num_classes = 0;
  bool multi_label = false;
  std::optional<std::vector<bool>> clean_mask;
  std::optional<std::vector<LabelSet>> true_labels;

  std::size_t size() const noexcept { return features ? features->rows() : 0; }
  std::size_t dim() const noexcept { return features ? features->cols() : 0; }
  const Matrix& x() const noexcept { return *features; }

  Label label(std::size_t i) const { return labels[i].front(); }

  /// Ground-truth label set: true_labels when known, else the observed one.
  const LabelSet& truth(std::size_t i) const {
    return true_labels ? (*true_labels)[i] : labels[i];
  }

  void validate() const {
    require(features != nullptr, ErrorKind::invalid_input, "dataset has no features");
    require(size() >= 1 && dim() >= 1, ErrorKind::invalid_input, "dataset must have n >= 1 and p >= 1");
    require(num_classes >= 1, ErrorKind::invalid_input, "dataset must have at least one class");
    require(labels.size() == size(), ErrorKind::count_mismatch,
            "label count " + std::to_string(labels.size()) + " != example count " + std::to_string(size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      require(multi_label || labels[i].size() == 1, ErrorKind::invalid_input,
              "single-label dataset has example with " + std::to_string(labels[i].size()) + " labels");
      for (Label l : labels[i])
        require(l < num_classes, ErrorKind::invalid_input,
                "label " + std::to_string(l) + " out of range for " + std::to_string(num_classes) + " classes");
    }
    if (clean_mask) require(clean_mask->size() == size(), ErrorKind::count_mismatch, "clean mask length mismatch");
    if (true_labels) {
      require(true_labels->size() == size(), ErrorKind::count_mismatch, "true label count mismatch");
      if (clean_mask)
        for (std::size_t i = 0; i < size(); ++i)
          require(!(*clean_mask)[i] || (*true_labels)[i] == labels[i], ErrorKind::invalid_input,
                  "clean example " + std::to_string(i) + " disagrees with its true label");
    }
  }

  static Dataset single_label(Matrix x, const std::vector<Label>& y, std::size_t num_classes) {
    Dataset d;
    d.features = std::make_shared<const Matrix>(std::move(x));
    d.labels.reserve(y.size());
    for (Label l : y) d.labels.push_back({l});
    d.num_classes = num_classes;
    d.validate();
    return d;
  }

  static Dataset multi(Matrix x, std::vector<LabelSet> sets, std::size_t num_classes) {
    Dataset d;
    d.features = std::make_shared<const Matrix>(std::move(x));
    d.labels = std::move(sets);
    d.num_classes = num_classes;
    d.multi_label = true;
    d.validate();
    return d;
  }

  /// Copy of the examples at `indices`, in that order, including bookkeeping.
  Dataset subset(const std::vector<std::size_t>& indices) const {
    Matrix sub(indices.size(), dim());
    Dataset d;
    d.labels.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto src = x().row(indices[k]);
      std::copy(src.begin(), src.end(), sub.row(k).begin());
      d.labels.push_back(labels[indices[k]]);
    }
    d.features = std::make_shared<const Matrix>(std::move(sub));
    d.num_classes = num_classes;
    d.multi_label = multi_label;
    if (clean_mask) {
      d.clean_mask.emplace();
      for (auto i : indices) d.clean_mask->push_back((*clean_mask)[i]);
    }
    if (true_labels) {
      d.true_labels.emplace();
      for (auto i : indices) d.true_labels->push_back((*true_labels)[i]);
    }
    return d;
  }
};

}  // namespace air
