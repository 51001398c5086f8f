#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "air/dataset.hpp"
#include "air/error.hpp"
#include "air/matrix.hpp"
#include "air/random.hpp"

namespace air {

// ---------------------------------------------------------------------------
// Synthetic blobs

struct BlobSpec {
  std::size_t n = 2000;
  std::size_t p = 50;
  std::size_t num_classes = 10;
  double separation = 3.0;
  double stddev = 1.0;
  std::uint64_t seed = 0;
  /// Clamp features at zero, giving nonnegative features with class-dependent
  /// sparsity patterns (the shape of rectified network activations).
  bool rectify = false;

  void validate() const {
    require(num_classes >= 2 && n >= num_classes, ErrorKind::config, "blobs need n >= C >= 2");
    require(p >= 1, ErrorKind::config, "blobs need p >= 1");
    require(separation > 0.0, ErrorKind::config, "blobs.separation must be > 0");
    require(stddev >= 0.0, ErrorKind::config, "blobs.stddev must be >= 0");
  }
};

/// Gaussian blobs: C centers uniform on the sphere of radius `separation`,
/// examples are center + N(0, stddev^2 I). Class sizes differ by at most one.
inline Dataset generate_blobs(const BlobSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Matrix centers(spec.num_classes, spec.p);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    auto row = centers.row(c);
    double nrm = 0.0;
    do {
      for (auto& e : row) e = rng.normal();
      nrm = norm2(row);
    } while (nrm == 0.0);
    for (auto& e : row) e *= spec.separation / nrm;
  }
  std::vector<Label> labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) labels[i] = static_cast<Label>(i % spec.num_classes);
  rng.shuffle(std::span<Label>(labels));

  Matrix x(spec.n, spec.p);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto center = centers.row(labels[i]);
    auto row = x.row(i);
    for (std::size_t j = 0; j < spec.p; ++j) {
      double value = center[j] + spec.stddev * rng.normal();
      row[j] = spec.rectify ? std::max(0.0, value) : value;
    }
  }
  return Dataset::single_label(std::move(x), labels, spec.num_classes);
}

// ---------------------------------------------------------------------------
// Byte helpers

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::io, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  void need(std::size_t count) const {
    require(pos_ + count <= bytes_.size(), ErrorKind::truncated,
            what_ + ": needs " + std::to_string(pos_ + count) + " bytes, file has " + std::to_string(bytes_.size()));
  }

  std::uint32_t u32_be() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v = (v << 8) | bytes_[pos_++];
    return v;
  }

  template <typename T>
  T le() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * b);
    return static_cast<T>(v);
  }

  float f32_le() {
    const auto bits = le<std::uint32_t>();
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }

  unsigned char byte() {
    need(1);
    return bytes_[pos_++];
  }

  void magic(const char (&expected)[5]) {
    need(4);
    const bool ok = std::equal(expected, expected + 4, bytes_.begin() + static_cast<std::ptrdiff_t>(pos_));
    require(ok, ErrorKind::wrong_magic, what_ + ": expected magic '" + std::string(expected, 4) + "'");
    pos_ += 4;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

template <typename T>
void put_le(std::ostream& os, T value) {
  auto v = static_cast<std::uint64_t>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xff));
}

inline void put_f32(std::ostream& os, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  put_le(os, bits);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// IDX (MNIST)

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Big-endian IDX image + label files. Pixels are scaled to [0, 1] and each
/// image is flattened row-major; C is one past the largest label.
inline Dataset load_idx(const std::string& image_path, const std::string& label_path) {
  const auto img = detail::read_file(image_path);
  const auto lab = detail::read_file(label_path);

  detail::ByteReader ir(img, image_path);
  const std::uint32_t im = ir.u32_be();
  require(im == kIdxImageMagic, ErrorKind::wrong_magic, image_path + ": image magic is " + std::to_string(im));
  const std::uint32_t n = ir.u32_be(), rows = ir.u32_be(), cols = ir.u32_be();

  detail::ByteReader lr(lab, label_path);
  const std::uint32_t lm = lr.u32_be();
  require(lm == kIdxLabelMagic, ErrorKind::wrong_magic, label_path + ": label magic is " + std::to_string(lm));
  const std::uint32_t nl = lr.u32_be();
  require(n == nl, ErrorKind::count_mismatch,
          "image file holds " + std::to_string(n) + " items, label file " + std::to_string(nl));

  const std::size_t p = static_cast<std::size_t>(rows) * cols;
  require(n >= 1 && p >= 1, ErrorKind::invalid_input, "IDX file describes an empty dataset");
  ir.need(static_cast<std::size_t>(n) * p);
  lr.need(n);

  Matrix x(n, p);
  for (auto& e : x.values()) e = static_cast<double>(ir.byte()) / 255.0;
  std::vector<Label> y(n);
  Label max_label = 0;
  for (auto& l : y) {
    l = lr.byte();
    max_label = std::max(max_label, l);
  }
  return Dataset::single_label(std::move(x), y, std::max<std::size_t>(2, max_label + 1));
}

// ---------------------------------------------------------------------------
// Binary feature / label files

/// "AIRF", u32 version=1, u64 n, u32 p, n*p little-endian f32 row-major.
inline void write_features_binary(std::ostream& os, const Matrix& x) {
  os.write("AIRF", 4);
  detail::put_le<std::uint32_t>(os, 1);
  detail::put_le<std::uint64_t>(os, x.rows());
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(x.cols()));
  for (double e : x.values()) detail::put_f32(os, static_cast<float>(e));
}

/// "AIRL", u32 version=1, u64 n, u32 C, u8 multi-label flag, then per example
/// u32 count followed by count u32 label indices.
inline void write_labels_binary(std::ostream& os, const std::vector<LabelSet>& labels, std::size_t num_classes,
                                bool multi_label) {
  os.write("AIRL", 4);
  detail::put_le<std::uint32_t>(os, 1);
  detail::put_le<std::uint64_t>(os, labels.size());
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(num_classes));
  os.put(multi_label ? 1 : 0);
  for (const auto& set : labels) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(set.size()));
    for (Label l : set) detail::put_le<std::uint32_t>(os, l);
  }
}

inline void write_dataset_binary(const Dataset& data, const std::string& feature_path, const std::string& label_path) {
  std::ofstream fx(feature_path, std::ios::binary);
  require(fx.good(), ErrorKind::io, "cannot write '" + feature_path + "'");
  write_features_binary(fx, data.x());
  std::ofstream fl(label_path, std::ios::binary);
  require(fl.good(), ErrorKind::io, "cannot write '" + label_path + "'");
  write_labels_binary(fl, data.labels, data.num_classes, data.multi_label);
}

inline Matrix read_features_binary(const std::vector<unsigned char>& bytes, const std::string& what = "features") {
  detail::ByteReader r(bytes, what);
  r.magic("AIRF");
  const auto version = r.le<std::uint32_t>();
  require(version == 1, ErrorKind::parse, what + ": unsupported version " + std::to_string(version));
  const auto n = r.le<std::uint64_t>();
  const auto p = r.le<std::uint32_t>();
  require(n >= 1 && p >= 1, ErrorKind::invalid_input, what + ": empty feature matrix");
  r.need(n * p * 4);
  Matrix x(n, p);
  for (auto& e : x.values()) e = static_cast<double>(r.f32_le());
  return x;
}

struct LabelFile {
  std::vector<LabelSet> labels;
  std::size_t num_classes = 0;
  bool multi_label = false;
};

inline LabelFile read_labels_binary(const std::vector<unsigned char>& bytes, const std::string& what = "labels") {
  detail::ByteReader r(bytes, what);
  r.magic("AIRL");
  const auto version = r.le<std::uint32_t>();
  require(version == 1, ErrorKind::parse, what + ": unsupported version " + std::to_string(version));
  LabelFile out;
  const auto n = r.le<std::uint64_t>();
  out.num_classes = r.le<std::uint32_t>();
  out.multi_label = r.byte() != 0;
  out.labels.resize(n);
  for (auto& set : out.labels) {
    const auto count = r.le<std::uint32_t>();
    set.resize(count);
    for (auto& l : set) l = r.le<std::uint32_t>();
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline double parse_number(const std::string& cell, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  std::string trimmed = cell;
  trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
  trimmed.erase(trimmed.find_last_not_of(" \t\r") + 1);
  try {
    v = std::stod(trimmed, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(!trimmed.empty() && used == trimmed.size(), ErrorKind::parse,
          "line " + std::to_string(line) + ": non-numeric cell '" + cell + "'");
  return v;
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace detail

inline Matrix read_features_csv(const std::string& text) {
  const auto lines = detail::lines_of(text);
  require(!lines.empty(), ErrorKind::truncated, "feature CSV is empty");
  std::vector<double> values;
  std::size_t cols = 0;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::istringstream ls(lines[li]);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(ls, cell, ',')) {
      values.push_back(detail::parse_number(cell, li + 1));
      ++count;
    }
    if (li == 0) cols = count;
    require(count == cols, ErrorKind::parse,
            "ragged feature CSV: line " + std::to_string(li + 1) + " has " + std::to_string(count) + " cells, expected " +
                std::to_string(cols));
  }
  Matrix x(lines.size(), cols);
  std::copy(values.begin(), values.end(), x.values().begin());
  return x;
}

/// One row per example: a single integer, or a semicolon-separated list
/// (which makes the file multi-label).
inline LabelFile read_labels_csv(const std::string& text) {
  LabelFile out;
  Label max_label = 0;
  const auto lines = detail::lines_of(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    LabelSet set;
    std::istringstream ls(lines[li]);
    std::string cell;
    while (std::getline(ls, cell, ';')) {
      const double v = detail::parse_number(cell, li + 1);
      require(v >= 0 && v == std::floor(v), ErrorKind::parse, "line " + std::to_string(li + 1) + ": label must be a nonnegative integer");
      set.push_back(static_cast<Label>(v));
      max_label = std::max(max_label, set.back());
    }
    if (set.size() != 1 || lines[li].find(';') != std::string::npos) out.multi_label = true;
    out.labels.push_back(std::move(set));
  }
  out.num_classes = std::max<std::size_t>(2, max_label + 1);
  return out;
}

enum class FeatureFormat { binary, csv };

/// Loads a feature file and a label file of the same format. A label file's
/// class count may be overridden by `num_classes`.
inline Dataset load_features(const std::string& feature_path, const std::string& label_path, FeatureFormat format,
                             std::optional<std::size_t> num_classes = std::nullopt) {
  const auto fbytes = detail::read_file(feature_path);
  const auto lbytes = detail::read_file(label_path);
  Matrix x;
  LabelFile lf;
  if (format == FeatureFormat::binary) {
    x = read_features_binary(fbytes, feature_path);
    lf = read_labels_binary(lbytes, label_path);
  } else {
    x = read_features_csv(std::string(fbytes.begin(), fbytes.end()));
    lf = read_labels_csv(std::string(lbytes.begin(), lbytes.end()));
  }
  require(lf.labels.size() == x.rows(), ErrorKind::count_mismatch,
          "feature file has " + std::to_string(x.rows()) + " rows, label file " + std::to_string(lf.labels.size()));
  Dataset d;
  d.features = std::make_shared<const Matrix>(std::move(x));
  d.labels = std::move(lf.labels);
  d.num_classes = num_classes.value_or(lf.num_classes);
  d.multi_label = lf.multi_label;
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split by (first) label. The test set has round(f * n)
/// examples; per-class quotas use largest remainders, so each class's test
/// count is within one of f * n_c. Both index lists are ascending.
inline SplitIndices split_indices(const Dataset& data, double test_fraction, std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::invalid_input, "test fraction must be in (0, 1)");
  const std::size_t n = data.size(), C = data.num_classes;
  std::vector<std::vector<std::size_t>> by_class(C);
  for (std::size_t i = 0; i < n; ++i) by_class[data.labels[i].empty() ? 0 : data.labels[i].front()].push_back(i);

  const auto total_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  std::vector<std::size_t> quota(C);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const double exact = test_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(-(exact - std::floor(exact)), c);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t r = 0; assigned < total_test && r < remainders.size(); ++r) {
    const std::size_t c = remainders[r].second;
    if (quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  Rng rng(seed);
  SplitIndices out;
  for (std::size_t c = 0; c < C; ++c) {
    auto& members = by_class[c];
    rng.shuffle(std::span<std::size_t>(members));
    out.test.insert(out.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    out.train.insert(out.train.end(), members.begin() + static_cast<std::ptrdiff_t>(quota[c]), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  const auto idx = split_indices(data, test_fraction, seed);
  return {data.subset(idx.train), data.subset(idx.test)};
}

}  // namespace air
