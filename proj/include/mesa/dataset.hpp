#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <variant>
#include <vector>

#include "mesa/error.hpp"
#include "mesa/random.hpp"

namespace mesa {

using Label = std::uint8_t;
using IndexList = std::vector<std::size_t>;

// Feature matrix (row-major) plus binary labels. Label 1 is the minority
// (positive) class. Immutable once built.
class LabeledDataset {
 public:
  LabeledDataset() = default;

  LabeledDataset(std::size_t dims, std::vector<double> features, std::vector<Label> labels,
                 std::vector<std::string> feature_names = {})
      : dims_(dims),
        features_(std::move(features)),
        labels_(std::move(labels)),
        feature_names_(std::move(feature_names)) {
    if (dims_ == 0) throw DataError(DataErrc::invalid_argument, "dataset needs at least one feature");
    if (features_.size() != labels_.size() * dims_) {
      throw DataError(DataErrc::dimension_mismatch, "feature count does not match rows x dims");
    }
    for (double v : features_) {
      if (!std::isfinite(v)) throw DataError(DataErrc::non_finite, "non-finite feature value");
    }
    for (Label y : labels_) {
      if (y > 1) throw DataError(DataErrc::label_domain, "label outside {0,1}");
      y == 1 ? ++n_pos_ : ++n_neg_;
    }
    if (!feature_names_.empty() && feature_names_.size() != dims_) {
      throw DataError(DataErrc::dimension_mismatch, "feature name count does not match dims");
    }
  }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dims() const noexcept { return dims_; }
  bool empty() const noexcept { return labels_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dims_, dims_};
  }
  double at(std::size_t i, std::size_t j) const { return features_[i * dims_ + j]; }
  Label label(std::size_t i) const { return labels_[i]; }

  const std::vector<double>& features() const noexcept { return features_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  std::size_t minority_count() const noexcept { return n_pos_; }
  std::size_t majority_count() const noexcept { return n_neg_; }
  bool has_both_classes() const noexcept { return n_pos_ > 0 && n_neg_ > 0; }

  // |N| / |P|; infinite when there is no minority row.
  double imbalance_ratio() const noexcept {
    return n_pos_ == 0 ? INFINITY : static_cast<double>(n_neg_) / static_cast<double>(n_pos_);
  }

  IndexList indices_of(Label y) const {
    IndexList out;
    out.reserve(y == 1 ? n_pos_ : n_neg_);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] == y) out.push_back(i);
    }
    return out;
  }
  IndexList minority_indices() const { return indices_of(1); }
  IndexList majority_indices() const { return indices_of(0); }

  LabeledDataset subset(std::span<const std::size_t> idx) const {
    std::vector<double> f;
    std::vector<Label> y;
    f.reserve(idx.size() * dims_);
    y.reserve(idx.size());
    for (std::size_t i : idx) {
      auto r = row(i);
      f.insert(f.end(), r.begin(), r.end());
      y.push_back(labels_[i]);
    }
    return LabeledDataset(dims_, std::move(f), std::move(y), feature_names_);
  }

  LabeledDataset with_labels(std::vector<Label> labels) const {
    return LabeledDataset(dims_, features_, std::move(labels), feature_names_);
  }

  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
    return a.dims_ == b.dims_ && a.features_ == b.features_ && a.labels_ == b.labels_;
  }

 private:
  std::size_t dims_ = 0;
  std::vector<double> features_;
  std::vector<Label> labels_;
  std::vector<std::string> feature_names_;
  std::size_t n_pos_ = 0;
  std::size_t n_neg_ = 0;
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

// Label column selected by header name or zero-based position.
using ColumnRef = std::variant<std::string, std::size_t>;

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Reads a comma-separated file with a mandatory header row. Every column other
// than the label column becomes a feature; row order is preserved.
inline LabeledDataset load_csv(const std::string& path, const ColumnRef& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrc::missing_file, "cannot open " + path);

  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!detail::trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw DataError(DataErrc::empty_file, path + " has no header row");

  const auto header = detail::split_csv_line(line);
  std::size_t label_idx = 0;
  if (const auto* name = std::get_if<std::string>(&label_column)) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](std::string_view h) { return detail::trim(h) == *name; });
    if (it == header.end()) throw DataError(DataErrc::unknown_column, "no column named '" + *name + "'");
    label_idx = static_cast<std::size_t>(it - header.begin());
  } else {
    label_idx = std::get<std::size_t>(label_column);
    if (label_idx >= header.size()) {
      throw DataError(DataErrc::unknown_column, "label column index out of range");
    }
  }
  if (header.size() < 2) throw DataError(DataErrc::malformed_row, "need at least one feature column");

  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != label_idx) names.emplace_back(detail::trim(header[j]));
  }

  const std::size_t dims = header.size() - 1;
  std::vector<double> features;
  std::vector<Label> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(DataErrc::malformed_row,
                      path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(header.size()) + " cells");
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      double v = 0.0;
      if (!detail::parse_double(cells[j], v)) {
        throw DataError(DataErrc::non_numeric,
                        path + ":" + std::to_string(line_no) + ": '" + std::string(cells[j]) + "'");
      }
      if (j == label_idx) {
        if (v != 0.0 && v != 1.0) {
          throw DataError(DataErrc::label_domain,
                          path + ":" + std::to_string(line_no) + ": label " + std::string(cells[j]));
        }
        labels.push_back(v == 1.0 ? 1 : 0);
      } else {
        if (!std::isfinite(v)) {
          throw DataError(DataErrc::non_finite, path + ":" + std::to_string(line_no));
        }
        features.push_back(v);
      }
    }
  }
  if (labels.empty()) throw DataError(DataErrc::empty_file, path + " has no data rows");

  LabeledDataset ds(dims, std::move(features), std::move(labels), std::move(names));
  if (!ds.has_both_classes()) throw DataError(DataErrc::single_class, path + " contains a single class");
  return ds;
}

// Writes features followed by a trailing `label` column.
inline void write_csv(const LabeledDataset& ds, std::ostream& out) {
  for (std::size_t j = 0; j < ds.dims(); ++j) {
    out << (ds.feature_names().empty() ? "x" + std::to_string(j) : ds.feature_names()[j]) << ',';
  }
  out << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.row(i)) out << format_double(v) << ',';
    out << static_cast<int>(ds.label(i)) << '\n';
  }
}

inline void write_csv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataErrc::missing_file, "cannot write " + path);
  write_csv(ds, out);
}

// ---------------------------------------------------------------------------
// Stratified splitting
// ---------------------------------------------------------------------------

struct SplitSpec {
  double train_fraction = 0.6;
  double valid_fraction = 0.2;
  double test_fraction = 0.2;
  Seed seed = 0;

  void validate() const {
    if (!(train_fraction > 0 && valid_fraction > 0 && test_fraction > 0)) {
      throw ConfigError("split fractions must be positive");
    }
    if (std::abs(train_fraction + valid_fraction + test_fraction - 1.0) > 1e-12) {
      throw ConfigError("split fractions must sum to 1");
    }
  }
};

struct SplitIndices {
  IndexList train, valid, test;
};

struct Split {
  LabeledDataset train, valid, test;
};

// In-place Fisher-Yates shuffle with the portable index sampler.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

// Per-class counts: floor for validation/test, remainder to train.
inline std::size_t split_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
}

inline SplitIndices stratified_split_indices(const LabeledDataset& ds, const SplitSpec& spec) {
  spec.validate();
  SplitIndices out;
  for (Label y : {Label{0}, Label{1}}) {
    IndexList idx = ds.indices_of(y);
    const std::size_t n_valid = split_count(idx.size(), spec.valid_fraction);
    const std::size_t n_test = split_count(idx.size(), spec.test_fraction);
    if (idx.size() < 3 || n_valid == 0 || n_test == 0 || n_valid + n_test >= idx.size()) {
      throw DataError(DataErrc::class_too_small,
                      "class " + std::to_string(y) + " with " + std::to_string(idx.size()) +
                          " rows cannot cover train/valid/test");
    }
    Rng rng(derive_seed(spec.seed, 0x5911u, y));
    shuffle(idx, rng);
    out.valid.insert(out.valid.end(), idx.begin(), idx.begin() + n_valid);
    out.test.insert(out.test.end(), idx.begin() + n_valid, idx.begin() + n_valid + n_test);
    out.train.insert(out.train.end(), idx.begin() + n_valid + n_test, idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.valid.begin(), out.valid.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline Split stratified_split(const LabeledDataset& ds, const SplitSpec& spec) {
  const SplitIndices idx = stratified_split_indices(ds, spec);
  return {ds.subset(idx.train), ds.subset(idx.valid), ds.subset(idx.test)};
}

// Uniform class-preserving subsample keeping `fraction` of each class (at
// least `min_per_class` rows). Used to build sub-task meta-training sets.
inline LabeledDataset stratified_subsample(const LabeledDataset& ds, double fraction, Seed seed,
                                           std::size_t min_per_class = 3) {
  if (!(fraction > 0 && fraction <= 1)) throw ConfigError("subsample fraction must be in (0,1]");
  IndexList keep;
  for (Label y : {Label{0}, Label{1}}) {
    IndexList idx = ds.indices_of(y);
    std::size_t n = static_cast<std::size_t>(std::llround(static_cast<double>(idx.size()) * fraction));
    n = std::min(idx.size(), std::max(n, min_per_class));
    Rng rng(derive_seed(seed, 0x5ab5u, y));
    shuffle(idx, rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + n);
  }
  std::sort(keep.begin(), keep.end());
  return ds.subset(keep);
}

// ---------------------------------------------------------------------------
// Synthetic toy tasks
// ---------------------------------------------------------------------------

// Majority rows lie on a noisy upper half-circle (a "∩" band); minority rows
// form a Gaussian blob on the symmetry axis below the band's apex. `overlap`
// slides the blob centre linearly from well below the band (0) onto the apex
// of the band (1).
struct ToySpec {
  std::size_t n_majority = 2000;
  std::size_t n_minority = 200;
  double overlap = 0.5;
  Seed seed = 0;

  void validate() const {
    if (!(overlap >= 0.0 && overlap <= 1.0)) throw ConfigError("overlap must lie in [0,1]");
    if (n_minority < 2 || n_majority < n_minority) {
      throw ConfigError("toy spec needs n_majority >= n_minority >= 2");
    }
  }
};

struct ToyGeometry {
  static constexpr double arc_radius = 1.0;
  static constexpr double arc_noise = 0.2;    // radial std of the band
  static constexpr double blob_std = 0.3;
  static constexpr double far_center = -1.0;  // blob centre y at overlap 0
  static constexpr double truncation = 3.0;   // both noises truncated at 3 std

  static double blob_center(double overlap) {
    return far_center + (arc_radius - far_center) * overlap;
  }
};

namespace detail {
inline double truncated_normal(Rng& rng, double bound) {
  double z;
  do {
    z = standard_normal(rng);
  } while (std::abs(z) > bound);
  return z;
}
}  // namespace detail

inline LabeledDataset make_toy(const ToySpec& spec) {
  spec.validate();
  using G = ToyGeometry;
  Rng rng(derive_seed(spec.seed, 0x70e1u));
  const std::size_t n = spec.n_majority + spec.n_minority;
  std::vector<double> f;
  std::vector<Label> y;
  f.reserve(2 * n);
  y.reserve(n);
  constexpr double pi = 3.14159265358979323846;
  for (std::size_t i = 0; i < spec.n_majority; ++i) {
    const double theta = pi * uniform01(rng);
    const double r = G::arc_radius + G::arc_noise * detail::truncated_normal(rng, G::truncation);
    f.push_back(r * std::cos(theta));
    f.push_back(r * std::sin(theta));
    y.push_back(0);
  }
  const double cy = G::blob_center(spec.overlap);
  for (std::size_t i = 0; i < spec.n_minority; ++i) {
    f.push_back(G::blob_std * detail::truncated_normal(rng, G::truncation));
    f.push_back(cy + G::blob_std * detail::truncated_normal(rng, G::truncation));
    y.push_back(1);
  }
  return LabeledDataset(2, std::move(f), std::move(y), {"x0", "x1"});
}

// ---------------------------------------------------------------------------
// Label noise
// ---------------------------------------------------------------------------

// Flips round(|P| * ratio) minority labels to 0 and the same number of
// majority labels to 1, so class counts and IR are unchanged.
inline LabeledDataset inject_flip_noise(const LabeledDataset& ds, double ratio, Seed seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ConfigError("noise ratio must lie in [0,1)");
  const std::size_t n_pos = ds.minority_count();
  const std::size_t n_neg = ds.majority_count();
  const double want = static_cast<double>(n_pos) * ratio;
  const auto ceil_m = static_cast<std::size_t>(std::ceil(want - 1e-9));
  if (ratio > 0 && (n_pos == 0 || n_neg == 0 || ceil_m > std::min(n_pos, n_neg) - 1)) {
    throw DataError(DataErrc::class_too_small, "noise ratio would make a class vanish");
  }
  const auto m = static_cast<std::size_t>(std::llround(want));
  if (m == 0) return ds;

  std::vector<Label> labels = ds.labels();
  Rng rng(derive_seed(seed, 0xf11bu));
  for (Label y : {Label{1}, Label{0}}) {
    IndexList idx = ds.indices_of(y);
    // Partial Fisher-Yates: the first m entries form a uniform m-subset.
    for (std::size_t i = 0; i < m; ++i) {
      std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
      labels[idx[i]] = static_cast<Label>(1 - y);
    }
  }
  return ds.with_labels(std::move(labels));
}

}  // namespace mesa
