#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "home/error.hpp"
#include "home/matrix.hpp"
#include "home/rng.hpp"

namespace home {

struct DatasetParams {
  std::size_t classes = 4;
  std::size_t dim = 32;
  std::size_t samples = 1024;
  double prototype_scale = 1.0;
  double noise = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (classes < 2) throw InvalidArgument("data: need at least 2 classes");
    if (dim < classes) throw InvalidArgument("data: dim must be >= classes");
    if (samples < classes) throw InvalidArgument("data: fewer samples than classes");
    if (!(prototype_scale > 0.0)) throw InvalidArgument("data: prototype_scale must be > 0");
    if (!(noise >= 0.0)) throw InvalidArgument("data: noise must be >= 0");
  }
};

struct SyntheticDataset {
  Matrix samples;
  std::vector<int> labels;
  Matrix prototypes;  // classes x dim

  std::size_t size() const { return samples.rows(); }
};

// Seed streams. Prototypes are shared by every split of a dataset.
enum class DataStream : std::uint64_t { Prototypes = 1, Train = 2, Holdout = 3 };

inline Matrix draw_prototypes(const DatasetParams& p) {
  Rng rng = make_rng(p.seed, {static_cast<std::uint64_t>(DataStream::Prototypes)});
  for (;;) {
    Matrix protos(p.classes, p.dim);
    for (double& v : protos.flat()) v = p.prototype_scale * standard_normal(rng);
    bool distinct = true;
    for (std::size_t a = 0; a < p.classes && distinct; ++a)
      for (std::size_t b = a + 1; b < p.classes && distinct; ++b)
        if (std::equal(protos.row(a).begin(), protos.row(a).end(), protos.row(b).begin()))
          distinct = false;
    if (distinct) return protos;
  }
}

// Balanced labels (sample i has label i mod C); x = prototype + N(0, noise^2).
inline SyntheticDataset draw_split(const DatasetParams& p, std::size_t count,
                                   DataStream stream) {
  p.validate();
  SyntheticDataset ds{Matrix(count, p.dim), std::vector<int>(count), draw_prototypes(p)};
  Rng rng = make_rng(p.seed, {static_cast<std::uint64_t>(stream)});
  for (std::size_t i = 0; i < count; ++i) {
    const auto label = static_cast<int>(i % p.classes);
    ds.labels[i] = label;
    const auto proto = ds.prototypes.row(static_cast<std::size_t>(label));
    auto row = ds.samples.row(i);
    for (std::size_t k = 0; k < p.dim; ++k) row[k] = proto[k] + p.noise * standard_normal(rng);
  }
  return ds;
}

inline SyntheticDataset generate(const DatasetParams& p) {
  return draw_split(p, p.samples, DataStream::Train);
}

// Held-out samples from the same class prototypes.
inline SyntheticDataset generate_holdout(const DatasetParams& p, std::size_t count) {
  return draw_split(p, count, DataStream::Holdout);
}

struct ViewConfig {
  double noise = 0.5;
  double mask_prob = 0.2;
  double gain_lo = 0.8;
  double gain_hi = 1.2;
  int views = 2;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(mask_prob >= 0.0 && mask_prob < 1.0)) throw InvalidArgument("views: mask_prob in [0,1)");
    if (!(gain_lo <= gain_hi)) throw InvalidArgument("views: gain_lo > gain_hi");
    if (!(noise >= 0.0)) throw InvalidArgument("views: noise must be >= 0");
    if (views < 1) throw InvalidArgument("views: need at least one view");
  }
};

// One distorted copy per view: per-sample gain, then coordinate dropout,
// then additive Gaussian noise. View t of iteration i draws from the stream
// derive_seed(seed, {i, t}).
inline Matrix make_view(const Matrix& batch, const ViewConfig& cfg, std::uint64_t iteration,
                        int view) {
  Rng rng = make_rng(cfg.seed, {iteration, static_cast<std::uint64_t>(view)});
  Matrix out(batch.rows(), batch.cols());
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    const double gain = cfg.gain_lo + (cfg.gain_hi - cfg.gain_lo) * uniform01(rng);
    const auto in = batch.row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) {
      double v = gain * in[c];
      if (cfg.mask_prob > 0.0 && uniform01(rng) < cfg.mask_prob) v = 0.0;
      if (cfg.noise > 0.0) v += cfg.noise * standard_normal(rng);
      o[c] = v;
    }
  }
  return out;
}

inline std::vector<Matrix> make_views(const Matrix& batch, const ViewConfig& cfg,
                                      std::uint64_t iteration) {
  cfg.validate();
  std::vector<Matrix> out;
  for (int t = 0; t < cfg.views; ++t) out.push_back(make_view(batch, cfg, iteration, t));
  return out;
}

// CSV: header label,feature_1..feature_P, one sample per row.
inline void write_dataset_csv(const SyntheticDataset& ds, std::ostream& os) {
  os << "label";
  for (std::size_t k = 0; k < ds.samples.cols(); ++k) os << ",feature_" << (k + 1);
  os << '\n';
  char buf[40];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    os << ds.labels[i];
    for (double v : ds.samples.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw IoError("csv line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
  if (used != s.size() || !std::isfinite(v)) {
    throw IoError("csv line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

inline SyntheticDataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("dataset csv: empty input");
  detail::strip_cr(line);
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "label") {
    throw IoError("dataset csv: header must start with 'label'");
  }
  const std::size_t p = header.size() - 1;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != p + 1) {
      throw IoError("dataset csv line " + std::to_string(line_no) + ": expected " +
                    std::to_string(p + 1) + " fields");
    }
    const double label = detail::parse_double(cells[0], line_no);
    if (label < 0 || label != std::floor(label)) {
      throw IoError("dataset csv line " + std::to_string(line_no) + ": bad label");
    }
    labels.push_back(static_cast<int>(label));
    for (std::size_t k = 1; k <= p; ++k) values.push_back(detail::parse_double(cells[k], line_no));
  }
  const std::size_t n = labels.size();
  return {Matrix(n, p, std::move(values)), std::move(labels), Matrix()};
}

// Plain numeric matrix CSV (optional non-numeric header row), rows = samples.
inline Matrix read_matrix_csv(std::istream& is) {
  std::string line;
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  bool first = true;
  while (std::getline(is, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (first) {
      first = false;
      cols = cells.size();
      bool numeric = true;
      try {
        for (const auto& c : cells) detail::parse_double(c, line_no);
      } catch (const IoError&) {
        numeric = false;
      }
      if (!numeric) continue;
    }
    if (cells.size() != cols) {
      throw IoError("csv line " + std::to_string(line_no) + ": expected " +
                    std::to_string(cols) + " fields, got " + std::to_string(cells.size()));
    }
    for (const auto& c : cells) values.push_back(detail::parse_double(c, line_no));
    ++rows;
  }
  if (rows == 0) throw IoError("csv: no data rows");
  return Matrix(rows, cols, std::move(values));
}

}  // namespace home
