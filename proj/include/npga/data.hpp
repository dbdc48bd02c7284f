#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "npga/common.hpp"

namespace npga {

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

enum class LabelKind { discrete, continuous, periodic };

inline const char* label_kind_name(LabelKind k) {
  switch (k) {
    case LabelKind::discrete: return "discrete";
    case LabelKind::continuous: return "continuous";
    case LabelKind::periodic: return "periodic";
  }
  return "?";
}

inline LabelKind parse_label_kind(const std::string& s) {
  if (s == "discrete") return LabelKind::discrete;
  if (s == "continuous") return LabelKind::continuous;
  if (s == "periodic") return LabelKind::periodic;
  throw InvalidSpecError("unknown label kind '" + s + "'");
}

struct LabelSet {
  std::string name;
  LabelKind kind = LabelKind::discrete;
  Matrix values;       // N x M; one-hot rows when discrete
  double period = 0.0; // periodic only

  Index width() const { return values.cols(); }
};

struct Dataset {
  Matrix features;  // N x K
  std::vector<LabelSet> label_sets;
  std::string split;  // train / validation / test

  Index n() const { return features.rows(); }
  Index dim() const { return features.cols(); }

  bool has_label_set(const std::string& name) const {
    for (const auto& l : label_sets)
      if (l.name == name) return true;
    return false;
  }

  const LabelSet& label_set(const std::string& name) const {
    for (const auto& l : label_sets)
      if (l.name == name) return l;
    throw InvalidInputError("dataset has no label set named '" + name + "'");
  }

  LabelSet& label_set(const std::string& name) {
    for (auto& l : label_sets)
      if (l.name == name) return l;
    throw InvalidInputError("dataset has no label set named '" + name + "'");
  }

  void validate() const {
    require_finite(features, "dataset features");
    for (const auto& l : label_sets) {
      if (l.values.rows() != n()) {
        throw ShapeError("label set '" + l.name + "' row count differs from features");
      }
      require_finite(l.values, ("label set " + l.name).c_str());
      if (l.kind == LabelKind::discrete) {
        for (Index i = 0; i < l.values.rows(); ++i) {
          double sum = 0.0;
          for (Index j = 0; j < l.values.cols(); ++j) {
            const double v = l.values(i, j);
            if (v != 0.0 && v != 1.0) {
              throw InvalidLabelError("label set '" + l.name + "' row " +
                                      std::to_string(i) + " is not one-hot");
            }
            sum += v;
          }
          if (sum != 1.0) {
            throw InvalidLabelError("label set '" + l.name + "' row " +
                                    std::to_string(i) + " is not one-hot");
          }
        }
      } else if (l.kind == LabelKind::periodic) {
        if (!(l.period > 0.0)) {
          throw InvalidSpecError("periodic label set '" + l.name + "' needs a period");
        }
        for (Index i = 0; i < l.values.rows(); ++i) {
          for (Index j = 0; j < l.values.cols(); ++j) {
            const double v = l.values(i, j);
            if (v < 0.0 || v >= l.period) {
              throw InvalidLabelError("periodic label set '" + l.name + "' row " +
                                      std::to_string(i) + " outside [0, period)");
            }
          }
        }
      }
    }
  }

  /// Row subset, labels carried along.
  Dataset rows(const std::vector<Index>& idx) const {
    Dataset out;
    out.split = split;
    out.features.resize(static_cast<Index>(idx.size()), dim());
    for (size_t i = 0; i < idx.size(); ++i) out.features.row(static_cast<Index>(i)) = features.row(idx[i]);
    for (const auto& l : label_sets) {
      LabelSet sub{l.name, l.kind, Matrix(static_cast<Index>(idx.size()), l.width()), l.period};
      for (size_t i = 0; i < idx.size(); ++i) sub.values.row(static_cast<Index>(i)) = l.values.row(idx[i]);
      out.label_sets.push_back(std::move(sub));
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Encoding helpers
// ---------------------------------------------------------------------------

inline Matrix one_hot(const std::vector<Index>& class_indices, Index num_classes) {
  Matrix m = Matrix::Zero(static_cast<Index>(class_indices.size()), num_classes);
  for (size_t i = 0; i < class_indices.size(); ++i) {
    const Index c = class_indices[i];
    if (c < 0 || c >= num_classes) {
      throw InvalidLabelError("class index " + std::to_string(c) +
                              " out of range [0," + std::to_string(num_classes) + ")");
    }
    m(static_cast<Index>(i), c) = 1.0;
  }
  return m;
}

inline std::vector<Index> argmax_rows(const ConstMatrixRef& m) {
  std::vector<Index> out(static_cast<size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    Index best = 0;
    m.row(i).maxCoeff(&best);
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Delimited text loading (oil-flow layout: features and labels side by side)
// ---------------------------------------------------------------------------

namespace detail {

inline Matrix read_numeric_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      try {
        size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        row.push_back(v);
      } catch (const std::exception&) {
        throw ParseError("non-numeric token '" + tok + "' in " + path, lineno);
      }
    }
    if (row.empty()) continue;  // blank line
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw ParseError("ragged row in " + path + ": expected " +
                           std::to_string(width) + " columns, got " +
                           std::to_string(row.size()),
                       lineno);
    }
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < width; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

}  // namespace detail

/// Loads a whitespace-delimited feature file plus a label file holding either
/// one-hot columns or a single integer class column. `num_classes` = 0 infers
/// the class count from the data.
inline Dataset load_delimited(const std::string& features_path,
                              const std::string& labels_path,
                              Index num_classes = 0) {
  Dataset d;
  d.features = detail::read_numeric_table(features_path);
  Matrix labels = detail::read_numeric_table(labels_path);
  if (labels.rows() != d.features.rows()) {
    throw ParseError("label rows (" + std::to_string(labels.rows()) +
                         ") do not match feature rows (" +
                         std::to_string(d.features.rows()) + ")",
                     labels.rows());
  }
  LabelSet cls;
  cls.name = "class";
  cls.kind = LabelKind::discrete;
  if (labels.cols() == 1) {
    std::vector<Index> idx(static_cast<size_t>(labels.rows()));
    for (Index i = 0; i < labels.rows(); ++i) {
      const double v = labels(i, 0);
      if (v != std::floor(v) || v < 0) {
        throw ParseError("class index column must hold nonnegative integers " +
                             std::string("in ") + labels_path,
                         i + 1);
      }
      idx[static_cast<size_t>(i)] = static_cast<Index>(v);
    }
    const Index classes =
        num_classes > 0 ? num_classes
                        : (idx.empty() ? 1 : *std::max_element(idx.begin(), idx.end()) + 1);
    cls.values = one_hot(idx, classes);
  } else {
    cls.values = labels;
  }
  d.label_sets.push_back(std::move(cls));
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Self-describing delimited dataset files
// ---------------------------------------------------------------------------
//
// Format:
//   dataset <split>
//   features <K>
//   labels <name> <kind> <M> [period]      (one line per label set)
//   data
//   <K + sum(M) numbers per row>

inline void save_dataset_text(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write '" + path + "'");
  out << "dataset " << (d.split.empty() ? "train" : d.split) << "\n";
  out << "features " << d.dim() << "\n";
  for (const auto& l : d.label_sets) {
    out << "labels " << l.name << " " << label_kind_name(l.kind) << " " << l.width();
    if (l.kind == LabelKind::periodic) out << " " << l.period;
    out << "\n";
  }
  out << "data\n";
  out.precision(17);
  for (Index i = 0; i < d.n(); ++i) {
    for (Index j = 0; j < d.dim(); ++j) {
      if (j) out << ' ';
      out << d.features(i, j);
    }
    for (const auto& l : d.label_sets)
      for (Index j = 0; j < l.width(); ++j) out << ' ' << l.values(i, j);
    out << "\n";
  }
}

inline Dataset load_dataset_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open '" + path + "'");
  Dataset d;
  std::string line;
  long lineno = 0;
  Index feature_dim = -1;
  bool in_data = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    if (!in_data) {
      std::string word;
      ss >> word;
      if (word == "dataset") {
        ss >> d.split;
      } else if (word == "features") {
        if (!(ss >> feature_dim) || feature_dim < 1)
          throw ParseError("bad features line in " + path, lineno);
      } else if (word == "labels") {
        LabelSet l;
        std::string kind;
        Index width;
        if (!(ss >> l.name >> kind >> width))
          throw ParseError("bad labels line in " + path, lineno);
        l.kind = parse_label_kind(kind);
        if (l.kind == LabelKind::periodic && !(ss >> l.period))
          throw ParseError("periodic label set needs a period in " + path, lineno);
        l.values.resize(0, width);
        d.label_sets.push_back(std::move(l));
      } else if (word == "data") {
        if (feature_dim < 0) throw ParseError("missing features line in " + path, lineno);
        in_data = true;
      } else {
        throw ParseError("unknown header word '" + word + "' in " + path, lineno);
      }
    } else {
      std::istringstream ds(line);
      std::vector<double> row;
      double v;
      while (ds >> v) row.push_back(v);
      if (row.empty()) continue;
      Index expected = feature_dim;
      for (const auto& l : d.label_sets) expected += l.values.cols();
      if (static_cast<Index>(row.size()) != expected) {
        throw ParseError("row has " + std::to_string(row.size()) +
                             " values, expected " + std::to_string(expected) +
                             " in " + path,
                         lineno);
      }
      rows.push_back(std::move(row));
    }
  }
  const Index n = static_cast<Index>(rows.size());
  d.features.resize(n, feature_dim);
  for (auto& l : d.label_sets) l.values = Matrix(n, l.values.cols());
  for (Index i = 0; i < n; ++i) {
    Index off = 0;
    for (Index j = 0; j < feature_dim; ++j) d.features(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(off++)];
    for (auto& l : d.label_sets)
      for (Index j = 0; j < l.values.cols(); ++j)
        l.values(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(off++)];
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Small-NORB binary matrix files
// ---------------------------------------------------------------------------
//
// Header: int32 magic, int32 ndim, then max(3, ndim) int32 dimension sizes,
// all little-endian, followed by the row-major payload. Magic numbers:
// 0x1E3D4C51 float32, 0x1E3D4C53 float64, 0x1E3D4C54 int32, 0x1E3D4C55 uint8,
// 0x1E3D4C56 int16.

namespace norb {

constexpr std::uint32_t kMagicFloat = 0x1E3D4C51;
constexpr std::uint32_t kMagicDouble = 0x1E3D4C53;
constexpr std::uint32_t kMagicInt32 = 0x1E3D4C54;
constexpr std::uint32_t kMagicByte = 0x1E3D4C55;
constexpr std::uint32_t kMagicInt16 = 0x1E3D4C56;

struct RawMatrix {
  std::uint32_t magic = 0;
  std::vector<Index> dims;
  std::vector<std::uint8_t> bytes;  // uint8 payload
  std::vector<std::int32_t> ints;   // int32 payload

  Index count() const {
    Index c = 1;
    for (Index d : dims) c *= d;
    return c;
  }
};

namespace io {

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError("truncated header in '" + path + "'");
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace io

inline RawMatrix read_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open '" + path + "'");
  RawMatrix m;
  m.magic = io::read_u32(in, path);
  if (m.magic != kMagicByte && m.magic != kMagicInt32) {
    throw FormatError("bad magic number in '" + path + "'");
  }
  const std::uint32_t ndim = io::read_u32(in, path);
  if (ndim < 1 || ndim > 8) throw FormatError("implausible ndim in '" + path + "'");
  const std::uint32_t stored = std::max<std::uint32_t>(ndim, 3);
  for (std::uint32_t i = 0; i < stored; ++i) {
    const std::uint32_t d = io::read_u32(in, path);
    if (i < ndim) m.dims.push_back(static_cast<Index>(d));
  }
  const Index count = m.count();
  if (m.magic == kMagicByte) {
    m.bytes.resize(static_cast<size_t>(count));
    if (!in.read(reinterpret_cast<char*>(m.bytes.data()), count)) {
      throw FormatError("truncated payload in '" + path + "'");
    }
  } else {
    m.ints.resize(static_cast<size_t>(count));
    for (Index i = 0; i < count; ++i) {
      m.ints[static_cast<size_t>(i)] = static_cast<std::int32_t>(io::read_u32(in, path));
    }
  }
  return m;
}

inline void write_byte_matrix(const std::string& path, const std::vector<Index>& dims,
                              const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot write '" + path + "'");
  io::write_u32(out, kMagicByte);
  io::write_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (size_t i = 0; i < std::max<size_t>(dims.size(), 3); ++i) {
    io::write_u32(out, i < dims.size() ? static_cast<std::uint32_t>(dims[i]) : 1u);
  }
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
}

inline void write_int_matrix(const std::string& path, const std::vector<Index>& dims,
                             const std::vector<std::int32_t>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot write '" + path + "'");
  io::write_u32(out, kMagicInt32);
  io::write_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (size_t i = 0; i < std::max<size_t>(dims.size(), 3); ++i) {
    io::write_u32(out, i < dims.size() ? static_cast<std::uint32_t>(dims[i]) : 1u);
  }
  for (std::int32_t v : data) io::write_u32(out, static_cast<std::uint32_t>(v));
}

}  // namespace norb

/// Loads a small-NORB style triple: stereo byte images, int32 categories, and
/// the 4-column info matrix (instance, elevation index, azimuth, lighting).
/// Features are the flattened stereo pair scaled to [0,1]. Label sets: class
/// (discrete), elevation in degrees (continuous), azimuth in degrees
/// (periodic, 360), lighting (discrete).
inline Dataset load_norb(const std::string& image_file, const std::string& category_file,
                         const std::string& info_file) {
  norb::RawMatrix img = norb::read_matrix(image_file);
  norb::RawMatrix cat = norb::read_matrix(category_file);
  norb::RawMatrix info = norb::read_matrix(info_file);
  if (img.magic != norb::kMagicByte) {
    throw FormatError("image file '" + image_file + "' is not a byte matrix");
  }
  if (cat.magic != norb::kMagicInt32 || info.magic != norb::kMagicInt32) {
    throw FormatError("category/info files must be int32 matrices");
  }
  if (img.dims.empty() || cat.dims.empty() || info.dims.size() < 2) {
    throw FormatError("unexpected dimension lists in norb files");
  }
  const Index n = img.dims[0];
  if (cat.dims[0] != n || info.dims[0] != n) {
    throw FormatError("norb files disagree on the number of examples");
  }
  if (info.dims[1] < 4) throw FormatError("info file needs 4 columns");
  const Index per_example = img.count() / n;

  Dataset d;
  d.features.resize(n, per_example);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < per_example; ++j) {
      d.features(i, j) =
          static_cast<double>(img.bytes[static_cast<size_t>(i * per_example + j)]) / 255.0;
    }
  }

  const Index info_cols = info.dims[1];
  std::vector<Index> class_idx(static_cast<size_t>(n)), light_idx(static_cast<size_t>(n));
  Matrix elevation(n, 1), azimuth(n, 1);
  Index max_class = 0, max_light = 0;
  for (Index i = 0; i < n; ++i) {
    class_idx[static_cast<size_t>(i)] = cat.ints[static_cast<size_t>(i)];
    max_class = std::max(max_class, class_idx[static_cast<size_t>(i)]);
    const std::int32_t elev = info.ints[static_cast<size_t>(i * info_cols + 1)];
    const std::int32_t azim = info.ints[static_cast<size_t>(i * info_cols + 2)];
    const std::int32_t light = info.ints[static_cast<size_t>(i * info_cols + 3)];
    elevation(i, 0) = 30.0 + 5.0 * elev;  // elevation indices 0..8 -> degrees
    azimuth(i, 0) = 10.0 * azim;          // stored in units of 10 degrees
    light_idx[static_cast<size_t>(i)] = light;
    max_light = std::max(max_light, static_cast<Index>(light));
  }
  d.label_sets.push_back({"class", LabelKind::discrete, one_hot(class_idx, max_class + 1), 0.0});
  d.label_sets.push_back({"elevation", LabelKind::continuous, elevation, 0.0});
  d.label_sets.push_back({"azimuth", LabelKind::periodic, azimuth, 360.0});
  d.label_sets.push_back({"lighting", LabelKind::discrete, one_hot(light_idx, max_light + 1), 0.0});
  d.validate();
  return d;
}

/// Writes a dataset back into the three-file norb layout. Inverse of
/// load_norb for datasets that came from it (or were built on its grid).
inline void write_norb(const Dataset& d, const std::string& image_file,
                       const std::string& category_file, const std::string& info_file,
                       Index stereo, Index rows, Index cols) {
  const Index n = d.n();
  if (stereo * rows * cols != d.dim()) {
    throw ShapeError("write_norb: stereo*rows*cols must equal feature dim");
  }
  std::vector<std::uint8_t> bytes(static_cast<size_t>(n * d.dim()));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d.dim(); ++j) {
      bytes[static_cast<size_t>(i * d.dim() + j)] =
          static_cast<std::uint8_t>(std::lround(d.features(i, j) * 255.0));
    }
  }
  norb::write_byte_matrix(image_file, {n, stereo, rows, cols}, bytes);

  std::vector<Index> cls = argmax_rows(d.label_set("class").values);
  std::vector<std::int32_t> cat(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) cat[static_cast<size_t>(i)] = static_cast<std::int32_t>(cls[static_cast<size_t>(i)]);
  norb::write_int_matrix(category_file, {n}, cat);

  std::vector<Index> light = argmax_rows(d.label_set("lighting").values);
  const Matrix& elev = d.label_set("elevation").values;
  const Matrix& azim = d.label_set("azimuth").values;
  std::vector<std::int32_t> info(static_cast<size_t>(n * 4));
  for (Index i = 0; i < n; ++i) {
    info[static_cast<size_t>(i * 4 + 0)] = 0;  // instance id is not modeled
    info[static_cast<size_t>(i * 4 + 1)] = static_cast<std::int32_t>(std::lround((elev(i, 0) - 30.0) / 5.0));
    info[static_cast<size_t>(i * 4 + 2)] = static_cast<std::int32_t>(std::lround(azim(i, 0) / 10.0));
    info[static_cast<size_t>(i * 4 + 3)] = static_cast<std::int32_t>(light[static_cast<size_t>(i)]);
  }
  norb::write_int_matrix(info_file, {n, 4}, info);
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

/// Per-column affine transform recorded from a training set. Zero-variance
/// columns map to zero (their inverse restores the stored mean).
struct Standardizer {
  Vector mean;
  Vector std;  // 0 marks a degenerate column

  Matrix apply(const ConstMatrixRef& x) const {
    Matrix out(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
      if (std[j] == 0.0) {
        out.col(j).setZero();
      } else {
        out.col(j) = (x.col(j).array() - mean[j]) / std[j];
      }
    }
    return out;
  }

  Matrix invert(const ConstMatrixRef& x) const {
    Matrix out(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
      if (std[j] == 0.0) {
        out.col(j).setConstant(mean[j]);
      } else {
        out.col(j) = x.col(j).array() * std[j] + mean[j];
      }
    }
    return out;
  }

  static Standardizer fit(const ConstMatrixRef& x) {
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    s.std.resize(x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
      const double var =
          (x.col(j).array() - s.mean[j]).square().sum() / static_cast<double>(x.rows());
      s.std[j] = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    return s;
  }
};

/// Standardizes `train` feature columns in place and transforms the others
/// with the training statistics.
inline Standardizer standardize(Dataset& train, const std::vector<Dataset*>& others = {}) {
  if (train.n() == 0) throw InvalidInputError("standardize: empty training set");
  Standardizer s = Standardizer::fit(train.features);
  train.features = s.apply(train.features);
  for (Dataset* d : others) d->features = s.apply(d->features);
  return s;
}

/// Per-row mean/std normalization (approximates per-image lighting and
/// contrast normalization). Degenerate rows map to zero.
inline void normalize_rows(Matrix& features) {
  for (Index i = 0; i < features.rows(); ++i) {
    const double mean = features.row(i).mean();
    const double var =
        (features.row(i).array() - mean).square().sum() / static_cast<double>(features.cols());
    if (var > 0.0) {
      features.row(i) = (features.row(i).array() - mean) / std::sqrt(var);
    } else {
      features.row(i).setZero();
    }
  }
}

/// Standardizes every continuous label set using training statistics (GP
/// targets get a zero-mean, unit-variance prior scale). Discrete and periodic
/// sets pass through untouched.
inline void standardize_continuous_labels(Dataset& train,
                                          const std::vector<Dataset*>& others = {}) {
  for (auto& l : train.label_sets) {
    if (l.kind != LabelKind::continuous) continue;
    Standardizer s = Standardizer::fit(l.values);
    l.values = s.apply(l.values);
    for (Dataset* d : others) {
      LabelSet& other = d->label_set(l.name);
      other.values = s.apply(other.values);
    }
  }
}

// ---------------------------------------------------------------------------
// Subsampling
// ---------------------------------------------------------------------------

/// Seeded subsample of n rows. Stratified mode balances by the first discrete
/// label set, preserving class proportions to within one example.
inline Dataset subsample(const Dataset& d, Index n, std::uint64_t seed, bool stratified) {
  if (n > d.n()) {
    throw InvalidInputError("subsample: requested " + std::to_string(n) +
                            " of " + std::to_string(d.n()) + " rows");
  }
  Rng rng(seed);
  std::vector<Index> chosen;
  const LabelSet* strat = nullptr;
  if (stratified) {
    for (const auto& l : d.label_sets) {
      if (l.kind == LabelKind::discrete) {
        strat = &l;
        break;
      }
    }
  }
  if (strat == nullptr) {
    std::vector<Index> idx(static_cast<size_t>(d.n()));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    chosen.assign(idx.begin(), idx.begin() + n);
  } else {
    const Index classes = strat->width();
    std::vector<std::vector<Index>> by_class(static_cast<size_t>(classes));
    std::vector<Index> row_class = argmax_rows(strat->values);
    for (Index i = 0; i < d.n(); ++i) {
      by_class[static_cast<size_t>(row_class[static_cast<size_t>(i)])].push_back(i);
    }

    // Largest-remainder apportionment of n over the class counts.
    std::vector<Index> take(static_cast<size_t>(classes), 0);
    std::vector<std::pair<double, Index>> remainders;
    Index assigned = 0;
    for (Index c = 0; c < classes; ++c) {
      const double exact = static_cast<double>(n) *
                           static_cast<double>(by_class[static_cast<size_t>(c)].size()) /
                           static_cast<double>(d.n());
      take[static_cast<size_t>(c)] = static_cast<Index>(std::floor(exact));
      assigned += take[static_cast<size_t>(c)];
      remainders.push_back({exact - std::floor(exact), c});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (Index c = 0; assigned < n; ++c, ++assigned) {
      take[static_cast<size_t>(remainders[static_cast<size_t>(c)].second)] += 1;
    }
    for (Index c = 0; c < classes; ++c) {
      auto& pool = by_class[static_cast<size_t>(c)];
      if (take[static_cast<size_t>(c)] > static_cast<Index>(pool.size())) {
        throw InvalidInputError("subsample: class " + std::to_string(c) +
                                " has too few examples for a stratified draw");
      }
      std::shuffle(pool.begin(), pool.end(), rng);
      chosen.insert(chosen.end(), pool.begin(), pool.begin() + take[static_cast<size_t>(c)]);
    }
    std::shuffle(chosen.begin(), chosen.end(), rng);
  }
  return d.rows(chosen);
}

// ---------------------------------------------------------------------------
// Synthetic multi-factor generator
// ---------------------------------------------------------------------------

/// Desk-scale stand-in for a multi-factor image set: class templates warped
/// by elevation, a periodic azimuth, and discrete lighting gains.
struct SynthConfig {
  Index classes = 3;
  Index input_dim = 20;
  Index train_n = 600;
  Index validation_n = 200;
  Index test_n = 600;
  // Defaults place the class templates close together under strong nuisance
  // factors, so class structure is present but far from saturating.
  double template_scale = 0.3;
  double elevation_amplitude = 2.0;
  double azimuth_amplitude = 2.5;
  std::vector<double> lighting_gains = {0.6, 1.0, 1.4};
  double noise_std = 0.6;
  std::uint64_t seed = 1;

  void validate() const {
    if (classes < 2) throw InvalidSpecError("synth: classes must be >= 2");
    if (input_dim < 1) throw InvalidSpecError("synth: input_dim must be >= 1");
    if (train_n < 1 || validation_n < 0 || test_n < 0) {
      throw InvalidSpecError("synth: sample counts must be positive");
    }
    if (lighting_gains.empty()) throw InvalidSpecError("synth: need lighting gains");
    if (!(noise_std >= 0.0)) throw InvalidSpecError("synth: noise_std must be >= 0");
  }
};

struct SynthData {
  Dataset train, validation, test;
  Matrix class_templates;  // classes x K, for nearest-template oracles
};

inline SynthData synth_multifactor(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto normal_vec = [&](Index k) {
    Vector v(k);
    for (Index i = 0; i < k; ++i) v[i] = n01(rng);
    return v;
  };

  const Index k = cfg.input_dim;
  Matrix templates(cfg.classes, k);
  for (Index c = 0; c < cfg.classes; ++c) {
    templates.row(c) = (cfg.template_scale * normal_vec(k)).transpose();
  }
  auto unit = [&](Vector v) { return Vector(v / v.norm()); };
  const Vector d_elev = cfg.elevation_amplitude * unit(normal_vec(k));
  const Vector d_az1 = cfg.azimuth_amplitude * unit(normal_vec(k));
  const Vector d_az2 = cfg.azimuth_amplitude * unit(normal_vec(k));

  std::uniform_int_distribution<Index> class_dist(0, cfg.classes - 1);
  std::uniform_int_distribution<Index> light_dist(
      0, static_cast<Index>(cfg.lighting_gains.size()) - 1);
  std::uniform_real_distribution<double> elev_dist(-1.0, 1.0);
  std::uniform_real_distribution<double> azim_dist(0.0, kTwoPi);

  auto make_split = [&](Index n, const char* split) {
    Dataset d;
    d.split = split;
    d.features.resize(n, k);
    std::vector<Index> cls(static_cast<size_t>(n)), light(static_cast<size_t>(n));
    Matrix elev(n, 1), azim(n, 1);
    for (Index i = 0; i < n; ++i) {
      const Index c = class_dist(rng);
      const double e = elev_dist(rng);
      const double a = azim_dist(rng);
      const Index li = light_dist(rng);
      const double gain = cfg.lighting_gains[static_cast<size_t>(li)];
      Vector x = templates.row(c).transpose() + e * d_elev +
                 std::sin(a) * d_az1 + std::cos(a) * d_az2;
      x *= gain;
      if (cfg.noise_std > 0.0) x += cfg.noise_std * normal_vec(k);
      d.features.row(i) = x.transpose();
      cls[static_cast<size_t>(i)] = c;
      light[static_cast<size_t>(i)] = li;
      elev(i, 0) = e;
      azim(i, 0) = std::min(a, std::nextafter(kTwoPi, 0.0));
    }
    d.label_sets.push_back({"class", LabelKind::discrete, one_hot(cls, cfg.classes), 0.0});
    d.label_sets.push_back({"elevation", LabelKind::continuous, elev, 0.0});
    d.label_sets.push_back({"azimuth", LabelKind::periodic, azim, kTwoPi});
    d.label_sets.push_back(
        {"lighting", LabelKind::discrete,
         one_hot(light, static_cast<Index>(cfg.lighting_gains.size())), 0.0});
    d.validate();
    return d;
  };

  SynthData out;
  out.train = make_split(cfg.train_n, "train");
  out.validation = make_split(cfg.validation_n, "validation");
  out.test = make_split(cfg.test_n, "test");
  out.class_templates = templates;
  return out;
}

}  // namespace npga
