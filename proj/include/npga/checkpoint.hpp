#pragma once

#include <fstream>
#include <string>

#include "npga/objective.hpp"

namespace npga {

// Checkpoint: a layout header naming every block and its shape, then the flat
// parameter array, one value per line at round-trip precision.

inline void save_checkpoint(const std::string& path, const ParamLayout& layout,
                            const ConstVectorRef& params) {
  layout.check_vector(params);
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write '" + path + "'");
  out << "npga-checkpoint 1\n";
  out << "input_dim " << layout.input_dim << "\n";
  out << "hidden_units " << layout.hidden_units << "\n";
  out << "blocks " << layout.blocks.size() << "\n";
  for (const auto& b : layout.blocks) {
    out << "block " << b.name << " " << b.rows << " " << b.cols << "\n";
  }
  out << "params " << params.size() << "\n";
  out.precision(17);
  for (Index i = 0; i < params.size(); ++i) out << params[i] << "\n";
}

struct Checkpoint {
  ParamLayout layout;
  Vector params;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open '" + path + "'");
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "npga-checkpoint" || version != 1) {
    throw FormatError("'" + path + "' is not a version-1 checkpoint");
  }
  Checkpoint ck;
  size_t nblocks = 0;
  if (!(in >> word >> ck.layout.input_dim) || word != "input_dim" ||
      !(in >> word >> ck.layout.hidden_units) || word != "hidden_units" ||
      !(in >> word >> nblocks) || word != "blocks") {
    throw FormatError("malformed checkpoint header in '" + path + "'");
  }
  for (size_t i = 0; i < nblocks; ++i) {
    ParamBlock b;
    if (!(in >> word >> b.name >> b.rows >> b.cols) || word != "block") {
      throw FormatError("malformed block line in '" + path + "'");
    }
    b.offset = ck.layout.total;
    ck.layout.total += b.size();
    ck.layout.blocks.push_back(std::move(b));
  }
  Index count = 0;
  if (!(in >> word >> count) || word != "params" || count != ck.layout.total) {
    throw FormatError("parameter count disagrees with layout in '" + path + "'");
  }
  ck.params.resize(count);
  for (Index i = 0; i < count; ++i) {
    if (!(in >> ck.params[i])) {
      throw FormatError("truncated parameter array in '" + path + "'");
    }
  }
  return ck;
}

/// A loaded checkpoint must match the layout derived from the run config.
inline void check_layout_compatible(const ParamLayout& expected, const ParamLayout& loaded) {
  if (expected.blocks.size() != loaded.blocks.size() || expected.total != loaded.total) {
    throw LayoutError("checkpoint layout does not match the configuration");
  }
  for (size_t i = 0; i < expected.blocks.size(); ++i) {
    const auto& a = expected.blocks[i];
    const auto& b = loaded.blocks[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) {
      throw LayoutError("checkpoint block '" + b.name + "' does not match the configuration");
    }
  }
}

}  // namespace npga
