#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "npga/data.hpp"
#include "npga/objective.hpp"

namespace npga {

// ---------------------------------------------------------------------------
// Run configuration (flat key = value text, section-prefixed keys)
// ---------------------------------------------------------------------------

struct DataConfig {
  enum class Source { synth, delimited, dataset, norb };
  Source source = Source::synth;

  // delimited (oil-flow layout)
  std::string features, labels;
  std::string val_features, val_labels;
  std::string test_features, test_labels;
  Index num_classes = 0;  // 0: infer

  // self-describing dataset text files
  std::string train_file, val_file, test_file;

  // norb binary triples
  std::string norb_dat, norb_cat, norb_info;
  std::string norb_test_dat, norb_test_cat, norb_test_info;
  bool norb_normalize = true;

  bool standardize = true;
  bool standardize_continuous_labels = true;
  Index subsample_n = 0;  // 0: off
  bool subsample_stratified = true;
  std::uint64_t subsample_seed = 1;

  SynthConfig synth;
};

struct ProbeConfig {
  double l2 = 1e-4;
  std::string target;  // empty: first discrete label set
  int max_iters = 1000;
};

struct GridConfig {
  std::vector<double> alphas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> betas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int repeats = 1;
  int workers = 0;  // 0: hardware concurrency
};

struct EvalConfig {
  std::string checkpoint;
  Index spec_index = 0;
  std::string split = "test";
};

struct RunConfig {
  ModelConfig model;
  DataConfig data;
  ProbeConfig probe;
  GridConfig grid;
  EvalConfig eval;
  std::string gradcheck_corrupt_term;  // test hook: scales one term's gradient
  std::uint64_t gradcheck_seed = 1;
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace cfg {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::vector<double> to_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::string item;
  std::istringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

// Mutable drafts for indexed spec sections.
struct GpDraft {
  Index partition_begin = 0, partition_end = 0, latent_dim = 1;
  std::string target = "class";
  KernelSpec kernel;
  double noise_variance = 1e-2;
  bool seen = false;
};

struct HeadDraft {
  Index partition_begin = 0, partition_end = 0;
  std::string target = "class";
  ParametricHeadSpec::Kind kind = ParametricHeadSpec::Kind::logistic;
  bool seen = false;
};

}  // namespace cfg

namespace detail {

// Splits "gp<idx>.<field>" style subkeys; returns false when prefix differs.
inline bool split_indexed(const std::string& key, const std::string& prefix,
                          size_t& idx, std::string& field) {
  if (key.rfind(prefix, 0) != 0) return false;
  const size_t dot = key.find('.', prefix.size());
  if (dot == std::string::npos) return false;
  const std::string num = key.substr(prefix.size(), dot - prefix.size());
  if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos) return false;
  idx = static_cast<size_t>(std::stoul(num));
  field = key.substr(dot + 1);
  return true;
}

}  // namespace detail

inline RunConfig parse_run_config_text(const std::string& text) {
  RunConfig rc;
  std::vector<cfg::GpDraft> gps;
  std::vector<cfg::HeadDraft> heads;

  auto gp_at = [&gps](size_t i) -> cfg::GpDraft& {
    if (gps.size() <= i) gps.resize(i + 1);
    gps[i].seen = true;
    return gps[i];
  };
  auto head_at = [&heads](size_t i) -> cfg::HeadDraft& {
    if (heads.size() <= i) heads.resize(i + 1);
    heads[i].seen = true;
    return heads[i];
  };

  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = cfg::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = cfg::trim(line.substr(0, eq));
    const std::string value = cfg::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");

    size_t idx = 0;
    std::string field;
    // --- model ---
    if (key == "model.alpha") rc.model.alpha = cfg::to_double(key, value);
    else if (key == "model.beta") rc.model.beta = cfg::to_double(key, value);
    else if (key == "model.hidden_units") rc.model.hidden_units = cfg::to_int(key, value);
    else if (key == "model.noisy_activations") rc.model.noisy_activations = cfg::to_bool(key, value);
    else if (key == "model.corruption_scheme") {
      if (value == "gaussian") rc.model.corruption.scheme = CorruptionSpec::Scheme::gaussian;
      else if (value == "mask") rc.model.corruption.scheme = CorruptionSpec::Scheme::mask;
      else throw ConfigError("key '" + key + "': unknown scheme '" + value + "'");
    } else if (key == "model.gaussian_std") rc.model.corruption.gaussian_std = cfg::to_double(key, value);
    else if (key == "model.mask_fraction") rc.model.corruption.mask_fraction = cfg::to_double(key, value);
    else if (key == "model.lr_enabled") rc.model.lr_enabled = cfg::to_bool(key, value);
    else if (key == "model.lr_target") rc.model.lr_target = value;
    else if (key == "model.guidance_path") {
      if (value == "clean") rc.model.guidance_path = GuidancePath::clean;
      else if (value == "shared") rc.model.guidance_path = GuidancePath::shared_noisy;
      else throw ConfigError("key '" + key + "': expected clean or shared, got '" + value + "'");
    }
    else if (detail::split_indexed(key, "model.gp", idx, field)) {
      cfg::GpDraft& g = gp_at(idx);
      if (field == "partition_begin") g.partition_begin = cfg::to_int(key, value);
      else if (field == "partition_end") g.partition_end = cfg::to_int(key, value);
      else if (field == "latent_dim") g.latent_dim = cfg::to_int(key, value);
      else if (field == "target") g.target = value;
      else if (field == "kernel") g.kernel.kind = parse_kernel_kind(value);
      else if (field == "signal_variance") g.kernel.signal_variance = cfg::to_double(key, value);
      else if (field == "lengthscale") g.kernel.lengthscale = cfg::to_double(key, value);
      else if (field == "period") g.kernel.period = cfg::to_double(key, value);
      else if (field == "input_weight") g.kernel.input_weight = cfg::to_double(key, value);
      else if (field == "bias_weight") g.kernel.bias_weight = cfg::to_double(key, value);
      else if (field == "noise_variance") g.noise_variance = cfg::to_double(key, value);
      else throw ConfigError("unknown key '" + key + "'");
    } else if (detail::split_indexed(key, "model.head", idx, field)) {
      cfg::HeadDraft& h = head_at(idx);
      if (field == "partition_begin") h.partition_begin = cfg::to_int(key, value);
      else if (field == "partition_end") h.partition_end = cfg::to_int(key, value);
      else if (field == "target") h.target = value;
      else if (field == "kind") {
        if (value == "logistic") h.kind = ParametricHeadSpec::Kind::logistic;
        else if (value == "gaussian") h.kind = ParametricHeadSpec::Kind::gaussian;
        else throw ConfigError("key '" + key + "': unknown head kind '" + value + "'");
      } else throw ConfigError("unknown key '" + key + "'");
    }
    // --- optimizer ---
    else if (key == "optimizer.minibatch_size") rc.model.minibatch_size = cfg::to_int(key, value);
    else if (key == "optimizer.cg_iters_per_batch") rc.model.cg_iters_per_batch = static_cast<int>(cfg::to_int(key, value));
    else if (key == "optimizer.epochs") rc.model.epochs = static_cast<int>(cfg::to_int(key, value));
    else if (key == "optimizer.seed") rc.model.seed = static_cast<std::uint64_t>(cfg::to_int(key, value));
    else if (key == "optimizer.initial_step") rc.model.cg.initial_step = cfg::to_double(key, value);
    else if (key == "optimizer.shrink") rc.model.cg.shrink = cfg::to_double(key, value);
    else if (key == "optimizer.sufficient_decrease") rc.model.cg.sufficient_decrease = cfg::to_double(key, value);
    else if (key == "optimizer.restart_period") rc.model.cg.restart_period = static_cast<int>(cfg::to_int(key, value));
    else if (key == "optimizer.gradient_tolerance") rc.model.cg.gradient_tolerance = cfg::to_double(key, value);
    else if (key == "optimizer.max_line_search_steps") rc.model.cg.max_line_search_steps = static_cast<int>(cfg::to_int(key, value));
    // --- data ---
    else if (key == "data.source") {
      if (value == "synth") rc.data.source = DataConfig::Source::synth;
      else if (value == "delimited") rc.data.source = DataConfig::Source::delimited;
      else if (value == "dataset") rc.data.source = DataConfig::Source::dataset;
      else if (value == "norb") rc.data.source = DataConfig::Source::norb;
      else throw ConfigError("key '" + key + "': unknown source '" + value + "'");
    } else if (key == "data.features") rc.data.features = value;
    else if (key == "data.labels") rc.data.labels = value;
    else if (key == "data.val_features") rc.data.val_features = value;
    else if (key == "data.val_labels") rc.data.val_labels = value;
    else if (key == "data.test_features") rc.data.test_features = value;
    else if (key == "data.test_labels") rc.data.test_labels = value;
    else if (key == "data.num_classes") rc.data.num_classes = cfg::to_int(key, value);
    else if (key == "data.train_file") rc.data.train_file = value;
    else if (key == "data.val_file") rc.data.val_file = value;
    else if (key == "data.test_file") rc.data.test_file = value;
    else if (key == "data.norb_dat") rc.data.norb_dat = value;
    else if (key == "data.norb_cat") rc.data.norb_cat = value;
    else if (key == "data.norb_info") rc.data.norb_info = value;
    else if (key == "data.norb_test_dat") rc.data.norb_test_dat = value;
    else if (key == "data.norb_test_cat") rc.data.norb_test_cat = value;
    else if (key == "data.norb_test_info") rc.data.norb_test_info = value;
    else if (key == "data.norb_normalize") rc.data.norb_normalize = cfg::to_bool(key, value);
    else if (key == "data.standardize") rc.data.standardize = cfg::to_bool(key, value);
    else if (key == "data.standardize_continuous_labels") rc.data.standardize_continuous_labels = cfg::to_bool(key, value);
    else if (key == "data.subsample_n") rc.data.subsample_n = cfg::to_int(key, value);
    else if (key == "data.subsample_stratified") rc.data.subsample_stratified = cfg::to_bool(key, value);
    else if (key == "data.subsample_seed") rc.data.subsample_seed = static_cast<std::uint64_t>(cfg::to_int(key, value));
    else if (key == "data.synth.classes") rc.data.synth.classes = cfg::to_int(key, value);
    else if (key == "data.synth.input_dim") rc.data.synth.input_dim = cfg::to_int(key, value);
    else if (key == "data.synth.train_n") rc.data.synth.train_n = cfg::to_int(key, value);
    else if (key == "data.synth.validation_n") rc.data.synth.validation_n = cfg::to_int(key, value);
    else if (key == "data.synth.test_n") rc.data.synth.test_n = cfg::to_int(key, value);
    else if (key == "data.synth.template_scale") rc.data.synth.template_scale = cfg::to_double(key, value);
    else if (key == "data.synth.elevation_amplitude") rc.data.synth.elevation_amplitude = cfg::to_double(key, value);
    else if (key == "data.synth.azimuth_amplitude") rc.data.synth.azimuth_amplitude = cfg::to_double(key, value);
    else if (key == "data.synth.lighting_gains") rc.data.synth.lighting_gains = cfg::to_double_list(key, value);
    else if (key == "data.synth.noise_std") rc.data.synth.noise_std = cfg::to_double(key, value);
    else if (key == "data.synth.seed") rc.data.synth.seed = static_cast<std::uint64_t>(cfg::to_int(key, value));
    // --- probe ---
    else if (key == "probe.l2") rc.probe.l2 = cfg::to_double(key, value);
    else if (key == "probe.target") rc.probe.target = value;
    else if (key == "probe.max_iters") rc.probe.max_iters = static_cast<int>(cfg::to_int(key, value));
    // --- grid ---
    else if (key == "grid.alphas") rc.grid.alphas = cfg::to_double_list(key, value);
    else if (key == "grid.betas") rc.grid.betas = cfg::to_double_list(key, value);
    else if (key == "grid.repeats") rc.grid.repeats = static_cast<int>(cfg::to_int(key, value));
    else if (key == "grid.workers") rc.grid.workers = static_cast<int>(cfg::to_int(key, value));
    // --- eval/export ---
    else if (key == "eval.checkpoint") rc.eval.checkpoint = value;
    else if (key == "eval.spec_index") rc.eval.spec_index = cfg::to_int(key, value);
    else if (key == "eval.split") rc.eval.split = value;
    // --- gradcheck ---
    else if (key == "gradcheck.corrupt_term") rc.gradcheck_corrupt_term = value;
    else if (key == "gradcheck.seed") rc.gradcheck_seed = static_cast<std::uint64_t>(cfg::to_int(key, value));
    else throw ConfigError("unknown key '" + key + "'");
  }

  for (size_t i = 0; i < gps.size(); ++i) {
    if (!gps[i].seen) {
      throw ConfigError("gp specs must be numbered contiguously; gp" +
                        std::to_string(i) + " is missing");
    }
    GpGuidanceSpec s;
    s.partition_begin = gps[i].partition_begin;
    s.partition_end = gps[i].partition_end;
    s.projection = Matrix::Zero(gps[i].latent_dim,
                                gps[i].partition_end - gps[i].partition_begin);
    s.kernel = gps[i].kernel;
    s.noise_variance = gps[i].noise_variance;
    s.target_label_set = gps[i].target;
    rc.model.gp_specs.push_back(std::move(s));
  }
  for (size_t i = 0; i < heads.size(); ++i) {
    if (!heads[i].seen) {
      throw ConfigError("head specs must be numbered contiguously; head" +
                        std::to_string(i) + " is missing");
    }
    rc.model.head_specs.push_back({heads[i].partition_begin, heads[i].partition_end,
                                   heads[i].target, heads[i].kind});
  }
  return rc;
}

inline RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Echo (defaults resolved, reparseable)
// ---------------------------------------------------------------------------

inline std::string render_run_config(const RunConfig& rc) {
  std::ostringstream o;
  o.precision(17);
  o << "model.alpha = " << rc.model.alpha << "\n";
  o << "model.beta = " << rc.model.beta << "\n";
  o << "model.hidden_units = " << rc.model.hidden_units << "\n";
  o << "model.noisy_activations = " << (rc.model.noisy_activations ? "true" : "false") << "\n";
  o << "model.corruption_scheme = "
    << (rc.model.corruption.scheme == CorruptionSpec::Scheme::gaussian ? "gaussian" : "mask")
    << "\n";
  o << "model.gaussian_std = " << rc.model.corruption.gaussian_std << "\n";
  o << "model.mask_fraction = " << rc.model.corruption.mask_fraction << "\n";
  o << "model.lr_enabled = " << (rc.model.lr_enabled ? "true" : "false") << "\n";
  o << "model.lr_target = " << rc.model.lr_target << "\n";
  o << "model.guidance_path = "
    << (rc.model.guidance_path == GuidancePath::clean ? "clean" : "shared") << "\n";
  for (size_t i = 0; i < rc.model.gp_specs.size(); ++i) {
    const auto& s = rc.model.gp_specs[i];
    const std::string p = "model.gp" + std::to_string(i) + ".";
    o << p << "partition_begin = " << s.partition_begin << "\n";
    o << p << "partition_end = " << s.partition_end << "\n";
    o << p << "latent_dim = " << s.latent_dim() << "\n";
    o << p << "target = " << s.target_label_set << "\n";
    o << p << "kernel = " << kernel_kind_name(s.kernel.kind) << "\n";
    o << p << "signal_variance = " << s.kernel.signal_variance << "\n";
    o << p << "lengthscale = " << s.kernel.lengthscale << "\n";
    o << p << "period = " << s.kernel.period << "\n";
    o << p << "input_weight = " << s.kernel.input_weight << "\n";
    o << p << "bias_weight = " << s.kernel.bias_weight << "\n";
    o << p << "noise_variance = " << s.noise_variance << "\n";
  }
  for (size_t i = 0; i < rc.model.head_specs.size(); ++i) {
    const auto& h = rc.model.head_specs[i];
    const std::string p = "model.head" + std::to_string(i) + ".";
    o << p << "partition_begin = " << h.partition_begin << "\n";
    o << p << "partition_end = " << h.partition_end << "\n";
    o << p << "target = " << h.target_label_set << "\n";
    o << p << "kind = "
      << (h.kind == ParametricHeadSpec::Kind::logistic ? "logistic" : "gaussian") << "\n";
  }
  o << "optimizer.minibatch_size = " << rc.model.minibatch_size << "\n";
  o << "optimizer.cg_iters_per_batch = " << rc.model.cg_iters_per_batch << "\n";
  o << "optimizer.epochs = " << rc.model.epochs << "\n";
  o << "optimizer.seed = " << rc.model.seed << "\n";
  o << "optimizer.initial_step = " << rc.model.cg.initial_step << "\n";
  o << "optimizer.shrink = " << rc.model.cg.shrink << "\n";
  o << "optimizer.sufficient_decrease = " << rc.model.cg.sufficient_decrease << "\n";
  o << "optimizer.restart_period = " << rc.model.cg.restart_period << "\n";
  o << "optimizer.gradient_tolerance = " << rc.model.cg.gradient_tolerance << "\n";
  o << "optimizer.max_line_search_steps = " << rc.model.cg.max_line_search_steps << "\n";
  switch (rc.data.source) {
    case DataConfig::Source::synth: o << "data.source = synth\n"; break;
    case DataConfig::Source::delimited: o << "data.source = delimited\n"; break;
    case DataConfig::Source::dataset: o << "data.source = dataset\n"; break;
    case DataConfig::Source::norb: o << "data.source = norb\n"; break;
  }
  auto put_path = [&o](const char* key, const std::string& v) {
    if (!v.empty()) o << key << " = " << v << "\n";
  };
  put_path("data.features", rc.data.features);
  put_path("data.labels", rc.data.labels);
  put_path("data.val_features", rc.data.val_features);
  put_path("data.val_labels", rc.data.val_labels);
  put_path("data.test_features", rc.data.test_features);
  put_path("data.test_labels", rc.data.test_labels);
  if (rc.data.num_classes > 0) o << "data.num_classes = " << rc.data.num_classes << "\n";
  put_path("data.train_file", rc.data.train_file);
  put_path("data.val_file", rc.data.val_file);
  put_path("data.test_file", rc.data.test_file);
  put_path("data.norb_dat", rc.data.norb_dat);
  put_path("data.norb_cat", rc.data.norb_cat);
  put_path("data.norb_info", rc.data.norb_info);
  put_path("data.norb_test_dat", rc.data.norb_test_dat);
  put_path("data.norb_test_cat", rc.data.norb_test_cat);
  put_path("data.norb_test_info", rc.data.norb_test_info);
  o << "data.norb_normalize = " << (rc.data.norb_normalize ? "true" : "false") << "\n";
  o << "data.standardize = " << (rc.data.standardize ? "true" : "false") << "\n";
  o << "data.standardize_continuous_labels = "
    << (rc.data.standardize_continuous_labels ? "true" : "false") << "\n";
  o << "data.subsample_n = " << rc.data.subsample_n << "\n";
  o << "data.subsample_stratified = " << (rc.data.subsample_stratified ? "true" : "false") << "\n";
  o << "data.subsample_seed = " << rc.data.subsample_seed << "\n";
  o << "data.synth.classes = " << rc.data.synth.classes << "\n";
  o << "data.synth.input_dim = " << rc.data.synth.input_dim << "\n";
  o << "data.synth.train_n = " << rc.data.synth.train_n << "\n";
  o << "data.synth.validation_n = " << rc.data.synth.validation_n << "\n";
  o << "data.synth.test_n = " << rc.data.synth.test_n << "\n";
  o << "data.synth.template_scale = " << rc.data.synth.template_scale << "\n";
  o << "data.synth.elevation_amplitude = " << rc.data.synth.elevation_amplitude << "\n";
  o << "data.synth.azimuth_amplitude = " << rc.data.synth.azimuth_amplitude << "\n";
  o << "data.synth.lighting_gains = ";
  for (size_t i = 0; i < rc.data.synth.lighting_gains.size(); ++i) {
    if (i) o << ",";
    o << rc.data.synth.lighting_gains[i];
  }
  o << "\n";
  o << "data.synth.noise_std = " << rc.data.synth.noise_std << "\n";
  o << "data.synth.seed = " << rc.data.synth.seed << "\n";
  o << "probe.l2 = " << rc.probe.l2 << "\n";
  if (!rc.probe.target.empty()) o << "probe.target = " << rc.probe.target << "\n";
  o << "probe.max_iters = " << rc.probe.max_iters << "\n";
  o << "grid.alphas = ";
  for (size_t i = 0; i < rc.grid.alphas.size(); ++i) {
    if (i) o << ",";
    o << rc.grid.alphas[i];
  }
  o << "\n";
  o << "grid.betas = ";
  for (size_t i = 0; i < rc.grid.betas.size(); ++i) {
    if (i) o << ",";
    o << rc.grid.betas[i];
  }
  o << "\n";
  o << "grid.repeats = " << rc.grid.repeats << "\n";
  o << "grid.workers = " << rc.grid.workers << "\n";
  put_path("eval.checkpoint", rc.eval.checkpoint);
  o << "eval.spec_index = " << rc.eval.spec_index << "\n";
  o << "eval.split = " << rc.eval.split << "\n";
  if (!rc.gradcheck_corrupt_term.empty()) {
    o << "gradcheck.corrupt_term = " << rc.gradcheck_corrupt_term << "\n";
  }
  o << "gradcheck.seed = " << rc.gradcheck_seed << "\n";
  return o.str();
}

inline void write_run_config(const RunConfig& rc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write '" + path + "'");
  out << render_run_config(rc);
}

}  // namespace npga
