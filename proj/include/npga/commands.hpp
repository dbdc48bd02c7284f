#pragma once

#include <atomic>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "npga/checkpoint.hpp"
#include "npga/config.hpp"
#include "npga/data.hpp"
#include "npga/eval.hpp"
#include "npga/trainer.hpp"

namespace npga::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Data pipeline
// ---------------------------------------------------------------------------

struct PreparedData {
  Dataset train;
  std::optional<Dataset> validation;
  std::optional<Dataset> test;
};

namespace detail {

inline void materialize_feature_targets(const ModelConfig& model, PreparedData& d) {
  bool needed = false;
  for (const auto& s : model.gp_specs) needed = needed || s.target_label_set == "@features";
  if (!needed) return;
  auto add = [](Dataset& ds) {
    if (!ds.has_label_set("@features")) {
      ds.label_sets.push_back({"@features", LabelKind::continuous, ds.features, 0.0});
    }
  };
  add(d.train);
  if (d.validation) add(*d.validation);
  if (d.test) add(*d.test);
}

}  // namespace detail

inline PreparedData prepare_data(const RunConfig& rc) {
  const DataConfig& dc = rc.data;
  PreparedData out;
  switch (dc.source) {
    case DataConfig::Source::synth: {
      SynthData s = synth_multifactor(dc.synth);
      out.train = std::move(s.train);
      if (s.validation.n() > 0) out.validation = std::move(s.validation);
      if (s.test.n() > 0) out.test = std::move(s.test);
      break;
    }
    case DataConfig::Source::delimited: {
      if (dc.features.empty() || dc.labels.empty()) {
        throw ConfigError("data.features and data.labels are required for delimited input");
      }
      out.train = load_delimited(dc.features, dc.labels, dc.num_classes);
      out.train.split = "train";
      if (!dc.val_features.empty()) {
        out.validation = load_delimited(dc.val_features, dc.val_labels, dc.num_classes);
        out.validation->split = "validation";
      }
      if (!dc.test_features.empty()) {
        out.test = load_delimited(dc.test_features, dc.test_labels, dc.num_classes);
        out.test->split = "test";
      }
      break;
    }
    case DataConfig::Source::dataset: {
      if (dc.train_file.empty()) throw ConfigError("data.train_file is required");
      out.train = load_dataset_text(dc.train_file);
      if (!dc.val_file.empty()) out.validation = load_dataset_text(dc.val_file);
      if (!dc.test_file.empty()) out.test = load_dataset_text(dc.test_file);
      break;
    }
    case DataConfig::Source::norb: {
      if (dc.norb_dat.empty()) throw ConfigError("data.norb_dat/_cat/_info are required");
      out.train = load_norb(dc.norb_dat, dc.norb_cat, dc.norb_info);
      out.train.split = "train";
      if (!dc.norb_test_dat.empty()) {
        out.test = load_norb(dc.norb_test_dat, dc.norb_test_cat, dc.norb_test_info);
        out.test->split = "test";
      }
      if (dc.norb_normalize) {
        normalize_rows(out.train.features);
        if (out.test) normalize_rows(out.test->features);
      }
      break;
    }
  }

  if (dc.subsample_n > 0) {
    out.train = subsample(out.train, dc.subsample_n, dc.subsample_seed,
                          dc.subsample_stratified);
  }
  if (dc.standardize) {
    std::vector<Dataset*> others;
    if (out.validation) others.push_back(&*out.validation);
    if (out.test) others.push_back(&*out.test);
    standardize(out.train, others);
  }
  detail::materialize_feature_targets(rc.model, out);
  if (dc.standardize_continuous_labels) {
    std::vector<Dataset*> others;
    if (out.validation) others.push_back(&*out.validation);
    if (out.test) others.push_back(&*out.test);
    standardize_continuous_labels(out.train, others);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

using Metrics = std::map<std::string, double>;

namespace detail {

inline const std::string& probe_target_name(const RunConfig& rc, const Dataset& train) {
  if (!rc.probe.target.empty()) {
    train.label_set(rc.probe.target);  // existence check
    return rc.probe.target;
  }
  for (const auto& l : train.label_sets) {
    if (l.kind == LabelKind::discrete) return l.name;
  }
  throw InvalidInputError("no discrete label set available for probing");
}

inline CgOptions probe_budget(const RunConfig& rc) {
  CgOptions budget;
  budget.max_iters = rc.probe.max_iters;
  budget.gradient_tolerance = 1e-9;
  return budget;
}

}  // namespace detail

/// Probe-based evaluation of trained parameters: linear probes on the frozen
/// deterministic encodings, full-layer and per-partition.
inline Metrics compute_metrics(const RunConfig& rc, const PreparedData& data,
                               const ParamLayout& layout, const Vector& params) {
  const std::string& target = detail::probe_target_name(rc, data.train);
  ModelParams p = unpack(params, layout);

  Matrix train_hidden =
      encode_batch(data.train.features, p.autoenc, EncodeMode::deterministic);
  ProbeParams probe = fit_probe(train_hidden, data.train.label_set(target).values,
                                rc.probe.l2, detail::probe_budget(rc));

  Metrics m;
  m["train_accuracy"] = probe_accuracy(probe, train_hidden, data.train.label_set(target).values);
  if (data.validation) {
    Matrix h = encode_batch(data.validation->features, p.autoenc, EncodeMode::deterministic);
    m["val_accuracy"] = probe_accuracy(probe, h, data.validation->label_set(target).values);
  }
  if (data.test) {
    Matrix h = encode_batch(data.test->features, p.autoenc, EncodeMode::deterministic);
    m["test_accuracy"] = probe_accuracy(probe, h, data.test->label_set(target).values);
    m["test_error"] = 1.0 - m["test_accuracy"];
  }

  // Per-partition probes: how much target information each GP slab carries.
  for (size_t i = 0; i < rc.model.gp_specs.size(); ++i) {
    const auto& s = rc.model.gp_specs[i];
    Matrix slab = train_hidden.middleCols(s.partition_begin, s.partition_width());
    ProbeParams part_probe = fit_probe(slab, data.train.label_set(target).values,
                                       rc.probe.l2, detail::probe_budget(rc));
    const std::string key = "partition" + std::to_string(i);
    m[key + "_train_accuracy"] =
        probe_accuracy(part_probe, slab, data.train.label_set(target).values);
    if (data.test) {
      Matrix h = encode_batch(data.test->features, p.autoenc, EncodeMode::deterministic);
      Matrix test_slab = h.middleCols(s.partition_begin, s.partition_width());
      m[key + "_test_accuracy"] =
          probe_accuracy(part_probe, test_slab, data.test->label_set(target).values);
    }
  }
  return m;
}

inline void write_metrics(const Metrics& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write '" + path + "'");
  out.precision(17);
  for (const auto& [key, value] : m) out << key << " = " << value << "\n";
}

inline void write_trace(const std::vector<TraceRow>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write '" + path + "'");
  out << "# epoch minibatch cost\n";
  out.precision(17);
  for (const auto& row : trace) {
    out << row.epoch << " " << row.minibatch << " " << row.cost_after << "\n";
  }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_train(const RunConfig& rc, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_run_config(rc, out_dir + "/config_effective.txt");
  PreparedData data = prepare_data(rc);
  TrainResult r = train(data.train, rc.model);
  save_checkpoint(out_dir + "/checkpoint.txt", r.layout, r.params);
  write_trace(r.trace, out_dir + "/trace.txt");
  Metrics m = compute_metrics(rc, data, r.layout, r.params);
  write_metrics(m, out_dir + "/metrics.txt");
  std::cout << "train: wrote " << out_dir << "/metrics.txt";
  if (m.count("test_accuracy")) std::cout << " (test_accuracy " << m.at("test_accuracy") << ")";
  std::cout << "\n";
  return 0;
}

struct GridRow {
  double alpha = 0.0;
  double beta = 0.0;
  int repeat = 0;
  std::uint64_t seed = 0;
  double test_error = 0.0;
  bool ok = false;
  std::string error;
};

/// Runs the (alpha, beta, repeat) grid on one shared data preparation. Each
/// repeat uses its own derived seed, shared across cells so that beta is
/// exactly inert at alpha = 0. Rows are appended as cells finish; on
/// completion the row file is rewritten in deterministic key order.
inline int cmd_grid(const RunConfig& rc, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_run_config(rc, out_dir + "/config_effective.txt");
  PreparedData data = prepare_data(rc);
  if (!data.test) throw ConfigError("grid runs need a test split");

  struct Cell {
    size_t ai, bi;
    int rep;
  };
  std::vector<Cell> cells;
  for (size_t ai = 0; ai < rc.grid.alphas.size(); ++ai)
    for (size_t bi = 0; bi < rc.grid.betas.size(); ++bi)
      for (int rep = 0; rep < rc.grid.repeats; ++rep) cells.push_back({ai, bi, rep});

  std::vector<GridRow> rows(cells.size());
  std::atomic<size_t> next{0};
  std::mutex io_mutex;
  std::ofstream incremental(out_dir + "/grid_rows.txt");
  incremental << "# alpha beta repeat seed test_error status\n";
  incremental.precision(17);

  auto run_cell = [&](size_t ci) {
    const Cell& cell = cells[ci];
    GridRow row;
    row.alpha = rc.grid.alphas[cell.ai];
    row.beta = rc.grid.betas[cell.bi];
    row.repeat = cell.rep;
    row.seed = sub_seed(rc.model.seed, "grid/repeat/" + std::to_string(cell.rep));
    try {
      RunConfig cellrc = rc;
      cellrc.model.alpha = row.alpha;
      cellrc.model.beta = row.beta;
      cellrc.model.seed = row.seed;
      TrainResult r = train(data.train, cellrc.model);
      Metrics m = compute_metrics(cellrc, data, r.layout, r.params);
      row.test_error = m.at("test_error");
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      row.test_error = std::numeric_limits<double>::quiet_NaN();
    }
    rows[ci] = row;
    std::lock_guard<std::mutex> lock(io_mutex);
    incremental << row.alpha << " " << row.beta << " " << row.repeat << " "
                << row.seed << " " << row.test_error << " "
                << (row.ok ? "ok" : "failed") << "\n";
    incremental.flush();
  };

  int workers = rc.grid.workers > 0
                    ? rc.grid.workers
                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min<int>(workers, static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t ci = next.fetch_add(1); ci < cells.size(); ci = next.fetch_add(1)) {
        run_cell(ci);
      }
    });
  }
  for (auto& t : pool) t.join();
  incremental.close();

  // Deterministic final artifacts: sorted rows and the per-cell summary.
  {
    std::ofstream out(out_dir + "/grid_rows.txt");
    out << "# alpha beta repeat seed test_error status\n";
    out.precision(17);
    for (const auto& row : rows) {
      out << row.alpha << " " << row.beta << " " << row.repeat << " " << row.seed
          << " " << row.test_error << " " << (row.ok ? "ok" : "failed") << "\n";
    }
  }
  {
    std::ofstream out(out_dir + "/grid_summary.txt");
    out << "# alpha beta mean_test_error ok_repeats\n";
    out.precision(17);
    size_t ci = 0;
    for (size_t ai = 0; ai < rc.grid.alphas.size(); ++ai) {
      for (size_t bi = 0; bi < rc.grid.betas.size(); ++bi) {
        double sum = 0.0;
        int ok = 0;
        for (int rep = 0; rep < rc.grid.repeats; ++rep, ++ci) {
          if (rows[ci].ok) {
            sum += rows[ci].test_error;
            ++ok;
          }
        }
        out << rc.grid.alphas[ai] << " " << rc.grid.betas[bi] << " "
            << (ok > 0 ? sum / ok : std::numeric_limits<double>::quiet_NaN()) << " "
            << ok << "\n";
      }
    }
  }
  std::cout << "grid: " << cells.size() << " cells -> " << out_dir << "/grid_summary.txt\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Gradient check command
// ---------------------------------------------------------------------------

struct GradCheckLine {
  std::string term;
  double max_rel_err = 0.0;
  bool pass = false;
};

/// Central finite differences against every analytic cost gradient on small
/// randomized instances. `corrupt_term` (test hook) doubles the named term's
/// analytic gradient so the check's sensitivity itself is testable.
inline std::vector<GradCheckLine> run_gradcheck(std::uint64_t seed,
                                                const std::string& corrupt_term) {
  std::vector<GradCheckLine> lines;
  Rng rng(seed);
  const double tol = 1e-4;
  const double step = 1e-6;

  auto fd_check = [&](const std::string& term, auto&& value_at, Vector point,
                      const Vector& analytic) {
    double worst = 0.0;
    for (Index i = 0; i < point.size(); ++i) {
      const double orig = point[i];
      point[i] = orig + step;
      const double fp = value_at(point);
      point[i] = orig - step;
      const double fm = value_at(point);
      point[i] = orig;
      const double fd = (fp - fm) / (2.0 * step);
      double a = analytic[i];
      if (term == corrupt_term) a *= 2.0;
      const double rel = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      worst = std::max(worst, rel);
    }
    lines.push_back({term, worst, worst < tol});
  };

  auto rand_mat = [&rng](Index r, Index c) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix m(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) m(i, j) = u(rng);
    return m;
  };

  // l_auto
  {
    const Index n = 5, k = 4, j = 6;
    Matrix clean = rand_mat(n, k);
    Matrix corrupted = clean + 0.1 * rand_mat(n, k);
    auto cost = [&](const Vector& v) {
      AutoencoderParams q;
      q.weight = Eigen::Map<const Matrix>(v.data(), j, k);
      q.enc_bias = v.segment(j * k, j);
      q.dec_bias = v.tail(k);
      return l_auto_and_grad(clean, corrupted, q, EncodeMode::deterministic).value;
    };
    AutoencoderParams p{rand_mat(j, k), rand_mat(j, 1).col(0), rand_mat(k, 1).col(0)};
    AutoCostResult r = l_auto_and_grad(clean, corrupted, p, EncodeMode::deterministic);
    Vector point(j * k + j + k), analytic(point.size());
    point << Eigen::Map<const Vector>(p.weight.data(), j * k), p.enc_bias, p.dec_bias;
    analytic << Eigen::Map<const Vector>(r.grad.weight.data(), j * k), r.grad.enc_bias,
        r.grad.dec_bias;
    fd_check("l_auto", cost, point, analytic);
  }

  // l_gp, one line per kernel kind
  for (KernelKind kind : {KernelKind::linear, KernelKind::rbf, KernelKind::arcsine,
                          KernelKind::periodic}) {
    const Index n = 5, j = 6, p_ = 4, h = 2;
    GpGuidanceSpec spec;
    spec.partition_begin = 1;
    spec.partition_end = 1 + p_;
    spec.projection = rand_mat(h, p_);
    spec.kernel.kind = kind;
    spec.noise_variance = 0.1;
    Matrix hidden = rand_mat(n, j).cwiseMax(0.0);
    Matrix targets = rand_mat(n, 2);
    GpCostResult r = l_gp_and_grad(hidden, spec, targets);
    // joint vector: hidden slab then projection
    Vector point(n * p_ + h * p_), analytic(point.size());
    Matrix slab = hidden.middleCols(1, p_);
    point << Eigen::Map<const Vector>(slab.data(), n * p_),
        Eigen::Map<const Vector>(spec.projection.data(), h * p_);
    analytic << Eigen::Map<const Vector>(r.grad_partition.data(), n * p_),
        Eigen::Map<const Vector>(r.grad_projection.data(), h * p_);
    auto cost = [&, spec](const Vector& v) {
      Matrix hcopy = hidden;
      hcopy.middleCols(1, p_) = Eigen::Map<const Matrix>(v.data(), n, p_);
      GpGuidanceSpec scopy = spec;
      scopy.projection = Eigen::Map<const Matrix>(v.data() + n * p_, h, p_);
      return l_gp_and_grad(hcopy, scopy, targets).value;
    };
    fd_check(std::string("l_gp_") + kernel_kind_name(kind), cost, point, analytic);
  }

  // l_lr
  {
    const Index n = 6, j = 5, m = 3;
    Matrix hidden = rand_mat(n, j);
    Matrix targets = Matrix::Zero(n, m);
    std::uniform_int_distribution<Index> cd(0, m - 1);
    for (Index i = 0; i < n; ++i) targets(i, cd(rng)) = 1.0;
    LrGuidanceSpec spec{rand_mat(m, j), rand_mat(m, 1).col(0)};
    LrCostResult r = l_lr_and_grad(hidden, spec, targets);
    Vector point(m * j + m), analytic(point.size());
    point << Eigen::Map<const Vector>(spec.weights.data(), m * j), spec.bias;
    analytic << Eigen::Map<const Vector>(r.grad_weights.data(), m * j), r.grad_bias;
    auto cost = [&](const Vector& v) {
      LrGuidanceSpec q{Eigen::Map<const Matrix>(v.data(), m, j), v.tail(m)};
      return l_lr_and_grad(hidden, q, targets).value;
    };
    fd_check("l_lr", cost, point, analytic);
  }

  // blended
  {
    ModelConfig c;
    c.alpha = 0.4;
    c.beta = 0.6;
    c.hidden_units = 6;
    c.lr_enabled = true;
    c.lr_target = "class";
    c.noisy_activations = false;
    GpGuidanceSpec s;
    s.partition_begin = 0;
    s.partition_end = 3;
    s.projection = Matrix::Zero(2, 3);
    s.kernel.kind = KernelKind::rbf;
    s.target_label_set = "class";
    c.gp_specs.push_back(s);

    const Index n = 5, k = 4, m = 3;
    ParamLayout layout = ParamLayout::from_config(c, k, {{"class", m}});
    Vector params = init_params(c, layout);
    layout.matrix_view(params, "lr_weights") = rand_mat(m, c.hidden_units);
    Matrix clean = rand_mat(n, k);
    Matrix corrupted = clean + 0.1 * rand_mat(n, k);
    std::vector<LabelSet> labels;
    Matrix targets = Matrix::Zero(n, m);
    std::uniform_int_distribution<Index> cd(0, m - 1);
    for (Index i = 0; i < n; ++i) targets(i, cd(rng)) = 1.0;
    labels.push_back({"class", LabelKind::discrete, targets, 0.0});
    BlendedResult r =
        blended_cost_and_grad_fixed(clean, corrupted, nullptr, labels, c, layout, params);
    auto cost = [&](const Vector& v) {
      return blended_cost_and_grad_fixed(clean, corrupted, nullptr, labels, c, layout, v)
          .value;
    };
    fd_check("blended", cost, params, r.grad);
  }

  return lines;
}

inline int cmd_gradcheck(const RunConfig& rc, const std::string& out_dir) {
  std::vector<GradCheckLine> lines = run_gradcheck(rc.gradcheck_seed, rc.gradcheck_corrupt_term);
  std::ostringstream report;
  bool all_pass = true;
  for (const auto& l : lines) {
    report << "term " << l.term << " max_rel_err " << l.max_rel_err << " "
           << (l.pass ? "PASS" : "FAIL") << "\n";
    all_pass = all_pass && l.pass;
  }
  std::cout << report.str();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir + "/gradcheck.txt");
    out << report.str();
  }
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Remaining commands
// ---------------------------------------------------------------------------

inline int cmd_gen_synth(const RunConfig& rc, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_run_config(rc, out_dir + "/config_effective.txt");
  SynthData s = synth_multifactor(rc.data.synth);
  save_dataset_text(s.train, out_dir + "/train.txt");
  save_dataset_text(s.validation, out_dir + "/validation.txt");
  save_dataset_text(s.test, out_dir + "/test.txt");
  std::cout << "gen-synth: wrote train/validation/test under " << out_dir << "\n";
  return 0;
}

namespace detail {

inline const Dataset& pick_split(const PreparedData& data, const std::string& split) {
  if (split == "train") return data.train;
  if (split == "validation") {
    if (!data.validation) throw ConfigError("no validation split available");
    return *data.validation;
  }
  if (split == "test") {
    if (!data.test) throw ConfigError("no test split available");
    return *data.test;
  }
  throw ConfigError("eval.split must be train, validation, or test");
}

inline Checkpoint load_checked(const RunConfig& rc, const Dataset& train) {
  if (rc.eval.checkpoint.empty()) throw ConfigError("eval.checkpoint is required");
  Checkpoint ck = load_checkpoint(rc.eval.checkpoint);
  ParamLayout expected = ParamLayout::from_config(rc.model, train);
  check_layout_compatible(expected, ck.layout);
  return ck;
}

}  // namespace detail

inline int cmd_export_latent(const RunConfig& rc, const std::string& out_dir) {
  fs::create_directories(out_dir);
  PreparedData data = prepare_data(rc);
  Checkpoint ck = detail::load_checked(rc, data.train);
  const Dataset& split = detail::pick_split(data, rc.eval.split);
  LatentExport e = export_latent(split, rc.model,
                                 ParamLayout::from_config(rc.model, data.train),
                                 ck.params, static_cast<size_t>(rc.eval.spec_index));
  write_delimited(e, out_dir + "/latent.txt");
  std::cout << "export-latent: wrote " << out_dir << "/latent.txt (" << e.table.rows()
            << " rows)\n";
  return 0;
}

inline int cmd_eval(const RunConfig& rc, const std::string& out_dir) {
  fs::create_directories(out_dir);
  PreparedData data = prepare_data(rc);
  Checkpoint ck = detail::load_checked(rc, data.train);
  ParamLayout layout = ParamLayout::from_config(rc.model, data.train);
  Metrics m = compute_metrics(rc, data, layout, ck.params);
  write_metrics(m, out_dir + "/metrics.txt");
  std::cout << "eval: wrote " << out_dir << "/metrics.txt\n";
  return 0;
}

}  // namespace npga::cli
