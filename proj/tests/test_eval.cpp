#include "npga/eval.hpp"

#include <gtest/gtest.h>

#include <numeric>

#include "npga/trainer.hpp"
#include "test_util.hpp"

using namespace npga;
using testutil::random_matrix;

namespace {

// Two Gaussian blobs with a wide margin in 2-D.
void separated_clusters(Index n_per, Matrix& features, Matrix& labels, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 0.3);
  features.resize(2 * n_per, 2);
  labels = Matrix::Zero(2 * n_per, 2);
  for (Index i = 0; i < n_per; ++i) {
    features(i, 0) = -3.0 + noise(rng);
    features(i, 1) = noise(rng);
    labels(i, 0) = 1.0;
    features(n_per + i, 0) = 3.0 + noise(rng);
    features(n_per + i, 1) = noise(rng);
    labels(n_per + i, 1) = 1.0;
  }
}

}  // namespace

TEST(Probe, SeparableClustersReachPerfectTrainingAccuracy) {
  Rng rng(1);
  Matrix x, y;
  separated_clusters(50, x, y, rng);
  ProbeParams p = fit_probe(x, y, 1e-4);
  EXPECT_DOUBLE_EQ(probe_accuracy(p, x, y), 1.0);
}

TEST(Probe, HeavyRegularizationDrivesWeightsToZero) {
  Rng rng(2);
  Matrix x, y;
  separated_clusters(30, x, y, rng);
  ProbeParams p = fit_probe(x, y, 1e6);
  EXPECT_LT(p.weights.norm(), 1e-3);
  // predictions approach uniform
  Matrix logits = (x * p.weights.transpose()).rowwise() + p.bias.transpose();
  for (Index i = 0; i < logits.rows(); ++i) {
    const double gap = logits.row(i).maxCoeff() - logits.row(i).minCoeff();
    EXPECT_LT(gap, 1e-2);
  }
}

// Convexity: an independently written solver (plain gradient descent with
// backtracking) lands at the same objective value.
TEST(Probe, AgreesWithIndependentConvexSolver) {
  Rng rng(3);
  const Index n = 60, f = 3, m = 3;
  Matrix x = random_matrix(n, f, rng, 2.0);
  Matrix w_true = random_matrix(m, f, rng);
  Matrix logits = x * w_true.transpose();
  Matrix y = Matrix::Zero(n, m);
  for (Index i = 0; i < n; ++i) {
    Index c = 0;
    logits.row(i).maxCoeff(&c);
    y(i, c) = 1.0;
  }
  const double l2 = 1e-3;

  auto objective = [&](const Matrix& w, const Vector& b) {
    LrGuidanceSpec s{w, b};
    return l_lr_and_grad(x, s, y).value + l2 * w.squaredNorm();
  };

  ProbeParams cg_fit = fit_probe(x, y, l2);

  // independent solver: fixed-iteration gradient descent with backtracking
  Matrix w = Matrix::Zero(m, f);
  Vector b = Vector::Zero(m);
  for (int it = 0; it < 4000; ++it) {
    LrGuidanceSpec s{w, b};
    LrCostResult r = l_lr_and_grad(x, s, y);
    Matrix gw = r.grad_weights + 2.0 * l2 * w;
    Vector gb = r.grad_bias;
    double t = 1.0;
    const double f0 = r.value + l2 * w.squaredNorm();
    const double g2 = gw.squaredNorm() + gb.squaredNorm();
    while (objective(w - t * gw, b - t * gb) > f0 - 0.5 * t * g2 && t > 1e-12) t *= 0.5;
    w -= t * gw;
    b -= t * gb;
  }
  EXPECT_NEAR(objective(cg_fit.weights, cg_fit.bias), objective(w, b), 1e-4);
}

TEST(Probe, ConvexFitIsSeedIndependent) {
  Rng rng(4);
  Matrix x, y;
  separated_clusters(40, x, y, rng);
  ProbeParams a = fit_probe(x, y, 1e-3);
  ProbeParams b = fit_probe(x, y, 1e-3);
  LrGuidanceSpec sa{a.weights, a.bias}, sb{b.weights, b.bias};
  const double ca = l_lr_and_grad(x, sa, y).value + 1e-3 * a.weights.squaredNorm();
  const double cb = l_lr_and_grad(x, sb, y).value + 1e-3 * b.weights.squaredNorm();
  EXPECT_NEAR(ca, cb, 1e-6);
}

TEST(Probe, SingleClassInputAlwaysPredictsThatClass) {
  Rng rng(5);
  const Index n = 20;
  Matrix x = random_matrix(n, 3, rng);
  Matrix y = Matrix::Zero(n, 3);
  y.col(1).setOnes();  // every example is class 1
  ProbeParams p = fit_probe(x, y, 1e-4);
  EXPECT_DOUBLE_EQ(probe_accuracy(p, x, y), 1.0);
}

TEST(ProbeAccuracy, ConstantPredictorOnBalancedSet) {
  const Index n = 30;
  Matrix x = Matrix::Zero(n, 2);  // all-zero features: logits equal bias
  Matrix y = Matrix::Zero(n, 3);
  for (Index i = 0; i < n; ++i) y(i, i % 3) = 1.0;
  ProbeParams p{Matrix::Zero(3, 2), Vector::Zero(3)};
  p.bias[0] = 5.0;  // always predicts class 0
  EXPECT_NEAR(probe_accuracy(p, x, y), 1.0 / 3.0, 1e-12);
}

TEST(ProbeAccuracy, PerfectProbeScoresOne) {
  Rng rng(6);
  Matrix x, y;
  separated_clusters(25, x, y, rng);
  ProbeParams p{Matrix::Zero(2, 2), Vector::Zero(2)};
  p.weights(0, 0) = -1.0;
  p.weights(1, 0) = 1.0;
  EXPECT_DOUBLE_EQ(probe_accuracy(p, x, y), 1.0);
}

TEST(ProbeAccuracy, TiesBreakTowardLowestIndex) {
  Matrix x = Matrix::Zero(1, 2);
  Matrix y = Matrix::Zero(1, 3);
  y(0, 0) = 1.0;
  ProbeParams p{Matrix::Zero(3, 2), Vector::Zero(3)};  // all logits tie
  EXPECT_DOUBLE_EQ(probe_accuracy(p, x, y), 1.0);
  Matrix y2 = Matrix::Zero(1, 3);
  y2(0, 2) = 1.0;
  EXPECT_DOUBLE_EQ(probe_accuracy(p, x, y2), 0.0);
}

TEST(ProbeAccuracy, RowPermutationInvariant) {
  Rng rng(7);
  Matrix x, y;
  separated_clusters(20, x, y, rng);
  ProbeParams p = fit_probe(x, y, 1e-4);
  std::vector<Index> perm(static_cast<size_t>(x.rows()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix xp(x.rows(), x.cols()), yp(y.rows(), y.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    xp.row(i) = x.row(perm[static_cast<size_t>(i)]);
    yp.row(i) = y.row(perm[static_cast<size_t>(i)]);
  }
  EXPECT_DOUBLE_EQ(probe_accuracy(p, x, y), probe_accuracy(p, xp, yp));
}

// Refitting after scaling the features by a positive scalar gives the same
// accuracy; the decision boundary just rescales.
TEST(Probe, RefitAfterPositiveScalingKeepsAccuracy) {
  Rng rng(8);
  Matrix x, y;
  separated_clusters(40, x, y, rng);
  Matrix x_test, y_test;
  separated_clusters(30, x_test, y_test, rng);

  ProbeParams p1 = fit_probe(x, y, 1e-6);
  const double acc1 = probe_accuracy(p1, x_test, y_test);
  const double c = 3.7;
  ProbeParams p2 = fit_probe(Matrix(c * x), y, 1e-6);
  const double acc2 = probe_accuracy(p2, Matrix(c * x_test), y_test);
  EXPECT_DOUBLE_EQ(acc1, acc2);
}

// ---------------------------------------------------------------------------
// Latent export
// ---------------------------------------------------------------------------

namespace {

struct ExportFixture {
  Dataset data;
  ModelConfig config;
  ParamLayout layout;
  Vector params;

  explicit ExportFixture(Index n, std::uint64_t seed = 17) {
    SynthConfig sc;
    sc.train_n = n;
    sc.validation_n = 0;
    sc.test_n = 0;
    sc.input_dim = 6;
    sc.seed = seed;
    data = synth_multifactor(sc).train;

    config.alpha = 0.5;
    config.hidden_units = 10;
    config.seed = seed;
    GpGuidanceSpec s;
    s.partition_begin = 2;
    s.partition_end = 8;
    s.projection = Matrix::Zero(2, 6);
    s.kernel.kind = KernelKind::rbf;
    s.target_label_set = "class";
    config.gp_specs.push_back(s);
    layout = ParamLayout::from_config(config, data);
    params = init_params(config, layout);
  }
};

}  // namespace

TEST(ExportLatent, ShapeAndColumns) {
  ExportFixture fx(50);
  LatentExport e = export_latent(fx.data, fx.config, fx.layout, fx.params, 0);
  // 2 latent coords + class + elevation + azimuth + lighting
  EXPECT_EQ(e.table.rows(), 50);
  EXPECT_EQ(e.table.cols(), 2 + 4);
  EXPECT_EQ(e.columns.front(), "latent_0");
  EXPECT_EQ(e.columns[2], "class");
}

TEST(ExportLatent, ZeroWeightsGiveZeroCoordinates) {
  ExportFixture fx(20);
  fx.params.setZero();
  LatentExport e = export_latent(fx.data, fx.config, fx.layout, fx.params, 0);
  EXPECT_TRUE(e.table.leftCols(2).isZero(0.0));
}

TEST(ExportLatent, CoordinatesMatchIndependentRecomputation) {
  ExportFixture fx(25);
  LatentExport e = export_latent(fx.data, fx.config, fx.layout, fx.params, 0);
  ModelParams p = unpack(fx.params, fx.layout);
  for (Index i = 0; i < fx.data.n(); ++i) {
    Vector hidden = encode(fx.data.features.row(i).transpose(), p.autoenc);
    Vector coords = p.projections[0] * hidden.segment(2, 6);
    EXPECT_TRUE((e.table.row(i).head(2).transpose() - coords).isZero(1e-14));
  }
}

TEST(ExportLatent, InvalidSpecIndexRejected) {
  ExportFixture fx(10);
  EXPECT_THROW(export_latent(fx.data, fx.config, fx.layout, fx.params, 3),
               InvalidInputError);
}
