#include <gtest/gtest.h>

#include <cmath>

#include "inttower/errors.hpp"
#include "inttower/objectives.hpp"
#include "test_util.hpp"

using namespace inttower;
using testutil::random_tensor;

namespace {

double ctr_value(std::vector<double> logits, std::vector<std::uint8_t> labels) {
  Graph g(false);
  Var x = g.constant(Tensor({logits.size(), 1}, logits));
  return ctr_loss(x, labels).value().item();
}

double cir_value(const Tensor& mu, const Tensor& mv, std::vector<std::uint8_t> labels, double tau = 1.0) {
  Graph g(false);
  LossConfig cfg;
  cfg.tau = tau;
  return cir_loss(g.constant(mu), g.constant(mv), labels, cfg).value().item();
}

// Direct reference for the in-batch InfoNCE term.
double cir_reference(const Tensor& mu, const Tensor& mv, const std::vector<std::uint8_t>& labels, double tau) {
  const std::size_t b = mu.rows();
  auto cosine = [&](std::size_t i, std::size_t j) {
    double d = 0, nu = 0, nv = 0;
    for (std::size_t c = 0; c < mu.cols(); ++c) {
      d += mu.at(i, c) * mv.at(j, c);
      nu += mu.at(i, c) * mu.at(i, c);
      nv += mv.at(j, c) * mv.at(j, c);
    }
    return d / std::sqrt(nu) / std::sqrt(nv);
  };
  double total = 0;
  int pos = 0;
  for (std::size_t i = 0; i < b; ++i) {
    if (!labels[i]) continue;
    double denom = 0;
    for (std::size_t j = 0; j < b; ++j) denom += std::exp(cosine(i, j) / tau);
    total += -std::log(std::exp(cosine(i, i) / tau) / denom);
    ++pos;
  }
  return pos ? total / pos : 0.0;
}

}  // namespace

TEST(CtrLoss, Examples) {
  EXPECT_NEAR(ctr_value({0.0}, {1}), std::log(2.0), 1e-12);
  EXPECT_NEAR(ctr_value({0.0, 0.0}, {1, 0}), 0.693147, 1e-6);
  EXPECT_LT(ctr_value({50.0, -50.0}, {1, 0}), 1e-6);
}

TEST(CtrLoss, BadLabelIsDataError) { EXPECT_THROW(ctr_value({0.0}, {2}), DataError); }

TEST(CtrLoss, GradientIsSigmoidMinusLabelOverBatch) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = random_tensor(rng, {5, 1}, -4, 4);
    std::vector<std::uint8_t> y = {1, 0, 0, 1, 1};
    Graph g;
    Var xv = g.input(x);
    g.backward(ctr_loss(xv, y));
    for (std::size_t i = 0; i < 5; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-x[i]));
      EXPECT_NEAR(g.grad(xv)[i], (s - y[i]) / 5.0, 1e-15);
    }
    auto f = [&](Graph&, const std::vector<Var>& v) { return ctr_loss(v[0], y); };
    EXPECT_LT(testutil::fd_max_rel_error(f, {x}), 1e-6);
  }
}

TEST(CirLoss, BatchOfOneIsExactlyZero) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    EXPECT_EQ(cir_value(random_tensor(rng, {1, 6}), random_tensor(rng, {1, 6}), {1}), 0.0);
  }
}

TEST(CirLoss, TwoPositivesSameItemIsLn2) {
  Tensor mu = Tensor::matrix({{1, 0.5, -0.2}, {0.3, 0.1, 0.9}});
  Tensor mv = Tensor::matrix({{0.2, 0.4, 0.1}, {0.2, 0.4, 0.1}});
  EXPECT_NEAR(cir_value(mu, mv, {1, 1}), std::log(2.0), 1e-12);
}

TEST(CirLoss, NoPositivesIsZero) {
  Rng rng(3);
  EXPECT_EQ(cir_value(random_tensor(rng, {4, 3}), random_tensor(rng, {4, 3}), {0, 0, 0, 0}), 0.0);
}

TEST(CirLoss, MatchesDirectReference) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor mu = random_tensor(rng, {6, 4}), mv = random_tensor(rng, {6, 4});
    std::vector<std::uint8_t> y(6);
    for (auto& l : y) l = static_cast<std::uint8_t>(rng.index(2));
    y[0] = 1;
    const double tau = rng.uniform(0.2, 2.0);
    EXPECT_NEAR(cir_value(mu, mv, y, tau), cir_reference(mu, mv, y, tau), 1e-12);
  }
}

TEST(CirLoss, DecreasesWhenPositiveCosineRises) {
  Tensor mu = Tensor::matrix({{1, 0}, {0, 1}});
  Tensor far = Tensor::matrix({{0, 1}, {1, 0}});
  Tensor near = Tensor::matrix({{0.7, 0.7}, {1, 0}});
  EXPECT_LT(cir_value(mu, near, {1, 0}), cir_value(mu, far, {1, 0}));
}

TEST(CirLoss, InvariantToCommonRescaling) {
  Rng rng(5);
  Tensor mu = random_tensor(rng, {5, 4}), mv = random_tensor(rng, {5, 4});
  std::vector<std::uint8_t> y = {1, 0, 1, 1, 0};
  EXPECT_NEAR(cir_value(mu, mv, y), cir_value(ops::scale(mu, 3.7), ops::scale(mv, 3.7), y), 1e-10);
}

TEST(CirLoss, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  std::vector<std::uint8_t> y = {1, 0, 1, 1};
  LossConfig cfg;
  cfg.tau = 0.5;
  auto f = [&](Graph&, const std::vector<Var>& v) { return cir_loss(v[0], v[1], y, cfg); };
  for (int trial = 0; trial < 10; ++trial) {
    EXPECT_LT(testutil::fd_max_rel_error(f, {random_tensor(rng, {4, 6}), random_tensor(rng, {4, 6})}), 1e-5);
  }
}

TEST(CirLoss, NonPositiveTauIsConfigError) {
  LossConfig cfg;
  cfg.tau = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.tau = 1.0;
  cfg.lambda1 = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

namespace {

struct LossFixture {
  FeatureSchema schema{{"u", "ua"}, {"i", "ia"}, "label", 3};
  ModelConfig cfg;
  std::unique_ptr<Model> model;
  ParamStore params;
  Batch batch;

  LossFixture() {
    cfg.tower.widths = {6, 4};
    cfg.tower.dropout_rate = 0;
    cfg.head_dim = 2;
    model = std::make_unique<Model>(schema, cfg);
    Vocabulary v(schema);
    for (std::size_t f = 0; f < 4; ++f)
      for (int i = 0; i < 3; ++i) v.add(f, std::to_string(i));
    model->init(params, v, 4);
    batch.size = 4;
    batch.user_fields = batch.item_fields = 2;
    batch.user_ids = {1, 2, 3, 1, 2, 2, 0, 3};
    batch.item_ids = {3, 1, 2, 2, 1, 1, 3, 0};
    batch.labels = {1, 0, 1, 0};
  }
};

}  // namespace

TEST(TotalLoss, ZeroLambdasIsCtrNodeItself) {
  LossFixture f;
  LossConfig cfg{0.0, 0.0, 1.0};
  Graph g;
  auto fwd = f.model->forward(g, f.params, f.batch, Mode::kEval);
  auto terms = total_loss(g, fwd, f.batch.labels, f.params, *f.model, cfg);
  EXPECT_EQ(terms.total.id, terms.ctr.id);
  EXPECT_EQ(terms.total.value().item(), ctr_loss(fwd.logits, f.batch.labels).value().item());
}

TEST(TotalLoss, ComposesTerms) {
  LossFixture f;
  LossConfig cfg{1.0, 0.01, 0.7};
  Graph g;
  auto fwd = f.model->forward(g, f.params, f.batch, Mode::kEval);
  auto terms = total_loss(g, fwd, f.batch.labels, f.params, *f.model, cfg);
  double l2 = 0;
  for (const auto& p : f.params.all())
    if (p.role == ParamRole::kWeight)
      for (double v : p.value.values()) l2 += v * v;
  const double ctr = ctr_loss(fwd.logits, f.batch.labels).value().item();
  const double cir = cir_reference(fwd.user_repr.value(), fwd.item_repr.value(), f.batch.labels, 0.7);
  EXPECT_NEAR(terms.total.value().item(), ctr + cir + 0.01 * l2, 1e-12);
}

TEST(TotalLoss, ZeroParamsContributeNoL2) {
  LossFixture f;
  for (auto& p : f.params.all()) p.value.fill(0.0);
  Graph g;
  auto fwd = f.model->forward(g, f.params, f.batch, Mode::kEval);
  LossConfig with{0.0, 5.0, 1.0}, without{0.0, 0.0, 1.0};
  Graph g2;
  auto fwd2 = f.model->forward(g2, f.params, f.batch, Mode::kEval);
  EXPECT_EQ(total_loss(g, fwd, f.batch.labels, f.params, *f.model, with).total.value().item(),
            total_loss(g2, fwd2, f.batch.labels, f.params, *f.model, without).total.value().item());
}

TEST(TotalLoss, L2CoversWeightMatricesOnly) {
  LossFixture f;
  auto names = f.model->weight_names(f.params);
  for (const auto& n : names) {
    EXPECT_EQ(n.find("emb."), std::string::npos) << n;
    EXPECT_NE(n.back(), 'b') << n;
  }
  EXPECT_FALSE(names.empty());
}

TEST(Auc, Examples) {
  const std::vector<std::uint8_t> y = {0, 0, 1, 1};
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y), 0.0);
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, y), 0.75);
  EXPECT_EQ(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y), 0.5);
}

TEST(Auc, SingleClassIsMetricError) {
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{1, 1}), MetricError);
}

TEST(Auc, MatchesBruteForceAndMonotoneInvariance) {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5 + rng.index(60);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform(-3, 3) * 4) / 4;  // coarse grid -> ties
      y[i] = static_cast<std::uint8_t>(rng.index(2));
    }
    y[0] = 0;
    y[1] = 1;
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1;
          wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    const double a = auc(s, y);
    EXPECT_NEAR(a, wins / pairs, 1e-12);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(2.0 * s[i]) + 7.0;
    EXPECT_NEAR(auc(t, y), a, 1e-12);
  }
}

TEST(Logloss, MatchesCtrLoss) {
  Rng rng(8);
  std::vector<double> x(20);
  std::vector<std::uint8_t> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    x[i] = rng.uniform(-30, 30);
    y[i] = static_cast<std::uint8_t>(rng.index(2));
  }
  EXPECT_NEAR(logloss(x, y), ctr_value(x, y), 1e-15);
}

TEST(RelaImpr, Examples) {
  EXPECT_NEAR(relaimpr(0.8974, 0.8697), 7.49, 0.01);
  EXPECT_NEAR(relaimpr(0.8836, 0.8697), 3.75, 0.01);
  EXPECT_EQ(relaimpr(0.8, 0.8), 0.0);
  EXPECT_THROW(relaimpr(0.7, 0.5), MetricError);
}

TEST(Metrics, JsonShape) {
  Metrics m{0.75, 0.5, std::nullopt};
  EXPECT_EQ(m.to_json(), R"({"auc":0.75,"logloss":0.5,"relaimpr_vs_base":null})");
  m.relaimpr = 2.5;
  EXPECT_EQ(m.to_json(), R"({"auc":0.75,"logloss":0.5,"relaimpr_vs_base":2.5})");
}
