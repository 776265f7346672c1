#include <gtest/gtest.h>

#include <cmath>

#include "inttower/errors.hpp"
#include "inttower/model.hpp"
#include "test_util.hpp"

using namespace inttower;
using testutil::random_tensor;

namespace {

FeatureSchema schema3() { return FeatureSchema{{"u", "ua", "ub"}, {"i", "ia"}, "label", 4}; }

Vocabulary vocab_for(const FeatureSchema& s, std::size_t values = 6) {
  Vocabulary v(s);
  for (std::size_t f = 0; f < s.total_fields(); ++f)
    for (std::size_t i = 0; i < values; ++i) v.add(f, "x" + std::to_string(i));
  return v;
}

Batch random_batch(const FeatureSchema& s, std::size_t b, Rng& rng, std::size_t vocab = 7) {
  Batch out;
  out.size = b;
  out.user_fields = s.user_fields.size();
  out.item_fields = s.item_fields.size();
  for (std::size_t i = 0; i < b * out.user_fields; ++i) out.user_ids.push_back(static_cast<std::uint32_t>(rng.index(vocab)));
  for (std::size_t i = 0; i < b * out.item_fields; ++i) out.item_ids.push_back(static_cast<std::uint32_t>(rng.index(vocab)));
  for (std::size_t i = 0; i < b; ++i) out.labels.push_back(static_cast<std::uint8_t>(rng.index(2)));
  return out;
}

ModelConfig small_config(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.tower.widths = {8, 6, 5};
  c.tower.dropout_rate = 0.0;
  c.head_dim = 3;
  return c;
}

}  // namespace

TEST(LightSE, HandArithmetic) {
  Graph g;
  Var e = g.constant(Tensor::matrix({{1, 1, 1, 1, 1, 1}}));
  Var w = g.constant(Tensor::zeros({2, 2}));
  Var b = g.constant(Tensor::zeros({2}));
  auto k = light_se_weights(e, w, b, 3).value();
  EXPECT_EQ(k, Tensor::matrix({{0.5, 0.5}}));
  EXPECT_EQ(light_se(e, w, b, 3).value(), Tensor::matrix({{0.5, 0.5, 0.5, 0.5, 0.5, 0.5}}));
}

TEST(LightSE, ZeroInputGivesZeroOutput) {
  Rng rng(1);
  Graph g;
  Var e = g.constant(Tensor::zeros({2, 6}));
  Var w = g.constant(random_tensor(rng, {3, 3}));
  Var b = g.constant(random_tensor(rng, {3}));
  EXPECT_EQ(light_se(e, w, b, 2).value(), Tensor::zeros({2, 6}));
}

TEST(LightSE, WeightsPositiveSumToOneAndScaleFields) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    const Tensor x = random_tensor(rng, {4, 12}, -2, 2);
    Var e = g.constant(x);
    Var w = g.constant(random_tensor(rng, {3, 3}));
    Var b = g.constant(random_tensor(rng, {3}));
    const Tensor k = light_se_weights(e, w, b, 4).value();
    const Tensor out = light_se(e, w, b, 4).value();
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t f = 0; f < 3; ++f) {
        EXPECT_GT(k.at(r, f), 0.0);
        total += k.at(r, f);
        for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(out.at(r, f * 4 + c), x.at(r, f * 4 + c) * k.at(r, f));
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(LightSE, IndivisibleWidthIsShapeError) {
  Graph g;
  EXPECT_THROW(light_se(g.constant(Tensor::zeros({1, 5})), g.constant(Tensor::zeros({2, 2})),
                        g.constant(Tensor::zeros({2})), 2),
               ShapeError);
}

TEST(Tower, ShapesForPublishedWidths) {
  Rng rng(3);
  Graph g;
  const std::size_t in = 3 * 32;
  std::vector<DenseLayer> layers;
  std::size_t prev = in;
  for (std::size_t w : {300, 300, 128}) {
    layers.push_back({g.constant(random_tensor(rng, {prev, w}, -0.1, 0.1)), g.constant(Tensor::zeros({w}))});
    prev = w;
  }
  auto hs = tower_forward(g.constant(random_tensor(rng, {5, in})), layers, 0.0, nullptr);
  ASSERT_EQ(hs.size(), 3u);
  EXPECT_EQ(hs[0].value().shape(), (Shape{5, 300}));
  EXPECT_EQ(hs[1].value().shape(), (Shape{5, 300}));
  EXPECT_EQ(hs[2].value().shape(), (Shape{5, 128}));
}

TEST(Tower, ZeroWeightsGiveBias) {
  Graph g;
  std::vector<DenseLayer> layers = {{g.constant(Tensor::zeros({3, 2})), g.constant(Tensor::vector({-1, 2}))},
                                    {g.constant(Tensor::zeros({2, 2})), g.constant(Tensor::vector({0.5, -0.5}))}};
  auto relu_all = tower_forward(g.constant(Tensor::matrix({{1, 2, 3}})), layers, 0.0, nullptr, true);
  EXPECT_EQ(relu_all[0].value(), Tensor::matrix({{0, 2}}));
  EXPECT_EQ(relu_all[1].value(), Tensor::matrix({{0.5, 0}}));
  auto linear_out = tower_forward(g.constant(Tensor::matrix({{1, 2, 3}})), layers, 0.0, nullptr);
  EXPECT_EQ(linear_out[1].value(), Tensor::matrix({{0.5, -0.5}}));
}

TEST(Tower, PaddedIdentityTruncates) {
  Graph g;
  Tensor w({4, 2});
  w.at(0, 0) = 1;
  w.at(1, 1) = 1;
  std::vector<DenseLayer> layers = {{g.constant(w), g.constant(Tensor::zeros({2}))}};
  auto hs = tower_forward(g.constant(Tensor::matrix({{3, 4, 5, 6}})), layers, 0.0, nullptr, true);
  EXPECT_EQ(hs[0].value(), Tensor::matrix({{3, 4}}));
}

TEST(Tower, WidthMismatchIsShapeError) {
  Graph g;
  std::vector<DenseLayer> layers = {{g.constant(Tensor::zeros({3, 2})), g.constant(Tensor::zeros({2}))}};
  EXPECT_THROW(tower_forward(g.constant(Tensor::zeros({1, 4})), layers, 0.0, nullptr), ShapeError);
}

TEST(Heads, UnitNormShapeAndIdentity) {
  Rng rng(4);
  Graph g;
  DenseLayer proj{g.constant(random_tensor(rng, {10, 3 * 64})), g.constant(random_tensor(rng, {3 * 64}))};
  Var m = project_heads(g.constant(random_tensor(rng, {4, 10})), proj, 64);
  ASSERT_EQ(m.value().shape(), (Shape{4, 192}));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t h = 0; h < 3; ++h) {
      double n = 0.0;
      for (std::size_t t = 0; t < 64; ++t) n += m.value().at(r, h * 64 + t) * m.value().at(r, h * 64 + t);
      EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12);
    }
  DenseLayer ident{g.constant(Tensor::identity(2)), g.constant(Tensor::zeros({2}))};
  EXPECT_LE(ops::max_abs_diff(project_heads(g.constant(Tensor::matrix({{0.6, 0.8}})), ident, 2).value(),
                              Tensor::matrix({{0.6, 0.8}})),
            1e-15);
  EXPECT_THROW(project_heads(g.constant(Tensor::zeros({1, 3})), ident, 2), ShapeError);
}

TEST(MaxSim, Examples) {
  Graph g;
  auto score = [&](Tensor u, Tensor v, std::size_t p) { return maxsim_score(g.constant(u), g.constant(v), p).value().item(); };
  EXPECT_NEAR(score(Tensor::matrix({{1, 0, 0, 1}}), Tensor::matrix({{0.6, 0.8}}), 2), 1.4, 1e-15);
  EXPECT_NEAR(score(Tensor::matrix({{0.6, 0.8}}), Tensor::matrix({{-0.8, 0.6}}), 2), 0.0, 1e-15);
  EXPECT_NEAR(score(Tensor::matrix({{0.6, 0.8}}), Tensor::matrix({{0.28, 0.96}}), 2), 0.6 * 0.28 + 0.8 * 0.96, 1e-15);
  // identical unit head sets -> H_u
  EXPECT_NEAR(score(Tensor::matrix({{1, 0, 0, 0, 1, 0, 0, 0, 1}}), Tensor::matrix({{0, 0, 1, 1, 0, 0, 0, 1, 0}}), 3), 3.0,
              1e-15);
  EXPECT_THROW(score(Tensor::matrix({{1, 0, 0}}), Tensor::matrix({{1, 0}}), 2), ShapeError);
}

TEST(MaxSim, MonotoneInItemHeadsAndPermutationInvariant) {
  Rng rng(5);
  const std::size_t p = 4;
  for (int trial = 0; trial < 30; ++trial) {
    Graph g;
    Tensor u = ops::l2_normalize_chunks(random_tensor(rng, {1, 3 * p}), p);
    Tensor v = ops::l2_normalize_chunks(random_tensor(rng, {1, 2 * p}), p);
    Tensor extra = ops::l2_normalize_chunks(random_tensor(rng, {1, p}), p);
    std::vector<double> more(v.values());
    more.insert(more.end(), extra.values().begin(), extra.values().end());
    const double base = maxsim_score(g.constant(u), g.constant(v), p).value().item();
    const double bigger = maxsim_score(g.constant(u), g.constant(Tensor({1, 3 * p}, more)), p).value().item();
    EXPECT_GE(bigger, base);
    std::vector<double> swapped(v.values().begin() + p, v.values().end());
    swapped.insert(swapped.end(), v.values().begin(), v.values().begin() + p);
    EXPECT_EQ(maxsim_score(g.constant(u), g.constant(Tensor({1, 2 * p}, swapped)), p).value().item(), base);
  }
}

TEST(MaxSim, GradientRoutesThroughArgmaxHead) {
  Graph g;
  Var u = g.input(Tensor::matrix({{1, 0}}));
  Var v = g.input(Tensor::matrix({{0.6, 0.8, 0.9, 0.1}}));
  g.backward(ag::sum(maxsim_score(u, v, 2)));
  EXPECT_EQ(g.grad(v), Tensor::matrix({{0, 0, 1, 0}}));
  EXPECT_EQ(g.grad(u), Tensor::matrix({{0.9, 0.1}}));
}

TEST(Model, ConfigValidation) {
  auto cfg = small_config(ModelKind::kIntTower);
  cfg.tower.widths = {};
  EXPECT_THROW(Model(schema3(), cfg), ConfigError);
  cfg = small_config(ModelKind::kIntTower);
  cfg.fe_layers = {4};
  EXPECT_THROW(Model(schema3(), cfg), ConfigError);
  cfg = small_config(ModelKind::kIntTower);
  cfg.item_heads = 2;
  EXPECT_THROW(Model(schema3(), cfg), ConfigError);  // CIR compares equal-size M_u, M_v
  cfg.flags.use_cir = false;
  EXPECT_NO_THROW(Model(schema3(), cfg));
  EXPECT_THROW(parse_model_kind("dssm"), ConfigError);
}

TEST(Model, DefaultHeadsEqualUserFieldCount) {
  Model m(schema3(), small_config(ModelKind::kIntTower));
  EXPECT_EQ(m.user_heads(), 3u);
  EXPECT_EQ(m.item_heads(), 3u);
  EXPECT_EQ(m.tapped_layers(), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Model, TwoTowerIsCosineOfFinalLayers) {
  auto s = schema3();
  Model m(s, small_config(ModelKind::kTwoTower));
  ParamStore params;
  m.init(params, vocab_for(s), 9);
  Rng rng(6);
  Batch b = random_batch(s, 6, rng);
  Graph g;
  auto fwd = m.forward(g, params, b, Mode::kEval);
  const Tensor& hu = fwd.user_repr.value();
  const Tensor& hv = fwd.item_repr.value();
  for (std::size_t r = 0; r < b.size; ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < hu.cols(); ++c) dot += hu.at(r, c) * hv.at(r, c);
    EXPECT_NEAR(fwd.logits.value()[r], dot, 1e-15);
    EXPECT_LE(std::abs(dot), 1.0 + 1e-12);
  }
}

TEST(Model, TwoTowerIdenticalTowersScoreOne) {
  FeatureSchema s{{"a", "b"}, {"c", "d"}, "label", 4};
  Model m(s, small_config(ModelKind::kTwoTower));
  ParamStore params;
  m.init(params, vocab_for(s), 9);
  // make the item side a copy of the user side
  params.get("emb.c").value = params.get("emb.a").value;
  params.get("emb.d").value = params.get("emb.b").value;
  for (int i = 0; i < 3; ++i)
    for (const char* part : {".W", ".b"})
      params.get("tower.item." + std::to_string(i) + part).value =
          params.get("tower.user." + std::to_string(i) + part).value;
  Batch b;
  b.size = 1;
  b.user_fields = b.item_fields = 2;
  b.user_ids = b.item_ids = {2, 5};
  b.labels = {1};
  Graph g;
  EXPECT_NEAR(m.forward(g, params, b, Mode::kEval).logits.value().item(), 1.0, 1e-12);
}

TEST(Model, IntTowerLogitsBoundedAndFinite) {
  auto s = schema3();
  Model m(s, small_config(ModelKind::kIntTower));
  ParamStore params;
  m.init(params, vocab_for(s), 3);
  Rng rng(7);
  const double bound = 3.0 * 3.0;  // L * H_u
  for (int trial = 0; trial < 10; ++trial) {
    for (auto& p : params.all())
      for (double& v : p.value.values()) v = rng.uniform(-2, 2);
    params.get("out.bias").value[0] = 0.0;
    Batch b = random_batch(s, 8, rng);
    Graph g;
    const Tensor& y = m.forward(g, params, b, Mode::kEval).logits.value();
    EXPECT_TRUE(y.all_finite());
    for (double v : y.values()) EXPECT_LE(std::abs(v), bound + 1e-9);
  }
}

TEST(Model, SingleLayerIntTowerIsOneMaxSim) {
  auto s = schema3();
  auto cfg = small_config(ModelKind::kIntTower);
  cfg.tower.widths = {5};
  cfg.flags.use_light_se = false;
  Model m(s, cfg);
  ParamStore params;
  m.init(params, vocab_for(s), 3);
  Rng rng(8);
  Batch b = random_batch(s, 4, rng);
  Graph g;
  auto fwd = m.forward(g, params, b, Mode::kEval);
  Var direct = maxsim_score(fwd.user_repr, fwd.item_repr, 3);
  EXPECT_EQ(fwd.logits.value(), direct.value());
}

// With Light-SE and FE-Block off the IntTower graph is the two-tower graph;
// with the FE-Block on, H=1 and an identity projection of the last layer it
// must reduce to the same cosine.
TEST(Model, AblationIdentityWithTwoTower) {
  auto s = schema3();
  auto two_cfg = small_config(ModelKind::kTwoTower);
  Model two(s, two_cfg);
  ParamStore params;
  two.init(params, vocab_for(s), 21);
  Rng rng(9);
  Batch b = random_batch(s, 16, rng);
  Graph g0;
  const Tensor expect = two.forward(g0, params, b, Mode::kEval).logits.value();

  auto off = small_config(ModelKind::kIntTower);
  off.flags = {false, false, false, false};
  Graph g1;
  EXPECT_LE(ops::max_abs_diff(Model(s, off).forward(g1, params, b, Mode::kEval).logits.value(), expect), 1e-10);

  auto fe = small_config(ModelKind::kIntTower);
  fe.flags = {false, true, false, false};
  fe.user_heads = fe.item_heads = 1;
  fe.head_dim = 5;
  fe.fe_layers = {3};
  Model int_model(s, fe);
  ParamStore with_heads = params;
  with_heads.add("head.user.2.W", ParamRole::kWeight, Tensor::identity(5));
  with_heads.add("head.user.2.b", ParamRole::kBias, Tensor({5}));
  with_heads.add("head.item.W", ParamRole::kWeight, Tensor::identity(5));
  with_heads.add("head.item.b", ParamRole::kBias, Tensor({5}));
  Graph g2;
  EXPECT_LE(ops::max_abs_diff(int_model.forward(g2, with_heads, b, Mode::kEval).logits.value(), expect), 1e-10);
}

TEST(Model, SingleTowerZeroWeightsGiveFinalBias) {
  auto s = schema3();
  Model m(s, small_config(ModelKind::kSingleTower));
  ParamStore params;
  m.init(params, vocab_for(s), 2);
  EXPECT_EQ(params.get("single.0.W").value.rows(), (3 + 2) * 4u);
  for (auto& p : params.all())
    if (p.role != ParamRole::kEmbedding) p.value.fill(0.0);
  params.get("single.out.b").value[0] = 0.37;
  Rng rng(1);
  Batch b = random_batch(s, 3, rng);
  Graph g;
  EXPECT_EQ(m.forward(g, params, b, Mode::kEval).logits.value(), Tensor::full({3, 1}, 0.37));
}

TEST(Model, DropoutOnlyInTraining) {
  auto s = schema3();
  auto cfg = small_config(ModelKind::kIntTower);
  cfg.tower.dropout_rate = 0.5;
  Model m(s, cfg);
  ParamStore params;
  m.init(params, vocab_for(s), 2);
  Rng rng(3);
  Batch b = random_batch(s, 8, rng);
  Graph g1, g2, g3;
  Rng d1(1);
  const Tensor e1 = m.forward(g1, params, b, Mode::kEval, &d1).logits.value();
  const Tensor e2 = m.forward(g2, params, b, Mode::kEval, &d1).logits.value();
  EXPECT_EQ(e1, e2);
  const Tensor t = m.forward(g3, params, b, Mode::kTrain, &d1).logits.value();
  EXPECT_NE(t, e1);
}

TEST(Model, DecoupledHalvesReproduceForward) {
  auto s = schema3();
  for (auto flags : {ArchFlags{true, true, true, false}, ArchFlags{false, true, false, false},
                     ArchFlags{true, false, true, false}}) {
    auto cfg = small_config(ModelKind::kIntTower);
    cfg.flags = flags;
    cfg.fe_layers = flags.use_fe_block ? std::vector<std::size_t>{1, 3} : std::vector<std::size_t>{};
    Model m(s, cfg);
    ParamStore params;
    m.init(params, vocab_for(s), 5);
    params.get("out.bias").value[0] = -0.25;
    Rng rng(4);
    Batch b = random_batch(s, 10, rng);
    Graph g;
    const Tensor logits = m.forward(g, params, b, Mode::kEval).logits.value();
    const ServingLayout lay = m.serving_layout();
    const Tensor u = m.user_side(g, params, b).value();
    const Tensor v = m.item_side(g, params, b).value();
    ASSERT_EQ(u.cols(), lay.user_layers * lay.user_heads * lay.head_dim);
    ASSERT_EQ(v.cols(), lay.item_heads * lay.head_dim);
    for (std::size_t r = 0; r < b.size; ++r) {
      double total = m.output_bias(params);
      for (std::size_t l = 0; l < lay.user_layers; ++l) {
        Tensor ub({1, lay.user_heads * lay.head_dim});
        for (std::size_t c = 0; c < ub.cols(); ++c) ub[c] = u.at(r, l * ub.cols() + c);
        Tensor vb({1, v.cols()});
        for (std::size_t c = 0; c < v.cols(); ++c) vb[c] = v.at(r, c);
        Graph h;
        total += maxsim_score(h.constant(ub), h.constant(vb), lay.head_dim).value().item();
      }
      EXPECT_NEAR(total, logits[r], 1e-12);
    }
  }
}

TEST(Model, FeToFcIsNotDecoupled) {
  auto cfg = small_config(ModelKind::kIntTower);
  cfg.flags = {true, false, true, true};
  Model m(schema3(), cfg);
  EXPECT_FALSE(m.decoupled());
  EXPECT_THROW(m.serving_layout(), ContractError);
  EXPECT_FALSE(Model(schema3(), small_config(ModelKind::kSingleTower)).decoupled());
}

TEST(Model, ParameterNamesPerArchitecture) {
  auto s = schema3();
  ParamStore p;
  Model(s, small_config(ModelKind::kIntTower)).init(p, vocab_for(s), 1);
  for (const char* name : {"lightse.user.W", "lightse.item.b", "tower.user.2.W", "head.user.0.W", "head.item.W", "out.bias"})
    EXPECT_TRUE(p.contains(name)) << name;
  EXPECT_EQ(p.get("lightse.user.W").value.shape(), (Shape{3, 3}));
  EXPECT_EQ(p.get("lightse.item.W").value.shape(), (Shape{2, 2}));
  EXPECT_EQ(p.get("head.user.1.W").value.shape(), (Shape{6, 9}));
  EXPECT_EQ(p.get("out.bias").role, ParamRole::kBias);
}
