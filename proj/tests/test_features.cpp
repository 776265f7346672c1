#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "inttower/checkpoint.hpp"
#include "inttower/errors.hpp"
#include "inttower/experiment.hpp"
#include "inttower/features.hpp"
#include "test_util.hpp"

using namespace inttower;
namespace fs = std::filesystem;

namespace {

FeatureSchema small_schema() { return FeatureSchema{{"u", "age"}, {"i", "cat"}, "label", 3}; }

fs::path write_text(const fs::path& dir, const std::string& name, const std::string& text) {
  auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Schema, Validation) {
  EXPECT_NO_THROW(small_schema().validate());
  EXPECT_THROW((FeatureSchema{{}, {"i"}, "label", 3}.validate()), ConfigError);
  EXPECT_THROW((FeatureSchema{{"u"}, {}, "label", 3}.validate()), ConfigError);
  EXPECT_THROW((FeatureSchema{{"u"}, {"i"}, "label", 0}.validate()), ConfigError);
  EXPECT_THROW((FeatureSchema{{"u", "x"}, {"x"}, "label", 3}.validate()), ConfigError);
}

TEST(Schema, HashTracksLayout) {
  auto a = small_schema(), b = small_schema();
  EXPECT_EQ(a.hash(), b.hash());
  b.embedding_dim = 4;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Vocabulary, OovIsZeroAndIdsFollowFirstAppearance) {
  Vocabulary v(small_schema());
  EXPECT_EQ(v.add(0, "alice"), 1u);
  EXPECT_EQ(v.add(0, "bob"), 2u);
  EXPECT_EQ(v.add(0, "alice"), 1u);
  EXPECT_EQ(v.encode(0, "bob"), 2u);
  EXPECT_EQ(v.encode(0, "carol"), 0u);
  EXPECT_EQ(v.size(0), 3u);
  EXPECT_EQ(v.decode(0, 2), "bob");
  EXPECT_THROW(v.decode(0, 9), IndexError);
}

TEST(Vocabulary, EncodeDecodeRoundTripsAndPersists) {
  auto dir = testutil::temp_dir("vocab");
  Vocabulary v(small_schema());
  for (std::size_t f = 0; f < 4; ++f)
    for (int i = 0; i < 5; ++i) v.add(f, "v" + std::to_string(f) + "_" + std::to_string(i * 3));
  for (std::size_t f = 0; f < 4; ++f)
    for (std::uint32_t id = 1; id < v.size(f); ++id) EXPECT_EQ(v.encode(f, v.decode(f, id)), id);
  v.save(dir / "vocab.tsv");
  std::ifstream in(dir / "vocab.tsv");
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "u\tv0_0\t1");
  EXPECT_EQ(Vocabulary::load(dir / "vocab.tsv", small_schema()), v);
}

TEST(LoadCsv, ThreeRows) {
  auto dir = testutil::temp_dir("csv3");
  auto p = write_text(dir, "d.csv", "label,i,u,cat,age\n1,10,a,x,20\n0,11,b,y,30\n1,10,b,x,20\n");
  auto loaded = load_csv(p, small_schema());
  EXPECT_EQ(loaded.data.size(), 3u);
  EXPECT_EQ(loaded.data.labels, (std::vector<std::uint8_t>{1, 0, 1}));
  // schema order, not file order: u, age | i, cat
  EXPECT_EQ(loaded.data.user_ids, (std::vector<std::uint32_t>{1, 1, 2, 2, 2, 1}));
  EXPECT_EQ(loaded.data.item_ids, (std::vector<std::uint32_t>{1, 1, 2, 2, 1, 1}));
}

TEST(LoadCsv, BadLabelNamesRow) {
  auto dir = testutil::temp_dir("csvlabel");
  auto p = write_text(dir, "d.csv", "u,age,i,cat,label\na,1,x,c,1\nb,2,y,c,2\n");
  try {
    read_csv(p, small_schema());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, MissingColumnNamed) {
  auto dir = testutil::temp_dir("csvcol");
  auto p = write_text(dir, "d.csv", "u,age,i,label\na,1,x,1\n");
  try {
    read_csv(p, small_schema());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'cat'"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, MissingFileIsDataError) { EXPECT_THROW(read_csv("/nonexistent/x.csv", small_schema()), DataError); }

TEST(LoadCsv, QuotedCells) {
  EXPECT_EQ(split_csv_line(R"(a,"b,c",d)"), (std::vector<std::string>{"a", "b,c", "d"}));
  EXPECT_EQ(split_csv_line(R"("say ""hi""",x)"), (std::vector<std::string>{"say \"hi\"", "x"}));
}

TEST(Encode, UnseenValuesAtEvaluationMapToZero) {
  auto dir = testutil::temp_dir("oov");
  auto p = write_text(dir, "d.csv", "u,age,i,cat,label\na,1,x,c,1\nb,2,y,c,0\nzz,1,x,new,1\n");
  RawTable raw = read_csv(p, small_schema());
  const std::size_t train_rows[] = {0, 1};
  Vocabulary v = build_vocabulary(small_schema(), raw, train_rows);
  const std::size_t eval_rows[] = {2};
  Dataset d = encode(small_schema(), v, raw, eval_rows);
  EXPECT_EQ(d.user_ids, (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(d.item_ids, (std::vector<std::uint32_t>{1, 0}));
}

TEST(Split, EightyTwenty) {
  auto s = split(10, 0.8, 1);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  auto h = split(100, 0.5, 4);
  EXPECT_EQ(h.train.size(), 50u);
  EXPECT_EQ(h.test.size(), 50u);
}

TEST(Split, DeterministicPartition) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto a = split(137, 0.8, seed), b = split(137, 0.8, seed);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    for (auto i : a.test) EXPECT_TRUE(all.insert(i).second) << "row in both halves";
    EXPECT_EQ(all.size(), 137u);
    EXPECT_LT(std::abs(static_cast<double>(a.train.size()) - 0.8 * 137), 1.0);
  }
  EXPECT_NE(split(137, 0.8, 1).train, split(137, 0.8, 2).train);
}

TEST(Split, Errors) {
  EXPECT_THROW(split(0, 0.8, 1), DataError);
  EXPECT_THROW(split(10, 0.0, 1), ConfigError);
  EXPECT_THROW(split(10, 1.0, 1), ConfigError);
}

namespace {

struct EmbedFixture {
  FeatureSchema schema{{"u", "age"}, {"i"}, "label", 3};
  Vocabulary vocab{schema};
  ParamStore params;
  Batch batch;

  EmbedFixture() {
    for (int i = 0; i < 4; ++i) vocab.add(0, "u" + std::to_string(i));
    for (int i = 0; i < 3; ++i) vocab.add(1, "a" + std::to_string(i));
    for (int i = 0; i < 5; ++i) vocab.add(2, "i" + std::to_string(i));
    Rng rng(1);
    init_embeddings(params, schema, vocab, rng);
    batch.size = 3;
    batch.user_fields = 2;
    batch.item_fields = 1;
    batch.user_ids = {1, 2, 3, 2, 1, 0};
    batch.item_ids = {5, 5, 1};
    batch.labels = {1, 0, 1};
  }
};

}  // namespace

TEST(Embed, WidthAndLayout) {
  EmbedFixture f;
  Graph g;
  Var e = embed(g, f.params, f.schema, Side::kUser, f.batch);
  ASSERT_EQ(e.value().shape(), (Shape{3, 6}));
  const Tensor& u = f.params.get("emb.u").value;
  const Tensor& age = f.params.get("emb.age").value;
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(e.value().at(1, c), u.at(3, c));
    EXPECT_EQ(e.value().at(1, 3 + c), age.at(2, c));
  }
}

TEST(Embed, InitRangeAndZeroTables) {
  EmbedFixture f;
  const double bound = 1.0 / std::sqrt(3.0);
  for (const auto& p : f.params.all())
    for (double v : p.value.values()) EXPECT_LE(std::abs(v), bound);
  for (auto& p : f.params.all()) p.value.fill(0.0);
  Graph g;
  Var e = embed(g, f.params, f.schema, Side::kItem, f.batch);
  EXPECT_EQ(e.value(), Tensor::zeros({3, 3}));
}

TEST(Embed, GradientLandsOnLookedUpRowsOnly) {
  EmbedFixture f;
  for (auto& p : f.params.all()) p.grad = Tensor(p.value.shape());
  Graph g;
  g.backward(ag::sum(embed(g, f.params, f.schema, Side::kUser, f.batch)));
  const Parameter& u = f.params.get("emb.u");
  // user ids 1, 3, 1 -> row 1 twice, row 3 once
  for (std::size_t r = 0; r < u.value.rows(); ++r) {
    const double expect = r == 1 ? 2.0 : r == 3 ? 1.0 : 0.0;
    for (double v : u.grad.row(r)) EXPECT_EQ(v, expect) << "row " << r;
  }
  EXPECT_TRUE(u.row_touched(1));
  EXPECT_FALSE(u.row_touched(0));
  EXPECT_EQ(f.params.get("emb.i").grad, Tensor(f.params.get("emb.i").value.shape()));
}

TEST(Embed, GradientMatchesFiniteDifferences) {
  EmbedFixture f;
  Parameter& table = f.params.get("emb.age");
  table.grad = Tensor(table.value.shape());
  Tensor w({3, 6});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.1 * static_cast<double>(i + 1);
  auto loss = [&](Graph& g) { return ag::sum(ag::mul(embed(g, f.params, f.schema, Side::kUser, f.batch), g.constant(w))); };
  {
    Graph g;
    g.backward(loss(g));
  }
  for (std::size_t i = 0; i < table.value.size(); ++i) {
    const double orig = table.value[i];
    table.value[i] = orig + 1e-5;
    Graph g1(false);
    const double up = loss(g1).value().item();
    table.value[i] = orig - 1e-5;
    Graph g2(false);
    const double down = loss(g2).value().item();
    table.value[i] = orig;
    EXPECT_LT(testutil::rel_err(table.grad[i], (up - down) / 2e-5), 1e-6);
  }
}

TEST(Embed, OutOfRangeIdIsIndexError) {
  EmbedFixture f;
  f.batch.item_ids = {5, 6, 1};
  Graph g;
  EXPECT_THROW(embed(g, f.params, f.schema, Side::kItem, f.batch), IndexError);
}

TEST(Synthetic, DeterministicBytes) {
  auto dir = testutil::temp_dir("syn");
  SyntheticConfig cfg;
  cfg.num_rows = 2000;
  FeatureSchema schema{{"user_id", "user_segment", "user_noise"}, {"item_id", "item_category", "item_noise"}};
  generate_synthetic(schema, cfg, dir / "a.csv");
  generate_synthetic(schema, cfg, dir / "b.csv");
  EXPECT_EQ(read_file(dir / "a.csv"), read_file(dir / "b.csv"));
  cfg.seed += 1;
  generate_synthetic(schema, cfg, dir / "c.csv");
  EXPECT_NE(read_file(dir / "a.csv"), read_file(dir / "c.csv"));

  RawTable raw = read_csv(dir / "a.csv", schema);
  EXPECT_EQ(raw.size(), 2000u);
  const double rate = static_cast<double>(std::count(raw.labels.begin(), raw.labels.end(), 1)) / 2000.0;
  EXPECT_NEAR(rate, cfg.positive_rate, 0.01);
}

TEST(Synthetic, ZeroRowsIsHeaderOnly) {
  auto dir = testutil::temp_dir("syn0");
  SyntheticConfig cfg;
  cfg.num_rows = 0;
  generate_synthetic(small_schema(), cfg, dir / "z.csv");
  EXPECT_EQ(read_file(dir / "z.csv"), "u,age,i,cat,label\n");
}

TEST(Synthetic, InvalidSizesRejected) {
  auto dir = testutil::temp_dir("synbad");
  SyntheticConfig cfg;
  cfg.num_users = 0;
  EXPECT_THROW(generate_synthetic(small_schema(), cfg, dir / "x.csv"), ConfigError);
}

// Planted-signal oracle: without label noise a plain two-tower model learns
// the preference almost perfectly.
TEST(Synthetic, NoiseFreePlantIsLearnable) {
  auto dir = testutil::temp_dir("synlearn");
  RunConfig cfg;
  cfg.model.kind = ModelKind::kTwoTower;
  cfg.schema.embedding_dim = 8;
  cfg.model.tower.widths = {32, 16};
  cfg.model.tower.dropout_rate = 0.0;
  cfg.train.batch_size = 256;
  cfg.train.max_epochs = 15;
  cfg.train.adam.learning_rate = 0.01;
  cfg.synthetic.num_users = 100;
  cfg.synthetic.num_items = 100;
  cfg.synthetic.latent_rank = 2;
  cfg.synthetic.interests = 1;
  cfg.synthetic.noise = 0.0;
  cfg.synthetic.num_rows = 20000;
  cfg.data_path = (dir / "d.csv").string();
  generate_synthetic(cfg.schema, cfg.synthetic, cfg.data_path);
  auto outcome = run_training(cfg, prepare_data(cfg));
  EXPECT_GT(outcome.test.auc, 0.95);
}
