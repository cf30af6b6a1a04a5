#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "polyfs/eval/protocol.hpp"
#include "polyfs/eval/report.hpp"
#include "polyfs/world/synthetic.hpp"

using namespace polyfs;
namespace fs = std::filesystem;

namespace {

// F from raw counts as 2TP / (2TP + FP + FN).
double oracle_f(const std::vector<int>& truth, const std::vector<int>& pred) {
  int tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] && pred[i]) ++tp;
    if (!truth[i] && pred[i]) ++fp;
    if (truth[i] && !pred[i]) ++fn;
  }
  return tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
}

struct SmallWorld {
  SyntheticWorld world;
  BaseClassifier base;
};

const SmallWorld& small_world() {
  static const SmallWorld w = [] {
    WorldConfig wc;
    wc.n_base = 8;
    wc.n_novel = 3;
    wc.dim = 16;
    wc.noise = 1.0;
    wc.base_train_clips = 400;
    wc.base_val_clips = 100;
    wc.base_test_clips = 150;
    wc.novel_val_clips = 150;
    wc.novel_test_clips = 150;
    wc.seed = 5;
    SmallWorld s{generate_world(wc), {}};
    BaseTrainConfig bc;
    bc.max_epochs = 30;
    s.base = train_base(s.world.base_train, &s.world.base_val, bc).classifier;
    return s;
  }();
  return w;
}

ProtocolStores stores_of(const SyntheticWorld& w) { return {&w.novel_test, &w.base_test, &w.base_train}; }

}  // namespace

TEST(FMeasure, HandExamples) {
  Eigen::MatrixXd s(4, 3), y(4, 3);
  s << 0.9, 0.9, 0.1,  //
      0.9, 0.8, 0.2,   //
      0.9, 0.1, 0.3,   //
      0.1, 0.1, 0.5;
  y << 1, 1, 1,  //
      1, 1, 0,   //
      0, 0, 1,   //
      1, 0, 1;
  const auto r = f_measure(s, y);
  EXPECT_NEAR(r[0].precision, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r[0].recall, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r[0].f, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(r[1].f, 1.0);
  EXPECT_EQ(r[2].f, 0.0);  // a score of exactly 0.5 is not positive
  EXPECT_EQ(r[2].precision, 0.0);
  EXPECT_THROW(f_measure(s, y.leftCols(2)), Error);
}

TEST(FMeasure, ExhaustiveUpToEightSamples) {
  for (int m = 1; m <= 8; ++m) {
    const int configs = 1 << (2 * m);
    for (int idx = 0; idx < configs; ++idx) {
      Eigen::MatrixXd s(m, 3), y(m, 3);
      std::array<std::vector<int>, 3> truth, pred;
      for (int c = 0; c < 3; ++c) {
        const int code = (idx + c * 7919) % configs;
        for (int r = 0; r < m; ++r) {
          const int t = (code >> (2 * r)) & 1, p = (code >> (2 * r + 1)) & 1;
          truth[c].push_back(t);
          pred[c].push_back(p);
          y(r, c) = t;
          s(r, c) = p ? 0.75 : 0.25;
        }
      }
      const auto out = f_measure(s, y);
      for (int c = 0; c < 3; ++c) ASSERT_NEAR(out[c].f, oracle_f(truth[c], pred[c]), 1e-12);
    }
  }
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_EQ(percentile({3.0, 1.0, 2.0}, 50.0), 2.0);
  EXPECT_EQ(percentile({1.0, 2.0}, 25.0), 1.25);
  EXPECT_EQ(percentile({7.0}, 97.5), 7.0);
  const auto iv = summarize({0.0, 1.0, 2.0, 3.0, 4.0});
  EXPECT_EQ(iv.mean, 2.0);
  EXPECT_NEAR(iv.lo, 0.1, 1e-12);
  EXPECT_NEAR(iv.hi, 3.9, 1e-12);
}

TEST(Breakdown, HandFixture) {
  // columns: base "b", novel "n"
  const std::vector<std::string> classes = {"b", "n"};
  std::vector<ClipMeta> meta(4);
  meta[0] = {{"n"}, 1, {{"n", -5.0}}};
  meta[1] = {{"n"}, 1, {{"n", -4.0}}};
  meta[2] = {{"b", "n"}, 2, {{"b", 20.0}, {"n", 10.0}}};
  meta[3] = {{"b"}, 1, {{"b", 20.0}}};
  Eigen::MatrixXd y(4, 2), s(4, 2);
  y << 0, 1, 0, 1, 1, 1, 1, 0;
  s << 0.2, 0.9,  //
      0.1, 0.3,   //
      0.7, 0.8,   //
      0.4, 0.6;
  const auto b = compute_breakdown(s, y, meta, classes, 1);
  // SNR -5 bucket: novel events in clips 0 and 1, one detected
  EXPECT_EQ(b.snr_novel_events[0], 2u);
  EXPECT_DOUBLE_EQ(*b.snr_novel_recall[0], 0.5);
  EXPECT_DOUBLE_EQ(*b.snr_novel_recall[3], 1.0);
  EXPECT_FALSE(b.snr_novel_recall[1].has_value());
  // base: clip 2 detected, clip 3 missed, both at 20 dB
  EXPECT_DOUBLE_EQ(*b.snr_base_recall[5], 0.5);
  EXPECT_FALSE(b.snr_base_recall[0].has_value());
  // polyphony 1: clips 0, 1, 3. novel tp=1 fp=1 fn=1; base tp=0 fn=1
  EXPECT_EQ(b.poly_clips[0], 3u);
  EXPECT_DOUBLE_EQ(*b.poly_novel_f[0], 0.5);
  EXPECT_DOUBLE_EQ(*b.poly_base_f[0], 0.0);
  EXPECT_DOUBLE_EQ(*b.poly_novel_f[1], 1.0);
  EXPECT_FALSE(b.poly_novel_f[2].has_value());
  EXPECT_EQ(b.poly_clips[3], 0u);
}

TEST(Breakdown, MonophonicOnlyFillsFirstBucket) {
  std::vector<ClipMeta> meta = {{{"a"}, 1, {{"a", 0.0}}}, {{"b"}, 1, {{"b", 15.0}}}};
  Eigen::MatrixXd y(2, 2), s(2, 2);
  y << 1, 0, 0, 1;
  s << 0.9, 0.1, 0.1, 0.9;
  const auto b = compute_breakdown(s, y, meta, {"a", "b"}, 1);
  EXPECT_TRUE(b.poly_base_f[0] && b.poly_novel_f[0]);
  for (size_t k = 1; k < kPolyphonyBuckets; ++k) EXPECT_FALSE(b.poly_base_f[k] || b.poly_novel_f[k]);
  size_t events = 0;
  for (size_t k = 0; k < kSnrBuckets; ++k) events += b.snr_base_events[k] + b.snr_novel_events[k];
  EXPECT_EQ(events, 2u);
}

TEST(Protocol, PrototypeAndNeutralGeneratorAgree) {
  const auto& w = small_world();
  const auto gen = init_generator(w.base);
  ProtocolConfig cfg;
  cfg.iterations = 5;
  cfg.seed = 3;
  const auto proto = run_protocol(w.base, nullptr, stores_of(w.world), cfg);
  cfg.method = Method::kDfsl;
  const auto dfsl = run_protocol(w.base, &gen, stores_of(w.world), cfg);
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(proto.iterations[i].novel_f, dfsl.iterations[i].novel_f);
    EXPECT_EQ(proto.iterations[i].class_f, dfsl.iterations[i].class_f);
  }
}

TEST(Protocol, DeterministicAcrossRunsAndJobs) {
  const auto& w = small_world();
  for (Method m : {Method::kProto, Method::kLr}) {
    ProtocolConfig cfg;
    cfg.method = m;
    cfg.iterations = 4;
    cfg.seed = 9;
    cfg.lr.n_negatives = 100;
    const std::string a = report_to_json(run_protocol(w.base, nullptr, stores_of(w.world), cfg)).dump();
    const std::string b = report_to_json(run_protocol(w.base, nullptr, stores_of(w.world), cfg)).dump();
    cfg.jobs = 3;
    const std::string c = report_to_json(run_protocol(w.base, nullptr, stores_of(w.world), cfg)).dump();
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
  }
}

TEST(Protocol, IterationsDrawDifferentSupports) {
  const auto& w = small_world();
  ProtocolConfig cfg;
  cfg.iterations = 6;
  cfg.criteria.polyphony = PolyphonyMode::kPolyphonic;
  const auto r = run_protocol(w.base, nullptr, stores_of(w.world), cfg);
  std::set<double> distinct;
  for (const auto& it : r.iterations) distinct.insert(it.novel_f);
  EXPECT_GT(distinct.size(), 1u);
}

TEST(Protocol, NovelClassOrderDoesNotMatter) {
  const auto& w = small_world();
  ProtocolConfig cfg;
  cfg.iterations = 3;
  cfg.novel_classes = w.world.novel_test_classes;
  const auto a = run_protocol(w.base, nullptr, stores_of(w.world), cfg);
  std::reverse(cfg.novel_classes.begin(), cfg.novel_classes.end());
  const auto b = run_protocol(w.base, nullptr, stores_of(w.world), cfg);
  EXPECT_NEAR(a.novel_f.mean, b.novel_f.mean, 1e-12);
  EXPECT_EQ(a.base_f.mean, b.base_f.mean);
}

TEST(Protocol, ColumnPermutationLeavesMeanUnchanged) {
  Rng rng(4);
  Eigen::MatrixXd s(30, 5), y(30, 5);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    s.data()[i] = rng.uniform();
    y.data()[i] = rng.uniform() < 0.3;
  }
  const std::vector<int> perm = {4, 2, 0, 3, 1};
  Eigen::MatrixXd ps(30, 5), py(30, 5);
  for (int c = 0; c < 5; ++c) {
    ps.col(c) = s.col(perm[c]);
    py.col(c) = y.col(perm[c]);
  }
  EXPECT_NEAR(mean_f(f_measure(s, y)), mean_f(f_measure(ps, py)), 1e-12);
}

TEST(Protocol, SupportsAreExcludedFromTest) {
  const auto& w = small_world();
  ProtocolConfig cfg;
  cfg.iterations = 2;
  cfg.criteria.n = 4;
  const auto r = run_protocol(w.base, nullptr, stores_of(w.world), cfg);
  for (const auto& it : r.iterations) {
    EXPECT_LE(it.test_clips, w.world.base_test.size() + w.world.novel_test.size() - 4);
    EXPECT_GE(it.test_clips, w.world.base_test.size() + w.world.novel_test.size() - 4 * 3);
  }
}

TEST(Protocol, InsufficientSupportIsReported) {
  const auto& w = small_world();
  ProtocolConfig cfg;
  cfg.criteria.n = 1000;
  try {
    run_protocol(w.base, nullptr, stores_of(w.world), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient conforming clips"), std::string::npos);
  }
}

TEST(Protocol, OracleEmbeddingsGivePerfectNovelF) {
  // simplex prototypes: every pair of distinct classes has cosine -1/(K-1)
  const int base_k = 6, novel_k = 3, k = base_k + novel_k, dim = 12;
  Eigen::MatrixXd proto = Eigen::MatrixXd::Identity(k, dim);
  proto.leftCols(k).rowwise() -= Eigen::RowVectorXd::Constant(k, 1.0 / k);
  proto = normalize_rows(proto);
  BaseClassifier base;
  base.weights = proto.topRows(base_k);
  EmbeddingStore base_test(dim), novel(dim);
  for (int c = 0; c < k; ++c) {
    const std::string name = (c < base_k ? "b" : "n") + std::to_string(c);
    if (c < base_k) base.classes.push_back(name);
    for (int i = 0; i < 12; ++i) {
      auto& store = c < base_k ? base_test : novel;
      store.add(name + "_" + std::to_string(i), proto.row(c).transpose().eval(), ClipMeta{{name}, 1, {{name, 0.0}}});
    }
  }
  ProtocolConfig cfg;
  cfg.iterations = 3;
  for (Method m : {Method::kProto, Method::kDfsl}) {
    cfg.method = m;
    const auto gen = init_generator(base);
    const auto r = run_protocol(base, &gen, {&novel, &base_test, nullptr}, cfg);
    EXPECT_EQ(r.novel_f.mean, 1.0);
    EXPECT_EQ(r.base_f.mean, 1.0);
  }
}

TEST(Protocol, LrNegativeTuningPicksFromGrid) {
  const auto& w = small_world();
  ProtocolConfig cfg;
  cfg.iterations = 2;
  const auto t = tune_lr_negatives(w.base, {&w.world.novel_val, &w.world.base_val, &w.world.base_train}, cfg);
  // 400 base-train clips: 500, 1000, ... collapse to 400
  ASSERT_EQ(t.scores.size(), 2u);
  EXPECT_EQ(t.scores[0].first, 100u);
  EXPECT_EQ(t.scores[1].first, 400u);
  EXPECT_TRUE(t.best == 100u || t.best == 400u);
}

TEST(Report, JsonCsvAndSvg) {
  const auto& w = small_world();
  ProtocolConfig cfg;
  cfg.iterations = 3;
  const auto r = run_protocol(w.base, nullptr, stores_of(w.world), cfg);
  const json j = report_to_json(r);
  EXPECT_EQ(j["config"]["method"], "proto");
  EXPECT_EQ(j["iterations"].size(), 3u);
  const auto back = report_from_json(j);
  EXPECT_EQ(back.novel_f.mean, r.novel_f.mean);
  EXPECT_EQ(back.poly_novel_f, r.poly_novel_f);
  EXPECT_EQ(report_to_json(back)["breakdown"], j["breakdown"]);

  const fs::path dir = fs::temp_directory_path() / "polyfs_report_test";
  fs::remove_all(dir);
  write_report_csv(dir, r);
  write_report_svg(dir, r);
  for (const char* f : {"summary.csv", "classes.csv", "polyphony.csv", "snr.csv", "iterations.csv", "polyphony.svg",
                        "snr.svg"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "snr.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "snr_db,base_recall,novel_recall");
}

TEST(World, ShapesAndDeterminism) {
  WorldConfig wc;
  wc.base_train_clips = 200;
  wc.seed = 17;
  const auto a = generate_world(wc);
  const auto b = generate_world(wc);
  EXPECT_EQ(a.base_train, b.base_train);
  EXPECT_EQ(a.novel_test, b.novel_test);
  EXPECT_EQ(a.base_classes.size(), 20u);
  EXPECT_EQ(a.novel_test.dim(), 64u);
  for (size_t i = 0; i < a.base_train.size(); ++i) {
    const auto& m = a.base_train.meta(i);
    EXPECT_GE(m.polyphony, 1);
    EXPECT_LE(m.polyphony, 4);
    EXPECT_EQ(m.labels.size(), static_cast<size_t>(m.polyphony));
    for (const auto& l : m.labels) EXPECT_EQ(l.rfind("base", 0), 0u);
    EXPECT_NEAR(a.base_train.vector(i).norm(), 1.0, 1e-6);
  }
  wc.seed = 18;
  EXPECT_FALSE(generate_world(wc).base_train == a.base_train);
}

TEST(World, EpisodicTrainingLowersHeldOutLoss) {
  WorldConfig wc;
  wc.seed = 23;
  const auto w = generate_world(wc);
  BaseTrainConfig bc;
  bc.seed = 1;
  const auto base = train_base(w.base_train, &w.base_val, bc).classifier;
  const auto init = init_generator(base);
  EpisodicConfig ec;
  ec.iterations = 200;
  ec.seed = 2;
  const auto trained = dfsl_train_episodic(init, base, w.base_train, ec).generator;

  EpisodicConfig held = ec;
  held.seed = 999;
  const auto eligible = episodic_eligible(base, w.base_train, held.criteria, nullptr);
  Rng rng(held.seed);
  double before = 0.0, after = 0.0;
  for (int e = 0; e < 30; ++e) {
    const auto ep = sample_episode(base, w.base_train, eligible, held, rng);
    before += episode_loss(init, base, ep);
    after += episode_loss(trained, base, ep);
  }
  EXPECT_LT(after, before);
}
