#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "../scene_fixtures.hpp"
#include "../test_util.hpp"
#include "polyfs/scene/dataset.hpp"
#include "polyfs/scene/manifest.hpp"
#include "polyfs/scene/render.hpp"
#include "polyfs/scene/spec.hpp"
#include "polyfs/scene/split.hpp"

using namespace polyfs;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("polyfs_scene_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SourceManifest labelled(size_t n_classes, size_t per_class) {
  SourceManifest m;
  for (size_t k = 0; k < n_classes; ++k) {
    for (size_t j = 0; j < per_class; ++j) {
      m.entries.push_back({"f" + std::to_string(k) + "_" + std::to_string(j), "c" + std::to_string(k), 1.0});
    }
  }
  return m;
}

}  // namespace

TEST(IngestManifest, FiltersLongClips) {
  const fs::path dir = temp_dir("ingest");
  for (auto name : {"a.wav", "b.wav", "c.wav"}) std::ofstream(dir / name) << "x";
  std::ofstream(dir / "m.csv") << "file_path,class_label,duration_s\na.wav,dog,1.5\nb.wav,dog,5.2\nc.wav,cat,3.9\n";
  const IngestResult r = ingest_manifest(dir / "m.csv");
  EXPECT_EQ(r.manifest.entries.size(), 2u);
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.manifest.entries[0].file_path, (dir / "a.wav").string());
  EXPECT_EQ(r.manifest.classes(), (std::vector<std::string>{"cat", "dog"}));
}

TEST(IngestManifest, Errors) {
  auto message = [](const std::string& csv, ManifestOptions opts = {.check_files = false}) {
    std::istringstream in(csv);
    try {
      ingest_manifest(in, ".", opts);
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_EQ(message(""), "empty manifest");
  EXPECT_EQ(message("file_path,class_label,duration_s\n"), "empty manifest");
  EXPECT_NE(message("file_path,class_label,duration_s\na,x,1\na,y,2\n").find("duplicate entry"), std::string::npos);
  EXPECT_NE(message("file_path,class_label,duration_s\na,x\n").find("malformed row"), std::string::npos);
  EXPECT_NE(message("file_path,class_label,duration_s\na,x,abc\n").find("malformed row"), std::string::npos);
  EXPECT_NE(message("file_path,class_label,duration_s\nnope.wav,x,1\n", ManifestOptions{}).find("missing file"),
            std::string::npos);
}

TEST(PartitionClasses, DefaultSizes) {
  Rng rng(1);
  const ClassSplit s = partition_classes(labelled(89, 20), {59, 15, 15}, rng);
  EXPECT_EQ(s.base.size(), 59u);
  EXPECT_EQ(s.novel_val.size(), 15u);
  EXPECT_EQ(s.novel_test.size(), 15u);
  std::set<std::string> all(s.base.begin(), s.base.end());
  all.insert(s.novel_val.begin(), s.novel_val.end());
  all.insert(s.novel_test.begin(), s.novel_test.end());
  EXPECT_EQ(all.size(), 89u);
  // Folds partition the clips of the chosen classes.
  size_t total = 0;
  std::set<std::string> paths;
  for (const auto& [fold, files] : s.folds) {
    total += files.size();
    paths.insert(files.begin(), files.end());
  }
  EXPECT_EQ(total, 89u * 20u);
  EXPECT_EQ(paths.size(), total);
}

TEST(PartitionClasses, SmallAndInsufficient) {
  Rng rng(2);
  const ClassSplit s = partition_classes(labelled(10, 20), {8, 1, 1}, rng);
  EXPECT_EQ(s.base.size(), 8u);
  EXPECT_EQ(s.novel_val.size(), 1u);
  EXPECT_EQ(s.novel_test.size(), 1u);
  EXPECT_NE(s.novel_val[0], s.novel_test[0]);
  EXPECT_THROW(partition_classes(labelled(5, 20), {59, 15, 15}, rng), Error);
  // Classes below min_clips are not eligible.
  EXPECT_THROW(partition_classes(labelled(10, 19), {8, 1, 1}, rng), Error);
}

TEST(PartitionClasses, DeterministicAndRoundTrips) {
  Rng a(7), b(7);
  const auto m = labelled(30, 21);
  const ClassSplit s1 = partition_classes(m, {20, 5, 5}, a);
  const ClassSplit s2 = partition_classes(m, {20, 5, 5}, b);
  EXPECT_EQ(split_to_json(s1), split_to_json(s2));
  EXPECT_EQ(split_to_json(split_from_json(split_to_json(s1))), split_to_json(s1));
}

TEST(ClassCount, ExactProbabilities) {
  const auto p = class_count_probabilities();
  EXPECT_NEAR(p[0], 60.0 / 137.0, 1e-15);
  EXPECT_NEAR(p[4], 12.0 / 137.0, 1e-15);
  EXPECT_NEAR(p[0] + p[1] + p[2] + p[3] + p[4], 1.0, 1e-15);
}

TEST(ClassCount, EmpiricalFrequencies) {
  Rng rng(123);
  std::array<int, 5> counts{};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[sample_class_count(rng) - 1]++;
  const auto p = class_count_probabilities();
  for (int c = 0; c < 5; ++c) EXPECT_NEAR(counts[c] / double(draws), p[c], 0.01) << c + 1;
}

TEST(SampleSpec, InvariantsAndDeterminism) {
  const auto corpus = polyfs::testing::tone_corpus(8, 4, 16000, 1);
  const auto classes = corpus.manifest.classes();
  const SceneConfig cfg;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Rng r1(seed), r2(seed);
    const auto spec = sample_spec(corpus.manifest, classes, cfg, r1, "s");
    EXPECT_EQ(spec, sample_spec(corpus.manifest, classes, cfg, r2, "s"));
    ASSERT_GE(spec.c, 1);
    ASSERT_LE(spec.c, 5);
    ASSERT_EQ(spec.events.size(), static_cast<size_t>(spec.c));
    std::set<std::string> seen;
    for (const auto& e : spec.events) {
      EXPECT_TRUE(seen.insert(e.class_label).second);
      EXPECT_GE(e.pitch_semitones, -2.0);
      EXPECT_LE(e.pitch_semitones, 2.0);
      EXPECT_GE(e.stretch_ratio, 0.8);
      EXPECT_LE(e.stretch_ratio, 1.2);
      EXPECT_NE(std::find(kSnrGridDb.begin(), kSnrGridDb.end(), e.snr_db), kSnrGridDb.end());
      EXPECT_GE(e.onset_s, 0.0);
      EXPECT_LE(e.onset_s + e.event_duration_s, 10.0 + 1e-12);
    }
  }
}

TEST(SampleSpec, OnsetRangeForLongEvent) {
  SourceManifest m;
  for (int k = 0; k < 5; ++k) m.entries.push_back({"f" + std::to_string(k), "c" + std::to_string(k), 4.0});
  SceneConfig cfg;
  cfg.stretch_min = cfg.stretch_max = 1.2;
  double max_onset = 0.0;
  for (uint64_t seed = 0; seed < 2000; ++seed) {
    Rng rng(seed);
    for (const auto& e : sample_spec(m, m.classes(), cfg, rng).events) {
      EXPECT_NEAR(e.event_duration_s, 4.8, 1e-12);
      EXPECT_LE(e.onset_s, 5.2 + 1e-12);
      max_onset = std::max(max_onset, e.onset_s);
    }
  }
  EXPECT_GT(max_onset, 5.0);
}

TEST(SampleSpec, Errors) {
  Rng rng(1);
  const auto m = labelled(4, 3);
  EXPECT_THROW(sample_spec(m, m.classes(), SceneConfig{}, rng), Error);
  const auto m5 = labelled(5, 3);
  auto classes = m5.classes();
  classes.push_back("ghost");
  bool threw = false;
  for (int i = 0; i < 200 && !threw; ++i) {
    try {
      sample_spec(m5, classes, SceneConfig{}, rng);
    } catch (const Error&) {
      threw = true;
    }
  }
  EXPECT_TRUE(threw);
}

class RenderTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_.sample_rate = 16000;
    corpus_ = polyfs::testing::tone_corpus(6, 3, cfg_.sample_rate, 9);
  }
  SoundscapeSpec spec(uint64_t seed) {
    Rng rng(seed);
    return sample_spec(corpus_.manifest, corpus_.manifest.classes(), cfg_, rng, "t");
  }
  SceneConfig cfg_;
  polyfs::testing::MemoryCorpus corpus_;
};

TEST_F(RenderTest, NoEventsIsPureBackground) {
  SoundscapeSpec s = spec(1);
  s.events.clear();
  s.c = 0;
  const auto scene = render(s, corpus_.loader(), cfg_);
  Rng rng(s.seed);
  EXPECT_EQ(scene.audio, brownian_noise(10.0, cfg_.sample_rate, db_to_amplitude(-30.0), rng));
  EXPECT_EQ(scene.annotation.applied_mix_gain, 1.0);
}

TEST_F(RenderTest, ZeroDbEventMatchesBackgroundLevel) {
  SoundscapeSpec s = spec(2);
  s.events.resize(1);
  s.c = 1;
  s.events[0].snr_db = 0.0;
  const auto stems = render_stems(s, corpus_.loader(), cfg_);
  EXPECT_NEAR(rms(stems.events[0]) / rms(stems.background), 1.0, 1e-6);
}

TEST_F(RenderTest, StemSnrExactForRandomScenes) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const auto stems = render_stems(spec(seed), corpus_.loader(), cfg_);
    const auto& events = stems.annotation.spec.events;
    for (size_t i = 0; i < events.size(); ++i) {
      const double ratio = rms(stems.events[i]) / rms(stems.background);
      EXPECT_NEAR(ratio / db_to_amplitude(events[i].snr_db), 1.0, 1e-6);
    }
  }
}

TEST_F(RenderTest, AnnotationsMatchStemEnergy) {
  for (uint64_t seed = 30; seed < 40; ++seed) {
    const auto stems = render_stems(spec(seed), corpus_.loader(), cfg_);
    const auto& events = stems.annotation.spec.events;
    for (size_t i = 0; i < events.size(); ++i) {
      // Place the stem on the scene timeline and locate its energy.
      std::vector<double> placed(stems.background.size(), 0.0);
      for (size_t k = 0; k < stems.events[i].size(); ++k) placed[stems.onset_samples[i] + k] = stems.events[i].samples[k];
      const auto [a, b] = polyfs::testing::active_span(placed, 1e-4 * peak(placed));
      EXPECT_NEAR(a / 16000.0, events[i].onset_s, 0.01);
      EXPECT_NEAR((b + 1) / 16000.0, events[i].onset_s + events[i].event_duration_s, 0.01);
    }
  }
}

TEST_F(RenderTest, DeterministicAndOrderInvariant) {
  const SoundscapeSpec s = spec(5);
  const auto a = render(s, corpus_.loader(), cfg_);
  const auto b = render(s, corpus_.loader(), cfg_);
  EXPECT_EQ(encode_wav(a.audio), encode_wav(b.audio));
  SoundscapeSpec reversed = s;
  std::reverse(reversed.events.begin(), reversed.events.end());
  EXPECT_EQ(render(reversed, corpus_.loader(), cfg_).audio, a.audio);
}

TEST_F(RenderTest, PeakGuardScalesWholeMix) {
  SoundscapeSpec s = spec(6);
  s.background_rms_dbfs = -3.0;  // forces clipping
  for (auto& e : s.events) e.snr_db = 20.0;
  const auto stems = render_stems(s, corpus_.loader(), cfg_);
  const auto scene = mix_stems(stems);
  EXPECT_LT(scene.annotation.applied_mix_gain, 1.0);
  EXPECT_NEAR(peak(scene.audio.samples), 1.0, 1e-12);
  // Background residual equals the background stem times the same gain.
  AudioBuffer residual = scene.audio;
  for (size_t i = 0; i < stems.events.size(); ++i) {
    mix_into(residual, stems.events[i], stems.onset_samples[i] / 16000.0, -scene.annotation.applied_mix_gain);
  }
  EXPECT_NEAR(rms(residual) / (rms(stems.background) * scene.annotation.applied_mix_gain), 1.0, 1e-9);
}

TEST_F(RenderTest, AnnotationJsonRoundTrip) {
  const auto scene = render(spec(8), corpus_.loader(), cfg_);
  const json j = annotation_to_json(scene.annotation);
  const auto back = annotation_from_json(j);
  EXPECT_EQ(back.spec, scene.annotation.spec);
  EXPECT_EQ(annotation_to_json(back), j);
  for (auto key : {"id", "duration_s", "background", "applied_mix_gain", "events"}) EXPECT_TRUE(j.contains(key));
}

TEST(GenerateDataset, CountsAndReproducibility) {
  SceneConfig cfg;
  cfg.sample_rate = 8000;
  const auto corpus = polyfs::testing::tone_corpus(6, 3, cfg.sample_rate, 4);
  const auto classes = corpus.manifest.classes();
  const fs::path a = temp_dir("gen_a"), b = temp_dir("gen_b"), z = temp_dir("gen_zero");
  const auto sa = generate_dataset(corpus.manifest, classes, 10, a, 7, cfg, corpus.loader());
  DatasetOptions parallel;
  parallel.jobs = 3;
  const auto sb = generate_dataset(corpus.manifest, classes, 10, b, 7, cfg, corpus.loader(), parallel);
  EXPECT_EQ(sa.written, 10u);
  EXPECT_EQ(sb.written, 10u);
  EXPECT_TRUE(sa.failures.empty());
  EXPECT_EQ(slurp(a / "index.jsonl"), slurp(b / "index.jsonl"));
  EXPECT_EQ(read_jsonl(a / "index.jsonl").size(), 10u);
  for (size_t i = 0; i < 10; ++i) {
    const std::string f = scene_id("scene", i) + ".wav";
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(generate_dataset(corpus.manifest, classes, 0, z, 7, cfg, corpus.loader()).written, 0u);
  EXPECT_TRUE(read_jsonl(z / "index.jsonl").empty());
}

TEST(GenerateDataset, ReportsPerSceneFailures) {
  SceneConfig cfg;
  cfg.sample_rate = 8000;
  auto corpus = polyfs::testing::tone_corpus(5, 2, cfg.sample_rate, 4);
  corpus.audio->erase(corpus.manifest.entries[0].file_path);
  const fs::path dir = temp_dir("gen_fail");
  const auto s = generate_dataset(corpus.manifest, corpus.manifest.classes(), 20, dir, 3, cfg, corpus.loader());
  EXPECT_GT(s.failures.size(), 0u);
  EXPECT_EQ(s.written + s.failures.size(), 20u);
  EXPECT_EQ(read_jsonl(dir / "index.jsonl").size(), s.written);
}
