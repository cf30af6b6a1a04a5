// polyfs command-line driver: scene synthesis, clip extraction, features,
// training and few-shot evaluation. Every subcommand writes its outputs under
// --out together with <subcommand>.manifest.json (config echo, seed and the
// list of produced files).

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "polyfs/clips/extract.hpp"
#include "polyfs/embed/pool.hpp"
#include "polyfs/embed/store.hpp"
#include "polyfs/eval/protocol.hpp"
#include "polyfs/eval/report.hpp"
#include "polyfs/fewshot/checkpoint.hpp"
#include "polyfs/scene/dataset.hpp"
#include "polyfs/scene/demo_corpus.hpp"
#include "polyfs/scene/split.hpp"
#include "polyfs/util/jsonl.hpp"
#include "polyfs/world/synthetic.hpp"

namespace fs = std::filesystem;
using namespace polyfs;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitBadArgument = 3,
  kExitMissingInput = 4,
  kExitValidation = 5,
  kExitFormat = 6,
  kExitIo = 7,
  kExitInternal = 70,
};

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidArgument: return kExitBadArgument;
    case ErrorKind::kNotFound: return kExitMissingInput;
    case ErrorKind::kValidation: return kExitValidation;
    case ErrorKind::kFormat: return kExitFormat;
    case ErrorKind::kIo: return kExitIo;
  }
  return kExitInternal;
}

void report_error(const std::string& kind, int code, const std::string& sub, const std::string& message) {
  json line = {{"error", kind}, {"exit_code", code}, {"subcommand", sub}, {"message", message}};
  std::cerr << line.dump() << std::endl;
}

std::string fnv1a64(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

// Option values as given (or defaulted); --jobs is left out since it never
// changes results.
json config_echo(const CLI::App& sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help" || name == "jobs") continue;
    if (opt->get_type_size() == 0) {
      cfg[name] = opt->count() > 0;
      continue;
    }
    const auto& res = opt->results();
    if (res.empty()) {
      cfg[name] = opt->get_default_str();
    } else if (opt->get_expected_max() > 1) {
      cfg[name] = res;
    } else {
      cfg[name] = res.back();
    }
  }
  return cfg;
}

struct RunContext {
  std::string subcommand;
  fs::path out;
  json config;
  uint64_t seed = 0;
  std::vector<fs::path> artifacts;
  std::vector<std::string> warnings;

  fs::path add(const fs::path& rel) {
    artifacts.push_back(rel);
    return out / rel;
  }

  json echo() const { return {{"subcommand", subcommand}, {"seed", seed}, {"config", config}, {"version", kVersion}}; }

  void finish() const {
    json files = json::array();
    for (const auto& rel : artifacts) {
      const fs::path p = out / rel;
      files.push_back({{"path", rel.generic_string()}, {"bytes", fs::file_size(p)}, {"fnv1a64", fnv1a64(p)}});
    }
    json m = echo();
    m["artifacts"] = files;
    m["warnings"] = warnings;
    write_json(out / (subcommand + ".manifest.json"), m);
  }
};

fs::path relative_to(const fs::path& p, const fs::path& base) {
  const fs::path rel = fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal());
  return rel.empty() ? p : rel;
}

EmbeddingStore load_store_checked(const std::string& path, const Eigen::VectorXd& center = {}) {
  require(!path.empty(), ErrorKind::kInvalidArgument, "store path is empty");
  require(fs::exists(path), ErrorKind::kNotFound, "missing input " + path);
  return centered(load_store(path), center);
}

TensorFile load_checkpoint(const std::string& path) {
  require(fs::exists(path), ErrorKind::kNotFound, "missing input " + path);
  return read_tensor_file(path);
}

// ---------------------------------------------------------------- options

struct Common {
  std::string out;
  uint64_t seed = 0;
  unsigned jobs = 1;
};

void add_common(CLI::App* sub, Common& c, bool seeded, bool parallel) {
  sub->add_option("--out", c.out, "Output directory")->required();
  if (seeded) sub->add_option("--seed", c.seed, "Master seed");
  if (parallel) sub->add_option("--jobs", c.jobs, "Worker threads (results do not depend on it)");
}

struct PrepOpts {
  Common common;
  std::string manifest;
  bool demo = false;
  size_t demo_classes = 20, demo_clips = 20;
  int demo_rate = 22050;
  size_t n_base = 59, n_val = 15, n_test = 15, min_clips = 20;
  double max_duration = 4.0;
};

struct SedOpts {
  Common common;
  std::string manifest, split_file, fold, encoding = "f32", snr_sampling = "discrete", prefix;
  size_t n = 0;
  int sample_rate = 44100;
  double duration = 10.0, bg_dbfs = -30.0;
};

struct ExtractOpts {
  Common common;
  std::string scenes;
  bool materialize = false;
};

struct FeatOpts {
  Common common;
  std::string clips;
  MelConfig mel{};
};

struct BaseOpts {
  Common common;
  std::string train, val;
  bool no_center = false;
  BaseTrainConfig cfg{};
};

struct DfslOpts {
  Common common;
  std::string base, train, poly = "mono", snr = "mixed", att_on = "example";
  EpisodicConfig cfg{};
  double att_scale = 10.0;
};

struct EvalOpts {
  Common common;
  std::string base, dfsl, novel, base_test, base_train, novel_val, base_val;
  std::string method = "proto", poly = "mono", snr = "mixed", test_poly = "all", negatives = "1000";
  size_t n = 5, iters = 100, tune_iters = 10;
  double threshold = 0.5;
  LRConfig lr{};
  bool svg = false;
};

struct ReportOpts {
  Common common;
  std::vector<std::string> inputs;
  bool svg = false;
};

struct WorldOpts {
  Common common;
  WorldConfig cfg{};
};

// ---------------------------------------------------------------- commands

void run_prep(const PrepOpts& o, RunContext& ctx) {
  fs::create_directories(ctx.out);
  require(o.demo != !o.manifest.empty(), ErrorKind::kInvalidArgument,
          "give exactly one of --manifest or --demo-corpus");
  fs::path manifest_path = o.manifest;
  if (o.demo) {
    DemoCorpusConfig dc;
    dc.n_classes = o.demo_classes;
    dc.clips_per_class = o.demo_clips;
    dc.sample_rate = o.demo_rate;
    dc.seed = stable_hash(ctx.seed, "demo-corpus");
    manifest_path = write_demo_corpus(ctx.out / "corpus", dc);
    for (const auto& e : fs::recursive_directory_iterator(ctx.out / "corpus")) {
      if (e.is_regular_file()) ctx.artifacts.push_back(relative_to(e.path(), ctx.out));
    }
    std::sort(ctx.artifacts.begin(), ctx.artifacts.end());
  }
  ManifestOptions mo;
  mo.max_duration_s = o.max_duration;
  auto ingest = ingest_manifest(manifest_path, mo);
  ctx.warnings.insert(ctx.warnings.end(), ingest.warnings.begin(), ingest.warnings.end());

  // paths are rewritten relative to the output directory
  SourceManifest local = ingest.manifest;
  std::map<std::string, std::string> rewrite;
  for (auto& e : local.entries) {
    const std::string rel = relative_to(e.file_path, ctx.out).generic_string();
    rewrite[e.file_path] = rel;
    e.file_path = rel;
  }
  Rng rng(stable_hash(ctx.seed, "split"));
  ClassSplit split = partition_classes(ingest.manifest, {o.n_base, o.n_val, o.n_test}, rng, o.min_clips);
  for (auto& [fold, paths] : split.folds) {
    for (auto& p : paths) p = rewrite.at(p);
  }
  write_manifest(ctx.add("sources.csv"), local);
  json sj = split_to_json(split);
  sj["provenance"] = ctx.echo();
  write_json(ctx.add("split.json"), sj);
}

void run_gen_sed(const SedOpts& o, RunContext& ctx) {
  const fs::path manifest_path = o.manifest;
  const fs::path split_path = o.split_file.empty() ? manifest_path.parent_path() / "split.json" : fs::path(o.split_file);
  require(fs::exists(manifest_path), ErrorKind::kNotFound, "missing input " + manifest_path.string());
  require(fs::exists(split_path), ErrorKind::kNotFound, "missing input " + split_path.string());
  ManifestOptions mo;
  mo.max_duration_s = std::numeric_limits<double>::infinity();
  const SourceManifest manifest = ingest_manifest(manifest_path, mo).manifest;
  ClassSplit split = split_from_json(read_json(split_path));
  for (auto& [fold, paths] : split.folds) {
    for (auto& p : paths) {
      const fs::path fp(p);
      p = (fp.is_relative() ? split_path.parent_path() / fp : fp).lexically_normal().string();
    }
  }
  const SourceManifest pool = split.pool(manifest, o.fold);
  const auto& classes = split.classes_for(o.fold == "base" ? "base-train" : o.fold);

  SceneConfig sc;
  sc.duration_s = o.duration;
  sc.sample_rate = o.sample_rate;
  sc.background_rms_dbfs = o.bg_dbfs;
  if (o.snr_sampling == "uniform") {
    sc.snr_sampling = SnrSampling::kUniform;
  } else {
    require(o.snr_sampling == "discrete", ErrorKind::kInvalidArgument, "unknown --snr-sampling " + o.snr_sampling);
  }
  DatasetOptions dopts;
  dopts.jobs = o.common.jobs;
  dopts.id_prefix = o.prefix.empty() ? (o.fold == "base" ? "base-train" : o.fold) : o.prefix;
  if (o.encoding == "pcm16") {
    dopts.encoding = WavEncoding::kPcm16;
  } else {
    require(o.encoding == "f32", ErrorKind::kInvalidArgument, "unknown --encoding " + o.encoding);
  }
  const auto summary = generate_dataset(pool, classes, o.n, ctx.out, ctx.seed, sc, wav_loader(sc.sample_rate), dopts);
  for (size_t i = 0; i < o.n; ++i) {
    const fs::path wav = scene_id(dopts.id_prefix, i) + ".wav";
    if (fs::exists(ctx.out / wav)) ctx.artifacts.push_back(wav);
  }
  ctx.artifacts.push_back("index.jsonl");
  ctx.warnings.insert(ctx.warnings.end(), summary.failures.begin(), summary.failures.end());
  if (!summary.failures.empty()) {
    ctx.finish();
    fail(ErrorKind::kValidation, std::to_string(summary.failures.size()) + " of " + std::to_string(o.n) +
                                     " scenes failed; first: " + summary.failures.front());
  }
}

void run_extract(const ExtractOpts& o, RunContext& ctx) {
  const fs::path scenes_dir = o.scenes;
  const fs::path index = scenes_dir / "index.jsonl";
  require(fs::exists(index), ErrorKind::kNotFound, "missing input " + index.string());
  fs::create_directories(ctx.out);
  const auto records = read_jsonl(index);
  std::vector<std::vector<json>> per_scene(records.size());
  std::vector<std::vector<fs::path>> written(records.size());
  if (o.materialize) fs::create_directories(ctx.out / "clips");
  parallel_for(records.size(), o.common.jobs, [&](size_t i) {
    const SceneAnnotation ann = annotation_from_json(records[i]);
    const fs::path audio = scenes_dir / records[i].at("audio").get<std::string>();
    std::optional<AudioBuffer> scene;
    if (o.materialize) scene = read_wav(audio);
    for (const auto& clip : extract_clips(ann)) {
      json rec = clip_to_json(clip);
      rec["scene_audio"] = relative_to(audio, ctx.out).generic_string();
      if (scene) {
        const fs::path rel = fs::path("clips") / (clip.id + ".wav");
        write_wav(ctx.out / rel, clip_audio(*scene, clip));
        rec["audio"] = rel.generic_string();
        written[i].push_back(rel);
      }
      per_scene[i].push_back(std::move(rec));
    }
  });
  std::vector<json> rows;
  for (size_t i = 0; i < records.size(); ++i) {
    rows.insert(rows.end(), per_scene[i].begin(), per_scene[i].end());
    ctx.artifacts.insert(ctx.artifacts.end(), written[i].begin(), written[i].end());
  }
  write_jsonl(ctx.add("clips.jsonl"), rows);
}

void run_featurize(const FeatOpts& o, RunContext& ctx) {
  const fs::path clips_path = o.clips;
  require(fs::exists(clips_path), ErrorKind::kNotFound, "missing input " + clips_path.string());
  fs::create_directories(ctx.out);
  o.mel.validate();
  const auto rows = read_jsonl(clips_path);
  // group clips by scene audio so each scene is decoded once
  std::vector<std::string> scene_order;
  std::map<std::string, std::vector<size_t>> by_scene;
  for (size_t i = 0; i < rows.size(); ++i) {
    const std::string s = rows[i].at("scene_audio").get<std::string>();
    if (!by_scene.count(s)) scene_order.push_back(s);
    by_scene[s].push_back(i);
  }
  std::vector<Eigen::VectorXd> vecs(rows.size());
  std::vector<LabeledClip> clips(rows.size());
  parallel_for(scene_order.size(), o.common.jobs, [&](size_t k) {
    const auto& idx = by_scene.at(scene_order[k]);
    const AudioBuffer scene = read_wav(clips_path.parent_path() / scene_order[k]);
    for (size_t i : idx) {
      clips[i] = clip_from_json(rows[i]);
      vecs[i] = pool_embed(clip_audio(scene, clips[i]), o.mel);
    }
  });
  EmbeddingStore store(static_cast<size_t>(2 * o.mel.n_mels));
  store.attributes()["provenance"] = ctx.echo();
  store.attributes()["features"] = {{"kind", "logmel-mean-std"},
                                    {"sample_rate", o.mel.sample_rate},
                                    {"n_mels", o.mel.n_mels},
                                    {"win_ms", o.mel.win_ms},
                                    {"hop_ms", o.mel.hop_ms},
                                    {"fft_ms", o.mel.fft_ms}};
  for (size_t i = 0; i < rows.size(); ++i) {
    store.add(clips[i].id, vecs[i], ClipMeta{clips[i].labels, clips[i].polyphony, clips[i].event_snrs});
  }
  save_store(ctx.add("embeddings.emb"), store);
}

void run_train_base(const BaseOpts& o, RunContext& ctx) {
  EmbeddingStore train = load_store_checked(o.train);
  std::optional<EmbeddingStore> val;
  if (!o.val.empty()) val = load_store_checked(o.val);
  fs::create_directories(ctx.out);
  Eigen::VectorXd center;
  if (!o.no_center) {
    center = feature_center(train);
    train = centered(train, center);
    if (val) val = centered(*val, center);
  }
  BaseTrainConfig cfg = o.cfg;
  cfg.seed = ctx.seed;
  auto r = train_base(train, val ? &*val : nullptr, cfg);
  r.classifier.center = center;
  ctx.warnings.insert(ctx.warnings.end(), r.warnings.begin(), r.warnings.end());
  json extra = {{"provenance", ctx.echo()},
                {"train_loss", r.train_loss},
                {"val_f", r.val_f},
                {"best_epoch", r.best_epoch},
                {"warnings", r.warnings}};
  write_tensor_file(ctx.add("base.ckpt"), base_to_tensor(r.classifier, extra));
}

void run_train_dfsl(const DfslOpts& o, RunContext& ctx) {
  const BaseClassifier base = base_from_tensor(load_checkpoint(o.base), o.base);
  const EmbeddingStore train = centered(load_store_checked(o.train), base.center);
  fs::create_directories(ctx.out);
  EpisodicConfig cfg = o.cfg;
  cfg.seed = ctx.seed;
  cfg.criteria.polyphony = parse_polyphony_mode(o.poly);
  cfg.criteria.snr = parse_snr_band(o.snr);
  const auto r = dfsl_train_episodic(init_generator(base, o.att_scale, parse_attention_on(o.att_on)), base, train, cfg);
  ctx.warnings.insert(ctx.warnings.end(), r.warnings.begin(), r.warnings.end());
  json extra = {{"provenance", ctx.echo()}, {"episode_loss", r.loss}, {"warnings", r.warnings}};
  write_tensor_file(ctx.add("dfsl.ckpt"), generator_to_tensor(r.generator, base.classes, extra));
}

void run_eval(const EvalOpts& o, RunContext& ctx) {
  const BaseClassifier base = base_from_tensor(load_checkpoint(o.base), o.base);
  ProtocolConfig cfg;
  cfg.method = parse_method(o.method);
  cfg.criteria = {o.n, parse_polyphony_mode(o.poly), parse_snr_band(o.snr)};
  cfg.iterations = o.iters;
  cfg.threshold = o.threshold;
  cfg.seed = ctx.seed;
  cfg.jobs = o.common.jobs;
  cfg.lr = o.lr;
  cfg.test_polyphony = parse_test_polyphony(o.test_poly);

  std::optional<WeightGenerator> gen;
  if (cfg.method == Method::kDfsl) {
    require(!o.dfsl.empty(), ErrorKind::kInvalidArgument, "--method dfsl needs --dfsl");
    std::vector<std::string> gen_classes;
    gen = generator_from_tensor(load_checkpoint(o.dfsl), &gen_classes, o.dfsl);
    require(gen_classes == base.classes, ErrorKind::kValidation, "generator was trained for different base classes");
  }
  const EmbeddingStore novel = load_store_checked(o.novel, base.center);
  const EmbeddingStore base_test = load_store_checked(o.base_test, base.center);
  std::optional<EmbeddingStore> base_train;
  if (cfg.method == Method::kLr) {
    require(!o.base_train.empty(), ErrorKind::kInvalidArgument, "--method lr needs --base-train");
    base_train = load_store_checked(o.base_train, base.center);
  }
  fs::create_directories(ctx.out);

  json tuning;
  if (cfg.method == Method::kLr) {
    if (o.negatives == "tune") {
      require(!o.novel_val.empty() && !o.base_val.empty(), ErrorKind::kInvalidArgument,
              "--lr-negatives tune needs --novel-val and --base-val");
      const EmbeddingStore novel_val = load_store_checked(o.novel_val, base.center);
      const EmbeddingStore base_val = load_store_checked(o.base_val, base.center);
      ProtocolConfig tcfg = cfg;
      tcfg.iterations = o.tune_iters;
      tcfg.seed = stable_hash(ctx.seed, "tune");
      const auto t = tune_lr_negatives(base, {&novel_val, &base_val, &*base_train}, tcfg);
      cfg.lr.n_negatives = t.best;
      tuning = {{"best", t.best}, {"grid", json::array()}};
      for (const auto& [x, f] : t.scores) tuning["grid"].push_back({{"n_negatives", x}, {"novel_f", f}});
    } else {
      try {
        size_t used = 0;
        cfg.lr.n_negatives = std::stoul(o.negatives, &used);
        require(used == o.negatives.size(), ErrorKind::kInvalidArgument, "bad --lr-negatives " + o.negatives);
      } catch (const std::logic_error&) {
        fail(ErrorKind::kInvalidArgument, "bad --lr-negatives " + o.negatives);
      }
    }
  }

  const EvalReport report = run_protocol(base, gen ? &*gen : nullptr, {&novel, &base_test, base_train ? &*base_train : nullptr}, cfg);
  ctx.warnings.insert(ctx.warnings.end(), report.warnings.begin(), report.warnings.end());
  json j = report_to_json(report);
  j["provenance"] = ctx.echo();
  if (!tuning.is_null()) j["lr_tuning"] = tuning;
  write_json(ctx.add("report.json"), j);
  write_report_csv(ctx.out / "tables", report);
  for (const char* f : {"summary.csv", "classes.csv", "polyphony.csv", "snr.csv", "iterations.csv"}) {
    ctx.artifacts.push_back(fs::path("tables") / f);
  }
  if (o.svg) {
    write_report_svg(ctx.out / "plots", report);
    ctx.artifacts.push_back("plots/polyphony.svg");
    ctx.artifacts.push_back("plots/snr.svg");
  }
}

void run_report(const ReportOpts& o, RunContext& ctx) {
  fs::create_directories(ctx.out);
  std::ostringstream cmp;
  cmp << "report,method,n,poly,snr,test_polyphony,iterations,base_f,base_lo,base_hi,novel_f,novel_lo,novel_hi\n";
  for (size_t i = 0; i < o.inputs.size(); ++i) {
    require(fs::exists(o.inputs[i]), ErrorKind::kNotFound, "missing input " + o.inputs[i]);
    const EvalReport r = report_from_json(read_json(o.inputs[i]));
    const json& c = r.config;
    auto field = [&](const char* k) {
      const json& v = c.value(k, json());
      return v.is_string() ? v.get<std::string>() : v.dump();
    };
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", r.base_f.mean, r.base_f.lo, r.base_f.hi,
                  r.novel_f.mean, r.novel_f.lo, r.novel_f.hi);
    cmp << o.inputs[i] << ',' << field("method") << ',' << field("n") << ',' << field("poly") << ','
        << field("snr") << ',' << field("test_polyphony") << ',' << field("iterations") << ',' << buf << '\n';
    const fs::path sub = "report_" + std::to_string(i);
    write_report_csv(ctx.out / sub, r);
    for (const char* f : {"summary.csv", "classes.csv", "polyphony.csv", "snr.csv", "iterations.csv"}) {
      ctx.artifacts.push_back(sub / f);
    }
    if (o.svg) {
      write_report_svg(ctx.out / sub, r);
      ctx.artifacts.push_back(sub / "polyphony.svg");
      ctx.artifacts.push_back(sub / "snr.svg");
    }
  }
  std::ofstream out(ctx.add("comparison.csv"), std::ios::binary);
  out << cmp.str();
}

void run_world(const WorldOpts& o, RunContext& ctx) {
  fs::create_directories(ctx.out);
  WorldConfig cfg = o.cfg;
  cfg.seed = ctx.seed;
  const SyntheticWorld w = generate_world(cfg);
  const std::pair<const char*, const EmbeddingStore*> parts[] = {{"base-train.emb", &w.base_train},
                                                                  {"base-val.emb", &w.base_val},
                                                                  {"base-test.emb", &w.base_test},
                                                                  {"novel-val.emb", &w.novel_val},
                                                                  {"novel-test.emb", &w.novel_test}};
  for (const auto& [name, store] : parts) {
    EmbeddingStore copy = *store;
    copy.attributes()["provenance"] = ctx.echo();
    save_store(ctx.add(name), copy);
  }
  write_json(ctx.add("world.json"), {{"provenance", ctx.echo()},
                                     {"world", world_config_json(cfg)},
                                     {"base_classes", w.base_classes},
                                     {"novel_val_classes", w.novel_val_classes},
                                     {"novel_test_classes", w.novel_test_classes}});
}

void set_env_names(CLI::App& app) {
  for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; })) {
    for (CLI::Option* opt : sub->get_options()) {
      if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
      std::string env = "POLYFS_" + opt->get_lnames().front();
      for (auto& ch : env) ch = ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      opt->envname(env);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polyfs: polyphonic scene synthesis and few-shot evaluation toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  PrepOpts prep;
  auto* s_prep = app.add_subcommand("prep-sources", "Ingest a source manifest and split classes into folds");
  add_common(s_prep, prep.common, true, false);
  s_prep->add_option("--manifest", prep.manifest, "CSV with file_path,class_label,duration_s");
  s_prep->add_flag("--demo-corpus", prep.demo, "Synthesize a small tonal source corpus instead of --manifest");
  s_prep->add_option("--demo-classes", prep.demo_classes, "Demo corpus class count");
  s_prep->add_option("--demo-clips", prep.demo_clips, "Demo corpus clips per class");
  s_prep->add_option("--demo-rate", prep.demo_rate, "Demo corpus sample rate");
  s_prep->add_option("--n-base", prep.n_base, "Base classes");
  s_prep->add_option("--n-val", prep.n_val, "Novel validation classes");
  s_prep->add_option("--n-test", prep.n_test, "Novel test classes");
  s_prep->add_option("--min-clips", prep.min_clips, "Minimum clips for a class to be eligible");
  s_prep->add_option("--max-duration", prep.max_duration, "Clips this long or longer are skipped (s)");

  SedOpts sed;
  auto* s_sed = app.add_subcommand("gen-sed", "Render strongly labeled soundscapes for one fold");
  add_common(s_sed, sed.common, true, true);
  s_sed->add_option("--manifest", sed.manifest, "sources.csv written by prep-sources")->required();
  s_sed->add_option("--split-file", sed.split_file, "split.json (default: next to the manifest)");
  s_sed->add_option("--split", sed.fold, "Fold: base, base-train, base-val, base-test, novel-val, novel-test")
      ->required();
  s_sed->add_option("--n", sed.n, "Number of scenes")->required();
  s_sed->add_option("--sample-rate", sed.sample_rate, "Scene sample rate (Hz)");
  s_sed->add_option("--duration", sed.duration, "Scene duration (s)");
  s_sed->add_option("--bg-dbfs", sed.bg_dbfs, "Background RMS level (dBFS)");
  s_sed->add_option("--snr-sampling", sed.snr_sampling, "discrete (5 dB grid) or uniform");
  s_sed->add_option("--encoding", sed.encoding, "WAV sample format: f32 or pcm16");
  s_sed->add_option("--id-prefix", sed.prefix, "Scene id prefix (default: fold name)");

  ExtractOpts ext;
  auto* s_ext = app.add_subcommand("extract-clips", "Cut labeled one-second clips around every event");
  add_common(s_ext, ext.common, false, true);
  s_ext->add_option("--scenes", ext.scenes, "Directory written by gen-sed")->required();
  s_ext->add_flag("--materialize", ext.materialize, "Also write every clip as a WAV file");

  FeatOpts feat;
  auto* s_feat = app.add_subcommand("featurize", "Log-mel mean/std embeddings for extracted clips");
  add_common(s_feat, feat.common, false, true);
  s_feat->add_option("--clips", feat.clips, "clips.jsonl written by extract-clips")->required();
  s_feat->add_option("--feature-rate", feat.mel.sample_rate, "Analysis sample rate (Hz)");
  s_feat->add_option("--n-mels", feat.mel.n_mels, "Mel bands");
  s_feat->add_option("--win-ms", feat.mel.win_ms, "Window length (ms)");
  s_feat->add_option("--hop-ms", feat.mel.hop_ms, "Hop length (ms)");
  s_feat->add_option("--fft-ms", feat.mel.fft_ms, "FFT length (ms)");

  BaseOpts bo;
  auto* s_base = app.add_subcommand("train-base", "Train the base cosine classifier");
  add_common(s_base, bo.common, true, false);
  s_base->add_option("--train", bo.train, "Base-train embeddings")->required();
  s_base->add_option("--val", bo.val, "Base-val embeddings for early stopping");
  s_base->add_flag("--no-center", bo.no_center, "Use raw embeddings instead of centering on the base-train mean");
  s_base->add_option("--lr", bo.cfg.adam.lr, "Adam learning rate");
  s_base->add_option("--epochs", bo.cfg.max_epochs, "Maximum epochs");
  s_base->add_option("--patience", bo.cfg.patience, "Epochs without validation improvement before stopping");
  s_base->add_option("--batch", bo.cfg.batch_size, "Mini-batch size");
  s_base->add_option("--init-scale", bo.cfg.init_scale, "Initial cosine scale");
  s_base->add_option("--threshold", bo.cfg.threshold, "Decision threshold for validation F");

  DfslOpts dfo;
  auto* s_dfsl = app.add_subcommand("train-dfsl", "Episodic training of the few-shot weight generator");
  add_common(s_dfsl, dfo.common, true, false);
  s_dfsl->add_option("--base", dfo.base, "base.ckpt")->required();
  s_dfsl->add_option("--train", dfo.train, "Base-train embeddings")->required();
  s_dfsl->add_option("--iters", dfo.cfg.iterations, "Episodes");
  s_dfsl->add_option("--lr", dfo.cfg.adam.lr, "Adam learning rate");
  s_dfsl->add_option("--n", dfo.cfg.criteria.n, "Support examples per pseudo-novel class");
  s_dfsl->add_option("--poly", dfo.poly, "Support polyphony: mono or poly");
  s_dfsl->add_option("--snr", dfo.snr, "Support SNR band: low, high or mixed");
  s_dfsl->add_option("--pseudo-novel", dfo.cfg.pseudo_novel, "Pseudo-novel classes per episode");
  s_dfsl->add_option("--queries-per-class", dfo.cfg.queries_per_class, "Query positives per pseudo-novel class");
  s_dfsl->add_option("--base-queries", dfo.cfg.base_queries, "Additional random queries per episode");
  s_dfsl->add_option("--att-on", dfo.att_on, "Attention over each support example or their mean: example or mean");
  s_dfsl->add_option("--att-scale", dfo.att_scale, "Initial attention scale");

  EvalOpts ev;
  auto* s_eval = app.add_subcommand("eval", "Few-shot evaluation over repeated support draws");
  add_common(s_eval, ev.common, true, true);
  s_eval->add_option("--base", ev.base, "base.ckpt")->required();
  s_eval->add_option("--dfsl", ev.dfsl, "dfsl.ckpt (method dfsl)");
  s_eval->add_option("--novel", ev.novel, "Novel-test embeddings (supports and novel test clips)")->required();
  s_eval->add_option("--base-test", ev.base_test, "Base-test embeddings")->required();
  s_eval->add_option("--base-train", ev.base_train, "Base-train embeddings (LR negatives)");
  s_eval->add_option("--novel-val", ev.novel_val, "Novel-val embeddings (LR negative tuning)");
  s_eval->add_option("--base-val", ev.base_val, "Base-val embeddings (LR negative tuning)");
  s_eval->add_option("--method", ev.method, "proto, dfsl or lr");
  s_eval->add_option("--n", ev.n, "Support examples per novel class");
  s_eval->add_option("--poly", ev.poly, "Support polyphony: mono or poly");
  s_eval->add_option("--snr", ev.snr, "Support SNR band: low, high or mixed");
  s_eval->add_option("--test-poly", ev.test_poly, "Restrict the test mixture: all, mono or poly");
  s_eval->add_option("--iters", ev.iters, "Evaluation iterations");
  s_eval->add_option("--threshold", ev.threshold, "Decision threshold");
  s_eval->add_option("--lr-negatives", ev.negatives, "LR negatives per class, or 'tune'");
  s_eval->add_option("--tune-iters", ev.tune_iters, "Iterations per candidate when tuning LR negatives");
  s_eval->add_option("--lr-c", ev.lr.l2_strength, "LR inverse regularization strength");
  s_eval->add_option("--lr-max-iter", ev.lr.max_iter, "LR iteration cap");
  s_eval->add_option("--lr-tol", ev.lr.tol, "LR gradient tolerance");
  s_eval->add_flag("--svg", ev.svg, "Also write SVG plots");

  ReportOpts ro;
  auto* s_report = app.add_subcommand("report", "Tabulate one or more eval reports");
  add_common(s_report, ro.common, false, false);
  s_report->add_option("--in", ro.inputs, "report.json files")->required();
  s_report->add_flag("--svg", ro.svg, "Also write SVG plots");

  WorldOpts wo;
  auto* s_world = app.add_subcommand("synth-world", "Synthetic embedding world for trend checks");
  add_common(s_world, wo.common, true, false);
  s_world->add_option("--dim", wo.cfg.dim, "Embedding dimension");
  s_world->add_option("--n-base", wo.cfg.n_base, "Base classes");
  s_world->add_option("--n-novel", wo.cfg.n_novel, "Classes per novel split");
  s_world->add_option("--background", wo.cfg.background, "Shared background component weight");
  s_world->add_option("--event-gain", wo.cfg.event_gain, "Class prototype weight at 0 dB");
  s_world->add_option("--noise", wo.cfg.noise, "Isotropic noise norm");
  s_world->add_option("--max-poly", wo.cfg.max_polyphony, "Largest clip polyphony");
  s_world->add_option("--base-train-clips", wo.cfg.base_train_clips, "Clips in base-train");
  s_world->add_option("--base-val-clips", wo.cfg.base_val_clips, "Clips in base-val");
  s_world->add_option("--base-test-clips", wo.cfg.base_test_clips, "Clips in base-test");
  s_world->add_option("--novel-val-clips", wo.cfg.novel_val_clips, "Clips in novel-val");
  s_world->add_option("--novel-test-clips", wo.cfg.novel_test_clips, "Clips in novel-test");

  set_env_names(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    report_error("usage", kExitUsage, subs.empty() ? "" : subs.front()->get_name(), e.what());
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  RunContext ctx;
  ctx.subcommand = sub->get_name();
  ctx.config = config_echo(*sub);
  try {
    auto start = [&](const Common& c) {
      ctx.out = c.out;
      ctx.seed = c.seed;
    };
    if (sub == s_prep) {
      start(prep.common);
      run_prep(prep, ctx);
    } else if (sub == s_sed) {
      start(sed.common);
      run_gen_sed(sed, ctx);
    } else if (sub == s_ext) {
      start(ext.common);
      run_extract(ext, ctx);
    } else if (sub == s_feat) {
      start(feat.common);
      run_featurize(feat, ctx);
    } else if (sub == s_base) {
      start(bo.common);
      run_train_base(bo, ctx);
    } else if (sub == s_dfsl) {
      start(dfo.common);
      run_train_dfsl(dfo, ctx);
    } else if (sub == s_eval) {
      start(ev.common);
      run_eval(ev, ctx);
    } else if (sub == s_report) {
      start(ro.common);
      run_report(ro, ctx);
    } else if (sub == s_world) {
      start(wo.common);
      run_world(wo, ctx);
    }
    ctx.finish();
    for (const auto& w : ctx.warnings) std::cerr << "warning: " << w << '\n';
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    report_error(std::string(to_string(e.kind())), code, ctx.subcommand, e.what());
    return code;
  } catch (const json::exception& e) {
    report_error("format", kExitFormat, ctx.subcommand, e.what());
    return kExitFormat;
  } catch (const fs::filesystem_error& e) {
    report_error("io", kExitIo, ctx.subcommand, e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    report_error("internal", kExitInternal, ctx.subcommand, e.what());
    return kExitInternal;
  }
  return kExitOk;
}
