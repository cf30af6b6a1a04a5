#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "polyfs/scene/render.hpp"
#include "polyfs/util/parallel.hpp"

namespace polyfs {

struct DatasetOptions {
  std::string id_prefix = "scene";
  unsigned jobs = 1;
  WavEncoding encoding = WavEncoding::kFloat32;
};

struct GenerateSummary {
  size_t written = 0;
  std::vector<std::string> failures;  // "<id>: <reason>"
};

inline std::string scene_id(const std::string& prefix, size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return prefix + "-" + buf;
}

/// Scene i is a pure function of (master_seed, i): its generator is seeded
/// with stable_hash(master_seed, i). Writes <id>.wav per scene and
/// index.jsonl with one annotation per successfully rendered scene.
inline GenerateSummary generate_dataset(const SourceManifest& pool, const std::vector<std::string>& classes,
                                        size_t n_scenes, const std::filesystem::path& out_dir,
                                        uint64_t master_seed, const SceneConfig& cfg, const SourceLoader& load,
                                        const DatasetOptions& opts = {}) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::optional<json>> records(n_scenes);
  std::vector<std::string> errors(n_scenes);
  parallel_for(n_scenes, opts.jobs, [&](size_t i) {
    const std::string id = scene_id(opts.id_prefix, i);
    try {
      Rng rng(stable_hash(master_seed, i));
      const SoundscapeSpec spec = sample_spec(pool, classes, cfg, rng, id);
      const RenderedScene scene = render(spec, load, cfg);
      const std::string file = id + ".wav";
      write_wav(out_dir / file, scene.audio, opts.encoding);
      json rec = annotation_to_json(scene.annotation);
      rec["audio"] = file;
      records[i] = std::move(rec);
    } catch (const std::exception& e) {
      errors[i] = id + ": " + e.what();
    }
  });
  GenerateSummary summary;
  std::vector<json> rows;
  for (size_t i = 0; i < n_scenes; ++i) {
    if (records[i]) {
      rows.push_back(std::move(*records[i]));
    } else {
      summary.failures.push_back(errors[i]);
    }
  }
  summary.written = rows.size();
  write_jsonl(out_dir / "index.jsonl", rows);
  return summary;
}

}  // namespace polyfs
