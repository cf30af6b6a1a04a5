#pragma once

// Synthetic source corpora for scene tests: in-memory clips served by a
// loader keyed on fake paths.

#include <map>
#include <memory>
#include <string>

#include "polyfs/scene/render.hpp"

namespace polyfs::testing {

struct MemoryCorpus {
  SourceManifest manifest;
  std::shared_ptr<std::map<std::string, AudioBuffer>> audio = std::make_shared<std::map<std::string, AudioBuffer>>();

  SourceLoader loader() const {
    auto store = audio;
    return [store](const std::string& path) {
      auto it = store->find(path);
      require(it != store->end(), ErrorKind::kNotFound, "no such clip " + path);
      return it->second;
    };
  }
};

/// n_classes classes, clips_per_class clips each: class k is a tone at
/// 200 * (k + 1) Hz with a decaying envelope, duration in [0.3, 3.5] s.
inline MemoryCorpus tone_corpus(size_t n_classes, size_t clips_per_class, int sr, uint64_t seed) {
  MemoryCorpus corpus;
  Rng rng(seed);
  for (size_t k = 0; k < n_classes; ++k) {
    for (size_t j = 0; j < clips_per_class; ++j) {
      const double dur = rng.uniform(0.3, 3.5);
      std::vector<double> x(static_cast<size_t>(dur * sr));
      const double f = 200.0 * static_cast<double>(k + 1) * rng.uniform(0.97, 1.03);
      for (size_t i = 0; i < x.size(); ++i) {
        const double t = static_cast<double>(i) / sr;
        x[i] = 0.3 * std::exp(-1.5 * t) * std::sin(2.0 * M_PI * f * t) + 0.01 * rng.normal();
      }
      const std::string path = "mem/c" + std::to_string(k) + "_" + std::to_string(j) + ".wav";
      (*corpus.audio)[path] = AudioBuffer(std::move(x), sr);
      corpus.manifest.entries.push_back({path, "class" + std::to_string(k), dur});
    }
  }
  return corpus;
}

}  // namespace polyfs::testing
