#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "polyfs/scene/manifest.hpp"
#include "polyfs/util/jsonl.hpp"
#include "polyfs/util/rng.hpp"

namespace polyfs {

inline constexpr std::array<double, 6> kSnrGridDb = {-5.0, 0.0, 5.0, 10.0, 15.0, 20.0};
inline constexpr int kMaxClassesPerScene = 5;

enum class SnrSampling { kDiscrete, kUniform };

struct SceneConfig {
  double duration_s = 10.0;
  int sample_rate = 44100;
  double background_rms_dbfs = -30.0;
  double pitch_range = 2.0;  // semitones, symmetric
  double stretch_min = 0.8;
  double stretch_max = 1.2;
  SnrSampling snr_sampling = SnrSampling::kDiscrete;
};

struct EventPlacement {
  std::string class_label;
  std::string source_file;
  double onset_s = 0.0;
  double event_duration_s = 0.0;
  double pitch_semitones = 0.0;
  double stretch_ratio = 1.0;
  double snr_db = 0.0;

  friend bool operator==(const EventPlacement&, const EventPlacement&) = default;
};

struct SoundscapeSpec {
  std::string id;
  double duration_s = 10.0;
  int c = 0;
  std::vector<EventPlacement> events;
  double background_rms_dbfs = -30.0;
  uint64_t seed = 0;  // drives the background noise

  friend bool operator==(const SoundscapeSpec&, const SoundscapeSpec&) = default;
};

/// P(c) proportional to 1/c for c = 1..5; entry i holds P(c = i + 1).
inline std::array<double, kMaxClassesPerScene> class_count_probabilities() {
  std::array<double, kMaxClassesPerScene> p{};
  double total = 0.0;
  for (int c = 1; c <= kMaxClassesPerScene; ++c) total += 1.0 / c;
  for (int c = 1; c <= kMaxClassesPerScene; ++c) p[c - 1] = (1.0 / c) / total;
  return p;
}

inline int sample_class_count(Rng& rng) {
  static const auto probs = class_count_probabilities();
  double u = rng.uniform();
  for (int c = 1; c < kMaxClassesPerScene; ++c) {
    if (u < probs[c - 1]) return c;
    u -= probs[c - 1];
  }
  return kMaxClassesPerScene;
}

inline double sample_snr(const SceneConfig& cfg, Rng& rng) {
  if (cfg.snr_sampling == SnrSampling::kUniform) {
    return rng.uniform(kSnrGridDb.front(), kSnrGridDb.back());
  }
  return kSnrGridDb[rng.index(kSnrGridDb.size())];
}

/// Draws c distinct classes from `classes`, one source clip per class from
/// `pool`, and per-event transforms, SNR and onset.
inline SoundscapeSpec sample_spec(const SourceManifest& pool, const std::vector<std::string>& classes,
                                  const SceneConfig& cfg, Rng& rng, std::string id = {}) {
  require(classes.size() >= static_cast<size_t>(kMaxClassesPerScene), ErrorKind::kValidation,
          "split needs at least 5 classes, has " + std::to_string(classes.size()));
  const auto groups = pool.by_class();
  SoundscapeSpec spec;
  spec.id = std::move(id);
  spec.duration_s = cfg.duration_s;
  spec.background_rms_dbfs = cfg.background_rms_dbfs;
  spec.seed = rng.next();
  spec.c = sample_class_count(rng);
  for (size_t k : rng.sample_indices(classes.size(), static_cast<size_t>(spec.c))) {
    const std::string& label = classes[k];
    auto it = groups.find(label);
    require(it != groups.end() && !it->second.empty(), ErrorKind::kValidation,
            "class '" + label + "' has zero clips");
    const SourceEntry& src = pool.entries[it->second[rng.index(it->second.size())]];
    EventPlacement ev;
    ev.class_label = label;
    ev.source_file = src.file_path;
    ev.pitch_semitones = rng.uniform(-cfg.pitch_range, cfg.pitch_range);
    ev.stretch_ratio = rng.uniform(cfg.stretch_min, cfg.stretch_max);
    ev.snr_db = sample_snr(cfg, rng);
    ev.event_duration_s = std::min(src.duration_s * ev.stretch_ratio, cfg.duration_s);
    ev.onset_s = rng.uniform(0.0, cfg.duration_s - ev.event_duration_s);
    spec.events.push_back(std::move(ev));
  }
  return spec;
}

}  // namespace polyfs
