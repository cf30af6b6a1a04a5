#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>

#include "polyfs/audio/wav.hpp"
#include "polyfs/scene/manifest.hpp"
#include "polyfs/util/rng.hpp"

namespace polyfs {

struct DemoCorpusConfig {
  size_t n_classes = 20;
  size_t clips_per_class = 20;
  int sample_rate = 22050;
  double min_duration_s = 0.5;
  double max_duration_s = 3.5;
  uint64_t seed = 0;
};

/// A small synthetic source corpus standing in for real recordings. Each
/// class has its own timbre: harmonic tones, resonant noise bursts or
/// amplitude-modulated tones at class-specific frequencies, with per-clip
/// jitter in pitch, level, decay and duration.
inline AudioBuffer demo_clip(size_t class_index, size_t n_classes, double duration_s, int sr, Rng& rng) {
  const double span = std::log2(4000.0 / 160.0);
  const double f0 = 160.0 * std::pow(2.0, span * static_cast<double>(class_index) / static_cast<double>(n_classes)) *
                    rng.uniform(0.97, 1.03);
  const double level = rng.uniform(0.3, 0.8);
  const double decay = rng.uniform(0.5, 3.0);
  const size_t n = static_cast<size_t>(std::llround(duration_s * sr));
  AudioBuffer out{std::vector<double>(n, 0.0), sr};
  const double two_pi = 2.0 * std::numbers::pi;
  // resonator state for the noise timbre
  const double r = 0.995, theta = two_pi * f0 / sr;
  double y1 = 0.0, y2 = 0.0;
  const double am_rate = 3.0 + static_cast<double>(class_index % 7) * 2.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double env = std::min(1.0, t / 0.01) * std::exp(-decay * t);
    double v = 0.0;
    switch (class_index % 3) {
      case 0:
        for (int h = 1; h <= 4; ++h) {
          if (h * f0 < 0.45 * sr) v += std::sin(two_pi * h * f0 * t) / h;
        }
        break;
      case 1: {
        const double y = rng.normal() * (1.0 - r) + 2.0 * r * std::cos(theta) * y1 - r * r * y2;
        y2 = y1;
        y1 = y;
        v = 8.0 * y;
        break;
      }
      default:
        v = std::sin(two_pi * f0 * t) * (0.6 + 0.4 * std::sin(two_pi * am_rate * t));
        break;
    }
    out.samples[i] = level * env * v;
  }
  const double peak = polyfs::peak(out.samples);
  if (peak > 0.99) scale_in_place(out, 0.99 / peak);
  return out;
}

/// Writes <dir>/<class>/<class>_<i>.wav (16-bit PCM) and <dir>/manifest.csv.
inline std::filesystem::path write_demo_corpus(const std::filesystem::path& dir, const DemoCorpusConfig& cfg) {
  require(cfg.n_classes >= 1 && cfg.clips_per_class >= 1, ErrorKind::kInvalidArgument, "empty demo corpus");
  std::filesystem::create_directories(dir);
  SourceManifest m;
  char name[64];
  for (size_t k = 0; k < cfg.n_classes; ++k) {
    std::snprintf(name, sizeof name, "class%02zu", k);
    const std::string label = name;
    std::filesystem::create_directories(dir / label);
    for (size_t i = 0; i < cfg.clips_per_class; ++i) {
      Rng rng(stable_hash(stable_hash(cfg.seed, static_cast<uint64_t>(k)), static_cast<uint64_t>(i)));
      const double dur = std::round(rng.uniform(cfg.min_duration_s, cfg.max_duration_s) * 100.0) / 100.0;
      const AudioBuffer clip = demo_clip(k, cfg.n_classes, dur, cfg.sample_rate, rng);
      std::snprintf(name, sizeof name, "%s_%02zu.wav", label.c_str(), i);
      const std::string rel = label + "/" + name;
      write_wav(dir / rel, clip, WavEncoding::kPcm16);
      m.entries.push_back({rel, label, clip.duration()});
    }
  }
  const auto path = dir / "manifest.csv";
  write_manifest(path, m);
  return path;
}

}  // namespace polyfs
