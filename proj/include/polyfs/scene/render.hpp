#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "polyfs/audio/buffer.hpp"
#include "polyfs/audio/noise.hpp"
#include "polyfs/audio/resample.hpp"
#include "polyfs/audio/stretch.hpp"
#include "polyfs/audio/trim.hpp"
#include "polyfs/audio/wav.hpp"
#include "polyfs/scene/spec.hpp"

namespace polyfs {

using SourceLoader = std::function<AudioBuffer(const std::string&)>;

/// Reads a WAV file and resamples it to `sample_rate`.
inline SourceLoader wav_loader(int sample_rate) {
  return [sample_rate](const std::string& path) { return resample(read_wav(path), sample_rate); };
}

/// The soundscape spec as rendered: onsets snapped to the sample grid and durations
/// measured on the transformed audio.
struct SceneAnnotation {
  SoundscapeSpec spec;
  int sample_rate = 44100;
  double applied_mix_gain = 1.0;
};

/// Separate background and event signals prior to summation. Event i is
/// placed at onset_samples[i]; its gain is already applied.
struct SceneStems {
  AudioBuffer background;
  std::vector<AudioBuffer> events;
  std::vector<size_t> onset_samples;
  SceneAnnotation annotation;
};

struct RenderedScene {
  AudioBuffer audio;
  SceneAnnotation annotation;
};

inline SceneStems render_stems(const SoundscapeSpec& spec, const SourceLoader& load, const SceneConfig& cfg) {
  const int sr = cfg.sample_rate;
  const size_t scene_len = static_cast<size_t>(std::llround(spec.duration_s * sr));
  SceneStems stems;
  stems.annotation.spec = spec;
  stems.annotation.sample_rate = sr;

  Rng bg_rng(spec.seed);
  const double bg_rms = db_to_amplitude(spec.background_rms_dbfs);
  stems.background = brownian_noise(spec.duration_s, sr, bg_rms, bg_rng);
  stems.background.samples.resize(scene_len, 0.0);

  for (size_t i = 0; i < spec.events.size(); ++i) {
    const EventPlacement& ev = spec.events[i];
    AudioBuffer src = load(ev.source_file);
    require(src.sample_rate == sr, ErrorKind::kValidation, "loader returned wrong sample rate for " + ev.source_file);
    src = trim_silence(src);
    require(!src.empty(), ErrorKind::kValidation, "silent source " + ev.source_file);
    src = pitch_shift(src, ev.pitch_semitones);
    src = time_stretch(src, ev.stretch_ratio);

    size_t onset = onset_to_sample(ev.onset_s, sr);
    require(onset < scene_len, ErrorKind::kInvalidArgument, "placement overflow");
    if (onset + src.size() > scene_len) {
      src.samples.resize(scene_len - onset);
    }
    const double level = rms(src);
    require(level > 0.0, ErrorKind::kValidation, "degenerate signal in " + ev.source_file);
    scale_in_place(src, gain_for_snr(level, bg_rms, ev.snr_db));

    EventPlacement& out = stems.annotation.spec.events[i];
    out.onset_s = static_cast<double>(onset) / sr;
    out.event_duration_s = static_cast<double>(src.size()) / sr;
    stems.events.push_back(std::move(src));
    stems.onset_samples.push_back(onset);
  }
  return stems;
}

/// Sums the stems in a canonical event order (by onset, then class, then
/// source), so the soundscape event order does not affect the audio. A mix peak
/// above 1 is removed by scaling the whole scene.
inline RenderedScene mix_stems(const SceneStems& stems) {
  RenderedScene out;
  out.annotation = stems.annotation;
  out.audio = stems.background;
  const auto& events = stems.annotation.spec.events;
  std::vector<size_t> order(stems.events.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return std::tie(stems.onset_samples[a], events[a].class_label, events[a].source_file) <
           std::tie(stems.onset_samples[b], events[b].class_label, events[b].source_file);
  });
  for (size_t i : order) {
    const double onset_s = static_cast<double>(stems.onset_samples[i]) / out.audio.sample_rate;
    mix_into(out.audio, stems.events[i], onset_s, 1.0);
  }
  const double p = peak(out.audio.samples);
  if (p > 1.0) {
    out.annotation.applied_mix_gain = 1.0 / p;
    scale_in_place(out.audio, out.annotation.applied_mix_gain);
  }
  return out;
}

inline RenderedScene render(const SoundscapeSpec& spec, const SourceLoader& load, const SceneConfig& cfg) {
  return mix_stems(render_stems(spec, load, cfg));
}

inline json annotation_to_json(const SceneAnnotation& a) {
  json events = json::array();
  for (const auto& e : a.spec.events) {
    events.push_back({{"class", e.class_label},
                      {"source_file", e.source_file},
                      {"onset_s", e.onset_s},
                      {"duration_s", e.event_duration_s},
                      {"snr_db", e.snr_db},
                      {"pitch_semitones", e.pitch_semitones},
                      {"stretch_ratio", e.stretch_ratio}});
  }
  return json{{"id", a.spec.id},
              {"duration_s", a.spec.duration_s},
              {"sample_rate", a.sample_rate},
              {"background", {{"rms_dbfs", a.spec.background_rms_dbfs}, {"seed", a.spec.seed}}},
              {"applied_mix_gain", a.applied_mix_gain},
              {"events", events}};
}

inline SceneAnnotation annotation_from_json(const json& j) {
  SceneAnnotation a;
  try {
    a.spec.id = j.at("id").get<std::string>();
    a.spec.duration_s = j.at("duration_s").get<double>();
    a.sample_rate = j.value("sample_rate", 44100);
    a.spec.background_rms_dbfs = j.at("background").at("rms_dbfs").get<double>();
    a.spec.seed = j.at("background").at("seed").get<uint64_t>();
    a.applied_mix_gain = j.at("applied_mix_gain").get<double>();
    for (const auto& e : j.at("events")) {
      EventPlacement ev;
      ev.class_label = e.at("class").get<std::string>();
      ev.source_file = e.at("source_file").get<std::string>();
      ev.onset_s = e.at("onset_s").get<double>();
      ev.event_duration_s = e.at("duration_s").get<double>();
      ev.snr_db = e.at("snr_db").get<double>();
      ev.pitch_semitones = e.at("pitch_semitones").get<double>();
      ev.stretch_ratio = e.at("stretch_ratio").get<double>();
      a.spec.events.push_back(std::move(ev));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed scene annotation: ") + e.what());
  }
  a.spec.c = static_cast<int>(a.spec.events.size());
  require(a.applied_mix_gain > 0.0 && a.applied_mix_gain <= 1.0, ErrorKind::kValidation,
          "applied_mix_gain out of (0, 1] in " + a.spec.id);
  return a;
}

}  // namespace polyfs
