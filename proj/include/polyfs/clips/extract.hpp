#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "polyfs/audio/buffer.hpp"
#include "polyfs/scene/render.hpp"

namespace polyfs {

inline constexpr double kClipSeconds = 1.0;
// Overlaps within this margin of the threshold count as equal to it.
inline constexpr double kOverlapEpsilon = 1e-9;

struct TimeWindow {
  double t0 = 0.0;
  double t1 = kClipSeconds;
};

inline double overlap_seconds(const TimeWindow& w, double onset, double duration) {
  return std::max(0.0, std::min(w.t1, onset + duration) - std::max(w.t0, onset));
}

/// An event labels the window when it overlaps by more than 0.5 s or by more
/// than half of its own duration.
inline bool event_labels_window(const TimeWindow& w, const EventPlacement& e) {
  const double needed = std::min(0.5, e.event_duration_s / 2.0);
  return overlap_seconds(w, e.onset_s, e.event_duration_s) > needed + kOverlapEpsilon;
}

inline std::set<std::string> label_window(const TimeWindow& w, const std::vector<EventPlacement>& events) {
  std::set<std::string> labels;
  for (const auto& e : events) {
    if (event_labels_window(w, e)) labels.insert(e.class_label);
  }
  return labels;
}

struct LabeledClip {
  std::string id;
  std::string scene_id;
  double t0 = 0.0;
  double t1 = kClipSeconds;
  std::vector<std::string> labels;  // sorted
  int polyphony = 0;
  std::map<std::string, double> event_snrs;
  std::string anchor_class;

  friend bool operator==(const LabeledClip&, const LabeledClip&) = default;
};

/// One clip per event, centered on the event midpoint and shifted inward at
/// the scene edges so it always spans exactly one second.
inline std::vector<LabeledClip> extract_clips(const SceneAnnotation& scene) {
  const auto& spec = scene.spec;
  require(spec.duration_s >= kClipSeconds, ErrorKind::kValidation, spec.id + ": scene shorter than one clip");
  std::vector<LabeledClip> clips;
  for (size_t i = 0; i < spec.events.size(); ++i) {
    const EventPlacement& anchor = spec.events[i];
    require(anchor.event_duration_s > 0.0, ErrorKind::kValidation, spec.id + ": zero-duration event");
    const double center = anchor.onset_s + anchor.event_duration_s / 2.0;
    const double t0 = std::clamp(center - kClipSeconds / 2.0, 0.0, spec.duration_s - kClipSeconds);
    const TimeWindow w{t0, t0 + kClipSeconds};

    LabeledClip clip;
    clip.id = spec.id + "_e" + std::to_string(i);
    clip.scene_id = spec.id;
    clip.t0 = w.t0;
    clip.t1 = w.t1;
    clip.anchor_class = anchor.class_label;
    std::map<std::string, double> best_overlap;
    for (const auto& e : spec.events) {
      if (!event_labels_window(w, e)) continue;
      const double ov = overlap_seconds(w, e.onset_s, e.event_duration_s);
      auto it = best_overlap.find(e.class_label);
      if (it == best_overlap.end() || ov > it->second) {
        best_overlap[e.class_label] = ov;
        clip.event_snrs[e.class_label] = e.snr_db;
      }
    }
    for (const auto& [label, ov] : best_overlap) clip.labels.push_back(label);
    clip.polyphony = static_cast<int>(clip.labels.size());
    clips.push_back(std::move(clip));
  }
  return clips;
}

/// The clip's samples cut from the scene audio (any sample rate).
inline AudioBuffer clip_audio(const AudioBuffer& scene, const LabeledClip& clip) {
  const size_t start = onset_to_sample(clip.t0, scene.sample_rate);
  const size_t len = static_cast<size_t>(std::llround(kClipSeconds * scene.sample_rate));
  require(start + len <= scene.size(), ErrorKind::kValidation, clip.id + ": clip window outside scene audio");
  return {std::vector<double>(scene.samples.begin() + static_cast<ptrdiff_t>(start),
                              scene.samples.begin() + static_cast<ptrdiff_t>(start + len)),
          scene.sample_rate};
}

inline json clip_to_json(const LabeledClip& c) {
  return json{{"id", c.id},         {"scene_id", c.scene_id},   {"t0", c.t0},
              {"t1", c.t1},         {"labels", c.labels},       {"polyphony", c.polyphony},
              {"event_snrs", c.event_snrs}, {"anchor_class", c.anchor_class}};
}

inline LabeledClip clip_from_json(const json& j) {
  LabeledClip c;
  try {
    c.id = j.at("id").get<std::string>();
    c.scene_id = j.at("scene_id").get<std::string>();
    c.t0 = j.at("t0").get<double>();
    c.t1 = j.at("t1").get<double>();
    c.labels = j.at("labels").get<std::vector<std::string>>();
    c.polyphony = j.at("polyphony").get<int>();
    c.event_snrs = j.at("event_snrs").get<std::map<std::string, double>>();
    c.anchor_class = j.value("anchor_class", std::string());
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed clip record: ") + e.what());
  }
  return c;
}

}  // namespace polyfs
