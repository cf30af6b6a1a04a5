#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "polyfs/embed/store.hpp"
#include "polyfs/scene/spec.hpp"
#include "polyfs/util/rng.hpp"

namespace polyfs {

enum class PolyphonyMode { kMonophonic, kPolyphonic };
enum class SnrBand { kLow, kHigh, kMixed };

struct SupportCriteria {
  size_t n = 5;
  PolyphonyMode polyphony = PolyphonyMode::kMonophonic;
  SnrBand snr = SnrBand::kMixed;
};

inline std::string to_string(PolyphonyMode m) { return m == PolyphonyMode::kMonophonic ? "mono" : "poly"; }

inline std::string to_string(SnrBand b) {
  switch (b) {
    case SnrBand::kLow: return "low";
    case SnrBand::kHigh: return "high";
    case SnrBand::kMixed: return "mixed";
  }
  return "?";
}

inline std::string describe(const SupportCriteria& c) {
  return "n=" + std::to_string(c.n) + " poly=" + to_string(c.polyphony) + " snr=" + to_string(c.snr);
}

inline PolyphonyMode parse_polyphony_mode(const std::string& s) {
  if (s == "mono" || s == "monophonic") return PolyphonyMode::kMonophonic;
  if (s == "poly" || s == "polyphonic") return PolyphonyMode::kPolyphonic;
  fail(ErrorKind::kInvalidArgument, "unknown polyphony mode '" + s + "'");
}

inline SnrBand parse_snr_band(const std::string& s) {
  if (s == "low") return SnrBand::kLow;
  if (s == "high") return SnrBand::kHigh;
  if (s == "mixed") return SnrBand::kMixed;
  fail(ErrorKind::kInvalidArgument, "unknown SNR band '" + s + "'");
}

/// Nearest value of the SNR grid (-5..20 dB in 5 dB steps).
inline double snr_bucket(double snr_db) {
  double best = kSnrGridDb.front();
  for (double g : kSnrGridDb) {
    if (std::abs(g - snr_db) < std::abs(best - snr_db)) best = g;
  }
  return best;
}

inline bool is_low_snr(double snr_db) { return snr_bucket(snr_db) <= 5.0; }

/// Monophonic: the clip is labelled with the target alone. Low/high SNR:
/// the target event's SNR lies in {-5, 0, 5} / {10, 15, 20} dB.
inline bool conforms(const ClipMeta& m, const std::string& label, const SupportCriteria& c) {
  if (!m.has(label)) return false;
  if (c.polyphony == PolyphonyMode::kMonophonic && m.labels.size() != 1) return false;
  if (c.snr == SnrBand::kMixed) return true;
  auto it = m.event_snrs.find(label);
  if (it == m.event_snrs.end()) return false;
  return (c.snr == SnrBand::kLow) == is_low_snr(it->second);
}

inline std::vector<size_t> conforming_clips(const EmbeddingStore& pool, const std::string& label,
                                            const SupportCriteria& c) {
  std::vector<size_t> out;
  for (size_t i = 0; i < pool.size(); ++i) {
    if (conforms(pool.meta(i), label, c)) out.push_back(i);
  }
  return out;
}

/// n distinct conforming clip indices drawn uniformly.
inline std::vector<size_t> sample_support(const EmbeddingStore& pool, const std::string& label,
                                          const SupportCriteria& c, Rng& rng) {
  const auto candidates = conforming_clips(pool, label, c);
  require(candidates.size() >= c.n && c.n > 0, ErrorKind::kValidation,
          "insufficient conforming clips for class '" + label + "' (" + describe(c) + "): have " +
              std::to_string(candidates.size()));
  std::vector<size_t> out;
  for (size_t k : rng.sample_indices(candidates.size(), c.n)) out.push_back(candidates[k]);
  return out;
}

}  // namespace polyfs
