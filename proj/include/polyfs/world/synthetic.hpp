#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polyfs/embed/store.hpp"
#include "polyfs/scene/spec.hpp"
#include "polyfs/util/rng.hpp"

namespace polyfs {

/// Gaussian class-prototype embedding world. A clip with classes C and event
/// SNRs s_c embeds as
///   normalize(background * beta + sum_c event_gain * 10^(s_c / 20) * mu_c + noise * eps)
/// where beta is a direction shared by every clip, mu_c are unit class
/// prototypes orthogonal to beta and eps ~ N(0, I / dim).
struct WorldConfig {
  size_t dim = 64;
  size_t n_base = 20;
  size_t n_novel = 5;  // per novel split (val and test)
  double background = 1.0;
  double event_gain = 0.5;
  double noise = 2.0;
  size_t max_polyphony = 4;
  size_t base_train_clips = 2000;
  size_t base_val_clips = 400;
  size_t base_test_clips = 600;
  size_t novel_val_clips = 600;
  size_t novel_test_clips = 600;
  uint64_t seed = 0;
};

struct SyntheticWorld {
  WorldConfig config;
  Eigen::VectorXd background_dir;
  std::vector<std::string> base_classes, novel_val_classes, novel_test_classes;
  EmbeddingStore base_train, base_val, base_test, novel_val, novel_test;
};

inline json world_config_json(const WorldConfig& c) {
  return {{"dim", c.dim},
          {"n_base", c.n_base},
          {"n_novel", c.n_novel},
          {"background", c.background},
          {"event_gain", c.event_gain},
          {"noise", c.noise},
          {"max_polyphony", c.max_polyphony},
          {"base_train_clips", c.base_train_clips},
          {"base_val_clips", c.base_val_clips},
          {"base_test_clips", c.base_test_clips},
          {"novel_val_clips", c.novel_val_clips},
          {"novel_test_clips", c.novel_test_clips},
          {"seed", c.seed}};
}

namespace world_detail {

inline std::vector<std::string> class_names(const std::string& prefix, size_t n) {
  std::vector<std::string> out;
  char buf[32];
  for (size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "%s%02zu", prefix.c_str(), i);
    out.push_back(buf);
  }
  return out;
}

inline Eigen::VectorXd gaussian(size_t dim, Rng& rng) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = rng.normal();
  return v;
}

// Clip polyphony p in [1, max_p] with probability proportional to 1/p.
inline size_t draw_polyphony(size_t max_p, Rng& rng) {
  double total = 0.0;
  for (size_t p = 1; p <= max_p; ++p) total += 1.0 / static_cast<double>(p);
  double u = rng.uniform() * total;
  for (size_t p = 1; p <= max_p; ++p) {
    u -= 1.0 / static_cast<double>(p);
    if (u < 0.0) return p;
  }
  return max_p;
}

}  // namespace world_detail

inline SyntheticWorld generate_world(const WorldConfig& cfg) {
  require(cfg.dim >= 2 && cfg.n_base >= 2 && cfg.n_novel >= 1 && cfg.max_polyphony >= 1, ErrorKind::kInvalidArgument,
          "degenerate world configuration");
  SyntheticWorld w;
  w.config = cfg;
  w.base_classes = world_detail::class_names("base", cfg.n_base);
  w.novel_val_classes = world_detail::class_names("nval", cfg.n_novel);
  w.novel_test_classes = world_detail::class_names("ntest", cfg.n_novel);

  Rng geo(stable_hash(cfg.seed, "geometry"));
  w.background_dir = world_detail::gaussian(cfg.dim, geo).normalized();
  auto prototypes = [&](size_t n) {
    std::vector<Eigen::VectorXd> out;
    for (size_t i = 0; i < n; ++i) {
      Eigen::VectorXd v = world_detail::gaussian(cfg.dim, geo);
      v -= v.dot(w.background_dir) * w.background_dir;
      out.push_back(v.normalized());
    }
    return out;
  };
  const auto mu_base = prototypes(cfg.n_base);
  const auto mu_nval = prototypes(cfg.n_novel);
  const auto mu_ntest = prototypes(cfg.n_novel);

  auto make_split = [&](const std::string& name, size_t n_clips, const std::vector<std::string>& classes,
                        const std::vector<Eigen::VectorXd>& mu) {
    Rng rng(stable_hash(cfg.seed, name));
    EmbeddingStore s(cfg.dim);
    s.attributes()["split"] = name;
    s.attributes()["world"] = world_config_json(cfg);
    char id[64];
    for (size_t i = 0; i < n_clips; ++i) {
      const size_t p = std::min(world_detail::draw_polyphony(cfg.max_polyphony, rng), classes.size());
      Eigen::VectorXd z = cfg.background * w.background_dir;
      ClipMeta m;
      for (size_t k : rng.sample_indices(classes.size(), p)) {
        const double snr = kSnrGridDb[rng.index(kSnrGridDb.size())];
        z += cfg.event_gain * std::pow(10.0, snr / 20.0) * mu[k];
        m.labels.push_back(classes[k]);
        m.event_snrs[classes[k]] = snr;
      }
      std::sort(m.labels.begin(), m.labels.end());
      m.polyphony = static_cast<int>(p);
      z += cfg.noise / std::sqrt(static_cast<double>(cfg.dim)) * world_detail::gaussian(cfg.dim, rng);
      std::snprintf(id, sizeof id, "%s-%06zu", name.c_str(), i);
      s.add(id, z.normalized(), std::move(m));
    }
    return s;
  };
  w.base_train = make_split("base-train", cfg.base_train_clips, w.base_classes, mu_base);
  w.base_val = make_split("base-val", cfg.base_val_clips, w.base_classes, mu_base);
  w.base_test = make_split("base-test", cfg.base_test_clips, w.base_classes, mu_base);
  w.novel_val = make_split("novel-val", cfg.novel_val_clips, w.novel_val_classes, mu_nval);
  w.novel_test = make_split("novel-test", cfg.novel_test_clips, w.novel_test_classes, mu_ntest);
  return w;
}

}  // namespace polyfs
