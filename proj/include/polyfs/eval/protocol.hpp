#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polyfs/embed/store.hpp"
#include "polyfs/eval/metrics.hpp"
#include "polyfs/eval/support.hpp"
#include "polyfs/fewshot/base_classifier.hpp"
#include "polyfs/fewshot/dfsl.hpp"
#include "polyfs/fewshot/joint.hpp"
#include "polyfs/fewshot/logreg.hpp"
#include "polyfs/fewshot/prototype.hpp"
#include "polyfs/util/parallel.hpp"
#include "polyfs/util/rng.hpp"

namespace polyfs {

inline constexpr size_t kPolyphonyBuckets = 4;  // 1, 2, 3, 4+
inline constexpr size_t kSnrBuckets = kSnrGridDb.size();

enum class TestPolyphony { kAll, kMono, kPoly };

inline std::string to_string(TestPolyphony t) {
  switch (t) {
    case TestPolyphony::kAll: return "all";
    case TestPolyphony::kMono: return "mono";
    case TestPolyphony::kPoly: return "poly";
  }
  return "?";
}

inline TestPolyphony parse_test_polyphony(const std::string& s) {
  if (s == "all") return TestPolyphony::kAll;
  if (s == "mono") return TestPolyphony::kMono;
  if (s == "poly") return TestPolyphony::kPoly;
  fail(ErrorKind::kInvalidArgument, "unknown test polyphony filter '" + s + "'");
}

inline bool keep_for_test(const ClipMeta& m, TestPolyphony t) {
  if (t == TestPolyphony::kMono) return m.labels.size() == 1;
  if (t == TestPolyphony::kPoly) return m.labels.size() >= 2;
  return true;
}

/// Buckets with no eligible clips are nullopt.
struct Breakdown {
  std::array<std::optional<double>, kPolyphonyBuckets> poly_base_f;
  std::array<std::optional<double>, kPolyphonyBuckets> poly_novel_f;
  std::array<size_t, kPolyphonyBuckets> poly_clips{};
  std::array<std::optional<double>, kSnrBuckets> snr_base_recall;
  std::array<std::optional<double>, kSnrBuckets> snr_novel_recall;
  std::array<size_t, kSnrBuckets> snr_base_events{};
  std::array<size_t, kSnrBuckets> snr_novel_events{};
};

inline size_t polyphony_bucket(int polyphony) {
  return static_cast<size_t>(std::clamp(polyphony, 1, static_cast<int>(kPolyphonyBuckets))) - 1;
}

inline size_t snr_bucket_index(double snr_db) {
  const double b = snr_bucket(snr_db);
  return static_cast<size_t>(std::find(kSnrGridDb.begin(), kSnrGridDb.end(), b) - kSnrGridDb.begin());
}

/// Polyphony table: mean F over the group's classes that have a positive in
/// the bucket. SNR table: pooled recall over (clip, class) pairs where the
/// class is present, bucketed by that event's SNR. Columns [0, n_base) are
/// base classes, the rest novel.
inline Breakdown compute_breakdown(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& labels,
                                   const std::vector<ClipMeta>& meta, const std::vector<std::string>& classes,
                                   size_t n_base, double threshold = 0.5) {
  require(static_cast<size_t>(scores.rows()) == meta.size() && scores.cols() == labels.cols() &&
              scores.rows() == labels.rows() && static_cast<size_t>(scores.cols()) == classes.size(),
          ErrorKind::kInvalidArgument, "breakdown inputs disagree");
  Breakdown out;
  std::array<std::vector<Eigen::Index>, kPolyphonyBuckets> rows_in;
  for (size_t r = 0; r < meta.size(); ++r) {
    if (meta[r].polyphony < 1) continue;
    rows_in[polyphony_bucket(meta[r].polyphony)].push_back(static_cast<Eigen::Index>(r));
  }
  for (size_t b = 0; b < kPolyphonyBuckets; ++b) {
    out.poly_clips[b] = rows_in[b].size();
    if (rows_in[b].empty()) continue;
    std::array<double, 2> sum{};
    std::array<size_t, 2> count{};
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      size_t tp = 0, fp = 0, fn = 0;
      for (Eigen::Index r : rows_in[b]) {
        const bool pred = scores(r, c) > threshold, truth = labels(r, c) > 0.5;
        tp += pred && truth;
        fp += pred && !truth;
        fn += !pred && truth;
      }
      if (tp + fn == 0) continue;
      const size_t g = static_cast<size_t>(c) < n_base ? 0 : 1;
      sum[g] += prf_from_counts(tp, fp, fn).f;
      ++count[g];
    }
    if (count[0]) out.poly_base_f[b] = sum[0] / static_cast<double>(count[0]);
    if (count[1]) out.poly_novel_f[b] = sum[1] / static_cast<double>(count[1]);
  }

  std::array<std::array<size_t, kSnrBuckets>, 2> hits{}, events{};
  for (size_t r = 0; r < meta.size(); ++r) {
    for (size_t c = 0; c < classes.size(); ++c) {
      const auto ri = static_cast<Eigen::Index>(r), ci = static_cast<Eigen::Index>(c);
      if (labels(ri, ci) <= 0.5) continue;
      auto it = meta[r].event_snrs.find(classes[c]);
      if (it == meta[r].event_snrs.end()) continue;
      const size_t g = c < n_base ? 0 : 1, b = snr_bucket_index(it->second);
      ++events[g][b];
      hits[g][b] += scores(ri, ci) > threshold;
    }
  }
  for (size_t b = 0; b < kSnrBuckets; ++b) {
    out.snr_base_events[b] = events[0][b];
    out.snr_novel_events[b] = events[1][b];
    if (events[0][b]) out.snr_base_recall[b] = static_cast<double>(hits[0][b]) / static_cast<double>(events[0][b]);
    if (events[1][b]) out.snr_novel_recall[b] = static_cast<double>(hits[1][b]) / static_cast<double>(events[1][b]);
  }
  return out;
}

/// Linear-interpolated percentile (p in [0, 100]).
inline double percentile(std::vector<double> v, double p) {
  require(!v.empty(), ErrorKind::kInvalidArgument, "percentile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Interval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

inline Interval summarize(const std::vector<double>& v) {
  Interval out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  out.lo = percentile(v, 2.5);
  out.hi = percentile(v, 97.5);
  return out;
}

struct ProtocolConfig {
  Method method = Method::kProto;
  SupportCriteria criteria{};
  size_t iterations = 100;
  double threshold = 0.5;
  uint64_t seed = 0;
  unsigned jobs = 1;
  LRConfig lr{};
  TestPolyphony test_polyphony = TestPolyphony::kAll;
  std::vector<std::string> novel_classes;  // empty: every label of the novel pool
};

/// Novel clips supply both supports and novel test clips; base test clips
/// complete the test mixture; LR negatives come from base train.
struct ProtocolStores {
  const EmbeddingStore* novel = nullptr;
  const EmbeddingStore* base_test = nullptr;
  const EmbeddingStore* base_train = nullptr;
};

struct IterationResult {
  uint64_t seed = 0;
  double base_f = 0.0;
  double novel_f = 0.0;
  std::vector<double> class_f;  // base classes then novel classes
  size_t test_clips = 0;
  size_t lr_unconverged = 0;
  size_t lr_prior_only = 0;
  Breakdown breakdown;
};

struct EvalReport {
  json config;
  std::vector<std::string> base_classes;
  std::vector<std::string> novel_classes;
  size_t base_test_clips = 0;
  size_t novel_pool_clips = 0;
  std::vector<IterationResult> iterations;
  Interval base_f;
  Interval novel_f;
  std::vector<double> class_f;
  std::array<std::optional<double>, kPolyphonyBuckets> poly_base_f, poly_novel_f;
  std::array<std::optional<double>, kSnrBuckets> snr_base_recall, snr_novel_recall;
  std::vector<std::string> warnings;
};

inline json protocol_config_json(const ProtocolConfig& cfg) {
  json j;
  j["method"] = to_string(cfg.method);
  j["n"] = cfg.criteria.n;
  j["poly"] = to_string(cfg.criteria.polyphony);
  j["snr"] = to_string(cfg.criteria.snr);
  j["iterations"] = cfg.iterations;
  j["threshold"] = cfg.threshold;
  j["seed"] = cfg.seed;
  j["test_polyphony"] = to_string(cfg.test_polyphony);
  if (cfg.method == Method::kLr) {
    j["lr"] = {{"n_negatives", cfg.lr.n_negatives},
               {"l2_strength", cfg.lr.l2_strength},
               {"max_iter", cfg.lr.max_iter},
               {"tol", cfg.lr.tol}};
  }
  return j;
}

namespace protocol_detail {

template <size_t N>
std::array<std::optional<double>, N> mean_present(const std::vector<IterationResult>& its,
                                                  std::array<std::optional<double>, N> Breakdown::*field) {
  std::array<std::optional<double>, N> out;
  for (size_t b = 0; b < N; ++b) {
    double sum = 0.0;
    size_t count = 0;
    for (const auto& it : its) {
      if (const auto& v = (it.breakdown.*field)[b]) {
        sum += *v;
        ++count;
      }
    }
    if (count) out[b] = sum / static_cast<double>(count);
  }
  return out;
}

}  // namespace protocol_detail

/// Repeats: draw supports per novel class, extend the classifier, score the
/// base + novel test mixture and record per-class F. Iteration i uses seed
/// stable_hash(seed, i) and each class draws from its own stream, so
/// results do not depend on class order or job count.
inline EvalReport run_protocol(const BaseClassifier& base, const WeightGenerator* generator,
                               const ProtocolStores& stores, const ProtocolConfig& cfg) {
  require(stores.novel && stores.base_test, ErrorKind::kInvalidArgument, "novel and base test stores required");
  require(cfg.method != Method::kLr || stores.base_train, ErrorKind::kInvalidArgument,
          "lr needs the base train store for negatives");
  require(cfg.method != Method::kDfsl || generator, ErrorKind::kInvalidArgument, "dfsl needs a weight generator");
  require(cfg.iterations >= 1, ErrorKind::kInvalidArgument, "iterations must be at least 1");
  const auto dim = static_cast<size_t>(base.dim());
  require(stores.novel->dim() == dim && stores.base_test->dim() == dim, ErrorKind::kInvalidArgument,
          "store dimension differs from the classifier");
  if (generator) {
    require(generator->keys.rows() == base.weights.rows(), ErrorKind::kInvalidArgument,
            "generator keys do not match the base classes");
  }

  EvalReport report;
  report.config = protocol_config_json(cfg);
  report.base_classes = base.classes;
  report.novel_classes = cfg.novel_classes;
  if (report.novel_classes.empty()) {
    const std::set<std::string> base_set(base.classes.begin(), base.classes.end());
    for (const auto& l : stores.novel->label_set()) {
      if (!base_set.count(l)) report.novel_classes.push_back(l);
    }
  }
  require(!report.novel_classes.empty(), ErrorKind::kValidation, "no novel classes to evaluate");
  for (const auto& c : report.novel_classes) {
    require(conforming_clips(*stores.novel, c, cfg.criteria).size() >= cfg.criteria.n, ErrorKind::kValidation,
            "insufficient conforming clips for class '" + c + "' (" + describe(cfg.criteria) + ")");
  }
  std::vector<std::string> joint = report.base_classes;
  joint.insert(joint.end(), report.novel_classes.begin(), report.novel_classes.end());
  const size_t n_base = report.base_classes.size();

  std::vector<size_t> base_rows;
  for (size_t r = 0; r < stores.base_test->size(); ++r) {
    if (keep_for_test(stores.base_test->meta(r), cfg.test_polyphony)) base_rows.push_back(r);
  }
  const Eigen::MatrixXd base_q = stores.base_test->rows(base_rows);
  const Eigen::MatrixXd base_y = label_matrix(*stores.base_test, joint, base_rows);
  report.base_test_clips = base_rows.size();
  report.novel_pool_clips = stores.novel->size();

  report.iterations.resize(cfg.iterations);
  parallel_for(cfg.iterations, cfg.jobs, [&](size_t i) {
    IterationResult& res = report.iterations[i];
    res.seed = stable_hash(cfg.seed, static_cast<uint64_t>(i));
    NovelModels nm;
    nm.method = cfg.method;
    nm.classes = report.novel_classes;
    nm.weights.resize(static_cast<Eigen::Index>(nm.classes.size()), base.dim());
    std::set<size_t> used;
    for (size_t k = 0; k < nm.classes.size(); ++k) {
      const std::string& label = nm.classes[k];
      Rng rng(stable_hash(res.seed, label));
      const auto support_rows = sample_support(*stores.novel, label, cfg.criteria, rng);
      used.insert(support_rows.begin(), support_rows.end());
      const Eigen::MatrixXd support = stores.novel->rows(support_rows);
      switch (cfg.method) {
        case Method::kProto:
          nm.weights.row(static_cast<Eigen::Index>(k)) = prototype_weight(support).transpose();
          break;
        case Method::kDfsl:
          nm.weights.row(static_cast<Eigen::Index>(k)) = dfsl_generate(*generator, support, base.weights).transpose();
          break;
        case Method::kLr: {
          Rng neg_rng(stable_hash(res.seed, "negatives:" + label));
          auto fit = lr_fit(support, *stores.base_train, cfg.lr, neg_rng);
          res.lr_unconverged += !fit.model.converged && !fit.model.prior_only;
          res.lr_prior_only += fit.model.prior_only;
          nm.lr.push_back(std::move(fit.model));
          break;
        }
      }
    }
    std::vector<size_t> novel_rows;
    for (size_t r = 0; r < stores.novel->size(); ++r) {
      if (!used.count(r) && keep_for_test(stores.novel->meta(r), cfg.test_polyphony)) novel_rows.push_back(r);
    }
    const auto n_b = static_cast<Eigen::Index>(base_rows.size());
    const auto n_n = static_cast<Eigen::Index>(novel_rows.size());
    Eigen::MatrixXd queries(n_b + n_n, base.dim()), labels(n_b + n_n, static_cast<Eigen::Index>(joint.size()));
    queries.topRows(n_b) = base_q;
    labels.topRows(n_b) = base_y;
    queries.bottomRows(n_n) = stores.novel->rows(novel_rows);
    labels.bottomRows(n_n) = label_matrix(*stores.novel, joint, novel_rows);
    std::vector<ClipMeta> meta;
    meta.reserve(static_cast<size_t>(n_b + n_n));
    for (size_t r : base_rows) meta.push_back(stores.base_test->meta(r));
    for (size_t r : novel_rows) meta.push_back(stores.novel->meta(r));
    res.test_clips = meta.size();
    require(!meta.empty(), ErrorKind::kValidation, "empty test set");

    const Eigen::MatrixXd scores = predict_joint(base, nm, queries);
    const auto prf = f_measure(scores, labels, cfg.threshold);
    for (const auto& c : prf) res.class_f.push_back(c.f);
    for (size_t c = 0; c < prf.size(); ++c) (c < n_base ? res.base_f : res.novel_f) += prf[c].f;
    res.base_f /= static_cast<double>(n_base);
    res.novel_f /= static_cast<double>(prf.size() - n_base);
    res.breakdown = compute_breakdown(scores, labels, meta, joint, n_base, cfg.threshold);
  });

  std::vector<double> bf, nf;
  report.class_f.assign(joint.size(), 0.0);
  size_t unconverged = 0, prior_only = 0;
  for (const auto& it : report.iterations) {
    bf.push_back(it.base_f);
    nf.push_back(it.novel_f);
    for (size_t c = 0; c < joint.size(); ++c) report.class_f[c] += it.class_f[c] / static_cast<double>(cfg.iterations);
    unconverged += it.lr_unconverged;
    prior_only += it.lr_prior_only;
  }
  report.base_f = summarize(bf);
  report.novel_f = summarize(nf);
  report.poly_base_f = protocol_detail::mean_present(report.iterations, &Breakdown::poly_base_f);
  report.poly_novel_f = protocol_detail::mean_present(report.iterations, &Breakdown::poly_novel_f);
  report.snr_base_recall = protocol_detail::mean_present(report.iterations, &Breakdown::snr_base_recall);
  report.snr_novel_recall = protocol_detail::mean_present(report.iterations, &Breakdown::snr_novel_recall);
  if (unconverged) {
    report.warnings.push_back(std::to_string(unconverged) + " logistic regression fits stopped at max_iter");
  }
  if (prior_only) report.warnings.push_back(std::to_string(prior_only) + " logistic regression fits fell back to the prior");
  return report;
}

struct NegativeTuning {
  size_t best = 0;
  std::vector<std::pair<size_t, double>> scores;  // (x, novel mean F)
};

/// Picks the LR negative count on validation stores by novel mean F, with
/// supports drawn under the same criteria as at test time. Candidates above
/// the base train size collapse onto it; ties keep the smaller count.
inline NegativeTuning tune_lr_negatives(const BaseClassifier& base, const ProtocolStores& val_stores,
                                        ProtocolConfig cfg, std::vector<size_t> grid = {}) {
  require(val_stores.base_train, ErrorKind::kInvalidArgument, "lr tuning needs the base train store");
  if (grid.empty()) grid.assign(std::begin(kNegativeGrid), std::end(kNegativeGrid));
  for (auto& x : grid) x = std::min(x, val_stores.base_train->size());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  cfg.method = Method::kLr;
  NegativeTuning out;
  double best_f = -1.0;
  for (size_t x : grid) {
    cfg.lr.n_negatives = x;
    const double f = run_protocol(base, nullptr, val_stores, cfg).novel_f.mean;
    out.scores.emplace_back(x, f);
    if (f > best_f) {
      best_f = f;
      out.best = x;
    }
  }
  return out;
}

}  // namespace polyfs
