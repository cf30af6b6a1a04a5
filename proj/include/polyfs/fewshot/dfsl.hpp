#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polyfs/embed/store.hpp"
#include "polyfs/eval/support.hpp"
#include "polyfs/fewshot/adam.hpp"
#include "polyfs/fewshot/base_classifier.hpp"
#include "polyfs/fewshot/cosine.hpp"
#include "polyfs/fewshot/prototype.hpp"
#include "polyfs/util/rng.hpp"

namespace polyfs {

enum class AttentionOn { kExample, kMean };

inline std::string to_string(AttentionOn a) { return a == AttentionOn::kExample ? "example" : "mean"; }

inline AttentionOn parse_attention_on(const std::string& s) {
  if (s == "example") return AttentionOn::kExample;
  if (s == "mean") return AttentionOn::kMean;
  fail(ErrorKind::kInvalidArgument, "unknown attention mode '" + s + "'");
}

/// Novel weight = phi_avg * z_avg + phi_att * (attention-weighted base rows).
struct WeightGenerator {
  Eigen::VectorXd phi_avg;
  Eigen::VectorXd phi_att;
  Eigen::MatrixXd keys;  // one row per base class
  double att_scale = 10.0;
  AttentionOn att_on = AttentionOn::kExample;

  Eigen::Index dim() const { return phi_avg.size(); }

  void validate() const {
    require(phi_att.size() == phi_avg.size() && keys.cols() == phi_avg.size(), ErrorKind::kValidation,
            "generator dimensions disagree");
    require(keys.rows() >= 1, ErrorKind::kValidation, "generator has no keys");
    require(phi_avg.allFinite() && phi_att.allFinite() && keys.allFinite() && std::isfinite(att_scale),
            ErrorKind::kValidation, "non-finite generator parameter");
    require(att_scale > 0.0, ErrorKind::kValidation, "attention scale must be positive");
  }
};

/// Starts out identical to the prototype: phi_avg = 1, phi_att = 0, keys =
/// normalized base rows.
inline WeightGenerator init_generator(const BaseClassifier& base, double att_scale = 10.0,
                                      AttentionOn att_on = AttentionOn::kExample) {
  WeightGenerator g;
  const Eigen::Index d = base.dim();
  g.phi_avg = Eigen::VectorXd::Ones(d);
  g.phi_att = Eigen::VectorXd::Zero(d);
  g.keys = normalize_rows(base.weights, "zero-norm weight row");
  g.att_scale = att_scale;
  g.att_on = att_on;
  return g;
}

struct GenerateTrace {
  Eigen::MatrixXd inputs;     // unit rows the attention is computed on
  Eigen::MatrixXd attention;  // inputs x base classes, rows sum to 1
  Eigen::VectorXd z_avg;
  Eigen::VectorXd w_att;
};

/// `allowed` (optional, one flag per base class) removes classes from the
/// attention softmax.
inline Eigen::VectorXd dfsl_generate(const WeightGenerator& gen, const Eigen::MatrixXd& support,
                                     const Eigen::MatrixXd& base_weights, const std::vector<bool>* allowed = nullptr,
                                     GenerateTrace* trace = nullptr) {
  require(support.rows() >= 1, ErrorKind::kInvalidArgument, "empty support set");
  require(support.cols() == gen.dim() && base_weights.cols() == gen.dim(), ErrorKind::kInvalidArgument,
          "dimension mismatch between support, generator and base weights");
  require(base_weights.rows() == gen.keys.rows(), ErrorKind::kInvalidArgument,
          "generator has " + std::to_string(gen.keys.rows()) + " keys for " + std::to_string(base_weights.rows()) +
              " base classes");
  require(!allowed || allowed->size() == static_cast<size_t>(base_weights.rows()), ErrorKind::kInvalidArgument,
          "attention mask size mismatch");

  const Eigen::MatrixXd z_hat = normalize_rows(support, "zero-norm embedding");
  const Eigen::VectorXd z_avg = z_hat.colwise().mean().transpose();
  Eigen::MatrixXd inputs = gen.att_on == AttentionOn::kExample
                               ? z_hat
                               : Eigen::MatrixXd(unit(z_avg, "zero-norm mean embedding").transpose());
  const Eigen::MatrixXd w_hat = normalize_rows(base_weights, "zero-norm weight row");
  const Eigen::MatrixXd k_hat = normalize_rows(gen.keys, "zero-norm key");
  const Eigen::MatrixXd logits = gen.att_scale * inputs * k_hat.transpose();

  Eigen::MatrixXd att = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index b = 0; b < logits.cols(); ++b) {
      if (!allowed || (*allowed)[static_cast<size_t>(b)]) top = std::max(top, logits(i, b));
    }
    require(std::isfinite(top), ErrorKind::kInvalidArgument, "attention mask excludes every base class");
    double total = 0.0;
    for (Eigen::Index b = 0; b < logits.cols(); ++b) {
      if (!allowed || (*allowed)[static_cast<size_t>(b)]) {
        att(i, b) = std::exp(logits(i, b) - top);
        total += att(i, b);
      }
    }
    att.row(i) /= total;
  }
  const Eigen::VectorXd w_att = (att * w_hat).colwise().mean().transpose();
  if (trace) *trace = {std::move(inputs), att, z_avg, w_att};
  return gen.phi_avg.cwiseProduct(z_avg) + gen.phi_att.cwiseProduct(w_att);
}

/// One pseudo-novel episode over the base label space.
struct Episode {
  std::vector<size_t> novel;              // base-class columns whose rows are replaced
  std::vector<Eigen::MatrixXd> supports;  // one support matrix per novel column
  Eigen::MatrixXd queries;                // unit rows
  Eigen::MatrixXd labels;                 // queries x base classes
};

struct GeneratorGrad {
  Eigen::VectorXd phi_avg;
  Eigen::VectorXd phi_att;
  Eigen::MatrixXd keys;
  double att_scale = 0.0;
};

/// Mean BCE over queries x base classes with the episode's rows replaced by
/// generated weights; pseudo-novel classes are masked out of the attention.
/// Fills `grad` with the gradient w.r.t. every generator parameter.
inline double episode_loss(const WeightGenerator& gen, const BaseClassifier& base, const Episode& ep,
                           GeneratorGrad* grad = nullptr) {
  require(ep.novel.size() == ep.supports.size(), ErrorKind::kInvalidArgument, "episode support count mismatch");
  const Eigen::Index n_base = base.weights.rows();
  std::vector<bool> allowed(static_cast<size_t>(n_base), true);
  for (size_t j : ep.novel) {
    require(j < allowed.size(), ErrorKind::kInvalidArgument, "episode class out of range");
    allowed[j] = false;
  }

  Eigen::MatrixXd weights = base.weights;
  std::vector<GenerateTrace> traces(ep.novel.size());
  for (size_t t = 0; t < ep.novel.size(); ++t) {
    weights.row(static_cast<Eigen::Index>(ep.novel[t])) =
        dfsl_generate(gen, ep.supports[t], base.weights, &allowed, &traces[t]).transpose();
  }
  const Eigen::VectorXd norms = weights.rowwise().norm();
  for (size_t j : ep.novel) {
    require(norms[static_cast<Eigen::Index>(j)] > 0.0, ErrorKind::kValidation, "generated weight has zero norm");
  }
  const Eigen::MatrixXd w_hat = norms.cwiseInverse().asDiagonal() * weights;
  const Eigen::MatrixXd cos = ep.queries * w_hat.transpose();
  const double denom = static_cast<double>(cos.size());
  double loss = 0.0;
  Eigen::MatrixXd g_logit(cos.rows(), cos.cols());
  for (Eigen::Index q = 0; q < cos.rows(); ++q) {
    for (Eigen::Index k = 0; k < cos.cols(); ++k) {
      const double logit = base.scale * cos(q, k);
      loss += bce_with_logit(logit, ep.labels(q, k));
      g_logit(q, k) = (sigmoid(logit) - ep.labels(q, k)) / denom;
    }
  }
  loss /= denom;
  if (!grad) return loss;

  const Eigen::Index d = gen.dim();
  grad->phi_avg = Eigen::VectorXd::Zero(d);
  grad->phi_att = Eigen::VectorXd::Zero(d);
  grad->keys = Eigen::MatrixXd::Zero(gen.keys.rows(), d);
  grad->att_scale = 0.0;
  const Eigen::MatrixXd base_hat = normalize_rows(base.weights, "zero-norm weight row");
  const Eigen::VectorXd key_norms = gen.keys.rowwise().norm();
  const Eigen::MatrixXd k_hat = key_norms.cwiseInverse().asDiagonal() * gen.keys;

  for (size_t t = 0; t < ep.novel.size(); ++t) {
    const auto j = static_cast<Eigen::Index>(ep.novel[t]);
    const GenerateTrace& tr = traces[t];
    // through the cosine to the raw generated row
    Eigen::VectorXd g_what = base.scale * (ep.queries.transpose() * g_logit.col(j));
    const Eigen::VectorXd g_w = (g_what - g_what.dot(w_hat.row(j).transpose()) * w_hat.row(j).transpose()) / norms[j];

    grad->phi_avg += g_w.cwiseProduct(tr.z_avg);
    grad->phi_att += g_w.cwiseProduct(tr.w_att);
    const Eigen::VectorXd g_watt = g_w.cwiseProduct(gen.phi_att);

    const double m = static_cast<double>(tr.inputs.rows());
    const Eigen::VectorXd u_b = base_hat * g_watt / m;  // same for every input row
    const Eigen::MatrixXd e = tr.inputs * k_hat.transpose();
    for (Eigen::Index i = 0; i < tr.inputs.rows(); ++i) {
      const double mean_u = tr.attention.row(i).dot(u_b);
      for (Eigen::Index b = 0; b < n_base; ++b) {
        const double v = tr.attention(i, b) * (u_b[b] - mean_u);
        if (v == 0.0) continue;
        grad->att_scale += v * e(i, b);
        grad->keys.row(b) += gen.att_scale * v * (tr.inputs.row(i) - e(i, b) * k_hat.row(b)) / key_norms[b];
      }
    }
  }
  return loss;
}

struct EpisodicConfig {
  size_t iterations = 500;
  AdamConfig adam{};
  size_t pseudo_novel = 5;
  size_t queries_per_class = 5;
  size_t base_queries = 20;
  SupportCriteria criteria{};
  uint64_t seed = 0;
};

struct EpisodicResult {
  WeightGenerator generator;
  std::vector<double> loss;
  std::vector<std::string> warnings;
};

/// Base classes of `base` that have enough criteria-conforming clips in
/// `store` to serve as pseudo-novel classes.
inline std::vector<size_t> episodic_eligible(const BaseClassifier& base, const EmbeddingStore& store,
                                             const SupportCriteria& criteria, std::vector<std::string>* warnings) {
  std::vector<size_t> out;
  for (size_t k = 0; k < base.classes.size(); ++k) {
    if (conforming_clips(store, base.classes[k], criteria).size() >= criteria.n) {
      out.push_back(k);
    } else if (warnings) {
      warnings->push_back("class '" + base.classes[k] + "' lacks " + std::to_string(criteria.n) +
                          " conforming clips (" + describe(criteria) + "); not sampled as pseudo-novel");
    }
  }
  return out;
}

inline Episode sample_episode(const BaseClassifier& base, const EmbeddingStore& store,
                              const std::vector<size_t>& eligible, const EpisodicConfig& cfg, Rng& rng) {
  Episode ep;
  std::set<size_t> used;
  for (size_t pick : rng.sample_indices(eligible.size(), cfg.pseudo_novel)) {
    const size_t k = eligible[pick];
    const auto support = sample_support(store, base.classes[k], cfg.criteria, rng);
    ep.novel.push_back(k);
    ep.supports.push_back(store.rows(support));
    used.insert(support.begin(), support.end());
  }
  std::vector<size_t> query_rows;
  auto take = [&](size_t row) {
    if (used.insert(row).second) query_rows.push_back(row);
  };
  for (size_t k : ep.novel) {
    std::vector<size_t> positives;
    for (size_t r = 0; r < store.size(); ++r) {
      if (!used.count(r) && store.meta(r).has(base.classes[k])) positives.push_back(r);
    }
    for (size_t i : rng.sample_indices(positives.size(), std::min(cfg.queries_per_class, positives.size()))) {
      take(positives[i]);
    }
  }
  std::vector<size_t> rest;
  for (size_t r = 0; r < store.size(); ++r) {
    if (!used.count(r)) rest.push_back(r);
  }
  for (size_t i : rng.sample_indices(rest.size(), std::min(cfg.base_queries, rest.size()))) take(rest[i]);
  require(!query_rows.empty(), ErrorKind::kValidation, "episode has no query clips");

  ep.queries = normalize_rows(store.rows(query_rows), "zero-norm embedding");
  ep.labels = label_matrix(store, base.classes, query_rows);
  return ep;
}

/// Trains only the generator; the base classifier is read-only.
inline EpisodicResult dfsl_train_episodic(WeightGenerator gen, const BaseClassifier& base,
                                          const EmbeddingStore& store, const EpisodicConfig& cfg = {}) {
  EpisodicResult result;
  gen.validate();
  require(base.num_classes() >= cfg.pseudo_novel + 1, ErrorKind::kValidation,
          "episodic training needs at least " + std::to_string(cfg.pseudo_novel + 1) + " base classes");
  const auto eligible = episodic_eligible(base, store, cfg.criteria, &result.warnings);
  if (cfg.iterations > 0) {
    require(eligible.size() >= cfg.pseudo_novel, ErrorKind::kValidation,
            "only " + std::to_string(eligible.size()) + " base classes have enough conforming clips for " +
                describe(cfg.criteria));
  }

  Rng rng(cfg.seed);
  const Eigen::Index d = gen.dim();
  Adam opt_avg(d, 1, cfg.adam), opt_att(d, 1, cfg.adam), opt_keys(gen.keys.rows(), d, cfg.adam),
      opt_scale(1, 1, cfg.adam);
  for (size_t it = 0; it < cfg.iterations; ++it) {
    const Episode ep = sample_episode(base, store, eligible, cfg, rng);
    GeneratorGrad g;
    result.loss.push_back(episode_loss(gen, base, ep, &g));
    opt_avg.step(gen.phi_avg, g.phi_avg);
    opt_att.step(gen.phi_att, g.phi_att);
    opt_keys.step(gen.keys, g.keys);
    Eigen::Matrix<double, 1, 1> s{gen.att_scale}, gs{g.att_scale};
    opt_scale.step(s, gs);
    gen.att_scale = std::max(1e-3, s(0, 0));
  }
  result.generator = std::move(gen);
  return result;
}

}  // namespace polyfs
