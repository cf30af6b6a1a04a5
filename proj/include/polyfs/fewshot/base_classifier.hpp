#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polyfs/embed/store.hpp"
#include "polyfs/eval/metrics.hpp"
#include "polyfs/fewshot/adam.hpp"
#include "polyfs/fewshot/cosine.hpp"
#include "polyfs/util/rng.hpp"

namespace polyfs {

/// Multi-label cosine classifier: score_k(z) = sigmoid(scale * cos(w_k, z)).
struct BaseClassifier {
  std::vector<std::string> classes;
  Eigen::MatrixXd weights;  // one row per class
  double scale = 10.0;
  Eigen::VectorXd center;  // subtracted from inputs before use; empty when unused

  size_t num_classes() const { return classes.size(); }
  Eigen::Index dim() const { return weights.cols(); }

  Eigen::MatrixXd scores(const Eigen::MatrixXd& queries) const { return cosine_scores(weights, queries, scale); }
};

/// Mean row of a store.
inline Eigen::VectorXd feature_center(const EmbeddingStore& store) {
  require(!store.empty(), ErrorKind::kValidation, "cannot center an empty store");
  return store.matrix().colwise().mean().transpose();
}

/// Copy of `store` with every row replaced by normalize(row - center).
inline EmbeddingStore centered(const EmbeddingStore& store, const Eigen::VectorXd& center) {
  if (center.size() == 0) return store;
  require(static_cast<size_t>(center.size()) == store.dim(), ErrorKind::kValidation,
          "center has dim " + std::to_string(center.size()) + ", store has " + std::to_string(store.dim()));
  EmbeddingStore out(store.dim());
  out.attributes() = store.attributes();
  for (size_t i = 0; i < store.size(); ++i) out.add(store.ids()[i], unit(store.vector(i) - center), store.meta(i));
  return out;
}

/// Multi-hot label matrix (rows = store rows, columns = `classes`).
inline Eigen::MatrixXd label_matrix(const EmbeddingStore& store, const std::vector<std::string>& classes,
                                    std::span<const size_t> rows) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                            static_cast<Eigen::Index>(classes.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t k = 0; k < classes.size(); ++k) {
      if (store.meta(rows[r]).has(classes[k])) y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = 1.0;
    }
  }
  return y;
}

inline Eigen::MatrixXd label_matrix(const EmbeddingStore& store, const std::vector<std::string>& classes) {
  std::vector<size_t> all(store.size());
  std::iota(all.begin(), all.end(), size_t{0});
  return label_matrix(store, classes, all);
}

inline double mean_f(const std::vector<ClassPRF>& prf) {
  if (prf.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : prf) s += r.f;
  return s / static_cast<double>(prf.size());
}

struct BaseTrainConfig {
  AdamConfig adam{};
  size_t max_epochs = 100;
  size_t patience = 5;
  size_t batch_size = 64;
  double init_scale = 10.0;
  bool learn_scale = true;
  double threshold = 0.5;
  uint64_t seed = 0;
};

struct BaseTrainResult {
  BaseClassifier classifier;
  std::vector<double> train_loss;  // mean batch loss per epoch
  std::vector<double> val_f;       // validation mean F per epoch
  size_t best_epoch = 0;           // epochs completed at the returned snapshot
  std::vector<std::string> warnings;
};

/// Mean BCE over queries x classes and its gradients w.r.t. the raw weight
/// rows and the scale. `unit_queries` rows must be unit length.
inline double base_loss_and_grad(const BaseClassifier& clf, const Eigen::MatrixXd& unit_queries,
                                 const Eigen::MatrixXd& labels, Eigen::MatrixXd* grad_w, double* grad_s) {
  const Eigen::VectorXd norms = clf.weights.rowwise().norm();
  const Eigen::MatrixXd w_hat = norms.cwiseInverse().asDiagonal() * clf.weights;
  const Eigen::MatrixXd cos = unit_queries * w_hat.transpose();
  const double denom = static_cast<double>(cos.size());
  double loss = 0.0;
  Eigen::MatrixXd g_logit(cos.rows(), cos.cols());
  for (Eigen::Index r = 0; r < cos.rows(); ++r) {
    for (Eigen::Index k = 0; k < cos.cols(); ++k) {
      const double logit = clf.scale * cos(r, k);
      loss += bce_with_logit(logit, labels(r, k));
      g_logit(r, k) = (sigmoid(logit) - labels(r, k)) / denom;
    }
  }
  if (grad_s) *grad_s = (g_logit.array() * cos.array()).sum();
  if (grad_w) {
    const Eigen::MatrixXd g_what = clf.scale * g_logit.transpose() * unit_queries;  // K x d
    grad_w->resize(clf.weights.rows(), clf.weights.cols());
    for (Eigen::Index k = 0; k < clf.weights.rows(); ++k) {
      const double radial = g_what.row(k).dot(w_hat.row(k));
      grad_w->row(k) = (g_what.row(k) - radial * w_hat.row(k)) / norms[k];
    }
  }
  return loss / denom;
}

/// Trains weight rows (and the scale) with Adam on shuffled mini-batches and
/// keeps the snapshot with the best validation mean F-measure; stops after
/// `patience` epochs without improvement. Classes with no training
/// positives are dropped with a warning. Without a validation store all
/// max_epochs run and the final weights are returned.
inline BaseTrainResult train_base(const EmbeddingStore& train, const EmbeddingStore* val,
                                  const BaseTrainConfig& cfg = {}, std::vector<std::string> classes = {}) {
  BaseTrainResult result;
  if (classes.empty()) classes = train.label_set();
  {
    const Eigen::MatrixXd y = label_matrix(train, classes);
    std::vector<std::string> kept;
    for (size_t k = 0; k < classes.size(); ++k) {
      if (y.col(static_cast<Eigen::Index>(k)).sum() > 0.0) {
        kept.push_back(classes[k]);
      } else {
        result.warnings.push_back("class '" + classes[k] + "' has no training positives; excluded");
      }
    }
    classes = std::move(kept);
  }
  require(classes.size() >= 2, ErrorKind::kValidation, "base training needs at least 2 classes with positives");
  require(train.dim() > 0, ErrorKind::kValidation, "empty embedding dimension");

  Rng rng(cfg.seed);
  BaseClassifier& clf = result.classifier;
  clf.classes = classes;
  clf.scale = cfg.init_scale;
  const auto k_rows = static_cast<Eigen::Index>(classes.size());
  const auto d = static_cast<Eigen::Index>(train.dim());
  clf.weights.resize(k_rows, d);
  for (Eigen::Index k = 0; k < k_rows; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) clf.weights(k, j) = rng.normal() / std::sqrt(static_cast<double>(d));
  }

  const Eigen::MatrixXd queries = normalize_rows(train.matrix(), "zero-norm embedding");
  const Eigen::MatrixXd labels = label_matrix(train, classes);
  Eigen::MatrixXd val_queries, val_labels;
  if (val && !val->empty()) {
    val_queries = val->matrix();
    val_labels = label_matrix(*val, classes);
  }
  auto val_score = [&]() {
    return mean_f(f_measure(clf.scores(val_queries), val_labels, cfg.threshold));
  };

  Adam opt_w(k_rows, d, cfg.adam);
  Adam opt_s(1, 1, cfg.adam);
  BaseClassifier best = clf;
  double best_f = val_queries.rows() ? val_score() : -1.0;
  size_t stale = 0;
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t stop = std::min(order.size(), start + cfg.batch_size);
      Eigen::MatrixXd bq(static_cast<Eigen::Index>(stop - start), d);
      Eigen::MatrixXd by(static_cast<Eigen::Index>(stop - start), k_rows);
      for (size_t i = start; i < stop; ++i) {
        bq.row(static_cast<Eigen::Index>(i - start)) = queries.row(static_cast<Eigen::Index>(order[i]));
        by.row(static_cast<Eigen::Index>(i - start)) = labels.row(static_cast<Eigen::Index>(order[i]));
      }
      Eigen::MatrixXd gw;
      double gs = 0.0;
      epoch_loss += base_loss_and_grad(clf, bq, by, &gw, &gs);
      ++batches;
      opt_w.step(clf.weights, gw);
      if (cfg.learn_scale) {
        Eigen::Matrix<double, 1, 1> s{clf.scale}, g{gs};
        opt_s.step(s, g);
        clf.scale = std::max(1e-3, s(0, 0));
      }
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(std::max<size_t>(1, batches)));
    if (val_queries.rows() == 0) {
      best = clf;
      result.best_epoch = epoch + 1;
      continue;
    }
    const double f = val_score();
    result.val_f.push_back(f);
    if (f > best_f) {
      best_f = f;
      best = clf;
      result.best_epoch = epoch + 1;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  clf = best;
  return result;
}

}  // namespace polyfs
