#pragma once

#include <cmath>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "polyfs/embed/store.hpp"
#include "polyfs/fewshot/cosine.hpp"
#include "polyfs/util/rng.hpp"

namespace polyfs {

inline constexpr size_t kNegativeGrid[] = {100, 500, 1000, 2000, 5000};

struct LRConfig {
  size_t n_negatives = 1000;
  double l2_strength = 1.0;  // inverse regularization strength
  size_t max_iter = 1000;
  double tol = 1e-4;
};

/// Per-sample weights for a balanced binary problem: total / (2 * class count).
inline std::pair<double, double> balanced_sample_weights(size_t n_pos, size_t n_neg) {
  require(n_pos > 0 && n_neg > 0, ErrorKind::kInvalidArgument, "balanced weights need both classes");
  const double total = static_cast<double>(n_pos + n_neg);
  return {total / (2.0 * static_cast<double>(n_pos)), total / (2.0 * static_cast<double>(n_neg))};
}

struct BinaryLogReg {
  Eigen::VectorXd coef;
  double intercept = 0.0;
  bool prior_only = false;
  double prior = 0.5;
  size_t iterations = 0;
  bool converged = false;

  double score(const Eigen::VectorXd& z) const { return prior_only ? prior : sigmoid(coef.dot(z) + intercept); }

  Eigen::VectorXd scores(const Eigen::MatrixXd& queries) const {
    if (prior_only) return Eigen::VectorXd::Constant(queries.rows(), prior);
    return ((queries * coef).array() + intercept).unaryExpr([](double x) { return sigmoid(x); }).matrix();
  }
};

/// (1/S) sum_i s_i * logloss_i + |coef|^2 / (2 C S), S = sum of sample
/// weights; the intercept is the last parameter and is not penalized.
inline double lr_objective(const Eigen::VectorXd& params, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& sw, double c, Eigen::VectorXd* grad = nullptr) {
  const Eigen::Index d = x.cols();
  const double total = sw.sum();
  const Eigen::VectorXd coef = params.head(d);
  const double b = params[d];
  const Eigen::VectorXd logits = (x * coef).array() + b;
  double loss = 0.0;
  Eigen::VectorXd resid(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    loss += sw[i] * bce_with_logit(logits[i], y[i]);
    resid[i] = sw[i] * (sigmoid(logits[i]) - y[i]);
  }
  loss = loss / total + coef.squaredNorm() / (2.0 * c * total);
  if (grad) {
    grad->resize(d + 1);
    grad->head(d) = (x.transpose() * resid + coef / c) / total;
    (*grad)[d] = resid.sum() / total;
  }
  return loss;
}

struct LRFitResult {
  BinaryLogReg model;
  double final_loss = 0.0;
  double initial_loss = 0.0;
  std::vector<std::string> warnings;
};

/// Weighted, L2-penalized logistic regression fitted with L-BFGS and an
/// Armijo backtracking line search.
inline LRFitResult lr_fit_matrix(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& sw,
                                 const LRConfig& cfg) {
  require(x.rows() == y.size() && sw.size() == y.size() && x.rows() > 0, ErrorKind::kInvalidArgument,
          "logistic regression inputs disagree");
  require(cfg.l2_strength > 0.0 && cfg.tol > 0.0, ErrorKind::kInvalidArgument, "bad LR configuration");
  LRFitResult out;
  const Eigen::Index d = x.cols();
  out.model.coef = Eigen::VectorXd::Zero(d);
  out.model.prior = sw.dot(y) / sw.sum();

  bool identical = true;
  for (Eigen::Index i = 1; i < x.rows() && identical; ++i) identical = x.row(i) == x.row(0);
  if (identical) {
    out.model.prior_only = true;
    out.warnings.push_back("all training features identical; using prior scorer");
    return out;
  }

  Eigen::VectorXd p = Eigen::VectorXd::Zero(d + 1), g;
  double f = lr_objective(p, x, y, sw, cfg.l2_strength, &g);
  out.initial_loss = f;
  constexpr size_t kMemory = 10;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> hist;  // (s, y) pairs
  size_t it = 0;
  bool converged = g.lpNorm<Eigen::Infinity>() <= cfg.tol;
  while (!converged && it < cfg.max_iter) {
    // two-loop recursion
    Eigen::VectorXd q = g;
    std::vector<double> alpha(hist.size());
    for (size_t k = hist.size(); k-- > 0;) {
      const auto& [s, yk] = hist[k];
      alpha[k] = s.dot(q) / yk.dot(s);
      q -= alpha[k] * yk;
    }
    if (!hist.empty()) q *= hist.back().first.dot(hist.back().second) / hist.back().second.squaredNorm();
    for (size_t k = 0; k < hist.size(); ++k) {
      const auto& [s, yk] = hist[k];
      const double beta = yk.dot(q) / yk.dot(s);
      q += s * (alpha[k] - beta);
    }
    Eigen::VectorXd dir = -q;
    double slope = g.dot(dir);
    if (slope >= 0.0) {
      hist.clear();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    Eigen::VectorXd p_new, g_new;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      p_new = p + step * dir;
      f_new = lr_objective(p_new, x, y, sw, cfg.l2_strength, &g_new);
      if (f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++it;
    if (!accepted) break;
    Eigen::VectorXd s = p_new - p, yk = g_new - g;
    if (s.dot(yk) > 1e-12) {
      hist.emplace_back(std::move(s), std::move(yk));
      if (hist.size() > kMemory) hist.pop_front();
    }
    p = std::move(p_new);
    g = std::move(g_new);
    f = f_new;
    converged = g.lpNorm<Eigen::Infinity>() <= cfg.tol;
  }
  out.model.coef = p.head(d);
  out.model.intercept = p[d];
  out.model.iterations = it;
  out.model.converged = converged;
  out.final_loss = f;
  if (!converged) out.warnings.push_back("logistic regression stopped before reaching tolerance");
  return out;
}

/// Binary model for one novel class: the support rows are positives and
/// min(n_negatives, |pool|) rows drawn uniformly without replacement from
/// `negatives` are negatives; samples are weighted to balance the classes.
inline LRFitResult lr_fit(const Eigen::MatrixXd& support, const EmbeddingStore& negatives, const LRConfig& cfg,
                          Rng& rng) {
  require(support.rows() >= 1, ErrorKind::kInvalidArgument, "empty support set");
  require(cfg.n_negatives >= 1, ErrorKind::kInvalidArgument, "n_negatives must be at least 1");
  require(!negatives.empty() && static_cast<Eigen::Index>(negatives.dim()) == support.cols(),
          ErrorKind::kInvalidArgument, "negative pool is empty or has the wrong dimension");
  const auto neg_rows = rng.sample_indices(negatives.size(), std::min(cfg.n_negatives, negatives.size()));
  const Eigen::Index n_pos = support.rows();
  const auto n_neg = static_cast<Eigen::Index>(neg_rows.size());
  Eigen::MatrixXd x(n_pos + n_neg, support.cols());
  x.topRows(n_pos) = support;
  x.bottomRows(n_neg) = negatives.rows(neg_rows);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n_pos + n_neg);
  y.head(n_pos).setOnes();
  const auto [w_pos, w_neg] = balanced_sample_weights(static_cast<size_t>(n_pos), static_cast<size_t>(n_neg));
  Eigen::VectorXd sw(n_pos + n_neg);
  sw.head(n_pos).setConstant(w_pos);
  sw.tail(n_neg).setConstant(w_neg);
  return lr_fit_matrix(x, y, sw, cfg);
}

}  // namespace polyfs
