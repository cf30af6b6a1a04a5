#pragma once

#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polyfs/fewshot/base_classifier.hpp"
#include "polyfs/fewshot/logreg.hpp"

namespace polyfs {

enum class Method { kProto, kDfsl, kLr };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kProto: return "proto";
    case Method::kDfsl: return "dfsl";
    case Method::kLr: return "lr";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "proto" || s == "prototype") return Method::kProto;
  if (s == "dfsl") return Method::kDfsl;
  if (s == "lr") return Method::kLr;
  fail(ErrorKind::kInvalidArgument, "unknown method '" + s + "'");
}

/// Novel-class extension: weight rows appended to the cosine classifier
/// (proto, dfsl) or one binary model per class (lr).
struct NovelModels {
  Method method = Method::kProto;
  std::vector<std::string> classes;
  Eigen::MatrixXd weights;
  std::vector<BinaryLogReg> lr;
};

/// Scores over base classes followed by novel classes.
inline Eigen::MatrixXd predict_joint(const BaseClassifier& base, const NovelModels& novel,
                                     const Eigen::MatrixXd& queries) {
  std::set<std::string> seen(base.classes.begin(), base.classes.end());
  for (const auto& c : novel.classes) {
    require(seen.insert(c).second, ErrorKind::kInvalidArgument, "class '" + c + "' appears twice in the label space");
  }
  const auto n_base = static_cast<Eigen::Index>(base.num_classes());
  const auto n_novel = static_cast<Eigen::Index>(novel.classes.size());
  Eigen::MatrixXd out(queries.rows(), n_base + n_novel);
  if (novel.method == Method::kLr) {
    require(novel.lr.size() == novel.classes.size(), ErrorKind::kInvalidArgument,
            "one binary model per novel class required");
    out.leftCols(n_base) = base.scores(queries);
    for (Eigen::Index k = 0; k < n_novel; ++k) out.col(n_base + k) = novel.lr[static_cast<size_t>(k)].scores(queries);
    return out;
  }
  require(novel.weights.rows() == n_novel, ErrorKind::kInvalidArgument, "one weight row per novel class required");
  Eigen::MatrixXd w(n_base + n_novel, base.dim());
  w.topRows(n_base) = base.weights;
  if (n_novel) w.bottomRows(n_novel) = novel.weights;
  return cosine_scores(w, queries, base.scale);
}

}  // namespace polyfs
