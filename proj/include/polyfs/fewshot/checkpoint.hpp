#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polyfs/embed/store.hpp"
#include "polyfs/fewshot/base_classifier.hpp"
#include "polyfs/fewshot/dfsl.hpp"
#include "polyfs/fewshot/logreg.hpp"

namespace polyfs {

namespace checkpoint_detail {

inline void append_rows(std::vector<float>& data, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(static_cast<float>(m(r, c)));
  }
}

inline Eigen::MatrixXd take_rows(const TensorFile& t, size_t first, size_t count) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(t.dim));
  for (size_t r = 0; r < count; ++r) {
    for (size_t c = 0; c < t.dim; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.data[(first + r) * t.dim + c];
    }
  }
  return m;
}

inline void expect_kind(const TensorFile& t, const std::string& kind, const std::string& name) {
  require(t.header.value("kind", std::string()) == kind, ErrorKind::kFormat,
          name + ": expected a '" + kind + "' checkpoint");
}

}  // namespace checkpoint_detail

inline TensorFile base_to_tensor(const BaseClassifier& clf, const json& extra = json::object()) {
  TensorFile t;
  t.header = extra;
  t.header["kind"] = "base";
  t.header["classes"] = clf.classes;
  t.header["scale"] = clf.scale;
  t.header["centered"] = clf.center.size() > 0;
  t.n = clf.num_classes() + (clf.center.size() > 0 ? 1 : 0);
  t.dim = static_cast<size_t>(clf.dim());
  checkpoint_detail::append_rows(t.data, clf.weights);
  if (clf.center.size() > 0) checkpoint_detail::append_rows(t.data, clf.center.transpose());
  return t;
}

inline BaseClassifier base_from_tensor(const TensorFile& t, const std::string& name = "checkpoint") {
  checkpoint_detail::expect_kind(t, "base", name);
  BaseClassifier clf;
  bool has_center = false;
  try {
    clf.classes = t.header.at("classes").get<std::vector<std::string>>();
    clf.scale = t.header.at("scale").get<double>();
    has_center = t.header.value("centered", false);
  } catch (const json::exception&) {
    fail(ErrorKind::kFormat, name + ": malformed base header");
  }
  require(clf.classes.size() + (has_center ? 1 : 0) == t.n, ErrorKind::kFormat, name + ": class count mismatch");
  clf.weights = checkpoint_detail::take_rows(t, 0, clf.classes.size());
  if (has_center) clf.center = checkpoint_detail::take_rows(t, clf.classes.size(), 1).row(0).transpose();
  return clf;
}

/// Rows: phi_avg, phi_att, then one key per base class.
inline TensorFile generator_to_tensor(const WeightGenerator& g, const std::vector<std::string>& base_classes,
                                      const json& extra = json::object()) {
  TensorFile t;
  t.header = extra;
  t.header["kind"] = "dfsl";
  t.header["base_classes"] = base_classes;
  t.header["att_scale"] = g.att_scale;
  t.header["att_on"] = to_string(g.att_on);
  t.n = 2 + static_cast<size_t>(g.keys.rows());
  t.dim = static_cast<size_t>(g.dim());
  checkpoint_detail::append_rows(t.data, g.phi_avg.transpose());
  checkpoint_detail::append_rows(t.data, g.phi_att.transpose());
  checkpoint_detail::append_rows(t.data, g.keys);
  return t;
}

inline WeightGenerator generator_from_tensor(const TensorFile& t, std::vector<std::string>* base_classes = nullptr,
                                             const std::string& name = "checkpoint") {
  checkpoint_detail::expect_kind(t, "dfsl", name);
  require(t.n >= 3, ErrorKind::kFormat, name + ": generator checkpoint too small");
  WeightGenerator g;
  try {
    g.att_scale = t.header.at("att_scale").get<double>();
    g.att_on = parse_attention_on(t.header.value("att_on", std::string("example")));
    if (base_classes) *base_classes = t.header.at("base_classes").get<std::vector<std::string>>();
  } catch (const json::exception&) {
    fail(ErrorKind::kFormat, name + ": malformed generator header");
  }
  g.phi_avg = checkpoint_detail::take_rows(t, 0, 1).row(0).transpose();
  g.phi_att = checkpoint_detail::take_rows(t, 1, 1).row(0).transpose();
  g.keys = checkpoint_detail::take_rows(t, 2, t.n - 2);
  g.validate();
  return g;
}

inline TensorFile lr_to_tensor(const std::vector<std::string>& classes, const std::vector<BinaryLogReg>& models,
                               const json& extra = json::object()) {
  require(classes.size() == models.size() && !models.empty(), ErrorKind::kInvalidArgument,
          "one model per class required");
  TensorFile t;
  t.header = extra;
  t.header["kind"] = "lr";
  t.header["classes"] = classes;
  json intercepts = json::array(), priors = json::array();
  t.n = models.size();
  t.dim = static_cast<size_t>(models.front().coef.size());
  for (const auto& m : models) {
    intercepts.push_back(m.intercept);
    priors.push_back(m.prior_only ? json(m.prior) : json(nullptr));
    checkpoint_detail::append_rows(t.data, m.coef.transpose());
  }
  t.header["intercepts"] = intercepts;
  t.header["priors"] = priors;
  return t;
}

inline std::vector<BinaryLogReg> lr_from_tensor(const TensorFile& t, std::vector<std::string>* classes = nullptr,
                                                const std::string& name = "checkpoint") {
  checkpoint_detail::expect_kind(t, "lr", name);
  std::vector<BinaryLogReg> out(t.n);
  try {
    if (classes) *classes = t.header.at("classes").get<std::vector<std::string>>();
    const auto& intercepts = t.header.at("intercepts");
    const auto& priors = t.header.at("priors");
    require(intercepts.size() == t.n && priors.size() == t.n, ErrorKind::kFormat, name + ": model count mismatch");
    for (size_t k = 0; k < t.n; ++k) {
      out[k].coef = checkpoint_detail::take_rows(t, k, 1).row(0).transpose();
      out[k].intercept = intercepts[k].get<double>();
      if (!priors[k].is_null()) {
        out[k].prior_only = true;
        out[k].prior = priors[k].get<double>();
      }
    }
  } catch (const json::exception&) {
    fail(ErrorKind::kFormat, name + ": malformed lr header");
  }
  return out;
}

}  // namespace polyfs
