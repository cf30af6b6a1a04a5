#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "polyfs/scene/manifest.hpp"
#include "polyfs/util/jsonl.hpp"
#include "polyfs/util/rng.hpp"

namespace polyfs {

inline constexpr std::array<std::string_view, 5> kFolds = {"base-train", "base-val", "base-test", "novel-val",
                                                           "novel-test"};

struct SplitSizes {
  size_t n_base = 59;
  size_t n_val = 15;
  size_t n_test = 15;
};

/// Class-level partition into base / novel-val / novel-test, plus the source
/// clips assigned to each data fold. Base-class clips are divided between
/// base-train, base-val and base-test; novel classes keep all their clips in
/// their own fold.
struct ClassSplit {
  std::vector<std::string> base;
  std::vector<std::string> novel_val;
  std::vector<std::string> novel_test;
  std::map<std::string, std::vector<std::string>> folds;  // fold -> source file paths

  const std::vector<std::string>& classes_for(const std::string& fold) const {
    if (fold.rfind("base", 0) == 0) return base;
    if (fold == "novel-val") return novel_val;
    if (fold == "novel-test") return novel_test;
    fail(ErrorKind::kInvalidArgument, "unknown fold '" + fold + "'");
  }

  /// Sources usable for a fold, with "base" accepted as "base-train".
  SourceManifest pool(const SourceManifest& manifest, std::string fold) const {
    if (fold == "base") fold = "base-train";
    classes_for(fold);
    auto it = folds.find(fold);
    require(it != folds.end(), ErrorKind::kValidation, "split has no fold '" + fold + "'");
    return manifest.subset({it->second.begin(), it->second.end()});
  }
};

/// Fraction of each base class's clips used for train / val / test (5:1:1).
struct BaseFoldRatio {
  double train = 5.0;
  double val = 1.0;
  double test = 1.0;
};

inline ClassSplit partition_classes(const SourceManifest& manifest, const SplitSizes& sizes, Rng& rng,
                                    size_t min_clips = 20, const BaseFoldRatio& ratio = {}) {
  const auto groups = manifest.by_class();
  std::vector<std::string> eligible;
  for (const auto& [label, idx] : groups) {
    if (idx.size() >= min_clips) eligible.push_back(label);
  }
  const size_t wanted = sizes.n_base + sizes.n_val + sizes.n_test;
  require(wanted <= eligible.size(), ErrorKind::kValidation,
          "insufficient eligible classes: need " + std::to_string(wanted) + ", have " +
              std::to_string(eligible.size()) + " with >= " + std::to_string(min_clips) + " clips");
  rng.shuffle(eligible);
  ClassSplit split;
  split.base.assign(eligible.begin(), eligible.begin() + static_cast<ptrdiff_t>(sizes.n_base));
  split.novel_val.assign(eligible.begin() + static_cast<ptrdiff_t>(sizes.n_base),
                         eligible.begin() + static_cast<ptrdiff_t>(sizes.n_base + sizes.n_val));
  split.novel_test.assign(eligible.begin() + static_cast<ptrdiff_t>(sizes.n_base + sizes.n_val),
                          eligible.begin() + static_cast<ptrdiff_t>(wanted));
  std::sort(split.base.begin(), split.base.end());
  std::sort(split.novel_val.begin(), split.novel_val.end());
  std::sort(split.novel_test.begin(), split.novel_test.end());

  for (auto fold : kFolds) split.folds[std::string(fold)];
  const double total = ratio.train + ratio.val + ratio.test;
  for (const auto& label : split.base) {
    std::vector<size_t> idx = groups.at(label);
    rng.shuffle(idx);
    const size_t n = idx.size();
    const size_t floor = n >= 3 ? 1 : 0;
    const size_t n_val = std::max(floor, static_cast<size_t>(std::llround(n * ratio.val / total)));
    const size_t n_test = std::max(floor, static_cast<size_t>(std::llround(n * ratio.test / total)));
    for (size_t i = 0; i < n; ++i) {
      const char* fold = i < n_val ? "base-val" : i < n_val + n_test ? "base-test" : "base-train";
      split.folds[fold].push_back(manifest.entries[idx[i]].file_path);
    }
  }
  for (const auto& label : split.novel_val) {
    for (size_t i : groups.at(label)) split.folds["novel-val"].push_back(manifest.entries[i].file_path);
  }
  for (const auto& label : split.novel_test) {
    for (size_t i : groups.at(label)) split.folds["novel-test"].push_back(manifest.entries[i].file_path);
  }
  for (auto& [fold, paths] : split.folds) std::sort(paths.begin(), paths.end());
  return split;
}

inline json split_to_json(const ClassSplit& s) {
  return json{{"classes", {{"base", s.base}, {"novel_val", s.novel_val}, {"novel_test", s.novel_test}}},
              {"folds", s.folds}};
}

inline ClassSplit split_from_json(const json& j) {
  ClassSplit s;
  try {
    s.base = j.at("classes").at("base").get<std::vector<std::string>>();
    s.novel_val = j.at("classes").at("novel_val").get<std::vector<std::string>>();
    s.novel_test = j.at("classes").at("novel_test").get<std::vector<std::string>>();
    s.folds = j.at("folds").get<std::map<std::string, std::vector<std::string>>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed split: ") + e.what());
  }
  std::set<std::string> all;
  for (const auto* group : {&s.base, &s.novel_val, &s.novel_test}) {
    for (const auto& c : *group) {
      require(all.insert(c).second, ErrorKind::kValidation, "class '" + c + "' appears in two splits");
    }
  }
  return s;
}

}  // namespace polyfs
