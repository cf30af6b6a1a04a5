#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "polyfs/eval/protocol.hpp"
#include "polyfs/util/jsonl.hpp"

namespace polyfs {

namespace report_detail {

template <size_t N>
json optional_array(const std::array<std::optional<double>, N>& a) {
  json out = json::array();
  for (const auto& v : a) out.push_back(v ? json(*v) : json(nullptr));
  return out;
}

template <size_t N>
std::array<std::optional<double>, N> optional_from(const json& j) {
  std::array<std::optional<double>, N> out;
  for (size_t b = 0; b < N && b < j.size(); ++b) {
    if (!j[b].is_null()) out[b] = j[b].get<double>();
  }
  return out;
}

inline json interval_json(const Interval& i) { return {{"mean", i.mean}, {"ci95", {i.lo, i.hi}}}; }

inline Interval interval_from(const json& j) {
  return {j.at("mean").get<double>(), j.at("ci95")[0].get<double>(), j.at("ci95")[1].get<double>()};
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write " + p.string());
  out << text;
}

}  // namespace report_detail

inline json report_to_json(const EvalReport& r) {
  using namespace report_detail;
  json j;
  j["config"] = r.config;
  j["base_classes"] = r.base_classes;
  j["novel_classes"] = r.novel_classes;
  j["counts"] = {{"base_test_clips", r.base_test_clips}, {"novel_pool_clips", r.novel_pool_clips}};
  j["base_f"] = interval_json(r.base_f);
  j["novel_f"] = interval_json(r.novel_f);
  json per_class = json::object();
  const size_t nb = r.base_classes.size();
  for (size_t c = 0; c < r.class_f.size(); ++c) {
    per_class[c < nb ? r.base_classes[c] : r.novel_classes[c - nb]] = r.class_f[c];
  }
  j["class_f"] = per_class;
  json snr_db = json::array();
  for (double s : kSnrGridDb) snr_db.push_back(s);
  j["breakdown"] = {
      {"polyphony", {{"buckets", {"1", "2", "3", "4+"}},
                     {"base_f", optional_array(r.poly_base_f)},
                     {"novel_f", optional_array(r.poly_novel_f)}}},
      {"snr_recall", {{"snr_db", snr_db},
                      {"base", optional_array(r.snr_base_recall)},
                      {"novel", optional_array(r.snr_novel_recall)}}},
      {"notes", {"clips with polyphony of 4 or more fall in the 4+ bucket", "null marks an empty bucket"}}};
  json its = json::array();
  for (const auto& it : r.iterations) {
    its.push_back({{"seed", it.seed},
                   {"base_f", it.base_f},
                   {"novel_f", it.novel_f},
                   {"test_clips", it.test_clips},
                   {"poly_novel_f", optional_array(it.breakdown.poly_novel_f)},
                   {"snr_novel_recall", optional_array(it.breakdown.snr_novel_recall)}});
  }
  j["iterations"] = its;
  j["warnings"] = r.warnings;
  return j;
}

/// Summary-level fields only; per-iteration breakdowns are kept as JSON.
inline EvalReport report_from_json(const json& j) {
  using namespace report_detail;
  EvalReport r;
  try {
    r.config = j.at("config");
    r.base_classes = j.at("base_classes").get<std::vector<std::string>>();
    r.novel_classes = j.at("novel_classes").get<std::vector<std::string>>();
    r.base_test_clips = j.at("counts").at("base_test_clips").get<size_t>();
    r.novel_pool_clips = j.at("counts").at("novel_pool_clips").get<size_t>();
    r.base_f = interval_from(j.at("base_f"));
    r.novel_f = interval_from(j.at("novel_f"));
    for (const auto& c : r.base_classes) r.class_f.push_back(j.at("class_f").at(c).get<double>());
    for (const auto& c : r.novel_classes) r.class_f.push_back(j.at("class_f").at(c).get<double>());
    const auto& bd = j.at("breakdown");
    r.poly_base_f = optional_from<kPolyphonyBuckets>(bd.at("polyphony").at("base_f"));
    r.poly_novel_f = optional_from<kPolyphonyBuckets>(bd.at("polyphony").at("novel_f"));
    r.snr_base_recall = optional_from<kSnrBuckets>(bd.at("snr_recall").at("base"));
    r.snr_novel_recall = optional_from<kSnrBuckets>(bd.at("snr_recall").at("novel"));
    for (const auto& it : j.at("iterations")) {
      IterationResult ir;
      ir.seed = it.at("seed").get<uint64_t>();
      ir.base_f = it.at("base_f").get<double>();
      ir.novel_f = it.at("novel_f").get<double>();
      ir.test_clips = it.at("test_clips").get<size_t>();
      r.iterations.push_back(std::move(ir));
    }
    r.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed report: ") + e.what());
  }
  return r;
}

/// summary.csv, classes.csv, polyphony.csv, snr.csv and iterations.csv.
inline void write_report_csv(const std::filesystem::path& dir, const EvalReport& r) {
  using namespace report_detail;
  std::filesystem::create_directories(dir);
  std::ostringstream s;
  s << "group,mean,ci_low,ci_high\n";
  s << "base," << fmt(r.base_f.mean) << ',' << fmt(r.base_f.lo) << ',' << fmt(r.base_f.hi) << '\n';
  s << "novel," << fmt(r.novel_f.mean) << ',' << fmt(r.novel_f.lo) << ',' << fmt(r.novel_f.hi) << '\n';
  write_text(dir / "summary.csv", s.str());

  std::ostringstream c;
  c << "class,group,f\n";
  const size_t nb = r.base_classes.size();
  for (size_t k = 0; k < r.class_f.size(); ++k) {
    c << (k < nb ? r.base_classes[k] : r.novel_classes[k - nb]) << ',' << (k < nb ? "base" : "novel") << ','
      << fmt(r.class_f[k]) << '\n';
  }
  write_text(dir / "classes.csv", c.str());

  std::ostringstream p;
  p << "polyphony,base_f,novel_f\n";
  for (size_t b = 0; b < kPolyphonyBuckets; ++b) {
    p << (b + 1 == kPolyphonyBuckets ? "4+" : std::to_string(b + 1)) << ',' << fmt(r.poly_base_f[b]) << ','
      << fmt(r.poly_novel_f[b]) << '\n';
  }
  write_text(dir / "polyphony.csv", p.str());

  std::ostringstream n;
  n << "snr_db,base_recall,novel_recall\n";
  for (size_t b = 0; b < kSnrBuckets; ++b) {
    n << static_cast<int>(kSnrGridDb[b]) << ',' << fmt(r.snr_base_recall[b]) << ',' << fmt(r.snr_novel_recall[b])
      << '\n';
  }
  write_text(dir / "snr.csv", n.str());

  std::ostringstream it;
  it << "iteration,seed,base_f,novel_f,test_clips\n";
  for (size_t i = 0; i < r.iterations.size(); ++i) {
    const auto& x = r.iterations[i];
    it << i << ',' << x.seed << ',' << fmt(x.base_f) << ',' << fmt(x.novel_f) << ',' << x.test_clips << '\n';
  }
  write_text(dir / "iterations.csv", it.str());
}

namespace report_detail {

// Grouped bars: one group per bucket, base and novel side by side.
template <size_t N>
std::string bar_chart(const std::string& title, const std::array<std::string, N>& names,
                      const std::array<std::optional<double>, N>& base,
                      const std::array<std::optional<double>, N>& novel) {
  const double w = 60.0 * N + 80.0, h = 260.0, top = 40.0, plot_h = 170.0, left = 50.0;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  s << "<text x=\"" << left << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << w - 20 << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = top + plot_h * (1.0 - t / 4.0);
    s << "<text x=\"" << left - 30 << "\" y=\"" << y + 4 << "\" font-size=\"10\">" << fmt(t / 4.0).substr(0, 4)
      << "</text>\n";
  }
  for (size_t b = 0; b < N; ++b) {
    const double x = left + 10.0 + 60.0 * static_cast<double>(b);
    const std::array<std::pair<const std::optional<double>*, const char*>, 2> bars = {
        std::pair{&base[b], "#4c72b0"}, std::pair{&novel[b], "#dd8452"}};
    for (size_t k = 0; k < 2; ++k) {
      if (!*bars[k].first) continue;
      const double v = std::clamp(**bars[k].first, 0.0, 1.0);
      s << "<rect x=\"" << x + 22.0 * static_cast<double>(k) << "\" y=\"" << top + plot_h * (1.0 - v)
        << "\" width=\"20\" height=\"" << plot_h * v << "\" fill=\"" << bars[k].second << "\"/>\n";
    }
    s << "<text x=\"" << x + 10 << "\" y=\"" << top + plot_h + 16 << "\" font-size=\"11\">" << names[b]
      << "</text>\n";
  }
  s << "<text x=\"" << left << "\" y=\"" << h - 10 << "\" font-size=\"11\" fill=\"#4c72b0\">base</text>";
  s << "<text x=\"" << left + 50 << "\" y=\"" << h - 10 << "\" font-size=\"11\" fill=\"#dd8452\">novel</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace report_detail

inline void write_report_svg(const std::filesystem::path& dir, const EvalReport& r) {
  std::filesystem::create_directories(dir);
  report_detail::write_text(dir / "polyphony.svg",
                            report_detail::bar_chart<kPolyphonyBuckets>("F-measure by test polyphony",
                                                                        {"1", "2", "3", "4+"}, r.poly_base_f,
                                                                        r.poly_novel_f));
  std::array<std::string, kSnrBuckets> names;
  for (size_t b = 0; b < kSnrBuckets; ++b) names[b] = std::to_string(static_cast<int>(kSnrGridDb[b])) + " dB";
  report_detail::write_text(dir / "snr.svg", report_detail::bar_chart<kSnrBuckets>("Recall by event SNR", names,
                                                                                   r.snr_base_recall,
                                                                                   r.snr_novel_recall));
}

}  // namespace polyfs
