#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "polyfs/util/error.hpp"

namespace polyfs {

struct SourceEntry {
  std::string file_path;  // resolved against the manifest directory
  std::string class_label;
  double duration_s = 0.0;

  friend bool operator==(const SourceEntry&, const SourceEntry&) = default;
};

struct SourceManifest {
  std::vector<SourceEntry> entries;

  std::vector<std::string> classes() const {
    std::set<std::string> s;
    for (const auto& e : entries) s.insert(e.class_label);
    return {s.begin(), s.end()};
  }

  std::map<std::string, std::vector<size_t>> by_class() const {
    std::map<std::string, std::vector<size_t>> m;
    for (size_t i = 0; i < entries.size(); ++i) m[entries[i].class_label].push_back(i);
    return m;
  }

  /// Entries whose file_path is in `paths`, in manifest order.
  SourceManifest subset(const std::set<std::string>& paths) const {
    SourceManifest out;
    for (const auto& e : entries) {
      if (paths.count(e.file_path)) out.entries.push_back(e);
    }
    return out;
  }
};

struct ManifestOptions {
  double max_duration_s = 4.0;  // clips must be strictly shorter
  bool check_files = true;
};

struct IngestResult {
  SourceManifest manifest;
  std::vector<std::string> warnings;
};

namespace manifest_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace manifest_detail

/// Parses a `file_path,class_label,duration_s` CSV. Rows with
/// duration_s >= max_duration_s are dropped with a warning.
inline IngestResult ingest_manifest(std::istream& in, const std::filesystem::path& base_dir,
                                    const ManifestOptions& opts = {}, const std::string& name = "manifest") {
  using manifest_detail::split_csv_line;
  IngestResult result;
  std::string line;
  size_t line_no = 0;
  bool header_seen = false;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    const std::string where = name + ":" + std::to_string(line_no);
    if (!header_seen) {
      require(fields.size() == 3 && fields[0] == "file_path" && fields[1] == "class_label" &&
                  fields[2] == "duration_s",
              ErrorKind::kFormat, where + ": expected header file_path,class_label,duration_s");
      header_seen = true;
      continue;
    }
    require(fields.size() == 3, ErrorKind::kFormat, where + ": malformed row");
    SourceEntry e;
    std::filesystem::path p(fields[0]);
    e.file_path = (p.is_relative() ? base_dir / p : p).lexically_normal().string();
    e.class_label = fields[1];
    require(!fields[0].empty() && !e.class_label.empty(), ErrorKind::kFormat, where + ": malformed row");
    try {
      size_t used = 0;
      e.duration_s = std::stod(fields[2], &used);
      require(used == fields[2].size(), ErrorKind::kFormat, where + ": malformed row");
    } catch (const std::logic_error&) {
      fail(ErrorKind::kFormat, where + ": malformed row");
    }
    require(std::isfinite(e.duration_s) && e.duration_s > 0.0, ErrorKind::kValidation,
            where + ": duration_s must be positive");
    require(seen.insert(e.file_path).second, ErrorKind::kValidation, where + ": duplicate entry " + fields[0]);
    if (opts.check_files) {
      require(std::filesystem::exists(e.file_path), ErrorKind::kNotFound, where + ": missing file " + e.file_path);
    }
    if (e.duration_s >= opts.max_duration_s) {
      result.warnings.push_back(where + ": " + fields[0] + " is " + std::to_string(e.duration_s) +
                                " s (limit " + std::to_string(opts.max_duration_s) + " s), skipped");
      continue;
    }
    result.manifest.entries.push_back(std::move(e));
  }
  require(header_seen, ErrorKind::kValidation, "empty manifest");
  require(!result.manifest.entries.empty(), ErrorKind::kValidation, "empty manifest");
  return result;
}

inline IngestResult ingest_manifest(const std::filesystem::path& path, const ManifestOptions& opts = {}) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kNotFound, "cannot open " + path.string());
  return ingest_manifest(in, path.parent_path(), opts, path.string());
}

/// Writes absolute or base-relative paths; durations with full precision.
inline void write_manifest(const std::filesystem::path& path, const SourceManifest& m) {
  using manifest_detail::csv_field;
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  out << "file_path,class_label,duration_s\n";
  char buf[64];
  for (const auto& e : m.entries) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.duration_s);
    out << csv_field(e.file_path) << ',' << csv_field(e.class_label) << ',' << buf << '\n';
  }
  require(out.good(), ErrorKind::kIo, "write failed: " + path.string());
}

}  // namespace polyfs
