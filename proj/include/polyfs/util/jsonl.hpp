#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polyfs/util/error.hpp"

namespace polyfs {

using json = nlohmann::json;

inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kNotFound, "cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                   ": malformed JSON line");
    }
  }
  return rows;
}

inline void write_jsonl(const std::filesystem::path& path,
                        const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& row : rows) {
    out << row.dump() << '\n';
  }
  require(out.good(), ErrorKind::kIo, "write failed: " + path.string());
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kNotFound, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    fail(ErrorKind::kFormat, "malformed JSON: " + path.string());
  }
}

inline void write_json(const std::filesystem::path& path, const json& value) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  out << value.dump(2) << '\n';
  require(out.good(), ErrorKind::kIo, "write failed: " + path.string());
}

}  // namespace polyfs
