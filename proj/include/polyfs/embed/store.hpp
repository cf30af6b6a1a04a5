#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polyfs/util/jsonl.hpp"

namespace polyfs {

/// Per-clip annotations carried alongside an embedding row.
struct ClipMeta {
  std::vector<std::string> labels;
  int polyphony = 0;
  std::map<std::string, double> event_snrs;

  bool has(const std::string& label) const {
    return std::find(labels.begin(), labels.end(), label) != labels.end();
  }

  friend bool operator==(const ClipMeta&, const ClipMeta&) = default;
};

inline json meta_to_json(const ClipMeta& m) {
  return json{{"labels", m.labels}, {"polyphony", m.polyphony}, {"event_snrs", m.event_snrs}};
}

inline ClipMeta meta_from_json(const json& j) {
  ClipMeta m;
  m.labels = j.at("labels").get<std::vector<std::string>>();
  m.polyphony = j.at("polyphony").get<int>();
  m.event_snrs = j.at("event_snrs").get<std::map<std::string, double>>();
  return m;
}

/// A JSON header line followed by a raw little-endian float32 row-major
/// payload. Shared by embedding stores and model checkpoints.
struct TensorFile {
  json header;  // n, dim, dtype are filled in on write
  size_t n = 0;
  size_t dim = 0;
  std::vector<float> data;
};

namespace store_detail {

inline void append_f32le(std::string& out, float f) {
  uint32_t u;
  std::memcpy(&u, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

inline float read_f32le(const unsigned char* p) {
  const uint32_t u = uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace store_detail

inline std::string encode_tensor_file(const TensorFile& t) {
  require(t.data.size() == t.n * t.dim, ErrorKind::kInvalidArgument, "tensor payload size mismatch");
  json header = t.header;
  header["n"] = t.n;
  header["dim"] = t.dim;
  header["dtype"] = "f32le";
  std::string out = header.dump();
  out.push_back('\n');
  out.reserve(out.size() + 4 * t.data.size());
  for (float f : t.data) store_detail::append_f32le(out, f);
  return out;
}

inline TensorFile decode_tensor_file(const std::string& bytes, const std::string& name = "tensor file") {
  const size_t nl = bytes.find('\n');
  require(nl != std::string::npos, ErrorKind::kFormat, name + ": missing header line");
  TensorFile t;
  try {
    t.header = json::parse(bytes.substr(0, nl));
    t.n = t.header.at("n").get<size_t>();
    t.dim = t.header.at("dim").get<size_t>();
    require(t.header.at("dtype").get<std::string>() == "f32le", ErrorKind::kFormat, name + ": unsupported dtype");
  } catch (const json::exception&) {
    fail(ErrorKind::kFormat, name + ": malformed header");
  }
  const size_t payload = bytes.size() - nl - 1;
  require(payload == 4 * t.n * t.dim, ErrorKind::kFormat,
          name + ": payload has " + std::to_string(payload) + " bytes, header declares " +
              std::to_string(t.n) + " x " + std::to_string(t.dim) + " floats");
  t.data.resize(t.n * t.dim);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
  for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = store_detail::read_f32le(p + 4 * i);
  return t;
}

inline void write_tensor_file(const std::filesystem::path& path, const TensorFile& t) {
  const std::string bytes = encode_tensor_file(t);
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::kIo, "write failed: " + path.string());
}

inline TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kNotFound, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor_file(bytes, path.string());
}

/// Id-indexed embedding rows with clip metadata. Immutable once loaded.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(size_t dim) : dim_(dim) {}

  size_t size() const { return ids_.size(); }
  size_t dim() const { return dim_; }
  bool empty() const { return ids_.empty(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<ClipMeta>& meta() const { return meta_; }
  const ClipMeta& meta(size_t i) const { return meta_[i]; }
  const std::vector<float>& data() const { return data_; }
  json& attributes() { return attributes_; }
  const json& attributes() const { return attributes_; }

  std::span<const float> row(size_t i) const { return {data_.data() + i * dim_, dim_}; }

  Eigen::VectorXd vector(size_t i) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
    for (size_t k = 0; k < dim_; ++k) v[static_cast<Eigen::Index>(k)] = data_[i * dim_ + k];
    return v;
  }

  /// Rows `idx` stacked into a matrix (one row per index).
  Eigen::MatrixXd rows(std::span<const size_t> idx) const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(dim_));
    for (size_t r = 0; r < idx.size(); ++r) {
      for (size_t k = 0; k < dim_; ++k) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = data_[idx[r] * dim_ + k];
      }
    }
    return m;
  }

  Eigen::MatrixXd matrix() const {
    std::vector<size_t> all(size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return rows(all);
  }

  template <typename Vec>
  void add(std::string id, const Vec& values, ClipMeta m = {}) {
    require(static_cast<size_t>(values.size()) == dim_, ErrorKind::kInvalidArgument,
            "embedding for '" + id + "' has dimension " + std::to_string(values.size()) + ", store has " +
                std::to_string(dim_));
    require(index_.emplace(id, ids_.size()).second, ErrorKind::kValidation, "duplicate embedding id '" + id + "'");
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(dim_); ++k) {
      const float f = static_cast<float>(values[k]);
      require(std::isfinite(f), ErrorKind::kValidation, "non-finite embedding for '" + id + "'");
      data_.push_back(f);
    }
    ids_.push_back(std::move(id));
    meta_.push_back(std::move(m));
  }

  std::optional<size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Sorted set of all labels appearing in the metadata.
  std::vector<std::string> label_set() const {
    std::set<std::string> s;
    for (const auto& m : meta_) s.insert(m.labels.begin(), m.labels.end());
    return {s.begin(), s.end()};
  }

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.meta_ == b.meta_ && a.attributes_ == b.attributes_ &&
           std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0 &&
           a.data_.size() == b.data_.size();
  }

 private:
  size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<ClipMeta> meta_;
  std::vector<float> data_;
  std::map<std::string, size_t> index_;
  json attributes_ = json::object();
};

inline TensorFile store_to_tensor(const EmbeddingStore& s) {
  TensorFile t;
  t.header = s.attributes();
  t.header["ids"] = s.ids();
  json meta = json::array();
  for (const auto& m : s.meta()) meta.push_back(meta_to_json(m));
  t.header["meta"] = meta;
  t.n = s.size();
  t.dim = s.dim();
  t.data = s.data();
  return t;
}

inline EmbeddingStore store_from_tensor(const TensorFile& t, const std::string& name = "store") {
  EmbeddingStore s(t.dim);
  std::vector<std::string> ids;
  json meta;
  try {
    ids = t.header.at("ids").get<std::vector<std::string>>();
    meta = t.header.value("meta", json::array());
  } catch (const json::exception&) {
    fail(ErrorKind::kFormat, name + ": malformed ids");
  }
  require(ids.size() == t.n, ErrorKind::kFormat, name + ": header lists " + std::to_string(ids.size()) +
                                                     " ids for n = " + std::to_string(t.n));
  require(meta.empty() || meta.size() == t.n, ErrorKind::kFormat, name + ": metadata count mismatch");
  for (auto it = t.header.begin(); it != t.header.end(); ++it) {
    if (it.key() != "ids" && it.key() != "meta" && it.key() != "n" && it.key() != "dim" && it.key() != "dtype") {
      s.attributes()[it.key()] = it.value();
    }
  }
  for (size_t i = 0; i < t.n; ++i) {
    ClipMeta m;
    if (!meta.empty()) {
      try {
        m = meta_from_json(meta[i]);
      } catch (const json::exception&) {
        fail(ErrorKind::kFormat, name + ": malformed metadata for " + ids[i]);
      }
    }
    s.add(ids[i], Eigen::Map<const Eigen::VectorXf>(t.data.data() + i * t.dim, static_cast<Eigen::Index>(t.dim)),
          std::move(m));
  }
  return s;
}

inline void save_store(const std::filesystem::path& path, const EmbeddingStore& s) {
  write_tensor_file(path, store_to_tensor(s));
}

inline EmbeddingStore load_store(const std::filesystem::path& path) {
  return store_from_tensor(read_tensor_file(path), path.string());
}

}  // namespace polyfs
