#pragma once
// Per-node input features: hashed character n-grams, or externally produced
// embeddings loaded from feature files.
//
// Feature file layout (FMX1): magic "FMX1", N and F as u32 LE, then N*F
// IEEE-754 f32 LE values in row-major order. FMX8 is the same layout with
// f64 payload, used inside model files.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kgmatch/graph.hpp"
#include "kgmatch/io.hpp"

namespace kgmatch {

// Row-major so file IO maps directly onto rows. Feature files stay single
// precision; training widens to double at entry.
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NgramEncoderConfig {
  int n = 3;
  std::uint32_t buckets = 256;  // power of two
  char pad = '#';
  std::uint64_t hash_seed = 0;
  bool signed_hash = true;

  bool operator==(const NgramEncoderConfig&) const = default;
};

inline void to_json(json& j, const NgramEncoderConfig& cfg) {
  j = json{{"n", cfg.n},
           {"buckets", cfg.buckets},
           {"pad", std::string(1, cfg.pad)},
           {"hash_seed", cfg.hash_seed},
           {"signed", cfg.signed_hash}};
}

inline void from_json(const json& j, NgramEncoderConfig& cfg) {
  cfg.n = j.at("n").get<int>();
  cfg.buckets = j.at("buckets").get<std::uint32_t>();
  const std::string pad = j.at("pad").get<std::string>();
  if (pad.size() != 1) fail("encoder pad must be a single character");
  cfg.pad = pad[0];
  cfg.hash_seed = j.at("hash_seed").get<std::uint64_t>();
  cfg.signed_hash = j.at("signed").get<bool>();
}

inline void validate(const NgramEncoderConfig& cfg) {
  if (cfg.n < 1) fail("n-gram length must be >= 1");
  if (cfg.buckets < 2 || (cfg.buckets & (cfg.buckets - 1)) != 0) {
    fail("bucket count must be a power of two >= 2");
  }
}

// Stable across runs and platforms for a fixed seed.
inline std::uint64_t ngram_hash(const char* data, std::size_t len,
                                std::uint64_t seed) {
  return mix64(fnv1a64(data, len) ^ mix64(seed + 0x9E3779B97F4A7C15ULL));
}

inline std::uint32_t ngram_bucket(std::uint64_t hash, std::uint32_t buckets) {
  return static_cast<std::uint32_t>(hash & (buckets - 1));
}

// Feature vector of a single name: lowercase, pad once on each end, hash
// every n-gram into a signed bucket, L2-normalize.
inline Eigen::VectorXf encode_ngram(const std::string& name,
                                    const NgramEncoderConfig& cfg = {}) {
  validate(cfg);
  const std::string trimmed = trim_copy(name);
  if (trimmed.empty()) fail("cannot encode an empty name");
  const std::string text = cfg.pad + lower_ascii(trimmed) + cfg.pad;

  std::vector<double> acc(cfg.buckets, 0.0);
  const auto n = static_cast<std::size_t>(cfg.n);
  auto bump = [&](const char* p, std::size_t len) {
    const std::uint64_t h = ngram_hash(p, len, cfg.hash_seed);
    const double v = cfg.signed_hash ? ((h >> 63) ? -1.0 : 1.0) : 1.0;
    acc[ngram_bucket(h, cfg.buckets)] += v;
  };
  if (text.size() < n) {
    bump(text.data(), text.size());
  } else {
    for (std::size_t i = 0; i + n <= text.size(); ++i) bump(text.data() + i, n);
  }

  double norm_sq = 0.0;
  for (double v : acc) norm_sq += v * v;
  if (norm_sq < 1e-24) {
    // Signed contributions cancelled exactly; fall back to a whole-name bucket
    // so the unit-norm invariant holds for every non-empty input.
    std::fill(acc.begin(), acc.end(), 0.0);
    acc[ngram_bucket(ngram_hash(text.data(), text.size(), cfg.hash_seed + 1),
                     cfg.buckets)] = 1.0;
    norm_sq = 1.0;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  Eigen::VectorXf out(cfg.buckets);
  for (std::uint32_t i = 0; i < cfg.buckets; ++i) {
    out[i] = static_cast<float>(acc[i] * inv);
  }
  return out;
}

inline FeatureMatrix encode_graph(const EntityGraph& g,
                                  const NgramEncoderConfig& cfg = {}) {
  validate(cfg);
  FeatureMatrix m(static_cast<Eigen::Index>(g.nodes.size()),
                  static_cast<Eigen::Index>(cfg.buckets));
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = encode_ngram(g.nodes[i].name, cfg);
  }
  return m;
}

// ---- stream-level codecs, reused by model and index files ----

inline void write_fmx1(std::ostream& out, const FeatureMatrix& m) {
  out.write("FMX1", 4);
  write_u32le(out, static_cast<std::uint32_t>(m.rows()));
  write_u32le(out, static_cast<std::uint32_t>(m.cols()));
  std::string buf;
  buf.reserve(static_cast<std::size_t>(m.cols()) * 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    buf.clear();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const float v = m(r, c);
      if (!std::isfinite(v)) {
        fail("non-finite value at row " + std::to_string(r) + " col " +
             std::to_string(c));
      }
      const auto u = std::bit_cast<std::uint32_t>(v);
      buf.push_back(static_cast<char>(u));
      buf.push_back(static_cast<char>(u >> 8));
      buf.push_back(static_cast<char>(u >> 16));
      buf.push_back(static_cast<char>(u >> 24));
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

inline FeatureMatrix read_fmx1(std::istream& in, const std::string& what) {
  char magic[4];
  if (!in.read(magic, 4)) fail("truncated payload: " + what);
  if (std::string(magic, 4) != "FMX1") fail("bad magic in " + what);
  const std::uint32_t rows = read_u32le(in, what);
  const std::uint32_t cols = read_u32le(in, what);
  FeatureMatrix m(rows, cols);
  const std::size_t bytes = static_cast<std::size_t>(rows) * cols * 4;
  std::string buf(bytes, '\0');
  if (!in.read(buf.data(), static_cast<std::streamsize>(bytes))) {
    fail("truncated payload: " + what);
  }
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const std::uint32_t u = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                              std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
      p += 4;
      const float v = std::bit_cast<float>(u);
      if (!std::isfinite(v)) {
        fail("non-finite value at row " + std::to_string(r) + " col " +
             std::to_string(c) + " in " + what);
      }
      m(r, c) = v;
    }
  }
  return m;
}

inline void write_fmx8(std::ostream& out, const Eigen::MatrixXd& m) {
  out.write("FMX8", 4);
  write_u32le(out, static_cast<std::uint32_t>(m.rows()));
  write_u32le(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) {
        fail("non-finite value at row " + std::to_string(r) + " col " +
             std::to_string(c));
      }
      write_f64le(out, m(r, c));
    }
  }
}

inline Eigen::MatrixXd read_fmx8(std::istream& in, const std::string& what) {
  char magic[4];
  if (!in.read(magic, 4)) fail("truncated payload: " + what);
  if (std::string(magic, 4) != "FMX8") fail("bad magic in " + what);
  const std::uint32_t rows = read_u32le(in, what);
  const std::uint32_t cols = read_u32le(in, what);
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const double v = read_f64le(in, what);
      if (!std::isfinite(v)) {
        fail("non-finite value at row " + std::to_string(r) + " col " +
             std::to_string(c) + " in " + what);
      }
      m(r, c) = v;
    }
  }
  return m;
}

inline void save_feature_file(const FeatureMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path);
  write_fmx1(out, m);
}

inline FeatureMatrix load_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path);
  return read_fmx1(in, path);
}

}  // namespace kgmatch
