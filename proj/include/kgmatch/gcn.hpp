#pragma once
// Graph convolution stack with a unit-norm output head, plus the plumbing to
// run the same stack under a softmax head (classifier baseline).
//
// Forward, per layer l with propagated input P = A_hat * H:
//   pre_l = P * W_l
//   H_{l+1} = relu(pre_l)          for every layer but the last
//   raw    = pre_{L-1}             last layer, no activation
//   Z_i    = raw_i / (|raw_i| + 1e-12)
//
// Rows whose pre-normalization norm falls below 1e-6 are flagged, not
// rejected; their direction is numerically meaningless but finite.

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "kgmatch/features.hpp"
#include "kgmatch/graph.hpp"
#include "kgmatch/io.hpp"

namespace kgmatch {

constexpr double kNormEps = 1e-12;
constexpr double kLowNormThreshold = 1e-6;

struct ModelParams {
  std::vector<int> layer_dims;            // [in, hidden..., out]
  std::vector<Eigen::MatrixXd> weights;   // layer_dims.size() - 1 matrices
  double margin = 1.0;
  std::uint64_t seed = 1;
  NgramEncoderConfig encoder;
};

inline void validate(const ModelParams& p) {
  if (p.layer_dims.size() < 2) fail("model needs at least one layer");
  for (int d : p.layer_dims) {
    if (d < 1) fail("layer dimension must be positive");
  }
  if (p.layer_dims.back() < 2) fail("output dim must be at least 2");
  if (p.weights.size() + 1 != p.layer_dims.size()) {
    fail("weight count does not match layer dims");
  }
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    if (p.weights[l].rows() != p.layer_dims[l] ||
        p.weights[l].cols() != p.layer_dims[l + 1]) {
      fail("weight shape mismatch at layer " + std::to_string(l));
    }
  }
  if (!(p.margin > 0.0)) fail("margin must be positive");
}

// Glorot-uniform: W ~ U(-b, b), b = sqrt(6 / (fan_in + fan_out)). One RNG
// stream per model, consumed layer by layer in row-major order, so a seed
// pins every byte of the initialization.
inline ModelParams init_params(const std::vector<int>& layer_dims,
                               std::uint64_t seed, double margin = 1.0,
                               const NgramEncoderConfig& encoder = {}) {
  ModelParams p;
  p.layer_dims = layer_dims;
  p.margin = margin;
  p.seed = seed;
  p.encoder = encoder;
  Rng rng(mix_seed(seed, 2));
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_in, fan_out);
    for (int r = 0; r < fan_in; ++r) {
      for (int c = 0; c < fan_out; ++c) {
        w(r, c) = (2.0 * rng.unit() - 1.0) * bound;
      }
    }
    p.weights.push_back(std::move(w));
  }
  validate(p);
  return p;
}

struct ForwardCache {
  // propagated[l] = A_hat * H_l, the matrix the weights actually multiply;
  // kept because backward needs it for every dW.
  std::vector<Eigen::MatrixXd> propagated;
  std::vector<Eigen::MatrixXd> pre;  // pre-activation per layer
  Eigen::VectorXd norms;             // row norms of pre.back()
  std::vector<std::uint8_t> low_norm;
};

// Raw (unnormalized) outputs. The softmax baseline reads these as logits.
inline Eigen::MatrixXd stack_forward(const Eigen::MatrixXd& x,
                                     const SparseMatrixD& a_hat,
                                     const ModelParams& p,
                                     ForwardCache* cache = nullptr) {
  if (x.rows() != a_hat.rows()) fail("feature rows do not match graph size");
  if (x.cols() != p.layer_dims.front()) {
    fail("feature width does not match model input dim");
  }
  if (cache) {
    cache->propagated.clear();
    cache->pre.clear();
  }
  Eigen::MatrixXd h = x;
  Eigen::MatrixXd pre;
  const std::size_t layers = p.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd prop = a_hat * h;
    pre.noalias() = prop * p.weights[l];
    if (!pre.allFinite()) {
      fail("non-finite values at layer " + std::to_string(l));
    }
    if (cache) {
      cache->propagated.push_back(std::move(prop));
      cache->pre.push_back(pre);
    }
    if (l + 1 < layers) {
      h = pre.cwiseMax(0.0);
    }
  }
  return pre;
}

inline Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& raw,
                                      ForwardCache* cache = nullptr) {
  Eigen::MatrixXd z(raw.rows(), raw.cols());
  if (cache) {
    cache->norms.resize(raw.rows());
    cache->low_norm.assign(static_cast<std::size_t>(raw.rows()), 0);
  }
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double s = raw.row(i).norm();
    z.row(i) = raw.row(i) / (s + kNormEps);
    if (cache) {
      cache->norms(i) = s;
      if (s < kLowNormThreshold) cache->low_norm[static_cast<std::size_t>(i)] = 1;
    }
  }
  return z;
}

// Unit-norm node embeddings for a whole graph.
inline Eigen::MatrixXd gcn_forward(const Eigen::MatrixXd& x,
                                   const SparseMatrixD& a_hat,
                                   const ModelParams& p,
                                   ForwardCache* cache = nullptr) {
  validate(p);
  return normalize_rows(stack_forward(x, a_hat, p, cache), cache);
}

// A mention at query time is a 1-node graph: A_hat degenerates to [[1]] and
// the stack acts as a shared-weight MLP. Routed through the full forward so
// the result is bit-identical to gcn_forward on that graph.
inline Eigen::VectorXd embed_singleton(const Eigen::VectorXd& x,
                                       const ModelParams& p) {
  SparseMatrixD a(1, 1);
  a.insert(0, 0) = 1.0;
  a.makeCompressed();
  Eigen::MatrixXd row(1, x.size());
  row.row(0) = x;
  return gcn_forward(row, a, p).row(0);
}

// Gradient of the normalization head: maps dL/dZ to dL/draw. For a row v
// with norm s, Z = v / (s + eps), so
//   dL/dv = dZ / (s + eps) - v * (v . dZ) / (s * (s + eps)^2).
// Rows with s == 0 get a zero gradient (the head is flat there by fiat).
inline Eigen::MatrixXd normalize_backward(const Eigen::MatrixXd& raw,
                                          const Eigen::VectorXd& norms,
                                          const Eigen::MatrixXd& d_z) {
  Eigen::MatrixXd d_raw(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double s = norms(i);
    if (s == 0.0) {
      d_raw.row(i).setZero();
      continue;
    }
    const double inv = 1.0 / (s + kNormEps);
    const double dot = raw.row(i).dot(d_z.row(i));
    d_raw.row(i) = d_z.row(i) * inv - raw.row(i) * (dot * inv * inv / s);
  }
  return d_raw;
}

// Backprop from dL/draw through the stack. Uses A_hat = A_hat^T (the
// normalized adjacency is symmetric by construction).
inline std::vector<Eigen::MatrixXd> stack_backward(const SparseMatrixD& a_hat,
                                                   const ModelParams& p,
                                                   const ForwardCache& cache,
                                                   const Eigen::MatrixXd& d_raw) {
  const std::size_t layers = p.weights.size();
  if (cache.propagated.size() != layers || cache.pre.size() != layers) {
    fail("forward cache does not match model");
  }
  std::vector<Eigen::MatrixXd> grads(layers);
  Eigen::MatrixXd d_pre = d_raw;
  for (std::size_t l = layers; l-- > 0;) {
    if (l + 1 < layers) {
      // d_pre currently holds dL/dH_{l+1}; gate it by the relu mask.
      d_pre = (cache.pre[l].array() > 0.0).select(d_pre, 0.0);
    }
    grads[l].noalias() = cache.propagated[l].transpose() * d_pre;
    if (l > 0) {
      d_pre = a_hat * (d_pre * p.weights[l].transpose()).eval();
    }
  }
  return grads;
}

inline std::vector<Eigen::MatrixXd> gcn_backward(const SparseMatrixD& a_hat,
                                                 const ModelParams& p,
                                                 const ForwardCache& cache,
                                                 const Eigen::MatrixXd& d_z) {
  const Eigen::MatrixXd d_raw =
      normalize_backward(cache.pre.back(), cache.norms, d_z);
  return stack_backward(a_hat, p, cache, d_raw);
}

// ---- model files: one JSON header line, then one FMX8 block per layer ----

inline void save_model(const ModelParams& p, const std::string& path) {
  validate(p);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path);
  json header{{"format", "KGM1"},
              {"layer_dims", p.layer_dims},
              {"seed", p.seed},
              {"margin", p.margin},
              {"encoder", p.encoder}};
  out << header.dump() << '\n';
  for (const auto& w : p.weights) write_fmx8(out, w);
}

inline ModelParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail("truncated payload: " + path);
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded()) fail(path + ": invalid model header");
  if (header.value("format", "") != "KGM1") fail(path + ": unknown format");
  ModelParams p;
  p.layer_dims = header.at("layer_dims").get<std::vector<int>>();
  p.seed = header.at("seed").get<std::uint64_t>();
  p.margin = header.at("margin").get<double>();
  p.encoder = header.at("encoder").get<NgramEncoderConfig>();
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    p.weights.push_back(read_fmx8(in, path));
  }
  validate(p);
  return p;
}

}  // namespace kgmatch
