#pragma once
// Contrastive training of the shared GCN over node pairs.
//
// Pair selection: every few epochs the current embeddings are snapshotted and
// clustered into B buckets; negatives are drawn from the anchor's own bucket
// (hard negatives, already nearby in embedding space) with a uniform fallback
// when the bucket offers none. Positives are any same-entity node.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kgmatch/gcn.hpp"
#include "kgmatch/graph.hpp"
#include "kgmatch/io.hpp"

namespace kgmatch {

struct NodePair {
  int n1 = 0;
  int n2 = 0;
  int y = 0;  // 1 = same entity
};

struct TrainConfig {
  std::vector<int> dims = {128, 64};  // hidden and output widths
  double margin = 1.0;
  double learning_rate = 0.01;
  double momentum = 0.0;
  int epochs = 40;
  int batch_pairs = 0;  // 0 = whole epoch as one batch
  int pairs_per_node = 1;
  int buckets = 8;
  int refresh_period = 5;  // epochs between subspace refreshes
  std::uint64_t seed = 1;
};

inline void to_json(json& j, const TrainConfig& cfg) {
  j = json{{"dims", cfg.dims},
           {"margin", cfg.margin},
           {"learning_rate", cfg.learning_rate},
           {"momentum", cfg.momentum},
           {"epochs", cfg.epochs},
           {"batch_pairs", cfg.batch_pairs},
           {"pairs_per_node", cfg.pairs_per_node},
           {"buckets", cfg.buckets},
           {"refresh_period", cfg.refresh_period},
           {"seed", cfg.seed}};
}

inline void validate(const TrainConfig& cfg) {
  if (cfg.dims.empty()) fail("at least one layer width required");
  for (int d : cfg.dims) {
    if (d < 1) fail("layer width must be positive");
  }
  if (!(cfg.margin > 0.0)) fail("margin must be positive");
  // Zero is allowed deliberately: a null update is the cheapest full-pipeline
  // determinism probe.
  if (cfg.learning_rate < 0.0) fail("learning rate must be non-negative");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
    fail("momentum must be in [0,1)");
  }
  if (cfg.epochs < 0) fail("epoch count must be non-negative");
  if (cfg.batch_pairs < 0) fail("batch size must be non-negative");
  if (cfg.pairs_per_node < 1) fail("pairs per node must be positive");
  if (cfg.buckets < 1) fail("bucket count must be positive");
  if (cfg.refresh_period < 1) fail("refresh period must be positive");
}

// L = y * d^2 + (1-y) * max(0, m - d)^2 with d = |g1 - g2|.
inline double contrastive_loss(const Eigen::VectorXd& g1,
                               const Eigen::VectorXd& g2, int y, double m) {
  if (g1.size() != g2.size()) fail("embedding length mismatch");
  const double d = (g1 - g2).norm();
  if (y == 1) return d * d;
  const double h = std::max(0.0, m - d);
  return h * h;
}

// Gradient wrt both embeddings; d2 = -d1 always. At d = 0 both branches get
// a zero gradient (subgradient choice at the kink).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> contrastive_grad(
    const Eigen::VectorXd& g1, const Eigen::VectorXd& g2, int y, double m) {
  if (g1.size() != g2.size()) fail("embedding length mismatch");
  const Eigen::VectorXd diff = g1 - g2;
  const double d = diff.norm();
  Eigen::VectorXd d1;
  if (y == 1) {
    d1 = 2.0 * diff;
  } else if (d >= m || d == 0.0) {
    d1 = Eigen::VectorXd::Zero(g1.size());
  } else {
    d1 = (-2.0 * (m - d) / d) * diff;
  }
  return {d1, -d1};
}

struct SubspacePartition {
  std::vector<int> bucket;  // node id -> bucket index
  int bucket_count = 1;
  int snapshot_epoch = 0;
};

// Seeded k-means over embedding rows, a fixed 10 iterations. Ties break
// toward the lower bucket; an emptied bucket is re-seeded with the farthest
// member of the currently largest bucket, so all B buckets stay occupied.
inline SubspacePartition refresh_subspaces(const Eigen::MatrixXd& z, int b,
                                           std::uint64_t seed) {
  const int n = static_cast<int>(z.rows());
  if (b < 1 || b > n) fail("bucket count must be between 1 and the row count");
  SubspacePartition part;
  part.bucket_count = b;
  part.bucket.assign(static_cast<std::size_t>(n), 0);
  if (b == 1) return part;

  Rng rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  Eigen::MatrixXd centroids(b, z.cols());
  for (int k = 0; k < b; ++k) {
    centroids.row(k) = z.row(order[static_cast<std::size_t>(k)]);
  }

  std::vector<int> counts(static_cast<std::size_t>(b), 0);
  for (int iter = 0; iter < 10; ++iter) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (z.row(i) - centroids.row(0)).squaredNorm();
      for (int k = 1; k < b; ++k) {
        const double d = (z.row(i) - centroids.row(k)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      part.bucket[static_cast<std::size_t>(i)] = best;
      ++counts[static_cast<std::size_t>(best)];
    }
    for (int k = 0; k < b; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) continue;
      int donor = 0;
      for (int j = 1; j < b; ++j) {
        if (counts[static_cast<std::size_t>(j)] >
            counts[static_cast<std::size_t>(donor)]) {
          donor = j;
        }
      }
      int far_id = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (part.bucket[static_cast<std::size_t>(i)] != donor) continue;
        const double d = (z.row(i) - centroids.row(donor)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far_id = i;
        }
      }
      part.bucket[static_cast<std::size_t>(far_id)] = k;
      --counts[static_cast<std::size_t>(donor)];
      ++counts[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < b; ++k) centroids.row(k).setZero();
    for (int i = 0; i < n; ++i) {
      centroids.row(part.bucket[static_cast<std::size_t>(i)]) += z.row(i);
    }
    for (int k = 0; k < b; ++k) {
      centroids.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
    }
  }
  return part;
}

struct MinedPairs {
  std::vector<NodePair> pairs;
  int skipped_anchors = 0;  // anchors whose entity has no second node
};

// One epoch's worth of pairs. Each anchor contributes one positive (same
// entity) and one hard negative (same bucket, different entity; uniform over
// different-entity nodes when the bucket has none) per round, then the whole
// list is shuffled.
inline MinedPairs mine_pairs(const EntityGraph& g,
                             const SubspacePartition& part,
                             const TrainConfig& cfg, std::uint64_t epoch_seed) {
  const int n = static_cast<int>(g.nodes.size());
  if (static_cast<int>(part.bucket.size()) != n) {
    fail("partition does not cover the training nodes");
  }
  const auto by_entity = nodes_by_entity(g);
  std::vector<std::vector<int>> by_bucket(
      static_cast<std::size_t>(part.bucket_count));
  for (int i = 0; i < n; ++i) {
    by_bucket[static_cast<std::size_t>(part.bucket[static_cast<std::size_t>(i)])]
        .push_back(i);
  }

  MinedPairs out;
  Rng rng(epoch_seed);
  std::vector<int> candidates;
  for (int round = 0; round < cfg.pairs_per_node; ++round) {
    for (int a = 0; a < n; ++a) {
      const int ent = g.nodes[static_cast<std::size_t>(a)].entity;
      const auto& same = by_entity[static_cast<std::size_t>(ent)];
      if (same.size() > 1) {
        int p = a;
        while (p == a) p = rng.pick(same);
        out.pairs.push_back({a, p, 1});
      } else if (round == 0) {
        ++out.skipped_anchors;
      }

      candidates.clear();
      const auto& bucket =
          by_bucket[static_cast<std::size_t>(part.bucket[static_cast<std::size_t>(a)])];
      for (int c : bucket) {
        if (g.nodes[static_cast<std::size_t>(c)].entity != ent) {
          candidates.push_back(c);
        }
      }
      if (!candidates.empty()) {
        out.pairs.push_back({a, rng.pick(candidates), 0});
      } else if (n > static_cast<int>(same.size())) {
        // Uniform fallback over all different-entity nodes.
        int c = a;
        while (g.nodes[static_cast<std::size_t>(c)].entity == ent) {
          c = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        }
        out.pairs.push_back({a, c, 0});
      }
    }
  }
  rng.shuffle(out.pairs);
  return out;
}

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  int pairs = 0;
  int skipped_anchors = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
};

inline void save_metrics(const std::vector<EpochStats>& history,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path);
  for (const auto& e : history) {
    json j{{"epoch", e.epoch},
           {"mean_loss", e.mean_loss},
           {"pairs", e.pairs},
           {"skipped_anchors", e.skipped_anchors}};
    out << j.dump() << '\n';
  }
}

// Full training loop. Both pair members go through the one shared parameter
// set: a single forward embeds every node, pair gradients accumulate into one
// dZ, and a single backward produces the update.
inline TrainResult train(const EntityGraph& g, const SparseMatrixD& a_hat,
                         const FeatureMatrix& x, const TrainConfig& cfg,
                         const NgramEncoderConfig& encoder = {}) {
  validate(cfg);
  validate(g);
  const int n = static_cast<int>(g.nodes.size());
  if (x.rows() != n) fail("feature rows do not match graph size");

  std::vector<int> dims;
  dims.push_back(static_cast<int>(x.cols()));
  dims.insert(dims.end(), cfg.dims.begin(), cfg.dims.end());
  TrainResult result;
  result.params = init_params(dims, cfg.seed, cfg.margin, encoder);

  const Eigen::MatrixXd xd = x.cast<double>();
  std::vector<Eigen::MatrixXd> velocity;
  for (const auto& w : result.params.weights) {
    velocity.emplace_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }

  SubspacePartition part;
  part.bucket.assign(static_cast<std::size_t>(n), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch % cfg.refresh_period == 0) {
      const Eigen::MatrixXd z = gcn_forward(xd, a_hat, result.params);
      part = refresh_subspaces(z, std::min(cfg.buckets, n),
                               mix_seed(cfg.seed, 1000 + epoch));
      part.snapshot_epoch = epoch;
    }
    MinedPairs mined = mine_pairs(g, part, cfg, mix_seed(cfg.seed, 2000 + epoch));

    double loss_sum = 0.0;
    const std::size_t total = mined.pairs.size();
    const std::size_t step =
        cfg.batch_pairs == 0 ? std::max<std::size_t>(total, 1)
                             : static_cast<std::size_t>(cfg.batch_pairs);
    for (std::size_t begin = 0; begin < total; begin += step) {
      const std::size_t end = std::min(begin + step, total);
      ForwardCache cache;
      const Eigen::MatrixXd z = gcn_forward(xd, a_hat, result.params, &cache);
      Eigen::MatrixXd d_z = Eigen::MatrixXd::Zero(z.rows(), z.cols());
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const NodePair& pr = mined.pairs[i];
        batch_loss += contrastive_loss(z.row(pr.n1), z.row(pr.n2), pr.y,
                                       cfg.margin);
        auto [d1, d2] = contrastive_grad(z.row(pr.n1), z.row(pr.n2), pr.y,
                                         cfg.margin);
        d_z.row(pr.n1) += d1;
        d_z.row(pr.n2) += d2;
      }
      const double scale = 1.0 / static_cast<double>(end - begin);
      if (!std::isfinite(batch_loss)) {
        fail("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
             std::to_string(begin / step));
      }
      loss_sum += batch_loss;
      d_z *= scale;
      const auto grads = gcn_backward(a_hat, result.params, cache, d_z);
      for (std::size_t l = 0; l < grads.size(); ++l) {
        velocity[l] = cfg.momentum * velocity[l] + grads[l];
        result.params.weights[l] -= cfg.learning_rate * velocity[l];
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = total == 0 ? 0.0 : loss_sum / static_cast<double>(total);
    stats.pairs = static_cast<int>(total);
    stats.skipped_anchors = mined.skipped_anchors;
    result.history.push_back(stats);
  }
  return result;
}

}  // namespace kgmatch
