#pragma once
// Finite-difference gradient checks for the two training objectives, shared
// by the unit suite (few instances) and the acceptance gate (50 instances).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kgmatch/eval.hpp"
#include "kgmatch/gcn.hpp"
#include "kgmatch/graph.hpp"
#include "kgmatch/train.hpp"

#include "oracles.hpp"
#include "testgraphs.hpp"

namespace gradcheck {

struct Instance {
  kgmatch::EntityGraph graph;
  kgmatch::SparseMatrixD a_hat;
  Eigen::MatrixXd x;
  kgmatch::ModelParams params;
  std::vector<kgmatch::NodePair> pairs;
  std::vector<int> labels;  // entity % 4, for the softmax head
};

// Random N<=12 graph, dims [5,8,4], random features, six checked pairs.
// Pairs whose distance sits within 1e-3 of the loss kinks (d=0, d=margin)
// are re-drawn; the derivative is not defined there.
inline Instance make_instance(std::uint64_t seed) {
  kgmatch::Rng rng(seed);
  Instance inst;
  inst.graph = testgraphs::random_entity_graph(rng, 12);
  const int n = static_cast<int>(inst.graph.size());
  inst.a_hat = kgmatch::normalized_adjacency(inst.graph);
  inst.x.resize(n, 5);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < 5; ++c) {
      inst.x(r, c) = 2.0 * rng.unit() - 1.0;
    }
  }
  inst.params = kgmatch::init_params({5, 8, 4}, seed * 77 + 1);

  inst.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    inst.labels[static_cast<std::size_t>(i)] =
        static_cast<int>(inst.graph.nodes[static_cast<std::size_t>(i)].entity % 4);
  }

  const Eigen::MatrixXd z = kgmatch::gcn_forward(inst.x, inst.a_hat, inst.params);
  if (n >= 2) {
    for (int t = 0; t < 6; ++t) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        const int a = static_cast<int>(rng.below(static_cast<std::uint32_t>(n)));
        int b = a;
        while (b == a) b = static_cast<int>(rng.below(static_cast<std::uint32_t>(n)));
        const int y = inst.graph.nodes[static_cast<std::size_t>(a)].entity ==
                              inst.graph.nodes[static_cast<std::size_t>(b)].entity
                          ? 1
                          : 0;
        const double d = (z.row(a) - z.row(b)).norm();
        if (d < 1e-3) continue;
        if (y == 0 && std::abs(d - inst.params.margin) < 1e-3) continue;
        inst.pairs.push_back({a, b, y});
        break;
      }
    }
  }
  return inst;
}

inline double siamese_loss(const Instance& inst) {
  const Eigen::MatrixXd z =
      kgmatch::gcn_forward(inst.x, inst.a_hat, inst.params);
  double total = 0.0;
  for (const auto& pr : inst.pairs) {
    total += kgmatch::contrastive_loss(z.row(pr.n1), z.row(pr.n2), pr.y,
                                       inst.params.margin);
  }
  return total / static_cast<double>(inst.pairs.size());
}

inline std::vector<Eigen::MatrixXd> siamese_grads(const Instance& inst) {
  kgmatch::ForwardCache cache;
  const Eigen::MatrixXd z =
      kgmatch::gcn_forward(inst.x, inst.a_hat, inst.params, &cache);
  Eigen::MatrixXd d_z = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  for (const auto& pr : inst.pairs) {
    const auto [d1, d2] = kgmatch::contrastive_grad(z.row(pr.n1), z.row(pr.n2),
                                                    pr.y, inst.params.margin);
    d_z.row(pr.n1) += d1;
    d_z.row(pr.n2) += d2;
  }
  d_z /= static_cast<double>(inst.pairs.size());
  return kgmatch::gcn_backward(inst.a_hat, inst.params, cache, d_z);
}

inline double softmax_objective(const Instance& inst) {
  return kgmatch::softmax_loss(
      kgmatch::stack_forward(inst.x, inst.a_hat, inst.params), inst.labels);
}

inline std::vector<Eigen::MatrixXd> softmax_grads(const Instance& inst) {
  kgmatch::ForwardCache cache;
  const Eigen::MatrixXd logits =
      kgmatch::stack_forward(inst.x, inst.a_hat, inst.params, &cache);
  return kgmatch::stack_backward(
      inst.a_hat, inst.params, cache,
      kgmatch::softmax_loss_grad(logits, inst.labels));
}

// Max relative error between analytic and finite-difference gradients across
// every weight entry, for one instance and one objective.
template <typename LossFn, typename GradFn>
inline double max_grad_err(Instance& inst, LossFn loss, GradFn grads,
                           double h = 1e-5) {
  const std::vector<Eigen::MatrixXd> analytic = grads(inst);
  double worst = 0.0;
  for (std::size_t l = 0; l < inst.params.weights.size(); ++l) {
    const Eigen::MatrixXd fd = oracles::finite_diff(
        inst.params.weights[l], [&] { return loss(inst); }, h);
    worst = std::max(worst, oracles::max_rel_err(analytic[l], fd));
  }
  return worst;
}

inline double siamese_check(std::uint64_t seed) {
  Instance inst = make_instance(seed);
  if (inst.pairs.empty()) return 0.0;  // one-node graph, nothing to check
  return max_grad_err(
      inst, [](const Instance& i) { return siamese_loss(i); },
      [](const Instance& i) { return siamese_grads(i); });
}

inline double softmax_check(std::uint64_t seed) {
  Instance inst = make_instance(seed);
  return max_grad_err(
      inst, [](const Instance& i) { return softmax_objective(i); },
      [](const Instance& i) { return softmax_grads(i); });
}

}  // namespace gradcheck
