#pragma once
// Independent reference implementations the tests check production code
// against. Everything here is written with explicit loops on dense storage,
// deliberately avoiding the library's own code paths.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracles {

// D~^{-1/2} (A + I) D~^{-1/2} built entrywise.
inline Eigen::MatrixXd dense_normalized_adjacency(
    int n, const std::vector<std::pair<int, int>>& edges) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [u, v] : edges) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  for (int i = 0; i < n; ++i) a(i, i) = 1.0;
  std::vector<double> deg(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) deg[static_cast<std::size_t>(i)] += a(i, j);
  }
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out(i, j) = a(i, j) / std::sqrt(deg[static_cast<std::size_t>(i)] *
                                      deg[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

inline Eigen::MatrixXd matmul(const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      for (Eigen::Index j = 0; j < b.cols(); ++j) {
        c(i, j) += a(i, k) * b(k, j);
      }
    }
  }
  return c;
}

// Loop-based GCN forward with final row normalization (eps 1e-12).
inline Eigen::MatrixXd dense_gcn_forward(const Eigen::MatrixXd& x,
                                         const Eigen::MatrixXd& a,
                                         const std::vector<Eigen::MatrixXd>& w) {
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < w.size(); ++l) {
    h = matmul(matmul(a, h), w[l]);
    if (l + 1 < w.size()) {
      for (Eigen::Index i = 0; i < h.rows(); ++i) {
        for (Eigen::Index j = 0; j < h.cols(); ++j) {
          if (h(i, j) < 0.0) h(i, j) = 0.0;
        }
      }
    }
  }
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < h.cols(); ++j) s += h(i, j) * h(i, j);
    s = std::sqrt(s);
    for (Eigen::Index j = 0; j < h.cols(); ++j) h(i, j) /= (s + 1e-12);
  }
  return h;
}

// Plain full scan; ties resolve to the lower row index.
inline std::vector<int> naive_knn(const Eigen::MatrixXd& data,
                                  const Eigen::VectorXd& q, int k) {
  std::vector<std::pair<double, int>> all;
  all.reserve(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    double d2 = 0.0;
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      const double diff = data(i, j) - q(j);
      d2 += diff * diff;
    }
    all.emplace_back(d2, static_cast<int>(i));
  }
  std::sort(all.begin(), all.end());
  std::vector<int> ids;
  for (int i = 0; i < k && i < static_cast<int>(all.size()); ++i) {
    ids.push_back(all[static_cast<std::size_t>(i)].second);
  }
  return ids;
}

// Central finite differences of an arbitrary scalar function with respect to
// one weight matrix, mutated in place entry by entry.
template <typename LossFn>
inline Eigen::MatrixXd finite_diff(Eigen::MatrixXd& w, LossFn loss,
                                   double h = 1e-5) {
  Eigen::MatrixXd g(w.rows(), w.cols());
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      const double keep = w(r, c);
      w(r, c) = keep + h;
      const double up = loss();
      w(r, c) = keep - h;
      const double down = loss();
      w(r, c) = keep;
      g(r, c) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

inline double max_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      const double denom = std::max(1e-6, std::abs(a(r, c)) + std::abs(b(r, c)));
      worst = std::max(worst, std::abs(a(r, c) - b(r, c)) / denom);
    }
  }
  return worst;
}

}  // namespace oracles
