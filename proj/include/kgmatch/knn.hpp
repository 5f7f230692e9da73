#pragma once
// K-nearest-neighbor search over unit-norm embeddings. Exact mode is a full
// scan; approximate mode is a layered navigable-small-world graph.
//
// Every ordering decision (scan results, beam heaps, neighbor selection) is
// keyed on the pair (squared distance, id), so ties always resolve toward the
// lower id and build + query are reproducible bit for bit per seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <queue>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kgmatch/features.hpp"
#include "kgmatch/io.hpp"

namespace kgmatch {

enum class IndexMode { exact, approximate };

inline std::string to_string(IndexMode m) {
  return m == IndexMode::exact ? "exact" : "approximate";
}

inline IndexMode index_mode_from(const std::string& s) {
  if (s == "exact") return IndexMode::exact;
  if (s == "approximate") return IndexMode::approximate;
  fail("unknown index mode: " + s);
}

// Defaults are sized for ~0.99 recall@10 on random unit vectors up to the
// tens of thousands while keeping single-threaded queries under a
// millisecond there; shrink max_neighbors before touching the beams.
struct AnnParams {
  int max_neighbors = 48;  // per-node cap, uniform across layers
  int build_beam = 200;
  int query_beam = 160;
  std::uint64_t seed = 1;
};

inline void validate(const AnnParams& p) {
  if (p.max_neighbors < 2) fail("max neighbors must be at least 2");
  if (p.build_beam < 1) fail("build beam must be positive");
  if (p.query_beam < 1) fail("query beam must be positive");
}

struct Neighbor {
  int id = 0;
  double distance = 0.0;
};

using KnnResult = std::vector<Neighbor>;

class KnnIndex {
 public:
  static KnnIndex build(const Eigen::MatrixXd& z, const std::vector<int>& ids,
                        IndexMode mode, const AnnParams& params = {}) {
    validate(params);
    if (static_cast<std::size_t>(z.rows()) != ids.size()) {
      fail("id count does not match vector count");
    }
    std::unordered_set<int> seen;
    for (int id : ids) {
      if (id < 0) fail("negative node id");
      if (!seen.insert(id).second) fail("duplicate id " + std::to_string(id));
    }
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      if (std::abs(z.row(i).norm() - 1.0) > 1e-5) {
        fail("row " + std::to_string(i) + " is not unit norm");
      }
    }
    KnnIndex idx;
    idx.mode_ = mode;
    idx.params_ = params;
    idx.vectors_ = z;
    idx.ids_ = ids;
    idx.self_norms_ = z.rowwise().squaredNorm();
    if (mode == IndexMode::approximate) {
      idx.rows_ = z;
      idx.build_graph();
    }
    return idx;
  }

  IndexMode mode() const { return mode_; }
  std::size_t size() const { return ids_.size(); }
  int dim() const { return static_cast<int>(vectors_.cols()); }
  const AnnParams& params() const { return params_; }
  const std::vector<int>& ids() const { return ids_; }
  const Eigen::MatrixXd& vectors() const { return vectors_; }

  int node_level(int row) const {
    return levels_.empty() ? 0 : levels_[static_cast<std::size_t>(row)];
  }
  int max_level() const { return max_level_; }
  const std::vector<int>& neighbor_list(int row, int layer) const {
    return links_[static_cast<std::size_t>(row)][static_cast<std::size_t>(layer)];
  }

  KnnResult query(const Eigen::VectorXd& q, int k) const {
    return query(q, k, params_.query_beam);
  }

  KnnResult query(const Eigen::VectorXd& q, int k, int beam) const {
    if (k < 1) fail("k must be positive");
    if (q.size() != vectors_.cols()) fail("query dimension mismatch");
    std::vector<std::pair<double, int>> hits =
        mode_ == IndexMode::exact ? exact_scan(q, k)
                                  : approx_scan(q, k, std::max(beam, k));
    KnnResult out;
    out.reserve(hits.size());
    for (const auto& [d2, row] : hits) {
      out.push_back({ids_[static_cast<std::size_t>(row)], std::sqrt(d2)});
    }
    return out;
  }

  // Mean fraction of the true k nearest ids that this index retrieves.
  double recall_at_k(const std::vector<Eigen::VectorXd>& queries, int k) const {
    if (queries.empty()) fail("empty query set");
    if (k < 1) fail("k must be positive");
    double total = 0.0;
    for (const auto& q : queries) {
      if (q.size() != vectors_.cols()) fail("query dimension mismatch");
      const auto truth = exact_scan(q, k);
      if (truth.empty()) {
        total += 1.0;
        continue;
      }
      std::unordered_set<int> got;
      for (const auto& [d2, row] : mode_ == IndexMode::exact
                                       ? truth
                                       : approx_scan(q, k, std::max(params_.query_beam, k))) {
        got.insert(row);
      }
      int found = 0;
      for (const auto& [d2, row] : truth) found += got.count(row) ? 1 : 0;
      total += static_cast<double>(found) / static_cast<double>(truth.size());
    }
    return total / static_cast<double>(queries.size());
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write " + path);
    json header{{"format", "KGI1"},
                {"mode", to_string(mode_)},
                {"dim", dim()},
                {"size", ids_.size()},
                {"max_neighbors", params_.max_neighbors},
                {"build_beam", params_.build_beam},
                {"query_beam", params_.query_beam},
                {"seed", params_.seed},
                {"entry", entry_},
                {"max_level", max_level_}};
    out << header.dump() << '\n';
    FeatureMatrix quantized = vectors_.cast<float>();
    write_fmx1(out, quantized);
    write_u32le(out, static_cast<std::uint32_t>(ids_.size()));
    for (int id : ids_) write_u32le(out, static_cast<std::uint32_t>(id));
    if (mode_ == IndexMode::approximate) {
      for (std::size_t i = 0; i < ids_.size(); ++i) {
        write_u32le(out, static_cast<std::uint32_t>(levels_[i]));
        for (int l = 0; l <= levels_[i]; ++l) {
          const auto& nb = links_[i][static_cast<std::size_t>(l)];
          write_u32le(out, static_cast<std::uint32_t>(nb.size()));
          for (int v : nb) write_u32le(out, static_cast<std::uint32_t>(v));
        }
      }
    }
  }

  static KnnIndex load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) fail("truncated payload: " + path);
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded()) fail(path + ": invalid index header");
    if (header.value("format", "") != "KGI1") fail(path + ": unknown format");
    KnnIndex idx;
    idx.mode_ = index_mode_from(header.at("mode").get<std::string>());
    idx.params_.max_neighbors = header.at("max_neighbors").get<int>();
    idx.params_.build_beam = header.at("build_beam").get<int>();
    idx.params_.query_beam = header.at("query_beam").get<int>();
    idx.params_.seed = header.at("seed").get<std::uint64_t>();
    idx.entry_ = header.at("entry").get<int>();
    idx.max_level_ = header.at("max_level").get<int>();
    validate(idx.params_);
    const FeatureMatrix quantized = read_fmx1(in, path);
    idx.vectors_ = quantized.cast<double>();
    idx.self_norms_ = idx.vectors_.rowwise().squaredNorm();
    const std::uint32_t n = read_u32le(in, path);
    if (n != static_cast<std::uint32_t>(idx.vectors_.rows())) {
      fail(path + ": id count does not match vector count");
    }
    idx.ids_.resize(n);
    std::unordered_set<int> seen;
    for (std::uint32_t i = 0; i < n; ++i) {
      idx.ids_[i] = static_cast<int>(read_u32le(in, path));
      if (!seen.insert(idx.ids_[i]).second) {
        fail(path + ": duplicate id " + std::to_string(idx.ids_[i]));
      }
    }
    for (Eigen::Index i = 0; i < idx.vectors_.rows(); ++i) {
      // 2e-5 leaves headroom for the f32 round trip on top of the build bound.
      if (std::abs(idx.vectors_.row(i).norm() - 1.0) > 2e-5) {
        fail(path + ": row " + std::to_string(i) + " is not unit norm");
      }
    }
    if (idx.mode_ == IndexMode::approximate) {
      idx.rows_ = idx.vectors_;
      idx.levels_.resize(n);
      idx.links_.resize(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        idx.levels_[i] = static_cast<int>(read_u32le(in, path));
        if (idx.levels_[i] < 0 || idx.levels_[i] > idx.max_level_) {
          fail(path + ": node level out of range");
        }
        idx.links_[i].resize(static_cast<std::size_t>(idx.levels_[i]) + 1);
        for (int l = 0; l <= idx.levels_[i]; ++l) {
          const std::uint32_t cnt = read_u32le(in, path);
          auto& nb = idx.links_[i][static_cast<std::size_t>(l)];
          nb.resize(cnt);
          for (std::uint32_t j = 0; j < cnt; ++j) {
            nb[j] = static_cast<int>(read_u32le(in, path));
            if (nb[j] < 0 || nb[j] >= static_cast<int>(n)) {
              fail(path + ": neighbor id out of range");
            }
          }
        }
      }
      if (n > 0 && (idx.entry_ < 0 || idx.entry_ >= static_cast<int>(n))) {
        fail(path + ": entry point out of range");
      }
    }
    return idx;
  }

 private:
  // Graph search reads whole rows at random; on the column-major vectors_
  // each such read strides across the full matrix, so the hot paths go
  // through a row-major mirror instead (built only in approximate mode).
  double dist_sq(const Eigen::VectorXd& q, int row) const {
    return (rows_.row(row).transpose() - q).squaredNorm();
  }

  double pair_dist_sq(int a, int b) const {
    return (rows_.row(a) - rows_.row(b)).squaredNorm();
  }

  // Full scan via d^2 = |v|^2 + |q|^2 - 2 v.q; the matrix-vector product is
  // the whole cost. Clamped at zero (self-matches can round slightly below).
  // Heap entries hold (d^2, row) but order by (d^2, stored id): the tie rule
  // is on ids, and rows only coincide with ids when the caller passed 0..N-1.
  std::vector<std::pair<double, int>> exact_scan(const Eigen::VectorXd& q,
                                                 int k) const {
    const Eigen::VectorXd scores = vectors_ * q;
    const double qn = q.squaredNorm();
    const auto before = [this](const std::pair<double, int>& a,
                               const std::pair<double, int>& b) {
      if (a.first != b.first) return a.first < b.first;
      return ids_[static_cast<std::size_t>(a.second)] <
             ids_[static_cast<std::size_t>(b.second)];
    };
    std::vector<std::pair<double, int>> heap;  // max-heap, worst on top
    heap.reserve(static_cast<std::size_t>(k) + 1);
    for (int i = 0; i < static_cast<int>(vectors_.rows()); ++i) {
      const double d2 = std::max(0.0, self_norms_(i) + qn - 2.0 * scores(i));
      const std::pair<double, int> cand{d2, i};
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), before);
      } else if (before(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), before);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), before);
      }
    }
    std::sort_heap(heap.begin(), heap.end(), before);
    return heap;
  }

  struct Visited {
    std::vector<std::uint32_t> stamp;
    std::uint32_t cur = 0;
    explicit Visited(std::size_t n) : stamp(n, 0) {}
    void next() { ++cur; }
    bool test_and_set(int i) {
      if (stamp[static_cast<std::size_t>(i)] == cur) return true;
      stamp[static_cast<std::size_t>(i)] = cur;
      return false;
    }
  };

  int greedy_descend(const Eigen::VectorXd& q, int start, int layer) const {
    int cur = start;
    double cur_d = dist_sq(q, cur);
    bool moved = true;
    while (moved) {
      moved = false;
      for (int nb : links_[static_cast<std::size_t>(cur)][static_cast<std::size_t>(layer)]) {
        const double d = dist_sq(q, nb);
        if (d < cur_d || (d == cur_d && nb < cur)) {
          cur_d = d;
          cur = nb;
          moved = true;
        }
      }
    }
    return cur;
  }

  // Best-first beam search within one layer. Entry pairs must carry correct
  // distances. Returns up to `beam` hits sorted ascending by (d^2, id).
  std::vector<std::pair<double, int>> search_layer(
      const Eigen::VectorXd& q, int layer, int beam,
      const std::vector<std::pair<double, int>>& entries,
      Visited& visited) const {
    using Hit = std::pair<double, int>;
    std::priority_queue<Hit, std::vector<Hit>, std::greater<>> frontier;
    std::priority_queue<Hit> best;  // max-heap, worst of the beam on top
    visited.next();
    for (const auto& e : entries) {
      if (visited.test_and_set(e.second)) continue;
      frontier.push(e);
      best.push(e);
      if (static_cast<int>(best.size()) > beam) best.pop();
    }
    while (!frontier.empty()) {
      const Hit cur = frontier.top();
      frontier.pop();
      if (static_cast<int>(best.size()) >= beam && cur > best.top()) break;
      for (int nb :
           links_[static_cast<std::size_t>(cur.second)][static_cast<std::size_t>(layer)]) {
        if (visited.test_and_set(nb)) continue;
        const Hit cand{dist_sq(q, nb), nb};
        if (static_cast<int>(best.size()) < beam || cand < best.top()) {
          frontier.push(cand);
          best.push(cand);
          if (static_cast<int>(best.size()) > beam) best.pop();
        }
      }
    }
    std::vector<Hit> out(best.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = best.top();
      best.pop();
    }
    return out;
  }

  // Keep a candidate only when it is closer to the query point than to every
  // neighbor already kept (diversity pruning), then fill any remaining slots
  // from the discards in distance order.
  std::vector<int> select_neighbors(
      const std::vector<std::pair<double, int>>& candidates, int m) const {
    std::vector<std::pair<double, int>> kept;
    std::vector<int> discarded;
    for (const auto& [d2, c] : candidates) {
      if (static_cast<int>(kept.size()) >= m) break;
      bool dominated = false;
      for (const auto& [kd, k] : kept) {
        if (pair_dist_sq(c, k) < d2) {
          dominated = true;
          break;
        }
      }
      if (dominated) {
        discarded.push_back(c);
      } else {
        kept.emplace_back(d2, c);
      }
    }
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(m));
    for (const auto& [d2, c] : kept) out.push_back(c);
    for (int c : discarded) {
      if (static_cast<int>(out.size()) >= m) break;
      out.push_back(c);
    }
    return out;
  }

  void build_graph() {
    const int n = static_cast<int>(vectors_.rows());
    levels_.assign(static_cast<std::size_t>(n), 0);
    links_.assign(static_cast<std::size_t>(n), {});
    entry_ = 0;
    max_level_ = 0;
    if (n == 0) return;

    const double mult = 1.0 / std::log(static_cast<double>(params_.max_neighbors));
    Rng rng(mix_seed(params_.seed, 4));
    for (int i = 0; i < n; ++i) {
      const int lvl =
          static_cast<int>(std::floor(-std::log(1.0 - rng.unit()) * mult));
      levels_[static_cast<std::size_t>(i)] = std::min(lvl, 32);
      links_[static_cast<std::size_t>(i)].resize(
          static_cast<std::size_t>(levels_[static_cast<std::size_t>(i)]) + 1);
    }

    Visited visited(static_cast<std::size_t>(n));
    max_level_ = levels_[0];
    for (int i = 1; i < n; ++i) {
      const Eigen::VectorXd q = vectors_.row(i).transpose();
      const int node_lvl = levels_[static_cast<std::size_t>(i)];
      int ep = entry_;
      for (int l = max_level_; l > node_lvl; --l) {
        ep = greedy_descend(q, ep, l);
      }
      std::vector<std::pair<double, int>> entries{{dist_sq(q, ep), ep}};
      for (int l = std::min(node_lvl, max_level_); l >= 0; --l) {
        const auto found =
            search_layer(q, l, params_.build_beam, entries, visited);
        const auto selected = select_neighbors(found, params_.max_neighbors);
        auto& own = links_[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)];
        own = selected;
        for (int s : selected) {
          auto& back =
              links_[static_cast<std::size_t>(s)][static_cast<std::size_t>(l)];
          back.push_back(i);
          if (static_cast<int>(back.size()) > params_.max_neighbors) {
            std::vector<std::pair<double, int>> cands;
            cands.reserve(back.size());
            for (int b : back) {
              cands.emplace_back(pair_dist_sq(s, b), b);
            }
            std::sort(cands.begin(), cands.end());
            back = select_neighbors(cands, params_.max_neighbors);
          }
        }
        entries = found;
      }
      if (node_lvl > max_level_) {
        max_level_ = node_lvl;
        entry_ = i;
      }
    }
  }

  std::vector<std::pair<double, int>> approx_scan(const Eigen::VectorXd& q,
                                                  int k, int beam) const {
    if (vectors_.rows() == 0) return {};
    Visited visited(static_cast<std::size_t>(vectors_.rows()));
    int ep = entry_;
    for (int l = max_level_; l > 0; --l) ep = greedy_descend(q, ep, l);
    std::vector<std::pair<double, int>> entries{{dist_sq(q, ep), ep}};
    auto found = search_layer(q, 0, beam, entries, visited);
    if (static_cast<int>(found.size()) > k) {
      found.resize(static_cast<std::size_t>(k));
    }
    return found;
  }

  IndexMode mode_ = IndexMode::exact;
  AnnParams params_;
  Eigen::MatrixXd vectors_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows_;
  Eigen::VectorXd self_norms_;
  std::vector<int> ids_;
  std::vector<int> levels_;
  std::vector<std::vector<std::vector<int>>> links_;  // [node][layer]
  int entry_ = 0;
  int max_level_ = 0;
};

}  // namespace kgmatch
