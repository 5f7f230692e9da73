#pragma once
// Knowledge graph of business entities: loading, validation, the normalized
// adjacency operator, and mention handling.
//
// File formats (one JSON object per line, UTF-8):
//   nodes:    {"id": int, "name": str, "entity": int, "kind": "real"|"canonical"|"mention"}
//   edges:    {"src": int, "dst": int}            (undirected, order-insensitive)
//   mentions: {"name": str, "entity": int}

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "kgmatch/io.hpp"

namespace kgmatch {

enum class NodeKind { real, canonical, mention };

inline std::string to_string(NodeKind k) {
  switch (k) {
    case NodeKind::real: return "real";
    case NodeKind::canonical: return "canonical";
    case NodeKind::mention: return "mention";
  }
  return "real";
}

inline NodeKind node_kind_from(const std::string& s) {
  if (s == "real") return NodeKind::real;
  if (s == "canonical") return NodeKind::canonical;
  if (s == "mention") return NodeKind::mention;
  fail("unknown node kind \"" + s + "\"");
}

struct NodeRecord {
  std::uint32_t id = 0;       // dense, equals the node's index after loading
  std::string name;           // non-empty after whitespace trimming
  std::uint32_t entity = 0;   // entity-tree label, dense 0..entity_count-1
  NodeKind kind = NodeKind::real;

  bool operator==(const NodeRecord&) const = default;
};

struct Mention {
  std::string name;
  std::uint32_t entity = 0;

  bool operator==(const Mention&) const = default;
};

// Disjoint entity trees over named nodes. Immutable once validated; safe for
// concurrent reads.
struct EntityGraph {
  std::vector<NodeRecord> nodes;                            // index == id
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // src < dst, sorted
  std::uint32_t entity_count = 0;

  // Original input ids, index-aligned; filled by the loader when the input
  // used sparse ids. Empty means identity.
  std::vector<std::int64_t> source_ids;

  std::size_t size() const { return nodes.size(); }

  bool operator==(const EntityGraph& o) const {
    return nodes == o.nodes && edges == o.edges && entity_count == o.entity_count;
  }
};

using SparseMatrixD = Eigen::SparseMatrix<double>;

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // Returns false if x and y were already connected.
  bool unite(std::uint32_t x, std::uint32_t y) {
    const std::uint32_t rx = find(x), ry = find(y);
    if (rx == ry) return false;
    parent_[rx] = ry;
    return true;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace detail

// Checks every EntityGraph invariant; throws with a specific message on the
// first violation.
inline void validate(const EntityGraph& g) {
  const std::size_t n = g.nodes.size();
  std::vector<std::uint32_t> entity_nodes_count;
  for (std::size_t i = 0; i < n; ++i) {
    const NodeRecord& node = g.nodes[i];
    if (node.id != i) fail("node ids not dense: index " + std::to_string(i));
    if (trim_copy(node.name).empty()) {
      fail("empty node name at id " + std::to_string(node.id));
    }
    if (node.kind == NodeKind::mention) {
      fail("mention nodes are not part of the training graph (id " +
           std::to_string(node.id) + ")");
    }
    if (node.entity >= g.entity_count) {
      fail("entity label " + std::to_string(node.entity) + " out of range at id " +
           std::to_string(node.id));
    }
    if (entity_nodes_count.size() < g.entity_count) {
      entity_nodes_count.resize(g.entity_count, 0);
    }
    entity_nodes_count[node.entity]++;
  }
  if (g.entity_count > 0 && n == 0) fail("entity_count > 0 with no nodes");
  for (std::uint32_t e = 0; e < g.entity_count; ++e) {
    if (entity_nodes_count.empty() || entity_nodes_count[e] == 0) {
      fail("entity labels not dense: label " + std::to_string(e) + " unused");
    }
  }

  detail::UnionFind uf(n);
  std::vector<std::uint32_t> entity_edge_count(g.entity_count, 0);
  std::pair<std::uint32_t, std::uint32_t> prev{0, 0};
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto& [a, b] = g.edges[k];
    if (a >= n || b >= n) fail("unknown node id in edge");
    if (a == b) fail("self-loop edge at node " + std::to_string(a));
    if (a > b) fail("edges not normalized (src < dst expected)");
    if (k > 0 && g.edges[k] == prev) {
      fail("duplicate edge " + std::to_string(a) + "-" + std::to_string(b));
    }
    if (k > 0 && g.edges[k] < prev) fail("edges not sorted");
    prev = g.edges[k];
    if (g.nodes[a].entity != g.nodes[b].entity) {
      fail("cross-entity edge " + std::to_string(a) + "-" + std::to_string(b));
    }
    if (!uf.unite(a, b)) {
      fail("cycle in entity " + std::to_string(g.nodes[a].entity));
    }
    entity_edge_count[g.nodes[a].entity]++;
  }
  // Acyclic + |E| == |V|-1 per entity implies each entity is one tree.
  for (std::uint32_t e = 0; e < g.entity_count; ++e) {
    if (entity_edge_count[e] + 1 != entity_nodes_count[e]) {
      fail("entity " + std::to_string(e) + " subgraph is not connected");
    }
  }
}

// Loads and validates a graph from node/edge JSONL files. Sparse input ids
// are remapped to dense 0..N-1 (file order); the original ids are retained in
// source_ids for reporting.
inline EntityGraph load_graph(const std::string& nodes_path,
                              const std::string& edges_path) {
  EntityGraph g;
  std::unordered_map<std::int64_t, std::uint32_t> remap;
  std::uint32_t max_entity = 0;

  for_each_jsonl(nodes_path, [&](std::size_t line_no, const json& j) {
    const std::string where = nodes_path + ":" + std::to_string(line_no);
    if (!j.is_object() || !j.contains("id") || !j.contains("name") ||
        !j.contains("entity")) {
      fail(where + ": node record needs id, name, entity");
    }
    const std::int64_t raw_id = j.at("id").get<std::int64_t>();
    if (raw_id < 0) fail(where + ": negative node id");
    if (!remap.emplace(raw_id, static_cast<std::uint32_t>(g.nodes.size())).second) {
      fail(where + ": duplicate node id " + std::to_string(raw_id));
    }
    NodeRecord node;
    node.id = static_cast<std::uint32_t>(g.nodes.size());
    node.name = trim_copy(j.at("name").get<std::string>());
    if (node.name.empty()) fail(where + ": empty node name");
    const std::int64_t ent = j.at("entity").get<std::int64_t>();
    if (ent < 0) fail(where + ": negative entity label");
    node.entity = static_cast<std::uint32_t>(ent);
    node.kind = j.contains("kind") ? node_kind_from(j.at("kind").get<std::string>())
                                   : NodeKind::real;
    max_entity = std::max(max_entity, node.entity);
    g.nodes.push_back(std::move(node));
    g.source_ids.push_back(raw_id);
  });
  g.entity_count = g.nodes.empty() ? 0 : max_entity + 1;

  for_each_jsonl(edges_path, [&](std::size_t line_no, const json& j) {
    const std::string where = edges_path + ":" + std::to_string(line_no);
    if (!j.is_object() || !j.contains("src") || !j.contains("dst")) {
      fail(where + ": edge record needs src, dst");
    }
    const std::int64_t src = j.at("src").get<std::int64_t>();
    const std::int64_t dst = j.at("dst").get<std::int64_t>();
    const auto is = remap.find(src);
    const auto id = remap.find(dst);
    if (is == remap.end()) fail(where + ": unknown node id " + std::to_string(src));
    if (id == remap.end()) fail(where + ": unknown node id " + std::to_string(dst));
    std::uint32_t a = is->second, b = id->second;
    if (a > b) std::swap(a, b);
    g.edges.emplace_back(a, b);
  });
  std::sort(g.edges.begin(), g.edges.end());

  validate(g);
  return g;
}

inline void save_nodes(const std::vector<NodeRecord>& nodes,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  for (const NodeRecord& node : nodes) {
    json j{{"id", node.id},
           {"name", node.name},
           {"entity", node.entity},
           {"kind", to_string(node.kind)}};
    out << j.dump() << '\n';
  }
}

inline void save_nodes(const EntityGraph& g, const std::string& path) {
  save_nodes(g.nodes, path);
}

// Node records as written, ids untouched. load_graph is the validating
// entry point; this one serves bundle node tables.
inline std::vector<NodeRecord> load_nodes(const std::string& path) {
  std::vector<NodeRecord> nodes;
  for_each_jsonl(path, [&](std::size_t line_no, const json& j) {
    const std::string where = path + ":" + std::to_string(line_no);
    if (!j.is_object() || !j.contains("id") || !j.contains("name") ||
        !j.contains("entity")) {
      fail(where + ": node record needs id, name, entity");
    }
    NodeRecord node;
    const std::int64_t raw_id = j.at("id").get<std::int64_t>();
    if (raw_id < 0) fail(where + ": negative node id");
    node.id = static_cast<std::uint32_t>(raw_id);
    node.name = trim_copy(j.at("name").get<std::string>());
    if (node.name.empty()) fail(where + ": empty node name");
    const std::int64_t ent = j.at("entity").get<std::int64_t>();
    if (ent < 0) fail(where + ": negative entity label");
    node.entity = static_cast<std::uint32_t>(ent);
    node.kind = j.contains("kind") ? node_kind_from(j.at("kind").get<std::string>())
                                   : NodeKind::real;
    nodes.push_back(std::move(node));
  });
  return nodes;
}

inline void save_graph(const EntityGraph& g, const std::string& nodes_path,
                       const std::string& edges_path) {
  save_nodes(g, nodes_path);
  std::ofstream out(edges_path);
  if (!out) fail("cannot write " + edges_path);
  for (const auto& [a, b] : g.edges) {
    out << json{{"src", a}, {"dst", b}}.dump() << '\n';
  }
}

inline std::vector<Mention> load_mentions(const std::string& path) {
  std::vector<Mention> mentions;
  for_each_jsonl(path, [&](std::size_t line_no, const json& j) {
    const std::string where = path + ":" + std::to_string(line_no);
    if (!j.is_object() || !j.contains("name") || !j.contains("entity")) {
      fail(where + ": mention record needs name, entity");
    }
    Mention m;
    m.name = trim_copy(j.at("name").get<std::string>());
    if (m.name.empty()) fail(where + ": empty mention name");
    const std::int64_t ent = j.at("entity").get<std::int64_t>();
    if (ent < 0) fail(where + ": negative entity label");
    m.entity = static_cast<std::uint32_t>(ent);
    mentions.push_back(std::move(m));
  });
  return mentions;
}

inline void save_mentions(const std::vector<Mention>& mentions,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  for (const Mention& m : mentions) {
    out << json{{"name", m.name}, {"entity", m.entity}}.dump() << '\n';
  }
}

// A_hat = D~^{-1/2} (A + I) D~^{-1/2} with D~ = D + I. Exactly symmetric;
// isolated nodes contribute a lone diagonal 1.
inline SparseMatrixD normalized_adjacency(const EntityGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.nodes.size());
  std::vector<double> degree(g.nodes.size(), 1.0);  // self-loop included
  for (const auto& [a, b] : g.edges) {
    degree[a] += 1.0;
    degree[b] += 1.0;
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(g.nodes.size() + 2 * g.edges.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0 / degree[i]);
  }
  for (const auto& [a, b] : g.edges) {
    const double w = 1.0 / (std::sqrt(degree[a]) * std::sqrt(degree[b]));
    trips.emplace_back(static_cast<int>(a), static_cast<int>(b), w);
    trips.emplace_back(static_cast<int>(b), static_cast<int>(a), w);
  }
  SparseMatrixD m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

// Deterministic disjoint exhaustive partition of a mention list.
inline std::pair<std::vector<Mention>, std::vector<Mention>> split_train_test(
    const std::vector<Mention>& mentions, double fraction, std::uint64_t seed) {
  if (mentions.empty()) fail("cannot split an empty mention list");
  if (!(fraction > 0.0 && fraction < 1.0)) fail("split fraction must be in (0,1)");
  std::vector<std::uint32_t> order(mentions.size());
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(seed);
  rng.shuffle(order);
  const auto train_count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(mentions.size())));
  std::pair<std::vector<Mention>, std::vector<Mention>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < train_count ? out.first : out.second).push_back(mentions[order[i]]);
  }
  return out;
}

// Node ids grouped by entity label, ids ascending within each group.
inline std::vector<std::vector<std::uint32_t>> nodes_by_entity(const EntityGraph& g) {
  std::vector<std::vector<std::uint32_t>> groups(g.entity_count);
  for (const NodeRecord& node : g.nodes) groups[node.entity].push_back(node.id);
  return groups;
}

}  // namespace kgmatch
