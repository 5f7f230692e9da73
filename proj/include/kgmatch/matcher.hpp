#pragma once
// End-to-end inference: encode a mention, embed it as a singleton graph,
// query the index, and resolve the neighbor list to an entity.

#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kgmatch/features.hpp"
#include "kgmatch/gcn.hpp"
#include "kgmatch/graph.hpp"
#include "kgmatch/io.hpp"
#include "kgmatch/knn.hpp"

namespace kgmatch {

enum class ResolutionRule { top1, vote };

inline std::string to_string(ResolutionRule r) {
  return r == ResolutionRule::top1 ? "top1" : "vote";
}

inline ResolutionRule resolution_rule_from(const std::string& s) {
  if (s == "top1") return ResolutionRule::top1;
  if (s == "vote") return ResolutionRule::vote;
  fail("unknown resolution rule: " + s);
}

struct MatchEntry {
  int entity = 0;
  int best_node = 0;
  std::string node_name;
  double distance = 0.0;
  int votes = 0;  // nodes of this entity among the K hits
};

struct MatchResult {
  std::vector<MatchEntry> entries;  // ranked, resolved entity first
  ResolutionRule rule = ResolutionRule::vote;
  int k = 10;
};

struct MatcherBundle {
  ModelParams params;
  KnnIndex index;
  std::unordered_map<int, NodeRecord> node_table;
};

inline void validate(const MatcherBundle& b) {
  validate(b.params);
  if (static_cast<std::uint32_t>(b.params.layer_dims.front()) !=
      b.params.encoder.buckets) {
    fail("encoder width does not match model input dim");
  }
  if (b.index.dim() != b.params.layer_dims.back() && b.index.size() > 0) {
    fail("index dimension does not match model output dim");
  }
  for (int id : b.index.ids()) {
    if (!b.node_table.count(id)) {
      fail("index id " + std::to_string(id) + " missing from node table");
    }
  }
}

inline MatcherBundle make_bundle(ModelParams params, KnnIndex index,
                                 const std::vector<NodeRecord>& nodes) {
  MatcherBundle b{std::move(params), std::move(index), {}};
  for (const auto& n : nodes) {
    if (!b.node_table.emplace(n.id, n).second) {
      fail("duplicate node id " + std::to_string(n.id));
    }
  }
  validate(b);
  return b;
}

inline MatchResult match_mention(const MatcherBundle& b, const std::string& name,
                                 int k = 10,
                                 ResolutionRule rule = ResolutionRule::vote) {
  if (trim_copy(name).empty()) fail("empty mention name");
  if (b.index.size() == 0) fail("empty index");
  if (k < 1) fail("k must be positive");

  const Eigen::VectorXd x =
      encode_ngram(name, b.params.encoder).cast<double>();
  const Eigen::VectorXd gamma = embed_singleton(x, b.params);
  const KnnResult hits = b.index.query(gamma, k);

  // Hits arrive ordered by (distance, id); the first hit of each entity is
  // its best node, so group order already encodes the top1 ranking.
  std::vector<MatchEntry> groups;
  std::unordered_map<int, std::size_t> pos;
  for (const auto& h : hits) {
    const NodeRecord& node = b.node_table.at(h.id);
    auto [it, fresh] = pos.emplace(static_cast<int>(node.entity), groups.size());
    if (fresh) {
      groups.push_back(
          {static_cast<int>(node.entity), h.id, node.name, h.distance, 1});
    } else {
      ++groups[it->second].votes;
    }
  }
  if (rule == ResolutionRule::vote) {
    std::sort(groups.begin(), groups.end(),
              [](const MatchEntry& a, const MatchEntry& b) {
                if (a.votes != b.votes) return a.votes > b.votes;
                if (a.distance != b.distance) return a.distance < b.distance;
                return a.entity < b.entity;
              });
  }
  return {std::move(groups), rule, k};
}

// Element-wise match_mention; failures carry the offending position.
inline std::vector<MatchResult> batch_match(const MatcherBundle& b,
                                            const std::vector<std::string>& names,
                                            int k = 10,
                                            ResolutionRule rule = ResolutionRule::vote) {
  std::vector<MatchResult> out;
  out.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    try {
      out.push_back(match_mention(b, names[i], k, rule));
    } catch (const std::exception& e) {
      fail("mention " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

// ---- bundle directory: model + index + nodes + encoder + manifest ----

inline void save_bundle(const MatcherBundle& b, const std::string& dir) {
  validate(b);
  save_model(b.params, dir + "/model.bin");
  b.index.save(dir + "/index.bin");
  std::vector<NodeRecord> nodes;
  nodes.reserve(b.node_table.size());
  for (const auto& [id, n] : b.node_table) nodes.push_back(n);
  std::sort(nodes.begin(), nodes.end(),
            [](const NodeRecord& a, const NodeRecord& b) { return a.id < b.id; });
  save_nodes(nodes, dir + "/nodes.jsonl");
  {
    std::ofstream out(dir + "/encoder.json", std::ios::binary);
    if (!out) fail("cannot write " + dir + "/encoder.json");
    out << json(b.params.encoder).dump(2) << '\n';
  }
  json files = json::object();
  for (const char* name : {"model.bin", "index.bin", "nodes.jsonl", "encoder.json"}) {
    files[name] = file_digest(dir + "/" + name);
  }
  std::ofstream out(dir + "/manifest.json", std::ios::binary);
  if (!out) fail("cannot write " + dir + "/manifest.json");
  out << json{{"format", "KGB1"}, {"files", files}}.dump(2) << '\n';
}

inline MatcherBundle load_bundle(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.json", std::ios::binary);
  if (!mf) fail("cannot open " + dir + "/manifest.json");
  json manifest = json::parse(mf, nullptr, false);
  if (manifest.is_discarded()) fail(dir + ": invalid manifest");
  if (manifest.value("format", "") != "KGB1") fail(dir + ": unknown bundle format");
  for (const auto& [name, digest] : manifest.at("files").items()) {
    const std::string actual = file_digest(dir + "/" + name);
    if (actual != digest.get<std::string>()) {
      fail("manifest digest mismatch for " + name);
    }
  }

  ModelParams params = load_model(dir + "/model.bin");
  {
    std::ifstream enc(dir + "/encoder.json", std::ios::binary);
    if (!enc) fail("cannot open " + dir + "/encoder.json");
    json j = json::parse(enc, nullptr, false);
    if (j.is_discarded()) fail(dir + ": invalid encoder config");
    if (j.get<NgramEncoderConfig>() != params.encoder) {
      // Guard against mixing artifacts from different runs.
      fail("encoder config does not match model");
    }
  }
  KnnIndex index = KnnIndex::load(dir + "/index.bin");
  std::vector<NodeRecord> nodes = load_nodes(dir + "/nodes.jsonl");
  return make_bundle(std::move(params), std::move(index), nodes);
}

}  // namespace kgmatch
