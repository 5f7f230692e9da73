#pragma once
// Rule-based company-name canonicalizer and the KG augmentation step that
// links each canonical form to its real name.

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgmatch/graph.hpp"
#include "kgmatch/io.hpp"

namespace kgmatch {

struct CanonicalizerConfig {
  // Matched against lowercased tokens after punctuation removal.
  std::vector<std::string> legal_suffixes = {
      "plc", "ag",  "inc", "gmbh", "ltd", "llc", "sa",  "nv",  "spa", "corp",
      "co",  "kg",  "srl", "bv",   "oy",  "ab",  "as",  "llp", "pty", "se"};
};

// lowercase -> strip punctuation -> drop legal-suffix tokens -> collapse
// whitespace. May return an empty string when the name consists only of
// suffix tokens.
inline std::string canonicalize(const std::string& name,
                                const CanonicalizerConfig& cfg = {}) {
  static const std::string punct = ".,;:!?'\"()[]{}&/\\-_+*@";
  std::string lowered = lower_ascii(name);
  for (char& c : lowered) {
    if (punct.find(c) != std::string::npos) c = '\0';
  }
  std::string stripped;
  for (char c : lowered) {
    if (c != '\0') stripped.push_back(c);
  }

  std::unordered_set<std::string> suffixes;
  for (const auto& s : cfg.legal_suffixes) suffixes.insert(lower_ascii(s));

  std::string out, token;
  auto flush = [&] {
    if (!token.empty() && !suffixes.contains(token)) {
      if (!out.empty()) out.push_back(' ');
      out += token;
    }
    token.clear();
  };
  for (char c : stripped) {
    if (c == ' ' || c == '\t') {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  return out;
}

// For each real node whose canonical form differs from its name, adds a
// canonical node of the same entity with one edge to the source node.
// Idempotent: a real node already linked to a canonical node carrying its
// canonical form is left alone.
inline EntityGraph augment_canonical(const EntityGraph& g,
                                     const CanonicalizerConfig& cfg = {}) {
  EntityGraph out = g;
  out.source_ids.clear();

  // canonical-kind neighbor names per node, for the idempotence check
  std::unordered_map<std::uint32_t, std::unordered_set<std::string>> canon_neighbors;
  for (const auto& [a, b] : g.edges) {
    if (g.nodes[b].kind == NodeKind::canonical) {
      canon_neighbors[a].insert(g.nodes[b].name);
    }
    if (g.nodes[a].kind == NodeKind::canonical) {
      canon_neighbors[b].insert(g.nodes[a].name);
    }
  }

  const std::size_t original_count = g.nodes.size();
  for (std::size_t i = 0; i < original_count; ++i) {
    const NodeRecord& node = g.nodes[i];
    if (node.kind != NodeKind::real) continue;
    const std::string canon = canonicalize(node.name, cfg);
    if (canon.empty() || canon == node.name) continue;
    const auto it = canon_neighbors.find(node.id);
    if (it != canon_neighbors.end() && it->second.contains(canon)) continue;

    const auto new_id = static_cast<std::uint32_t>(out.nodes.size());
    out.nodes.push_back(NodeRecord{new_id, canon, node.entity, NodeKind::canonical});
    out.edges.emplace_back(node.id, new_id);
  }
  std::sort(out.edges.begin(), out.edges.end());
  validate(out);
  return out;
}

}  // namespace kgmatch
