#pragma once
// Seeded synthetic knowledge-graph generator: desk-scale stand-in for a real
// business-entity database. Each entity is a random tree of branch-name
// variants around a base company name; mentions are held-out name variants
// labeled with their true entity.

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "kgmatch/graph.hpp"
#include "kgmatch/io.hpp"

namespace kgmatch {

struct SynthConfig {
  std::uint32_t entity_count = 200;
  std::uint32_t branches_min = 3;   // nodes per entity, root included
  std::uint32_t branches_max = 12;
  std::vector<std::string> suffixes = {"PLC", "AG",  "Inc", "GmbH", "Ltd",
                                       "SA",  "Corp", "LLC", "NV",   "SpA"};
  std::vector<std::string> locations = {
      "Zurich", "London", "Geneva",  "Paris",  "Berlin", "Madrid", "Milan",
      "Vienna", "Basel",  "Oslo",    "Lisbon", "Dublin", "Prague", "Warsaw",
      "Athens", "Boston", "Austin",  "Denver", "Toronto", "Sydney"};
  std::uint32_t mention_count = 400;
  std::uint64_t seed = 1;
};

inline void to_json(json& j, const SynthConfig& cfg) {
  j = json{{"entity_count", cfg.entity_count},
           {"branches_min", cfg.branches_min},
           {"branches_max", cfg.branches_max},
           {"suffixes", cfg.suffixes},
           {"locations", cfg.locations},
           {"mention_count", cfg.mention_count},
           {"seed", cfg.seed}};
}

struct SynthResult {
  EntityGraph graph;
  std::vector<Mention> mentions;
};

namespace detail {

inline const std::vector<std::string>& base_words() {
  static const std::vector<std::string> words = {
      "Norvex",    "Altavia",  "Quorania", "Zephyra",  "Meridian", "Koralis",
      "Vantor",    "Helixia",  "Brumark",  "Ostrel",   "Calvero",  "Dunmore",
      "Ferrovia",  "Gantrel",  "Halcyon",  "Ibertek",  "Jovana",   "Kestrel",
      "Lumetra",   "Mistral",  "Novark",   "Orbiton",  "Pelagia",  "Quintara",
      "Rovanta",   "Solvena",  "Tessark",  "Umbriel",  "Velmont",  "Wintera",
      "Xanella",   "Ygdrana",  "Zonvale",  "Arbeta",   "Borealis", "Cindral",
      "Drovna",    "Elvora",   "Fenwick",  "Glenmar",  "Hartwell", "Istrena",
      "Jentara",   "Kovalen",  "Lindmark", "Morvath",  "Nestrovia", "Oakhurst",
      "Pintara",   "Quellson", "Ristola",  "Stelvio",  "Tarnow",   "Ulvestad",
      "Vornia",    "Westbrook", "Yarrow",  "Zelenka",  "Amberline", "Bravura",
      "Corvala",   "Delmara",  "Everlyn",  "Fintona"};
  return words;
}

inline const std::vector<std::string>& org_words() {
  static const std::vector<std::string> words = {
      "Holdings", "Group",      "Services",   "Trading",  "Partners",
      "International", "Industries", "Logistics", "Capital", "Systems"};
  return words;
}

// One random character edit; alphabet is lowercase letters.
inline std::string typo_edit(std::string s, Rng& rng) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
  const auto len = static_cast<std::uint32_t>(s.size());
  switch (len >= 2 ? rng.below(4) : rng.below(2)) {
    case 0: {  // insert
      const std::uint32_t pos = rng.below(len + 1);
      s.insert(s.begin() + pos, alphabet[rng.below(26)]);
      break;
    }
    case 1: {  // replace
      const std::uint32_t pos = rng.below(len);
      s[pos] = alphabet[rng.below(26)];
      break;
    }
    case 2: {  // adjacent swap
      const std::uint32_t pos = rng.below(len - 1);
      std::swap(s[pos], s[pos + 1]);
      break;
    }
    default: {  // remove
      const std::uint32_t pos = rng.below(len);
      s.erase(s.begin() + pos);
      break;
    }
  }
  return s;
}

inline std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) tokens.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

// Lowercase with legal-suffix tokens dropped; local shorthand for mention
// variants (the canonicalizer in canonical.hpp is the full rule set).
inline std::string terse_form(const std::string& name,
                              const std::vector<std::string>& suffixes) {
  std::vector<std::string> kept;
  for (const auto& tok : split_tokens(lower_ascii(name))) {
    bool is_suffix = false;
    for (const auto& suf : suffixes) {
      if (tok == lower_ascii(suf)) {
        is_suffix = true;
        break;
      }
    }
    if (!is_suffix) kept.push_back(tok);
  }
  return kept.empty() ? lower_ascii(name) : join_tokens(kept);
}

}  // namespace detail

// Deterministic for a fixed seed. Throws if the internal base-name vocabulary
// cannot supply entity_count distinct base names.
inline SynthResult generate_synthetic_kg(const SynthConfig& cfg) {
  if (cfg.entity_count < 2) fail("entity_count must be >= 2");
  if (cfg.branches_min < 1 || cfg.branches_min > cfg.branches_max) {
    fail("branch range is empty");
  }
  if (cfg.suffixes.empty() || cfg.locations.empty()) {
    fail("suffix and location vocabularies must be non-empty");
  }

  Rng rng(mix_seed(cfg.seed, 0));
  const auto& words = detail::base_words();
  const auto& orgs = detail::org_words();

  SynthResult out;
  EntityGraph& g = out.graph;
  g.entity_count = cfg.entity_count;

  std::unordered_set<std::string> used_bases;
  std::unordered_set<std::string> used_abbrevs;
  std::vector<std::string> entity_base(cfg.entity_count);
  std::vector<std::string> entity_suffix(cfg.entity_count);
  std::vector<std::string> entity_abbrev(cfg.entity_count);  // "" if none
  std::vector<std::vector<std::uint32_t>> entity_nodes(cfg.entity_count);

  auto add_node = [&](std::uint32_t entity, const std::string& name) {
    const auto id = static_cast<std::uint32_t>(g.nodes.size());
    g.nodes.push_back(NodeRecord{id, name, entity, NodeKind::real});
    entity_nodes[entity].push_back(id);
    return id;
  };

  for (std::uint32_t e = 0; e < cfg.entity_count; ++e) {
    std::string base;
    bool found = false;
    for (int attempt = 0; attempt < 200 && !found; ++attempt) {
      base = rng.pick(words);
      if (rng.unit() < 0.4) base += " " + rng.pick(words);
      found = used_bases.insert(base).second;
    }
    if (!found) {
      fail("vocabulary too small to generate " + std::to_string(cfg.entity_count) +
           " distinct base names");
    }
    entity_base[e] = base;
    entity_suffix[e] = rng.pick(cfg.suffixes);

    // Multi-word bases carry their initials as a branch alias ("IBM" style),
    // so the graph itself holds the abbreviation knowledge. Skipped when two
    // entities would collide on the same initials.
    const auto base_tokens = detail::split_tokens(base);
    if (base_tokens.size() >= 2) {
      std::string abbrev;
      for (const auto& t : base_tokens) abbrev.push_back(t[0]);
      if (used_abbrevs.insert(abbrev).second) entity_abbrev[e] = abbrev;
    }

    const std::uint32_t branch_count =
        cfg.branches_min + rng.below(cfg.branches_max - cfg.branches_min + 1);

    std::unordered_set<std::string> used_names;
    const std::string root_name = base + " " + entity_suffix[e];
    used_names.insert(root_name);
    add_node(e, root_name);

    for (std::uint32_t b = 1; b < branch_count; ++b) {
      std::string name;
      bool fresh = false;
      if (b == 1 && !entity_abbrev[e].empty()) {
        name = entity_abbrev[e];
        fresh = used_names.insert(name).second;
      }
      for (int attempt = 0; attempt < 20 && !fresh; ++attempt) {
        switch (rng.below(5)) {
          case 0:
            name = base + " " + entity_suffix[e] + " " + rng.pick(cfg.locations);
            break;
          case 1:
            name = base + " " + rng.pick(cfg.locations);
            break;
          case 2:
            name = base + " " + rng.pick(orgs);
            break;
          case 3:
            name = base + " " + rng.pick(orgs) + " " + entity_suffix[e];
            break;
          default:
            name = base + " " + rng.pick(cfg.locations) + " " + rng.pick(orgs);
            break;
        }
        fresh = used_names.insert(name).second;
      }
      if (!fresh) {
        name = base + " Branch " + std::to_string(b);
        used_names.insert(name);
      }
      const std::uint32_t id = add_node(e, name);
      const std::uint32_t parent =
          entity_nodes[e][rng.below(static_cast<std::uint32_t>(entity_nodes[e].size()) - 1)];
      g.edges.emplace_back(std::min(parent, id), std::max(parent, id));
    }
  }
  std::sort(g.edges.begin(), g.edges.end());

  std::unordered_set<std::string> node_names;
  for (const auto& node : g.nodes) node_names.insert(node.name);

  Rng mention_rng(mix_seed(cfg.seed, 1));
  for (std::uint32_t i = 0; i < cfg.mention_count; ++i) {
    const std::uint32_t e = mention_rng.below(cfg.entity_count);
    std::string text;
    for (int attempt = 0; attempt < 10; ++attempt) {
      const std::uint32_t src = mention_rng.pick(entity_nodes[e]);
      const std::string& source_name = g.nodes[src].name;
      switch (mention_rng.below(8)) {
        case 0:
          text = detail::typo_edit(source_name, mention_rng);
          break;
        case 1:
          text = detail::typo_edit(detail::typo_edit(source_name, mention_rng),
                                   mention_rng);
          break;
        case 2:
          text = detail::terse_form(source_name, cfg.suffixes);
          break;
        case 3: {
          auto tokens = detail::split_tokens(source_name);
          if (tokens.size() > 1) {
            tokens.erase(tokens.begin() + mention_rng.below(
                             static_cast<std::uint32_t>(tokens.size())));
            text = detail::join_tokens(tokens);
          } else {
            text = lower_ascii(source_name);
          }
          break;
        }
        case 4:
          text = entity_base[e] + " " + mention_rng.pick(cfg.locations);
          break;
        case 5:
          // Abbreviation reference ("ibm"); base-name fallback when the
          // entity has no initials alias.
          text = entity_abbrev[e].empty() ? lower_ascii(entity_base[e])
                                          : lower_ascii(entity_abbrev[e]);
          break;
        case 6:
          // Located abbreviation ("IBM Zurich").
          text = (entity_abbrev[e].empty() ? entity_base[e] : entity_abbrev[e]) +
                 " " + mention_rng.pick(cfg.locations);
          break;
        default:
          text = lower_ascii(source_name);
          break;
      }
      if (!text.empty() && !node_names.contains(text)) break;
    }
    if (text.empty()) text = lower_ascii(entity_base[e]);
    out.mentions.push_back(Mention{text, e});
  }

  validate(g);
  return out;
}

}  // namespace kgmatch
