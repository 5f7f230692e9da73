// Foundations: io primitives, graph store, synthetic generator,
// canonicalizer, and the n-gram feature encoder.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "kgmatch/canonical.hpp"
#include "kgmatch/features.hpp"
#include "kgmatch/graph.hpp"
#include "kgmatch/io.hpp"
#include "kgmatch/synth.hpp"

#include "support/oracles.hpp"
#include "support/testgraphs.hpp"

namespace fs = std::filesystem;
using namespace kgmatch;

namespace {

// Fresh scratch directory per test run, removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("kgmatch-test-" + std::to_string(Catch::rngSeed()) + "-" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---- io primitives ----

TEST_CASE("mix64 and mix_seed produce stable distinct streams") {
  REQUIRE(mix64(1) == mix64(1));
  REQUIRE(mix64(1) != mix64(2));
  REQUIRE(mix_seed(1, 0) == mix_seed(1, 0));
  REQUIRE(mix_seed(1, 0) != mix_seed(1, 1));
  REQUIRE(mix_seed(1, 0) != mix_seed(2, 0));
}

TEST_CASE("rng is deterministic per seed") {
  Rng a(42), b(42), c(43);
  bool all_equal = true;
  bool any_differ = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next();
    all_equal = all_equal && va == b.next();
    any_differ = any_differ || va != c.next();
  }
  REQUIRE(all_equal);
  REQUIRE(any_differ);
}

TEST_CASE("rng below stays in range and covers the range") {
  Rng rng(7);
  std::set<std::uint32_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::uint32_t v = rng.below(5);
    REQUIRE(v < 5);
    seen.insert(v);
  }
  REQUIRE(seen.size() == 5);
}

TEST_CASE("rng unit stays in [0,1)") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("rng shuffle permutes deterministically") {
  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> v2 = v1;
  const std::vector<int> sorted = v1;
  Rng a(9), b(9);
  a.shuffle(v1);
  b.shuffle(v2);
  REQUIRE(v1 == v2);
  std::vector<int> back = v1;
  std::sort(back.begin(), back.end());
  REQUIRE(back == sorted);
}

TEST_CASE("little-endian codecs round-trip") {
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  write_u32le(ss, 0xDEADBEEFu);
  write_u64le(ss, 0x0123456789ABCDEFull);
  write_f32le(ss, -1.5f);
  write_f64le(ss, 3.141592653589793);
  REQUIRE(read_u32le(ss, "t") == 0xDEADBEEFu);
  REQUIRE(read_u64le(ss, "t") == 0x0123456789ABCDEFull);
  REQUIRE(read_f32le(ss, "t") == -1.5f);
  REQUIRE(read_f64le(ss, "t") == 3.141592653589793);
}

TEST_CASE("u32 codec writes little-endian byte order") {
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  write_u32le(ss, 0x01020304u);
  const std::string bytes = ss.str();
  REQUIRE(bytes.size() == 4);
  REQUIRE(static_cast<unsigned char>(bytes[0]) == 0x04);
  REQUIRE(static_cast<unsigned char>(bytes[3]) == 0x01);
}

TEST_CASE("fnv1a64 matches published test vectors") {
  REQUIRE(fnv1a64("") == 0xCBF29CE484222325ull);
  REQUIRE(fnv1a64("a") == 0xAF63DC4C8601EC8Cull);
  REQUIRE(fnv1a64("foobar") == 0x85944171F73967E8ull);
}

TEST_CASE("digest_hex is 16 lowercase hex characters") {
  REQUIRE(digest_hex(0) == "0000000000000000");
  REQUIRE(digest_hex(0xABCDEF0123456789ull) == "abcdef0123456789");
}

TEST_CASE("file_digest equals fnv over the file bytes") {
  TempDir tmp;
  const std::string payload = "digest me\nplease";
  write_text(tmp.file("f.txt"), payload);
  REQUIRE(file_digest(tmp.file("f.txt")) == digest_hex(fnv1a64(payload)));
}

TEST_CASE("for_each_jsonl skips blanks and reports bad lines") {
  TempDir tmp;
  write_text(tmp.file("ok.jsonl"), "{\"a\":1}\n\n  \n{\"a\":2}\n");
  int count = 0;
  for_each_jsonl(tmp.file("ok.jsonl"),
                 [&](std::size_t, const json&) { ++count; });
  REQUIRE(count == 2);

  write_text(tmp.file("bad.jsonl"), "{\"a\":1}\nnot json\n");
  REQUIRE_THROWS_WITH(
      for_each_jsonl(tmp.file("bad.jsonl"), [](std::size_t, const json&) {}),
      Catch::Matchers::ContainsSubstring(":2") &&
          Catch::Matchers::ContainsSubstring("invalid JSON"));
}

TEST_CASE("trim and lowercase helpers") {
  REQUIRE(trim_copy("  a b \t\n") == "a b");
  REQUIRE(trim_copy(" \t ") == "");
  REQUIRE(lower_ascii("AbC-9Z") == "abc-9z");
}

// ---- graph store ----

TEST_CASE("load_graph accepts a minimal two-node graph") {
  TempDir tmp;
  write_text(tmp.file("nodes.jsonl"),
             "{\"id\":0,\"name\":\"Acme AG\",\"entity\":0}\n"
             "{\"id\":1,\"name\":\"Acme Zurich\",\"entity\":0}\n");
  write_text(tmp.file("edges.jsonl"), "{\"src\":0,\"dst\":1}\n");
  const EntityGraph g = load_graph(tmp.file("nodes.jsonl"), tmp.file("edges.jsonl"));
  REQUIRE(g.size() == 2);
  REQUIRE(g.entity_count == 1);
  REQUIRE(g.edges.size() == 1);
}

TEST_CASE("load_graph rejects an edge to an unknown id") {
  TempDir tmp;
  write_text(tmp.file("nodes.jsonl"),
             "{\"id\":0,\"name\":\"A\",\"entity\":0}\n"
             "{\"id\":1,\"name\":\"B\",\"entity\":0}\n");
  write_text(tmp.file("edges.jsonl"), "{\"src\":0,\"dst\":99}\n");
  REQUIRE_THROWS_WITH(
      load_graph(tmp.file("nodes.jsonl"), tmp.file("edges.jsonl")),
      Catch::Matchers::ContainsSubstring("unknown node id 99"));
}

TEST_CASE("load_graph rejects duplicate ids, cross-entity edges, cycles") {
  TempDir tmp;
  write_text(tmp.file("dup.jsonl"),
             "{\"id\":3,\"name\":\"A\",\"entity\":0}\n"
             "{\"id\":3,\"name\":\"B\",\"entity\":0}\n");
  write_text(tmp.file("none.jsonl"), "");
  REQUIRE_THROWS_WITH(load_graph(tmp.file("dup.jsonl"), tmp.file("none.jsonl")),
                      Catch::Matchers::ContainsSubstring("duplicate node id"));

  write_text(tmp.file("nodes.jsonl"),
             "{\"id\":0,\"name\":\"A\",\"entity\":0}\n"
             "{\"id\":1,\"name\":\"B\",\"entity\":1}\n");
  write_text(tmp.file("cross.jsonl"), "{\"src\":0,\"dst\":1}\n");
  REQUIRE_THROWS_WITH(
      load_graph(tmp.file("nodes.jsonl"), tmp.file("cross.jsonl")),
      Catch::Matchers::ContainsSubstring("cross-entity edge"));

  write_text(tmp.file("tri.jsonl"),
             "{\"id\":0,\"name\":\"A\",\"entity\":0}\n"
             "{\"id\":1,\"name\":\"B\",\"entity\":0}\n"
             "{\"id\":2,\"name\":\"C\",\"entity\":0}\n");
  write_text(tmp.file("cycle.jsonl"),
             "{\"src\":0,\"dst\":1}\n{\"src\":1,\"dst\":2}\n{\"src\":2,\"dst\":0}\n");
  REQUIRE_THROWS_WITH(load_graph(tmp.file("tri.jsonl"), tmp.file("cycle.jsonl")),
                      Catch::Matchers::ContainsSubstring("cycle"));
}

TEST_CASE("load_graph remaps sparse ids to dense and keeps the originals") {
  TempDir tmp;
  write_text(tmp.file("nodes.jsonl"),
             "{\"id\":10,\"name\":\"A\",\"entity\":0}\n"
             "{\"id\":700,\"name\":\"B\",\"entity\":0}\n");
  write_text(tmp.file("edges.jsonl"), "{\"src\":700,\"dst\":10}\n");
  const EntityGraph g = load_graph(tmp.file("nodes.jsonl"), tmp.file("edges.jsonl"));
  REQUIRE(g.nodes[0].id == 0);
  REQUIRE(g.nodes[1].id == 1);
  REQUIRE(g.source_ids == std::vector<std::int64_t>{10, 700});
  REQUIRE(g.edges == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}});
}

TEST_CASE("validate rejects self-loops and duplicate edges") {
  EntityGraph g = testgraphs::make_graph({{"A", 0}, {"B", 0}}, {{0, 1}}, 1);
  g.edges.push_back({1, 1});
  REQUIRE_THROWS_WITH(validate(g), Catch::Matchers::ContainsSubstring("self-loop"));
  g.edges.back() = {0, 1};
  REQUIRE_THROWS_WITH(validate(g), Catch::Matchers::ContainsSubstring("duplicate edge"));
}

TEST_CASE("graph save and load round-trips synthetic output") {
  TempDir tmp;
  SynthConfig cfg;
  cfg.entity_count = 12;
  cfg.mention_count = 20;
  cfg.seed = 3;
  const SynthResult data = generate_synthetic_kg(cfg);
  save_graph(data.graph, tmp.file("nodes.jsonl"), tmp.file("edges.jsonl"));
  save_mentions(data.mentions, tmp.file("mentions.jsonl"));
  const EntityGraph loaded =
      load_graph(tmp.file("nodes.jsonl"), tmp.file("edges.jsonl"));
  REQUIRE(loaded == data.graph);
  REQUIRE(load_mentions(tmp.file("mentions.jsonl")) == data.mentions);
}

TEST_CASE("normalized adjacency on the two smallest graphs") {
  const EntityGraph lone = testgraphs::make_graph({{"A", 0}}, {}, 1);
  const Eigen::MatrixXd m1 = Eigen::MatrixXd(normalized_adjacency(lone));
  REQUIRE(m1.rows() == 1);
  REQUIRE(m1(0, 0) == 1.0);

  const EntityGraph pair = testgraphs::make_graph({{"A", 0}, {"B", 0}}, {{0, 1}}, 1);
  const Eigen::MatrixXd m2 = Eigen::MatrixXd(normalized_adjacency(pair));
  REQUIRE(m2.isApprox(Eigen::MatrixXd::Constant(2, 2, 0.5), 1e-15));
}

TEST_CASE("normalized adjacency equals the dense oracle on random graphs") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const EntityGraph g = testgraphs::random_entity_graph(rng, 50);
    const Eigen::MatrixXd sparse = Eigen::MatrixXd(normalized_adjacency(g));
    const Eigen::MatrixXd dense = oracles::dense_normalized_adjacency(
        static_cast<int>(g.size()), testgraphs::edge_list(g));
    REQUIRE((sparse - dense).cwiseAbs().maxCoeff() <= 1e-12);
    // Symmetry must be exact, not approximate.
    REQUIRE(sparse == sparse.transpose().eval());
  }
}

TEST_CASE("isolated nodes get the lone diagonal row") {
  const EntityGraph g = testgraphs::make_graph(
      {{"A", 0}, {"B", 0}, {"Solo", 1}}, {{0, 1}}, 2);
  const Eigen::MatrixXd m = Eigen::MatrixXd(normalized_adjacency(g));
  REQUIRE(m(2, 2) == 1.0);
  REQUIRE(m(2, 0) == 0.0);
  REQUIRE(m(2, 1) == 0.0);
}

TEST_CASE("split_train_test partitions deterministically") {
  std::vector<Mention> mentions;
  for (int i = 0; i < 10; ++i) {
    mentions.push_back(Mention{"m" + std::to_string(i),
                               static_cast<std::uint32_t>(i % 3)});
  }
  const auto [train1, test1] = split_train_test(mentions, 0.5, 4);
  const auto [train2, test2] = split_train_test(mentions, 0.5, 4);
  REQUIRE(train1.size() == 5);
  REQUIRE(test1.size() == 5);
  REQUIRE(train1 == train2);
  REQUIRE(test1 == test2);

  // Union must reproduce the input as a multiset.
  std::vector<std::string> all, orig;
  for (const auto& m : train1) all.push_back(m.name);
  for (const auto& m : test1) all.push_back(m.name);
  for (const auto& m : mentions) orig.push_back(m.name);
  std::sort(all.begin(), all.end());
  std::sort(orig.begin(), orig.end());
  REQUIRE(all == orig);

  REQUIRE_THROWS_WITH(split_train_test({}, 0.5, 1),
                      Catch::Matchers::ContainsSubstring("empty"));
  REQUIRE_THROWS_WITH(split_train_test(mentions, 1.0, 1),
                      Catch::Matchers::ContainsSubstring("fraction"));
}

TEST_CASE("nodes_by_entity groups ids in ascending order") {
  const EntityGraph g = testgraphs::make_graph(
      {{"A", 1}, {"B", 0}, {"C", 1}}, {{0, 2}}, 2);
  const auto groups = nodes_by_entity(g);
  REQUIRE(groups.size() == 2);
  REQUIRE(groups[0] == std::vector<std::uint32_t>{1});
  REQUIRE(groups[1] == std::vector<std::uint32_t>{0, 2});
}

// ---- synthetic generator ----

TEST_CASE("generator with one branch per entity yields roots only") {
  SynthConfig cfg;
  cfg.entity_count = 2;
  cfg.branches_min = 1;
  cfg.branches_max = 1;
  cfg.mention_count = 0;
  cfg.seed = 7;
  const SynthResult r = generate_synthetic_kg(cfg);
  REQUIRE(r.graph.size() == 2);
  REQUIRE(r.graph.edges.empty());
  REQUIRE(r.mentions.empty());
}

TEST_CASE("generator is deterministic per seed") {
  SynthConfig cfg;
  cfg.entity_count = 15;
  cfg.mention_count = 30;
  cfg.seed = 5;
  const SynthResult a = generate_synthetic_kg(cfg);
  const SynthResult b = generate_synthetic_kg(cfg);
  REQUIRE(a.graph == b.graph);
  REQUIRE(a.mentions == b.mentions);
  cfg.seed = 6;
  const SynthResult c = generate_synthetic_kg(cfg);
  REQUIRE_FALSE(a.graph == c.graph);
}

TEST_CASE("default-scale generator output is valid and in range") {
  SynthConfig cfg;  // 200 entities, branches 3..12, 400 mentions
  const SynthResult r = generate_synthetic_kg(cfg);
  validate(r.graph);
  REQUIRE(r.mentions.size() == 400);

  std::vector<int> sizes(cfg.entity_count, 0);
  for (const auto& n : r.graph.nodes) ++sizes[n.entity];
  for (int s : sizes) {
    REQUIRE(s >= 3);
    REQUIRE(s <= 12);
  }
  for (const auto& m : r.mentions) {
    REQUIRE_FALSE(m.name.empty());
    REQUIRE(m.entity < cfg.entity_count);
  }
}

TEST_CASE("generator fails when the vocabulary runs out") {
  SynthConfig cfg;
  cfg.entity_count = 100000;
  cfg.mention_count = 0;
  REQUIRE_THROWS_WITH(generate_synthetic_kg(cfg),
                      Catch::Matchers::ContainsSubstring("vocabulary too small"));
}

// ---- canonicalizer ----

TEST_CASE("canonicalize lowers, strips punctuation and legal suffixes") {
  REQUIRE(canonicalize("Glencore PLC") == "glencore");
  REQUIRE(canonicalize("glencore") == "glencore");
  REQUIRE(canonicalize("Acme, Inc.") == "acme");
  REQUIRE(canonicalize("Foo   Bar Ltd") == "foo bar");
  REQUIRE(canonicalize("PLC") == "");
  REQUIRE(canonicalize(canonicalize("Brumark & Co. GmbH")) ==
          canonicalize("Brumark & Co. GmbH"));
}

TEST_CASE("augment_canonical links canonical names to their sources") {
  const EntityGraph g = testgraphs::make_graph(
      {{"Glencore PLC", 0}, {"glencore zurich", 0}}, {{0, 1}}, 1);
  const EntityGraph out = augment_canonical(g);
  REQUIRE(out.size() == 3);
  REQUIRE(out.nodes[2].name == "glencore");
  REQUIRE(out.nodes[2].kind == NodeKind::canonical);
  REQUIRE(out.nodes[2].entity == 0);
  bool linked = false;
  for (const auto& [a, b] : out.edges) linked = linked || (a == 0 && b == 2);
  REQUIRE(linked);

  // Second application adds nothing.
  const EntityGraph again = augment_canonical(out);
  REQUIRE(again.size() == out.size());
  REQUIRE(again.edges == out.edges);
}

TEST_CASE("augment_canonical leaves already-canonical names alone") {
  const EntityGraph g = testgraphs::make_graph({{"glencore", 0}}, {}, 1);
  REQUIRE(augment_canonical(g).size() == 1);
}

TEST_CASE("augment_canonical doubles a graph of suffixed distinct names") {
  const EntityGraph g = testgraphs::make_graph(
      {{"Norvex AG", 0}, {"Brumark Ltd", 1}, {"Calvero PLC", 2}}, {}, 3);
  const EntityGraph out = augment_canonical(g);
  REQUIRE(out.size() == 6);
  REQUIRE(out.edges.size() == 3);
  for (const auto& [a, b] : out.edges) {
    REQUIRE(out.nodes[a].entity == out.nodes[b].entity);
  }
}

// ---- n-gram encoder ----

TEST_CASE("encoding AB hits exactly the two padded trigram buckets") {
  NgramEncoderConfig cfg;
  cfg.buckets = 8;
  const Eigen::VectorXf v = encode_ngram("AB", cfg);
  // Padded text "#ab#" has exactly the trigrams "#ab" and "ab#".
  int nonzero = 0;
  for (int i = 0; i < v.size(); ++i) nonzero += v[i] != 0.0f;
  REQUIRE(nonzero >= 1);
  REQUIRE(nonzero <= 2);
  REQUIRE(std::abs(v.norm() - 1.0f) < 1e-6f);

  const Eigen::VectorXf wide = encode_ngram("AB");
  int wide_nonzero = 0;
  for (int i = 0; i < wide.size(); ++i) wide_nonzero += wide[i] != 0.0f;
  REQUIRE(wide_nonzero == 2);
  REQUIRE(std::abs(wide.norm() - 1.0f) < 1e-6f);
}

TEST_CASE("identical names encode identically, case-insensitively") {
  REQUIRE(encode_ngram("Glencore PLC") == encode_ngram("Glencore PLC"));
  REQUIRE(encode_ngram("Glencore PLC") == encode_ngram("GLENCORE plc"));
  REQUIRE(encode_ngram("  Glencore PLC ") == encode_ngram("Glencore PLC"));
}

TEST_CASE("encoder golden vectors are stable") {
  const auto digest_of = [](const Eigen::VectorXf& v) {
    return digest_hex(fnv1a64(v.data(), sizeof(float) *
                                            static_cast<std::size_t>(v.size())));
  };
  REQUIRE(digest_of(encode_ngram("glencore")) == "61089719cc204b25");
  REQUIRE(digest_of(encode_ngram("Glencore PLC")) == "abad7fb8a1ef7c65");
  REQUIRE(digest_of(encode_ngram("a")) == "a30555f60fa437e8");
  NgramEncoderConfig alt;
  alt.hash_seed = 5;
  REQUIRE(digest_of(encode_ngram("glencore", alt)) == "b84773165275c805");
}

TEST_CASE("every non-empty name encodes to a unit vector") {
  const std::vector<std::string> names = {
      "a",  "ab", "Glencore PLC", "x y z",  "   pad   ",
      "Zürich Holding", "1234567890", "aaaaaaaaaaaaaaaaaaaaaaaaaa"};
  for (const auto& name : names) {
    const Eigen::VectorXf v = encode_ngram(name);
    REQUIRE(std::abs(v.norm() - 1.0f) < 1e-6f);
  }
  REQUIRE_THROWS_WITH(encode_ngram("   "),
                      Catch::Matchers::ContainsSubstring("empty name"));
}

TEST_CASE("a typo stays closer than unrelated names on average") {
  const Eigen::VectorXf base = encode_ngram("Glencore");
  const Eigen::VectorXf typo = encode_ngram("Glenocre");
  const double typo_cos = base.dot(typo);

  Rng rng(17);
  double sum = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::string name;
    const int len = 5 + static_cast<int>(rng.below(8));
    for (int c = 0; c < len; ++c) {
      name.push_back(static_cast<char>('a' + rng.below(26)));
    }
    sum += base.dot(encode_ngram(name));
  }
  REQUIRE(typo_cos > sum / 100.0);
}

TEST_CASE("encode_graph rows equal independent per-name encodings") {
  Rng rng(23);
  const EntityGraph g = testgraphs::random_entity_graph(rng, 10);
  const FeatureMatrix m = encode_graph(g);
  REQUIRE(m.rows() == static_cast<Eigen::Index>(g.size()));
  REQUIRE(m.cols() == 256);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Eigen::VectorXf row = encode_ngram(g.nodes[i].name);
    REQUIRE(m.row(static_cast<Eigen::Index>(i)).transpose() == row);
  }
}

TEST_CASE("equal names produce equal feature rows") {
  const EntityGraph g = testgraphs::make_graph(
      {{"Same Name", 0}, {"Same Name", 1}}, {}, 2);
  const FeatureMatrix m = encode_graph(g);
  REQUIRE(m.row(0) == m.row(1));
}

TEST_CASE("encoder config validation") {
  NgramEncoderConfig cfg;
  cfg.buckets = 3;
  REQUIRE_THROWS_WITH(encode_ngram("abc", cfg),
                      Catch::Matchers::ContainsSubstring("power of two"));
  cfg.buckets = 256;
  cfg.n = 0;
  REQUIRE_THROWS_WITH(encode_ngram("abc", cfg),
                      Catch::Matchers::ContainsSubstring("n-gram length"));
}

TEST_CASE("encoder config survives a json round trip") {
  NgramEncoderConfig cfg;
  cfg.n = 2;
  cfg.buckets = 64;
  cfg.pad = '_';
  cfg.hash_seed = 99;
  cfg.signed_hash = false;
  const json j = cfg;
  REQUIRE(j.at("pad").get<std::string>() == "_");
  REQUIRE(j.get<NgramEncoderConfig>() == cfg);
}

// ---- feature files ----

TEST_CASE("feature file round-trip is bit exact") {
  TempDir tmp;
  FeatureMatrix m(3, 4);
  Rng rng(31);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      m(r, c) = static_cast<float>(2.0 * rng.unit() - 1.0);
    }
  }
  save_feature_file(m, tmp.file("m.bin"));
  const FeatureMatrix back = load_feature_file(tmp.file("m.bin"));
  REQUIRE(back.rows() == 3);
  REQUIRE(back.cols() == 4);
  REQUIRE(std::memcmp(m.data(), back.data(), sizeof(float) * 12) == 0);
}

TEST_CASE("feature file errors: magic, truncation, non-finite") {
  TempDir tmp;
  write_text(tmp.file("bad.bin"), "NOPE\x01\x00\x00\x00\x01\x00\x00\x00");
  REQUIRE_THROWS_WITH(load_feature_file(tmp.file("bad.bin")),
                      Catch::Matchers::ContainsSubstring("bad magic"));

  FeatureMatrix m = FeatureMatrix::Zero(2, 3);
  save_feature_file(m, tmp.file("ok.bin"));
  const std::string full = read_bytes(tmp.file("ok.bin"));
  write_text(tmp.file("cut.bin"), full.substr(0, full.size() - 5));
  REQUIRE_THROWS_WITH(load_feature_file(tmp.file("cut.bin")),
                      Catch::Matchers::ContainsSubstring("truncated payload"));

  m(1, 2) = std::numeric_limits<float>::infinity();
  std::ofstream sink(tmp.file("inf.bin"), std::ios::binary);
  REQUIRE_THROWS_WITH(write_fmx1(sink, m),
                      Catch::Matchers::ContainsSubstring("non-finite value at row 1 col 2"));
}

TEST_CASE("hand-built feature file parses in row-major order") {
  TempDir tmp;
  std::ofstream out(tmp.file("hand.bin"), std::ios::binary);
  out.write("FMX1", 4);
  write_u32le(out, 2);
  write_u32le(out, 3);
  for (float v : {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f}) write_f32le(out, v);
  out.close();
  const FeatureMatrix m = load_feature_file(tmp.file("hand.bin"));
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 3);
  REQUIRE(m(0, 0) == 1.0f);
  REQUIRE(m(0, 2) == 3.0f);
  REQUIRE(m(1, 0) == 4.0f);
  REQUIRE(m(1, 2) == 6.0f);
}

TEST_CASE("fmx8 round-trip preserves doubles exactly") {
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  Eigen::MatrixXd m(2, 2);
  m << 1.0 / 3.0, -2.5, 3.141592653589793, 1e-300;
  write_fmx8(ss, m);
  const Eigen::MatrixXd back = read_fmx8(ss, "t");
  REQUIRE(back == m);
}
