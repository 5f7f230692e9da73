// kgmatch command-line tool: synthetic data, training, indexing, matching,
// benchmarking, and the HTTP service.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgmatch/kgmatch.hpp"
#include "kgmatch/service.hpp"

namespace fs = std::filesystem;

namespace {

using namespace kgmatch;

void add_encoder_flags(CLI::App* cmd, NgramEncoderConfig& enc) {
  cmd->add_option("--ngram", enc.n, "character n-gram length")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--buckets", enc.buckets, "feature buckets (power of two)")
      ->capture_default_str();
  cmd->add_option("--hash-seed", enc.hash_seed, "hash seed")
      ->capture_default_str();
  cmd->add_flag("--signed-hash,!--unsigned-hash", enc.signed_hash,
                "signed bucket contributions")
      ->capture_default_str();
}

void add_synth_flags(CLI::App* cmd, SynthConfig& syn) {
  cmd->add_option("--entities", syn.entity_count, "number of entities")
      ->check(CLI::Range(2u, 10000000u))
      ->capture_default_str();
  cmd->add_option("--branches-min", syn.branches_min,
                  "minimum nodes per entity")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--branches-max", syn.branches_max,
                  "maximum nodes per entity")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--mentions", syn.mention_count, "held-out mention count")
      ->capture_default_str();
}

void add_train_flags(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--dims", cfg.dims, "layer widths after the input layer")
      ->capture_default_str();
  cmd->add_option("--margin", cfg.margin, "contrastive margin")
      ->capture_default_str();
  cmd->add_option("--lr", cfg.learning_rate, "learning rate")
      ->capture_default_str();
  cmd->add_option("--momentum", cfg.momentum, "momentum in [0,1)")
      ->capture_default_str();
  cmd->add_option("--epochs", cfg.epochs, "training epochs")
      ->capture_default_str();
  cmd->add_option("--batch-pairs", cfg.batch_pairs,
                  "pairs per batch (0 = one batch per epoch)")
      ->capture_default_str();
  cmd->add_option("--pairs-per-node", cfg.pairs_per_node,
                  "pair rounds per anchor per epoch")
      ->capture_default_str();
  cmd->add_option("--subspaces", cfg.buckets,
                  "hard-negative subspace bucket count")
      ->capture_default_str();
  cmd->add_option("--refresh", cfg.refresh_period,
                  "epochs between subspace refreshes")
      ->capture_default_str();
}

FeatureMatrix features_for(const EntityGraph& g, const std::string& path,
                           const NgramEncoderConfig& enc) {
  if (path.empty()) return encode_graph(g, enc);
  FeatureMatrix x = load_feature_file(path);
  if (x.rows() != static_cast<Eigen::Index>(g.nodes.size())) {
    fail("feature rows do not match graph size");
  }
  if (static_cast<std::uint32_t>(x.cols()) != enc.buckets) {
    fail("feature width does not match encoder buckets");
  }
  return x;
}

std::vector<int> dense_ids(std::size_t n) {
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i);
  return ids;
}

void render_eval_table(const json& report, std::ostream& out) {
  const json& algos = report.at("data").at("algorithms");
  const json& ref = report.at("data").at("published_reference");
  char line[128];
  out << "algorithm     plain  augmented   (reference plain/augmented)\n";
  for (const char* name : {"nn", "gcn_softmax", "sgcn"}) {
    const json& a = algos.at(name);
    std::snprintf(line, sizeof line, "%-12s  %.3f      %.3f   (%.2f / %.2f)\n",
                  name, a.at("mean_plain").get<double>(),
                  a.at("mean_augmented").get<double>(),
                  ref.at(name).at(0).get<double>(),
                  ref.at(name).at(1).get<double>());
    out << line;
  }
  std::snprintf(line, sizeof line,
                "%-12s      -          -   (%.2f / %.2f, out of scope)\n",
                "rls", ref.at("rls").at(0).get<double>(),
                ref.at("rls").at(1).get<double>());
  out << line;
}

json match_to_json(const std::string& name, const MatchResult& r) {
  json matches = json::array();
  for (const MatchEntry& e : r.entries) {
    matches.push_back(json{{"entity", e.entity},
                           {"node", e.best_node},
                           {"name", e.node_name},
                           {"distance", round6(e.distance)},
                           {"votes", e.votes}});
  }
  return json{{"query", name},
              {"k", r.k},
              {"rule", to_string(r.rule)},
              {"matches", matches}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entity matching over business knowledge graphs"};
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a synthetic knowledge graph");
  SynthConfig syn;
  std::string gen_out;
  add_synth_flags(gen, syn);
  gen->add_option("--seed", syn.seed, "generation seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->callback([&] {
    fs::create_directories(gen_out);
    const SynthResult r = generate_synthetic_kg(syn);
    save_graph(r.graph, gen_out + "/nodes.jsonl", gen_out + "/edges.jsonl");
    save_mentions(r.mentions, gen_out + "/mentions.jsonl");
    std::cout << "nodes=" << r.graph.nodes.size()
              << " edges=" << r.graph.edges.size()
              << " mentions=" << r.mentions.size() << '\n';
  });

  // ---- augment ----
  auto* aug = app.add_subcommand(
      "augment", "add canonicalized name nodes to a knowledge graph");
  std::string aug_nodes, aug_edges, aug_out;
  aug->add_option("--nodes", aug_nodes, "nodes JSONL")->required();
  aug->add_option("--edges", aug_edges, "edges JSONL")->required();
  aug->add_option("--out", aug_out, "output directory")->required();
  aug->callback([&] {
    const EntityGraph g = load_graph(aug_nodes, aug_edges);
    const EntityGraph a = augment_canonical(g);
    fs::create_directories(aug_out);
    save_graph(a, aug_out + "/nodes.jsonl", aug_out + "/edges.jsonl");
    std::cout << "added=" << (a.nodes.size() - g.nodes.size())
              << " nodes=" << a.nodes.size() << '\n';
  });

  // ---- featurize ----
  auto* feat = app.add_subcommand(
      "featurize", "encode node names into a binary feature file");
  NgramEncoderConfig feat_enc;
  std::string feat_nodes, feat_out, feat_enc_out;
  feat->add_option("--nodes", feat_nodes, "nodes JSONL")->required();
  feat->add_option("--out", feat_out, "feature file")->required();
  feat->add_option("--encoder-out", feat_enc_out, "encoder config JSON");
  add_encoder_flags(feat, feat_enc);
  feat->callback([&] {
    const auto nodes = load_nodes(feat_nodes);
    if (nodes.empty()) fail("no nodes to encode");
    validate(feat_enc);
    FeatureMatrix m(static_cast<Eigen::Index>(nodes.size()),
                    static_cast<Eigen::Index>(feat_enc.buckets));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      m.row(static_cast<Eigen::Index>(i)) =
          encode_ngram(nodes[i].name, feat_enc);
    }
    save_feature_file(m, feat_out);
    if (!feat_enc_out.empty()) {
      std::ofstream enc_out(feat_enc_out, std::ios::binary);
      if (!enc_out) fail("cannot write " + feat_enc_out);
      enc_out << json(feat_enc).dump(2) << '\n';
    }
    std::cout << "rows=" << m.rows() << " cols=" << m.cols() << '\n';
  });

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train the siamese GCN");
  TrainConfig tcfg;
  NgramEncoderConfig train_enc;
  std::string train_nodes, train_edges, train_features, train_out, train_metrics;
  train_cmd->add_option("--nodes", train_nodes, "nodes JSONL")->required();
  train_cmd->add_option("--edges", train_edges, "edges JSONL")->required();
  train_cmd->add_option("--features", train_features,
                        "feature file (default: built-in encoder)");
  train_cmd->add_option("--out", train_out, "model file")->required();
  train_cmd->add_option("--metrics", train_metrics, "epoch metrics JSONL");
  train_cmd->add_option("--seed", tcfg.seed, "training seed")
      ->capture_default_str();
  add_train_flags(train_cmd, tcfg);
  add_encoder_flags(train_cmd, train_enc);
  train_cmd->callback([&] {
    const EntityGraph g = load_graph(train_nodes, train_edges);
    const FeatureMatrix x = features_for(g, train_features, train_enc);
    const TrainResult r =
        train(g, normalized_adjacency(g), x, tcfg, train_enc);
    save_model(r.params, train_out);
    if (!train_metrics.empty()) save_metrics(r.history, train_metrics);
    if (!r.history.empty()) {
      std::cout << "epochs=" << r.history.size()
                << " first_loss=" << r.history.front().mean_loss
                << " last_loss=" << r.history.back().mean_loss << '\n';
    }
  });

  // ---- embed ----
  auto* embed_cmd =
      app.add_subcommand("embed", "write node embeddings for a trained model");
  std::string emb_model, emb_nodes, emb_edges, emb_features, emb_out;
  embed_cmd->add_option("--model", emb_model, "model file")->required();
  embed_cmd->add_option("--nodes", emb_nodes, "nodes JSONL")->required();
  embed_cmd->add_option("--edges", emb_edges, "edges JSONL")->required();
  embed_cmd->add_option("--features", emb_features,
                        "feature file (default: model's encoder)");
  embed_cmd->add_option("--out", emb_out, "embedding file")->required();
  embed_cmd->callback([&] {
    const ModelParams params = load_model(emb_model);
    const EntityGraph g = load_graph(emb_nodes, emb_edges);
    const FeatureMatrix x = features_for(g, emb_features, params.encoder);
    const Eigen::MatrixXd z =
        gcn_forward(x.cast<double>(), normalized_adjacency(g), params);
    save_feature_file(z.cast<float>(), emb_out);
    std::cout << "rows=" << z.rows() << " dim=" << z.cols() << '\n';
  });

  // ---- index ----
  auto* index_cmd = app.add_subcommand(
      "index", "embed a graph and write a complete matcher bundle");
  AnnParams annp;
  std::string idx_model, idx_nodes, idx_edges, idx_features, idx_out;
  std::string idx_mode = "exact";
  index_cmd->add_option("--model", idx_model, "model file")->required();
  index_cmd->add_option("--nodes", idx_nodes, "nodes JSONL")->required();
  index_cmd->add_option("--edges", idx_edges, "edges JSONL")->required();
  index_cmd->add_option("--features", idx_features,
                        "feature file (default: model's encoder)");
  index_cmd->add_option("--mode", idx_mode, "exact or approximate")
      ->check(CLI::IsMember({"exact", "approximate"}))
      ->capture_default_str();
  index_cmd->add_option("--max-neighbors", annp.max_neighbors,
                        "graph degree cap per layer")
      ->capture_default_str();
  index_cmd->add_option("--build-beam", annp.build_beam, "build beam width")
      ->capture_default_str();
  index_cmd->add_option("--query-beam", annp.query_beam,
                        "default query beam width")
      ->capture_default_str();
  index_cmd->add_option("--seed", annp.seed, "index build seed")
      ->capture_default_str();
  index_cmd->add_option("--out", idx_out, "bundle directory")->required();
  index_cmd->callback([&] {
    const ModelParams params = load_model(idx_model);
    const EntityGraph g = load_graph(idx_nodes, idx_edges);
    const FeatureMatrix x = features_for(g, idx_features, params.encoder);
    const Eigen::MatrixXd z =
        gcn_forward(x.cast<double>(), normalized_adjacency(g), params);
    const KnnIndex idx = KnnIndex::build(z, dense_ids(g.nodes.size()),
                                         index_mode_from(idx_mode), annp);
    const MatcherBundle bundle = make_bundle(params, idx, g.nodes);
    fs::create_directories(idx_out);
    save_bundle(bundle, idx_out);
    std::cout << "bundle=" << idx_out << " size=" << idx.size()
              << " mode=" << idx_mode << '\n';
  });

  // ---- match ----
  auto* match_cmd =
      app.add_subcommand("match", "resolve mention names against a bundle");
  std::string m_bundle, m_names_file, m_rule = "vote";
  std::vector<std::string> m_names;
  int m_k = 10;
  match_cmd->add_option("--bundle", m_bundle, "bundle directory")->required();
  match_cmd->add_option("--name", m_names, "mention name (repeatable)");
  match_cmd->add_option("--names-file", m_names_file,
                        "file with one mention name per line");
  match_cmd->add_option("--k", m_k, "neighbors to retrieve")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  match_cmd->add_option("--rule", m_rule, "resolution rule")
      ->check(CLI::IsMember({"top1", "vote"}))
      ->capture_default_str();
  match_cmd->callback([&] {
    if (!m_names_file.empty()) {
      std::ifstream in(m_names_file);
      if (!in) fail("cannot open " + m_names_file);
      std::string line;
      while (std::getline(in, line)) {
        if (!trim_copy(line).empty()) m_names.push_back(trim_copy(line));
      }
    }
    if (m_names.empty()) fail("no mention names given");
    const MatcherBundle bundle = load_bundle(m_bundle);
    const auto results =
        batch_match(bundle, m_names, m_k, resolution_rule_from(m_rule));
    for (std::size_t i = 0; i < results.size(); ++i) {
      std::cout << match_to_json(m_names[i], results[i]).dump() << '\n';
    }
  });

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand(
      "eval", "multi-seed benchmark of S-GCN against the classifier baselines");
  eval_cmd->set_config("--config", "", "read options from an INI file");
  SynthConfig eval_syn;
  // Benchmark defaults differ from the production training defaults: every
  // algorithm is trained to convergence (momentum, long schedule), the metric
  // model is a single conv layer, and the vote window stays within the
  // smallest entity (3 branches), which a k of 10 would overshoot.
  TrainConfig eval_sgcn;
  eval_sgcn.dims = {64};
  eval_sgcn.learning_rate = 0.05;
  eval_sgcn.momentum = 0.9;
  eval_sgcn.epochs = 200;
  eval_sgcn.pairs_per_node = 2;
  ClassifierConfig eval_nn, eval_gcn;
  eval_nn.momentum = eval_gcn.momentum = 0.9;
  eval_nn.epochs = eval_gcn.epochs = 200;
  NgramEncoderConfig eval_enc;
  std::string eval_out, eval_rule = "vote";
  std::uint64_t eval_seed = 1;
  int eval_seed_count = 5;
  int eval_k = 3;
  add_synth_flags(eval_cmd, eval_syn);
  add_train_flags(eval_cmd, eval_sgcn);
  add_encoder_flags(eval_cmd, eval_enc);
  eval_cmd->add_option("--seed", eval_seed, "first benchmark seed")
      ->capture_default_str();
  eval_cmd->add_option("--seeds", eval_seed_count, "number of seeds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval_cmd->add_option("--nn-hidden", eval_nn.hidden, "NN hidden widths")
      ->capture_default_str();
  eval_cmd->add_option("--nn-lr", eval_nn.learning_rate, "NN learning rate")
      ->capture_default_str();
  eval_cmd->add_option("--nn-momentum", eval_nn.momentum, "NN momentum")
      ->capture_default_str();
  eval_cmd->add_option("--nn-epochs", eval_nn.epochs, "NN epochs")
      ->capture_default_str();
  eval_cmd->add_option("--gcn-hidden", eval_gcn.hidden,
                       "GCN-softmax hidden widths")
      ->capture_default_str();
  eval_cmd->add_option("--gcn-lr", eval_gcn.learning_rate,
                       "GCN-softmax learning rate")
      ->capture_default_str();
  eval_cmd->add_option("--gcn-momentum", eval_gcn.momentum,
                       "GCN-softmax momentum")
      ->capture_default_str();
  eval_cmd->add_option("--gcn-epochs", eval_gcn.epochs, "GCN-softmax epochs")
      ->capture_default_str();
  eval_cmd->add_option("--k", eval_k, "neighbors for S-GCN resolution")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval_cmd->add_option("--rule", eval_rule, "S-GCN resolution rule")
      ->check(CLI::IsMember({"top1", "vote"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "report file")->required();
  eval_cmd->callback([&] {
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < eval_seed_count; ++i) {
      seeds.push_back(eval_seed + static_cast<std::uint64_t>(i));
    }
    const EvalReport report = run_comparison(
        eval_syn, eval_sgcn, eval_nn, eval_gcn, seeds, eval_enc, eval_k,
        resolution_rule_from(eval_rule));
    const json j = report_to_json(report);
    std::ofstream out(eval_out, std::ios::binary);
    if (!out) fail("cannot write " + eval_out);
    out << j.dump(2) << '\n';
    render_eval_table(j, std::cout);
  });

  // ---- perturb ----
  auto* pert_cmd = app.add_subcommand(
      "perturb", "measure robustness to character edits of known names");
  std::string p_bundle, p_out, p_rule = "vote";
  int p_names = 200, p_count = 1, p_k = 10;
  std::uint64_t p_seed = 1;
  pert_cmd->add_option("--bundle", p_bundle, "bundle directory")->required();
  pert_cmd->add_option("--names", p_names, "how many stored names to probe")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  pert_cmd->add_option("--count", p_count, "edits per name")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  pert_cmd->add_option("--seed", p_seed, "perturbation seed")
      ->capture_default_str();
  pert_cmd->add_option("--k", p_k, "neighbors to retrieve")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  pert_cmd->add_option("--rule", p_rule, "resolution rule")
      ->check(CLI::IsMember({"top1", "vote"}))
      ->capture_default_str();
  pert_cmd->add_option("--out", p_out, "report file");
  pert_cmd->callback([&] {
    const MatcherBundle bundle = load_bundle(p_bundle);
    std::vector<std::pair<std::string, int>> probes;
    {
      std::vector<const NodeRecord*> nodes;
      for (const auto& [id, n] : bundle.node_table) {
        if (trim_copy(n.name).size() >= 2) nodes.push_back(&n);
      }
      std::sort(nodes.begin(), nodes.end(),
                [](const NodeRecord* a, const NodeRecord* b) {
                  return a->id < b->id;
                });
      Rng rng(mix_seed(p_seed, 9));
      rng.shuffle(nodes);
      const std::size_t take =
          std::min<std::size_t>(nodes.size(), static_cast<std::size_t>(p_names));
      for (std::size_t i = 0; i < take; ++i) {
        probes.emplace_back(nodes[i]->name, static_cast<int>(nodes[i]->entity));
      }
    }
    const PerturbReport rep = run_perturbation(
        bundle, probes, p_count, p_seed, p_k, resolution_rule_from(p_rule));
    if (!p_out.empty()) {
      std::ofstream out(p_out, std::ios::binary);
      if (!out) fail("cannot write " + p_out);
      out << report_to_json(rep).dump(2) << '\n';
    }
    std::cout << "clean=" << rep.clean_accuracy;
    for (const auto& [kind, acc] : rep.per_kind) {
      std::cout << ' ' << kind << '=' << acc;
    }
    std::cout << '\n';
  });

  // ---- serve ----
  auto* serve_cmd =
      app.add_subcommand("serve", "run the HTTP match service over a bundle");
  std::string s_bundle, s_bind = "127.0.0.1:8080";
  serve_cmd->add_option("--bundle", s_bundle, "bundle directory")
      ->envname("BUNDLE_DIR")
      ->required();
  serve_cmd->add_option("--bind", s_bind, "host:port (port 0 = pick a port)")
      ->envname("BIND_ADDR")
      ->capture_default_str();
  serve_cmd->callback([&] {
    const auto colon = s_bind.rfind(':');
    if (colon == std::string::npos) fail("bind address must be host:port");
    const std::string host = s_bind.substr(0, colon);
    int port = 0;
    try {
      port = std::stoi(s_bind.substr(colon + 1));
    } catch (const std::exception&) {
      fail("bind address must be host:port");
    }
    MatchService svc = load_service(s_bundle);
    if (port == 0) {
      port = svc.http().bind_to_any_port(host);
      if (port < 0) fail("cannot bind " + host);
      std::cout << "listening on " << host << ':' << port << std::endl;
      if (!svc.http().listen_after_bind()) fail("service stopped with error");
    } else {
      std::cout << "listening on " << host << ':' << port << std::endl;
      if (!svc.run(host, port)) fail("cannot bind " + s_bind);
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
