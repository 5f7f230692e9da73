#pragma once
// HTTP match service over an immutable bundle.
//
//   GET /health            -> {"status":"ok"}
//   GET /match?q=..&k=..&rule=..
//                          -> query echo, ranked matches, artifact digests,
//                             elapsed microseconds
//
// The bundle never changes after startup; requests share it concurrently.

#include <chrono>
#include <cmath>
#include <string>
#include <utility>

// The library default backlog of 5 drops connections under request bursts;
// the service is expected to absorb ~100 concurrent clients.
#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#endif

#include <httplib.h>

#include "kgmatch/io.hpp"
#include "kgmatch/matcher.hpp"

namespace kgmatch {

// Distances are reported at fixed 1e-6 resolution so response bodies are
// stable golden-test material.
inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

inline json match_response(const MatcherBundle& bundle, const std::string& q,
                           int k, ResolutionRule rule, const json& digests,
                           long long elapsed_us) {
  const MatchResult result = match_mention(bundle, q, k, rule);
  json matches = json::array();
  for (const MatchEntry& e : result.entries) {
    matches.push_back(json{{"entity", e.entity},
                           {"node", e.best_node},
                           {"name", e.node_name},
                           {"distance", round6(e.distance)},
                           {"votes", e.votes}});
  }
  return json{{"query", q},
              {"k", result.k},
              {"rule", to_string(result.rule)},
              {"matches", matches},
              {"digests", digests},
              {"elapsed_us", elapsed_us}};
}

class MatchService {
 public:
  MatchService(MatcherBundle bundle, json digests)
      : bundle_(std::move(bundle)), digests_(std::move(digests)) {
    if (bundle_.index.size() == 0) fail("empty bundle");
    install_routes();
  }

  // Routes capture `this`; the object must stay put.
  MatchService(const MatchService&) = delete;
  MatchService& operator=(const MatchService&) = delete;

  httplib::Server& http() { return server_; }

  // Blocking; returns when the server stops.
  bool run(const std::string& host, int port) {
    return server_.listen(host, port);
  }

 private:
  void install_routes() {
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"status", "ok"}}.dump(), "application/json");
    });
    server_.Get("/match", [this](const httplib::Request& req,
                                 httplib::Response& res) {
      if (!req.has_param("q") || trim_copy(req.get_param_value("q")).empty()) {
        res.status = 400;
        res.set_content(json{{"error", "missing query"}}.dump(),
                        "application/json");
        return;
      }
      try {
        const std::string q = req.get_param_value("q");
        int k = 10;
        if (req.has_param("k")) {
          std::size_t used = 0;
          k = std::stoi(req.get_param_value("k"), &used);
          if (used != req.get_param_value("k").size() || k < 1) {
            fail("invalid k");
          }
        }
        ResolutionRule rule = ResolutionRule::vote;
        if (req.has_param("rule")) {
          rule = resolution_rule_from(req.get_param_value("rule"));
        }
        const auto t0 = std::chrono::steady_clock::now();
        json body = match_response(bundle_, q, k, rule, digests_, 0);
        body["elapsed_us"] =
            std::chrono::duration_cast<std::chrono::microseconds>(
                std::chrono::steady_clock::now() - t0)
                .count();
        res.set_content(body.dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      }
    });
  }

  MatcherBundle bundle_;
  json digests_;
  httplib::Server server_;
};

// Loads a bundle directory (manifest-checked) and prepares the service.
inline MatchService load_service(const std::string& dir) {
  MatcherBundle bundle = load_bundle(dir);
  json digests{{"model", file_digest(dir + "/model.bin")},
               {"index", file_digest(dir + "/index.bin")}};
  return MatchService(std::move(bundle), std::move(digests));
}

}  // namespace kgmatch
