/*
 *  Copyright 2026 The OBGE Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#include <signal.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "obge/obge.hpp"

namespace fs = std::filesystem;
using namespace obge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitProtocol = 2;
constexpr int kExitCapacity = 3;

constexpr const char* kKeysFile = "keys.bin";
constexpr const char* kTreeFile = "tree.bin";
constexpr const char* kControllerFile = "controller.bin";
constexpr const char* kClientFile = "client.bin";
constexpr const char* kConfigFile = "server.conf";

Graph read_graph(const fs::path& path, bool undirected) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph " + path.string());
  return load_graph(in, !undirected);
}

std::string format_path(const std::optional<PlainPath>& p) {
  if (!p) return "no path";
  std::ostringstream os;
  for (std::size_t i = 0; i < p->size(); ++i) os << (i ? " " : "") << (*p)[i];
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path, ByteSpan(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---------------------------------------------------------------------------

struct SetupArgs {
  std::string graph;
  std::string mode = "trivial";
  std::uint32_t z = 5;
  std::string pad = "none";
  std::string out;
  bool undirected = false;
  unsigned lambda = 128;
  std::size_t budget = 128u << 20;
  std::size_t stash_max = 128;
  std::string listen = "127.0.0.1:7878";
  std::optional<std::uint64_t> seed;
};

int run_setup(const SetupArgs& a) {
  auto g = read_graph(a.graph, a.undirected);
  SetupOptions o;
  o.lambda = a.lambda;
  o.bucket_size = a.z;
  o.pad = parse_pad(a.pad);
  o.mode = parse_mode(a.mode);
  o.stash_max = a.stash_max;
  o.budget_bytes = a.budget;
  auto rng = a.seed ? Drbg(*a.seed) : Drbg::from_os();

  const fs::path dir(a.out);
  fs::create_directories(dir);
  TreeStore store;
  auto res = setup(g, o, store, rng);
  save_trees(store, dir / kTreeFile);
  write_file_atomic(dir / kKeysFile, res.client.serialize());

  ServerConfig cfg;
  cfg.mode = o.mode;
  cfg.tree_path = kTreeFile;
  cfg.listen_addr = a.listen;
  cfg.budget_bytes = a.budget;
  cfg.bucket_size = a.z;
  cfg.stash_max = a.stash_max;
  if (res.trivial) {
    write_file_atomic(dir / kClientFile, res.trivial->serialize_state());
  } else {
    cfg.controller_path = kControllerFile;
    write_file_atomic(dir / kControllerFile, res.controller->serialize_state());
  }
  write_text(dir / kConfigFile, cfg.to_text());

  std::cout << "vertices " << g.vertex_count() << ", spdx entries " << res.spdx_size
            << ", tree depth " << res.data_params.depth << ", " << to_string(o.mode) << " mode";
  if (res.controller) {
    std::cout << ", position levels " << res.controller->oram().positions().depth();
  }
  std::cout << "\nwrote " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run_serve(const std::string& config_path) {
  auto cfg = ServerConfig::load(config_path);
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGTERM);
  sigaddset(&sigs, SIGINT);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

  StorageServer server;
  load_server_state(server, cfg);
  {
    Daemon daemon(server, cfg.listen_addr);
    auto host = cfg.listen_addr.substr(0, cfg.listen_addr.rfind(':'));
    std::cout << "listening on " << host << ":" << daemon.port() << std::endl;
    int sig = 0;
    sigwait(&sigs, &sig);
    daemon.stop();
  }
  save_server_state(server, cfg);
  std::cout << "state saved" << std::endl;
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct QueryArgs {
  Vertex u = 0, v = 0;
  std::string keys;
  std::string connect;
  std::string state;
};

int run_query(const QueryArgs& a) {
  const fs::path keys_path(a.keys);
  const auto dir = keys_path.parent_path();
  auto keys = ClientKeys::parse(read_file(keys_path));
  if (a.u >= keys.vertex_count || a.v >= keys.vertex_count) {
    throw RangeError("vertex out of range [0, " + std::to_string(keys.vertex_count) + ")");
  }
  const fs::path state_path = a.state.empty() ? dir / kClientFile : fs::path(a.state);
  auto rng = Drbg::from_os();

  auto trivial_query = [&](PathStorage& storage) {
    auto client = TrivialClient::restore(keys, read_file(state_path), storage, rng.fork());
    auto resp = client.query(a.u, a.v);
    write_file_atomic(state_path, client.serialize_state());
    return resp;
  };

  EncryptedPath resp;
  if (!a.connect.empty()) {
    TcpTransport t(a.connect);
    if (keys.mode == Mode::enhanced) {
      resp = SessionQueryClient(keys, t, rng.fork()).query(a.u, a.v);
    } else {
      RemoteStorage rs(t);
      resp = trivial_query(rs);
    }
  } else {
    // No daemon: run the server side in this process from the setup directory.
    auto cfg = ServerConfig::load(dir / kConfigFile);
    StorageServer server;
    load_server_state(server, cfg);
    LoopbackTransport link([&](ByteSpan f) { return server.handle_frame(f); });
    if (keys.mode == Mode::enhanced) {
      resp = SessionQueryClient(keys, link, rng.fork()).query(a.u, a.v);
    } else {
      RemoteStorage rs(link);
      resp = trivial_query(rs);
    }
    save_server_state(server, cfg);
  }
  std::cout << format_path(reveal(resp, a.u, a.v, keys.keys.k1)) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string lengths = "1..10";
  std::size_t reps = 50;
  std::string mode = "enhanced";
  std::uint32_t z = 5;
  std::string pad = "full";
  std::size_t vertices = 64;
  std::size_t budget_fraction = 16;
  std::string out;
  std::uint64_t seed = 7;
};

int run_bench_cmd(const BenchArgs& a) {
  BenchOptions o;
  o.lengths = parse_lengths(a.lengths);
  o.reps = a.reps;
  o.vertices = a.vertices;
  o.seed = a.seed;
  o.setup.mode = parse_mode(a.mode);
  o.setup.bucket_size = a.z;
  o.setup.pad = parse_pad(a.pad);
  std::size_t n = o.vertices;
  for (auto l : o.lengths) n = std::max(n, l + 1);
  if (a.budget_fraction == 0) throw ConfigError("--budget-fraction must be >= 1");
  o.setup.budget_bytes = std::max<std::size_t>(flat_position_map_bytes(n) / a.budget_fraction, 8);
  auto rows = run_bench(o);
  auto csv = bench_csv(rows);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_text(a.out, csv);
  }
  auto s = summarize_bench(rows);
  std::cerr << "path_len mean_micros\n";
  for (const auto& [l, m] : s.mean) std::cerr << l << " " << m << "\n";
  std::cerr << "strictly increasing: " << (s.strictly_increasing ? "yes" : "no") << ", slope "
            << s.fit.slope << " us/hop, one-sided p " << s.fit.p_positive << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AuditArgs {
  std::string trace;
  std::string truth;
  std::string graph;
  bool undirected = false;
  std::string csv;
  std::size_t min_reps = 30;
  std::uint64_t seed = 1;
};

int run_audit(const AuditArgs& a) {
  auto trace = AccessTrace::load(a.trace);
  auto truth = load_truth_csv(a.truth);
  std::optional<Graph> g;
  if (!a.graph.empty()) g = read_graph(a.graph, a.undirected);
  AuditOptions opt;
  opt.min_reps = a.min_reps;
  opt.seed = a.seed;
  auto rep = audit_trace(trace, truth, g ? &*g : nullptr, opt);
  std::cout << rep.summary();
  if (!a.csv.empty()) write_text(a.csv, rep.to_csv());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AttackArgs {
  std::string graph;
  std::string trace;
  std::string truth;
  bool undirected = false;
  std::optional<std::size_t> simulate;
  std::uint64_t seed = 1;
  std::string csv;
};

bool looks_like_access_trace(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    return line.rfind("# tree", 0) == 0 || line.rfind("seq,", 0) == 0;
  }
  return false;
}

int run_attack(const AttackArgs& a) {
  auto g = read_graph(a.graph, a.undirected);
  const auto n = static_cast<Vertex>(g.vertex_count());
  fs::path truth_path = a.truth;
  if (a.simulate) {
    // Produce a baseline-scheme token log of random queries.
    if (n == 0) throw ValidationError("cannot simulate queries on an empty graph");
    Drbg rng(a.seed);
    GktScheme scheme(g, rng);
    std::vector<TruthQuery> truth;
    auto m = compute_sp_matrix(g);
    for (std::size_t i = 0; i < *a.simulate; ++i) {
      auto u = static_cast<Vertex>(rng.uniform(n)), v = static_cast<Vertex>(rng.uniform(n));
      scheme.query(u, v);
      auto p = m.path(u, v);
      truth.push_back({u, v, p ? std::optional<std::size_t>(p->empty() ? 0 : p->size() - 1) : std::nullopt});
    }
    write_text(a.trace, format_token_log(scheme.log()));
    if (truth_path.empty()) truth_path = a.trace + ".truth.csv";
    write_text(truth_path, format_truth_csv(truth));
    std::cout << "simulated " << *a.simulate << " queries into " << a.trace << "\n";
  }

  std::optional<std::vector<TruthQuery>> truth;
  if (!truth_path.empty()) truth = load_truth_csv(truth_path);

  if (looks_like_access_trace(a.trace)) {
    if (!truth) throw ConfigError("an access trace needs --truth to score the attack");
    auto rep = audit_trace(AccessTrace::load(a.trace), *truth, &g, AuditOptions{0.01, 30, a.seed});
    std::cout << "length-only attack on " << rep.attack->queries << " queries: accuracy "
              << rep.attack->accuracy << ", uniform-guess baseline " << rep.attack->baseline << "\n";
    return kExitOk;
  }

  auto observed = load_token_log(a.trace);
  QueryRecovery qr(g);
  auto cands = qr.recover(observed);
  if (truth && truth->size() != observed.size()) {
    throw ValidationError("truth has " + std::to_string(truth->size()) + " rows, log has " +
                          std::to_string(observed.size()));
  }
  Drbg rng(a.seed);
  std::ostringstream csv;
  csv << "query,candidates" << (truth ? ",sound,correct" : "") << "\n";
  double total = 0;
  std::size_t sound = 0, correct = 0, unique = 0, unique_correct = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    total += static_cast<double>(cands[i].size());
    csv << i << ',' << cands[i].size();
    if (truth) {
      const VertexPair t{(*truth)[i].u, (*truth)[i].v};
      const bool in = std::binary_search(cands[i].begin(), cands[i].end(), t);
      const bool hit = !cands[i].empty() && cands[i][rng.uniform(cands[i].size())] == t;
      sound += in;
      correct += hit;
      if (qr.unique_signature(t.first, t.second)) {
        ++unique;
        unique_correct += hit;
      }
      csv << ',' << in << ',' << hit;
    }
    csv << '\n';
  }
  if (!a.csv.empty()) write_text(a.csv, csv.str());
  std::cout << "observations " << cands.size() << ", mean candidate set size "
            << (cands.empty() ? 0 : total / static_cast<double>(cands.size())) << "\n";
  if (truth && !cands.empty()) {
    std::cout << "true query in candidate set: " << sound << "/" << cands.size() << "\n";
    std::cout << "accuracy " << static_cast<double>(correct) / static_cast<double>(cands.size());
    if (unique) {
      std::cout << ", on unique signatures "
                << static_cast<double>(unique_correct) / static_cast<double>(unique) << " ("
                << unique << " queries)";
    }
    std::cout << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oblivious shortest-path queries over an encrypted graph"};
  app.require_subcommand(1);

  SetupArgs sa;
  auto* setup_cmd = app.add_subcommand("setup", "Encrypt a graph and write server and client state");
  setup_cmd->add_option("graph", sa.graph, "Edge list: u v [weight] per line")->required();
  setup_cmd->add_option("--mode", sa.mode, "trivial or enhanced")->check(CLI::IsMember({"trivial", "enhanced"}));
  setup_cmd->add_option("--Z", sa.z, "Blocks per bucket")->check(CLI::PositiveNumber);
  setup_cmd->add_option("--pad", sa.pad, "none or full")->check(CLI::IsMember({"none", "full"}));
  setup_cmd->add_option("--out", sa.out, "Output directory")->required();
  setup_cmd->add_flag("--undirected", sa.undirected, "Treat each edge as two arcs");
  setup_cmd->add_option("--lambda", sa.lambda, "Key size in bits (128 or 256)");
  setup_cmd->add_option("--budget", sa.budget, "Controller memory budget in bytes (enhanced)");
  setup_cmd->add_option("--stash-max", sa.stash_max, "Stash capacity in blocks");
  setup_cmd->add_option("--listen", sa.listen, "listen_addr written to server.conf");
  setup_cmd->add_option("--seed", sa.seed, "Deterministic randomness (testing only)");

  std::string config;
  auto* serve_cmd = app.add_subcommand("serve", "Run the storage daemon");
  serve_cmd->add_option("--config", config, "server.conf from setup")->required();

  QueryArgs qa;
  auto* query_cmd = app.add_subcommand("query", "Shortest path from u to v");
  query_cmd->add_option("u", qa.u)->required();
  query_cmd->add_option("v", qa.v)->required();
  query_cmd->add_option("--keys", qa.keys, "keys.bin from setup")->required();
  query_cmd->add_option("--connect", qa.connect, "host:port of a running daemon");
  query_cmd->add_option("--state", qa.state, "Trivial-mode client state (default: next to keys)");

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Latency against path length, CSV");
  bench_cmd->add_option("--lengths", ba.lengths, "e.g. 1..10 or 1,2,4");
  bench_cmd->add_option("--reps", ba.reps)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--mode", ba.mode)->check(CLI::IsMember({"trivial", "enhanced"}));
  bench_cmd->add_option("--Z", ba.z)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--pad", ba.pad)->check(CLI::IsMember({"none", "full"}));
  bench_cmd->add_option("--vertices", ba.vertices, "Chain length");
  bench_cmd->add_option("--budget-fraction", ba.budget_fraction, "Budget = flat map size / this");
  bench_cmd->add_option("--out", ba.out, "Write CSV here instead of stdout");
  bench_cmd->add_option("--seed", ba.seed);

  AuditArgs aa;
  auto* audit_cmd = app.add_subcommand("audit", "Leakage tests on a server access trace");
  audit_cmd->add_option("--trace", aa.trace)->required();
  audit_cmd->add_option("--truth", aa.truth, "CSV u,v,path_len per executed query")->required();
  audit_cmd->add_option("--graph", aa.graph, "Enables the length-only attack score");
  audit_cmd->add_flag("--undirected", aa.undirected);
  audit_cmd->add_option("--csv", aa.csv, "Write the report as CSV");
  audit_cmd->add_option("--min-reps", aa.min_reps, "Executions per pair for two-sample tests");
  audit_cmd->add_option("--seed", aa.seed);

  AttackArgs ka;
  auto* attack_cmd = app.add_subcommand("attack", "Query recovery against a token log or access trace");
  attack_cmd->add_option("--graph", ka.graph)->required();
  attack_cmd->add_option("--trace", ka.trace, "Token log or access trace")->required();
  attack_cmd->add_option("--truth", ka.truth, "CSV u,v,path_len");
  attack_cmd->add_flag("--undirected", ka.undirected);
  attack_cmd->add_option("--simulate", ka.simulate, "First write a token log of N random queries");
  attack_cmd->add_option("--seed", ka.seed);
  attack_cmd->add_option("--csv", ka.csv, "Per-query candidate counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*setup_cmd) return run_setup(sa);
    if (*serve_cmd) return run_serve(config);
    if (*query_cmd) return run_query(qa);
    if (*bench_cmd) return run_bench_cmd(ba);
    if (*audit_cmd) return run_audit(aa);
    if (*attack_cmd) return run_attack(ka);
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const IntegrityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitProtocol;
  }
  return kExitUsage;
}
