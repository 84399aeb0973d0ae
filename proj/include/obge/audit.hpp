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

#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "obge/attack.hpp"
#include "obge/protocol.hpp"
#include "obge/stats.hpp"
#include "obge/trace.hpp"

// Leakage auditor over a server AccessTrace.
namespace obge {

// Ground truth for one executed query, supplied by the harness.
struct TruthQuery {
  Vertex u = 0, v = 0;
  std::optional<std::size_t> hops;  // nullopt when v is unreachable from u

  std::size_t expected_rounds() const { return (hops ? *hops : 0) + 1; }
};

// CSV: u,v,path_len with path_len empty or "none" for unreachable pairs.
inline std::vector<TruthQuery> parse_truth_csv(std::istream& in) {
  std::vector<TruthQuery> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line == "u,v,path_len") continue;
    std::istringstream ss(line);
    std::string f[3];
    std::getline(ss, f[0], ',');
    std::getline(ss, f[1], ',');
    std::getline(ss, f[2]);
    try {
      TruthQuery q{static_cast<Vertex>(std::stoul(f[0])), static_cast<Vertex>(std::stoul(f[1])), {}};
      if (!f[2].empty() && f[2] != "none") q.hops = std::stoull(f[2]);
      out.push_back(q);
    } catch (const std::logic_error&) {
      throw ParseError(lineno, "expected u,v,path_len");
    }
  }
  return out;
}

inline std::vector<TruthQuery> load_truth_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open truth file " + path.string());
  return parse_truth_csv(in);
}

inline std::string format_truth_csv(const std::vector<TruthQuery>& qs) {
  std::ostringstream os;
  os << "u,v,path_len\n";
  for (const auto& q : qs) {
    os << q.u << ',' << q.v << ',';
    if (q.hops) os << *q.hops;
    else os << "none";
    os << '\n';
  }
  return os.str();
}

// Trace records of one query.
struct QuerySegment {
  std::size_t reads = 0;   // ReadPath on the data tree
  std::size_t writes = 0;  // WritePath on the data tree
  std::vector<Leaf> leaves;
};

// Splits at harness markers if any are present, otherwise at each
// EnclaveRequest. Records before the first boundary are setup traffic.
inline std::vector<QuerySegment> segment_trace(const std::vector<TraceRecord>& records) {
  const bool marked = std::any_of(records.begin(), records.end(),
                                  [](const auto& r) { return r.type == MsgType::Marker; });
  const auto boundary = marked ? MsgType::Marker : MsgType::EnclaveRequest;
  std::vector<QuerySegment> out;
  for (const auto& r : records) {
    if (r.type == boundary) {
      out.emplace_back();
      continue;
    }
    if (out.empty() || r.tree != kDataTree) continue;
    if (r.type == MsgType::ReadPath) {
      ++out.back().reads;
      if (r.leaf) out.back().leaves.push_back(*r.leaf);
    } else if (r.type == MsgType::WritePath) {
      ++out.back().writes;
    }
  }
  return out;
}

struct TwoSampleCell {
  std::size_t hops = 0;
  VertexPair a, b;
  std::size_t reps_a = 0, reps_b = 0;
  std::size_t bins = 0;
  stats::TestResult result;
};

struct AttackScore {
  std::size_t queries = 0;
  std::size_t correct = 0;
  double accuracy = 0;
  double baseline = 0;  // mean over queries of 1 / |same-rounds class|
};

struct AuditOptions {
  double alpha = 0.01;
  std::size_t min_reps = 30;  // per pair, for two-sample cells
  std::uint64_t seed = 1;     // attacker's guessing randomness
};

struct AuditReport {
  std::size_t queries = 0;
  std::size_t rounds_mismatches = 0;
  std::size_t read_write_mismatches = 0;
  std::map<std::string, std::set<std::uint64_t>> widths;  // "type/tree" -> byte sizes
  std::uint64_t leaf_count = 0;
  stats::TestResult leaf_uniformity;
  std::vector<TwoSampleCell> two_sample;
  std::optional<VertexPair> repeated;
  stats::TestResult repeat_uniformity;
  stats::TestResult repeat_independence;
  std::optional<AttackScore> attack;
  double alpha = 0.01;

  bool rounds_ok() const { return rounds_mismatches == 0 && read_write_mismatches == 0; }
  bool widths_constant() const {
    return std::all_of(widths.begin(), widths.end(), [](const auto& kv) { return kv.second.size() == 1; });
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << "check,key,value\n";
    os << "rounds,queries," << queries << "\n";
    os << "rounds,mismatches," << rounds_mismatches << "\n";
    os << "rounds,read_write_mismatches," << read_write_mismatches << "\n";
    for (const auto& [k, v] : widths) {
      os << "width," << k << ",";
      bool first = true;
      for (auto w : v) os << (first ? "" : ";") << w, first = false;
      os << "\n";
    }
    os << "leaf_uniformity,chi2," << leaf_uniformity.statistic << "\n";
    os << "leaf_uniformity,p," << leaf_uniformity.p_value << "\n";
    for (const auto& c : two_sample) {
      os << "two_sample,(" << c.a.first << ' ' << c.a.second << ")~(" << c.b.first << ' '
         << c.b.second << ")," << c.result.p_value << "\n";
    }
    if (repeated) {
      os << "repeat_uniformity,p," << repeat_uniformity.p_value << "\n";
      os << "repeat_independence,p," << repeat_independence.p_value << "\n";
    }
    if (attack) {
      os << "attack,accuracy," << attack->accuracy << "\n";
      os << "attack,baseline," << attack->baseline << "\n";
    }
    return os.str();
  }

  std::string summary() const {
    std::ostringstream os;
    auto verdict = [&](double p) { return p >= alpha ? "ok" : "REJECTED"; };
    os << "queries: " << queries << "\n";
    os << "rounds = |p|+1: " << (rounds_ok() ? "ok" : "MISMATCH") << " (" << rounds_mismatches
       << " count, " << read_write_mismatches << " read/write)\n";
    os << "constant widths: " << (widths_constant() ? "ok" : "VARYING") << "\n";
    os << "leaf uniformity over " << leaf_count << " leaves: p=" << leaf_uniformity.p_value << " "
       << verdict(leaf_uniformity.p_value) << "\n";
    for (const auto& c : two_sample) {
      os << "same length " << c.hops << ": (" << c.a.first << "," << c.a.second << ") x" << c.reps_a
         << " vs (" << c.b.first << "," << c.b.second << ") x" << c.reps_b << ", " << c.bins
         << " bins: p=" << c.result.p_value << " " << verdict(c.result.p_value) << "\n";
    }
    if (repeated) {
      os << "repeated (" << repeated->first << "," << repeated->second
         << ") first leaf uniform: p=" << repeat_uniformity.p_value << " "
         << verdict(repeat_uniformity.p_value) << ", independent: p=" << repeat_independence.p_value
         << " " << verdict(repeat_independence.p_value) << "\n";
    }
    if (attack) {
      os << "length-only attack: accuracy " << attack->accuracy << " over " << attack->queries
         << " queries, uniform-guess baseline " << attack->baseline << "\n";
    }
    return os.str();
  }
};

inline AuditReport audit_trace(const AccessTrace& trace, const std::vector<TruthQuery>& truth,
                               const Graph* graph = nullptr, const AuditOptions& opt = {}) {
  AuditReport rep;
  rep.alpha = opt.alpha;
  const auto records = trace.records();
  const auto trees = trace.trees();
  auto data = trees.find(kDataTree);
  if (data == trees.end()) throw ValidationError("trace does not describe the data tree");
  rep.leaf_count = std::uint64_t{1} << data->second.depth;

  for (const auto& r : records) {
    switch (r.type) {
      case MsgType::PathData:
      case MsgType::WritePath:
      case MsgType::ReadPath:
        rep.widths[std::string(to_string(r.type)) + "/" + std::to_string(r.tree.value_or(0))].insert(
            r.bytes);
        break;
      case MsgType::EnclaveRequest:
        rep.widths[to_string(r.type)].insert(r.bytes);
        break;
      default:
        break;
    }
  }

  const auto segs = segment_trace(records);
  if (segs.size() != truth.size()) {
    throw ValidationError("trace has " + std::to_string(segs.size()) + " queries, truth has " +
                          std::to_string(truth.size()));
  }
  rep.queries = segs.size();

  std::vector<Leaf> all;
  std::map<VertexPair, std::vector<std::size_t>> runs;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].reads != truth[i].expected_rounds()) ++rep.rounds_mismatches;
    if (segs[i].reads != segs[i].writes) ++rep.read_write_mismatches;
    all.insert(all.end(), segs[i].leaves.begin(), segs[i].leaves.end());
    runs[{truth[i].u, truth[i].v}].push_back(i);
  }
  rep.leaf_uniformity = stats::chi_square_uniform(
      stats::bin_leaves(all, rep.leaf_count, stats::bins_for(all.size(), rep.leaf_count)));

  auto pooled = [&](const std::vector<std::size_t>& idx) {
    std::vector<Leaf> out;
    for (auto i : idx) out.insert(out.end(), segs[i].leaves.begin(), segs[i].leaves.end());
    return out;
  };

  // Two most-executed distinct pairs per path length.
  std::map<std::size_t, std::vector<VertexPair>> by_len;
  for (const auto& [p, idx] : runs) {
    if (idx.size() >= opt.min_reps) by_len[truth[idx[0]].expected_rounds() - 1].push_back(p);
  }
  for (auto& [hops, pairs] : by_len) {
    if (pairs.size() < 2) continue;
    std::stable_sort(pairs.begin(), pairs.end(),
                     [&](const auto& x, const auto& y) { return runs[x].size() > runs[y].size(); });
    TwoSampleCell c{hops, pairs[0], pairs[1], runs[pairs[0]].size(), runs[pairs[1]].size(), 0, {}};
    auto la = pooled(runs[c.a]), lb = pooled(runs[c.b]);
    c.bins = stats::bins_for(std::min(la.size(), lb.size()), rep.leaf_count, 10);
    c.result = stats::chi_square_two_sample(stats::bin_leaves(la, rep.leaf_count, c.bins),
                                            stats::bin_leaves(lb, rep.leaf_count, c.bins));
    rep.two_sample.push_back(c);
  }

  // First leaf of consecutive executions of the most repeated query.
  auto most = std::max_element(runs.begin(), runs.end(), [](const auto& x, const auto& y) {
    return x.second.size() < y.second.size();
  });
  if (most != runs.end() && most->second.size() >= opt.min_reps) {
    rep.repeated = most->first;
    std::vector<Leaf> first;
    for (auto i : most->second) {
      if (!segs[i].leaves.empty()) first.push_back(segs[i].leaves.front());
    }
    rep.repeat_uniformity = stats::chi_square_uniform(
        stats::bin_leaves(first, rep.leaf_count, stats::bins_for(first.size(), rep.leaf_count)));
    // k x k table needs ~5 per cell: k^2 <= n / 5.
    std::size_t k = 1;
    while (k * 2 <= rep.leaf_count && (k * 2) * (k * 2) * 5 <= first.size()) k *= 2;
    std::vector<std::vector<std::uint64_t>> table(k, std::vector<std::uint64_t>(k, 0));
    const auto width = rep.leaf_count / k;
    for (std::size_t j = 1; j < first.size(); ++j) ++table[first[j - 1] / width][first[j] / width];
    rep.repeat_independence = stats::chi_square_independence(table);
  }

  if (graph) {
    LengthAttacker attacker(*graph);
    Drbg rng(opt.seed);
    AttackScore s;
    double base = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const auto& cls = attacker.candidates(segs[i].reads);
      auto g = attacker.guess(segs[i].reads, rng);
      ++s.queries;
      if (g && *g == VertexPair{truth[i].u, truth[i].v}) ++s.correct;
      if (!cls.empty()) base += 1.0 / static_cast<double>(cls.size());
    }
    if (s.queries) {
      s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.queries);
      s.baseline = base / static_cast<double>(s.queries);
    }
    rep.attack = s;
  }
  return rep;
}

}  // namespace obge
