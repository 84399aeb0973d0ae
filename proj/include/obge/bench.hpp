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

#include <chrono>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "obge/net.hpp"
#include "obge/stats.hpp"

// Query latency against path length on a chain graph.
namespace obge {

// "1..10", "1,2,5" or a mix such as "1..3,8".
inline std::vector<std::size_t> parse_lengths(const std::string& list) {
  std::vector<std::size_t> out;
  std::istringstream ss(list);
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      auto dots = part.find("..");
      if (dots == std::string::npos) {
        out.push_back(std::stoull(part));
        continue;
      }
      auto lo = std::stoull(part.substr(0, dots)), hi = std::stoull(part.substr(dots + 2));
      if (lo > hi) throw ValidationError("empty length range " + part);
      for (auto l = lo; l <= hi; ++l) out.push_back(l);
    } catch (const std::logic_error&) {
      throw ValidationError("bad length list '" + list + "'");
    }
  }
  if (out.empty()) throw ValidationError("no path lengths given");
  return out;
}

// 0 - 1 - ... - (n-1), both directions.
inline Graph chain_graph(std::size_t n) {
  Graph g(n, false);
  for (std::size_t i = 0; i + 1 < n; ++i) g.add_edge(static_cast<Vertex>(i), static_cast<Vertex>(i + 1));
  return g;
}

struct BenchOptions {
  std::vector<std::size_t> lengths;
  std::size_t reps = 50;
  std::size_t vertices = 64;  // raised to max(length) + 1 if smaller
  SetupOptions setup;
  std::uint64_t seed = 7;
};

struct BenchRow {
  std::size_t path_len = 0;
  std::size_t rep = 0;
  double micros = 0;
};

// Repetitions are interleaved across lengths so slow drift hits all of them.
inline std::vector<BenchRow> run_bench(const BenchOptions& opt) {
  if (opt.lengths.empty() || opt.reps == 0) throw ValidationError("nothing to benchmark");
  std::size_t n = opt.vertices;
  for (auto l : opt.lengths) n = std::max(n, l + 1);
  Drbg rng(opt.seed);
  LocalDeployment dep(chain_graph(n), opt.setup, rng);
  for (auto l : opt.lengths) dep.query(0, static_cast<Vertex>(l));  // warm-up
  std::vector<BenchRow> rows;
  for (std::size_t rep = 0; rep < opt.reps; ++rep) {
    for (auto l : opt.lengths) {
      const auto t0 = std::chrono::steady_clock::now();
      auto p = dep.path(0, static_cast<Vertex>(l));
      const auto t1 = std::chrono::steady_clock::now();
      if (!p || p->size() != l + 1) throw IntegrityError("bench query returned a wrong path");
      rows.push_back({l, rep, std::chrono::duration<double, std::micro>(t1 - t0).count()});
    }
  }
  return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "path_len,rep,micros\n";
  for (const auto& r : rows) os << r.path_len << ',' << r.rep << ',' << r.micros << '\n';
  return os.str();
}

struct BenchSummary {
  std::map<std::size_t, double> mean;  // path_len -> mean micros
  bool strictly_increasing = false;
  stats::Regression fit;
};

inline BenchSummary summarize_bench(const std::vector<BenchRow>& rows) {
  BenchSummary s;
  std::map<std::size_t, std::size_t> count;
  std::vector<double> x, y;
  for (const auto& r : rows) {
    s.mean[r.path_len] += r.micros;
    ++count[r.path_len];
    x.push_back(static_cast<double>(r.path_len));
    y.push_back(r.micros);
  }
  for (auto& [l, m] : s.mean) m /= static_cast<double>(count[l]);
  s.strictly_increasing = !s.mean.empty();
  double prev = -1;
  for (const auto& [l, m] : s.mean) {
    if (m <= prev) s.strictly_increasing = false;
    prev = m;
  }
  s.fit = stats::ols(x, y);
  return s;
}

}  // namespace obge
