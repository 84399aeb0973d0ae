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

#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "obge/crypto.hpp"
#include "obge/graph.hpp"
#include "obge/path_oram.hpp"
#include "obge/protocol.hpp"

// Baseline scheme: the same tokenized next-hop dictionary, stored in a
// directly indexed table. The server sees every token a query touches.
namespace obge {

using TokenSequence = std::vector<Token>;

class GktScheme {
 public:
  struct Answer {
    EncryptedPath resp;
    TokenSequence tokens;
  };

  GktScheme(const Graph& g, Drbg& rng, unsigned lambda = 128)
      : keys_(keygen(lambda, rng)), n_(static_cast<std::uint32_t>(g.vertex_count())) {
    Aead k1(keys_.k1);
    Prf prf(keys_.kprf);
    for (const auto& e : compute_spdx(g)) {
      dict_.emplace(prf.eval(e.u, e.v),
                    Value{prf.eval(e.next, e.v), detail::encrypt_pair(k1, e.next, e.v, rng)});
    }
  }

  // Chases tokens from P(u, v) until a lookup misses; the miss is logged too.
  Answer query(Vertex u, Vertex v) {
    if (u >= n_ || v >= n_) throw RangeError("query vertex out of range");
    Prf prf(keys_.kprf);
    Answer a;
    Token curr = prf.eval(u, v);
    for (;;) {
      a.tokens.push_back(curr);
      auto it = dict_.find(curr);
      if (it == dict_.end()) break;
      if (a.resp.size() > n_) throw IntegrityError("next-hop chain does not terminate");
      a.resp.push_back(it->second.ct);
      curr = it->second.next;
    }
    log_.push_back(a.tokens);
    return a;
  }

  const KeySet& keys() const { return keys_; }
  std::size_t dictionary_size() const { return dict_.size(); }
  const std::vector<TokenSequence>& log() const { return log_; }

 private:
  struct Value {
    Token next;
    Bytes ct;
  };

  KeySet keys_;
  std::uint32_t n_;
  std::unordered_map<Token, Value, TokenHash> dict_;
  std::vector<TokenSequence> log_;
};

// Token log: one query per line, hex tokens separated by spaces.
inline std::string format_token_log(const std::vector<TokenSequence>& log) {
  std::ostringstream os;
  for (const auto& seq : log) {
    for (std::size_t i = 0; i < seq.size(); ++i) os << (i ? " " : "") << seq[i].hex();
    os << '\n';
  }
  return os.str();
}

inline std::vector<TokenSequence> parse_token_log(std::istream& in) {
  std::vector<TokenSequence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    TokenSequence seq;
    for (std::string hex; ss >> hex;) {
      try {
        seq.push_back(Token::from(from_hex(hex)));
      } catch (const Error&) {
        throw ParseError(lineno, "bad token '" + hex + "'");
      }
    }
    if (!seq.empty()) out.push_back(std::move(seq));
  }
  return out;
}

inline std::vector<TokenSequence> load_token_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open token log " + path.string());
  return parse_token_log(in);
}

}  // namespace obge
