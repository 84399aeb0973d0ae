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

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>

#include "obge/bytes.hpp"
#include "obge/graph.hpp"

namespace obge {

namespace detail {

struct CipherCtxFree {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
struct MacCtxFree {
  void operator()(EVP_MAC_CTX* c) const { EVP_MAC_CTX_free(c); }
};
struct MacFree {
  void operator()(EVP_MAC* m) const { EVP_MAC_free(m); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree>;
using MacCtx = std::unique_ptr<EVP_MAC_CTX, MacCtxFree>;

inline void ossl_check(int ok, const char* what) {
  if (ok != 1) throw Error(std::string("openssl: ") + what);
}

inline void os_random(MutableByteSpan out) {
  ossl_check(RAND_bytes(out.data(), static_cast<int>(out.size())), "RAND_bytes");
}

}  // namespace detail

// Deterministic random bit generator: AES-256-CTR keystream under a 32-byte
// seed. from_os() seeds from the OpenSSL CSPRNG; the integer constructor
// gives reproducible streams for tests and benchmarks.
class Drbg {
 public:
  using result_type = std::uint64_t;

  explicit Drbg(std::uint64_t seed) {
    std::array<std::uint8_t, 32> key{};
    store_be(key, seed, 8);
    key[31] = 0x5A;
    init(key);
  }

  static Drbg from_os() {
    std::array<std::uint8_t, 32> key;
    detail::os_random(key);
    return Drbg(key);
  }

  // Independent child stream seeded from this one.
  Drbg fork() {
    std::array<std::uint8_t, 32> key;
    fill(key);
    return Drbg(key);
  }

  void fill(MutableByteSpan out) {
    std::size_t done = 0;
    while (done < out.size()) {
      if (pos_ == buf_.size()) refill();
      auto n = std::min(out.size() - done, buf_.size() - pos_);
      std::memcpy(out.data() + done, buf_.data() + pos_, n);
      pos_ += n;
      done += n;
    }
  }

  std::uint64_t operator()() {
    std::array<std::uint8_t, 8> b;
    fill(b);
    return load_be(b, 8);
  }

  // Uniform in [0, bound); rejection sampling, no modulo bias.
  std::uint64_t uniform(std::uint64_t bound) {
    if (bound == 0) throw RangeError("uniform(0)");
    if ((bound & (bound - 1)) == 0) return (*this)() & (bound - 1);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
      auto r = (*this)();
      if (r < limit) return r % bound;
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

 private:
  explicit Drbg(const std::array<std::uint8_t, 32>& key) { init(key); }

  void init(const std::array<std::uint8_t, 32>& key) {
    ctx_.reset(EVP_CIPHER_CTX_new());
    std::array<std::uint8_t, 16> iv{};
    detail::ossl_check(
        EVP_EncryptInit_ex(ctx_.get(), EVP_aes_256_ctr(), nullptr, key.data(), iv.data()),
        "drbg init");
    pos_ = buf_.size();
  }

  void refill() {
    std::array<std::uint8_t, 4096> zeros{};
    int len = 0;
    detail::ossl_check(EVP_EncryptUpdate(ctx_.get(), buf_.data(), &len, zeros.data(),
                                         static_cast<int>(zeros.size())),
                       "drbg update");
    pos_ = 0;
  }

  detail::CipherCtx ctx_;
  std::array<std::uint8_t, 4096> buf_{};
  std::size_t pos_ = 0;
};

// 16-byte PRF output; also used as an opaque ORAM block identity.
struct Token {
  std::array<std::uint8_t, 16> bytes{};

  auto operator<=>(const Token&) const = default;
  ByteSpan span() const { return bytes; }
  std::string hex() const { return to_hex(bytes); }

  static Token from(ByteSpan b) {
    if (b.size() != 16) throw ProtocolError("token must be 16 bytes");
    Token t;
    std::memcpy(t.bytes.data(), b.data(), 16);
    return t;
  }
};

struct TokenHash {
  std::size_t operator()(const Token& t) const noexcept {
    std::size_t h;
    std::memcpy(&h, t.bytes.data(), sizeof h);
    return h;
  }
};

// (u, v) -> u as 4-byte big endian || v as 4-byte big endian.
inline std::array<std::uint8_t, 8> encode_pair(Vertex u, Vertex v) {
  std::array<std::uint8_t, 8> out;
  store_be(std::span(out).first(4), u, 4);
  store_be(std::span(out).last(4), v, 4);
  return out;
}

inline std::pair<Vertex, Vertex> decode_pair(ByteSpan b) {
  if (b.size() != 8) throw IntegrityError("vertex pair must be 8 bytes");
  return {static_cast<Vertex>(load_be(b.first(4), 4)), static_cast<Vertex>(load_be(b.last(4), 4))};
}

struct KeySet {
  unsigned lambda = 128;
  Bytes k1;    // path payload encryption
  Bytes k2;    // ORAM block encryption
  Bytes kprf;  // PRF key

  bool operator==(const KeySet&) const = default;
};

inline void check_lambda(unsigned lambda) {
  if (lambda != 128 && lambda != 256) {
    throw ConfigError("unsupported security parameter " + std::to_string(lambda) +
                      " (expected 128 or 256)");
  }
}

inline Bytes random_key(unsigned lambda, Drbg& rng) {
  check_lambda(lambda);
  Bytes k(lambda / 8);
  rng.fill(k);
  return k;
}

inline KeySet keygen(unsigned lambda, Drbg& rng) {
  check_lambda(lambda);
  return KeySet{lambda, random_key(lambda, rng), random_key(lambda, rng), random_key(lambda, rng)};
}

inline KeySet keygen(unsigned lambda) {
  auto rng = Drbg::from_os();
  return keygen(lambda, rng);
}

// HMAC-SHA256 truncated to 16 bytes. The keyed context is built once and
// duplicated per evaluation, so concurrent eval() calls are safe.
class Prf {
 public:
  explicit Prf(ByteSpan key) {
    std::unique_ptr<EVP_MAC, detail::MacFree> mac(EVP_MAC_fetch(nullptr, "HMAC", nullptr));
    if (!mac) throw Error("openssl: HMAC unavailable");
    base_.reset(EVP_MAC_CTX_new(mac.get()));
    char digest[] = "SHA256";
    OSSL_PARAM params[] = {
        OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_DIGEST, digest, 0),
        OSSL_PARAM_construct_end()};
    detail::ossl_check(EVP_MAC_init(base_.get(), key.data(), key.size(), params), "hmac init");
  }

  Token eval(ByteSpan message) const {
    if (message.empty()) throw RangeError("PRF message must be non-empty");
    detail::MacCtx ctx(EVP_MAC_CTX_dup(base_.get()));
    if (!ctx) throw Error("openssl: hmac dup");
    detail::ossl_check(EVP_MAC_update(ctx.get(), message.data(), message.size()), "hmac update");
    std::array<std::uint8_t, 32> full;
    std::size_t len = 0;
    detail::ossl_check(EVP_MAC_final(ctx.get(), full.data(), &len, full.size()), "hmac final");
    Token t;
    std::memcpy(t.bytes.data(), full.data(), t.bytes.size());
    return t;
  }

  Token eval(Vertex u, Vertex v) const { return eval(encode_pair(u, v)); }

 private:
  detail::MacCtx base_;
};

inline Token prf_eval(ByteSpan key, ByteSpan message) { return Prf(key).eval(message); }

// Randomized authenticated encryption (AES-GCM, 128- or 256-bit key) over
// a fixed-width padded plaintext:
//
//   nonce(12) || GCM( len(4, BE) || plaintext || zero padding to pad_to ) || tag(16)
//
// The ciphertext width depends on pad_to only. One instance per owner:
// the cipher contexts are reused across calls and are not thread-safe.
class Aead {
 public:
  static constexpr std::size_t kNonceBytes = 12;
  static constexpr std::size_t kLengthBytes = 4;
  static constexpr std::size_t kTagBytes = 16;
  static constexpr std::size_t kOverhead = kNonceBytes + kLengthBytes + kTagBytes;

  static constexpr std::size_t ciphertext_width(std::size_t pad_to) { return pad_to + kOverhead; }

  explicit Aead(ByteSpan key) : enc_(EVP_CIPHER_CTX_new()), dec_(EVP_CIPHER_CTX_new()) {
    const EVP_CIPHER* cipher = nullptr;
    if (key.size() == 16) {
      cipher = EVP_aes_128_gcm();
    } else if (key.size() == 32) {
      cipher = EVP_aes_256_gcm();
    } else {
      throw ConfigError("AEAD key must be 16 or 32 bytes");
    }
    detail::ossl_check(EVP_EncryptInit_ex(enc_.get(), cipher, nullptr, key.data(), nullptr),
                       "gcm enc init");
    detail::ossl_check(EVP_DecryptInit_ex(dec_.get(), cipher, nullptr, key.data(), nullptr),
                       "gcm dec init");
  }

  Aead(Aead&&) noexcept = default;
  Aead& operator=(Aead&&) noexcept = default;

  // Writes exactly ciphertext_width(pad_to) bytes into `out`.
  void encrypt_into(ByteSpan plaintext, std::size_t pad_to, Drbg& rng, MutableByteSpan out) {
    if (plaintext.size() > pad_to) {
      throw RangeError("plaintext of " + std::to_string(plaintext.size()) +
                       " bytes exceeds pad width " + std::to_string(pad_to));
    }
    if (out.size() != ciphertext_width(pad_to)) throw RangeError("ciphertext buffer width");
    scratch_.assign(kLengthBytes + pad_to, 0);
    store_be(scratch_, plaintext.size(), kLengthBytes);
    std::copy(plaintext.begin(), plaintext.end(), scratch_.begin() + kLengthBytes);

    auto nonce = out.first(kNonceBytes);
    rng.fill(nonce);
    auto body = out.subspan(kNonceBytes, scratch_.size());
    int len = 0;
    detail::ossl_check(EVP_EncryptInit_ex(enc_.get(), nullptr, nullptr, nullptr, nonce.data()),
                       "gcm nonce");
    detail::ossl_check(EVP_EncryptUpdate(enc_.get(), body.data(), &len, scratch_.data(),
                                         static_cast<int>(scratch_.size())),
                       "gcm update");
    detail::ossl_check(EVP_EncryptFinal_ex(enc_.get(), body.data() + len, &len), "gcm final");
    detail::ossl_check(EVP_CIPHER_CTX_ctrl(enc_.get(), EVP_CTRL_GCM_GET_TAG, kTagBytes,
                                           out.last(kTagBytes).data()),
                       "gcm tag");
  }

  Bytes encrypt(ByteSpan plaintext, std::size_t pad_to, Drbg& rng) {
    Bytes out(ciphertext_width(pad_to));
    encrypt_into(plaintext, pad_to, rng, out);
    return out;
  }

  // Plaintext without padding; IntegrityError on any tampering or wrong key.
  Bytes decrypt(ByteSpan ct) {
    Bytes out;
    decrypt_into(ct, out);
    return out;
  }

  void decrypt_into(ByteSpan ct, Bytes& out) {
    if (ct.size() < kOverhead) throw IntegrityError("ciphertext too short");
    auto nonce = ct.first(kNonceBytes);
    auto body = ct.subspan(kNonceBytes, ct.size() - kOverhead + kLengthBytes);
    Bytes tag(ct.last(kTagBytes).begin(), ct.last(kTagBytes).end());
    scratch_.resize(body.size());
    int len = 0;
    detail::ossl_check(EVP_DecryptInit_ex(dec_.get(), nullptr, nullptr, nullptr, nonce.data()),
                       "gcm nonce");
    detail::ossl_check(EVP_DecryptUpdate(dec_.get(), scratch_.data(), &len, body.data(),
                                         static_cast<int>(body.size())),
                       "gcm update");
    detail::ossl_check(
        EVP_CIPHER_CTX_ctrl(dec_.get(), EVP_CTRL_GCM_SET_TAG, kTagBytes, tag.data()), "gcm tag");
    if (EVP_DecryptFinal_ex(dec_.get(), scratch_.data() + len, &len) != 1) {
      throw IntegrityError("authentication failed");
    }
    const auto n = load_be(scratch_, kLengthBytes);
    if (n > scratch_.size() - kLengthBytes) throw IntegrityError("bad padded length");
    out.assign(scratch_.begin() + kLengthBytes, scratch_.begin() + kLengthBytes + n);
  }

 private:
  detail::CipherCtx enc_;
  detail::CipherCtx dec_;
  Bytes scratch_;
};

// One-shot forms; each call builds its own context.
inline Bytes ske_encrypt(ByteSpan key, ByteSpan plaintext, std::size_t pad_to, Drbg& rng) {
  return Aead(key).encrypt(plaintext, pad_to, rng);
}

inline Bytes ske_decrypt(ByteSpan key, ByteSpan ct) { return Aead(key).decrypt(ct); }

}  // namespace obge
