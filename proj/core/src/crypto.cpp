// Copyright 2025 The EP-MPD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "epmpd/crypto.hpp"

#include <openssl/evp.h>
#include <sodium.h>

#include <cstring>
#include <stdexcept>

#include "epmpd/errors.hpp"

namespace epmpd::crypto {

namespace {

constexpr char kHashToGroupDst[] = "epmpd.oprf.h2g.v1";

void ensure_sodium() {
  if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
}

bool scalar_is_zero(const std::array<uint8_t, 32>& s) {
  uint8_t acc = 0;
  for (uint8_t b : s) acc |= b;
  return acc == 0;
}

std::array<uint8_t, 32> random_nonzero_scalar(Rng& rng) {
  ensure_sodium();
  std::array<uint8_t, 32> out{};
  uint8_t wide[64];
  do {
    rng.fill(wide);
    crypto_core_ristretto255_scalar_reduce(out.data(), wide);
  } while (scalar_is_zero(out));
  return out;
}

// Identity has the all-zero canonical encoding; scalarmult of it is the
// identity again, which libsodium reports as failure, so it is special-cased.
bool is_identity_point(const BlindedPoint& p) {
  uint8_t acc = 0;
  for (uint8_t b : p.bytes) acc |= b;
  return acc == 0;
}

BlindedPoint hash_to_group(const Element& e) {
  ensure_sodium();
  crypto_hash_sha512_state st;
  crypto_hash_sha512_init(&st);
  crypto_hash_sha512_update(
      &st, reinterpret_cast<const unsigned char*>(kHashToGroupDst),
      sizeof(kHashToGroupDst) - 1);
  crypto_hash_sha512_update(&st, e.bytes().data(), e.bytes().size());
  unsigned char uniform[crypto_hash_sha512_BYTES];
  crypto_hash_sha512_final(&st, uniform);
  BlindedPoint p;
  crypto_core_ristretto255_from_hash(p.bytes.data(), uniform);
  return p;
}

PrfOutput hash_point(const BlindedPoint& p) {
  PrfOutput out;
  crypto_hash_sha256(out.bytes.data(), p.bytes.data(), p.bytes.size());
  return out;
}

size_t hash_array(const uint8_t* data, size_t n) {
  uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < n; i++) {
    h ^= data[i];
    h *= 1099511628211ull;
  }
  return static_cast<size_t>(h);
}

}  // namespace

size_t PrpBlockHash::operator()(const PrpBlock& b) const {
  return hash_array(b.bytes.data(), b.bytes.size());
}

size_t PrfOutputHash::operator()(const PrfOutput& o) const {
  return hash_array(o.bytes.data(), o.bytes.size());
}

PrpKey PrpKey::random(Rng& rng) {
  PrpKey k;
  rng.fill(k.bytes);
  return k;
}

OprfKey OprfKey::random(Rng& rng) {
  OprfKey k;
  k.scalar = random_nonzero_scalar(rng);
  return k;
}

PrpCipher::PrpCipher(const PrpKey& key) {
  EVP_CIPHER_CTX* enc = EVP_CIPHER_CTX_new();
  EVP_CIPHER_CTX* dec = EVP_CIPHER_CTX_new();
  if (enc == nullptr || dec == nullptr ||
      EVP_EncryptInit_ex(enc, EVP_aes_128_ecb(), nullptr, key.bytes.data(),
                         nullptr) != 1 ||
      EVP_DecryptInit_ex(dec, EVP_aes_128_ecb(), nullptr, key.bytes.data(),
                         nullptr) != 1) {
    EVP_CIPHER_CTX_free(enc);
    EVP_CIPHER_CTX_free(dec);
    throw std::runtime_error("AES context init failed");
  }
  EVP_CIPHER_CTX_set_padding(enc, 0);
  EVP_CIPHER_CTX_set_padding(dec, 0);
  enc_ctx_ = enc;
  dec_ctx_ = dec;
}

PrpCipher::~PrpCipher() {
  EVP_CIPHER_CTX_free(static_cast<EVP_CIPHER_CTX*>(enc_ctx_));
  EVP_CIPHER_CTX_free(static_cast<EVP_CIPHER_CTX*>(dec_ctx_));
}

PrpBlock PrpCipher::encrypt(const PlainBlock& in) const {
  PrpBlock out;
  int outl = 0;
  if (EVP_EncryptUpdate(static_cast<EVP_CIPHER_CTX*>(enc_ctx_),
                        out.bytes.data(), &outl, in.data(),
                        static_cast<int>(in.size())) != 1 ||
      outl != static_cast<int>(kBlockSize)) {
    throw std::runtime_error("AES encrypt failed");
  }
  return out;
}

PlainBlock PrpCipher::decrypt(const PrpBlock& in) const {
  PlainBlock out;
  int outl = 0;
  if (EVP_DecryptUpdate(static_cast<EVP_CIPHER_CTX*>(dec_ctx_), out.data(),
                        &outl, in.bytes.data(),
                        static_cast<int>(in.bytes.size())) != 1 ||
      outl != static_cast<int>(kBlockSize)) {
    throw std::runtime_error("AES decrypt failed");
  }
  return out;
}

PrpBlock prp_encrypt(const PrpKey& key, const Element& e,
                     const EncodeOptions& opts) {
  return PrpCipher(key).encrypt(encode_block(e, opts));
}

DecodedBlock prp_decrypt_raw(const PrpKey& key, const PrpBlock& block) {
  return decode_block(PrpCipher(key).decrypt(block));
}

Element prp_decrypt(const PrpKey& key, const PrpBlock& block,
                    const DigestMap* digests) {
  DecodedBlock d = prp_decrypt_raw(key, block);
  if (!d.is_digest) return d.element;
  if (digests != nullptr) {
    auto it = digests->find(d.digest);
    if (it != digests->end()) return it->second;
  }
  throw UnknownDigest("digest block with no matching plaintext");
}

std::pair<BlindedPoint, BlindScalar> oprf_blind(const Element& e, Rng& rng) {
  BlindScalar r;
  r.bytes = random_nonzero_scalar(rng);
  BlindedPoint p = hash_to_group(e);
  BlindedPoint blinded;
  if (crypto_scalarmult_ristretto255(blinded.bytes.data(), r.bytes.data(),
                                     p.bytes.data()) != 0) {
    throw InvalidPoint("blinding produced a degenerate point");
  }
  return {blinded, r};
}

BlindedPoint oprf_eval(const OprfKey& key, const BlindedPoint& point) {
  ensure_sodium();
  if (crypto_core_ristretto255_is_valid_point(point.bytes.data()) != 1) {
    throw InvalidPoint("point does not decode");
  }
  if (is_identity_point(point)) return point;
  BlindedPoint out;
  if (crypto_scalarmult_ristretto255(out.bytes.data(), key.scalar.data(),
                                     point.bytes.data()) != 0) {
    throw InvalidPoint("scalar multiplication failed");
  }
  return out;
}

PrfOutput oprf_unblind(const BlindedPoint& evaluated,
                       const BlindScalar& blind) {
  ensure_sodium();
  if (crypto_core_ristretto255_is_valid_point(evaluated.bytes.data()) != 1) {
    throw InvalidPoint("evaluated point does not decode");
  }
  uint8_t inv[32];
  if (crypto_core_ristretto255_scalar_invert(inv, blind.bytes.data()) != 0) {
    throw InvalidPoint("blind scalar not invertible");
  }
  BlindedPoint unblinded;
  if (crypto_scalarmult_ristretto255(unblinded.bytes.data(), inv,
                                     evaluated.bytes.data()) != 0) {
    throw InvalidPoint("unblinding failed");
  }
  return hash_point(unblinded);
}

PrfOutput oprf_local(const OprfKey& key, const Element& e) {
  return hash_point(oprf_eval(key, hash_to_group(e)));
}

bool is_valid_point(const BlindedPoint& point) {
  ensure_sodium();
  return crypto_core_ristretto255_is_valid_point(point.bytes.data()) == 1;
}

PrpKey hash_derived_key(const Element& e) {
  auto digest = sha256(e.bytes());
  PrpKey k;
  std::memcpy(k.bytes.data(), digest.data(), k.bytes.size());
  return k;
}

std::array<uint8_t, 32> sha256(BytesView data) {
  ensure_sodium();
  std::array<uint8_t, 32> out;
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

}  // namespace epmpd::crypto
