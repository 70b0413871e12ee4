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

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <utility>

#include "epmpd/element.hpp"
#include "epmpd/rng.hpp"

// Keyed-permutation, hashing, and blinded-exponent OPRF primitives.
//
// The PRP is one invocation of the AES-128 block permutation over a single
// 16-byte block, so equal (key, element) pairs yield equal ciphertexts
// across parties. The OPRF is hash-to-group plus exponent blinding over
// ristretto255 with 32-byte point encodings:
//
//   PRF(k, x) = SHA-256( HashToGroup(x)^k )
//
// All functions are pure in their inputs plus the injected Rng.

namespace epmpd::crypto {

struct PrpKey {
  std::array<uint8_t, 16> bytes{};
  static PrpKey random(Rng& rng);
  auto operator<=>(const PrpKey&) const = default;
};

struct PrpBlock {
  std::array<uint8_t, 16> bytes{};
  auto operator<=>(const PrpBlock&) const = default;
};

struct PrpBlockHash {
  size_t operator()(const PrpBlock& b) const;
};

// Nonzero scalar of the ristretto255 group.
struct OprfKey {
  std::array<uint8_t, 32> scalar{};
  static OprfKey random(Rng& rng);
  auto operator<=>(const OprfKey&) const = default;
};

// 32-byte ristretto255 point encoding.
struct BlindedPoint {
  std::array<uint8_t, 32> bytes{};
  auto operator<=>(const BlindedPoint&) const = default;
};

struct BlindScalar {
  std::array<uint8_t, 32> bytes{};
};

struct PrfOutput {
  std::array<uint8_t, 32> bytes{};
  auto operator<=>(const PrfOutput&) const = default;
};

struct PrfOutputHash {
  size_t operator()(const PrfOutput& o) const;
};

// Reusable AES-128 schedule for one key; cheaper than re-deriving the
// schedule per block when a whole set is encrypted under the same key.
class PrpCipher {
 public:
  explicit PrpCipher(const PrpKey& key);
  ~PrpCipher();
  PrpCipher(const PrpCipher&) = delete;
  PrpCipher& operator=(const PrpCipher&) = delete;

  PrpBlock encrypt(const PlainBlock& in) const;
  PlainBlock decrypt(const PrpBlock& in) const;

 private:
  void* enc_ctx_;
  void* dec_ctx_;
};

PrpBlock prp_encrypt(const PrpKey& key, const Element& e,
                     const EncodeOptions& opts = {});
// Inverts the permutation and decodes the block. Digest blocks resolve
// through `digests`; UnknownDigest when the map is absent or misses.
Element prp_decrypt(const PrpKey& key, const PrpBlock& block,
                    const DigestMap* digests = nullptr);
DecodedBlock prp_decrypt_raw(const PrpKey& key, const PrpBlock& block);

// Blind: HashToGroup(x)^r for fresh nonzero r; r is returned for unblinding.
std::pair<BlindedPoint, BlindScalar> oprf_blind(const Element& e, Rng& rng);
// Eval: point^k. InvalidPoint on a non-canonical encoding.
BlindedPoint oprf_eval(const OprfKey& key, const BlindedPoint& point);
// Unblind: SHA-256(evaluated^(1/r)); independent of r.
PrfOutput oprf_unblind(const BlindedPoint& evaluated, const BlindScalar& blind);
// Direct evaluation without blinding; the equality target for the
// blinded pipeline.
PrfOutput oprf_local(const OprfKey& key, const Element& e);

bool is_valid_point(const BlindedPoint& point);

// Convergent key for the no-third-party variant: k_e = Hash(e), truncated
// to the PRP key size.
PrpKey hash_derived_key(const Element& e);

std::array<uint8_t, 32> sha256(BytesView data);

}  // namespace epmpd::crypto
