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

#include "epmpd/rng.hpp"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

namespace epmpd {

namespace {
constexpr size_t kBufBlocks = 64;  // 4 KiB of keystream per refill

void ensure_sodium() {
  if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
}
}  // namespace

Rng Rng::seeded(uint64_t seed, std::string_view domain) {
  ensure_sodium();
  Rng rng;
  crypto_hash_sha256_state st;
  crypto_hash_sha256_init(&st);
  static constexpr char kLabel[] = "epmpd.rng";
  crypto_hash_sha256_update(&st,
                            reinterpret_cast<const unsigned char*>(kLabel),
                            sizeof(kLabel) - 1);
  crypto_hash_sha256_update(
      &st, reinterpret_cast<const unsigned char*>(domain.data()),
      domain.size());
  uint8_t seed_le[8];
  for (int i = 0; i < 8; i++) seed_le[i] = static_cast<uint8_t>(seed >> (8 * i));
  crypto_hash_sha256_update(&st, seed_le, sizeof(seed_le));
  crypto_hash_sha256_final(&st, rng.key_);
  return rng;
}

Rng Rng::system() {
  ensure_sodium();
  Rng rng;
  randombytes_buf(rng.key_, sizeof(rng.key_));
  return rng;
}

void Rng::refill() {
  buf_.assign(kBufBlocks * 64, 0);
  uint8_t nonce[8];
  for (int i = 0; i < 8; i++)
    nonce[i] = static_cast<uint8_t>(block_counter_ >> (8 * i));
  crypto_stream_chacha20(buf_.data(), buf_.size(), nonce, key_);
  block_counter_++;
  pos_ = 0;
}

void Rng::fill(std::span<uint8_t> out) {
  size_t done = 0;
  while (done < out.size()) {
    if (pos_ >= buf_.size()) refill();
    size_t take = std::min(out.size() - done, buf_.size() - pos_);
    std::memcpy(out.data() + done, buf_.data() + pos_, take);
    pos_ += take;
    done += take;
  }
}

uint64_t Rng::next_u64() {
  uint8_t b[8];
  fill(b);
  uint64_t v = 0;
  for (int i = 7; i >= 0; i--) v = v << 8 | b[i];
  return v;
}

uint64_t Rng::uniform(uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform: zero bound");
  uint64_t threshold = -bound % bound;  // 2^64 mod bound
  for (;;) {
    uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

}  // namespace epmpd
