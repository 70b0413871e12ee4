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

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace epmpd {

// Deterministic random generator backed by a ChaCha20 keystream. A seeded
// instance replays bit-identically across platforms, which is what makes
// whole protocol runs reproducible from a single CLI seed. Unseeded
// instances draw their key from the OS entropy pool.
class Rng {
 public:
  // Key = SHA-256("epmpd.rng" || domain || seed), so independent domains
  // yield independent streams from one user-facing seed.
  static Rng seeded(uint64_t seed, std::string_view domain = "");
  static Rng system();

  void fill(std::span<uint8_t> out);
  uint64_t next_u64();
  // Uniform in [0, bound) via rejection sampling; bound > 0.
  uint64_t uniform(uint64_t bound);

  // Unbiased in-place Fisher-Yates. std::shuffle is implementation-defined,
  // so replay determinism needs our own.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; i--) {
      size_t j = static_cast<size_t>(uniform(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  Rng() = default;
  void refill();

  uint8_t key_[32] = {};
  uint64_t block_counter_ = 0;
  std::vector<uint8_t> buf_;
  size_t pos_ = 0;
};

}  // namespace epmpd
