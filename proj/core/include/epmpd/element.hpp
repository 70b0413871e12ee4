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
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "epmpd/bytes.hpp"

namespace epmpd {

// A deduplicatable record, held as its canonical byte encoding.
// 32-bit integers (the benchmark workload) encode as exactly 4 bytes,
// little-endian; text records encode as their raw UTF-8 bytes.
class Element {
 public:
  Element() = default;
  static Element from_u32(uint32_t v);
  static Element from_bytes(Bytes b) { return Element(std::move(b)); }
  static Element from_string(std::string_view s);

  const Bytes& bytes() const { return bytes_; }
  std::optional<uint32_t> as_u32() const;

  // Ascending canonical-encoding order; the tie-break order used in every
  // report and final set.
  auto operator<=>(const Element&) const = default;

 private:
  explicit Element(Bytes b) : bytes_(std::move(b)) {}
  Bytes bytes_;
};

struct ElementHash {
  size_t operator()(const Element& e) const;
};

using ClientSet = std::vector<Element>;

ClientSet u32_set(std::initializer_list<uint32_t> vals);

// --- 16-byte block codec -------------------------------------------------
//
// Layout of a plaintext PRP block:
//   byte 0       length tag: 0..14 inline payload length, or kDigestTag
//   bytes 1..    payload (inline canonical encoding, or 14-byte digest)
//   rest         zero padding
//
// Decryption under a wrong key yields a block that fails the tag/padding
// check with overwhelming probability, which is what MalformedPadding
// reports.

inline constexpr size_t kBlockSize = 16;
inline constexpr size_t kInlineCapacity = 14;
inline constexpr uint8_t kDigestTag = 0x20;

using PlainBlock = std::array<uint8_t, kBlockSize>;
using ElementDigest = std::array<uint8_t, kInlineCapacity>;

// Clients that hold oversize records resolve digests back to plaintext
// through this local map.
using DigestMap = std::map<ElementDigest, Element>;

struct EncodeOptions {
  // When false, elements whose canonical encoding exceeds kInlineCapacity
  // raise OversizeElement instead of falling back to a digest.
  bool allow_digest = true;
  // Populated with digest -> element for any fallback taken.
  DigestMap* digests = nullptr;
};

struct DecodedBlock {
  bool is_digest = false;
  Element element;        // valid when !is_digest
  ElementDigest digest{}; // valid when is_digest
};

ElementDigest element_digest(const Element& e);

PlainBlock encode_block(const Element& e, const EncodeOptions& opts = {});
// Throws MalformedPadding when the tag or padding is inconsistent.
DecodedBlock decode_block(const PlainBlock& b);

}  // namespace epmpd
