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

#include "epmpd/element.hpp"

#include <sodium.h>

#include <cstring>

#include "epmpd/errors.hpp"

namespace epmpd {

Element Element::from_u32(uint32_t v) {
  Bytes b(4);
  for (int i = 0; i < 4; i++) b[i] = static_cast<uint8_t>(v >> (8 * i));
  return Element(std::move(b));
}

Element Element::from_string(std::string_view s) {
  return Element(Bytes(s.begin(), s.end()));
}

std::optional<uint32_t> Element::as_u32() const {
  if (bytes_.size() != 4) return std::nullopt;
  return get_u32_le(bytes_.data());
}

ClientSet u32_set(std::initializer_list<uint32_t> vals) {
  ClientSet s;
  s.reserve(vals.size());
  for (uint32_t v : vals) s.push_back(Element::from_u32(v));
  return s;
}

size_t ElementHash::operator()(const Element& e) const {
  // FNV-1a; keys are short canonical encodings.
  uint64_t h = 1469598103934665603ull;
  for (uint8_t b : e.bytes()) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return static_cast<size_t>(h);
}

ElementDigest element_digest(const Element& e) {
  unsigned char full[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(full, e.bytes().data(), e.bytes().size());
  ElementDigest d;
  std::memcpy(d.data(), full, d.size());
  return d;
}

PlainBlock encode_block(const Element& e, const EncodeOptions& opts) {
  PlainBlock block{};
  const Bytes& enc = e.bytes();
  if (enc.size() <= kInlineCapacity) {
    block[0] = static_cast<uint8_t>(enc.size());
    std::memcpy(block.data() + 1, enc.data(), enc.size());
    return block;
  }
  if (!opts.allow_digest) {
    throw OversizeElement("element encoding of " + std::to_string(enc.size()) +
                          " bytes exceeds block capacity");
  }
  ElementDigest d = element_digest(e);
  if (opts.digests) opts.digests->emplace(d, e);
  block[0] = kDigestTag;
  std::memcpy(block.data() + 1, d.data(), d.size());
  return block;
}

DecodedBlock decode_block(const PlainBlock& b) {
  uint8_t tag = b[0];
  size_t payload_len;
  bool is_digest = false;
  if (tag <= kInlineCapacity) {
    payload_len = tag;
  } else if (tag == kDigestTag) {
    payload_len = kInlineCapacity;
    is_digest = true;
  } else {
    throw MalformedPadding("bad length tag");
  }
  for (size_t i = 1 + payload_len; i < kBlockSize; i++) {
    if (b[i] != 0) throw MalformedPadding("nonzero padding");
  }
  DecodedBlock out;
  out.is_digest = is_digest;
  if (is_digest) {
    std::memcpy(out.digest.data(), b.data() + 1, out.digest.size());
  } else {
    out.element =
        Element::from_bytes(Bytes(b.begin() + 1, b.begin() + 1 + payload_len));
  }
  return out;
}

}  // namespace epmpd
