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

#include "epmpd/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "epmpd/egpsi.hpp"

namespace epmpd::oracle {

dedup::DedupOutcome oracle_dedup(const std::vector<ClientSet>& sets) {
  std::unordered_map<Element, std::vector<uint32_t>, ElementHash> holders;
  for (size_t i = 0; i < sets.size(); i++) {
    for (const Element& e : sets[i]) {
      holders[e].push_back(static_cast<uint32_t>(i + 1));
    }
  }
  dedup::DedupOutcome out;
  out.final_sets.resize(sets.size());
  for (size_t i = 0; i < sets.size(); i++) {
    uint32_t me = static_cast<uint32_t>(i + 1);
    for (const Element& e : sets[i]) {
      const auto& hs = holders.at(e);
      uint32_t keeper = *std::max_element(hs.begin(), hs.end());
      if (keeper == me) {
        out.final_sets[i].push_back(e);
      } else {
        out.removals.push_back({me, e, keeper});
      }
    }
  }
  dedup::sort_removals(out.removals);
  return out;
}

std::vector<Element> intersect(const ClientSet& a, const ClientSet& b) {
  std::unordered_set<Element, ElementHash> in_a(a.begin(), a.end());
  std::set<Element> hits;
  for (const Element& e : b) {
    if (in_a.contains(e)) hits.insert(e);
  }
  return {hits.begin(), hits.end()};
}

namespace {

int phase_level(const std::string& phase) {
  // "d3:encrypt" -> 3; unqualified phases count as level 0.
  if (phase.size() < 2 || phase[0] != 'd') return 0;
  size_t colon = phase.find(':');
  if (colon == std::string::npos) return 0;
  try {
    return std::stoi(phase.substr(1, colon - 1));
  } catch (...) {
    return 0;
  }
}

// The canonical encoding as it would sit in a plaintext block: length tag
// followed by the payload. Scanning for the bare payload alone would
// false-positive inside random ciphertext bytes at test scale.
Bytes plaintext_pattern(const Element& e) {
  Bytes pattern;
  pattern.reserve(1 + e.bytes().size());
  pattern.push_back(static_cast<uint8_t>(
      std::min(e.bytes().size(), kInlineCapacity)));
  pattern.insert(pattern.end(), e.bytes().begin(), e.bytes().end());
  return pattern;
}

}  // namespace

AuditVerdict audit_leakage_type1(
    const Transcript& transcript,
    const std::vector<ClientSet>& ground_truth_sets) {
  AuditVerdict verdict;

  // Cross-group pairs are exactly the KEY_TRANSFER endpoints.
  std::set<std::pair<uint32_t, uint32_t>> pairs;
  std::map<uint32_t, std::unordered_map<crypto::PrpBlock, uint64_t,
                                        crypto::PrpBlockHash>>
      tee_view;
  std::vector<const TranscriptRecord*> tee_received;

  for (const TranscriptRecord& rec : transcript) {
    if (rec.type == MsgType::key_transfer) {
      pairs.emplace(std::min(rec.from.index, rec.to.index),
                    std::max(rec.from.index, rec.to.index));
    }
    if (rec.to.is_tee()) {
      tee_received.push_back(&rec);
      if (rec.type == MsgType::enc_set) {
        try {
          for (const auto& block : gpsi::decode_block_array(rec.payload)) {
            tee_view[rec.from.index][block]++;
          }
        } catch (const ProtocolAbort&) {
          verdict.violations.push_back("undecodable ENC_SET payload from " +
                                       rec.from.str());
        }
      } else {
        verdict.violations.push_back(
            std::string("tee received unexpected message type ") +
            msg_type_name(rec.type) + " from " + rec.from.str());
      }
    }
  }

  // (a) the tee's view determines every pairwise intersection cardinality.
  for (const auto& [i, l] : pairs) {
    uint64_t recomputed = 0;
    const auto& left = tee_view[i];
    const auto& right = tee_view[l];
    for (const auto& [block, count] : left) {
      auto it = right.find(block);
      if (it != right.end()) recomputed += std::min(count, it->second);
    }
    if (i > ground_truth_sets.size() || l > ground_truth_sets.size()) {
      verdict.violations.push_back("transcript names an unknown client");
      continue;
    }
    uint64_t truth =
        intersect(ground_truth_sets[i - 1], ground_truth_sets[l - 1]).size();
    if (recomputed != truth) {
      verdict.violations.push_back(
          "pair (" + std::to_string(i) + "," + std::to_string(l) +
          "): tee view yields " + std::to_string(recomputed) +
          ", ground truth " + std::to_string(truth));
    }
  }

  // (b) nothing the tee received contains a plaintext element encoding.
  std::vector<Bytes> patterns;
  for (const ClientSet& set : ground_truth_sets) {
    for (const Element& e : set) patterns.push_back(plaintext_pattern(e));
  }
  for (const TranscriptRecord* rec : tee_received) {
    for (const Bytes& pat : patterns) {
      if (contains_bytes(rec->payload, pat)) {
        verdict.violations.push_back("tee-received payload from " +
                                     rec->from.str() +
                                     " embeds a plaintext element encoding");
        break;
      }
    }
  }
  return verdict;
}

AuditVerdict audit_leakage_type2(const Transcript& transcript,
                                 const ExpectedOprfCounts& expected) {
  AuditVerdict verdict;

  struct Seen {
    uint64_t messages = 0;
    uint64_t points = 0;
    int level = 0;
  };
  std::map<uint32_t, Seen> seen;
  for (const TranscriptRecord& rec : transcript) {
    if (!rec.to.is_tee()) continue;
    if (rec.type != MsgType::oprf_req) {
      verdict.violations.push_back(
          std::string("tee received unexpected message type ") +
          msg_type_name(rec.type) + " from " + rec.from.str());
      continue;
    }
    std::vector<crypto::BlindedPoint> points;
    try {
      points = gpsi::decode_point_array(rec.payload);
    } catch (const ProtocolAbort&) {
      verdict.violations.push_back("undecodable OPRF_REQ payload from " +
                                   rec.from.str());
      continue;
    }
    for (const auto& p : points) {
      if (!crypto::is_valid_point(p)) {
        verdict.violations.push_back("OPRF_REQ from " + rec.from.str() +
                                     " carries an invalid group element");
        break;
      }
    }
    Seen& s = seen[rec.from.index];
    s.messages++;
    s.points += points.size();
    s.level = phase_level(rec.phase);
  }

  std::map<uint32_t, ExpectedOprfRequest> want;
  for (const ExpectedOprfRequest& req : expected.requests) {
    want[req.client] = req;
  }
  for (const auto& [client, req] : want) {
    const Seen& s = seen[client];
    if (s.messages != 1) {
      verdict.violations.push_back(
          "client " + std::to_string(client) + " sent " +
          std::to_string(s.messages) + " OPRF requests, expected exactly 1");
      continue;
    }
    if (s.points != req.points) {
      verdict.violations.push_back(
          "client " + std::to_string(client) + " sent " +
          std::to_string(s.points) + " points, expected " +
          std::to_string(req.points));
    }
    if (req.level != 0 && s.level != req.level) {
      verdict.violations.push_back(
          "client " + std::to_string(client) + " contacted the tee at level " +
          std::to_string(s.level) + ", expected its entry level " +
          std::to_string(req.level));
    }
  }
  for (const auto& [client, s] : seen) {
    if (!want.contains(client) && s.messages > 0) {
      verdict.violations.push_back("client " + std::to_string(client) +
                                   " contacted the tee unexpectedly");
    }
  }
  return verdict;
}

// --- transcript dump ----------------------------------------------------

namespace {
constexpr uint8_t kTranscriptMagic[4] = {'E', 'P', 'T', '1'};
}

void save_transcript(const Transcript& t, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  out.write(reinterpret_cast<const char*>(kTranscriptMagic), 4);
  for (const TranscriptRecord& rec : t) {
    Bytes record;
    record.push_back(static_cast<uint8_t>(rec.from.kind));
    put_u32_le(record, rec.from.index);
    record.push_back(static_cast<uint8_t>(rec.to.kind));
    put_u32_le(record, rec.to.index);
    record.push_back(static_cast<uint8_t>(rec.type));
    put_u32_le(record, static_cast<uint32_t>(rec.phase.size()));
    record.insert(record.end(), rec.phase.begin(), rec.phase.end());
    put_u64_le(record, rec.payload.size());
    record.insert(record.end(), rec.payload.begin(), rec.payload.end());

    Bytes framed;
    put_u64_le(framed, record.size());
    out.write(reinterpret_cast<const char*>(framed.data()),
              static_cast<std::streamsize>(framed.size()));
    out.write(reinterpret_cast<const char*>(record.data()),
              static_cast<std::streamsize>(record.size()));
  }
}

Transcript load_transcript(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open " + file.string());
  uint8_t magic[4];
  in.read(reinterpret_cast<char*>(magic), 4);
  if (!in || !std::equal(magic, magic + 4, kTranscriptMagic)) {
    throw Error("bad transcript magic in " + file.string());
  }
  Transcript t;
  for (;;) {
    uint8_t len_bytes[8];
    in.read(reinterpret_cast<char*>(len_bytes), 8);
    if (in.gcount() == 0) break;
    if (in.gcount() != 8) throw Error("truncated transcript record length");
    uint64_t len = get_u64_le(len_bytes);
    Bytes record(len);
    in.read(reinterpret_cast<char*>(record.data()),
            static_cast<std::streamsize>(len));
    if (static_cast<uint64_t>(in.gcount()) != len) {
      throw Error("truncated transcript record");
    }

    size_t pos = 0;
    auto need = [&](size_t n) {
      if (pos + n > record.size()) throw Error("malformed transcript record");
    };
    TranscriptRecord rec;
    need(5);
    rec.from.kind = static_cast<PartyKind>(record[pos]);
    rec.from.index = get_u32_le(record.data() + pos + 1);
    pos += 5;
    need(5);
    rec.to.kind = static_cast<PartyKind>(record[pos]);
    rec.to.index = get_u32_le(record.data() + pos + 1);
    pos += 5;
    need(1);
    rec.type = static_cast<MsgType>(record[pos]);
    pos += 1;
    need(4);
    uint32_t phase_len = get_u32_le(record.data() + pos);
    pos += 4;
    need(phase_len);
    rec.phase.assign(record.begin() + static_cast<long>(pos),
                     record.begin() + static_cast<long>(pos + phase_len));
    pos += phase_len;
    need(8);
    uint64_t payload_len = get_u64_le(record.data() + pos);
    pos += 8;
    need(payload_len);
    rec.payload.assign(record.begin() + static_cast<long>(pos),
                       record.begin() + static_cast<long>(pos + payload_len));
    t.push_back(std::move(rec));
  }
  return t;
}

std::string transcript_summary(const Transcript& t) {
  std::ostringstream os;
  os << t.size() << " messages\n";
  std::map<std::string, std::pair<uint64_t, uint64_t>> by_phase;
  for (const TranscriptRecord& rec : t) {
    auto& [count, bytes] = by_phase[rec.phase];
    count++;
    bytes += rec.payload.size();
  }
  for (const auto& [phase, stats] : by_phase) {
    os << "  " << phase << ": " << stats.first << " msgs, " << stats.second
       << " bytes\n";
  }
  return os.str();
}

}  // namespace epmpd::oracle
