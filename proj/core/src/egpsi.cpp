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

#include "epmpd/egpsi.hpp"

#include <algorithm>
#include <memory>
#include <unordered_map>
#include <unordered_set>

namespace epmpd::gpsi {

namespace {

int group_of(uint32_t client, const GpsiInstance& inst) {
  if (std::find(inst.group0.begin(), inst.group0.end(), client) !=
      inst.group0.end()) {
    return 0;
  }
  if (std::find(inst.group1.begin(), inst.group1.end(), client) !=
      inst.group1.end()) {
    return 1;
  }
  throw ProtocolAbort("client " + std::to_string(client) +
                      " not in either group");
}

void sort_report(IntersectionReport& r) {
  for (auto& list : r.per_counterpart) std::sort(list.begin(), list.end());
}

}  // namespace

std::vector<uint32_t> GpsiInstance::all_members() const {
  std::vector<uint32_t> all = group0;
  all.insert(all.end(), group1.begin(), group1.end());
  std::sort(all.begin(), all.end());
  return all;
}

const std::vector<Element>& IntersectionReport::list_for(
    uint32_t counterpart) const {
  for (size_t i = 0; i < counterparts.size(); i++) {
    if (counterparts[i] == counterpart) return per_counterpart[i];
  }
  throw ProtocolAbort("no report slot for counterpart " +
                      std::to_string(counterpart));
}

std::vector<std::pair<Element, uint32_t>> IntersectionReport::flattened()
    const {
  std::vector<std::pair<Element, uint32_t>> out;
  for (size_t i = 0; i < counterparts.size(); i++) {
    for (const Element& e : per_counterpart[i]) {
      out.emplace_back(e, counterparts[i]);
    }
  }
  return out;
}

void require_locally_unique(uint32_t client, const ClientSet& set) {
  std::unordered_set<Element, ElementHash> seen;
  seen.reserve(set.size());
  for (const Element& e : set) {
    if (!seen.insert(e).second) {
      throw ProtocolAbort("client " + std::to_string(client) +
                          " submitted a locally duplicated element");
    }
  }
}

// --- payload codecs ---------------------------------------------------------

namespace {

template <typename T, size_t N>
Bytes encode_array(const std::vector<T>& items) {
  Bytes out;
  out.reserve(4 + items.size() * N);
  put_u32_le(out, static_cast<uint32_t>(items.size()));
  for (const T& item : items) {
    out.insert(out.end(), item.bytes.begin(), item.bytes.end());
  }
  return out;
}

template <typename T, size_t N>
std::vector<T> decode_array(BytesView payload, const char* what) {
  if (payload.size() < 4) {
    throw ProtocolAbort(std::string("short ") + what + " payload");
  }
  uint32_t count = get_u32_le(payload.data());
  if (payload.size() != 4 + static_cast<size_t>(count) * N) {
    throw ProtocolAbort(std::string("bad ") + what + " payload length");
  }
  std::vector<T> items(count);
  for (uint32_t i = 0; i < count; i++) {
    std::copy_n(payload.data() + 4 + static_cast<size_t>(i) * N, N,
                items[i].bytes.begin());
  }
  return items;
}

}  // namespace

Bytes encode_block_array(const std::vector<crypto::PrpBlock>& blocks) {
  return encode_array<crypto::PrpBlock, kBlockSize>(blocks);
}
std::vector<crypto::PrpBlock> decode_block_array(BytesView payload) {
  return decode_array<crypto::PrpBlock, kBlockSize>(payload, "block array");
}
Bytes encode_point_array(const std::vector<crypto::BlindedPoint>& pts) {
  return encode_array<crypto::BlindedPoint, 32>(pts);
}
std::vector<crypto::BlindedPoint> decode_point_array(BytesView payload) {
  return decode_array<crypto::BlindedPoint, 32>(payload, "point array");
}
Bytes encode_prf_array(const std::vector<crypto::PrfOutput>& outs) {
  return encode_array<crypto::PrfOutput, 32>(outs);
}
std::vector<crypto::PrfOutput> decode_prf_array(BytesView payload) {
  return decode_array<crypto::PrfOutput, 32>(payload, "prf array");
}

// --- standalone operations ----------------------------------------------

std::vector<DupReport> tee_find_duplicates(
    const std::vector<std::vector<crypto::PrpBlock>>& submissions) {
  std::unordered_map<crypto::PrpBlock, uint32_t, crypto::PrpBlockHash> counts;
  for (const auto& sub : submissions) {
    for (const auto& block : sub) counts[block]++;
  }
  std::vector<DupReport> reports(submissions.size());
  for (size_t i = 0; i < submissions.size(); i++) {
    std::unordered_set<crypto::PrpBlock, crypto::PrpBlockHash> emitted;
    for (const auto& block : submissions[i]) {
      if (counts[block] >= 2 && emitted.insert(block).second) {
        reports[i].ciphertexts.push_back(block);
      }
    }
  }
  return reports;
}

IntersectionReport extract_plaintext(const DupReport& report,
                                     const std::vector<KeyTriple>& triples,
                                     uint32_t owner,
                                     const std::vector<uint32_t>& counterparts,
                                     const DigestMap* digests) {
  std::unordered_map<crypto::PrpBlock, const KeyTriple*, crypto::PrpBlockHash>
      by_ciphertext;
  by_ciphertext.reserve(triples.size());
  for (const KeyTriple& t : triples) by_ciphertext[t.ciphertext] = &t;

  std::unordered_map<uint32_t, size_t> slot;
  IntersectionReport out;
  out.owner = owner;
  out.counterparts = counterparts;
  out.per_counterpart.resize(counterparts.size());
  for (size_t i = 0; i < counterparts.size(); i++) slot[counterparts[i]] = i;

  for (const crypto::PrpBlock& c : report.ciphertexts) {
    auto it = by_ciphertext.find(c);
    if (it == by_ciphertext.end()) {
      throw UnknownCiphertext("reported ciphertext has no key triple");
    }
    const KeyTriple& t = *it->second;
    auto s = slot.find(t.counterpart_index);
    if (s == slot.end()) {
      throw ProtocolAbort("triple names an unknown counterpart");
    }
    out.per_counterpart[s->second].push_back(
        crypto::prp_decrypt(t.key, c, digests));
  }
  sort_report(out);
  return out;
}

// --- type I -----------------------------------------------------------------

Egpsi1Client::Egpsi1Client(uint32_t self, const ClientSet& set,
                           const GpsiInstance& inst, int level,
                           const GpsiOptions& opts)
    : self_(self),
      group_(group_of(self, inst)),
      set_(set),
      counterparts_(inst.group(1 - group_)),
      level_(level),
      opts_(opts) {}

void Egpsi1Client::setup_send_keys(Endpoint& ep) {
  Phase phase{kPhaseSetup, level_};
  std::vector<std::pair<uint32_t, crypto::PrpKey>> fresh;
  ep.timed(phase, [&] {
    for (uint32_t l : counterparts_) {
      crypto::PrpKey k = crypto::PrpKey::random(ep.rng());
      keys_[l] = k;
      fresh.emplace_back(l, k);
    }
  });
  for (auto& [l, k] : fresh) {
    ep.send(PartyId::client(l), MsgType::key_transfer,
            Bytes(k.bytes.begin(), k.bytes.end()), phase);
  }
}

void Egpsi1Client::setup_recv_keys(Endpoint& ep) {
  Phase phase{kPhaseSetup, level_};
  for (uint32_t i : counterparts_) {
    Bytes payload = ep.recv(PartyId::client(i), MsgType::key_transfer, phase);
    if (payload.size() != 16) throw ProtocolAbort("bad KEY_TRANSFER length");
    crypto::PrpKey k;
    std::copy(payload.begin(), payload.end(), k.bytes.begin());
    keys_[i] = k;
  }
}

void Egpsi1Client::encrypt_and_submit(Endpoint& ep) {
  Phase phase{kPhaseEncrypt, level_};
  if (opts_.strict) require_locally_unique(self_, set_);
  std::vector<crypto::PrpBlock> submission;
  ep.timed(phase, [&] {
    submission.reserve(counterparts_.size() * set_.size());
    triples_.reserve(counterparts_.size() * set_.size());
    EncodeOptions enc = opts_.encode;
    enc.digests = &digests_;
    for (uint32_t l : counterparts_) {
      crypto::PrpCipher cipher(keys_.at(l));
      for (const Element& e : set_) {
        crypto::PrpBlock block = cipher.encrypt(encode_block(e, enc));
        submission.push_back(block);
        triples_.push_back({block, keys_.at(l), l});
      }
    }
    ep.counters().prp_calls += submission.size();
  });
  ep.send(PartyId::tee(), MsgType::enc_set, encode_block_array(submission),
          phase);
}

IntersectionReport Egpsi1Client::extract(Endpoint& ep) {
  Phase phase{kPhaseExtract, level_};
  Bytes payload = ep.recv(PartyId::tee(), MsgType::dup_report, phase);
  return ep.timed(phase, [&] {
    DupReport report{decode_block_array(payload)};
    return extract_plaintext(report, triples_, self_, counterparts_,
                             &digests_);
  });
}

void Egpsi1Tee::match_and_report(Endpoint& ep) {
  Phase enc_phase{kPhaseEncrypt, level_};
  Phase dedup_phase{kPhaseTeeDedup, level_};

  std::vector<uint32_t> members = inst_.all_members();
  std::vector<std::vector<crypto::PrpBlock>> submissions;
  submissions.reserve(members.size());
  for (uint32_t c : members) {
    submissions.push_back(decode_block_array(
        ep.recv(PartyId::client(c), MsgType::enc_set, enc_phase)));
  }

  std::vector<DupReport> reports = ep.timed(
      dedup_phase, [&] { return tee_find_duplicates(submissions); });

  for (size_t i = 0; i < members.size(); i++) {
    if (!opts_.both_sides && group_of(members[i], inst_) != 0) continue;
    ep.send(PartyId::client(members[i]), MsgType::dup_report,
            encode_block_array(reports[i].ciphertexts), dedup_phase);
  }
}

// --- type II ----------------------------------------------------------------

Egpsi2Client::Egpsi2Client(
    uint32_t self, const ClientSet& set, const GpsiInstance& inst, int level,
    const GpsiOptions& opts, bool requester,
    std::unordered_map<Element, crypto::PrfOutput, ElementHash>* cache)
    : self_(self),
      group_(group_of(self, inst)),
      set_(set),
      counterparts_(inst.group(1 - group_)),
      level_(level),
      opts_(opts),
      requester_(requester),
      cache_(cache) {}

void Egpsi2Client::begin_oprf(Endpoint& ep) {
  Phase phase{kPhaseEncrypt, level_};
  if (opts_.strict) require_locally_unique(self_, set_);

  std::vector<crypto::BlindedPoint> points;
  prf_set_.assign(set_.size(), crypto::PrfOutput{});
  missing_.clear();
  blinds_.clear();

  ep.timed(phase, [&] {
    for (size_t i = 0; i < set_.size(); i++) {
      if (cache_ != nullptr) {
        auto it = cache_->find(set_[i]);
        if (it != cache_->end()) {
          prf_set_[i] = it->second;
          continue;
        }
      }
      missing_.push_back(i);
    }
    if (!missing_.empty()) {
      points.reserve(missing_.size());
      blinds_.reserve(missing_.size());
      for (size_t i : missing_) {
        auto [p, r] = crypto::oprf_blind(set_[i], ep.rng());
        points.push_back(p);
        blinds_.push_back(r);
      }
    }
  });

  // A warm cache makes the OPRF round unnecessary; non-requesters skip it
  // entirely rather than sending an empty request.
  if (!requester_) {
    if (!missing_.empty()) {
      throw ProtocolAbort("client " + std::to_string(self_) +
                          " missing cache entries in a warm-cache run");
    }
    request_sent_ = false;
    return;
  }

  ep.send(PartyId::tee(), MsgType::oprf_req, encode_point_array(points),
          phase);
  request_sent_ = true;
}

void Egpsi2Client::finish_oprf(Endpoint& ep) {
  if (!request_sent_) return;
  Phase phase{kPhaseEncrypt, level_};
  Bytes resp = ep.recv(PartyId::tee(), MsgType::oprf_resp, phase);
  ep.timed(phase, [&] {
    std::vector<crypto::BlindedPoint> evaluated = decode_point_array(resp);
    if (evaluated.size() != missing_.size()) {
      throw ProtocolAbort("OPRF_RESP count mismatch");
    }
    for (size_t j = 0; j < missing_.size(); j++) {
      crypto::PrfOutput out = crypto::oprf_unblind(evaluated[j], blinds_[j]);
      prf_set_[missing_[j]] = out;
      if (cache_ != nullptr) cache_->emplace(set_[missing_[j]], out);
    }
    ep.counters().oprf_rounds += missing_.size();
  });
}

void Egpsi2Client::exchange_send(Endpoint& ep) {
  if (!opts_.both_sides && group_ == 0) return;  // one-sided: G1 -> G0 only
  Phase phase{kPhaseExchange, level_};
  Bytes mine = encode_prf_array(prf_set_);
  for (uint32_t t : counterparts_) {
    ep.send(PartyId::client(t), MsgType::prf_set, mine, phase);
  }
}

void Egpsi2Client::exchange_recv(Endpoint& ep) {
  if (!opts_.both_sides && group_ == 1) return;
  Phase phase{kPhaseExchange, level_};
  for (uint32_t t : counterparts_) {
    received_[t] = decode_prf_array(
        ep.recv(PartyId::client(t), MsgType::prf_set, phase));
  }
}

IntersectionReport Egpsi2Client::extract(Endpoint& ep) {
  Phase phase{kPhaseExtract, level_};
  return ep.timed(phase, [&] {
    IntersectionReport out;
    out.owner = self_;
    out.counterparts = counterparts_;
    out.per_counterpart.resize(counterparts_.size());
    for (size_t t = 0; t < counterparts_.size(); t++) {
      auto it = received_.find(counterparts_[t]);
      if (it == received_.end()) continue;  // one-sided: nothing received
      std::unordered_set<crypto::PrfOutput, crypto::PrfOutputHash> theirs(
          it->second.begin(), it->second.end());
      for (size_t l = 0; l < set_.size(); l++) {
        if (theirs.contains(prf_set_[l])) {
          out.per_counterpart[t].push_back(set_[l]);
        }
      }
    }
    sort_report(out);
    return out;
  });
}

void Egpsi2Tee::serve_oprf(Endpoint& ep,
                           const std::vector<uint32_t>& requesters) {
  Phase phase{kPhaseEncrypt, level_};
  for (uint32_t c : requesters) {
    Bytes req = ep.recv(PartyId::client(c), MsgType::oprf_req, phase);
    Bytes resp = ep.timed(phase, [&] {
      std::vector<crypto::BlindedPoint> points = decode_point_array(req);
      std::vector<crypto::BlindedPoint> evaluated;
      evaluated.reserve(points.size());
      for (const auto& p : points) {
        evaluated.push_back(crypto::oprf_eval(key_, p));
      }
      ep.counters().oprf_rounds += points.size();
      return encode_point_array(evaluated);
    });
    ep.send(PartyId::client(c), MsgType::oprf_resp, std::move(resp), phase);
  }
}

// --- type III ---------------------------------------------------------------

Egpsi3Client::Egpsi3Client(uint32_t self, const ClientSet& set,
                           const GpsiInstance& inst, int level,
                           const GpsiOptions& opts)
    : self_(self),
      group_(group_of(self, inst)),
      set_(set),
      counterparts_(inst.group(1 - group_)),
      level_(level),
      opts_(opts) {}

void Egpsi3Client::broadcast_convergent(Endpoint& ep) {
  Phase phase{kPhaseEncrypt, level_};
  if (opts_.strict) require_locally_unique(self_, set_);
  std::vector<crypto::PrpBlock> blocks;
  ep.timed(phase, [&] {
    blocks.reserve(set_.size());
    for (const Element& e : set_) {
      crypto::PrpKey k = crypto::hash_derived_key(e);
      blocks.push_back(
          crypto::PrpCipher(k).encrypt(encode_block(e, opts_.encode)));
    }
    ep.counters().hash_calls += set_.size();
    ep.counters().prp_calls += set_.size();
  });
  Bytes payload = encode_block_array(blocks);
  for (uint32_t t : counterparts_) {
    ep.send(PartyId::client(t), MsgType::set_broadcast, payload, phase);
  }
}

IntersectionReport Egpsi3Client::find_intersections(Endpoint& ep) {
  Phase enc_phase{kPhaseEncrypt, level_};
  Phase ext_phase{kPhaseExtract, level_};
  if (opts_.strict) require_locally_unique(self_, set_);

  std::vector<crypto::PrpBlock> own_blocks;
  ep.timed(enc_phase, [&] {
    own_blocks.reserve(set_.size());
    for (const Element& e : set_) {
      crypto::PrpKey k = crypto::hash_derived_key(e);
      own_blocks.push_back(
          crypto::PrpCipher(k).encrypt(encode_block(e, opts_.encode)));
    }
    ep.counters().hash_calls += set_.size();
    ep.counters().prp_calls += set_.size();
  });

  IntersectionReport out;
  out.owner = self_;
  out.counterparts = counterparts_;
  out.per_counterpart.resize(counterparts_.size());
  for (size_t t = 0; t < counterparts_.size(); t++) {
    Bytes payload = ep.recv(PartyId::client(counterparts_[t]),
                            MsgType::set_broadcast, ext_phase);
    ep.timed(ext_phase, [&] {
      std::vector<crypto::PrpBlock> theirs = decode_block_array(payload);
      std::unordered_set<crypto::PrpBlock, crypto::PrpBlockHash> lookup(
          theirs.begin(), theirs.end());
      for (size_t l = 0; l < set_.size(); l++) {
        if (lookup.contains(own_blocks[l])) {
          out.per_counterpart[t].push_back(set_[l]);
        }
      }
    });
  }
  sort_report(out);
  return out;
}

// --- coordinator-driven runs -------------------------------------------------

namespace {

void check_instance(const GpsiInstance& inst,
                    const std::map<uint32_t, ClientSet>& sets) {
  if (inst.group0.empty() || inst.group1.empty()) {
    throw ProtocolAbort("both groups need at least one member");
  }
  for (uint32_t c : inst.all_members()) {
    if (!sets.contains(c)) {
      throw ProtocolAbort("no input set for client " + std::to_string(c));
    }
  }
}

}  // namespace

ReportMap run_egpsi1_core(const GpsiInstance& inst,
                          const std::map<uint32_t, ClientSet>& sets,
                          const EndpointSet& eps, int level,
                          const GpsiOptions& opts) {
  check_instance(inst, sets);
  std::map<uint32_t, Egpsi1Client> clients;
  for (uint32_t c : inst.all_members()) {
    clients.emplace(c, Egpsi1Client(c, sets.at(c), inst, level, opts));
  }
  for (uint32_t i : inst.group0) clients.at(i).setup_send_keys(*eps.clients.at(i));
  for (uint32_t l : inst.group1) clients.at(l).setup_recv_keys(*eps.clients.at(l));
  for (auto& [c, cl] : clients) cl.encrypt_and_submit(*eps.clients.at(c));

  Egpsi1Tee tee(inst, level, opts);
  tee.match_and_report(*eps.tee);

  ReportMap reports;
  for (auto& [c, cl] : clients) {
    if (!opts.both_sides && !cl.in_group0()) continue;
    reports.emplace(c, cl.extract(*eps.clients.at(c)));
  }
  return reports;
}

ReportMap run_egpsi2_core(const GpsiInstance& inst,
                          const std::map<uint32_t, ClientSet>& sets,
                          const EndpointSet& eps, int level,
                          const GpsiOptions& opts, EncryptedSetCache& cache,
                          const std::vector<uint32_t>& requesters) {
  check_instance(inst, sets);
  if (!cache.key.has_value()) {
    cache.key = crypto::OprfKey::random(eps.tee->rng());
  }

  auto is_requester = [&](uint32_t c) {
    return std::find(requesters.begin(), requesters.end(), c) !=
           requesters.end();
  };

  std::map<uint32_t, Egpsi2Client> clients;
  for (uint32_t c : inst.all_members()) {
    clients.emplace(c, Egpsi2Client(c, sets.at(c), inst, level, opts,
                                    is_requester(c), &cache.per_client[c]));
  }

  // Clients and tee interact sequentially: each client's request is served
  // before the next client proceeds.
  Egpsi2Tee tee(*cache.key, inst, level);
  for (uint32_t c : inst.all_members()) {
    clients.at(c).begin_oprf(*eps.clients.at(c));
    if (is_requester(c)) tee.serve_oprf(*eps.tee, {c});
    clients.at(c).finish_oprf(*eps.clients.at(c));
  }

  for (uint32_t c : inst.group0) clients.at(c).exchange_send(*eps.clients.at(c));
  for (uint32_t c : inst.group1) clients.at(c).exchange_recv(*eps.clients.at(c));
  for (uint32_t c : inst.group1) clients.at(c).exchange_send(*eps.clients.at(c));
  for (uint32_t c : inst.group0) clients.at(c).exchange_recv(*eps.clients.at(c));

  ReportMap reports;
  for (auto& [c, cl] : clients) {
    if (!opts.both_sides && !cl.in_group0()) continue;
    reports.emplace(c, cl.extract(*eps.clients.at(c)));
  }
  return reports;
}

ReportMap run_egpsi3_core(const GpsiInstance& inst,
                          const std::map<uint32_t, ClientSet>& sets,
                          const EndpointSet& eps, int level,
                          const GpsiOptions& opts) {
  check_instance(inst, sets);
  std::map<uint32_t, Egpsi3Client> clients;
  for (uint32_t c : inst.all_members()) {
    clients.emplace(c, Egpsi3Client(c, sets.at(c), inst, level, opts));
  }
  for (uint32_t c : inst.group1) {
    clients.at(c).broadcast_convergent(*eps.clients.at(c));
  }
  ReportMap reports;
  for (uint32_t c : inst.group0) {
    reports.emplace(c, clients.at(c).find_intersections(*eps.clients.at(c)));
  }
  return reports;
}

// --- standalone wrappers ------------------------------------------------------

namespace {

struct StandaloneEndpoints {
  std::vector<std::unique_ptr<InprocEndpoint>> storage;
  EndpointSet set;

  StandaloneEndpoints(const GpsiInstance& inst, Runtime& rt, uint64_t seed,
                      bool with_tee) {
    for (uint32_t c : inst.all_members()) {
      PartyId id = rt.register_party(PartyKind::client, c);
      storage.push_back(
          std::make_unique<InprocEndpoint>(rt, id, party_rng(seed, id)));
      set.clients[c] = storage.back().get();
    }
    if (with_tee) {
      PartyId id = rt.register_party(PartyKind::tee, 0);
      storage.push_back(
          std::make_unique<InprocEndpoint>(rt, id, party_rng(seed, id)));
      set.tee = storage.back().get();
    }
  }
};

}  // namespace

ReportMap egpsi1_run(const GpsiInstance& inst,
                     const std::map<uint32_t, ClientSet>& sets, Runtime& rt,
                     uint64_t seed, int level, const GpsiOptions& opts) {
  StandaloneEndpoints eps(inst, rt, seed, /*with_tee=*/true);
  rt.add_invocations(1);
  return run_egpsi1_core(inst, sets, eps.set, level, opts);
}

ReportMap egpsi2_run(const GpsiInstance& inst,
                     const std::map<uint32_t, ClientSet>& sets, Runtime& rt,
                     uint64_t seed, int level, const GpsiOptions& opts,
                     EncryptedSetCache* cache) {
  StandaloneEndpoints eps(inst, rt, seed, /*with_tee=*/true);
  rt.add_invocations(1);
  EncryptedSetCache local;
  EncryptedSetCache& effective = cache != nullptr ? *cache : local;

  // With a fully populated cache no member needs the tee at all; otherwise
  // every member runs its single OPRF round here.
  bool warm = cache != nullptr;
  if (warm) {
    for (uint32_t c : inst.all_members()) {
      const auto& client_cache = effective.per_client[c];
      for (const Element& e : sets.at(c)) {
        if (!client_cache.contains(e)) {
          warm = false;
          break;
        }
      }
      if (!warm) break;
    }
  }
  std::vector<uint32_t> requesters = warm ? std::vector<uint32_t>{}
                                          : inst.all_members();
  return run_egpsi2_core(inst, sets, eps.set, level, opts, effective,
                         requesters);
}

ReportMap egpsi3_run(const GpsiInstance& inst,
                     const std::map<uint32_t, ClientSet>& sets, Runtime& rt,
                     uint64_t seed, int level, const GpsiOptions& opts) {
  StandaloneEndpoints eps(inst, rt, seed, /*with_tee=*/false);
  rt.add_invocations(1);
  return run_egpsi3_core(inst, sets, eps.set, level, opts);
}

}  // namespace epmpd::gpsi
