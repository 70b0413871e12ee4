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
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "epmpd/crypto.hpp"
#include "epmpd/element.hpp"
#include "epmpd/endpoint.hpp"
#include "epmpd/runtime.hpp"

// The three group-PSI variants, each computing for every client the vector
// of pairwise intersections with every client of the other group:
//
//   Type I   pairwise PRP keys; a third party matches equal ciphertexts
//   Type II  one OPRF key held by the third party; clients exchange
//            PRF-encrypted sets directly and match by index
//   Type III convergent encryption under hash-derived keys; no third party,
//            group-0 output only (high-entropy element universes)
//
// Party logic is written as per-role state machines over an Endpoint, so an
// in-process coordinator and TCP party processes drive identical byte
// sequences.

namespace epmpd::gpsi {

struct GroupAssignment {
  int group_id = 0;                 // 0 or 1
  std::vector<uint32_t> members;    // client indices, ascending
};

struct GpsiInstance {
  std::vector<uint32_t> group0;
  std::vector<uint32_t> group1;

  const std::vector<uint32_t>& group(int j) const {
    return j == 0 ? group0 : group1;
  }
  std::vector<uint32_t> all_members() const;
};

// (ciphertext, key, counterpart) kept by a client per encrypted element so
// a reported ciphertext routes back to its key and counterpart slot.
struct KeyTriple {
  crypto::PrpBlock ciphertext;
  crypto::PrpKey key;
  uint32_t counterpart_index = 0;
};

// Vector v of one element list per client of the other group.
struct IntersectionReport {
  uint32_t owner = 0;
  std::vector<uint32_t> counterparts;           // other-group order
  std::vector<std::vector<Element>> per_counterpart;

  const std::vector<Element>& list_for(uint32_t counterpart) const;
  // Union of all per-counterpart lists with the counterpart each element
  // was seen with.
  std::vector<std::pair<Element, uint32_t>> flattened() const;
};

using ReportMap = std::map<uint32_t, IntersectionReport>;

// Ciphertexts that occur at least twice across all submissions and occur
// in the recipient's own submission.
struct DupReport {
  std::vector<crypto::PrpBlock> ciphertexts;
};

// element -> PRF(k, element), reusable across protocol runs that share the
// third party's key. Elements are immutable, so entries never invalidate.
struct EncryptedSetCache {
  std::optional<crypto::OprfKey> key;
  std::map<uint32_t, std::unordered_map<Element, crypto::PrfOutput, ElementHash>>
      per_client;
};

struct GpsiOptions {
  // When false (one-sided), group 1 learns nothing: type II skips the
  // G0->G1 half of the exchange and G1 extraction; type I tee reports go
  // to group 0 only.
  bool both_sides = true;
  // Reject clients whose submitted set repeats an element.
  bool strict = true;
  EncodeOptions encode;
};

// --- standalone operations ------------------------------------------------

// Hash-grouping over the multiset union of all submissions; one report per
// submitter, in submission scan order.
std::vector<DupReport> tee_find_duplicates(
    const std::vector<std::vector<crypto::PrpBlock>>& submissions);

// Routes every reported ciphertext through its triple, decrypts, and files
// the element under the triple's counterpart slot. UnknownCiphertext when a
// ciphertext has no triple.
IntersectionReport extract_plaintext(const DupReport& report,
                                     const std::vector<KeyTriple>& triples,
                                     uint32_t owner,
                                     const std::vector<uint32_t>& counterparts,
                                     const DigestMap* digests = nullptr);

// --- coordinator-driven runs (in-process) ----------------------------------

// Endpoints for one protocol run; the orchestrator keeps them alive across
// levels so party randomness streams advance exactly as they would in
// separate processes.
struct EndpointSet {
  std::map<uint32_t, Endpoint*> clients;
  Endpoint* tee = nullptr;
};

ReportMap run_egpsi1_core(const GpsiInstance& inst,
                          const std::map<uint32_t, ClientSet>& sets,
                          const EndpointSet& eps, int level,
                          const GpsiOptions& opts);
// `requesters` lists the members performing their OPRF round-trip in this
// run (first-time participants); everyone else must already be cached.
ReportMap run_egpsi2_core(const GpsiInstance& inst,
                          const std::map<uint32_t, ClientSet>& sets,
                          const EndpointSet& eps, int level,
                          const GpsiOptions& opts, EncryptedSetCache& cache,
                          const std::vector<uint32_t>& requesters);
ReportMap run_egpsi3_core(const GpsiInstance& inst,
                          const std::map<uint32_t, ClientSet>& sets,
                          const EndpointSet& eps, int level,
                          const GpsiOptions& opts);

// Standalone runs: register the parties on `rt`, execute one instance, and
// return every recipient's report.
ReportMap egpsi1_run(const GpsiInstance& inst,
                     const std::map<uint32_t, ClientSet>& sets, Runtime& rt,
                     uint64_t seed, int level = 0,
                     const GpsiOptions& opts = {});

ReportMap egpsi2_run(const GpsiInstance& inst,
                     const std::map<uint32_t, ClientSet>& sets, Runtime& rt,
                     uint64_t seed, int level = 0, const GpsiOptions& opts = {},
                     EncryptedSetCache* cache = nullptr);

// Group-0 reports only.
ReportMap egpsi3_run(const GpsiInstance& inst,
                     const std::map<uint32_t, ClientSet>& sets, Runtime& rt,
                     uint64_t seed, int level = 0,
                     const GpsiOptions& opts = {});

// --- per-role state machines (shared by coordinator and socket drivers) ----

class Egpsi1Client {
 public:
  Egpsi1Client(uint32_t self, const ClientSet& set, const GpsiInstance& inst,
               int level, const GpsiOptions& opts);

  // Group-0 members draw one key per counterpart and transmit each over the
  // runtime's authenticated channel.
  void setup_send_keys(Endpoint& ep);
  void setup_recv_keys(Endpoint& ep);
  // Encrypts the whole set under every pair key and submits the ciphertexts
  // to the third party.
  void encrypt_and_submit(Endpoint& ep);
  IntersectionReport extract(Endpoint& ep);

  bool in_group0() const { return group_ == 0; }

 private:
  uint32_t self_;
  int group_;
  const ClientSet& set_;
  std::vector<uint32_t> counterparts_;
  int level_;
  GpsiOptions opts_;
  std::map<uint32_t, crypto::PrpKey> keys_;
  std::vector<KeyTriple> triples_;
  DigestMap digests_;
};

class Egpsi1Tee {
 public:
  Egpsi1Tee(const GpsiInstance& inst, int level, const GpsiOptions& opts)
      : inst_(inst), level_(level), opts_(opts) {}

  // Receives every submission, finds ciphertexts that appear more than
  // once, and returns each client its matching subset.
  void match_and_report(Endpoint& ep);

 private:
  const GpsiInstance& inst_;
  int level_;
  GpsiOptions opts_;
};

class Egpsi2Client {
 public:
  // A client performs exactly one OPRF round-trip, in the first run it
  // participates in (`requester` true there); afterwards every element it
  // still holds is served from its cache and the tee hears nothing more.
  Egpsi2Client(uint32_t self, const ClientSet& set, const GpsiInstance& inst,
               int level, const GpsiOptions& opts, bool requester,
               std::unordered_map<Element, crypto::PrfOutput, ElementHash>* cache);

  // One blinded point per uncached element. begin sends the request,
  // finish consumes the response; the split lets a coordinator interleave
  // the tee's service between the two halves.
  void begin_oprf(Endpoint& ep);
  void finish_oprf(Endpoint& ep);
  void oprf_encrypt(Endpoint& ep) {
    begin_oprf(ep);
    finish_oprf(ep);
  }
  // Group 0 sends before receiving and group 1 receives before sending, so
  // pairwise exchanges never head-of-line block over real sockets; the
  // split halves let a coordinator schedule the same order globally.
  void exchange_send(Endpoint& ep);
  void exchange_recv(Endpoint& ep);
  void exchange(Endpoint& ep) {
    if (group_ == 0) {
      exchange_send(ep);
      exchange_recv(ep);
    } else {
      exchange_recv(ep);
      exchange_send(ep);
    }
  }
  IntersectionReport extract(Endpoint& ep);

  bool in_group0() const { return group_ == 0; }

 private:
  uint32_t self_;
  int group_;
  const ClientSet& set_;
  std::vector<uint32_t> counterparts_;
  int level_;
  GpsiOptions opts_;
  bool requester_;
  std::unordered_map<Element, crypto::PrfOutput, ElementHash>* cache_;
  std::vector<size_t> missing_;
  std::vector<crypto::BlindScalar> blinds_;
  bool request_sent_ = false;
  std::vector<crypto::PrfOutput> prf_set_;
  std::map<uint32_t, std::vector<crypto::PrfOutput>> received_;
};

class Egpsi2Tee {
 public:
  Egpsi2Tee(const crypto::OprfKey& key, const GpsiInstance& inst, int level)
      : key_(key), inst_(inst), level_(level) {}

  // Answers one OPRF request per client that sent one.
  void serve_oprf(Endpoint& ep, const std::vector<uint32_t>& requesters);

 private:
  crypto::OprfKey key_;
  const GpsiInstance& inst_;
  int level_;
};

class Egpsi3Client {
 public:
  Egpsi3Client(uint32_t self, const ClientSet& set, const GpsiInstance& inst,
               int level, const GpsiOptions& opts);

  void broadcast_convergent(Endpoint& ep);   // group 1
  IntersectionReport find_intersections(Endpoint& ep);  // group 0

  bool in_group0() const { return group_ == 0; }

 private:
  uint32_t self_;
  int group_;
  const ClientSet& set_;
  std::vector<uint32_t> counterparts_;
  int level_;
  GpsiOptions opts_;
};

// --- payload codecs (normative wire layouts) -------------------------------

Bytes encode_block_array(const std::vector<crypto::PrpBlock>& blocks);
std::vector<crypto::PrpBlock> decode_block_array(BytesView payload);
Bytes encode_point_array(const std::vector<crypto::BlindedPoint>& pts);
std::vector<crypto::BlindedPoint> decode_point_array(BytesView payload);
Bytes encode_prf_array(const std::vector<crypto::PrfOutput>& outs);
std::vector<crypto::PrfOutput> decode_prf_array(BytesView payload);

// Raises ProtocolAbort when a set repeats an element (local-dedup
// precondition).
void require_locally_unique(uint32_t client, const ClientSet& set);

}  // namespace epmpd::gpsi
