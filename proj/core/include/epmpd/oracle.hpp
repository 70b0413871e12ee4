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
#include <filesystem>
#include <string>
#include <vector>

#include "epmpd/dedup.hpp"
#include "epmpd/element.hpp"
#include "epmpd/runtime.hpp"

// Independent non-private references: ground truth for protocol
// correctness, and transcript auditors that bound what the third party
// could have learned from its view.

namespace epmpd::oracle {

// Non-private reference deduplication: every element is retained only by
// its maximum-index holder. This is the analytically derived consequence
// of the tree's left-deletes rule; the tests validate the derivation by
// exhaustive simulation rather than trusting it.
dedup::DedupOutcome oracle_dedup(const std::vector<ClientSet>& sets);

struct AuditVerdict {
  std::vector<std::string> violations;
  bool clean() const { return violations.empty(); }
};

// Type-I bound: the third party's view is the pairwise intersection
// cardinalities and nothing else. Recomputes |S_{0,i} ∩ S_{1,l}| from the
// ciphertext multisets the tee received and checks them against ground
// truth; scans every tee-received payload for plaintext canonical
// encodings.
AuditVerdict audit_leakage_type1(
    const Transcript& transcript,
    const std::vector<ClientSet>& ground_truth_sets);

// Type-II bound: the tee sees exactly one OPRF request of |S_i| valid
// group elements per client, at that client's tree entry level, and
// nothing at levels served from the warm cache.
struct ExpectedOprfRequest {
  uint32_t client = 0;
  uint64_t points = 0;
  int level = 1;  // first-participation level; 0 accepts standalone runs
};

struct ExpectedOprfCounts {
  std::vector<ExpectedOprfRequest> requests;
};

AuditVerdict audit_leakage_type2(const Transcript& transcript,
                                 const ExpectedOprfCounts& expected);

// Plain set-intersection ground truth used by every protocol test.
std::vector<Element> intersect(const ClientSet& a, const ClientSet& b);

// --- transcript dump --------------------------------------------------------
// Length-prefixed binary records, plus a human-readable summary.

void save_transcript(const Transcript& t, const std::filesystem::path& file);
Transcript load_transcript(const std::filesystem::path& file);
std::string transcript_summary(const Transcript& t);

}  // namespace epmpd::oracle
