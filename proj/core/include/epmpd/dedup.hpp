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
#include <vector>

#include "epmpd/egpsi.hpp"
#include "epmpd/element.hpp"
#include "epmpd/runtime.hpp"

// The EP-MPD orchestrator. Clients 1..m are the leaves of a binary tree;
// at level d, consecutive runs of up to 2^d clients form a cluster, split
// into group 0 (left subtree) and group 1 (right subtree). Each cluster
// runs one group-PSI instance and group-0 members delete the discovered
// duplicates, so every pair of clients is compared exactly once and each
// duplicated element survives only at its highest-indexed original holder.

namespace epmpd::dedup {

enum class Variant { I, II, III };

const char* variant_name(Variant v);
Variant variant_from_string(const std::string& s);

struct Cluster {
  std::vector<uint32_t> group0;
  std::vector<uint32_t> group1;
};

struct ClusterPlan {
  uint32_t client_count = 0;
  // levels[d-1] holds the clusters of tree level d, d = 1..ceil(log2 m).
  std::vector<std::vector<Cluster>> levels;

  uint64_t total_clusters() const;
};

// TooFewClients for client_count < 2. Singleton runs (every member on the
// left of the split) produce no cluster; total clusters = m - 1 for all m.
ClusterPlan build_cluster_plan(uint32_t client_count);

// Level at which each client first joins a cluster; 1 everywhere for
// power-of-two counts, later for clients stranded in incomplete subtrees.
std::map<uint32_t, int> entry_levels(const ClusterPlan& plan);

struct LocalDedupResult {
  ClientSet set;
  uint64_t removed_count = 0;
};

// Keeps first occurrences, preserving order of survivors.
LocalDedupResult local_dedup(const ClientSet& set);

struct Removal {
  uint32_t client = 0;
  Element element;
  uint32_t counterpart = 0;
};

struct DedupOutcome {
  std::vector<ClientSet> final_sets;  // [i-1] belongs to client i
  std::vector<Removal> removals;
  uint64_t invocations = 0;
};

struct DedupOptions {
  // strict: abort on within-client duplicates; lenient: local_dedup first
  // and record the drops.
  bool strict = true;
  // Verify the dynamic precondition that same-group sets are pairwise
  // disjoint when entering every level.
  bool check_group_disjoint = true;
  gpsi::GpsiOptions gpsi;
};

DedupOutcome epmpd_run(const std::vector<ClientSet>& sets, Variant variant,
                       Runtime& rt, uint64_t seed,
                       const DedupOptions& opts = {});

// The left-side deletion rule applied to one client's set: every reported
// element is removed once (input order preserved) and recorded against
// every counterpart it intersected.
void apply_report_deletions(uint32_t owner,
                            const gpsi::IntersectionReport& report,
                            ClientSet& set, std::vector<Removal>& removals);

// Canonical removal order shared by every producer of a DedupOutcome.
void sort_removals(std::vector<Removal>& removals);

// One two-party PSI (type I with singleton groups) per unordered pair;
// the lower index deletes, so outcomes match epmpd_run. invocations =
// m(m-1)/2.
DedupOutcome naive_pairwise_run(const std::vector<ClientSet>& sets,
                                Runtime& rt, uint64_t seed,
                                const DedupOptions& opts = {});

uint64_t naive_pair_count(uint32_t client_count);

}  // namespace epmpd::dedup
