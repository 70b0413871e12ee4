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

#include "epmpd/element.hpp"

// Synthetic workloads: per-client sets of 32-bit integers where every
// client shares the same number of unique duplicate elements with every
// other client. d = round(p*n/100) duplicates per client are split into
// floor(d/(m-1)) per pair, so no element ever appears in three clients.

namespace epmpd::data {

struct WorkloadSpec {
  uint32_t clients = 2;
  uint32_t set_size = 1;
  double dup_pct = 0.0;  // [0, 100]
  uint64_t seed = 0;
};

struct WorkloadMeta {
  uint64_t per_pair_share = 0;               // s
  std::vector<uint64_t> per_client_dups;     // s*(m-1) each
  std::vector<double> per_client_dup_pct;    // achieved percentage
  double achieved_dup_pct = 0.0;
};

struct Workload {
  WorkloadSpec spec;
  std::vector<ClientSet> sets;  // [i-1] belongs to client i
  WorkloadMeta meta;
};

// Deterministic in spec.seed. InfeasibleSpec when the per-pair shares
// cannot fit the set size or the value universe lacks headroom.
Workload generate(const WorkloadSpec& spec);

struct VerifyReport {
  std::vector<std::string> violations;
  // pairwise_intersections[i][j] = |S_{i+1} ∩ S_{j+1}| by brute force;
  // ground truth for the protocol tests.
  std::vector<std::vector<uint64_t>> pairwise_intersections;

  bool ok() const { return violations.empty(); }
};

// Recomputes pairwise intersections by brute force and checks the workload
// invariants: internally duplicate-free sets, no element in three or more
// clients, equal per-pair shares.
VerifyReport verify(const Workload& w);

// --- file format ------------------------------------------------------------
//
// One file per client, "client_<index>.txt":
//   epmpd-workload v1 <m> <n> <p> <seed>
//   <space-separated decimal u32 values>
// plus an adjacent workload.json with the achieved-duplication metadata.

void save_workload(const Workload& w, const std::filesystem::path& dir);
Workload load_workload(const std::filesystem::path& path);
ClientSet load_client_file(const std::filesystem::path& file);
std::filesystem::path client_file_name(const std::filesystem::path& dir,
                                       uint32_t index);

}  // namespace epmpd::data
