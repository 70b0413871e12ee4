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

#include "epmpd/dedup.hpp"

#include <algorithm>
#include <memory>
#include <unordered_set>

namespace epmpd::dedup {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::I: return "I";
    case Variant::II: return "II";
    case Variant::III: return "III";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "I" || s == "i" || s == "1") return Variant::I;
  if (s == "II" || s == "ii" || s == "2") return Variant::II;
  if (s == "III" || s == "iii" || s == "3") return Variant::III;
  throw Error("unknown variant '" + s + "'");
}

uint64_t ClusterPlan::total_clusters() const {
  uint64_t n = 0;
  for (const auto& level : levels) n += level.size();
  return n;
}

ClusterPlan build_cluster_plan(uint32_t client_count) {
  if (client_count < 2) {
    throw TooFewClients("need at least 2 clients, got " +
                        std::to_string(client_count));
  }
  ClusterPlan plan;
  plan.client_count = client_count;
  for (uint64_t span = 2; span / 2 < client_count; span *= 2) {
    std::vector<Cluster> level;
    for (uint64_t lo = 1; lo <= client_count; lo += span) {
      // Split at the subtree midpoint, not at half the present members:
      // that keeps every pair of clients meeting cross-group at exactly
      // one level even in incomplete subtrees.
      uint64_t mid = lo + span / 2;
      uint64_t hi = std::min<uint64_t>(lo + span, client_count + 1);
      if (mid >= hi) continue;  // right subtree empty; nothing to compare
      Cluster c;
      for (uint64_t i = lo; i < mid; i++)
        c.group0.push_back(static_cast<uint32_t>(i));
      for (uint64_t i = mid; i < hi; i++)
        c.group1.push_back(static_cast<uint32_t>(i));
      level.push_back(std::move(c));
    }
    plan.levels.push_back(std::move(level));
  }
  return plan;
}

std::map<uint32_t, int> entry_levels(const ClusterPlan& plan) {
  std::map<uint32_t, int> levels;
  for (size_t d = 0; d < plan.levels.size(); d++) {
    for (const Cluster& cluster : plan.levels[d]) {
      for (const std::vector<uint32_t>* group :
           {&cluster.group0, &cluster.group1}) {
        for (uint32_t c : *group) {
          levels.try_emplace(c, static_cast<int>(d) + 1);
        }
      }
    }
  }
  return levels;
}

LocalDedupResult local_dedup(const ClientSet& set) {
  LocalDedupResult out;
  std::unordered_set<Element, ElementHash> seen;
  seen.reserve(set.size());
  for (const Element& e : set) {
    if (seen.insert(e).second) {
      out.set.push_back(e);
    } else {
      out.removed_count++;
    }
  }
  return out;
}

namespace {

void check_inputs(const std::vector<ClientSet>& sets, bool strict,
                  std::vector<ClientSet>& working,
                  std::vector<Removal>& removals) {
  working.reserve(sets.size());
  for (size_t i = 0; i < sets.size(); i++) {
    LocalDedupResult local = local_dedup(sets[i]);
    if (local.removed_count > 0 && strict) {
      throw DuplicateWithinSet("client " + std::to_string(i + 1) +
                               " holds internally duplicated elements");
    }
    if (local.removed_count > 0) {
      // Lenient mode: drops are recorded against the client itself.
      std::unordered_set<Element, ElementHash> seen;
      for (const Element& e : sets[i]) {
        if (!seen.insert(e).second) {
          removals.push_back({static_cast<uint32_t>(i + 1), e,
                              static_cast<uint32_t>(i + 1)});
        }
      }
    }
    working.push_back(std::move(local.set));
  }
}

// Dynamic precondition: entering any level, the sets within each group must
// be pairwise disjoint (their intersections were removed at lower levels).
void check_group_disjoint(const Cluster& cluster,
                          const std::vector<ClientSet>& sets, int level) {
  for (const std::vector<uint32_t>* group : {&cluster.group0, &cluster.group1}) {
    std::unordered_set<Element, ElementHash> seen;
    for (uint32_t c : *group) {
      for (const Element& e : sets[c - 1]) {
        if (!seen.insert(e).second) {
          throw ProtocolAbort(
              "within-group sets share an element entering level " +
              std::to_string(level));
        }
      }
    }
  }
}

struct PersistentEndpoints {
  std::vector<std::unique_ptr<InprocEndpoint>> storage;
  gpsi::EndpointSet set;

  PersistentEndpoints(uint32_t clients, bool with_tee, Runtime& rt,
                      uint64_t seed) {
    for (uint32_t c = 1; c <= clients; c++) {
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

void apply_report_deletions(uint32_t owner,
                            const gpsi::IntersectionReport& report,
                            ClientSet& set, std::vector<Removal>& removals) {
  // An element intersecting several counterparts is deleted once; every
  // counterpart is still recorded.
  std::unordered_set<Element, ElementHash> to_remove;
  for (size_t t = 0; t < report.counterparts.size(); t++) {
    for (const Element& e : report.per_counterpart[t]) {
      to_remove.insert(e);
      removals.push_back({owner, e, report.counterparts[t]});
    }
  }
  if (to_remove.empty()) return;
  ClientSet kept;
  kept.reserve(set.size());
  for (Element& e : set) {
    if (!to_remove.contains(e)) kept.push_back(std::move(e));
  }
  set = std::move(kept);
}

void sort_removals(std::vector<Removal>& removals) {
  std::sort(removals.begin(), removals.end(),
            [](const Removal& a, const Removal& b) {
              if (a.client != b.client) return a.client < b.client;
              if (a.element != b.element) return a.element < b.element;
              return a.counterpart < b.counterpart;
            });
}

DedupOutcome epmpd_run(const std::vector<ClientSet>& sets, Variant variant,
                       Runtime& rt, uint64_t seed, const DedupOptions& opts) {
  uint32_t m = static_cast<uint32_t>(sets.size());
  ClusterPlan plan = build_cluster_plan(m);

  DedupOutcome outcome;
  check_inputs(sets, opts.strict, outcome.final_sets, outcome.removals);

  PersistentEndpoints eps(m, variant != Variant::III, rt, seed);
  gpsi::EncryptedSetCache cache;
  std::unordered_set<uint32_t> participated;

  for (size_t d = 0; d < plan.levels.size(); d++) {
    int level = static_cast<int>(d) + 1;
    for (const Cluster& cluster : plan.levels[d]) {
      if (opts.check_group_disjoint) {
        check_group_disjoint(cluster, outcome.final_sets, level);
      }
      gpsi::GpsiInstance inst{cluster.group0, cluster.group1};
      std::map<uint32_t, ClientSet> inputs;
      // A client runs its one OPRF round on first participation; its set
      // only shrinks afterwards, so the cache stays complete.
      std::vector<uint32_t> first_timers;
      for (uint32_t c : inst.all_members()) {
        inputs.emplace(c, outcome.final_sets[c - 1]);
        if (participated.insert(c).second) first_timers.push_back(c);
      }

      gpsi::ReportMap reports;
      switch (variant) {
        case Variant::I:
          reports = run_egpsi1_core(inst, inputs, eps.set, level, opts.gpsi);
          break;
        case Variant::II:
          reports = run_egpsi2_core(inst, inputs, eps.set, level, opts.gpsi,
                                    cache, first_timers);
          break;
        case Variant::III:
          reports = run_egpsi3_core(inst, inputs, eps.set, level, opts.gpsi);
          break;
      }
      rt.add_invocations(1);
      outcome.invocations++;

      for (uint32_t g0 : cluster.group0) {
        apply_report_deletions(g0, reports.at(g0),
                               outcome.final_sets[g0 - 1], outcome.removals);
      }
    }
  }
  sort_removals(outcome.removals);
  return outcome;
}

DedupOutcome naive_pairwise_run(const std::vector<ClientSet>& sets,
                                Runtime& rt, uint64_t seed,
                                const DedupOptions& opts) {
  uint32_t m = static_cast<uint32_t>(sets.size());
  if (m < 2) throw TooFewClients("need at least 2 clients");

  DedupOutcome outcome;
  check_inputs(sets, opts.strict, outcome.final_sets, outcome.removals);

  PersistentEndpoints eps(m, /*with_tee=*/true, rt, seed);

  for (uint32_t i = 1; i <= m; i++) {
    for (uint32_t j = i + 1; j <= m; j++) {
      gpsi::GpsiInstance inst{{i}, {j}};
      std::map<uint32_t, ClientSet> inputs{{i, outcome.final_sets[i - 1]},
                                           {j, outcome.final_sets[j - 1]}};
      gpsi::ReportMap reports =
          run_egpsi1_core(inst, inputs, eps.set, 0, opts.gpsi);
      rt.add_invocations(1);
      outcome.invocations++;
      apply_report_deletions(i, reports.at(i), outcome.final_sets[i - 1],
                             outcome.removals);
    }
  }
  sort_removals(outcome.removals);
  return outcome;
}

uint64_t naive_pair_count(uint32_t client_count) {
  return static_cast<uint64_t>(client_count) * (client_count - 1) / 2;
}

}  // namespace epmpd::dedup
