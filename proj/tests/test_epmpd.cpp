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

#include <map>
#include <set>

#include "doctest.h"
#include "epmpd/oracle.hpp"

using namespace epmpd;
using namespace epmpd::dedup;

TEST_SUITE_BEGIN("epmpd");

namespace {

// The three outcome invariants: subset, pairwise disjoint, union preserved.
void check_outcome_invariants(const std::vector<ClientSet>& inputs,
                              const DedupOutcome& out) {
  REQUIRE(out.final_sets.size() == inputs.size());
  std::multiset<Element> final_union;
  for (size_t i = 0; i < inputs.size(); i++) {
    std::set<Element> input_set(inputs[i].begin(), inputs[i].end());
    for (const Element& e : out.final_sets[i]) {
      REQUIRE(input_set.contains(e));
      final_union.insert(e);
    }
  }
  // Pairwise disjointness is equivalent to the multiset union being a set.
  std::set<Element> expected_union;
  for (const auto& s : inputs) expected_union.insert(s.begin(), s.end());
  REQUIRE(final_union.size() == expected_union.size());
  std::set<Element> as_set(final_union.begin(), final_union.end());
  REQUIRE(as_set == expected_union);
}

void check_matches_oracle(const std::vector<ClientSet>& inputs,
                          const DedupOutcome& out) {
  DedupOutcome expected = oracle::oracle_dedup(inputs);
  for (size_t i = 0; i < inputs.size(); i++) {
    std::set<Element> got(out.final_sets[i].begin(), out.final_sets[i].end());
    std::set<Element> want(expected.final_sets[i].begin(),
                           expected.final_sets[i].end());
    REQUIRE(got == want);
  }
}

std::vector<ClientSet> random_sets(uint32_t m, size_t n, uint64_t seed,
                                   uint32_t universe) {
  Rng rng = Rng::seeded(seed, "epmpd-random-sets");
  std::vector<ClientSet> sets(m);
  for (auto& s : sets) {
    std::set<uint32_t> vals;
    while (vals.size() < n) {
      vals.insert(static_cast<uint32_t>(rng.uniform(universe)));
    }
    for (uint32_t v : vals) s.push_back(Element::from_u32(v));
    rng.shuffle(s);
  }
  return sets;
}

}  // namespace

TEST_CASE("cluster plan shapes") {
  SUBCASE("m=8: levels of 4, 2, 1 clusters") {
    ClusterPlan plan = build_cluster_plan(8);
    REQUIRE(plan.levels.size() == 3);
    CHECK(plan.levels[0].size() == 4);
    CHECK(plan.levels[1].size() == 2);
    CHECK(plan.levels[2].size() == 1);
    CHECK(plan.total_clusters() == 7);
    // Level 3 splits 1..8 into halves.
    CHECK(plan.levels[2][0].group0 == std::vector<uint32_t>{1, 2, 3, 4});
    CHECK(plan.levels[2][0].group1 == std::vector<uint32_t>{5, 6, 7, 8});
  }
  SUBCASE("m=2: one level, one cluster") {
    ClusterPlan plan = build_cluster_plan(2);
    REQUIRE(plan.levels.size() == 1);
    REQUIRE(plan.levels[0].size() == 1);
    CHECK(plan.levels[0][0].group0 == std::vector<uint32_t>{1});
    CHECK(plan.levels[0][0].group1 == std::vector<uint32_t>{2});
  }
  SUBCASE("m=256: 255 clusters and the naive baseline needs 32640 pairs") {
    CHECK(build_cluster_plan(256).total_clusters() == 255);
    CHECK(naive_pair_count(256) == 32640);
  }
  SUBCASE("fewer than two clients is an error") {
    CHECK_THROWS_AS(build_cluster_plan(1), TooFewClients);
    CHECK_THROWS_AS(build_cluster_plan(0), TooFewClients);
  }
}

TEST_CASE("every pair meets cross-group at exactly one level") {
  // Exhaustive pair-coverage oracle over the generated plan, including the
  // incomplete-subtree shapes.
  for (uint32_t m : {2u, 3u, 4u, 5u, 6u, 7u, 8u, 9u, 12u, 16u, 17u, 31u}) {
    CAPTURE(m);
    ClusterPlan plan = build_cluster_plan(m);
    std::map<std::pair<uint32_t, uint32_t>, int> met;
    for (const auto& level : plan.levels) {
      for (const Cluster& c : level) {
        REQUIRE(!c.group0.empty());
        REQUIRE(!c.group1.empty());
        for (uint32_t a : c.group0) {
          for (uint32_t b : c.group1) {
            met[{a, b}]++;
          }
        }
      }
    }
    for (uint32_t a = 1; a <= m; a++) {
      for (uint32_t b = a + 1; b <= m; b++) {
        REQUIRE(met[{a, b}] == 1);
      }
    }
    // m-1 clusters for every m, not only powers of two.
    CHECK(plan.total_clusters() == m - 1);
  }
}

TEST_CASE("local dedup keeps first occurrences") {
  SUBCASE("[3,3,5] -> ([3,5], 1)") {
    LocalDedupResult r = local_dedup(u32_set({3, 3, 5}));
    CHECK(r.set == u32_set({3, 5}));
    CHECK(r.removed_count == 1);
  }
  SUBCASE("already-unique input is unchanged") {
    LocalDedupResult r = local_dedup(u32_set({9, 4, 7}));
    CHECK(r.set == u32_set({9, 4, 7}));
    CHECK(r.removed_count == 0);
  }
  SUBCASE("all-identical input collapses to a singleton") {
    LocalDedupResult r = local_dedup(u32_set({6, 6, 6, 6}));
    CHECK(r.set == u32_set({6}));
    CHECK(r.removed_count == 3);
  }
}

TEST_CASE("golden tree run: the shared element survives at its last holder") {
  // C1={x,y}, C2={y,z}, C3={y,w}, C4={v}: y is deleted at C1 (level 1) and
  // C2 (level 2), surviving only at C3.
  std::vector<ClientSet> sets{u32_set({10, 20}), u32_set({20, 30}),
                              u32_set({20, 40}), u32_set({50})};
  Runtime rt;
  DedupOutcome out = epmpd_run(sets, Variant::I, rt, 5);
  CHECK(out.final_sets[0] == u32_set({10}));
  CHECK(out.final_sets[1] == u32_set({30}));
  std::set<Element> c3(out.final_sets[2].begin(), out.final_sets[2].end());
  CHECK(c3 == std::set<Element>{Element::from_u32(20), Element::from_u32(40)});
  CHECK(out.final_sets[3] == u32_set({50}));
  CHECK(out.invocations == 3);
  check_outcome_invariants(sets, out);
  check_matches_oracle(sets, out);
}

TEST_CASE("two identical sets: the first ends empty") {
  std::vector<ClientSet> sets{u32_set({1, 2, 3}), u32_set({1, 2, 3})};
  Runtime rt;
  DedupOutcome out = epmpd_run(sets, Variant::I, rt, 6);
  CHECK(out.final_sets[0].empty());
  CHECK(out.final_sets[1] == u32_set({1, 2, 3}));
  check_outcome_invariants(sets, out);
}

TEST_CASE("all-disjoint sets pass through unchanged") {
  std::vector<ClientSet> sets{u32_set({1, 2}), u32_set({3, 4}),
                              u32_set({5, 6})};
  Runtime rt;
  DedupOutcome out = epmpd_run(sets, Variant::I, rt, 7);
  CHECK(out.final_sets == sets);
  CHECK(out.removals.empty());
  check_outcome_invariants(sets, out);
}

TEST_CASE("strict mode rejects within-client duplicates") {
  std::vector<ClientSet> sets{u32_set({1, 1}), u32_set({2})};
  Runtime rt;
  CHECK_THROWS_AS(epmpd_run(sets, Variant::I, rt, 8), DuplicateWithinSet);

  SUBCASE("lenient mode applies local dedup and records it") {
    Runtime rt2;
    DedupOptions opts;
    opts.strict = false;
    DedupOutcome out = epmpd_run(sets, Variant::I, rt2, 8, opts);
    CHECK(out.final_sets[0] == u32_set({1}));
    CHECK(out.removals.size() == 1);
    CHECK(out.removals[0].client == 1);
    CHECK(out.removals[0].counterpart == 1);
  }
}

TEST_CASE("variants agree on identical inputs") {
  for (uint32_t m : {2u, 3u, 5u, 8u}) {
    CAPTURE(m);
    std::vector<ClientSet> sets = random_sets(m, 12, 1000 + m, 300);
    Runtime rt1, rt2, rt3;
    DedupOutcome o1 = epmpd_run(sets, Variant::I, rt1, 9);
    DedupOutcome o2 = epmpd_run(sets, Variant::II, rt2, 9);
    DedupOutcome o3 = epmpd_run(sets, Variant::III, rt3, 9);
    REQUIRE(o1.final_sets == o2.final_sets);
    REQUIRE(o1.final_sets == o3.final_sets);
    check_outcome_invariants(sets, o1);
    check_matches_oracle(sets, o1);
  }
}

TEST_CASE("removals materialize the counterpart leakage") {
  std::vector<ClientSet> sets{u32_set({1, 2}), u32_set({2, 3}),
                              u32_set({3, 4}), u32_set({4, 1})};
  Runtime rt;
  DedupOutcome out = epmpd_run(sets, Variant::I, rt, 11);
  check_matches_oracle(sets, out);
  // Every removal names the counterpart that held the duplicate.
  for (const Removal& r : out.removals) {
    const ClientSet& counterpart_input = sets[r.counterpart - 1];
    CHECK(std::find(counterpart_input.begin(), counterpart_input.end(),
                    r.element) != counterpart_input.end());
  }
  // 1-2 share 2; 2-3 share 3; 3-4 share 4; 4-1 share 1.
  CHECK(out.removals.size() == 4);
}

TEST_CASE("naive pairwise baseline") {
  SUBCASE("m=2 equals the tree run with one invocation") {
    std::vector<ClientSet> sets{u32_set({1, 2}), u32_set({2, 3})};
    Runtime rt1, rt2;
    DedupOutcome naive = naive_pairwise_run(sets, rt1, 13);
    DedupOutcome tree = epmpd_run(sets, Variant::I, rt2, 13);
    CHECK(naive.invocations == 1);
    CHECK(naive.final_sets == tree.final_sets);
  }
  SUBCASE("random m=6 differential against the tree") {
    std::vector<ClientSet> sets = random_sets(6, 10, 4242, 200);
    Runtime rt1, rt2;
    DedupOutcome naive = naive_pairwise_run(sets, rt1, 14);
    DedupOutcome tree = epmpd_run(sets, Variant::I, rt2, 14);
    CHECK(naive.invocations == 15);
    REQUIRE(naive.final_sets == tree.final_sets);
    check_outcome_invariants(sets, naive);
    check_matches_oracle(sets, naive);
  }
}

TEST_CASE("odd client counts run correctly") {
  for (uint32_t m : {3u, 5u, 7u, 9u}) {
    CAPTURE(m);
    std::vector<ClientSet> sets = random_sets(m, 8, 5000 + m, 150);
    Runtime rt;
    DedupOutcome out = epmpd_run(sets, Variant::I, rt, 15);
    CHECK(out.invocations == m - 1);
    check_outcome_invariants(sets, out);
    check_matches_oracle(sets, out);
  }
}

TEST_CASE("variant II: oprf rounds equal leaf set sizes with caching") {
  std::vector<ClientSet> sets = random_sets(4, 16, 777, 500);
  Runtime rt;
  epmpd_run(sets, Variant::II, rt, 16);
  auto [timing, counters] = rt.finalize(NetProfile::ideal());
  for (uint32_t c = 1; c <= 4; c++) {
    CHECK(counters.per_party.at(PartyId::client(c)).oprf_rounds ==
          sets[c - 1].size());
  }
}

TEST_SUITE_END();
