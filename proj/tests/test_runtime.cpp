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

#include "epmpd/runtime.hpp"

#include <cmath>

#include "doctest.h"

using namespace epmpd;

TEST_SUITE_BEGIN("runtime");

namespace {
Bytes bytes_of(std::initializer_list<uint8_t> b) { return Bytes(b); }
}  // namespace

TEST_CASE("party registration and duplicates") {
  Runtime rt;
  PartyId c1 = rt.register_party(PartyKind::client, 1);
  CHECK(c1 == PartyId::client(1));
  CHECK_THROWS_AS(rt.register_party(PartyKind::client, 1), DuplicateParty);

  rt.register_party(PartyKind::tee, 0);
  // The tee is a singleton regardless of the requested index.
  CHECK_THROWS_AS(rt.register_party(PartyKind::tee, 5), DuplicateParty);
}

TEST_CASE("messages round-trip intact and unknown parties are rejected") {
  Runtime rt;
  PartyId a = rt.register_party(PartyKind::client, 1);
  PartyId b = rt.register_party(PartyKind::client, 2);
  Phase phase{kPhaseSetup};

  Bytes payload = bytes_of({1, 2, 3, 255});
  rt.send(a, b, MsgType::key_transfer, payload, phase);
  CHECK(rt.recv(b, a, MsgType::key_transfer) == payload);

  CHECK_THROWS_AS(
      rt.send(a, PartyId::client(9), MsgType::key_transfer, {}, phase),
      UnknownParty);
  CHECK_THROWS_AS(rt.recv(b, a, MsgType::key_transfer), ProtocolAbort);
}

TEST_CASE("per-pair delivery is FIFO over a thousand messages") {
  Runtime rt;
  PartyId a = rt.register_party(PartyKind::client, 1);
  PartyId b = rt.register_party(PartyKind::client, 2);
  Phase phase{kPhaseExchange};
  for (uint32_t i = 0; i < 1000; i++) {
    Bytes payload;
    put_u32_le(payload, i);
    rt.send(a, b, MsgType::prf_set, payload, phase);
  }
  for (uint32_t i = 0; i < 1000; i++) {
    Bytes payload = rt.recv(b, a, MsgType::prf_set);
    REQUIRE(get_u32_le(payload.data()) == i);
  }
}

TEST_CASE("comm_time profile arithmetic") {
  CHECK(comm_time(123456789, NetProfile::ideal()) == 0.0);
  CHECK(comm_time(0, NetProfile::wan()) == doctest::Approx(0.05));
  // 1e9 bits of payload over the lan profile: half-RTT plus one second.
  CHECK(comm_time(125000000, NetProfile::lan()) == doctest::Approx(1.00001));
}

TEST_CASE("profile constants") {
  NetProfile lan = NetProfile::lan();
  CHECK(lan.bandwidth_bps == doctest::Approx(1e9));
  CHECK(lan.rtt_s == doctest::Approx(0.00002));
  NetProfile wan = NetProfile::wan();
  CHECK(wan.bandwidth_bps == doctest::Approx(1e8));
  CHECK(wan.rtt_s == doctest::Approx(0.1));
  CHECK(std::isinf(NetProfile::ideal().bandwidth_bps));
}

TEST_CASE("measure attributes elapsed time and forbids nesting") {
  Runtime rt;
  PartyId c = rt.register_party(PartyKind::client, 1);
  Phase phase{kPhaseEncrypt};

  rt.measure(c, phase, [] {});
  auto [timing, counters] = rt.finalize(NetProfile::ideal());
  CHECK(timing.per_party_compute[c] < 0.001);  // zero-work block

  CHECK_THROWS_AS(rt.measure(c, phase,
                             [&] {
                               rt.measure(c, phase, [] {});
                             }),
                  MeasureNesting);
}

TEST_CASE("two sequential measured blocks accumulate") {
  Runtime rt;
  PartyId c = rt.register_party(PartyKind::client, 1);
  Phase phase{kPhaseEncrypt};
  rt.record_compute(c, phase, 1.25);
  rt.record_compute(c, phase, 0.75);
  auto [timing, counters] = rt.finalize(NetProfile::ideal());
  CHECK(timing.per_party_compute[c] == doctest::Approx(2.0));
}

TEST_CASE("wall clock is per-phase critical path plus tee plus comm") {
  Runtime rt;
  PartyId c1 = rt.register_party(PartyKind::client, 1);
  PartyId c2 = rt.register_party(PartyKind::client, 2);
  PartyId tee = rt.register_party(PartyKind::tee, 0);
  Phase phase{kPhaseEncrypt};

  rt.record_compute(c1, phase, 2.0);
  rt.record_compute(c2, phase, 3.0);
  rt.record_compute(tee, phase, 1.0);

  auto [timing, counters] = rt.finalize(NetProfile::ideal());
  CHECK(timing.wall_clock_estimate == doctest::Approx(4.0));
}

TEST_CASE("empty run produces an all-zero report") {
  Runtime rt;
  rt.register_party(PartyKind::client, 1);
  auto [timing, counters] = rt.finalize(NetProfile::ideal());
  CHECK(timing.wall_clock_estimate == 0.0);
  CHECK(timing.per_party_bytes_sent[PartyId::client(1)] == 0);
}

TEST_CASE("byte accounting is complete across phases") {
  Runtime rt;
  PartyId a = rt.register_party(PartyKind::client, 1);
  PartyId b = rt.register_party(PartyKind::client, 2);
  PartyId tee = rt.register_party(PartyKind::tee, 0);

  rt.send(a, tee, MsgType::enc_set, Bytes(100), Phase{kPhaseEncrypt, 1});
  rt.send(b, tee, MsgType::enc_set, Bytes(50), Phase{kPhaseEncrypt, 1});
  rt.send(a, b, MsgType::prf_set, Bytes(7), Phase{kPhaseExchange, 2});
  (void)rt.recv(tee, a, MsgType::enc_set);
  (void)rt.recv(tee, b, MsgType::enc_set);
  (void)rt.recv(b, a, MsgType::prf_set);

  auto [timing, counters] = rt.finalize(NetProfile::ideal());
  uint64_t party_total = 0;
  for (const auto& [id, n] : timing.per_party_bytes_sent) party_total += n;
  CHECK(party_total == 157);
  CHECK(timing.per_party_bytes_sent[a] == 107);
  CHECK(timing.per_party_bytes_sent[b] == 50);
}

TEST_CASE("worse profiles never shrink the wall clock") {
  // finalize is a pure fold over the same transcript, so one run can be
  // priced under every profile.
  Runtime rt;
  PartyId a = rt.register_party(PartyKind::client, 1);
  PartyId tee = rt.register_party(PartyKind::tee, 0);
  rt.send(a, tee, MsgType::enc_set, Bytes(1 << 20), Phase{kPhaseEncrypt});
  rt.record_compute(a, Phase{kPhaseEncrypt}, 0.5);
  (void)rt.recv(tee, a, MsgType::enc_set);

  double ideal = rt.finalize(NetProfile::ideal()).first.wall_clock_estimate;
  double lan = rt.finalize(NetProfile::lan()).first.wall_clock_estimate;
  double wan = rt.finalize(NetProfile::wan()).first.wall_clock_estimate;
  CHECK(ideal <= lan);
  CHECK(lan <= wan);
  CHECK(ideal == doctest::Approx(0.5));
}

TEST_CASE("finalize rejects unconsumed messages") {
  Runtime rt;
  PartyId a = rt.register_party(PartyKind::client, 1);
  PartyId b = rt.register_party(PartyKind::client, 2);
  rt.send(a, b, MsgType::prf_set, Bytes(1), Phase{kPhaseExchange});
  CHECK_THROWS_AS(rt.finalize(NetProfile::ideal()), IncompleteRun);
}

TEST_SUITE_END();
