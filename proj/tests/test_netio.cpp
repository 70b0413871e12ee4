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

#include "epmpd/netio.hpp"

#include <sys/socket.h>

#include <fstream>
#include <thread>

#include "doctest.h"
#include "epmpd/oracle.hpp"

using namespace epmpd;
using namespace epmpd::net;

TEST_SUITE_BEGIN("netio");

TEST_CASE("frame codec: empty payload is a 14-byte header") {
  Bytes f = encode_frame(MsgType::done, {});
  CHECK(f.size() == kFrameHeaderSize);
  FrameDecodeResult r = decode_frame(f);
  REQUIRE(r.frame.has_value());
  CHECK(r.frame->type == MsgType::done);
  CHECK(r.frame->payload.empty());
  CHECK(r.consumed == kFrameHeaderSize);
}

TEST_CASE("frame codec error domain") {
  Bytes good = encode_frame(MsgType::enc_set, Bytes{1, 2, 3});

  SUBCASE("corrupted magic") {
    Bytes bad = good;
    bad[0] ^= 0xFF;
    CHECK(decode_frame(bad).error == FrameError::bad_magic);
  }
  SUBCASE("wrong version") {
    Bytes bad = good;
    bad[4] = 0x02;
    CHECK(decode_frame(bad).error == FrameError::bad_version);
  }
  SUBCASE("unregistered message type") {
    Bytes bad = good;
    bad[5] = 0x7F;
    CHECK(decode_frame(bad).error == FrameError::bad_msg_type);
  }
  SUBCASE("truncated header and payload") {
    Bytes bad(good.begin(), good.begin() + 5);
    CHECK(decode_frame(bad).error == FrameError::truncated);
    Bytes short_payload(good.begin(), good.end() - 1);
    CHECK(decode_frame(short_payload).error == FrameError::truncated);
  }
  SUBCASE("oversize payload") {
    Bytes bad = good;
    bad[6 + 7] = 0xFF;  // absurd length
    CHECK(decode_frame(bad).error == FrameError::oversize_payload);
  }
}

TEST_CASE("frame codec: fuzzed round-trips and total decode") {
  Rng rng = Rng::seeded(1, "netio-fuzz");
  for (int i = 0; i < 10000; i++) {
    size_t len = rng.uniform(256);
    Bytes payload(len);
    rng.fill(payload);
    MsgType type = static_cast<MsgType>(1 + rng.uniform(9));
    Bytes encoded = encode_frame(type, payload);
    FrameDecodeResult r = decode_frame(encoded);
    REQUIRE(r.frame.has_value());
    REQUIRE(r.frame->type == type);
    REQUIRE(r.frame->payload == payload);
  }
  // Total decode: arbitrary bytes give a frame or a specific error.
  for (int i = 0; i < 10000; i++) {
    size_t len = rng.uniform(64);
    Bytes junk(len);
    rng.fill(junk);
    FrameDecodeResult r = decode_frame(junk);
    CHECK((r.frame.has_value() || r.error != FrameError::none));
  }
}

TEST_CASE("golden frame fixtures decode byte-exactly") {
  // One fixture per registered message type, shipped as hex dumps.
  std::filesystem::path dir = std::filesystem::path(EPMPD_FIXTURE_DIR) /
                              "frames";
  int checked = 0;
  for (uint8_t t = 1; t <= 9; t++) {
    MsgType type = static_cast<MsgType>(t);
    std::filesystem::path file =
        dir / (std::string(msg_type_name(type)) + ".hex");
    REQUIRE(std::filesystem::exists(file));
    std::ifstream in(file);
    std::string hex;
    in >> hex;
    Bytes raw = from_hex(hex);
    FrameDecodeResult r = decode_frame(raw);
    REQUIRE(r.frame.has_value());
    CHECK(r.frame->type == type);
    // Re-encoding reproduces the fixture bit-exactly.
    CHECK(encode_frame(r.frame->type, r.frame->payload) == raw);
    checked++;
  }
  CHECK(checked == 9);
}

namespace {

std::pair<std::unique_ptr<ShapedConn>, std::unique_ptr<ShapedConn>>
loopback_pair(const ShapingConfig& shaping) {
  int fds[2];
  REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
  return {std::make_unique<ShapedConn>(fds[0], shaping),
          std::make_unique<ShapedConn>(fds[1], shaping)};
}

}  // namespace

TEST_CASE("shaped send injects the profile delay") {
  SUBCASE("ideal shaping adds almost nothing") {
    auto [a, b] = loopback_pair({NetProfile::ideal(), 64 * 1024});
    Bytes payload(1000, 7);
    double elapsed = a->send_frame(MsgType::enc_set, payload);
    Frame f = b->recv_frame();
    CHECK(f.payload == payload);
    CHECK(elapsed < 0.002);
  }
  SUBCASE("wan floor is the half-RTT") {
    auto [a, b] = loopback_pair({NetProfile::wan(), 64 * 1024});
    double elapsed = a->send_frame(MsgType::done, {});
    (void)b->recv_frame();
    CHECK(elapsed >= 0.05);
  }
  SUBCASE("wan is never faster than lan for the same frame") {
    Bytes payload(200000, 1);
    auto [a1, b1] = loopback_pair({NetProfile::lan(), 8 * 1024});
    std::thread drain1([&] { (void)b1->recv_frame(); });
    double lan = a1->send_frame(MsgType::enc_set, payload);
    drain1.join();
    auto [a2, b2] = loopback_pair({NetProfile::wan(), 8 * 1024});
    std::thread drain2([&] { (void)b2->recv_frame(); });
    double wan = a2->send_frame(MsgType::enc_set, payload);
    drain2.join();
    CHECK(wan >= lan);
    // Analytic lower bound within one pacing quantum.
    CHECK(wan >= comm_time(payload.size(), NetProfile::wan()));
    CHECK(lan >= comm_time(payload.size(), NetProfile::lan()));
  }
}

TEST_CASE("version mismatch on the wire raises HandshakeFailure") {
  auto [a, b] = loopback_pair({NetProfile::ideal(), 64 * 1024});
  Bytes frame = encode_frame(MsgType::hello, Bytes{0, 1, 0, 0, 0});
  frame[4] = 0x07;  // future version
  std::thread sender([&] {
    // Raw write, bypassing the pacing path's encode.
    ::send(a->fd(), frame.data(), frame.size(), MSG_NOSIGNAL);
  });
  CHECK_THROWS_AS(b->recv_frame(), HandshakeFailure);
  sender.join();
}

TEST_CASE("loopback echo between two socket endpoints") {
  PartyNetConfig net;
  net.clients = 2;
  net.base_port = pick_base_port(2);
  ShapingConfig shaping{NetProfile::ideal(), 64 * 1024};

  SocketEndpoint e1(PartyId::client(1), net, shaping,
                    Rng::seeded(1, "e1"));
  SocketEndpoint e2(PartyId::client(2), net, shaping,
                    Rng::seeded(2, "e2"));

  std::thread t1([&] {
    e1.send(PartyId::client(2), MsgType::prf_set, Bytes{9, 9, 9},
            Phase{kPhaseExchange});
    Bytes echo = e1.recv(PartyId::client(2), MsgType::prf_set,
                         Phase{kPhaseExchange});
    CHECK(echo == Bytes{9, 9, 9, 1});
  });
  Bytes got = e2.recv(PartyId::client(1), MsgType::prf_set,
                      Phase{kPhaseExchange});
  got.push_back(1);
  e2.send(PartyId::client(1), MsgType::prf_set, got, Phase{kPhaseExchange});
  t1.join();
  e1.shutdown();
  e2.shutdown();
}

TEST_CASE("m=4 distributed run equals the in-process outcome byte for byte") {
  std::vector<ClientSet> sets{u32_set({1, 2, 30}), u32_set({2, 3}),
                              u32_set({3, 4, 30}), u32_set({4, 1, 99})};
  for (dedup::Variant v :
       {dedup::Variant::I, dedup::Variant::II, dedup::Variant::III}) {
    CAPTURE(variant_name(v));
    Runtime rt;
    dedup::DedupOutcome inproc = dedup::epmpd_run(sets, v, rt, 1234);

    PartyNetConfig net;
    net.clients = 4;
    net.base_port = pick_base_port(5);
    ShapingConfig shaping{NetProfile::ideal(), 64 * 1024};
    dedup::DedupOutcome remote =
        run_over_sockets(sets, v, 1234, net, shaping);

    REQUIRE(remote.final_sets == inproc.final_sets);
    REQUIRE(remote.invocations == inproc.invocations);
    REQUIRE(remote.removals.size() == inproc.removals.size());
    for (size_t i = 0; i < remote.removals.size(); i++) {
      CHECK(remote.removals[i].client == inproc.removals[i].client);
      CHECK(remote.removals[i].element == inproc.removals[i].element);
      CHECK(remote.removals[i].counterpart == inproc.removals[i].counterpart);
    }
  }
}

TEST_SUITE_END();
