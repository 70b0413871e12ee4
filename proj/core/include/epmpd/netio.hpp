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

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "epmpd/dedup.hpp"
#include "epmpd/endpoint.hpp"
#include "epmpd/runtime.hpp"

// Framed wire protocol and TCP transport with user-space bandwidth/latency
// shaping, so the full deduplication stack runs across OS processes without
// kernel traffic-control tooling. One TCP connection per directed party
// pair; the dialing side owns the sending direction.

namespace epmpd::net {

inline constexpr uint8_t kFrameMagic[4] = {0x45, 0x50, 0x4D, 0x44};  // "EPMD"
inline constexpr uint8_t kFrameVersion = 0x01;
inline constexpr size_t kFrameHeaderSize = 14;  // magic + version + type + len
inline constexpr uint64_t kDefaultPayloadCap = uint64_t{1} << 32;

struct Frame {
  MsgType type = MsgType::hello;
  Bytes payload;
};

enum class FrameError {
  none,
  bad_magic,
  bad_version,
  bad_msg_type,
  truncated,
  oversize_payload,
};

const char* frame_error_name(FrameError e);

struct FrameDecodeResult {
  std::optional<Frame> frame;
  FrameError error = FrameError::none;
  size_t consumed = 0;  // header + payload bytes on success
};

Bytes encode_frame(MsgType type, BytesView payload);
// Total on its input domain: every byte string yields a frame or a
// specific error, never a crash.
FrameDecodeResult decode_frame(BytesView data,
                               uint64_t payload_cap = kDefaultPayloadCap);

struct ShapingConfig {
  NetProfile profile;
  uint64_t quantum_bytes = 64 * 1024;  // pacing granularity, > 0
};

// A connected stream socket with per-connection pacing state.
class ShapedConn {
 public:
  explicit ShapedConn(int fd, ShapingConfig shaping);
  ~ShapedConn();
  ShapedConn(const ShapedConn&) = delete;
  ShapedConn& operator=(const ShapedConn&) = delete;

  // Injects delay >= rtt/2 + 8*frame_bytes/bandwidth via pacing; returns
  // measured elapsed seconds. ConnectionLost on a broken peer.
  double send_frame(MsgType type, BytesView payload);
  // Blocking read of the next frame. ConnectionLost on EOF/reset;
  // ProtocolAbort on a malformed header. `abort_flag`, when set, makes the
  // read poll so a signal can interrupt it.
  Frame recv_frame(const std::atomic<bool>* abort_flag = nullptr);

  uint64_t bytes_sent() const { return bytes_sent_; }
  int fd() const { return fd_; }

 private:
  int fd_;
  ShapingConfig shaping_;
  uint64_t bytes_sent_ = 0;
  std::mutex send_mu_;
};

// --- party network config ---------------------------------------------------

struct PartyNetConfig {
  uint32_t clients = 0;
  bool with_tee = true;
  std::string host = "127.0.0.1";
  uint16_t base_port = 0;  // party p listens on base_port + slot(p)

  uint16_t port_of(PartyId id) const;
};

// Listens on the party's own port, dials peers on first send, and performs
// the HELLO handshake in both directions. Implements Endpoint so the gpsi
// state machines run unchanged over sockets.
class SocketEndpoint : public Endpoint {
 public:
  SocketEndpoint(PartyId self, const PartyNetConfig& net,
                 const ShapingConfig& shaping, Rng rng);
  ~SocketEndpoint() override;

  PartyId self() const override { return self_; }
  Rng& rng() override { return rng_; }
  void send(PartyId to, MsgType type, Bytes payload,
            const Phase& phase) override;
  Bytes recv(PartyId from, MsgType expect, const Phase& phase) override;
  PartyCounters& counters() override { return counters_; }
  void record_compute(const Phase& phase, double seconds) override;

  // Broadcast DONE and tear down once the run is over.
  void send_done(PartyId to);
  void wait_done(PartyId from);
  void shutdown();

  void request_abort() {
    abort_.store(true);
    cv_.notify_all();
  }
  bool aborted() const { return abort_.load(); }

  double total_compute() const;
  double compute_in(const std::string& phase_key) const;
  uint64_t bytes_sent() const;
  double comm_elapsed() const { return comm_elapsed_; }
  const std::map<std::string, double>& compute_by_phase() const {
    return compute_;
  }

 private:
  ShapedConn& outgoing(PartyId to);
  ShapedConn& incoming(PartyId from);
  void accept_loop();

  PartyId self_;
  PartyNetConfig net_;
  ShapingConfig shaping_;
  Rng rng_;
  int listen_fd_ = -1;
  std::thread accept_thread_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<PartyId, std::unique_ptr<ShapedConn>> out_;
  std::map<PartyId, std::unique_ptr<ShapedConn>> in_;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> abort_{false};
  PartyCounters counters_;
  std::map<std::string, double> compute_;
  uint64_t extra_bytes_ = 0;
  double comm_elapsed_ = 0.0;
};

// --- distributed EP-MPD ------------------------------------------------------

struct ServeResult {
  PartyId self;
  ClientSet final_set;                   // clients only
  std::vector<dedup::Removal> removals;  // clients only
  double compute_s = 0.0;
  double comm_s = 0.0;
  uint64_t bytes_sent = 0;
  PartyCounters counters;
  bool aborted = false;
};

// Runs one party of a distributed EP-MPD to completion: executes its role
// in every cluster of the deterministic plan, level by level. Clients
// return their final set; the tee returns after serving every cluster.
ServeResult serve_party(PartyId self, const ClientSet& initial_set,
                        dedup::Variant variant, uint64_t seed,
                        const PartyNetConfig& net,
                        const ShapingConfig& shaping,
                        const dedup::DedupOptions& opts = {},
                        std::atomic<bool>* abort_flag = nullptr);

// Convenience driver: runs tee + m clients on loopback threads and
// aggregates the outcome. The differential tests compare this against the
// in-process coordinator byte for byte.
dedup::DedupOutcome run_over_sockets(const std::vector<ClientSet>& sets,
                                     dedup::Variant variant, uint64_t seed,
                                     const PartyNetConfig& net,
                                     const ShapingConfig& shaping,
                                     const dedup::DedupOptions& opts = {});

// Picks a listenable base port for `parties` consecutive ports.
uint16_t pick_base_port(uint32_t parties);

}  // namespace epmpd::net
