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

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "epmpd/bytes.hpp"
#include "epmpd/errors.hpp"

// Multi-party execution environment: party registry, authenticated
// in-process message bus with per-pair FIFO delivery, per-party compute and
// byte accounting, and the simulated wall-clock model. Parties are driven
// sequentially on one machine; the wall-clock estimate assumes the clients
// would have run simultaneously, so each phase contributes
//
//   max(client compute) + tee compute + comm time
//
// where comm time is the analytic transfer time of the phase's heaviest
// directed link (links are independent, so parallel transfers overlap).

namespace epmpd {

enum class PartyKind : uint8_t { client = 0, tee = 1 };

struct PartyId {
  PartyKind kind = PartyKind::client;
  uint32_t index = 0;  // client indices are 1-based; the tee uses 0

  static PartyId client(uint32_t index) { return {PartyKind::client, index}; }
  static PartyId tee() { return {PartyKind::tee, 0}; }
  bool is_tee() const { return kind == PartyKind::tee; }
  auto operator<=>(const PartyId&) const = default;
  std::string str() const;
};

enum class MsgType : uint8_t {
  hello = 1,
  key_transfer = 2,
  enc_set = 3,
  dup_report = 4,
  oprf_req = 5,
  oprf_resp = 6,
  prf_set = 7,
  set_broadcast = 8,
  done = 9,
};

const char* msg_type_name(MsgType t);

// Protocol phases keep the figure names; the tree level qualifies them so
// that per-level barriers survive aggregation ("d2:encrypt").
struct Phase {
  std::string name;
  int level = 0;

  std::string key() const {
    return level > 0 ? "d" + std::to_string(level) + ":" + name : name;
  }
};

inline const char* kPhaseSetup = "setup";
inline const char* kPhaseEncrypt = "encrypt";
inline const char* kPhaseTeeDedup = "tee-dedup";
inline const char* kPhaseExtract = "extract";
inline const char* kPhaseExchange = "exchange";

struct NetProfile {
  // Bits per second; infinity means unconstrained.
  double bandwidth_bps = std::numeric_limits<double>::infinity();
  double rtt_s = 0.0;
  std::string label = "ideal";

  static NetProfile ideal() { return {}; }
  static NetProfile lan() { return {1e9, 0.00002, "lan"}; }
  static NetProfile wan() { return {1e8, 0.1, "wan"}; }
  static NetProfile custom(double bandwidth_bps, double rtt_s) {
    return {bandwidth_bps, rtt_s, "custom"};
  }
};

// Analytic one-way transfer time: rtt/2 + 8*bytes/bandwidth.
double comm_time(uint64_t payload_bytes, const NetProfile& profile);

struct TranscriptRecord {
  PartyId from;
  PartyId to;
  MsgType type = MsgType::hello;
  Bytes payload;
  std::string phase;
};

using Transcript = std::vector<TranscriptRecord>;

struct PhaseTiming {
  std::string phase;
  double max_client_s = 0.0;
  double tee_s = 0.0;
  double comm_s = 0.0;
};

struct TimingReport {
  std::map<PartyId, double> per_party_compute;
  std::map<PartyId, uint64_t> per_party_bytes_sent;
  std::vector<PhaseTiming> per_phase;
  double wall_clock_estimate = 0.0;
};

struct PartyCounters {
  uint64_t prp_calls = 0;    // prp_encrypt invocations
  uint64_t oprf_rounds = 0;  // per-element OPRF round-trips (evals on the tee)
  uint64_t hash_calls = 0;   // hash_derived_key invocations
};

struct CounterReport {
  std::map<PartyId, PartyCounters> per_party;
  PartyCounters totals(PartyKind kind) const;
};

class Runtime {
 public:
  Runtime() = default;
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  PartyId register_party(PartyKind kind, uint32_t index);
  bool is_registered(PartyId id) const;

  // Delivers intact and in order per (from, to) pair; accounts payload
  // bytes and comm time under `phase`.
  void send(PartyId from, PartyId to, MsgType type, Bytes payload,
            const Phase& phase);
  // Pops the oldest pending message from `from`; ProtocolAbort if none is
  // pending or the type differs.
  Bytes recv(PartyId to, PartyId from, MsgType expect);
  bool has_pending(PartyId to, PartyId from) const;

  // Attributes the elapsed time of `work` to (party, phase). Nesting is a
  // contract violation and raises MeasureNesting.
  template <typename F>
  auto measure(PartyId party, const Phase& phase, F&& work)
      -> decltype(work()) {
    begin_measure();
    auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(work())>) {
      work();
      record_compute(party, phase,
                     std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count());
      end_measure();
    } else {
      auto result = work();
      record_compute(party, phase,
                     std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count());
      end_measure();
      return result;
    }
  }

  // Low-level primitive behind measure(); also the injection point for
  // tests that need synthetic timings.
  void record_compute(PartyId party, const Phase& phase, double seconds);

  PartyCounters& counters(PartyId party);
  void add_invocations(uint64_t n) { invocations_ += n; }
  uint64_t invocations() const { return invocations_; }

  // Requires every sent message to have been consumed (IncompleteRun
  // otherwise), then folds accounting into the reports.
  std::pair<TimingReport, CounterReport> finalize(
      const NetProfile& profile) const;

  const Transcript& transcript() const { return transcript_; }
  size_t pending_messages() const;
  std::vector<PartyId> clients() const;

 private:
  void begin_measure();
  void end_measure();

  struct PendingQueue {
    std::deque<std::pair<MsgType, Bytes>> q;
  };

  mutable std::mutex mu_;
  std::vector<PartyId> parties_;
  std::map<std::pair<PartyId, PartyId>, PendingQueue> inboxes_;  // (to, from)
  std::map<std::pair<PartyId, std::string>, double> compute_;    // (party, phase)
  std::map<PartyId, uint64_t> bytes_sent_;
  // phase -> directed pair -> (bytes, frames), for the per-link comm model
  struct LinkLoad {
    uint64_t bytes = 0;
    uint64_t frames = 0;
  };
  std::map<std::string, std::map<std::pair<PartyId, PartyId>, LinkLoad>>
      phase_link_bytes_;
  std::map<std::string, uint64_t> phase_bytes_;
  std::map<PartyId, PartyCounters> counters_;
  Transcript transcript_;
  uint64_t invocations_ = 0;
  size_t undelivered_ = 0;
  bool measuring_ = false;
};

}  // namespace epmpd
