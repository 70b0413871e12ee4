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

#include "epmpd/rng.hpp"
#include "epmpd/runtime.hpp"

namespace epmpd {

// One party's view of the world: its identity, its randomness, and a way to
// exchange messages and account its own work. Protocol steps are written
// against this interface so the same party code runs on the in-process bus
// and over TCP sockets.
class Endpoint {
 public:
  virtual ~Endpoint() = default;

  virtual PartyId self() const = 0;
  virtual Rng& rng() = 0;

  virtual void send(PartyId to, MsgType type, Bytes payload,
                    const Phase& phase) = 0;
  virtual Bytes recv(PartyId from, MsgType expect, const Phase& phase) = 0;

  virtual PartyCounters& counters() = 0;
  virtual void record_compute(const Phase& phase, double seconds) = 0;

  // Attributes the elapsed time of `work` to this party under `phase`.
  template <typename F>
  auto timed(const Phase& phase, F&& work) -> decltype(work()) {
    auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(work())>) {
      work();
      record_compute(phase, std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - start)
                                .count());
    } else {
      auto result = work();
      record_compute(phase, std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - start)
                                .count());
      return result;
    }
  }
};

// Runtime-backed endpoint for coordinator-driven in-process runs.
class InprocEndpoint : public Endpoint {
 public:
  InprocEndpoint(Runtime& rt, PartyId self, Rng rng)
      : rt_(rt), self_(self), rng_(std::move(rng)) {}

  PartyId self() const override { return self_; }
  Rng& rng() override { return rng_; }

  void send(PartyId to, MsgType type, Bytes payload,
            const Phase& phase) override {
    rt_.send(self_, to, type, std::move(payload), phase);
  }
  Bytes recv(PartyId from, MsgType expect, const Phase&) override {
    return rt_.recv(self_, from, expect);
  }
  PartyCounters& counters() override { return rt_.counters(self_); }
  void record_compute(const Phase& phase, double seconds) override {
    rt_.record_compute(self_, phase, seconds);
  }

 private:
  Runtime& rt_;
  PartyId self_;
  Rng rng_;
};

// Derives a party-local rng from the run seed so results do not depend on
// transport or scheduling.
Rng party_rng(uint64_t run_seed, PartyId id);

}  // namespace epmpd
