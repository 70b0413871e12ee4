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

#include <algorithm>
#include <cmath>

#include "epmpd/endpoint.hpp"

namespace epmpd {

std::string PartyId::str() const {
  return kind == PartyKind::tee ? "tee" : "C" + std::to_string(index);
}

const char* msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::hello: return "HELLO";
    case MsgType::key_transfer: return "KEY_TRANSFER";
    case MsgType::enc_set: return "ENC_SET";
    case MsgType::dup_report: return "DUP_REPORT";
    case MsgType::oprf_req: return "OPRF_REQ";
    case MsgType::oprf_resp: return "OPRF_RESP";
    case MsgType::prf_set: return "PRF_SET";
    case MsgType::set_broadcast: return "SET_BROADCAST";
    case MsgType::done: return "DONE";
  }
  return "?";
}

double comm_time(uint64_t payload_bytes, const NetProfile& profile) {
  if (std::isinf(profile.bandwidth_bps) && profile.rtt_s == 0.0) return 0.0;
  double transfer = std::isinf(profile.bandwidth_bps)
                        ? 0.0
                        : 8.0 * static_cast<double>(payload_bytes) /
                              profile.bandwidth_bps;
  return profile.rtt_s / 2.0 + transfer;
}

PartyCounters CounterReport::totals(PartyKind kind) const {
  PartyCounters total;
  for (const auto& [id, c] : per_party) {
    if (id.kind != kind) continue;
    total.prp_calls += c.prp_calls;
    total.oprf_rounds += c.oprf_rounds;
    total.hash_calls += c.hash_calls;
  }
  return total;
}

PartyId Runtime::register_party(PartyKind kind, uint32_t index) {
  std::lock_guard lock(mu_);
  PartyId id{kind, kind == PartyKind::tee ? 0u : index};
  if (std::find(parties_.begin(), parties_.end(), id) != parties_.end()) {
    throw DuplicateParty("party " + id.str() + " already registered");
  }
  parties_.push_back(id);
  counters_[id];
  return id;
}

bool Runtime::is_registered(PartyId id) const {
  std::lock_guard lock(mu_);
  return std::find(parties_.begin(), parties_.end(), id) != parties_.end();
}

void Runtime::send(PartyId from, PartyId to, MsgType type, Bytes payload,
                   const Phase& phase) {
  std::lock_guard lock(mu_);
  auto registered = [&](PartyId id) {
    return std::find(parties_.begin(), parties_.end(), id) != parties_.end();
  };
  if (!registered(from)) throw UnknownParty("unknown sender " + from.str());
  if (!registered(to)) throw UnknownParty("unknown receiver " + to.str());

  uint64_t n = payload.size();
  bytes_sent_[from] += n;
  std::string key = phase.key();
  phase_bytes_[key] += n;
  LinkLoad& link = phase_link_bytes_[key][{from, to}];
  link.bytes += n;
  link.frames += 1;
  transcript_.push_back({from, to, type, payload, key});
  inboxes_[{to, from}].q.emplace_back(type, std::move(payload));
  undelivered_++;
}

Bytes Runtime::recv(PartyId to, PartyId from, MsgType expect) {
  std::lock_guard lock(mu_);
  auto it = inboxes_.find({to, from});
  if (it == inboxes_.end() || it->second.q.empty()) {
    throw ProtocolAbort("no pending message " + from.str() + " -> " +
                        to.str() + " (" + msg_type_name(expect) + ")");
  }
  auto [type, payload] = std::move(it->second.q.front());
  it->second.q.pop_front();
  undelivered_--;
  if (type != expect) {
    throw ProtocolAbort(std::string("expected ") + msg_type_name(expect) +
                        " from " + from.str() + ", got " +
                        msg_type_name(type));
  }
  return payload;
}

bool Runtime::has_pending(PartyId to, PartyId from) const {
  std::lock_guard lock(mu_);
  auto it = inboxes_.find({to, from});
  return it != inboxes_.end() && !it->second.q.empty();
}

void Runtime::begin_measure() {
  std::lock_guard lock(mu_);
  if (measuring_) throw MeasureNesting("nested measure() call");
  measuring_ = true;
}

void Runtime::end_measure() {
  std::lock_guard lock(mu_);
  measuring_ = false;
}

void Runtime::record_compute(PartyId party, const Phase& phase,
                             double seconds) {
  std::lock_guard lock(mu_);
  compute_[{party, phase.key()}] += seconds;
}

PartyCounters& Runtime::counters(PartyId party) {
  std::lock_guard lock(mu_);
  return counters_[party];
}

size_t Runtime::pending_messages() const {
  std::lock_guard lock(mu_);
  return undelivered_;
}

std::vector<PartyId> Runtime::clients() const {
  std::lock_guard lock(mu_);
  std::vector<PartyId> out;
  for (PartyId p : parties_)
    if (p.kind == PartyKind::client) out.push_back(p);
  std::sort(out.begin(), out.end());
  return out;
}

std::pair<TimingReport, CounterReport> Runtime::finalize(
    const NetProfile& profile) const {
  std::lock_guard lock(mu_);
  if (undelivered_ != 0) {
    throw IncompleteRun(std::to_string(undelivered_) +
                        " messages were never consumed");
  }

  TimingReport timing;
  for (PartyId p : parties_) {
    timing.per_party_compute[p] = 0.0;
    timing.per_party_bytes_sent[p] = 0;
  }
  for (const auto& [key, seconds] : compute_) {
    timing.per_party_compute[key.first] += seconds;
  }
  for (const auto& [party, bytes] : bytes_sent_) {
    timing.per_party_bytes_sent[party] = bytes;
  }

  // Phase order = first appearance in the compute/byte records.
  std::vector<std::string> phase_order;
  auto note_phase = [&](const std::string& p) {
    if (std::find(phase_order.begin(), phase_order.end(), p) ==
        phase_order.end()) {
      phase_order.push_back(p);
    }
  };
  for (const auto& [key, seconds] : compute_) note_phase(key.second);
  for (const auto& [p, bytes] : phase_bytes_) note_phase(p);

  for (const std::string& p : phase_order) {
    PhaseTiming pt;
    pt.phase = p;
    for (const auto& [key, seconds] : compute_) {
      if (key.second != p) continue;
      if (key.first.is_tee()) {
        pt.tee_s += seconds;
      } else {
        pt.max_client_s = std::max(pt.max_client_s, seconds);
      }
    }
    // Directed links transfer independently, so the phase waits for its
    // heaviest link. Every frame on a link pays the half-RTT.
    auto links = phase_link_bytes_.find(p);
    if (links != phase_link_bytes_.end()) {
      for (const auto& [pair, load] : links->second) {
        double link_s = comm_time(load.bytes, profile) +
                        static_cast<double>(load.frames - 1) *
                            profile.rtt_s / 2.0;
        pt.comm_s = std::max(pt.comm_s, link_s);
      }
    }
    timing.wall_clock_estimate += pt.max_client_s + pt.tee_s + pt.comm_s;
    timing.per_phase.push_back(std::move(pt));
  }

  CounterReport counters;
  counters.per_party = counters_;
  return {timing, counters};
}

Rng party_rng(uint64_t run_seed, PartyId id) {
  return Rng::seeded(run_seed, "party/" + id.str());
}

}  // namespace epmpd
