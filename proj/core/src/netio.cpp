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

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>
#include <unordered_set>

namespace epmpd::net {

const char* frame_error_name(FrameError e) {
  switch (e) {
    case FrameError::none: return "none";
    case FrameError::bad_magic: return "bad_magic";
    case FrameError::bad_version: return "bad_version";
    case FrameError::bad_msg_type: return "bad_msg_type";
    case FrameError::truncated: return "truncated";
    case FrameError::oversize_payload: return "oversize_payload";
  }
  return "?";
}

namespace {

bool valid_msg_type(uint8_t t) {
  return t >= static_cast<uint8_t>(MsgType::hello) &&
         t <= static_cast<uint8_t>(MsgType::done);
}

}  // namespace

Bytes encode_frame(MsgType type, BytesView payload) {
  Bytes out(kFrameHeaderSize + payload.size());
  std::memcpy(out.data(), kFrameMagic, 4);
  out[4] = kFrameVersion;
  out[5] = static_cast<uint8_t>(type);
  uint64_t len = payload.size();
  for (int i = 0; i < 8; i++) out[6 + i] = static_cast<uint8_t>(len >> (8 * i));
  if (!payload.empty()) {
    std::memcpy(out.data() + kFrameHeaderSize, payload.data(), payload.size());
  }
  return out;
}

FrameDecodeResult decode_frame(BytesView data, uint64_t payload_cap) {
  FrameDecodeResult result;
  if (data.size() < kFrameHeaderSize) {
    result.error = FrameError::truncated;
    return result;
  }
  if (!std::equal(kFrameMagic, kFrameMagic + 4, data.begin())) {
    result.error = FrameError::bad_magic;
    return result;
  }
  if (data[4] != kFrameVersion) {
    result.error = FrameError::bad_version;
    return result;
  }
  if (!valid_msg_type(data[5])) {
    result.error = FrameError::bad_msg_type;
    return result;
  }
  uint64_t len = get_u64_le(data.data() + 6);
  if (len >= payload_cap) {
    result.error = FrameError::oversize_payload;
    return result;
  }
  if (data.size() < kFrameHeaderSize + len) {
    result.error = FrameError::truncated;
    return result;
  }
  Frame f;
  f.type = static_cast<MsgType>(data[5]);
  f.payload.assign(data.begin() + kFrameHeaderSize,
                   data.begin() + static_cast<long>(kFrameHeaderSize + len));
  result.frame = std::move(f);
  result.consumed = kFrameHeaderSize + len;
  return result;
}

// --- shaped connection ----------------------------------------------------

namespace {

void write_all(int fd, const uint8_t* data, size_t n) {
  size_t sent = 0;
  while (sent < n) {
    ssize_t w = ::send(fd, data + sent, n - sent, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw ConnectionLost("send failed: " + std::string(strerror(errno)));
    }
    sent += static_cast<size_t>(w);
  }
}

// Reads exactly n bytes; polls in short ticks when an abort flag is given.
void read_all(int fd, uint8_t* data, size_t n,
              const std::atomic<bool>* abort_flag) {
  size_t got = 0;
  while (got < n) {
    if (abort_flag != nullptr) {
      if (abort_flag->load()) throw ProtocolAbort("aborted by signal");
      struct pollfd pfd{fd, POLLIN, 0};
      int pr = ::poll(&pfd, 1, 200);
      if (pr < 0 && errno != EINTR) {
        throw ConnectionLost("poll failed: " + std::string(strerror(errno)));
      }
      if (pr <= 0) continue;
    }
    ssize_t r = ::recv(fd, data + got, n - got, 0);
    if (r == 0) throw ConnectionLost("peer closed the connection");
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ConnectionLost("recv failed: " + std::string(strerror(errno)));
    }
    got += static_cast<size_t>(r);
  }
}

}  // namespace

ShapedConn::ShapedConn(int fd, ShapingConfig shaping)
    : fd_(fd), shaping_(std::move(shaping)) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

ShapedConn::~ShapedConn() {
  if (fd_ >= 0) ::close(fd_);
}

double ShapedConn::send_frame(MsgType type, BytesView payload) {
  std::lock_guard lock(send_mu_);
  Bytes frame = encode_frame(type, payload);
  auto start = std::chrono::steady_clock::now();
  const NetProfile& p = shaping_.profile;

  auto pace_until = [&](double target_s) {
    if (target_s <= 0.0) return;
    std::this_thread::sleep_until(start + std::chrono::duration<double>(
                                              target_s));
  };

  pace_until(p.rtt_s / 2.0);
  size_t sent = 0;
  while (sent < frame.size()) {
    size_t chunk =
        std::min<size_t>(shaping_.quantum_bytes, frame.size() - sent);
    write_all(fd_, frame.data() + sent, chunk);
    sent += chunk;
    if (!std::isinf(p.bandwidth_bps)) {
      pace_until(p.rtt_s / 2.0 +
                 8.0 * static_cast<double>(sent) / p.bandwidth_bps);
    }
  }
  bytes_sent_ += payload.size();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

Frame ShapedConn::recv_frame(const std::atomic<bool>* abort_flag) {
  uint8_t header[kFrameHeaderSize];
  read_all(fd_, header, sizeof(header), abort_flag);
  if (!std::equal(kFrameMagic, kFrameMagic + 4, header)) {
    throw ProtocolAbort("frame with bad magic");
  }
  if (header[4] != kFrameVersion) {
    throw HandshakeFailure("peer speaks frame version " +
                           std::to_string(header[4]));
  }
  if (!valid_msg_type(header[5])) {
    throw ProtocolAbort("frame with unregistered message type");
  }
  uint64_t len = get_u64_le(header + 6);
  if (len >= kDefaultPayloadCap) {
    throw ProtocolAbort("frame payload exceeds the cap");
  }
  Frame f;
  f.type = static_cast<MsgType>(header[5]);
  f.payload.resize(len);
  if (len > 0) read_all(fd_, f.payload.data(), len, abort_flag);
  return f;
}

// --- socket endpoint --------------------------------------------------------

namespace {

// Listening slots: tee on base, client i on base + i.
uint32_t port_slot(PartyId id) { return id.is_tee() ? 0 : id.index; }

Bytes hello_payload(PartyId self) {
  Bytes b;
  b.push_back(static_cast<uint8_t>(self.kind));
  put_u32_le(b, self.index);
  return b;
}

PartyId parse_hello(const Frame& f) {
  if (f.type != MsgType::hello || f.payload.size() != 5) {
    throw HandshakeFailure("malformed HELLO");
  }
  PartyId id;
  id.kind = static_cast<PartyKind>(f.payload[0]);
  id.index = get_u32_le(f.payload.data() + 1);
  return id;
}

int listen_on(const std::string& host, uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw BindFailure("socket: " + std::string(strerror(errno)));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw BindFailure("bad listen address " + host);
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(fd, 64) != 0) {
    int err = errno;
    ::close(fd);
    throw BindFailure("cannot listen on " + host + ":" +
                      std::to_string(port) + ": " + strerror(err));
  }
  return fd;
}

int dial(const std::string& host, uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw ConnectionLost("socket: " + std::string(strerror(errno)));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw ConnectionLost("bad address " + host);
  }
  // The peer's listener may come up a moment later than ours.
  for (int attempt = 0;; attempt++) {
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      return fd;
    }
    if ((errno == ECONNREFUSED || errno == EINTR) && attempt < 100) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      continue;
    }
    int err = errno;
    ::close(fd);
    throw ConnectionLost("connect to " + host + ":" + std::to_string(port) +
                         " failed: " + strerror(err));
  }
}

}  // namespace

uint16_t PartyNetConfig::port_of(PartyId id) const {
  return static_cast<uint16_t>(base_port + port_slot(id));
}

uint16_t pick_base_port(uint32_t parties) {
  // Probe for a run of free consecutive ports.
  for (int attempt = 0; attempt < 64; attempt++) {
    uint16_t base =
        static_cast<uint16_t>(21000 + (::getpid() * 131 + attempt * 977) %
                                          30000);
    bool ok = true;
    std::vector<int> fds;
    for (uint32_t i = 0; i <= parties && ok; i++) {
      try {
        fds.push_back(listen_on("127.0.0.1",
                                static_cast<uint16_t>(base + i)));
      } catch (const BindFailure&) {
        ok = false;
      }
    }
    for (int fd : fds) ::close(fd);
    if (ok) return base;
  }
  throw BindFailure("no free port range found");
}

SocketEndpoint::SocketEndpoint(PartyId self, const PartyNetConfig& net,
                               const ShapingConfig& shaping, Rng rng)
    : self_(self), net_(net), shaping_(shaping), rng_(std::move(rng)) {
  listen_fd_ = listen_on(net_.host, net_.port_of(self_));
  accept_thread_ = std::thread([this] { accept_loop(); });
}

SocketEndpoint::~SocketEndpoint() { shutdown(); }

void SocketEndpoint::shutdown() {
  bool expected = false;
  if (!stopping_.compare_exchange_strong(expected, true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  cv_.notify_all();
  if (accept_thread_.joinable()) accept_thread_.join();
}

void SocketEndpoint::accept_loop() {
  while (!stopping_.load()) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;  // listener closed
    }
    try {
      auto conn = std::make_unique<ShapedConn>(fd, shaping_);
      PartyId peer = parse_hello(conn->recv_frame(&abort_));
      std::lock_guard lock(mu_);
      in_[peer] = std::move(conn);
      cv_.notify_all();
    } catch (const Error&) {
      // Handshake failed; this connection is unusable and dropped. The
      // blocked reader, if any, will time out through its abort flag.
    }
  }
}

ShapedConn& SocketEndpoint::outgoing(PartyId to) {
  std::lock_guard lock(mu_);
  auto it = out_.find(to);
  if (it != out_.end()) return *it->second;
  int fd = dial(net_.host, net_.port_of(to));
  auto conn = std::make_unique<ShapedConn>(fd, shaping_);
  conn->send_frame(MsgType::hello, hello_payload(self_));
  auto [ins, _] = out_.emplace(to, std::move(conn));
  return *ins->second;
}

ShapedConn& SocketEndpoint::incoming(PartyId from) {
  std::unique_lock lock(mu_);
  // The peer dials on its first send; if it never comes up, fail rather
  // than hang the whole run.
  bool arrived = cv_.wait_for(lock, std::chrono::seconds(60), [&] {
    return in_.contains(from) || stopping_.load() || abort_.load();
  });
  if (!arrived || !in_.contains(from)) {
    throw ConnectionLost("no connection from " + from.str());
  }
  return *in_.at(from);
}

void SocketEndpoint::send(PartyId to, MsgType type, Bytes payload,
                          const Phase&) {
  comm_elapsed_ += outgoing(to).send_frame(type, payload);
  extra_bytes_ += payload.size();
}

Bytes SocketEndpoint::recv(PartyId from, MsgType expect, const Phase&) {
  Frame f = incoming(from).recv_frame(&abort_);
  if (f.type != expect) {
    throw ProtocolAbort(std::string("expected ") + msg_type_name(expect) +
                        " from " + from.str() + ", got " +
                        msg_type_name(f.type));
  }
  return std::move(f.payload);
}

void SocketEndpoint::record_compute(const Phase& phase, double seconds) {
  compute_[phase.key()] += seconds;
}

void SocketEndpoint::send_done(PartyId to) {
  comm_elapsed_ += outgoing(to).send_frame(MsgType::done, {});
}

void SocketEndpoint::wait_done(PartyId from) {
  Frame f = incoming(from).recv_frame(&abort_);
  if (f.type != MsgType::done) {
    throw ProtocolAbort("expected DONE from " + from.str());
  }
}

double SocketEndpoint::total_compute() const {
  double total = 0.0;
  for (const auto& [phase, s] : compute_) total += s;
  return total;
}

double SocketEndpoint::compute_in(const std::string& phase_key) const {
  auto it = compute_.find(phase_key);
  return it == compute_.end() ? 0.0 : it->second;
}

uint64_t SocketEndpoint::bytes_sent() const { return extra_bytes_; }

// --- distributed EP-MPD -------------------------------------------------------

namespace {

bool member_of(uint32_t c, const std::vector<uint32_t>& group) {
  return std::find(group.begin(), group.end(), c) != group.end();
}

void run_client_cluster(SocketEndpoint& ep, uint32_t self,
                        const dedup::Cluster& cluster, dedup::Variant variant,
                        int level, const dedup::DedupOptions& opts,
                        bool first_participation, ClientSet& set,
                        std::vector<dedup::Removal>& removals,
                        std::unordered_map<Element, crypto::PrfOutput,
                                           ElementHash>& cache) {
  gpsi::GpsiInstance inst{cluster.group0, cluster.group1};
  bool in_g0 = member_of(self, cluster.group0);
  const gpsi::GpsiOptions& gopts = opts.gpsi;

  std::optional<gpsi::IntersectionReport> report;
  switch (variant) {
    case dedup::Variant::I: {
      gpsi::Egpsi1Client client(self, set, inst, level, gopts);
      if (in_g0) {
        client.setup_send_keys(ep);
      } else {
        client.setup_recv_keys(ep);
      }
      client.encrypt_and_submit(ep);
      if (gopts.both_sides || in_g0) report = client.extract(ep);
      break;
    }
    case dedup::Variant::II: {
      gpsi::Egpsi2Client client(self, set, inst, level, gopts,
                                first_participation, &cache);
      client.oprf_encrypt(ep);
      client.exchange(ep);
      if (gopts.both_sides || in_g0) report = client.extract(ep);
      break;
    }
    case dedup::Variant::III: {
      gpsi::Egpsi3Client client(self, set, inst, level, gopts);
      if (in_g0) {
        report = client.find_intersections(ep);
      } else {
        client.broadcast_convergent(ep);
      }
      break;
    }
  }
  if (in_g0 && report.has_value()) {
    dedup::apply_report_deletions(self, *report, set, removals);
  }
}

void run_tee_cluster(SocketEndpoint& ep, const dedup::Cluster& cluster,
                     dedup::Variant variant, int level,
                     const dedup::DedupOptions& opts,
                     const std::vector<uint32_t>& first_timers,
                     const crypto::OprfKey* oprf_key) {
  gpsi::GpsiInstance inst{cluster.group0, cluster.group1};
  switch (variant) {
    case dedup::Variant::I: {
      gpsi::Egpsi1Tee tee(inst, level, opts.gpsi);
      tee.match_and_report(ep);
      break;
    }
    case dedup::Variant::II: {
      // Only first-time participants run their OPRF round here; everyone
      // else is served from cache and stays silent.
      if (first_timers.empty()) break;
      gpsi::Egpsi2Tee tee(*oprf_key, inst, level);
      tee.serve_oprf(ep, first_timers);
      break;
    }
    case dedup::Variant::III:
      break;
  }
}

}  // namespace

ServeResult serve_party(PartyId self, const ClientSet& initial_set,
                        dedup::Variant variant, uint64_t seed,
                        const PartyNetConfig& net,
                        const ShapingConfig& shaping,
                        const dedup::DedupOptions& opts,
                        std::atomic<bool>* abort_flag) {
  ServeResult result;
  result.self = self;
  if (variant == dedup::Variant::III && self.is_tee()) return result;

  dedup::ClusterPlan plan = dedup::build_cluster_plan(net.clients);
  SocketEndpoint ep(self, net, shaping, party_rng(seed, self));

  // Mirror the requested abort into the endpoint's poll loops.
  std::atomic<bool> watcher_stop{false};
  std::thread abort_watcher;
  if (abort_flag != nullptr) {
    abort_watcher = std::thread([&] {
      while (!watcher_stop.load()) {
        if (abort_flag->load()) {
          ep.request_abort();
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
      }
    });
  }

  try {
    if (self.is_tee()) {
      std::optional<crypto::OprfKey> key;
      if (variant == dedup::Variant::II) {
        key = crypto::OprfKey::random(ep.rng());
      }
      std::unordered_set<uint32_t> participated;
      for (size_t d = 0; d < plan.levels.size(); d++) {
        for (const dedup::Cluster& cluster : plan.levels[d]) {
          gpsi::GpsiInstance inst{cluster.group0, cluster.group1};
          std::vector<uint32_t> first_timers;
          for (uint32_t c : inst.all_members()) {
            if (participated.insert(c).second) first_timers.push_back(c);
          }
          run_tee_cluster(ep, cluster, variant, static_cast<int>(d) + 1, opts,
                          first_timers, key.has_value() ? &*key : nullptr);
        }
      }
      for (uint32_t c = 1; c <= net.clients; c++) {
        ep.wait_done(PartyId::client(c));
      }
    } else {
      ClientSet set;
      {
        dedup::LocalDedupResult local = dedup::local_dedup(initial_set);
        if (local.removed_count > 0 && opts.strict) {
          throw DuplicateWithinSet("client " + std::to_string(self.index) +
                                   " holds internally duplicated elements");
        }
        set = std::move(local.set);
      }
      std::vector<dedup::Removal> removals;
      std::unordered_map<Element, crypto::PrfOutput, ElementHash> cache;
      bool participated = false;
      for (size_t d = 0; d < plan.levels.size(); d++) {
        for (const dedup::Cluster& cluster : plan.levels[d]) {
          if (!member_of(self.index, cluster.group0) &&
              !member_of(self.index, cluster.group1)) {
            continue;
          }
          bool first = !participated;
          participated = true;
          run_client_cluster(ep, self.index, cluster, variant,
                             static_cast<int>(d) + 1, opts, first, set,
                             removals, cache);
        }
      }
      if (variant != dedup::Variant::III) ep.send_done(PartyId::tee());
      result.final_set = std::move(set);
      result.removals = std::move(removals);
    }
  } catch (const Error&) {
    if (abort_flag != nullptr && abort_flag->load()) {
      result.aborted = true;
    } else {
      watcher_stop.store(true);
      if (abort_watcher.joinable()) abort_watcher.join();
      throw;
    }
  }

  watcher_stop.store(true);
  if (abort_watcher.joinable()) abort_watcher.join();
  result.compute_s = ep.total_compute();
  result.bytes_sent = ep.bytes_sent();
  result.counters = ep.counters();
  result.comm_s = ep.comm_elapsed();
  ep.shutdown();
  return result;
}

dedup::DedupOutcome run_over_sockets(const std::vector<ClientSet>& sets,
                                     dedup::Variant variant, uint64_t seed,
                                     const PartyNetConfig& net,
                                     const ShapingConfig& shaping,
                                     const dedup::DedupOptions& opts) {
  uint32_t m = static_cast<uint32_t>(sets.size());
  std::vector<std::future<ServeResult>> futures;

  if (variant != dedup::Variant::III) {
    futures.push_back(std::async(std::launch::async, [&] {
      return serve_party(PartyId::tee(), {}, variant, seed, net, shaping,
                         opts);
    }));
  }
  for (uint32_t c = 1; c <= m; c++) {
    futures.push_back(std::async(std::launch::async, [&, c] {
      return serve_party(PartyId::client(c), sets[c - 1], variant, seed, net,
                         shaping, opts);
    }));
  }

  dedup::DedupOutcome outcome;
  outcome.final_sets.resize(m);
  outcome.invocations = dedup::build_cluster_plan(m).total_clusters();
  for (auto& f : futures) {
    ServeResult r = f.get();
    if (r.self.kind == PartyKind::client) {
      outcome.final_sets[r.self.index - 1] = std::move(r.final_set);
      outcome.removals.insert(outcome.removals.end(), r.removals.begin(),
                              r.removals.end());
    }
  }
  dedup::sort_removals(outcome.removals);
  return outcome;
}

}  // namespace epmpd::net
