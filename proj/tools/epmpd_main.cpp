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

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "epmpd/datagen.hpp"
#include "epmpd/dedup.hpp"
#include "epmpd/netio.hpp"
#include "epmpd/oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace epmpd;

namespace {

// Exit codes: 0 success, 2 usage, 3 infeasible spec, 4 verification
// failure, 5 transport failure.
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitVerification = 4;
constexpr int kExitTransport = 5;

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) { g_interrupted.store(true); }

uint64_t default_seed() {
  if (const char* env = std::getenv("EPMPD_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      // fall through to the fixed default
    }
  }
  return 1;
}

NetProfile profile_from(const std::string& name, double bw, double rtt) {
  if (name == "ideal") return NetProfile::ideal();
  if (name == "lan") return NetProfile::lan();
  if (name == "wan") return NetProfile::wan();
  if (name == "custom") return NetProfile::custom(bw, rtt);
  throw Error("unknown net profile '" + name + "'");
}

struct RunStats {
  double total_s = 0.0;
  double client_avg_s = 0.0;
  double client_max_s = 0.0;
  double tee_s = 0.0;
  uint64_t bytes_clients = 0;
  uint64_t bytes_tee = 0;
  uint64_t prp_calls = 0;
  uint64_t oprf_rounds = 0;
  uint64_t invocations = 0;
};

RunStats stats_from_runtime(const Runtime& rt, const NetProfile& profile) {
  auto [timing, counters] = rt.finalize(profile);
  RunStats s;
  s.total_s = timing.wall_clock_estimate;
  size_t clients = 0;
  for (const auto& [id, secs] : timing.per_party_compute) {
    if (id.is_tee()) {
      s.tee_s += secs;
    } else {
      clients++;
      s.client_avg_s += secs;
      s.client_max_s = std::max(s.client_max_s, secs);
    }
  }
  if (clients > 0) s.client_avg_s /= static_cast<double>(clients);
  for (const auto& [id, bytes] : timing.per_party_bytes_sent) {
    (id.is_tee() ? s.bytes_tee : s.bytes_clients) += bytes;
  }
  PartyCounters client_totals = counters.totals(PartyKind::client);
  s.prp_calls = client_totals.prp_calls;
  s.oprf_rounds = client_totals.oprf_rounds;
  s.invocations = rt.invocations();
  return s;
}

const char* kCsvHeader =
    "variant,clients,set_size,dup_pct,transport,profile,rep,seed,total_s,"
    "client_avg_s,client_max_s,tee_s,bytes_clients,bytes_tee,prp_calls,"
    "oprf_rounds,invocations";

std::string csv_row(const std::string& variant, uint32_t clients,
                    uint32_t set_size, double dup_pct,
                    const std::string& transport, const std::string& profile,
                    uint32_t rep, uint64_t seed, const RunStats& s) {
  std::ostringstream os;
  os << variant << "," << clients << "," << set_size << "," << dup_pct << ","
     << transport << "," << profile << "," << rep << "," << seed << ","
     << s.total_s << "," << s.client_avg_s << "," << s.client_max_s << ","
     << s.tee_s << "," << s.bytes_clients << "," << s.bytes_tee << ","
     << s.prp_calls << "," << s.oprf_rounds << "," << s.invocations;
  return os.str();
}

void save_final_sets(const std::vector<ClientSet>& sets,
                     const data::WorkloadSpec& spec, const fs::path& dir) {
  data::Workload out;
  out.spec = spec;
  out.sets = sets;
  data::save_workload(out, dir);
}

// --- tcp orchestration ------------------------------------------------------

struct TcpConfig {
  uint32_t clients = 0;
  std::string variant = "I";
  uint64_t seed = 1;
  std::string host = "127.0.0.1";
  uint16_t base_port = 0;
  std::string profile = "ideal";
  double bandwidth_bps = 0.0;
  double rtt_s = 0.0;
  uint64_t quantum = 64 * 1024;
  std::string workload;
  std::string out;
  bool strict = true;
};

json tcp_config_to_json(const TcpConfig& c) {
  return json{{"clients", c.clients},
              {"variant", c.variant},
              {"seed", c.seed},
              {"host", c.host},
              {"base_port", c.base_port},
              {"profile", c.profile},
              {"bandwidth_bps", c.bandwidth_bps},
              {"rtt_s", c.rtt_s},
              {"quantum", c.quantum},
              {"workload", c.workload},
              {"out", c.out},
              {"strict", c.strict}};
}

TcpConfig tcp_config_from_json(const json& j) {
  TcpConfig c;
  c.clients = j.at("clients").get<uint32_t>();
  c.variant = j.value("variant", "I");
  c.seed = j.value("seed", uint64_t{1});
  c.host = j.value("host", "127.0.0.1");
  c.base_port = j.value("base_port", uint16_t{0});
  c.profile = j.value("profile", "ideal");
  c.bandwidth_bps = j.value("bandwidth_bps", 0.0);
  c.rtt_s = j.value("rtt_s", 0.0);
  c.quantum = j.value("quantum", uint64_t{64 * 1024});
  c.workload = j.value("workload", "");
  c.out = j.value("out", "");
  c.strict = j.value("strict", true);
  return c;
}

int run_serve(const std::string& role, uint32_t index,
              const std::string& config_path,
              const std::string& listen_override,
              const std::string& connect_override) {
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "cannot open config " << config_path << "\n";
    return kExitUsage;
  }
  TcpConfig cfg = tcp_config_from_json(json::parse(in));
  auto apply_endpoint = [&](const std::string& spec) {
    if (spec.empty()) return;
    size_t colon = spec.rfind(':');
    if (colon == std::string::npos) throw Error("expected host:port");
    cfg.host = spec.substr(0, colon);
    cfg.base_port = static_cast<uint16_t>(std::stoi(spec.substr(colon + 1)));
  };
  apply_endpoint(listen_override);
  apply_endpoint(connect_override);

  net::PartyNetConfig netcfg;
  netcfg.clients = cfg.clients;
  netcfg.host = cfg.host;
  netcfg.base_port = cfg.base_port;
  net::ShapingConfig shaping{
      profile_from(cfg.profile, cfg.bandwidth_bps, cfg.rtt_s), cfg.quantum};

  PartyId self = role == "tee" ? PartyId::tee() : PartyId::client(index);
  ClientSet initial;
  if (!self.is_tee()) {
    initial = data::load_client_file(
        data::client_file_name(cfg.workload, self.index));
  }

  dedup::DedupOptions opts;
  opts.strict = cfg.strict;
  std::signal(SIGINT, handle_sigint);
  net::ServeResult result;
  int rc = 0;
  try {
    result =
        net::serve_party(self, initial, dedup::variant_from_string(cfg.variant),
                         cfg.seed, netcfg, shaping, opts, &g_interrupted);
    if (result.aborted) rc = 130;
  } catch (const Error& e) {
    std::cerr << self.str() << ": " << e.what() << "\n";
    rc = kExitTransport;
  }

  // Flush the (possibly partial) report.
  if (!cfg.out.empty()) {
    fs::create_directories(cfg.out);
    json report{{"party", self.str()},
                {"aborted", result.aborted},
                {"compute_s", result.compute_s},
                {"comm_s", result.comm_s},
                {"bytes_sent", result.bytes_sent},
                {"prp_calls", result.counters.prp_calls},
                {"oprf_rounds", result.counters.oprf_rounds},
                {"hash_calls", result.counters.hash_calls}};
    if (!self.is_tee() && rc == 0) {
      json removals = json::array();
      for (const auto& r : result.removals) {
        removals.push_back({{"element", *r.element.as_u32()},
                            {"counterpart", r.counterpart}});
      }
      report["removals"] = removals;
      std::ostringstream values;
      for (size_t i = 0; i < result.final_set.size(); i++) {
        if (i > 0) values << " ";
        values << *result.final_set[i].as_u32();
      }
      report["final_set"] = values.str();
    }
    std::ofstream out(fs::path(cfg.out) / (self.str() + ".json"));
    out << report.dump(2) << "\n";
  }
  return rc;
}

// Spawns `serve` children for the tee and every client, waits, and collects
// their reports.
int run_dedup_tcp(const TcpConfig& cfg, const fs::path& self_exe,
                  dedup::DedupOutcome& outcome, RunStats& stats) {
  fs::path out_dir(cfg.out);
  fs::create_directories(out_dir);
  fs::path config_path = out_dir / "tcp_config.json";
  {
    std::ofstream out(config_path);
    out << tcp_config_to_json(cfg).dump(2) << "\n";
  }

  auto spawn = [&](const std::string& role, uint32_t index) -> pid_t {
    pid_t pid = ::fork();
    if (pid != 0) return pid;
    std::string idx = std::to_string(index);
    ::execl(self_exe.c_str(), self_exe.c_str(), "serve", "--role",
            role.c_str(), "--index", idx.c_str(), "--config",
            config_path.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  };

  auto started = std::chrono::steady_clock::now();
  std::vector<pid_t> children;
  bool with_tee = cfg.variant != "III";
  if (with_tee) children.push_back(spawn("tee", 0));
  for (uint32_t c = 1; c <= cfg.clients; c++) {
    children.push_back(spawn("client", c));
  }

  bool ok = true;
  for (pid_t pid : children) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ok = false;
  }
  stats.total_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  if (!ok) return kExitTransport;

  outcome.final_sets.assign(cfg.clients, {});
  outcome.invocations = dedup::build_cluster_plan(cfg.clients).total_clusters();
  stats.invocations = outcome.invocations;
  size_t clients_seen = 0;
  for (uint32_t c = 0; c <= cfg.clients; c++) {
    if (c == 0 && !with_tee) continue;
    PartyId id = c == 0 ? PartyId::tee() : PartyId::client(c);
    fs::path report_path = out_dir / (id.str() + ".json");
    std::ifstream in(report_path);
    if (!in) return kExitTransport;
    json report = json::parse(in);
    double compute = report.value("compute_s", 0.0);
    uint64_t bytes = report.value("bytes_sent", uint64_t{0});
    if (id.is_tee()) {
      stats.tee_s += compute;
      stats.bytes_tee += bytes;
    } else {
      clients_seen++;
      stats.client_avg_s += compute;
      stats.client_max_s = std::max(stats.client_max_s, compute);
      stats.bytes_clients += bytes;
      stats.prp_calls += report.value("prp_calls", uint64_t{0});
      stats.oprf_rounds += report.value("oprf_rounds", uint64_t{0});
      std::istringstream values(report.value("final_set", std::string{}));
      uint32_t v;
      while (values >> v) {
        outcome.final_sets[c - 1].push_back(Element::from_u32(v));
      }
      for (const auto& r : report.value("removals", json::array())) {
        outcome.removals.push_back(
            {c, Element::from_u32(r.at("element").get<uint32_t>()),
             r.at("counterpart").get<uint32_t>()});
      }
    }
  }
  if (clients_seen > 0) {
    stats.client_avg_s /= static_cast<double>(clients_seen);
  }
  dedup::sort_removals(outcome.removals);
  return 0;
}

// Runs one in-process cell and reports stats under the analytic profile.
RunStats run_inproc(const std::vector<ClientSet>& sets,
                    const std::string& variant, uint64_t seed,
                    const NetProfile& profile, bool strict,
                    dedup::DedupOutcome& outcome, Transcript* transcript) {
  Runtime rt;
  dedup::DedupOptions opts;
  opts.strict = strict;
  if (variant == "naive") {
    outcome = dedup::naive_pairwise_run(sets, rt, seed, opts);
  } else {
    outcome = dedup::epmpd_run(sets, dedup::variant_from_string(variant), rt,
                               seed, opts);
  }
  if (transcript != nullptr) *transcript = rt.transcript();
  return stats_from_runtime(rt, profile);
}

// Layered configuration: a --config JSON overrides same-named flags, and
// EPMPD_SEED is the lowest-priority seed source.
template <typename T>
void config_override(const json& cfg, const char* key, T& value) {
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-PSI based privacy-preserving multi-party deduplication"};
  app.require_subcommand(1);
  // Let global options like --config appear after the subcommand name.
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file,
                 "JSON config overriding same-named flags");

  // --- gen -------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Generate a synthetic workload");
  uint32_t gen_clients = 2;
  uint32_t gen_set_size = 1024;
  double gen_dup_pct = 30.0;
  uint64_t gen_seed = default_seed();
  std::string gen_out = "workload";
  gen->add_option("--clients", gen_clients, "Number of clients (>= 2)");
  gen->add_option("--set-size", gen_set_size, "Elements per client");
  gen->add_option("--dup-pct", gen_dup_pct, "Duplication percentage [0,100]");
  gen->add_option("--seed", gen_seed, "Deterministic seed");
  gen->add_option("--out", gen_out, "Output directory");

  // --- dedup -----------------------------------------------------------
  auto* dedup_cmd = app.add_subcommand("dedup", "Deduplicate a workload");
  std::string dd_workload;
  std::string dd_variant = "I";
  std::string dd_transport = "inproc";
  std::string dd_net = "ideal";
  double dd_bw = 1e9, dd_rtt = 0.0;
  uint64_t dd_seed = default_seed();
  std::string dd_out;
  bool dd_lenient = false;
  bool dd_dump_transcript = false;
  uint16_t dd_base_port = 0;
  dedup_cmd->add_option("workload", dd_workload, "Workload directory or file")
      ->required();
  dedup_cmd->add_option("--variant", dd_variant, "I, II, III, or naive");
  dedup_cmd->add_option("--transport", dd_transport, "inproc or tcp");
  dedup_cmd->add_option("--net", dd_net, "ideal, lan, wan, or custom");
  dedup_cmd->add_option("--bw", dd_bw, "custom bandwidth, bits/s");
  dedup_cmd->add_option("--rtt", dd_rtt, "custom round-trip time, seconds");
  dedup_cmd->add_option("--seed", dd_seed, "Run seed (party randomness)");
  dedup_cmd->add_option("--out", dd_out, "Output directory for reports");
  dedup_cmd->add_flag("--lenient", dd_lenient,
                      "Apply local dedup instead of aborting on duplicates");
  dedup_cmd->add_flag("--dump-transcript", dd_dump_transcript,
                      "Write the message transcript (inproc only)");
  dedup_cmd->add_option("--base-port", dd_base_port,
                        "TCP base port (0 = pick automatically)");

  // --- bench -----------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "Benchmark sweep, CSV output");
  std::vector<std::string> bn_variants{"I", "II"};
  std::vector<uint32_t> bn_clients{4};
  std::vector<uint32_t> bn_sizes{4096};
  std::vector<double> bn_dups{30.0};
  uint32_t bn_reps = 1;
  uint64_t bn_seed = default_seed();
  std::string bn_transport = "inproc";
  std::string bn_net = "ideal";
  double bn_bw = 1e9, bn_rtt = 0.0;
  std::string bn_csv;
  bench->add_option("--variants", bn_variants, "I, II, III, naive")
      ->delimiter(',');
  bench->add_option("--clients", bn_clients, "Client counts")->delimiter(',');
  bench->add_option("--set-sizes", bn_sizes, "Set sizes")->delimiter(',');
  bench->add_option("--dup-pcts", bn_dups, "Duplication percentages")
      ->delimiter(',');
  bench->add_option("--reps", bn_reps, "Repetitions per cell");
  bench->add_option("--seed", bn_seed, "Base seed");
  bench->add_option("--transport", bn_transport, "inproc or tcp");
  bench->add_option("--net", bn_net, "ideal, lan, wan, or custom");
  bench->add_option("--bw", bn_bw, "custom bandwidth, bits/s");
  bench->add_option("--rtt", bn_rtt, "custom rtt, seconds");
  bench->add_option("--csv", bn_csv, "CSV output path (default stdout)");

  // --- verify ----------------------------------------------------------
  auto* verify = app.add_subcommand(
      "verify", "Check a dedup run against the non-private oracle");
  std::string vf_workload;
  std::string vf_variant = "I";
  uint32_t vf_fuzz = 0;
  bool vf_audit = false;
  uint64_t vf_seed = default_seed();
  verify->add_option("workload", vf_workload,
                     "Workload directory or file (omit with --fuzz)");
  verify->add_option("--variant", vf_variant, "I, II, III, or naive");
  verify->add_option("--fuzz", vf_fuzz, "Run N random specs instead");
  verify->add_flag("--audit", vf_audit, "Also run the leakage audits");
  verify->add_option("--seed", vf_seed, "Seed for fuzz mode and runs");

  // --- serve -----------------------------------------------------------
  auto* serve = app.add_subcommand("serve", "Run one party over TCP");
  std::string sv_role;
  uint32_t sv_index = 0;
  std::string sv_listen, sv_connect;
  serve->add_option("--role", sv_role, "client or tee")->required();
  serve->add_option("--index", sv_index, "client index (1-based)");
  serve->add_option("--listen", sv_listen, "host:base_port for this party");
  serve->add_option("--connect", sv_connect, "host:base_port of the mesh");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  json cfg = json::object();
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) {
      std::cerr << "cannot open config " << config_file << "\n";
      return kExitUsage;
    }
    cfg = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (cfg.is_discarded()) {
      std::cerr << "config is not valid JSON\n";
      return kExitUsage;
    }
  }

  try {
    if (gen->parsed()) {
      config_override(cfg, "clients", gen_clients);
      config_override(cfg, "set_size", gen_set_size);
      config_override(cfg, "dup_pct", gen_dup_pct);
      config_override(cfg, "seed", gen_seed);
      config_override(cfg, "out", gen_out);
      data::Workload w =
          data::generate({gen_clients, gen_set_size, gen_dup_pct, gen_seed});
      data::save_workload(w, gen_out);
      std::cout << "wrote " << gen_clients << " client files to " << gen_out
                << " (per-pair share " << w.meta.per_pair_share
                << ", achieved duplication " << w.meta.achieved_dup_pct
                << "%)\n";
      return 0;
    }

    if (dedup_cmd->parsed()) {
      config_override(cfg, "variant", dd_variant);
      config_override(cfg, "transport", dd_transport);
      config_override(cfg, "net", dd_net);
      config_override(cfg, "seed", dd_seed);
      config_override(cfg, "out", dd_out);
      data::Workload w = data::load_workload(dd_workload);
      NetProfile profile = profile_from(dd_net, dd_bw, dd_rtt);

      dedup::DedupOutcome outcome;
      RunStats stats;
      if (dd_transport == "tcp") {
        if (dd_variant == "naive") {
          std::cerr << "the naive baseline runs in-process only\n";
          return kExitUsage;
        }
        TcpConfig tcp;
        tcp.clients = w.spec.clients;
        tcp.variant = dd_variant;
        tcp.seed = dd_seed;
        tcp.base_port = dd_base_port != 0 ? dd_base_port
                                          : net::pick_base_port(w.spec.clients);
        tcp.profile = dd_net;
        tcp.bandwidth_bps = dd_bw;
        tcp.rtt_s = dd_rtt;
        tcp.workload = dd_workload;
        tcp.out = dd_out.empty() ? (dd_workload + "/dedup_out") : dd_out;
        tcp.strict = !dd_lenient;
        int rc = run_dedup_tcp(tcp, fs::read_symlink("/proc/self/exe"),
                               outcome, stats);
        if (rc != 0) return rc;
        std::cout << "tcp run complete: wall " << stats.total_s << " s\n";
      } else if (dd_transport == "inproc") {
        Transcript transcript;
        stats = run_inproc(w.sets, dd_variant, dd_seed, profile, !dd_lenient,
                           outcome, dd_dump_transcript ? &transcript : nullptr);
        if (dd_dump_transcript && !dd_out.empty()) {
          fs::create_directories(dd_out);
          oracle::save_transcript(transcript,
                                  fs::path(dd_out) / "transcript.bin");
        }
      } else {
        std::cerr << "unknown transport '" << dd_transport << "'\n";
        return kExitUsage;
      }

      uint64_t removed = outcome.removals.size();
      std::cout << "variant " << dd_variant << ": " << stats.invocations
                << " PSI invocations, " << removed
                << " duplicates removed, wall clock " << stats.total_s
                << " s\n";
      if (!dd_out.empty()) {
        fs::create_directories(dd_out);
        save_final_sets(outcome.final_sets, w.spec, fs::path(dd_out) / "final");
        json report{{"variant", dd_variant},
                    {"transport", dd_transport},
                    {"profile", dd_net},
                    {"seed", dd_seed},
                    {"invocations", stats.invocations},
                    {"duplicates_removed", removed},
                    {"total_s", stats.total_s},
                    {"client_avg_s", stats.client_avg_s},
                    {"client_max_s", stats.client_max_s},
                    {"tee_s", stats.tee_s},
                    {"bytes_clients", stats.bytes_clients},
                    {"bytes_tee", stats.bytes_tee},
                    {"prp_calls", stats.prp_calls},
                    {"oprf_rounds", stats.oprf_rounds}};
        std::ofstream out(fs::path(dd_out) / "outcome.json");
        out << report.dump(2) << "\n";
      }
      return 0;
    }

    if (bench->parsed()) {
      config_override(cfg, "seed", bn_seed);
      std::ostream* out = &std::cout;
      std::ofstream file;
      if (!bn_csv.empty()) {
        file.open(bn_csv);
        out = &file;
      }
      *out << kCsvHeader << "\n";
      NetProfile profile = profile_from(bn_net, bn_bw, bn_rtt);
      uint64_t cell = 0;
      for (const std::string& variant : bn_variants) {
        for (uint32_t m : bn_clients) {
          for (uint32_t n : bn_sizes) {
            for (double p : bn_dups) {
              for (uint32_t rep = 0; rep < bn_reps; rep++) {
                uint64_t row_seed = bn_seed + 1000003 * cell + rep;
                data::Workload w = data::generate({m, n, p, row_seed});
                dedup::DedupOutcome outcome;
                RunStats stats;
                if (bn_transport == "tcp") {
                  TcpConfig tcp;
                  tcp.clients = m;
                  tcp.variant = variant;
                  tcp.seed = row_seed;
                  tcp.base_port = net::pick_base_port(m);
                  tcp.profile = bn_net;
                  tcp.bandwidth_bps = bn_bw;
                  tcp.rtt_s = bn_rtt;
                  fs::path tmp =
                      fs::temp_directory_path() /
                      ("epmpd_bench_" + std::to_string(::getpid()) + "_" +
                       std::to_string(cell) + "_" + std::to_string(rep));
                  data::save_workload(w, tmp / "workload");
                  tcp.workload = (tmp / "workload").string();
                  tcp.out = (tmp / "out").string();
                  int rc = run_dedup_tcp(
                      tcp, fs::read_symlink("/proc/self/exe"), outcome, stats);
                  fs::remove_all(tmp);
                  if (rc != 0) return rc;
                } else {
                  stats = run_inproc(w.sets, variant, row_seed, profile, true,
                                     outcome, nullptr);
                }
                *out << csv_row(variant, m, n, p, bn_transport, bn_net, rep,
                                row_seed, stats)
                     << "\n";
              }
              cell++;
            }
          }
        }
      }
      return 0;
    }

    if (verify->parsed()) {
      config_override(cfg, "variant", vf_variant);
      config_override(cfg, "seed", vf_seed);
      auto check_one = [&](const data::Workload& w, uint64_t seed) -> bool {
        dedup::DedupOutcome outcome;
        run_inproc(w.sets, vf_variant, seed, NetProfile::ideal(), true,
                   outcome, nullptr);
        dedup::DedupOutcome expected = oracle::oracle_dedup(w.sets);
        for (size_t i = 0; i < w.sets.size(); i++) {
          std::set<Element> got(outcome.final_sets[i].begin(),
                                outcome.final_sets[i].end());
          std::set<Element> want(expected.final_sets[i].begin(),
                                 expected.final_sets[i].end());
          if (got != want) {
            std::cerr << "client " << (i + 1)
                      << ": final set differs from the oracle\n";
            return false;
          }
        }
        return true;
      };

      auto audit_one = [&](const data::Workload& w, uint64_t seed) -> bool {
        bool ok = true;
        // Pairwise type-I instance over the first two clients.
        Runtime rt1;
        gpsi::GpsiInstance inst{{1}, {2}};
        std::map<uint32_t, ClientSet> sets{{1, w.sets[0]}, {2, w.sets[1]}};
        gpsi::egpsi1_run(inst, sets, rt1, seed);
        auto v1 =
            oracle::audit_leakage_type1(rt1.transcript(), {w.sets[0], w.sets[1]});
        for (const auto& violation : v1.violations) {
          std::cerr << "type-I audit: " << violation << "\n";
          ok = false;
        }
        // Full tree under variant II with caching.
        Runtime rt2;
        dedup::epmpd_run(w.sets, dedup::Variant::II, rt2, seed);
        oracle::ExpectedOprfCounts expected;
        std::map<uint32_t, int> entries = dedup::entry_levels(
            dedup::build_cluster_plan(w.spec.clients));
        for (uint32_t c = 1; c <= w.spec.clients; c++) {
          expected.requests.push_back(
              {c, w.sets[c - 1].size(), entries.at(c)});
        }
        auto v2 = oracle::audit_leakage_type2(rt2.transcript(), expected);
        for (const auto& violation : v2.violations) {
          std::cerr << "type-II audit: " << violation << "\n";
          ok = false;
        }
        return ok;
      };

      bool ok = true;
      if (vf_fuzz > 0) {
        Rng rng = Rng::seeded(vf_seed, "verify-fuzz");
        for (uint32_t t = 0; t < vf_fuzz && ok; t++) {
          uint32_t m = 2 + static_cast<uint32_t>(rng.uniform(7));
          uint32_t n = 1 + static_cast<uint32_t>(rng.uniform(64));
          double p = static_cast<double>(rng.uniform(91));
          data::Workload w = data::generate({m, n, p, vf_seed + t});
          ok = check_one(w, vf_seed + t);
          if (ok && vf_audit) ok = audit_one(w, vf_seed + t);
        }
      } else {
        if (vf_workload.empty()) {
          std::cerr << "verify needs a workload path or --fuzz N\n";
          return kExitUsage;
        }
        data::Workload w = data::load_workload(vf_workload);
        ok = check_one(w, vf_seed);
        if (ok && vf_audit) ok = audit_one(w, vf_seed);
      }
      std::cout << (ok ? "verification passed\n" : "verification FAILED\n");
      return ok ? 0 : kExitVerification;
    }

    if (serve->parsed()) {
      if (sv_role != "client" && sv_role != "tee") {
        std::cerr << "--role must be client or tee\n";
        return kExitUsage;
      }
      if (sv_role == "client" && sv_index == 0) {
        std::cerr << "client role needs --index >= 1\n";
        return kExitUsage;
      }
      return run_serve(sv_role, sv_index, config_file, sv_listen, sv_connect);
    }
  } catch (const InfeasibleSpec& e) {
    std::cerr << "infeasible spec: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const DuplicateWithinSet& e) {
    std::cerr << "error: " << e.what() << " (strict mode)\n";
    return kExitVerification;
  } catch (const BindFailure& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const ConnectionLost& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
