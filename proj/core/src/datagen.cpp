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

#include "epmpd/datagen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "epmpd/errors.hpp"
#include "epmpd/rng.hpp"

namespace epmpd::data {

namespace {

// 4-round Feistel over 32 bits keyed by the seed: a cheap bijection that
// scatters the counter-assigned ids across the u32 universe while keeping
// them globally unique.
uint32_t mix16(uint16_t half, uint32_t round_key) {
  uint32_t x = half ^ round_key;
  x *= 0x9E3779B9u;
  x ^= x >> 15;
  x *= 0x85EBCA6Bu;
  x ^= x >> 13;
  return x;
}

uint32_t feistel32(uint32_t v, uint64_t seed) {
  uint16_t left = static_cast<uint16_t>(v >> 16);
  uint16_t right = static_cast<uint16_t>(v);
  for (int round = 0; round < 4; round++) {
    uint32_t rk = static_cast<uint32_t>(seed >> (16 * (round % 4))) ^
                  (0x2545F491u * (round + 1));
    uint16_t next = static_cast<uint16_t>(left ^ mix16(right, rk));
    left = right;
    right = next;
  }
  return static_cast<uint32_t>(left) << 16 | right;
}

}  // namespace

Workload generate(const WorkloadSpec& spec) {
  uint64_t m = spec.clients;
  uint64_t n = spec.set_size;
  if (m < 2) throw InfeasibleSpec("need at least 2 clients");
  if (n < 1) throw InfeasibleSpec("set size must be positive");
  if (spec.dup_pct < 0.0 || spec.dup_pct > 100.0) {
    throw InfeasibleSpec("duplication percentage outside [0, 100]");
  }
  if (m * n > (uint64_t{1} << 31)) {
    throw InfeasibleSpec("m*n exceeds the 32-bit universe headroom");
  }

  // d duplicates per client, split into equal per-pair shares.
  uint64_t d = static_cast<uint64_t>(std::llround(spec.dup_pct * n / 100.0));
  uint64_t s = d / (m - 1);
  uint64_t shared_per_client = s * (m - 1);
  if (shared_per_client > n) {
    throw InfeasibleSpec("per-pair shares exceed the set size");
  }
  uint64_t private_per_client = n - shared_per_client;

  // Counter-assigned ids: one disjoint range per unordered pair, then one
  // per client's private pool.
  std::vector<ClientSet> sets(m);
  for (auto& set : sets) set.reserve(n);

  uint64_t next_id = 0;
  for (uint64_t i = 0; i < m; i++) {
    for (uint64_t j = i + 1; j < m; j++) {
      for (uint64_t k = 0; k < s; k++) {
        Element e = Element::from_u32(
            feistel32(static_cast<uint32_t>(next_id++), spec.seed));
        sets[i].push_back(e);
        sets[j].push_back(e);
      }
    }
  }
  for (uint64_t i = 0; i < m; i++) {
    for (uint64_t k = 0; k < private_per_client; k++) {
      sets[i].push_back(Element::from_u32(
          feistel32(static_cast<uint32_t>(next_id++), spec.seed)));
    }
  }

  for (uint64_t i = 0; i < m; i++) {
    Rng rng = Rng::seeded(spec.seed, "datagen/shuffle/" + std::to_string(i));
    rng.shuffle(sets[i]);
  }

  Workload w;
  w.spec = spec;
  w.sets = std::move(sets);
  w.meta.per_pair_share = s;
  w.meta.per_client_dups.assign(m, shared_per_client);
  w.meta.per_client_dup_pct.assign(
      m, 100.0 * static_cast<double>(shared_per_client) / n);
  w.meta.achieved_dup_pct =
      100.0 * static_cast<double>(shared_per_client) / n;
  return w;
}

VerifyReport verify(const Workload& w) {
  VerifyReport report;
  size_t m = w.sets.size();
  report.pairwise_intersections.assign(m, std::vector<uint64_t>(m, 0));

  std::unordered_map<Element, std::vector<uint32_t>, ElementHash> holders;
  for (size_t i = 0; i < m; i++) {
    std::unordered_set<Element, ElementHash> seen;
    for (const Element& e : w.sets[i]) {
      if (!seen.insert(e).second) {
        report.violations.push_back("client " + std::to_string(i + 1) +
                                    " holds an internal duplicate");
      }
      holders[e].push_back(static_cast<uint32_t>(i + 1));
    }
  }
  for (const auto& [e, hs] : holders) {
    if (hs.size() > 2) {
      report.violations.push_back("an element is shared by " +
                                  std::to_string(hs.size()) + " clients");
    }
    if (hs.size() == 2) {
      report.pairwise_intersections[hs[0] - 1][hs[1] - 1]++;
      report.pairwise_intersections[hs[1] - 1][hs[0] - 1]++;
    }
  }
  for (size_t i = 0; i < m; i++) {
    for (size_t j = i + 1; j < m; j++) {
      if (report.pairwise_intersections[i][j] != w.meta.per_pair_share) {
        report.violations.push_back(
            "pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
            ") shares " + std::to_string(report.pairwise_intersections[i][j]) +
            " elements, expected " + std::to_string(w.meta.per_pair_share));
      }
    }
  }
  return report;
}

// --- file format --------------------------------------------------------

namespace {

std::string header_line(const WorkloadSpec& spec) {
  std::ostringstream os;
  os << "epmpd-workload v1 " << spec.clients << " " << spec.set_size << " "
     << spec.dup_pct << " " << spec.seed;
  return os.str();
}

WorkloadSpec parse_header(const std::string& line,
                          const std::filesystem::path& file) {
  std::istringstream is(line);
  std::string magic, version;
  WorkloadSpec spec;
  is >> magic >> version >> spec.clients >> spec.set_size >> spec.dup_pct >>
      spec.seed;
  if (magic != "epmpd-workload" || version != "v1" || is.fail()) {
    throw Error("bad workload header in " + file.string());
  }
  return spec;
}

ClientSet parse_value_line(const std::string& line) {
  ClientSet set;
  std::istringstream is(line);
  uint32_t v;
  while (is >> v) set.push_back(Element::from_u32(v));
  return set;
}

}  // namespace

std::filesystem::path client_file_name(const std::filesystem::path& dir,
                                       uint32_t index) {
  char name[32];
  std::snprintf(name, sizeof(name), "client_%03u.txt", index);
  return dir / name;
}

void save_workload(const Workload& w, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < w.sets.size(); i++) {
    std::ofstream out(client_file_name(dir, static_cast<uint32_t>(i + 1)));
    out << header_line(w.spec) << "\n";
    for (size_t k = 0; k < w.sets[i].size(); k++) {
      if (k > 0) out << " ";
      out << *w.sets[i][k].as_u32();
    }
    out << "\n";
  }

  nlohmann::json meta;
  meta["clients"] = w.spec.clients;
  meta["set_size"] = w.spec.set_size;
  meta["dup_pct"] = w.spec.dup_pct;
  meta["seed"] = w.spec.seed;
  meta["per_pair_share"] = w.meta.per_pair_share;
  meta["achieved_dup_pct"] = w.meta.achieved_dup_pct;
  meta["per_client_dups"] = w.meta.per_client_dups;
  meta["per_client_dup_pct"] = w.meta.per_client_dup_pct;
  std::ofstream out(dir / "workload.json");
  out << meta.dump(2) << "\n";
}

ClientSet load_client_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open " + file.string());
  std::string header, values;
  std::getline(in, header);
  parse_header(header, file);
  std::getline(in, values);
  return parse_value_line(values);
}

Workload load_workload(const std::filesystem::path& path) {
  Workload w;
  if (std::filesystem::is_directory(path)) {
    // Per-client files carry identical headers; the index comes from the
    // file name.
    for (uint32_t i = 1;; i++) {
      std::filesystem::path file = client_file_name(path, i);
      if (!std::filesystem::exists(file)) {
        if (i == 1) throw Error("no client files in " + path.string());
        break;
      }
      std::ifstream in(file);
      std::string header, values;
      std::getline(in, header);
      w.spec = parse_header(header, file);
      std::getline(in, values);
      w.sets.push_back(parse_value_line(values));
    }
  } else {
    // Single combined file: header then one line per client.
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string header;
    std::getline(in, header);
    w.spec = parse_header(header, path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      w.sets.push_back(parse_value_line(line));
    }
  }
  if (w.sets.size() != w.spec.clients) {
    throw Error("workload names " + std::to_string(w.spec.clients) +
                " clients but " + std::to_string(w.sets.size()) +
                " sets were loaded");
  }
  // Metadata is advisory; recompute the share for verification use.
  uint64_t d = static_cast<uint64_t>(
      std::llround(w.spec.dup_pct * w.spec.set_size / 100.0));
  w.meta.per_pair_share = w.spec.clients > 1 ? d / (w.spec.clients - 1) : 0;
  return w;
}

}  // namespace epmpd::data
