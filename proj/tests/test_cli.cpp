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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;
};

CmdResult run_cli(const std::string& args) {
  std::string cmd = std::string(EPMPD_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult result;
  char buf[4096];
  while (fgets(buf, sizeof(buf), pipe) != nullptr) result.output += buf;
  int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("epmpd_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("gen writes per-client files deterministically") {
  fs::path dir = temp_dir("gen");
  CmdResult r1 = run_cli("gen --clients 3 --set-size 32 --dup-pct 20 --seed 4 --out " +
                         (dir / "a").string());
  CHECK(r1.exit_code == 0);
  CHECK(fs::exists(dir / "a" / "client_001.txt"));
  CHECK(fs::exists(dir / "a" / "client_003.txt"));
  CHECK(fs::exists(dir / "a" / "workload.json"));

  CmdResult r2 = run_cli("gen --clients 3 --set-size 32 --dup-pct 20 --seed 4 --out " +
                         (dir / "b").string());
  CHECK(r2.exit_code == 0);
  CHECK(slurp(dir / "a" / "client_002.txt") == slurp(dir / "b" / "client_002.txt"));
  fs::remove_all(dir);
}

TEST_CASE("infeasible spec exits with code 3") {
  CmdResult r = run_cli("gen --clients 50000 --set-size 50000 --out /tmp/nowhere_epmpd");
  CHECK(r.exit_code == 3);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("dedup").exit_code == 2);
  CHECK(run_cli("frobnicate").exit_code == 2);
}

TEST_CASE("dedup variants agree and strict mode flags duplicates") {
  fs::path dir = temp_dir("dedup");
  REQUIRE(run_cli("gen --clients 4 --set-size 64 --dup-pct 40 --seed 11 --out " +
                  (dir / "w").string())
              .exit_code == 0);

  CmdResult rI = run_cli("dedup " + (dir / "w").string() +
                         " --variant I --seed 11 --out " + (dir / "oI").string());
  CmdResult rII = run_cli("dedup " + (dir / "w").string() +
                          " --variant II --seed 11 --out " + (dir / "oII").string());
  CHECK(rI.exit_code == 0);
  CHECK(rII.exit_code == 0);
  for (int c = 1; c <= 4; c++) {
    char name[32];
    std::snprintf(name, sizeof(name), "client_%03d.txt", c);
    CHECK(slurp(dir / "oI" / "final" / name) ==
          slurp(dir / "oII" / "final" / name));
  }

  // A workload with a within-client duplicate aborts in strict mode.
  fs::path bad = dir / "bad";
  fs::create_directories(bad);
  {
    std::ofstream out(bad / "client_001.txt");
    out << "epmpd-workload v1 2 3 0 1\n5 5 6\n";
    std::ofstream out2(bad / "client_002.txt");
    out2 << "epmpd-workload v1 2 3 0 1\n7 8 9\n";
  }
  CmdResult strict = run_cli("dedup " + bad.string() + " --variant I");
  CHECK(strict.exit_code != 0);
  CmdResult lenient =
      run_cli("dedup " + bad.string() + " --variant I --lenient");
  CHECK(lenient.exit_code == 0);
  fs::remove_all(dir);
}

TEST_CASE("wan wall clock dominates lan on the same workload") {
  fs::path dir = temp_dir("net");
  REQUIRE(run_cli("gen --clients 4 --set-size 128 --dup-pct 30 --seed 3 --out " +
                  (dir / "w").string())
              .exit_code == 0);
  auto total_of = [&](const std::string& net, const fs::path& out) {
    CmdResult r = run_cli("dedup " + (dir / "w").string() + " --variant I --net " +
                          net + " --seed 3 --out " + out.string());
    REQUIRE(r.exit_code == 0);
    std::string text = slurp(out / "outcome.json");
    size_t pos = text.find("\"total_s\":");
    REQUIRE(pos != std::string::npos);
    return std::stod(text.substr(pos + 10));
  };
  double lan = total_of("lan", dir / "lan");
  double wan = total_of("wan", dir / "wan");
  CHECK(wan >= lan);
  fs::remove_all(dir);
}

TEST_CASE("bench emits the documented CSV schema") {
  fs::path dir = temp_dir("bench");
  fs::path csv = dir / "rows.csv";
  CmdResult r = run_cli(
      "bench --variants I,naive --clients 2,3 --set-sizes 32 --dup-pcts 0 "
      "--reps 2 --seed 6 --csv " +
      csv.string());
  REQUIRE(r.exit_code == 0);

  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "variant,clients,set_size,dup_pct,transport,profile,rep,seed,total_s,"
        "client_avg_s,client_max_s,tee_s,bytes_clients,bytes_tee,prp_calls,"
        "oprf_rounds,invocations");
  int rows = 0;
  std::string line;
  int naive3_invocations = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows++;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    REQUIRE(cols.size() == 17);
    if (cols[0] == "naive" && cols[1] == "3") {
      naive3_invocations = std::stoi(cols[16]);
    }
  }
  CHECK(rows == 8);  // 2 variants x 2 client counts x 2 reps
  CHECK(naive3_invocations == 3);  // C(3,2)
  fs::remove_all(dir);
}

TEST_CASE("verify passes honest runs and audit mode stays clean") {
  fs::path dir = temp_dir("verify");
  REQUIRE(run_cli("gen --clients 5 --set-size 48 --dup-pct 25 --seed 8 --out " +
                  (dir / "w").string())
              .exit_code == 0);
  CHECK(run_cli("verify " + (dir / "w").string() + " --variant I --seed 8")
            .exit_code == 0);
  CHECK(run_cli("verify " + (dir / "w").string() +
                " --variant naive --seed 8 --audit")
            .exit_code == 0);
  CHECK(run_cli("verify --fuzz 3 --seed 17 --variant II").exit_code == 0);
  fs::remove_all(dir);
}

TEST_CASE("tcp serve processes reproduce the inproc outcome") {
  fs::path dir = temp_dir("tcp");
  REQUIRE(run_cli("gen --clients 4 --set-size 64 --dup-pct 30 --seed 21 --out " +
                  (dir / "w").string())
              .exit_code == 0);
  CmdResult inproc = run_cli("dedup " + (dir / "w").string() +
                             " --variant I --seed 21 --out " +
                             (dir / "inproc").string());
  REQUIRE(inproc.exit_code == 0);
  CmdResult tcp = run_cli("dedup " + (dir / "w").string() +
                          " --variant I --transport tcp --seed 21 --out " +
                          (dir / "tcp").string());
  REQUIRE(tcp.exit_code == 0);
  for (int c = 1; c <= 4; c++) {
    char name[32];
    std::snprintf(name, sizeof(name), "client_%03d.txt", c);
    CHECK(slurp(dir / "inproc" / "final" / name) ==
          slurp(dir / "tcp" / "final" / name));
  }
  fs::remove_all(dir);
}

TEST_CASE("config file overrides flags and EPMPD_SEED is the fallback") {
  fs::path dir = temp_dir("config");
  {
    std::ofstream out(dir / "cfg.json");
    out << "{\"seed\": 42}\n";
  }
  // The config seed beats the flag seed: identical outputs for different
  // flag values under the same config.
  CmdResult a = run_cli("gen --clients 2 --set-size 16 --dup-pct 0 --seed 1 "
                        "--config " + (dir / "cfg.json").string() + " --out " +
                        (dir / "a").string());
  CmdResult b = run_cli("gen --clients 2 --set-size 16 --dup-pct 0 --seed 2 "
                        "--config " + (dir / "cfg.json").string() + " --out " +
                        (dir / "b").string());
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(dir / "a" / "client_001.txt") ==
        slurp(dir / "b" / "client_001.txt"));

  // EPMPD_SEED applies when no flag or config provides one.
  CmdResult c = run_cli("gen --clients 2 --set-size 16 --dup-pct 0 --out " +
                        (dir / "c").string());
  REQUIRE(c.exit_code == 0);
  std::string cmd_env = std::string("EPMPD_SEED=9 ") + EPMPD_CLI_PATH +
                        " gen --clients 2 --set-size 16 --dup-pct 0 --out " +
                        (dir / "d").string() + " 2>&1";
  REQUIRE(std::system(cmd_env.c_str()) == 0);
  CHECK(slurp(dir / "c" / "client_001.txt") !=
        slurp(dir / "d" / "client_001.txt"));
  fs::remove_all(dir);
}

TEST_SUITE_END();
