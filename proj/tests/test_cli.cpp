// End-to-end tests driving the CLI binary. The binary path and repo root
// come in as compile definitions from CMake.

#include <catch2/catch_amalgamated.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "exoglove/bus.hpp"
#include "exoglove/sim.hpp"

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string work_dir() {
  static const std::string dir = [] {
    char tmpl[] = "/tmp/exoglove_cli_XXXXXX";
    const char* d = mkdtemp(tmpl);
    REQUIRE(d != nullptr);
    return std::string(d);
  }();
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

CliResult run_cli(const std::string& args, const std::string& stdin_text = "") {
  static int counter = 0;
  const std::string base = work_dir() + "/run" + std::to_string(counter++);
  const std::string out_path = base + ".out";
  const std::string err_path = base + ".err";
  std::string cmd = std::string(EXOGLOVE_CLI_PATH) + " " + args;
  if (!stdin_text.empty()) {
    const std::string in_path = base + ".in";
    spit(in_path, stdin_text);
    cmd += " < " + in_path;
  }
  cmd += " > " + out_path + " 2> " + err_path;
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

std::string repo(const std::string& rel) { return std::string(EXOGLOVE_REPO_DIR) + "/" + rel; }

}  // namespace

TEST_CASE("cli: inline solve in radians matches the kinematics values") {
  const CliResult r = run_cli("solve --theta-em 0.5 --theta-ed 2.0 --radians");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("theta1_rad=0.184615385") != std::string::npos);
  CHECK(r.out.find("theta2_rad=0.3206024") != std::string::npos);
  CHECK(r.out.find("theta3_rad=0.0870757733") != std::string::npos);
}

TEST_CASE("cli: inline solve defaults to degrees") {
  const CliResult rad = run_cli("solve --theta-em 28.6478898 --theta-ed 114.591559");
  CHECK(rad.exit_code == 0);
  // 0.5 rad / 2.0 rad expressed in degrees give theta1 = 10.5778 deg.
  CHECK(rad.out.find("theta1_deg=10.577") != std::string::npos);
}

TEST_CASE("cli: zero frame warns about clamping") {
  const CliResult r = run_cli("solve --theta-em 0 --theta-ed 0");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("theta3_deg=0") != std::string::npos);
  CHECK(r.err.find("clamped") != std::string::npos);
}

TEST_CASE("cli: malformed frame CSV exits with the input-error code") {
  const std::string bad = work_dir() + "/bad_frame.csv";
  spit(bad, "0,1,2,three\n");
  const CliResult r = run_cli("solve --frame-csv " + bad);
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("cli: invalid config value exits with the validation code") {
  const CliResult r = run_cli("solve --theta-em 1 --theta-ed 1 --set geometry.sigma=-1");
  CHECK(r.exit_code == 4);
  CHECK(r.err.find("sigma") != std::string::npos);
}

TEST_CASE("cli: unknown option exits with the usage code") {
  const CliResult r = run_cli("solve --bogus 1");
  CHECK(r.exit_code == 2);
}

TEST_CASE("cli: help documents the degree convention") {
  const CliResult r = run_cli("--help");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("degrees") != std::string::npos);
  const CliResult rs = run_cli("solve --help");
  CHECK(rs.exit_code == 0);
  CHECK(rs.out.find("degrees") != std::string::npos);
}

TEST_CASE("cli: follow reports the oracle cable length") {
  const CliResult r = run_cli("follow --theta1 30 --theta2 30 --theta3 30");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("la_mm=132.648544") != std::string::npos);
  CHECK(r.out.find("theta_s_rad=13.2648544") != std::string::npos);
  const CliResult zero = run_cli("follow --theta1 0 --theta2 0 --theta3 0");
  CHECK(zero.out.find("theta_s_delta_rad=0") != std::string::npos);
}

TEST_CASE("cli: inverse matches the round trip") {
  const CliResult r = run_cli("inverse --theta1 0.184615385 --theta3 0.0870757733 --radians");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("theta_em_rad=0.5") != std::string::npos);
  CHECK(r.out.find("theta_ed_rad=2\n") != std::string::npos);
}

TEST_CASE("cli: feedback classification and current mapping") {
  CHECK(run_cli("feedback --force 0.7").out.find("mode=waveform2") != std::string::npos);
  CHECK(run_cli("feedback --current 65").out.find("force_n=1\n") != std::string::npos);
  const std::string stream = work_dir() + "/forces.csv";
  spit(stream, "0,0.0\n10000,0.3\n20000,1.5\n30000,0.2\n");
  const CliResult r = run_cli("feedback --stream " + stream);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("10000,waveform1") != std::string::npos);
  CHECK(r.out.find("20000,force_feedback") != std::string::npos);
  CHECK(r.out.find("30000,waveform1") != std::string::npos);
}

TEST_CASE("cli: calibrate then solve applies offsets") {
  const std::string frames = work_dir() + "/flat.csv";
  // Flat hand with a small constant mechanical offset on channel 0.
  spit(frames, "0,40,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n");
  const std::string cal = work_dir() + "/cal.csv";
  const CliResult c = run_cli("calibrate --frame-csv " + frames + " --out " + cal);
  REQUIRE(c.exit_code == 0);
  CHECK(slurp(cal).find("enc_00") != std::string::npos);
  const CliResult s =
      run_cli("solve --frame-csv " + frames + " --calibration " + cal);
  CHECK(s.exit_code == 0);
  // Offset-corrected flat hand solves to the clamped zero pose.
  CHECK(s.out.find("\n0,0,") != std::string::npos);
}

TEST_CASE("cli: bus encode and decode") {
  const CliResult enc = run_cli("bus encode --address 1 --function 3 --payload 00000010");
  CHECK(enc.exit_code == 0);
  CHECK(enc.out == "0103000000104406\n");
  const CliResult dec = run_cli("bus decode --hex 0103000000104406");
  CHECK(dec.exit_code == 0);
  CHECK(dec.out.find("address=1") != std::string::npos);
  CHECK(dec.out.find("function=0x03") != std::string::npos);
  CHECK(dec.out.find("payload=00000010") != std::string::npos);
  const CliResult bad = run_cli("bus decode --hex 0103000000104407");
  CHECK(bad.exit_code == 3);
  CHECK(bad.err.find("bad CRC") != std::string::npos);
}

TEST_CASE("cli: bus serve answers over stdio") {
  using namespace exoglove::bus;
  // Expected response computed with the library codec.
  DeviceEmulator dev(1);
  for (int i = 0; i < 16; ++i) dev.registers().set_encoder_count(i, static_cast<std::uint16_t>(i));
  BusFrame req;
  req.address = 1;
  req.function = kReadHolding;
  req.payload = {0x00, 0x00, 0x00, 0x10};
  const std::string req_hex = to_hex(encode_frame(req));
  const std::string resp_hex = to_hex(encode_frame(*dev.step(req)));

  std::string counts = "0";
  for (int i = 1; i < 16; ++i) counts += "," + std::to_string(i);
  const CliResult r = run_cli("bus serve --counts " + counts,
                              req_hex + "\nzz\n" + req_hex.substr(0, 6) + "\n");
  CHECK(r.exit_code == 0);
  std::istringstream lines(r.out);
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == resp_hex);
  REQUIRE(std::getline(lines, line));
  CHECK(line.find("error:") == 0);  // invalid hex
  REQUIRE(std::getline(lines, line));
  CHECK(line.find("error: short frame") == 0);
}

TEST_CASE("cli: bus serve answers over a local socket") {
  using namespace exoglove::bus;
  const int port = 15502;
  FILE* proc = popen((std::string(EXOGLOVE_CLI_PATH) + " bus serve --tcp " +
                      std::to_string(port) + " 2>/dev/null")
                         .c_str(),
                     "r");
  REQUIRE(proc != nullptr);

  int fd = -1;
  for (int attempt = 0; attempt < 100; ++attempt) {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) break;
    ::close(fd);
    fd = -1;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  REQUIRE(fd >= 0);

  BusFrame req;
  req.address = 1;
  req.function = kWriteSingle;
  req.payload = {0x01, 0x00, 0x00, 0x2A};
  const std::string line = to_hex(encode_frame(req)) + "\n";
  REQUIRE(::write(fd, line.data(), line.size()) == static_cast<ssize_t>(line.size()));
  std::string reply;
  char c;
  while (reply.find('\n') == std::string::npos && ::read(fd, &c, 1) == 1) reply.push_back(c);
  ::close(fd);
  pclose(proc);
  CHECK(reply == to_hex(encode_frame(req)) + "\n");  // write-single echoes
}

TEST_CASE("cli: simulate reproduces the committed golden trace") {
  const std::string trace_path = work_dir() + "/demo_trace.csv";
  const CliResult r = run_cli("simulate --config " + repo("configs/demo.ini") + " --out " +
                              trace_path + " --report latency");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("trace_fnv1a64=") != std::string::npos);
  CHECK(r.out.find("mean_latency_ms=200.000") != std::string::npos);

  const std::string golden_path = repo("tests/golden/demo_trace.csv");
  const std::string produced = slurp(trace_path);
  REQUIRE(!produced.empty());
  if (std::getenv("EXOGLOVE_REGEN_GOLDEN")) {
    spit(golden_path, produced);
    SUCCEED("golden regenerated");
    return;
  }
  const std::string golden = slurp(golden_path);
  REQUIRE(!golden.empty());
  CHECK(produced == golden);
  // The printed hash is the hash of the file content.
  char expected_hash[32];
  std::snprintf(expected_hash, sizeof expected_hash, "%016llx",
                static_cast<unsigned long long>(exoglove::sim::fnv1a64(golden)));
  CHECK(r.out.find(std::string("trace_fnv1a64=") + expected_hash) != std::string::npos);
}

TEST_CASE("cli: seed changes the trace but not the schema") {
  const std::string a_path = work_dir() + "/seed_a.csv";
  const std::string b_path = work_dir() + "/seed_b.csv";
  const std::string cfg = repo("configs/demo.ini");
  REQUIRE(run_cli("simulate --config " + cfg + " --out " + a_path).exit_code == 0);
  REQUIRE(run_cli("simulate --config " + cfg + " --seed 43 --out " + b_path).exit_code == 0);
  const std::string a = slurp(a_path);
  const std::string b = slurp(b_path);
  CHECK(a != b);
  CHECK(a.substr(0, a.find('\n', a.find('\n') + 1)) ==
        b.substr(0, b.find('\n', b.find('\n') + 1)));
}

TEST_CASE("cli: report works on a saved trace") {
  const std::string trace_path = work_dir() + "/report_trace.csv";
  REQUIRE(run_cli("simulate --config " + repo("configs/demo.ini") + " --out " + trace_path)
              .exit_code == 0);
  const CliResult rep =
      run_cli("report --trace " + trace_path + " --kind repeatability --finger index");
  CHECK(rep.exit_code == 0);
  CHECK(rep.out.find("repeatability_mean_deg=") != std::string::npos);
  const CliResult lat = run_cli("report --trace " + trace_path + " --kind latency");
  CHECK(lat.exit_code == 0);
  CHECK(lat.out.find("mean_latency_ms=") != std::string::npos);
}

TEST_CASE("cli: multi-episode simulate derives per-episode seeds") {
  const std::string out = work_dir() + "/multi.csv";
  const CliResult r = run_cli("simulate --config " + repo("configs/demo.ini") +
                              " --episodes 2 --out " + out);
  REQUIRE(r.exit_code == 0);
  CHECK(slurp(work_dir() + "/multi.0.csv") != slurp(work_dir() + "/multi.1.csv"));
  CHECK(!slurp(work_dir() + "/multi.0.csv").empty());
}

TEST_CASE("cli: retarget chain from solve output") {
  const std::string frames = work_dir() + "/pose_frames.csv";
  // One frame: index finger at theta_em=0.5, theta_ed=2.0 rad, counts at 4096/rev.
  const int em_count = static_cast<int>(std::llround(0.5 * 4096 / exoglove::kTau));
  const int ed_count = static_cast<int>(std::llround(2.0 * 4096 / exoglove::kTau));
  std::string row = "0," + std::to_string(em_count) + "," + std::to_string(ed_count);
  for (int i = 2; i < 16; ++i) row += ",0";
  spit(frames, row + "\n");
  const std::string states = work_dir() + "/states.csv";
  REQUIRE(run_cli("solve --frame-csv " + frames + " --out " + states).exit_code == 0);
  const CliResult r = run_cli("retarget --model 24dof --state-csv " + states);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("index_dip") != std::string::npos);

  const CliResult list = run_cli("retarget --list-models");
  CHECK(list.out.find("hand_6dof dof=6") != std::string::npos);
  CHECK(list.out.find("hand_24dof dof=24") != std::string::npos);

  const CliResult dump = run_cli("retarget --dump-model 6dof");
  CHECK(dump.out.find("[model]") != std::string::npos);
  CHECK(dump.out.find("source = thumb.tm_splay") != std::string::npos);
}

TEST_CASE("cli: config comes from the environment variable") {
  const std::string cfg = work_dir() + "/env_cfg.ini";
  spit(cfg, "[geometry]\nrs = 20\n");
  const std::string cmd = "EXOGLOVE_CONFIG=" + cfg + " " + std::string(EXOGLOVE_CLI_PATH) +
                          " follow --theta1 0 --theta2 0 --theta3 0 > " + work_dir() +
                          "/env.out 2>/dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  const std::string out = slurp(work_dir() + "/env.out");
  // La(0)/rs = 122.707/20 with the doubled flange radius.
  CHECK(out.find("theta_s_rad=6.13535") != std::string::npos);
}
