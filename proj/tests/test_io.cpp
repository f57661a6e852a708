#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "squeezelab/distributions.hpp"
#include "squeezelab/error.hpp"
#include "squeezelab/format.hpp"
#include "squeezelab/jpnd_io.hpp"
#include "squeezelab/sampling.hpp"

using namespace squeezelab;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(SQUEEZELAB_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "squeezelab_test_io";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("format_double round trips") {
  for (double x : {0.1, 1.0 / 3.0, 2.0, 1e-300, 6.02214076e23, -0.0}) {
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(dump_json(nlohmann::json{{"x", 0.1}}) == "{\"x\":0.10000000000000001}");
  CHECK(dump_json(nlohmann::json{{"x", NAN}}) == "{\"x\":null}");
  CHECK(dump_json(nlohmann::json::array({1, 2})) == "[1,2]");
}

TEST_CASE("jpnd round trip") {
  const fs::path dir = scratch();
  const JointDist t = tmsv_joint(0.5, 20, 1e-10);
  write_jpnd(dir / "t.json", t);
  const JointDist back = read_jpnd(dir / "t.json");
  REQUIRE(back.dim_s() == t.dim_s());
  for (std::size_t k = 0; k < t.size(); ++k) CHECK(std::abs(back.probs()[k] - t.probs()[k]) < 1e-12);
  CHECK(back.truncated_mass() == t.truncated_mass());
  CHECK_FALSE(back.n_events().has_value());

  const JointDist h = sample_counts(t, 12345, 2);
  write_jpnd(dir / "h.json", h);
  const JointDist hb = read_jpnd(dir / "h.json");
  CHECK(hb.n_events() == 12345u);
  CHECK(hb.has_counts());
  for (std::size_t k = 0; k < h.size(); ++k) CHECK(hb.probs()[k] == h.probs()[k]);

  write_text(dir / "bad.json", "{\"format\":\"jpnd-v1\",\"dim_s\":2,\"dim_i\":2,\"probs\":[1,0,0]}");
  CHECK_THROWS_AS(read_jpnd(dir / "bad.json"), Error);
  write_text(dir / "bad.json", "{\"format\":\"other\"}");
  CHECK_THROWS_AS(read_jpnd(dir / "bad.json"), Error);
  write_text(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(read_jpnd(dir / "bad.json"), Error);
  try {
    read_jpnd(dir / "missing.json");
    FAIL("expected Io");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
  fs::remove_all(dir);
}

TEST_CASE("cli") {
  const fs::path dir = scratch();
  const std::string state = (dir / "state.json").string();

  Run r = cli("simulate --n-pdc 1 --k 1 --dim 40 --out " + state);
  REQUIRE(r.status == 0);
  nlohmann::json doc = nlohmann::json::parse(r.out);
  CHECK(doc["summary"]["g2_s"].get<double>() == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(fs::exists(state));

  r = cli("analyze " + state + " --herald 1 --parity --nrf --g-surface 2 2 --g-surface-csv " +
          (dir / "g.csv").string());
  REQUIRE(r.status == 0);
  doc = nlohmann::json::parse(r.out);
  CHECK(doc["g_surface"]["values"].size() == 2);
  const std::string csv = read_text(dir / "g.csv");
  CHECK(csv.rfind("m,n,value\n1,1,", 0) == 0);

  const std::string hist = (dir / "hist.json").string();
  r = cli("simulate --n-pdc 2 --k 1.2 --eta 0.6 0.7 --events 100000 --seed 4 --out " + hist);
  REQUIRE(r.status == 0);
  r = cli("analyze " + hist + " --mc 20 --seed 1");
  REQUIRE(r.status == 0);
  doc = nlohmann::json::parse(r.out);
  CHECK(doc["statistics"][2]["std"].get<double>() > 0.0);

  r = cli("klyshko " + hist);
  CHECK(r.status == 0);
  r = cli("invert " + hist + " --eta 0.6 0.7 --dim 6");
  CHECK(r.status == 0);

  write_text(dir / "pump.csv", "power,mean\n1,0.1\n2,0.21\n4,0.45\n");
  r = cli("pump-fit " + (dir / "pump.csv").string());
  CHECK(r.status == 0);
  CHECK(nlohmann::json::parse(r.out).contains("alpha"));

  // Error paths: JSON error object on stdout and a documented exit code.
  r = cli("simulate --n-pdc -1");
  CHECK(r.status == 2);
  CHECK(nlohmann::json::parse(r.out)["error"]["kind"] == "invalid-parameter");
  r = cli("analyze " + (dir / "missing.json").string());
  CHECK(r.status == 4);
  CHECK(nlohmann::json::parse(r.out)["error"]["kind"] == "io");
  r = cli("analyze --no-such-flag");
  CHECK(r.status == 2);
  r = cli("invert " + state + " --eta 0.2 0.6 --dim 5");
  CHECK(r.status != 0);
  fs::remove_all(dir);
}
