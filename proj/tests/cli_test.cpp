// Runs the secmax binary and checks exit codes and key output lines.

#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <sys/wait.h>

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(SECMAX_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

bool has(const Run& r, const std::string& s) { return r.out.find(s) != std::string::npos; }

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("secmax-cli-" + name);
  std::filesystem::remove_all(p);
  return p;
}

const std::string kFixtures = std::string(SECMAX_SOURCE_DIR) + "/assets/fixtures/";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 2") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("circuit-stats --p 8 --mode sideways").code == 2);
  CHECK(run("run --steps 2 --x0 30,0 --ot-group test").code == 2);
}

TEST_CASE("circuit-stats") {
  const Run r = run("circuit-stats --p 8 --l 16");
  CHECK(r.code == 0);
  CHECK(has(r, "AND=480"));
  const Run s = run("circuit-stats --p 8 --l 16 --mode safe_sign");
  CHECK(s.code == 0);
  CHECK(has(s, "AND=487"));
}

TEST_CASE("setup writes bundles and refuses oversized scales") {
  const auto dir = scratch("setup");
  const Run ok = run("setup --network " + kFixtures + "paper_p8.json --out " + dir.string() + " --ot-group test");
  CHECK(ok.code == 0);
  CHECK(has(ok, "mode=safe_sign"));
  CHECK(std::filesystem::exists(dir / "party1.bundle"));
  CHECK(std::filesystem::exists(dir / "party2.bundle"));
  CHECK(std::filesystem::exists(dir / "session.json"));

  const Run bad = run("setup --network " + kFixtures + "paper_p8.json --s1 40 --out " + scratch("bad").string());
  CHECK(bad.code == 1);
  CHECK(has(bad, "setup failed"));

  const Run exact = run("setup --network " + kFixtures + "paper_p8.json --mode paper_exact --out " +
                        scratch("exact").string());
  CHECK(exact.code == 1);

  const Run rerun = run("run --bundles " + dir.string() + " --fixture paper_p8 --steps 3 --x0 2,1");
  CHECK(rerun.code == 0);
  CHECK(has(rerun, "matches_plaintext=yes"));
  const Run mismatch = run("run --bundles " + dir.string() + " --fixture saturated --steps 3");
  CHECK(mismatch.code == 1);
}

TEST_CASE("closed loop run") {
  const auto csv = scratch("trace.csv");
  const Run r = run("run --steps 40 --ot-group test --csv " + csv.string());
  CHECK(r.code == 0);
  CHECK(has(r, "matches_plaintext=yes"));
  CHECK(has(r, "held_steps=0"));
  CHECK(std::filesystem::file_size(csv) > 100);
}

TEST_CASE("single step") {
  const Run r = run("step --fixture paper_p8 --x 1.26,-0.07 --ot-group test");
  CHECK(r.code == 0);
  CHECK(has(r, "plaintext_u="));
}

TEST_CASE("verify") {
  const Run ok = run("verify --suite small");
  CHECK(ok.code == 0);
  CHECK(has(ok, "failed"));
  const Run tamper = run("verify --suite small --inject kdf-tamper");
  CHECK(tamper.code == 1);
  CHECK(has(tamper, "FAIL"));
  const Run refused = run("verify --mode paper_exact --fixture paper_p8");
  CHECK(refused.code == 1);
  CHECK(has(refused, "verify refused"));
}

}
