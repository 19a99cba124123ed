#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int status = -1;
  std::string output;  // stdout and stderr interleaved
};

RunResult run_cmd(const std::string& cmd) {
  RunResult result;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0)
    result.output.append(buf, n);
  int rc = pclose(pipe);
  result.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return result;
}

std::string cli() { return EGAN_CLI_PATH; }

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

const char* kTinyConfig =
    "seed = 7\n"
    "vocab_size = 300\n"
    "d_embed = 12\n"
    "d_hidden = 12\n"
    "dropout = 0.1\n"
    "m1 = 2\n"
    "h = 2\n"
    "m_r = 8\n"
    "m_p = 3\n"
    "m_1 = 2\n"
    "batch_size = 8\n"
    "g1_steps = 1\n"
    "g2_steps = 1\n"
    "d_steps = 2\n"
    "epochs = 1\n";

// One workspace with a generated corpus and a finished training run, built
// once and shared across cases.
struct Workspace {
  fs::path root;
  bool ready = false;

  Workspace() : root(fs::temp_directory_path() / "egan_cli_test") {
    fs::remove_all(root);
    fs::create_directories(root);
    spit(root / "tiny.cfg", kTinyConfig);
    RunResult gen = run_cmd(cli() + " gen-corpus --seed 5 --out " +
                            (root / "work").string());
    RunResult train = run_cmd(cli() + " advtrain --config " +
                              (root / "tiny.cfg").string() + " --corpus " +
                              (root / "work" / "corpus").string() + " --out " +
                              (root / "run").string());
    ready = gen.status == 0 && train.status == 0;
  }
  ~Workspace() { fs::remove_all(root); }

  std::string corpus() const { return (root / "work" / "corpus").string(); }
  std::string run_dir() const { return (root / "run").string(); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("usage errors exit with 1 and runtime errors with 2") {
  CHECK(run_cmd(cli()).status == 1);
  CHECK(run_cmd(cli() + " no-such-command").status == 1);
  CHECK(run_cmd(cli() + " gen-corpus --bogus-flag x --out /tmp/x").status == 1);
  CHECK(run_cmd(cli() + " --help").status == 0);

  RunResult missing = run_cmd(cli() + " advtrain --corpus x --out y");
  CHECK(missing.status == 1);
  CHECK(missing.output.find("--config") != std::string::npos);

  RunResult bad_mode =
      run_cmd(cli() + " pretrain-gen --corpus x --out y --mode banana");
  CHECK(bad_mode.status == 1);

  // Flags fine, input missing: a runtime failure.
  RunResult no_corpus = run_cmd(cli() + " build-index --corpus /nonexistent" +
                                " --out /tmp/egan_cli_nowhere");
  CHECK(no_corpus.status == 2);
  CHECK(no_corpus.output.find("error") != std::string::npos);
}

TEST_CASE("selftest passes") {
  RunResult r = run_cmd(cli() + " selftest");
  CHECK(r.status == 0);
  CHECK(r.output.find("ok rng_uniformity") != std::string::npos);
  CHECK(r.output.find("FAIL") == std::string::npos);
}

TEST_CASE("generated corpus artifacts are byte-identical across reruns") {
  REQUIRE(ws().ready);
  fs::path again = ws().root / "work_again";
  RunResult r =
      run_cmd(cli() + " gen-corpus --seed 5 --out " + again.string());
  REQUIRE(r.status == 0);
  for (const auto& entry :
       fs::directory_iterator(ws().root / "work" / "corpus")) {
    fs::path other = again / "corpus" / entry.path().filename();
    CAPTURE(entry.path().string());
    REQUIRE(fs::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
  }
}

TEST_CASE("index building writes both sides") {
  REQUIRE(ws().ready);
  fs::path out = ws().root / "idx";
  RunResult r = run_cmd(cli() + " build-index --corpus " + ws().corpus() +
                        " --out " + out.string());
  CHECK(r.status == 0);
  CHECK(fs::exists(out / "index_query.txt"));
  CHECK(fs::exists(out / "index_response.txt"));
  CHECK(r.output.find("by_query") != std::string::npos);
  CHECK(r.output.find("by_response") != std::string::npos);
}

TEST_CASE("training writes per-epoch snapshots and the resolved config") {
  REQUIRE(ws().ready);
  fs::path run = ws().root / "run";
  CHECK(fs::exists(run / "config.txt"));
  CHECK(fs::exists(run / "snapshots" / "epoch_0" / "d.ckpt"));
  CHECK(fs::exists(run / "snapshots" / "epoch_1" / "d.ckpt"));
  std::string cfg_text = slurp(run / "config.txt");
  CHECK(cfg_text.find("mode = ensemblegan") != std::string::npos);
  CHECK(cfg_text.find("epochs = 1") != std::string::npos);
}

TEST_CASE("responding prints the response with provenance and five scores") {
  REQUIRE(ws().ready);
  RunResult r = run_cmd("printf 'what about the largest lake\\n' | " + cli() +
                        " respond --corpus " + ws().corpus() + " --out " +
                        ws().run_dir() + " --ranker D");
  CHECK(r.status == 0);
  CHECK(r.output.find("response: ") != std::string::npos);
  CHECK(r.output.find("provenance: ") != std::string::npos);
  size_t count = 0, pos = 0;
  while ((pos = r.output.find(". score=", pos)) != std::string::npos) {
    ++count;
    pos += 8;
  }
  CHECK(count >= 1);
  CHECK(count <= 5);

  RunResult again = run_cmd("printf 'what about the largest lake\\n' | " +
                            cli() + " respond --corpus " + ws().corpus() +
                            " --out " + ws().run_dir() + " --ranker D");
  CHECK(again.output == r.output);

  RunResult g2 = run_cmd("printf 'what about the largest lake\\n' | " + cli() +
                         " respond --corpus " + ws().corpus() + " --out " +
                         ws().run_dir() + " --ranker G2");
  CHECK(g2.status == 0);

  RunResult untrained = run_cmd("printf 'hi\\n' | " + cli() +
                                " respond --corpus " + ws().corpus() +
                                " --out " + (ws().root / "empty").string());
  CHECK(untrained.status == 2);
  CHECK(untrained.output.find("advtrain") != std::string::npos);
}

TEST_CASE("evaluation writes a parseable report under --out") {
  REQUIRE(ws().ready);
  RunResult r = run_cmd(cli() + " evaluate --corpus " + ws().corpus() +
                        " --out " + ws().run_dir() + " --ranker D");
  CHECK(r.status == 0);
  fs::path report = ws().root / "run" / "metrics_d.txt";
  REQUIRE(fs::exists(report));
  std::string text = slurp(report);
  CHECK(text.find("ensemble.bleu1 = ") != std::string::npos);
  CHECK(text.find("ranking.p_at_1 = ") != std::string::npos);
  CHECK(r.output.find("ensemble.bleu1 = ") != std::string::npos);
}

TEST_CASE("malformed config files fail at runtime with the line named") {
  REQUIRE(ws().ready);
  fs::path bad = ws().root / "bad.cfg";
  spit(bad, "vocab_size = banana\n");
  RunResult r = run_cmd(cli() + " advtrain --config " + bad.string() +
                        " --corpus " + ws().corpus() + " --out " +
                        (ws().root / "bad_run").string());
  CHECK(r.status == 2);
  CHECK(r.output.find("vocab_size") != std::string::npos);
}
