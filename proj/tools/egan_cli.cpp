#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ensemblegan.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Serving widths: retrieval hits, generator decodes, candidates printed.
constexpr int kServeRetrieved = 5;
constexpr int kServeGenerated = 2;
constexpr int kServeTopScores = 5;
constexpr int kEvalDistractors = 5;

// Pass counts for the standalone pretraining commands; advtrain uses the
// library defaults, which match.
constexpr int kGenPasses = 12;
constexpr int kRankPasses = 6;

// Corpus shape for gen-corpus; sized so a full run stays desk-scale.
constexpr size_t kCorpusPairs = 1200;
constexpr size_t kCorpusTopics = 12;
constexpr size_t kCorpusParaphrases = 5;

struct Args {
  std::string config_path;
  std::string corpus_dir;
  std::string out_dir;
  std::optional<uint64_t> seed;
  std::optional<std::string> mode;
  std::string ranker = "D";
};

int runtime_error_out(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return kExitRuntime;
}

int runtime_error_api(const std::string& where) {
  std::cerr << "error: " << where << ": " << eg_last_error() << "\n";
  return kExitRuntime;
}

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Replaces (or appends) one "key = value" line in flat config text.
std::string patch_config_line(const std::string& text, const std::string& key,
                              const std::string& value) {
  std::ostringstream out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    bool drop = false;
    if (!t.empty() && t[0] != '#') {
      size_t eq = t.find('=');
      if (eq != std::string::npos && trim(t.substr(0, eq)) == key) drop = true;
    }
    if (!drop) out << line << "\n";
  }
  out << key << " = " << value << "\n";
  return out.str();
}

// Config file (or built-in defaults) with --seed / --mode folded in. On
// failure prints the reason and returns NULL.
eg_config* resolve_config(const Args& args) {
  std::string text;
  std::string origin = "defaults";
  if (!args.config_path.empty()) {
    std::optional<std::string> content = read_file(args.config_path);
    if (!content) {
      std::cerr << "error: cannot read config file " << args.config_path
                << "\n";
      return nullptr;
    }
    text = *content;
    origin = args.config_path;
  }
  if (args.seed) text = patch_config_line(text, "seed", std::to_string(*args.seed));
  if (args.mode) text = patch_config_line(text, "mode", *args.mode);
  eg_config* config = nullptr;
  if (eg_config_from_text(text.c_str(), origin.c_str(), &config) != EG_OK) {
    std::cerr << "error: " << eg_last_error() << "\n";
    return nullptr;
  }
  return config;
}

struct ConfigValues {
  size_t vocab_max = 2000;
  size_t max_query_len = 12;
  size_t max_response_len = 12;
};

// Pulls the corpus-shaping keys back out of a parsed config.
ConfigValues config_values(eg_config* config) {
  ConfigValues v;
  char* text = nullptr;
  if (eg_config_render(config, &text) != EG_OK) return v;
  std::istringstream in(text);
  eg_string_free(text);
  std::string line;
  while (std::getline(in, line)) {
    size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "vocab_size") v.vocab_max = std::stoul(value);
    if (key == "max_query_len") v.max_query_len = std::stoul(value);
    if (key == "max_response_len") v.max_response_len = std::stoul(value);
  }
  return v;
}

eg_corpus* load_corpus(const Args& args, const ConfigValues& v) {
  eg_corpus* corpus = nullptr;
  if (eg_corpus_load(args.corpus_dir.c_str(), v.max_query_len,
                     v.max_response_len, &corpus) != EG_OK) {
    std::cerr << "error: cannot load corpus from " << args.corpus_dir << ": "
              << eg_last_error() << "\n";
    return nullptr;
  }
  return corpus;
}

std::optional<std::string> latest_epoch_dir(const std::string& out_dir) {
  fs::path snaps = fs::path(out_dir) / "snapshots";
  std::error_code ec;
  int best = -1;
  fs::path best_path;
  for (const auto& entry : fs::directory_iterator(snaps, ec)) {
    if (!entry.is_directory()) continue;
    std::string name = entry.path().filename().string();
    if (name.rfind("epoch_", 0) != 0) continue;
    const std::string digits = name.substr(6);
    if (digits.empty() ||
        digits.find_first_not_of("0123456789") != std::string::npos)
      continue;
    int n = std::atoi(digits.c_str());
    if (n > best) {
      best = n;
      best_path = entry.path();
    }
  }
  if (best < 0) return std::nullopt;
  return best_path.string();
}

// Opens the newest epoch snapshot under --out against --corpus.
eg_session* open_latest_session(const Args& args, eg_corpus** corpus_out) {
  eg_config* config = resolve_config(args);
  if (!config) return nullptr;
  ConfigValues v = config_values(config);
  eg_config_free(config);
  eg_corpus* corpus = load_corpus(args, v);
  if (!corpus) return nullptr;
  std::optional<std::string> snapshot = latest_epoch_dir(args.out_dir);
  if (!snapshot) {
    std::cerr << "error: no epoch snapshots under " << args.out_dir
              << "/snapshots (run advtrain first)\n";
    eg_corpus_free(corpus);
    return nullptr;
  }
  eg_session* session = nullptr;
  if (eg_session_open(snapshot->c_str(), corpus, &session) != EG_OK) {
    std::cerr << "error: cannot open snapshot " << *snapshot << ": "
              << eg_last_error() << "\n";
    eg_corpus_free(corpus);
    return nullptr;
  }
  *corpus_out = corpus;
  return session;
}

int run_gen_corpus(const Args& args) {
  eg_config* config = resolve_config(args);
  if (!config) return kExitRuntime;
  ConfigValues v = config_values(config);
  eg_config_free(config);
  uint64_t seed = args.seed.value_or(7);
  eg_corpus* corpus = nullptr;
  if (eg_corpus_generate(seed, kCorpusPairs, kCorpusTopics, kCorpusParaphrases,
                         v.vocab_max, v.max_query_len, v.max_response_len,
                         &corpus) != EG_OK)
    return runtime_error_api("gen-corpus");
  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  fs::path dir = fs::path(args.out_dir) / "corpus";
  if (eg_corpus_save(corpus, dir.string().c_str()) != EG_OK) {
    eg_corpus_free(corpus);
    return runtime_error_api("gen-corpus");
  }
  char* stats = nullptr;
  if (eg_corpus_stats(corpus, &stats) == EG_OK) {
    std::cout << "corpus: " << stats << "\n";
    eg_string_free(stats);
  }
  std::cout << "written: " << dir.string() << "\n";
  eg_corpus_free(corpus);
  return kExitOk;
}

int run_build_index(const Args& args) {
  eg_config* config = resolve_config(args);
  if (!config) return kExitRuntime;
  ConfigValues v = config_values(config);
  eg_config_free(config);
  eg_corpus* corpus = load_corpus(args, v);
  if (!corpus) return kExitRuntime;
  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  int rc = kExitOk;
  for (int by_response = 0; by_response <= 1 && rc == kExitOk; ++by_response) {
    eg_index* index = nullptr;
    if (eg_index_build(corpus, by_response, &index) != EG_OK) {
      rc = runtime_error_api("build-index");
      break;
    }
    fs::path path = fs::path(args.out_dir) /
                    (by_response ? "index_response.txt" : "index_query.txt");
    if (eg_index_save(index, path.string().c_str()) != EG_OK)
      rc = runtime_error_api("build-index");
    char* stats = nullptr;
    if (rc == kExitOk && eg_index_stats(index, &stats) == EG_OK) {
      std::cout << "index: " << stats << " -> " << path.string() << "\n";
      eg_string_free(stats);
    }
    eg_index_free(index);
  }
  eg_corpus_free(corpus);
  return rc;
}

int run_pretrain(const Args& args, bool ranker) {
  eg_config* config = resolve_config(args);
  if (!config) return kExitRuntime;
  ConfigValues v = config_values(config);
  eg_corpus* corpus = load_corpus(args, v);
  if (!corpus) {
    eg_config_free(config);
    return kExitRuntime;
  }
  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  fs::path path = fs::path(args.out_dir) /
                  (ranker ? "d_pretrain.ckpt" : "g1_pretrain.ckpt");
  double loss = 0.0;
  eg_status status =
      ranker ? eg_pretrain_ranker(config, corpus, kGenPasses, kRankPasses,
                                  path.string().c_str(), &loss)
             : eg_pretrain_generator(config, corpus, kGenPasses,
                                     path.string().c_str(), &loss);
  eg_corpus_free(corpus);
  eg_config_free(config);
  if (status != EG_OK)
    return runtime_error_api(ranker ? "pretrain-ranker" : "pretrain-gen");
  std::cout << "final " << (ranker ? "ranking" : "cross-entropy")
            << " loss: " << loss << "\n";
  std::cout << "checkpoint: " << path.string() << "\n";
  return kExitOk;
}

int run_advtrain(const Args& args) {
  eg_config* config = resolve_config(args);
  if (!config) return kExitRuntime;
  ConfigValues v = config_values(config);
  eg_corpus* corpus = load_corpus(args, v);
  if (!corpus) {
    eg_config_free(config);
    return kExitRuntime;
  }
  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  fs::path snaps = fs::path(args.out_dir) / "snapshots";

  // Persist the resolved config next to the snapshots for reproducibility.
  char* rendered = nullptr;
  if (eg_config_render(config, &rendered) == EG_OK) {
    std::ofstream out(fs::path(args.out_dir) / "config.txt",
                      std::ios::binary);
    out << rendered;
    eg_string_free(rendered);
  }

  eg_session* session = nullptr;
  eg_status status =
      eg_train(config, corpus, snaps.string().c_str(), -1, -1, &session);
  eg_config_free(config);
  eg_corpus_free(corpus);
  if (status != EG_OK) return runtime_error_api("advtrain");

  std::cout << "mode: " << eg_session_mode(session) << "\n";
  std::cout << "epochs completed: " << eg_session_epoch(session) << "\n";
  for (const char* series : {"g1", "g2", "d"}) {
    size_t count = 0;
    eg_session_history(session, series, nullptr, 0, &count);
    if (count == 0) continue;
    std::vector<double> values(count);
    eg_session_history(session, series, values.data(), count, &count);
    std::cout << series << " history tail: " << values.back() << " over "
              << count << " steps\n";
  }
  std::cout << "snapshots: " << snaps.string() << "\n";
  eg_session_free(session);
  return kExitOk;
}

int run_respond(const Args& args) {
  eg_corpus* corpus = nullptr;
  eg_session* session = open_latest_session(args, &corpus);
  if (!session) return kExitRuntime;
  const bool use_g2 = args.ranker == "G2";
  const bool retrieval_only = std::string(eg_session_mode(session)) == "irgan";
  const uint64_t seed = args.seed.value_or(7);
  int rc = kExitOk;
  std::string line;
  bool first = true;
  while (std::getline(std::cin, line)) {
    if (trim(line).empty()) continue;
    char* out = nullptr;
    if (eg_session_respond(session, line.c_str(), use_g2 ? 1 : 0,
                           kServeRetrieved,
                           retrieval_only ? 0 : kServeGenerated, seed,
                           kServeTopScores, &out) != EG_OK) {
      rc = runtime_error_api("respond");
      break;
    }
    nlohmann::json j = nlohmann::json::parse(std::string(out));
    eg_string_free(out);
    if (!first) std::cout << "\n";
    first = false;
    std::cout << "query: " << j["query"].get<std::string>() << "\n";
    std::cout << "response: " << j["response"].get<std::string>() << "\n";
    std::cout << "provenance: " << j["provenance"].get<std::string>() << "\n";
    std::cout << "candidates:\n";
    for (const auto& c : j["candidates"]) {
      char scored[64];
      std::snprintf(scored, sizeof scored, "%.6f", c["score"].get<double>());
      std::cout << "  " << c["rank"].get<int>() << ". score=" << scored
                << " provenance=" << c["provenance"].get<std::string>()
                << " response=" << c["response"].get<std::string>() << "\n";
    }
  }
  eg_session_free(session);
  eg_corpus_free(corpus);
  return rc;
}

int run_evaluate(const Args& args) {
  eg_corpus* corpus = nullptr;
  eg_session* session = open_latest_session(args, &corpus);
  if (!session) return kExitRuntime;
  const bool use_g2 = args.ranker == "G2";
  const bool retrieval_only = std::string(eg_session_mode(session)) == "irgan";
  char* report = nullptr;
  eg_status status = eg_session_evaluate(
      session, use_g2 ? 1 : 0, kServeRetrieved,
      retrieval_only ? 0 : kServeGenerated, kEvalDistractors,
      args.seed.value_or(7), &report);
  eg_session_free(session);
  eg_corpus_free(corpus);
  if (status != EG_OK) return runtime_error_api("evaluate");
  fs::path path = fs::path(args.out_dir) /
                  (use_g2 ? "metrics_g2.txt" : "metrics_d.txt");
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
      eg_string_free(report);
      return runtime_error_out("cannot write " + path.string());
    }
    out << report;
  }
  std::cout << report;
  std::cout << "written: " << path.string() << "\n";
  eg_string_free(report);
  return kExitOk;
}

int run_selftest(const Args& args) {
  char* report = nullptr;
  eg_status status = eg_selftest(args.seed.value_or(7), &report);
  if (report) {
    std::cout << report;
    eg_string_free(report);
  }
  if (status != EG_OK) return runtime_error_api("selftest");
  return kExitOk;
}

void apply_thread_env() {
  unsigned threads = 1;
  if (const char* env = std::getenv("EG_THREADS")) {
    char* end = nullptr;
    unsigned long parsed = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && parsed > 0) threads = (unsigned)parsed;
  }
  eg_set_thread_cap(threads);
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_env();

  CLI::App app{
      "Adversarial retrieval-generation ensemble for dialogue responses"};
  app.require_subcommand(1);

  Args args;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "flat key = value file");
  };
  auto add_corpus = [&](CLI::App* sub) {
    sub->add_option("--corpus", args.corpus_dir, "corpus directory")
        ->required();
  };
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", args.seed, "base random seed");
  };
  auto add_mode = [&](CLI::App* sub) {
    sub->add_option("--mode", args.mode, "training mode")
        ->check(CLI::IsMember({"ensemblegan", "rankgan", "irgan"}));
  };
  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", args.out_dir, "output directory")->required();
  };
  auto add_ranker = [&](CLI::App* sub) {
    sub->add_option("--ranker", args.ranker, "which ranker serves")
        ->check(CLI::IsMember({"D", "G2"}));
  };

  CLI::App* gen_corpus =
      app.add_subcommand("gen-corpus", "generate a synthetic dialogue corpus");
  add_config(gen_corpus);
  add_seed(gen_corpus);
  add_out(gen_corpus);

  CLI::App* build_index =
      app.add_subcommand("build-index", "build the retrieval indexes");
  add_config(build_index);
  add_corpus(build_index);
  add_out(build_index);

  CLI::App* pretrain_gen = app.add_subcommand(
      "pretrain-gen", "cross-entropy pretraining for the generator");
  add_config(pretrain_gen);
  add_corpus(pretrain_gen);
  add_seed(pretrain_gen);
  add_mode(pretrain_gen);
  add_out(pretrain_gen);

  CLI::App* pretrain_ranker = app.add_subcommand(
      "pretrain-ranker", "margin-ranking pretraining for the ranker");
  add_config(pretrain_ranker);
  add_corpus(pretrain_ranker);
  add_seed(pretrain_ranker);
  add_mode(pretrain_ranker);
  add_out(pretrain_ranker);

  CLI::App* advtrain =
      app.add_subcommand("advtrain", "full adversarial training run");
  advtrain->add_option("--config", args.config_path, "flat key = value file")
      ->required();
  add_corpus(advtrain);
  add_seed(advtrain);
  add_mode(advtrain);
  add_out(advtrain);

  CLI::App* respond = app.add_subcommand(
      "respond", "serve responses for queries read from stdin");
  add_config(respond);
  add_corpus(respond);
  add_seed(respond);
  add_out(respond);
  add_ranker(respond);

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "score the trained systems on the test set");
  add_config(evaluate);
  add_corpus(evaluate);
  add_seed(evaluate);
  add_out(evaluate);
  add_ranker(evaluate);

  CLI::App* selftest =
      app.add_subcommand("selftest", "run the built-in invariant suite");
  add_seed(selftest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "usage error: " << e.what() << "\n";
    std::cerr << app.help();
    return kExitUsage;
  }

  if (*gen_corpus) return run_gen_corpus(args);
  if (*build_index) return run_build_index(args);
  if (*pretrain_gen) return run_pretrain(args, false);
  if (*pretrain_ranker) return run_pretrain(args, true);
  if (*advtrain) return run_advtrain(args);
  if (*respond) return run_respond(args);
  if (*evaluate) return run_evaluate(args);
  if (*selftest) return run_selftest(args);
  return kExitUsage;
}
