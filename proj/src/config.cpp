#include "egan/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "egan/corpus.hpp"
#include "egan/errors.hpp"

namespace egan {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& origin, int line,
                       const std::string& what) {
  throw FormatError(origin + ":" + std::to_string(line) + ": " + what);
}

long long parse_int(const std::string& origin, int line, const std::string& key,
                    const std::string& value) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(),
                                   out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    fail(origin, line, "invalid integer '" + value + "' for key '" + key + "'");
  return out;
}

uint64_t parse_u64(const std::string& origin, int line, const std::string& key,
                   const std::string& value) {
  uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(),
                                   out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    fail(origin, line,
         "invalid unsigned integer '" + value + "' for key '" + key + "'");
  return out;
}

double parse_double(const std::string& origin, int line, const std::string& key,
                    const std::string& value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(),
                                   out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    fail(origin, line, "invalid number '" + value + "' for key '" + key + "'");
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const char* train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::EnsembleGan: return "ensemblegan";
    case TrainMode::RankGan: return "rankgan";
    case TrainMode::IrGan: return "irgan";
  }
  throw ContractError("train_mode_name: unknown mode");
}

const char* reward_form_name(RewardForm form) {
  switch (form) {
    case RewardForm::Advantage: return "advantage";
    case RewardForm::LogProb: return "logd";
  }
  throw ContractError("reward_form_name: unknown form");
}

const char* baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::None: return "none";
    case BaselineKind::RunningMean: return "running_mean";
  }
  throw ContractError("baseline_name: unknown kind");
}

void apply_paper_preset(TrainConfig& cfg) {
  cfg.m1 = 20;
  cfg.h = 8;
  cfg.m_r = 100;
  cfg.m_p = 10;
  cfg.m_1 = 10;
  cfg.dropout = 0.2;
  cfg.lr_pretrain_gen = 0.0002;
  cfg.lr_pretrain_rank = 0.001;
  cfg.lr_adv_gen = 2e-6;
  cfg.lr_adv_rank = 1e-5;
  cfg.batch_size = 50;
}

void validate_train_config(const TrainConfig& cfg) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ContractError("config: " + what);
  };
  need(cfg.vocab_size > Vocab::kReservedCount,
       "vocab_size must exceed the reserved token count");
  need(cfg.d_embed >= 1, "d_embed must be >= 1");
  need(cfg.d_hidden >= 1, "d_hidden must be >= 1");
  need(cfg.max_query_len >= 2, "max_query_len must be >= 2");
  need(cfg.max_response_len >= 2, "max_response_len must be >= 2");
  need(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "dropout must lie in [0, 1)");
  need(cfg.m1 >= 1, "m1 must be >= 1");
  need(cfg.h >= 1, "h must be >= 1");
  need(cfg.m_r >= 0 && cfg.m_p >= 0 && cfg.m_1 >= 0,
       "pool legs must be nonnegative");
  need(cfg.m_r + cfg.m_p + cfg.m_1 >= cfg.h,
       "pool size m_r + m_p + m_1 must be >= h");
  need(cfg.margin > 0.0, "margin must be positive");
  need(cfg.lr_pretrain_gen > 0.0 && cfg.lr_pretrain_rank > 0.0 &&
           cfg.lr_adv_gen > 0.0 && cfg.lr_adv_rank > 0.0,
       "learning rates must be positive");
  need(cfg.batch_size >= 1, "batch_size must be >= 1");
  need(cfg.epochs >= 0, "epochs must be >= 0");
  need(cfg.d_steps >= 1, "d_steps must be >= 1");
  switch (cfg.mode) {
    case TrainMode::EnsembleGan:
      need(cfg.g1_steps >= 1, "g1_steps must be >= 1 in ensemblegan mode");
      need(cfg.g2_steps >= 1, "g2_steps must be >= 1 in ensemblegan mode");
      break;
    case TrainMode::RankGan:
      need(cfg.g1_steps >= 1, "g1_steps must be >= 1 in rankgan mode");
      need(cfg.g2_steps == 0, "rankgan mode forces g2_steps = 0");
      break;
    case TrainMode::IrGan:
      need(cfg.g1_steps == 0, "irgan mode forces g1_steps = 0");
      need(cfg.m_1 == 0, "irgan mode forces m_1 = 0");
      need(cfg.g2_steps >= 1, "g2_steps must be >= 1 in irgan mode");
      break;
  }
}

TrainConfig parse_train_config_text(const std::string& text,
                                    const std::string& origin) {
  TrainConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      fail(origin, line, "expected 'key = value', got '" + s + "'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(origin, line, "empty key");
    if (value.empty()) fail(origin, line, "empty value for key '" + key + "'");
    if (!seen.insert(key).second)
      fail(origin, line, "duplicate key '" + key + "'");

    if (key == "preset") {
      if (value == "paper")
        apply_paper_preset(cfg);
      else if (value != "desk")
        fail(origin, line, "unknown preset '" + value + "'");
    } else if (key == "mode") {
      if (value == "ensemblegan")
        cfg.mode = TrainMode::EnsembleGan;
      else if (value == "rankgan")
        cfg.mode = TrainMode::RankGan;
      else if (value == "irgan")
        cfg.mode = TrainMode::IrGan;
      else
        fail(origin, line, "unknown mode '" + value + "'");
    } else if (key == "seed") {
      cfg.seed = parse_u64(origin, line, key, value);
    } else if (key == "vocab_size") {
      cfg.vocab_size = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "d_embed") {
      cfg.d_embed = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "d_hidden") {
      cfg.d_hidden = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "max_query_len") {
      cfg.max_query_len = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "max_response_len") {
      cfg.max_response_len =
          static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "dropout") {
      cfg.dropout = parse_double(origin, line, key, value);
    } else if (key == "m1") {
      cfg.m1 = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "h") {
      cfg.h = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "m_r") {
      cfg.m_r = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "m_p") {
      cfg.m_p = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "m_1") {
      cfg.m_1 = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "margin") {
      cfg.margin = parse_double(origin, line, key, value);
    } else if (key == "lr_pretrain_gen") {
      cfg.lr_pretrain_gen = parse_double(origin, line, key, value);
    } else if (key == "lr_pretrain_rank") {
      cfg.lr_pretrain_rank = parse_double(origin, line, key, value);
    } else if (key == "lr_adv_gen") {
      cfg.lr_adv_gen = parse_double(origin, line, key, value);
    } else if (key == "lr_adv_rank") {
      cfg.lr_adv_rank = parse_double(origin, line, key, value);
    } else if (key == "batch_size") {
      cfg.batch_size = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "g1_steps") {
      cfg.g1_steps = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "g2_steps") {
      cfg.g2_steps = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "d_steps") {
      cfg.d_steps = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "epochs") {
      cfg.epochs = static_cast<int>(parse_int(origin, line, key, value));
    } else if (key == "reward_form") {
      if (value == "advantage")
        cfg.reward_form = RewardForm::Advantage;
      else if (value == "logd")
        cfg.reward_form = RewardForm::LogProb;
      else
        fail(origin, line, "unknown reward_form '" + value + "'");
    } else if (key == "baseline") {
      if (value == "none")
        cfg.baseline = BaselineKind::None;
      else if (value == "running_mean")
        cfg.baseline = BaselineKind::RunningMean;
      else
        fail(origin, line, "unknown baseline '" + value + "'");
    } else {
      fail(origin, line, "unknown key '" + key + "'");
    }
  }

  // Phase counts the file left alone follow the mode gate instead of the
  // desk default; explicit conflicts are caught by validation below.
  if (cfg.mode == TrainMode::RankGan && !seen.count("g2_steps"))
    cfg.g2_steps = 0;
  if (cfg.mode == TrainMode::IrGan) {
    if (!seen.count("g1_steps")) cfg.g1_steps = 0;
    if (!seen.count("m_1")) cfg.m_1 = 0;
  }
  validate_train_config(cfg);
  return cfg;
}

TrainConfig parse_train_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_train_config_text(buf.str(), path);
}

std::string train_config_to_text(const TrainConfig& cfg) {
  std::ostringstream out;
  out << "mode = " << train_mode_name(cfg.mode) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "vocab_size = " << cfg.vocab_size << "\n";
  out << "d_embed = " << cfg.d_embed << "\n";
  out << "d_hidden = " << cfg.d_hidden << "\n";
  out << "max_query_len = " << cfg.max_query_len << "\n";
  out << "max_response_len = " << cfg.max_response_len << "\n";
  out << "dropout = " << fmt_double(cfg.dropout) << "\n";
  out << "m1 = " << cfg.m1 << "\n";
  out << "h = " << cfg.h << "\n";
  out << "m_r = " << cfg.m_r << "\n";
  out << "m_p = " << cfg.m_p << "\n";
  out << "m_1 = " << cfg.m_1 << "\n";
  out << "margin = " << fmt_double(cfg.margin) << "\n";
  out << "lr_pretrain_gen = " << fmt_double(cfg.lr_pretrain_gen) << "\n";
  out << "lr_pretrain_rank = " << fmt_double(cfg.lr_pretrain_rank) << "\n";
  out << "lr_adv_gen = " << fmt_double(cfg.lr_adv_gen) << "\n";
  out << "lr_adv_rank = " << fmt_double(cfg.lr_adv_rank) << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "g1_steps = " << cfg.g1_steps << "\n";
  out << "g2_steps = " << cfg.g2_steps << "\n";
  out << "d_steps = " << cfg.d_steps << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "reward_form = " << reward_form_name(cfg.reward_form) << "\n";
  out << "baseline = " << baseline_name(cfg.baseline) << "\n";
  return out.str();
}

}  // namespace egan
