#pragma once

#include <cstdint>
#include <string>

#include "egan/ranker.hpp"

namespace egan {

enum class TrainMode { EnsembleGan, RankGan, IrGan };
enum class BaselineKind { None, RunningMean };

const char* train_mode_name(TrainMode mode);
const char* reward_form_name(RewardForm form);
const char* baseline_name(BaselineKind kind);

// Every knob of a training run.  Defaults are the desk-scale values; the
// `preset = paper` config line swaps in the full-scale ones.
struct TrainConfig {
  TrainMode mode = TrainMode::EnsembleGan;
  uint64_t seed = 7;

  int vocab_size = 2000;
  int d_embed = 32;
  int d_hidden = 32;
  int max_query_len = 12;
  int max_response_len = 12;
  double dropout = 0.1;

  int m1 = 5;   // rollouts per intermediate decision
  int h = 4;    // ranked samples drawn per pool
  int m_r = 20;  // random pool leg
  int m_p = 5;   // retrieved pool leg
  int m_1 = 5;   // generated pool leg
  double margin = 1.0;

  double lr_pretrain_gen = 0.001;
  double lr_pretrain_rank = 0.001;
  double lr_adv_gen = 0.0005;
  double lr_adv_rank = 0.0005;
  int batch_size = 16;

  int g1_steps = 2;
  int g2_steps = 2;
  int d_steps = 4;
  int epochs = 3;

  RewardForm reward_form = RewardForm::Advantage;
  BaselineKind baseline = BaselineKind::None;
};

// Full-scale values: m1=20, h=8, pool (100,10,10), dropout 0.2, batch 50,
// pretraining rates 2e-4 / 1e-3, adversarial rates 2e-6 / 1e-5.  Model
// dimensions are left untouched.
void apply_paper_preset(TrainConfig& cfg);

// Throws ContractError on any violated invariant, including the mode
// gates: rankgan requires g2_steps = 0; irgan requires g1_steps = 0 and
// m_1 = 0; ensemblegan requires every phase count positive.
void validate_train_config(const TrainConfig& cfg);

// Flat `key = value` lines; blank lines and lines starting with '#' are
// skipped.  Unknown keys, bad values, and duplicates raise FormatError
// naming `origin` and the 1-based line; the result is validated.  A mode
// gate zeroes phase counts the file leaves unset and rejects explicit
// nonzero conflicts.
TrainConfig parse_train_config_text(const std::string& text,
                                    const std::string& origin);
TrainConfig parse_train_config_file(const std::string& path);

// Canonical re-parseable rendering; doubles keep full precision.
std::string train_config_to_text(const TrainConfig& cfg);

}  // namespace egan
