#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "egan/config.hpp"
#include "egan/errors.hpp"

using namespace egan;

TEST_CASE("empty text yields the desk defaults") {
  TrainConfig cfg = parse_train_config_text("", "mem");
  CHECK(cfg.mode == TrainMode::EnsembleGan);
  CHECK(cfg.seed == 7);
  CHECK(cfg.m1 == 5);
  CHECK(cfg.h == 4);
  CHECK(cfg.m_r == 20);
  CHECK(cfg.m_p == 5);
  CHECK(cfg.m_1 == 5);
  CHECK(cfg.margin == 1.0);
  CHECK(cfg.vocab_size == 2000);
  CHECK(cfg.d_embed == 32);
  CHECK(cfg.d_hidden == 32);
  CHECK(cfg.max_query_len == 12);
  CHECK(cfg.max_response_len == 12);
  CHECK(cfg.dropout == 0.1);
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.g1_steps == 2);
  CHECK(cfg.g2_steps == 2);
  CHECK(cfg.d_steps == 4);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.reward_form == RewardForm::Advantage);
  CHECK(cfg.baseline == BaselineKind::None);
}

TEST_CASE("paper preset swaps in the full-scale values only") {
  TrainConfig cfg = parse_train_config_text("preset = paper\n", "mem");
  CHECK(cfg.m1 == 20);
  CHECK(cfg.h == 8);
  CHECK(cfg.m_r == 100);
  CHECK(cfg.m_p == 10);
  CHECK(cfg.m_1 == 10);
  CHECK(cfg.dropout == 0.2);
  CHECK(cfg.lr_pretrain_gen == 0.0002);
  CHECK(cfg.lr_pretrain_rank == 0.001);
  CHECK(cfg.lr_adv_gen == 2e-6);
  CHECK(cfg.lr_adv_rank == 1e-5);
  CHECK(cfg.batch_size == 50);
  // Model dimensions stay at desk scale unless overridden.
  CHECK(cfg.vocab_size == 2000);
  CHECK(cfg.d_hidden == 32);
  CHECK(cfg.g1_steps == 2);
}

TEST_CASE("overrides after a preset win") {
  TrainConfig cfg =
      parse_train_config_text("preset = paper\nm1 = 3\nbatch_size = 8\n",
                              "mem");
  CHECK(cfg.m1 == 3);
  CHECK(cfg.batch_size == 8);
  CHECK(cfg.h == 8);
}

TEST_CASE("whitespace, comments, and blank lines are tolerated") {
  TrainConfig cfg = parse_train_config_text(
      "# a comment\n\n   m1   =   7  \n\th =\t5\n", "mem");
  CHECK(cfg.m1 == 7);
  CHECK(cfg.h == 5);
}

TEST_CASE("parse failures name the origin and line") {
  auto line_of = [](const std::string& text) {
    try {
      parse_train_config_text(text, "cfg.txt");
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(line_of("m1 = 5\nbogus_key = 1\n").find("cfg.txt:2") !=
        std::string::npos);
  CHECK(line_of("m1 = abc\n").find("cfg.txt:1") != std::string::npos);
  CHECK(line_of("dropout = wet\n").find("invalid number") !=
        std::string::npos);
  CHECK(line_of("just words\n").find("expected 'key = value'") !=
        std::string::npos);
  CHECK(line_of("m1 = 5\nm1 = 6\n").find("duplicate key 'm1'") !=
        std::string::npos);
  CHECK(line_of("m1 =\n").find("empty value") != std::string::npos);
  CHECK(line_of("mode = EnsembleGAN\n").find("unknown mode") !=
        std::string::npos);
  CHECK(line_of("M1 = 5\n").find("unknown key 'M1'") != std::string::npos);
  CHECK(line_of("preset = big\n").find("unknown preset") != std::string::npos);
  CHECK(line_of("seed = -4\n").find("invalid unsigned integer") !=
        std::string::npos);
}

TEST_CASE("mode gates zero unset phase counts and reject conflicts") {
  TrainConfig rank = parse_train_config_text("mode = rankgan\n", "mem");
  CHECK(rank.g2_steps == 0);
  CHECK(rank.g1_steps == 2);
  TrainConfig ir = parse_train_config_text("mode = irgan\n", "mem");
  CHECK(ir.g1_steps == 0);
  CHECK(ir.m_1 == 0);
  CHECK(ir.g2_steps == 2);

  CHECK_THROWS_AS(
      parse_train_config_text("mode = irgan\ng1_steps = 3\n", "mem"),
      ContractError);
  CHECK_THROWS_AS(parse_train_config_text("mode = irgan\nm_1 = 2\n", "mem"),
                  ContractError);
  CHECK_THROWS_AS(
      parse_train_config_text("mode = rankgan\ng2_steps = 1\n", "mem"),
      ContractError);
  CHECK_NOTHROW(
      parse_train_config_text("mode = rankgan\ng2_steps = 0\n", "mem"));
}

TEST_CASE("validation rejects out-of-range values") {
  CHECK_THROWS_AS(parse_train_config_text("g1_steps = 0\n", "mem"),
                  ContractError);
  CHECK_THROWS_AS(parse_train_config_text("h = 0\n", "mem"), ContractError);
  CHECK_THROWS_AS(
      parse_train_config_text("m_r = 0\nm_p = 0\nm_1 = 2\nh = 4\n", "mem"),
      ContractError);
  CHECK_THROWS_AS(parse_train_config_text("dropout = 1.0\n", "mem"),
                  ContractError);
  CHECK_THROWS_AS(parse_train_config_text("margin = 0\n", "mem"),
                  ContractError);
  CHECK_THROWS_AS(parse_train_config_text("vocab_size = 4\n", "mem"),
                  ContractError);
  CHECK_THROWS_AS(parse_train_config_text("epochs = -1\n", "mem"),
                  ContractError);
  CHECK_THROWS_AS(parse_train_config_text("lr_adv_gen = 0\n", "mem"),
                  ContractError);
  CHECK_THROWS_AS(parse_train_config_text("max_response_len = 1\n", "mem"),
                  ContractError);

  TrainConfig cfg;
  cfg.dropout = -0.5;
  CHECK_THROWS_AS(validate_train_config(cfg), ContractError);
}

TEST_CASE("canonical text round-trips exactly") {
  TrainConfig cfg = parse_train_config_text(
      "mode = irgan\nseed = 123\ndropout = 0.25\nlr_adv_rank = 3.5e-5\n"
      "reward_form = logd\nbaseline = running_mean\nepochs = 0\n",
      "mem");
  std::string text = train_config_to_text(cfg);
  TrainConfig again = parse_train_config_text(text, "mem");
  CHECK(train_config_to_text(again) == text);
  CHECK(again.mode == TrainMode::IrGan);
  CHECK(again.seed == 123);
  CHECK(again.dropout == cfg.dropout);
  CHECK(again.lr_adv_rank == 3.5e-5);
  CHECK(again.reward_form == RewardForm::LogProb);
  CHECK(again.baseline == BaselineKind::RunningMean);
  CHECK(again.epochs == 0);

  std::string defaults = train_config_to_text(TrainConfig{});
  CHECK(train_config_to_text(parse_train_config_text(defaults, "mem")) ==
        defaults);
}

TEST_CASE("file loading works and missing files raise IoError") {
  const char* path = "cfg_test_tmp.txt";
  {
    std::ofstream out(path);
    out << "m1 = 9\nmode = rankgan\n";
  }
  TrainConfig cfg = parse_train_config_file(path);
  CHECK(cfg.m1 == 9);
  CHECK(cfg.mode == TrainMode::RankGan);
  std::remove(path);
  CHECK_THROWS_AS(parse_train_config_file("definitely_missing.cfg"), IoError);
}

TEST_CASE("enum names render their config spellings") {
  CHECK(std::string(train_mode_name(TrainMode::IrGan)) == "irgan");
  CHECK(std::string(reward_form_name(RewardForm::LogProb)) == "logd");
  CHECK(std::string(baseline_name(BaselineKind::RunningMean)) ==
        "running_mean");
}
