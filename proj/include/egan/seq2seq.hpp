#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "egan/gru.hpp"
#include "egan/tensor.hpp"

namespace egan {

enum class DecodeMode { Greedy, Sample };

struct DecodeConfig {
  // Total length cap including the terminal EOS; content stops at
  // max_len - 1 tokens, after which EOS is appended unconditionally.
  int max_len = 12;
  double temperature = 1.0;
  uint64_t seed = 0;
};

struct RolloutConfig {
  int m1 = 5;  // rollouts per intermediate decision
  int max_len = 12;
  double temperature = 1.0;
  uint64_t seed = 0;
};

struct SeqPair {
  std::vector<int> query;
  std::vector<int> response;
};

struct DecodeStep {
  std::vector<double> distribution;  // over the vocab; sums to 1
  std::vector<double> state;         // s_t
  std::vector<double> context;       // c_t
  std::vector<double> attention;     // weights over query positions
};

// Reward of a completed (EOS-terminated) response judged against the ground
// truth for the same query.
using SeqRewardFn = std::function<double(const std::vector<int>& query,
                                         const std::vector<int>& completed,
                                         const std::vector<int>& truth)>;

// Attention encoder-decoder over token ids. Generation starts from BOS and
// ends at a sampled EOS or at the length cap, where EOS is forced; padding
// and BOS can never be emitted (their logits carry a -1e9 mask).
class Seq2SeqModel {
 public:
  Seq2SeqModel(int vocab_size, int d_embed, int d_hidden,
               double dropout_rate, uint64_t seed, int max_query_len = 64);

  Seq2SeqModel(const Seq2SeqModel&) = delete;
  Seq2SeqModel& operator=(const Seq2SeqModel&) = delete;
  Seq2SeqModel(Seq2SeqModel&&) = default;
  Seq2SeqModel& operator=(Seq2SeqModel&&) = default;

  // One encoder state per query token, starting from the zero state.
  std::vector<std::vector<double>> encode_query(
      const std::vector<int>& query) const;

  // s_0 = tanh(h_last W + b).
  std::vector<double> initial_state(
      const std::vector<std::vector<double>>& encoder_states) const;

  // One decoder step in evaluation mode. Attention weights are nonnegative
  // and sum to 1; the distribution sums to 1.
  DecodeStep decode_step(
      int prev_token, const std::vector<double>& state,
      const std::vector<std::vector<double>>& encoder_states) const;

  // Teacher-forced mean per-token negative log-likelihood over the batch;
  // every response token including the terminal EOS is a target.  With
  // accumulate_grads the backward pass adds into the parameter grads.
  double ce_loss(const std::vector<SeqPair>& batch, uint64_t step_seed,
                 bool accumulate_grads);

  // ce_loss followed by one optimizer step; returns the pre-step loss.
  double pretrain_ce_step(const std::vector<SeqPair>& batch, Optimizer& opt,
                          uint64_t step_seed);

  // Greedy or seeded sampling decode; always returns an EOS-terminated
  // sequence of length <= config.max_len.
  std::vector<int> decode_sequence(const std::vector<int>& query,
                                   DecodeMode mode,
                                   const DecodeConfig& config) const;

  // Log-probability of `response` under the decode semantics with the given
  // cap: every token is a decision except an EOS forced by the cap.
  double sequence_log_prob(const std::vector<int>& query,
                           const std::vector<int>& response, int cap) const;

  // Q value of the decision prefix (the last prefix token is the decision
  // under evaluation). A terminal prefix is rewarded directly; an
  // intermediate one averages reward_fn over m1 seeded rollouts run in
  // evaluation mode.
  double action_value(const SeqRewardFn& reward_fn,
                      const std::vector<int>& query,
                      const std::vector<int>& truth,
                      const std::vector<int>& prefix,
                      const RolloutConfig& cfg) const;

  // REINFORCE ascent: per batch item, sample one sequence, weight each
  // decision's log-probability by its action value, average across the
  // batch, take one optimizer step. Returns the mean terminal reward of the
  // sampled sequences before the update.
  double pg_update_g1(const SeqRewardFn& reward_fn,
                      const std::vector<SeqPair>& batch,
                      const RolloutConfig& cfg, Optimizer& opt);

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  int vocab_size() const { return vocab_size_; }
  int embed_dim() const { return d_embed_; }
  int hidden_dim() const { return d_hidden_; }
  int max_query_len() const { return max_query_len_; }
  double dropout_rate() const { return dropout_rate_; }

 private:
  struct Bound {
    Tensor table;
    BoundGru enc, dec;
    Tensor wa, ua, ba, va;
    Tensor wi, bi;
    Tensor wo, bo;
    Tensor mask;
  };
  // Encoder states plus per-position attention keys and the stacked state
  // matrix reused across decoder steps.
  struct EncCtx {
    std::vector<Tensor> states;
    std::vector<Tensor> keys;
    Tensor stacked;
  };
  struct StepNodes {
    Tensor probs;
    Tensor state;
    Tensor context;
    Tensor attention;
  };

  Bound bind(Tape& t) const;
  EncCtx encode_bound(Tape& t, const Bound& b,
                      const std::vector<int>& query) const;
  EncCtx wrap_states(Tape& t, const Bound& b,
                     const std::vector<std::vector<double>>& states) const;
  Tensor initial_state_bound(const Bound& b, const EncCtx& ctx) const;
  StepNodes step_bound(Tape& t, const Bound& b, const EncCtx& ctx,
                       int prev_token, const Tensor& state, double temperature,
                       bool train, uint64_t dropout_seed) const;
  std::vector<int> continue_decode(class Rng& rng,
                                   const std::vector<int>& prefix,
                                   const std::vector<double>& state_values,
                                   const std::vector<std::vector<double>>&
                                       encoder_state_values,
                                   int cap, double temperature) const;
  double rollout_mean(const SeqRewardFn& reward_fn,
                      const std::vector<int>& query,
                      const std::vector<int>& truth,
                      const std::vector<int>& prefix_content,
                      const std::vector<double>& state_values,
                      const std::vector<std::vector<double>>&
                          encoder_state_values,
                      const RolloutConfig& cfg, uint64_t seed_base) const;
  void check_query(const std::vector<int>& query) const;

  int vocab_size_;
  int d_embed_;
  int d_hidden_;
  double dropout_rate_;
  uint64_t init_seed_;
  int max_query_len_;
  ParameterSet params_;
  GruCell enc_;
  GruCell dec_;
  Parameter* embed_ = nullptr;
  Parameter* wa_ = nullptr;
  Parameter* ua_ = nullptr;
  Parameter* ba_ = nullptr;
  Parameter* va_ = nullptr;
  Parameter* wi_ = nullptr;
  Parameter* bi_ = nullptr;
  Parameter* wo_ = nullptr;
  Parameter* bo_ = nullptr;
};

}  // namespace egan
