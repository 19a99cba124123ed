#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "egan/candidates.hpp"
#include "egan/gru.hpp"
#include "egan/tensor.hpp"

namespace egan {

// log D is the textbook policy-gradient weight; the advantage form
// 2*D - 1 trades it for bounded, zero-centered rewards.
enum class RewardForm { Advantage, LogProb };

// One pairwise example: the model should score `positive` above `negative`
// for `query`.
struct RankExample {
  std::vector<int> query;
  std::vector<int> positive;
  std::vector<int> negative;
};

// One (query, ground truth, candidate pool) context for a ranker policy
// step.
struct G2Example {
  std::vector<int> query;
  std::vector<int> truth;
  CandidatePool pool;
};

struct RankedCandidate {
  int index = -1;  // position in the input candidate list
  double score = 0.0;
};

// Reward of a candidate response judged against a reference response for
// the same query.
using PairRewardFn = std::function<double(const std::vector<int>& query,
                                          const std::vector<int>& candidate,
                                          const std::vector<int>& reference)>;

// Dual-encoder matching scorer g(q, r): shared embedding table, one
// recurrent encoder per side, bilinear interaction plus a two-layer
// perceptron head over [q; r; q*r]. Plays both adversarial ranker roles:
// the discriminator and the sampling generator over candidate pools.
class MatchingModel {
 public:
  MatchingModel(int vocab_size, int d_embed, int d_hidden,
                double dropout_rate, uint64_t seed);

  // Layer structs point into params_, so copying is replaced by clone().
  MatchingModel(const MatchingModel&) = delete;
  MatchingModel& operator=(const MatchingModel&) = delete;
  MatchingModel(MatchingModel&&) = default;
  MatchingModel& operator=(MatchingModel&&) = default;

  // Relevance score in evaluation mode; deterministic and pure.
  double score(const std::vector<int>& query,
               const std::vector<int>& response) const;

  // sigma(g(q, first) - g(q, second)): probability that `first` belongs
  // above `second`. pair_prob(q,a,b) + pair_prob(q,b,a) == 1.
  double pair_prob(const std::vector<int>& query,
                   const std::vector<int>& first,
                   const std::vector<int>& second) const;

  // Advantage form: 2 * pair_prob(q, candidate, reference) - 1, in [-1, 1],
  // zero when the scores tie. LogProb form: log of the clamped pair
  // probability, in [ln 1e-7, 0).
  double reward(const std::vector<int>& query,
                const std::vector<int>& candidate,
                const std::vector<int>& reference,
                RewardForm form = RewardForm::Advantage) const;

  // Mean over the batch of max(0, margin + g(q,neg) - g(q,pos)), returned
  // before the single optimizer step. Dropout (when configured) is active,
  // with masks derived from step_seed.
  double hinge_pretrain_step(const std::vector<RankExample>& batch,
                             double margin, Optimizer& opt,
                             uint64_t step_seed);

  // Discriminator step: ascends
  //   sum log p(pos > neg)            over `positives`
  // + sum log(1 - p(neg > pos))       over `adversarials`
  // so genuine responses rise and generated negatives sink. For an
  // adversarial pair the probability under test is the generator's claim
  // that its sample (the pair's negative) outranks the truth. Probabilities
  // are clamped to [1e-7, 1 - 1e-7] before the log. Returns the negated
  // objective; applies one optimizer step.
  double d_update(const std::vector<RankExample>& positives,
                  const std::vector<RankExample>& adversarials,
                  Optimizer& opt, uint64_t step_seed);

  // Softmax over the pool members' evaluation-mode scores; sums to 1.
  std::vector<double> g2_distribution(const std::vector<int>& query,
                                      const CandidatePool& pool) const;

  // h_draws categorical draws with replacement from g2_distribution. Each
  // returned pair holds `truth` as positive and the drawn member as
  // negative, inheriting the member's provenance.
  std::vector<ResponsePair> g2_sample(const std::vector<int>& query,
                                      const std::vector<int>& truth,
                                      const CandidatePool& pool, int h_draws,
                                      uint64_t seed) const;

  // REINFORCE ascent on the pool softmax: per example, h_draws samples
  // weighted by reward_fn(query, member, truth), averaged within the
  // example and across the batch. Returns the mean weight before the
  // update.
  double pg_update_g2(const PairRewardFn& reward_fn,
                      const std::vector<G2Example>& batch, int h_draws,
                      Optimizer& opt, uint64_t seed);
  // Same, with rewards taken from a frozen discriminator.
  double pg_update_g2(const MatchingModel& frozen_d,
                      const std::vector<G2Example>& batch, int h_draws,
                      Optimizer& opt, uint64_t seed,
                      RewardForm form = RewardForm::Advantage);

  // Scores every candidate in evaluation mode; sorted by descending score,
  // ties by ascending input index. Pure.
  std::vector<RankedCandidate> rank_candidates(
      const std::vector<int>& query,
      const std::vector<std::vector<int>>& candidates) const;

  // Independent model with identical parameter values and fresh gradients.
  MatchingModel clone() const;

  // Scalar score node on an externally managed tape (gradient checking and
  // composite objectives). Training mode applies dropout seeded by
  // dropout_seed.
  Tensor score_node(Tape& t, const std::vector<int>& query,
                    const std::vector<int>& response, bool train,
                    uint64_t dropout_seed) const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  int vocab_size() const { return vocab_size_; }
  int embed_dim() const { return d_embed_; }
  int hidden_dim() const { return d_hidden_; }
  double dropout_rate() const { return dropout_rate_; }

 private:
  struct Bound {
    Tensor table;
    BoundGru enc_q;
    BoundGru enc_r;
    Tensor bilinear, w1, b1, w2, b2;
  };
  Bound bind(Tape& t) const;
  Tensor score_bound(Tape& t, const Bound& b, const std::vector<int>& query,
                     const std::vector<int>& response, bool train,
                     uint64_t dropout_seed) const;

  int vocab_size_;
  int d_embed_;
  int d_hidden_;
  double dropout_rate_;
  uint64_t init_seed_;
  ParameterSet params_;
  GruCell enc_q_;
  GruCell enc_r_;
  Parameter* embed_ = nullptr;
  Parameter* bilinear_ = nullptr;
  Parameter* w1_ = nullptr;
  Parameter* b1_ = nullptr;
  Parameter* w2_ = nullptr;
  Parameter* b2_ = nullptr;
};

}  // namespace egan
