#include "egan/ranker.hpp"

#include <algorithm>
#include <cmath>

#include "egan/errors.hpp"
#include "egan/rng.hpp"
#include "egan/stats.hpp"

namespace egan {

namespace {

constexpr double kProbLo = 1e-7;
constexpr double kProbHi = 1.0 - 1e-7;

double sigmoid_stable(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

MatchingModel::MatchingModel(int vocab_size, int d_embed, int d_hidden,
                             double dropout_rate, uint64_t seed)
    : vocab_size_(vocab_size),
      d_embed_(d_embed),
      d_hidden_(d_hidden),
      dropout_rate_(dropout_rate),
      init_seed_(seed) {
  if (vocab_size < 1 || d_embed < 1 || d_hidden < 1)
    throw ContractError("matching model: dimensions must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ContractError("matching model: dropout rate must be in [0, 1)");
  auto v = static_cast<size_t>(vocab_size);
  auto de = static_cast<size_t>(d_embed);
  auto dh = static_cast<size_t>(d_hidden);
  embed_ = &params_.add("embed", v, de);
  enc_q_ = GruCell(params_, "enc_q", d_embed, d_hidden);
  enc_r_ = GruCell(params_, "enc_r", d_embed, d_hidden);
  bilinear_ = &params_.add("bilinear", dh, dh);
  w1_ = &params_.add("head.w1", 3 * dh, dh);
  b1_ = &params_.add("head.b1", 1, dh);
  w2_ = &params_.add("head.w2", dh, 1);
  b2_ = &params_.add("head.b2", 1, 1);

  Rng rng(mix_seed(seed, 0x9a41));
  init_uniform(*embed_, rng, -0.08, 0.08);
  enc_q_.init(rng, -0.08, 0.08);
  enc_r_.init(rng, -0.08, 0.08);
  init_glorot(*bilinear_, rng);
  init_glorot(*w1_, rng);
  init_zeros(*b1_);
  init_glorot(*w2_, rng);
  init_zeros(*b2_);
}

MatchingModel::Bound MatchingModel::bind(Tape& t) const {
  return Bound{t.param(*embed_), enc_q_.bind(t),   enc_r_.bind(t),
               t.param(*bilinear_), t.param(*w1_), t.param(*b1_),
               t.param(*w2_),       t.param(*b2_)};
}

Tensor MatchingModel::score_bound(Tape& t, const Bound& b,
                                  const std::vector<int>& query,
                                  const std::vector<int>& response,
                                  bool train, uint64_t dropout_seed) const {
  Tensor hq = encode_sequence(t, b.enc_q, b.table, query);
  Tensor hr = encode_sequence(t, b.enc_r, b.table, response);
  Tensor bil = sum_all(mul(matmul(hq, b.bilinear), hr));
  Tensor feats = concat(concat(hq, hr, 1), mul(hq, hr), 1);
  if (train && dropout_rate_ > 0.0)
    feats = dropout_op(feats, dropout_rate_, dropout_seed);
  Tensor hidden = tanh_op(add(matmul(feats, b.w1), b.b1));
  Tensor out = add(matmul(hidden, b.w2), b.b2);
  return add(bil, out);
}

Tensor MatchingModel::score_node(Tape& t, const std::vector<int>& query,
                                 const std::vector<int>& response, bool train,
                                 uint64_t dropout_seed) const {
  Bound b = bind(t);
  return score_bound(t, b, query, response, train, dropout_seed);
}

double MatchingModel::score(const std::vector<int>& query,
                            const std::vector<int>& response) const {
  Tape t;
  return score_node(t, query, response, false, 0).scalar();
}

double MatchingModel::pair_prob(const std::vector<int>& query,
                                const std::vector<int>& first,
                                const std::vector<int>& second) const {
  return sigmoid_stable(score(query, first) - score(query, second));
}

double MatchingModel::reward(const std::vector<int>& query,
                             const std::vector<int>& candidate,
                             const std::vector<int>& reference,
                             RewardForm form) const {
  double p = pair_prob(query, candidate, reference);
  if (form == RewardForm::Advantage) return 2.0 * p - 1.0;
  return std::log(std::clamp(p, kProbLo, kProbHi));
}

double MatchingModel::hinge_pretrain_step(const std::vector<RankExample>& batch,
                                          double margin, Optimizer& opt,
                                          uint64_t step_seed) {
  if (batch.empty())
    throw ContractError("hinge_pretrain_step: empty batch");
  if (margin <= 0.0)
    throw ContractError("hinge_pretrain_step: margin must be positive");
  Tape t;
  Bound b = bind(t);
  Tensor total;
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    Tensor gp = score_bound(t, b, ex.query, ex.positive, true,
                            mix_seed(step_seed, i, 0));
    Tensor gn = score_bound(t, b, ex.query, ex.negative, true,
                            mix_seed(step_seed, i, 1));
    Tensor h = relu_scalar(add_const(sub(gn, gp), margin));
    total = total.defined() ? add(total, h) : h;
  }
  Tensor loss = scale(total, 1.0 / static_cast<double>(batch.size()));
  double value = loss.scalar();
  t.backward(loss);
  opt.step(params_.all());
  return value;
}

double MatchingModel::d_update(const std::vector<RankExample>& positives,
                               const std::vector<RankExample>& adversarials,
                               Optimizer& opt, uint64_t step_seed) {
  if (positives.empty() || adversarials.empty())
    throw ContractError("d_update: both sample sets must be nonempty");
  Tape t;
  Bound b = bind(t);
  Tensor objective;
  size_t slot = 0;
  auto add_term = [&](const Tensor& term) {
    objective = objective.defined() ? add(objective, term) : term;
  };
  for (const auto& ex : positives) {
    Tensor gp = score_bound(t, b, ex.query, ex.positive, true,
                            mix_seed(step_seed, slot, 0));
    Tensor gn = score_bound(t, b, ex.query, ex.negative, true,
                            mix_seed(step_seed, slot, 1));
    ++slot;
    add_term(log_op(clamp_op(sigmoid_op(sub(gp, gn)), kProbLo, kProbHi)));
  }
  for (const auto& ex : adversarials) {
    Tensor gt = score_bound(t, b, ex.query, ex.positive, true,
                            mix_seed(step_seed, slot, 0));
    Tensor gf = score_bound(t, b, ex.query, ex.negative, true,
                            mix_seed(step_seed, slot, 1));
    ++slot;
    // 1 - p(fake beats truth) simplifies to sigma(g_truth - g_fake).
    add_term(log_op(clamp_op(sigmoid_op(sub(gt, gf)), kProbLo, kProbHi)));
  }
  Tensor loss = neg(objective);
  double value = loss.scalar();
  t.backward(loss);
  opt.step(params_.all());
  return value;
}

std::vector<double> MatchingModel::g2_distribution(
    const std::vector<int>& query, const CandidatePool& pool) const {
  if (pool.members.empty())
    throw ContractError("g2_distribution: empty candidate pool");
  std::vector<double> scores;
  scores.reserve(pool.members.size());
  for (const auto& m : pool.members) scores.push_back(score(query, m.response));
  return softmax_stable(scores);
}

std::vector<ResponsePair> MatchingModel::g2_sample(
    const std::vector<int>& query, const std::vector<int>& truth,
    const CandidatePool& pool, int h_draws, uint64_t seed) const {
  if (h_draws < 1)
    throw ContractError("g2_sample: h_draws must be at least 1");
  auto dist = g2_distribution(query, pool);
  Rng rng(mix_seed(seed, 0x52a9));
  std::vector<ResponsePair> out;
  out.reserve(static_cast<size_t>(h_draws));
  for (int h = 0; h < h_draws; ++h) {
    size_t k = rng.categorical(dist);
    out.push_back(
        {truth, pool.members[k].response, pool.members[k].provenance});
  }
  return out;
}

double MatchingModel::pg_update_g2(const PairRewardFn& reward_fn,
                                   const std::vector<G2Example>& batch,
                                   int h_draws, Optimizer& opt,
                                   uint64_t seed) {
  if (batch.empty()) throw ContractError("pg_update_g2: empty batch");
  if (h_draws < 1)
    throw ContractError("pg_update_g2: h_draws must be at least 1");
  Tape t;
  Bound b = bind(t);
  double weight_sum = 0.0;
  size_t weight_count = 0;
  Tensor batch_obj;
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    auto dist = g2_distribution(ex.query, ex.pool);
    Rng rng(mix_seed(seed, 0x6b2c, i));
    Tensor row;
    for (const auto& m : ex.pool.members) {
      Tensor s = score_bound(t, b, ex.query, m.response, false, 0);
      row = row.defined() ? concat(row, s, 1) : s;
    }
    Tensor logp = log_op(clamp_op(softmax_rows(row), 1e-300, 1.0));
    Tensor ex_obj;
    for (int h = 0; h < h_draws; ++h) {
      size_t k = rng.categorical(dist);
      double w = reward_fn(ex.query, ex.pool.members[k].response, ex.truth);
      weight_sum += w;
      ++weight_count;
      Tensor picked =
          scale(slice(logp, 1, k, 1), w / static_cast<double>(h_draws));
      ex_obj = ex_obj.defined() ? add(ex_obj, picked) : picked;
    }
    batch_obj = batch_obj.defined() ? add(batch_obj, ex_obj) : ex_obj;
  }
  Tensor loss =
      neg(scale(batch_obj, 1.0 / static_cast<double>(batch.size())));
  t.backward(loss);
  opt.step(params_.all());
  return weight_sum / static_cast<double>(weight_count);
}

double MatchingModel::pg_update_g2(const MatchingModel& frozen_d,
                                   const std::vector<G2Example>& batch,
                                   int h_draws, Optimizer& opt, uint64_t seed,
                                   RewardForm form) {
  PairRewardFn fn = [&frozen_d, form](const std::vector<int>& query,
                                      const std::vector<int>& candidate,
                                      const std::vector<int>& reference) {
    return frozen_d.reward(query, candidate, reference, form);
  };
  return pg_update_g2(fn, batch, h_draws, opt, seed);
}

std::vector<RankedCandidate> MatchingModel::rank_candidates(
    const std::vector<int>& query,
    const std::vector<std::vector<int>>& candidates) const {
  if (candidates.empty())
    throw ContractError("rank_candidates: empty candidate list");
  std::vector<RankedCandidate> out;
  out.reserve(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i)
    out.push_back({static_cast<int>(i), score(query, candidates[i])});
  std::sort(out.begin(), out.end(),
            [](const RankedCandidate& a, const RankedCandidate& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.index < b.index;
            });
  return out;
}

MatchingModel MatchingModel::clone() const {
  MatchingModel copy(vocab_size_, d_embed_, d_hidden_, dropout_rate_,
                     init_seed_);
  for (const Parameter* p : params_.all())
    copy.params_.at(p->name).value = p->value;
  return copy;
}

}  // namespace egan
