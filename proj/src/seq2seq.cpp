#include "egan/seq2seq.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

#include "egan/corpus.hpp"
#include "egan/rng.hpp"

namespace egan {

namespace {

constexpr double kMaskLogit = -1e9;
constexpr double kProbFloor = 1e-300;

int argmax_first(std::span<const double> v) {
  size_t best = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

// A response under the decode semantics: one terminal EOS, interior tokens
// drawn from the generatable alphabet (content or UNK; never PAD or BOS).
void check_response_shape(const std::vector<int>& resp, const char* where) {
  if (resp.empty())
    throw ContractError(std::string(where) + ": empty response");
  if (resp.back() != Vocab::kEos)
    throw ContractError(std::string(where) +
                        ": response must end with the terminal token");
  for (size_t i = 0; i + 1 < resp.size(); ++i) {
    int tok = resp[i];
    if (tok == Vocab::kEos || tok == Vocab::kPad || tok == Vocab::kBos)
      throw ContractError(std::string(where) +
                          ": reserved token inside response body");
  }
}

}  // namespace

Seq2SeqModel::Seq2SeqModel(int vocab_size, int d_embed, int d_hidden,
                           double dropout_rate, uint64_t seed,
                           int max_query_len)
    : vocab_size_(vocab_size),
      d_embed_(d_embed),
      d_hidden_(d_hidden),
      dropout_rate_(dropout_rate),
      init_seed_(seed),
      max_query_len_(max_query_len) {
  if (vocab_size_ <= Vocab::kReservedCount)
    throw ContractError(
        "Seq2SeqModel: vocab size must exceed the reserved token count");
  if (d_embed_ < 1 || d_hidden_ < 1)
    throw ContractError("Seq2SeqModel: embedding and hidden dims must be >= 1");
  if (dropout_rate_ < 0.0 || dropout_rate_ >= 1.0)
    throw ContractError("Seq2SeqModel: dropout rate must lie in [0, 1)");
  if (max_query_len_ < 1)
    throw ContractError("Seq2SeqModel: max query length must be >= 1");

  size_t v = static_cast<size_t>(vocab_size_);
  size_t de = static_cast<size_t>(d_embed_);
  size_t dh = static_cast<size_t>(d_hidden_);
  embed_ = &params_.add("embed", v, de);
  enc_ = GruCell(params_, "enc", d_embed_, d_hidden_);
  dec_ = GruCell(params_, "dec", d_embed_ + d_hidden_, d_hidden_);
  wa_ = &params_.add("att.w", dh, dh);
  ua_ = &params_.add("att.u", dh, dh);
  ba_ = &params_.add("att.b", 1, dh);
  va_ = &params_.add("att.v", 1, dh);
  wi_ = &params_.add("init.w", dh, dh);
  bi_ = &params_.add("init.b", 1, dh);
  wo_ = &params_.add("out.w", 2 * dh, v);
  bo_ = &params_.add("out.b", 1, v);

  Rng rng(mix_seed(seed, 0x5e95));
  init_uniform(*embed_, rng, -0.08, 0.08);
  enc_.init(rng, -0.08, 0.08);
  dec_.init(rng, -0.08, 0.08);
  init_glorot(*wa_, rng);
  init_glorot(*ua_, rng);
  init_zeros(*ba_);
  init_glorot(*va_, rng);
  init_glorot(*wi_, rng);
  init_zeros(*bi_);
  init_glorot(*wo_, rng);
  init_zeros(*bo_);
}

void Seq2SeqModel::check_query(const std::vector<int>& query) const {
  if (query.empty()) throw ContractError("seq2seq: empty query");
  if (static_cast<int>(query.size()) > max_query_len_)
    throw ContractError("seq2seq: query length " +
                        std::to_string(query.size()) + " exceeds the cap of " +
                        std::to_string(max_query_len_));
}

Seq2SeqModel::Bound Seq2SeqModel::bind(Tape& t) const {
  std::vector<double> mask(static_cast<size_t>(vocab_size_), 0.0);
  mask[static_cast<size_t>(Vocab::kPad)] = kMaskLogit;
  mask[static_cast<size_t>(Vocab::kBos)] = kMaskLogit;
  return Bound{t.param(*embed_), enc_.bind(t),  dec_.bind(t),  t.param(*wa_),
               t.param(*ua_),    t.param(*ba_), t.param(*va_), t.param(*wi_),
               t.param(*bi_),    t.param(*wo_), t.param(*bo_),
               t.constant(1, mask.size(), mask)};
}

Seq2SeqModel::EncCtx Seq2SeqModel::encode_bound(
    Tape& t, const Bound& b, const std::vector<int>& query) const {
  check_query(query);
  EncCtx ctx;
  ctx.states = encode_sequence_all(t, b.enc, b.table, query);
  ctx.keys.reserve(ctx.states.size());
  for (const Tensor& h : ctx.states) ctx.keys.push_back(matmul(h, b.ua));
  ctx.stacked = ctx.states[0];
  for (size_t i = 1; i < ctx.states.size(); ++i)
    ctx.stacked = concat(ctx.stacked, ctx.states[i], 0);
  return ctx;
}

Seq2SeqModel::EncCtx Seq2SeqModel::wrap_states(
    Tape& t, const Bound& b,
    const std::vector<std::vector<double>>& states) const {
  if (states.empty()) throw ContractError("seq2seq: empty encoder state list");
  EncCtx ctx;
  ctx.states.reserve(states.size());
  for (const auto& row : states) {
    if (static_cast<int>(row.size()) != d_hidden_)
      throw DimensionError("seq2seq: encoder state width " +
                           std::to_string(row.size()) + " != hidden dim " +
                           std::to_string(d_hidden_));
    ctx.states.push_back(t.constant(1, row.size(), row));
  }
  ctx.keys.reserve(ctx.states.size());
  for (const Tensor& h : ctx.states) ctx.keys.push_back(matmul(h, b.ua));
  ctx.stacked = ctx.states[0];
  for (size_t i = 1; i < ctx.states.size(); ++i)
    ctx.stacked = concat(ctx.stacked, ctx.states[i], 0);
  return ctx;
}

Tensor Seq2SeqModel::initial_state_bound(const Bound& b,
                                         const EncCtx& ctx) const {
  return tanh_op(add(matmul(ctx.states.back(), b.wi), b.bi));
}

Seq2SeqModel::StepNodes Seq2SeqModel::step_bound(Tape& t, const Bound& b,
                                                 const EncCtx& ctx,
                                                 int prev_token,
                                                 const Tensor& state,
                                                 double temperature, bool train,
                                                 uint64_t dropout_seed) const {
  if (prev_token < 0 || prev_token >= vocab_size_)
    throw ContractError("seq2seq: previous token id out of range");
  if (!(temperature > 0.0))
    throw ContractError("seq2seq: temperature must be positive");
  std::array<int, 1> prev{prev_token};
  Tensor emb = embed_rows(b.table, prev);
  Tensor sa = matmul(state, b.wa);
  Tensor scores;
  for (size_t i = 0; i < ctx.states.size(); ++i) {
    Tensor e =
        sum_all(mul(tanh_op(add(add(sa, ctx.keys[i]), b.ba)), b.va));
    scores = i == 0 ? e : concat(scores, e, 1);
  }
  Tensor attn = softmax_rows(scores);
  Tensor context = matmul(attn, ctx.stacked);
  Tensor x = concat(emb, context, 1);
  Tensor s_t = b.dec.step(t, x, state);
  Tensor feat = concat(s_t, context, 1);
  if (train && dropout_rate_ > 0.0)
    feat = dropout_op(feat, dropout_rate_, dropout_seed);
  Tensor logits = add(add(matmul(feat, b.wo), b.bo), b.mask);
  if (temperature != 1.0) logits = scale(logits, 1.0 / temperature);
  return StepNodes{softmax_rows(logits), s_t, context, attn};
}

std::vector<std::vector<double>> Seq2SeqModel::encode_query(
    const std::vector<int>& query) const {
  Tape t;
  Bound b = bind(t);
  EncCtx ctx = encode_bound(t, b, query);
  std::vector<std::vector<double>> out;
  out.reserve(ctx.states.size());
  for (const Tensor& h : ctx.states) {
    auto v = h.values();
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

std::vector<double> Seq2SeqModel::initial_state(
    const std::vector<std::vector<double>>& encoder_states) const {
  Tape t;
  Bound b = bind(t);
  EncCtx ctx = wrap_states(t, b, encoder_states);
  Tensor s0 = initial_state_bound(b, ctx);
  auto v = s0.values();
  return std::vector<double>(v.begin(), v.end());
}

DecodeStep Seq2SeqModel::decode_step(
    int prev_token, const std::vector<double>& state,
    const std::vector<std::vector<double>>& encoder_states) const {
  if (static_cast<int>(state.size()) != d_hidden_)
    throw DimensionError("decode_step: decoder state width " +
                         std::to_string(state.size()) + " != hidden dim " +
                         std::to_string(d_hidden_));
  Tape t;
  Bound b = bind(t);
  EncCtx ctx = wrap_states(t, b, encoder_states);
  Tensor s = t.constant(1, state.size(), state);
  StepNodes n = step_bound(t, b, ctx, prev_token, s, 1.0, false, 0);
  DecodeStep out;
  auto copy = [](const Tensor& x) {
    auto v = x.values();
    return std::vector<double>(v.begin(), v.end());
  };
  out.distribution = copy(n.probs);
  out.state = copy(n.state);
  out.context = copy(n.context);
  out.attention = copy(n.attention);
  return out;
}

double Seq2SeqModel::ce_loss(const std::vector<SeqPair>& batch,
                             uint64_t step_seed, bool accumulate_grads) {
  if (batch.empty()) throw ContractError("ce_loss: empty batch");
  Tape t;
  Bound b = bind(t);
  Tensor total;
  size_t n_tokens = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const SeqPair& ex = batch[i];
    check_response_shape(ex.response, "ce_loss");
    EncCtx ctx = encode_bound(t, b, ex.query);
    Tensor s = initial_state_bound(b, ctx);
    int prev = Vocab::kBos;
    for (size_t k = 0; k < ex.response.size(); ++k) {
      StepNodes n = step_bound(t, b, ctx, prev, s, 1.0, true,
                               mix_seed(step_seed, i, k));
      int target = ex.response[k];
      if (target < 0 || target >= vocab_size_)
        throw ContractError("ce_loss: token id out of range");
      Tensor p = slice(n.probs, 1, static_cast<size_t>(target), 1);
      Tensor nll = neg(log_op(clamp_op(p, kProbFloor, 1.0)));
      total = total.defined() ? add(total, nll) : nll;
      ++n_tokens;
      prev = target;
      s = n.state;
    }
  }
  Tensor loss = scale(total, 1.0 / static_cast<double>(n_tokens));
  double value = loss.scalar();
  if (accumulate_grads) t.backward(loss);
  return value;
}

double Seq2SeqModel::pretrain_ce_step(const std::vector<SeqPair>& batch,
                                      Optimizer& opt, uint64_t step_seed) {
  double value = ce_loss(batch, step_seed, true);
  opt.step(params_.all());
  return value;
}

std::vector<int> Seq2SeqModel::decode_sequence(const std::vector<int>& query,
                                               DecodeMode mode,
                                               const DecodeConfig& config)
    const {
  if (config.max_len < 1)
    throw ContractError("decode_sequence: max_len must be >= 1");
  if (!(config.temperature > 0.0))
    throw ContractError("decode_sequence: temperature must be positive");
  Tape t;
  Bound b = bind(t);
  EncCtx ctx = encode_bound(t, b, query);
  Tensor s = initial_state_bound(b, ctx);
  Rng rng(mix_seed(config.seed, 0xdec0de));
  double temp = mode == DecodeMode::Sample ? config.temperature : 1.0;
  std::vector<int> out;
  int prev = Vocab::kBos;
  while (static_cast<int>(out.size()) < config.max_len - 1) {
    StepNodes n = step_bound(t, b, ctx, prev, s, temp, false, 0);
    int tok = mode == DecodeMode::Greedy
                  ? argmax_first(n.probs.values())
                  : static_cast<int>(rng.categorical(n.probs.values()));
    out.push_back(tok);
    if (tok == Vocab::kEos) return out;
    prev = tok;
    s = n.state;
  }
  out.push_back(Vocab::kEos);
  return out;
}

double Seq2SeqModel::sequence_log_prob(const std::vector<int>& query,
                                       const std::vector<int>& response,
                                       int cap) const {
  if (cap < 1) throw ContractError("sequence_log_prob: cap must be >= 1");
  check_response_shape(response, "sequence_log_prob");
  if (static_cast<int>(response.size()) > cap)
    throw ContractError("sequence_log_prob: response exceeds the length cap");
  // An EOS forced by the cap was never a decision and carries no factor.
  size_t decisions = static_cast<int>(response.size()) == cap
                         ? response.size() - 1
                         : response.size();
  Tape t;
  Bound b = bind(t);
  EncCtx ctx = encode_bound(t, b, query);
  Tensor s = initial_state_bound(b, ctx);
  double logp = 0.0;
  int prev = Vocab::kBos;
  for (size_t k = 0; k < decisions; ++k) {
    StepNodes n = step_bound(t, b, ctx, prev, s, 1.0, false, 0);
    int tok = response[k];
    if (tok < 0 || tok >= vocab_size_)
      throw ContractError("sequence_log_prob: token id out of range");
    logp += std::log(std::max(n.probs.value(static_cast<size_t>(tok)),
                              kProbFloor));
    prev = tok;
    s = n.state;
  }
  return logp;
}

std::vector<int> Seq2SeqModel::continue_decode(
    Rng& rng, const std::vector<int>& prefix,
    const std::vector<double>& state_values,
    const std::vector<std::vector<double>>& encoder_state_values, int cap,
    double temperature) const {
  Tape t;
  Bound b = bind(t);
  EncCtx ctx = wrap_states(t, b, encoder_state_values);
  Tensor s = t.constant(1, state_values.size(), state_values);
  std::vector<int> out = prefix;
  int prev = prefix.empty() ? Vocab::kBos : prefix.back();
  while (static_cast<int>(out.size()) < cap - 1) {
    StepNodes n = step_bound(t, b, ctx, prev, s, temperature, false, 0);
    int tok = static_cast<int>(rng.categorical(n.probs.values()));
    out.push_back(tok);
    if (tok == Vocab::kEos) return out;
    prev = tok;
    s = n.state;
  }
  out.push_back(Vocab::kEos);
  return out;
}

double Seq2SeqModel::rollout_mean(
    const SeqRewardFn& reward_fn, const std::vector<int>& query,
    const std::vector<int>& truth, const std::vector<int>& prefix_content,
    const std::vector<double>& state_values,
    const std::vector<std::vector<double>>& encoder_state_values,
    const RolloutConfig& cfg, uint64_t seed_base) const {
  std::vector<double> rewards(static_cast<size_t>(cfg.m1), 0.0);
  auto run_range = [&](int lo, int hi) {
    for (int m = lo; m < hi; ++m) {
      Rng rng(mix_seed(seed_base, 0x0a11, static_cast<uint64_t>(m)));
      std::vector<int> completed =
          continue_decode(rng, prefix_content, state_values,
                          encoder_state_values, cfg.max_len, cfg.temperature);
      rewards[static_cast<size_t>(m)] = reward_fn(query, completed, truth);
    }
  };
  unsigned workers = std::min<unsigned>(thread_cap(),
                                        static_cast<unsigned>(cfg.m1));
  if (workers > 1 && cfg.m1 >= 4) {
    std::vector<std::thread> pool;
    int per = (cfg.m1 + static_cast<int>(workers) - 1) /
              static_cast<int>(workers);
    for (unsigned w = 0; w < workers; ++w) {
      int lo = static_cast<int>(w) * per;
      int hi = std::min(cfg.m1, lo + per);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  } else {
    run_range(0, cfg.m1);
  }
  // Fixed-order reduction keeps the result identical for any thread count.
  double sum = 0.0;
  for (double r : rewards) sum += r;
  return sum / static_cast<double>(cfg.m1);
}

double Seq2SeqModel::action_value(const SeqRewardFn& reward_fn,
                                  const std::vector<int>& query,
                                  const std::vector<int>& truth,
                                  const std::vector<int>& prefix,
                                  const RolloutConfig& cfg) const {
  if (cfg.m1 < 1) throw ContractError("action_value: m1 must be >= 1");
  if (cfg.max_len < 1) throw ContractError("action_value: max_len must be >= 1");
  if (prefix.empty()) throw ContractError("action_value: empty decision prefix");
  if (static_cast<int>(prefix.size()) > cfg.max_len)
    throw ContractError("action_value: prefix exceeds the length cap");
  bool ends_eos = prefix.back() == Vocab::kEos;
  for (size_t i = 0; i + (ends_eos ? 1 : 0) < prefix.size(); ++i) {
    int tok = prefix[i];
    if (tok == Vocab::kEos || tok == Vocab::kPad || tok == Vocab::kBos)
      throw ContractError("action_value: reserved token inside the prefix");
  }
  int content = static_cast<int>(prefix.size()) - (ends_eos ? 1 : 0);
  if (content > cfg.max_len - 1)
    throw ContractError("action_value: prefix content exceeds the length cap");

  if (ends_eos) return reward_fn(query, prefix, truth);
  if (content == cfg.max_len - 1) {
    std::vector<int> completed = prefix;
    completed.push_back(Vocab::kEos);
    return reward_fn(query, completed, truth);
  }

  // Intermediate decision: average rewards over m1 seeded rollouts started
  // from the decoder state reached after consuming the prefix.
  Tape t;
  Bound b = bind(t);
  EncCtx ctx = encode_bound(t, b, query);
  Tensor s = initial_state_bound(b, ctx);
  int prev = Vocab::kBos;
  for (int tok : prefix) {
    StepNodes n = step_bound(t, b, ctx, prev, s, 1.0, false, 0);
    s = n.state;
    prev = tok;
  }
  auto sv = s.values();
  std::vector<double> state_values(sv.begin(), sv.end());
  std::vector<std::vector<double>> enc_values;
  enc_values.reserve(ctx.states.size());
  for (const Tensor& h : ctx.states) {
    auto v = h.values();
    enc_values.emplace_back(v.begin(), v.end());
  }
  return rollout_mean(reward_fn, query, truth, prefix, state_values,
                      enc_values, cfg, cfg.seed);
}

double Seq2SeqModel::pg_update_g1(const SeqRewardFn& reward_fn,
                                  const std::vector<SeqPair>& batch,
                                  const RolloutConfig& cfg, Optimizer& opt) {
  if (batch.empty()) throw ContractError("pg_update_g1: empty batch");
  if (cfg.m1 < 1) throw ContractError("pg_update_g1: m1 must be >= 1");
  if (cfg.max_len < 1)
    throw ContractError("pg_update_g1: max_len must be >= 1");
  Tape t;
  Bound b = bind(t);
  Tensor total;
  double terminal_sum = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const SeqPair& ex = batch[i];
    EncCtx ctx = encode_bound(t, b, ex.query);
    Tensor s = initial_state_bound(b, ctx);
    std::vector<std::vector<double>> enc_values;
    enc_values.reserve(ctx.states.size());
    for (const Tensor& h : ctx.states) {
      auto v = h.values();
      enc_values.emplace_back(v.begin(), v.end());
    }

    // Sample one trajectory while recording each decision's log-probability
    // on the gradient tape; the sampling distribution and the differentiated
    // one coincide bit for bit.
    Rng srng(mix_seed(cfg.seed, 0xba5e, i));
    std::vector<int> decisions;
    std::vector<Tensor> logps;
    std::vector<std::vector<double>> states_after;
    bool sampled_eos = false;
    int prev = Vocab::kBos;
    while (static_cast<int>(decisions.size()) < cfg.max_len - 1) {
      StepNodes n = step_bound(t, b, ctx, prev, s, 1.0, false, 0);
      int tok = static_cast<int>(srng.categorical(n.probs.values()));
      Tensor lp = log_op(clamp_op(slice(n.probs, 1, static_cast<size_t>(tok), 1),
                                  kProbFloor, 1.0));
      decisions.push_back(tok);
      logps.push_back(lp);
      auto nv = n.state.values();
      states_after.emplace_back(nv.begin(), nv.end());
      s = n.state;
      if (tok == Vocab::kEos) {
        sampled_eos = true;
        break;
      }
      prev = tok;
    }

    std::vector<int> full = decisions;
    if (!sampled_eos) full.push_back(Vocab::kEos);
    double terminal_r = reward_fn(ex.query, full, ex.response);
    terminal_sum += terminal_r;

    Tensor item;
    for (size_t k = 0; k < decisions.size(); ++k) {
      double q;
      if (k + 1 == decisions.size()) {
        q = terminal_r;
      } else {
        std::vector<int> prefix(decisions.begin(),
                                decisions.begin() + static_cast<long>(k) + 1);
        q = rollout_mean(reward_fn, ex.query, ex.response, prefix,
                         states_after[k], enc_values, cfg,
                         mix_seed(cfg.seed, 0x4011, i, k));
      }
      Tensor term = scale(logps[k], q);
      item = item.defined() ? add(item, term) : term;
    }
    if (item.defined()) total = total.defined() ? add(total, item) : item;
  }

  if (total.defined()) {
    Tensor loss = neg(scale(total, 1.0 / static_cast<double>(batch.size())));
    t.backward(loss);
  }
  opt.step(params_.all());
  return terminal_sum / static_cast<double>(batch.size());
}

}  // namespace egan
