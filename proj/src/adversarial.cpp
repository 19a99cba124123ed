#include "egan/adversarial.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "egan/checkpoint.hpp"
#include "egan/errors.hpp"
#include "egan/rng.hpp"
#include "egan/serialize.hpp"

namespace egan {

namespace {

// Seed domain tags; every stream a run consumes is keyed off cfg.seed with
// one of these so phases stay independent and resumable.
constexpr uint64_t kSeedG1Init = 0x0901;
constexpr uint64_t kSeedRankInit = 0x0902;
constexpr uint64_t kSeedPoolShuffle = 0x9001;
constexpr uint64_t kSeedPoolDecode = 0x9003;
constexpr uint64_t kSeedNegRandom = 0x12a7;
constexpr uint64_t kSeedNegDecode = 0x12a8;
constexpr uint64_t kSeedPreGenOrder = 0x9e11;
constexpr uint64_t kSeedPreGenStep = 0x9e12;
constexpr uint64_t kSeedPreRankOrder = 0x9e21;
constexpr uint64_t kSeedPreRankStep = 0x9e22;
constexpr uint64_t kSeedG1Batch = 0x6101;
constexpr uint64_t kSeedG1Rollout = 0x6102;
constexpr uint64_t kSeedG2Batch = 0x6201;
constexpr uint64_t kSeedG2Pool = 0x6202;
constexpr uint64_t kSeedG2Update = 0x6203;
constexpr uint64_t kSeedDBatch = 0x6501;
constexpr uint64_t kSeedDG1Draw = 0x6502;
constexpr uint64_t kSeedDDropout = 0x6503;
constexpr uint64_t kSeedDPool = 0x6504;
constexpr uint64_t kSeedDG2Draw = 0x6505;
constexpr uint64_t kSeedServeDecode = 0x9e4e;

std::map<int, const QRPair*> rows_by_id(const std::vector<QRPair>& rows) {
  std::map<int, const QRPair*> out;
  for (const QRPair& p : rows) out[p.pair_id] = &p;
  return out;
}

// Row indices for one training batch: a seeded shuffle truncated to
// batch_size, or every row when the set is smaller.
std::vector<size_t> draw_rows(size_t n, size_t batch_size, Rng& rng) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  if (n > batch_size) {
    rng.shuffle(idx);
    idx.resize(batch_size);
  }
  return idx;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) /
         static_cast<double>(xs.size());
}

Optimizer make_adam(double lr) {
  OptimizerConfig oc;
  oc.kind = OptKind::Adam;
  oc.lr = lr;
  oc.clip_norm = 5.0;
  return Optimizer(oc);
}

std::vector<int> sample_decode(const Seq2SeqModel& g1,
                               const std::vector<int>& query, int cap,
                               uint64_t seed) {
  DecodeConfig dc;
  dc.max_len = cap;
  dc.temperature = 1.0;
  dc.seed = seed;
  return g1.decode_sequence(query, DecodeMode::Sample, dc);
}

void audit_pool(PoolAudit& audit, const CandidatePool& pool,
                const TrainConfig& cfg, const std::vector<int>& truth) {
  audit.pools_built += 1;
  for (const Candidate& c : pool.members) {
    switch (c.provenance) {
      case Provenance::Random:
        audit.random_members += 1;
        break;
      case Provenance::Retrieved:
        audit.retrieved_members += 1;
        break;
      case Provenance::Synthetic:
        audit.synthetic_members += 1;
        break;
      default:
        break;
    }
    if (c.response == truth) audit.truth_collisions += 1;
  }
  size_t lo = static_cast<size_t>(cfg.m_r);
  size_t hi = static_cast<size_t>(cfg.m_r + cfg.m_p + cfg.m_1);
  if (pool.members.size() < lo || pool.members.size() > hi)
    audit.bound_violations += 1;
}

}  // namespace

CandidatePool build_candidate_pool(const TrainConfig& cfg,
                                   const std::vector<QRPair>& retrieval_pool,
                                   const InvertedIndex& by_response,
                                   const Seq2SeqModel* g1,
                                   const QRPair& context, uint64_t seed,
                                   PoolAudit* audit) {
  if (cfg.m_1 > 0 && g1 == nullptr)
    throw ContractError("candidate pool needs a generator for its synthetic leg");

  // Distinct response sequences in row order, ground truth excluded.
  std::vector<const std::vector<int>*> eligible;
  std::set<std::vector<int>> seen;
  for (const QRPair& p : retrieval_pool) {
    if (p.response == context.response) continue;
    if (seen.insert(p.response).second) eligible.push_back(&p.response);
  }
  if (eligible.size() < static_cast<size_t>(cfg.m_r))
    throw ContractError("retrieval pool has " + std::to_string(eligible.size()) +
                        " distinct responses but the random leg needs " +
                        std::to_string(cfg.m_r));

  CandidatePool pool;
  pool.context_pair_id = context.pair_id;
  std::map<std::vector<int>, size_t> member_at;

  if (cfg.m_r > 0) {
    std::vector<size_t> order(eligible.size());
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(mix_seed(seed, kSeedPoolShuffle));
    rng.shuffle(order);
    for (int i = 0; i < cfg.m_r; ++i) {
      const std::vector<int>& resp = *eligible[order[static_cast<size_t>(i)]];
      member_at[resp] = pool.members.size();
      pool.members.push_back({resp, Provenance::Random});
    }
  }

  if (cfg.m_p > 0) {
    std::map<int, const QRPair*> by_id = rows_by_id(retrieval_pool);
    RetrievalResult rr =
        by_response.retrieve_top_k(context.response, cfg.m_p, context.pair_id);
    for (const RetrievalHit& hit : rr.hits) {
      auto row = by_id.find(hit.pair_id);
      if (row == by_id.end())
        throw ContractError("by-response index does not match the retrieval pool");
      const std::vector<int>& resp = row->second->response;
      if (resp == context.response) continue;
      auto it = member_at.find(resp);
      if (it != member_at.end()) {
        pool.members[it->second].provenance = Provenance::Retrieved;
      } else {
        member_at[resp] = pool.members.size();
        pool.members.push_back({resp, Provenance::Retrieved});
      }
    }
  }

  for (int j = 0; j < cfg.m_1; ++j) {
    std::vector<int> resp =
        sample_decode(*g1, context.query, static_cast<int>(cfg.max_response_len),
                      mix_seed(seed, kSeedPoolDecode, static_cast<uint64_t>(j)));
    if (resp == context.response) continue;
    auto it = member_at.find(resp);
    if (it != member_at.end()) {
      if (pool.members[it->second].provenance == Provenance::Random)
        pool.members[it->second].provenance = Provenance::Synthetic;
    } else {
      member_at[resp] = pool.members.size();
      pool.members.push_back({resp, Provenance::Synthetic});
    }
  }

  if (audit) audit_pool(*audit, pool, cfg, context.response);
  return pool;
}

TrainState make_train_state(const TrainConfig& cfg,
                            const CorpusBundle& corpus) {
  validate_train_config(cfg);
  if (corpus.vocab.size() <= static_cast<size_t>(Vocab::kReservedCount))
    throw ContractError("corpus vocabulary has no content tokens");
  if (corpus.retrieval_pool.empty())
    throw ContractError("corpus retrieval pool is empty");

  int vocab = static_cast<int>(corpus.vocab.size());
  size_t query_cap = std::max(static_cast<size_t>(cfg.max_query_len),
                              corpus.caps.max_query_len);
  Seq2SeqModel g1(vocab, cfg.d_embed, cfg.d_hidden, cfg.dropout,
                  mix_seed(cfg.seed, kSeedG1Init), query_cap);
  MatchingModel ranker(vocab, cfg.d_embed, cfg.d_hidden, cfg.dropout,
                       mix_seed(cfg.seed, kSeedRankInit));
  TrainState st{cfg,
                std::move(g1),
                ranker.clone(),
                std::move(ranker),
                make_adam(cfg.lr_adv_gen),
                make_adam(cfg.lr_adv_rank),
                make_adam(cfg.lr_adv_rank),
                InvertedIndex::build(corpus.retrieval_pool,
                                     IndexMode::ByResponse),
                {},
                0,
                {},
                {},
                {},
                {}};
  return st;
}

double pretrain_generator(Seq2SeqModel& g1, const CorpusBundle& corpus,
                          const TrainConfig& cfg, Optimizer& opt, int passes) {
  const std::vector<QRPair>& data = corpus.generation_set;
  if (data.empty()) throw ContractError("generation set is empty");
  double last = 0.0;
  for (int pass = 0; pass < passes; ++pass) {
    Rng rng(mix_seed(cfg.seed, kSeedPreGenOrder, static_cast<uint64_t>(pass)));
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    rng.shuffle(order);
    std::vector<double> losses;
    for (size_t at = 0, b = 0; at < order.size(); ++b) {
      std::vector<SeqPair> batch;
      for (size_t i = 0; i < static_cast<size_t>(cfg.batch_size) &&
                         at < order.size();
           ++i, ++at)
        batch.push_back({data[order[at]].query, data[order[at]].response});
      losses.push_back(g1.pretrain_ce_step(
          batch, opt, mix_seed(cfg.seed, kSeedPreGenStep, pass, b)));
    }
    last = mean_of(losses);
  }
  return last;
}

std::vector<StoredNegative> build_pretrain_negatives(
    const TrainConfig& cfg, const CorpusBundle& corpus,
    const InvertedIndex& by_response, const Seq2SeqModel& g1) {
  const std::vector<QRPair>& data = corpus.ranking_set;
  if (data.empty()) throw ContractError("ranking set is empty");

  std::vector<const std::vector<int>*> distinct;
  {
    std::set<std::vector<int>> seen;
    for (const QRPair& p : corpus.retrieval_pool)
      if (seen.insert(p.response).second) distinct.push_back(&p.response);
  }
  // Worst case a pair needs 5 fresh sequences beyond its own truth.
  if (distinct.size() < 8)
    throw ContractError("retrieval pool too small for negative sampling");
  std::map<int, const QRPair*> by_id = rows_by_id(corpus.retrieval_pool);

  std::vector<StoredNegative> out;
  for (const QRPair& pair : data) {
    std::set<std::vector<int>> chosen;
    chosen.insert(pair.response);
    Rng rng(mix_seed(cfg.seed, kSeedNegRandom,
                     static_cast<uint64_t>(pair.pair_id)));
    auto draw_random = [&]() {
      for (;;) {
        const std::vector<int>& r = *distinct[rng.uniform_index(distinct.size())];
        if (chosen.insert(r).second) return r;
      }
    };

    // 2 random draws.
    for (int i = 0; i < 2; ++i)
      out.push_back({pair.pair_id, Provenance::Random, draw_random()});

    // 2 fetched by probing the by-response index with the ground truth.
    int fetched = 0;
    RetrievalResult rr =
        by_response.retrieve_top_k(pair.response, 6, pair.pair_id);
    for (const RetrievalHit& hit : rr.hits) {
      if (fetched == 2) break;
      auto row = by_id.find(hit.pair_id);
      if (row == by_id.end()) continue;
      const std::vector<int>& resp = row->second->response;
      if (!chosen.insert(resp).second) continue;
      out.push_back({pair.pair_id, Provenance::Retrieved, resp});
      ++fetched;
    }
    for (; fetched < 2; ++fetched)
      out.push_back({pair.pair_id, Provenance::Random, draw_random()});

    // 1 generator sample; outside the generator's modes it degrades to a
    // third random draw.
    bool placed = false;
    if (cfg.mode != TrainMode::IrGan) {
      for (uint64_t attempt = 0; attempt < 4 && !placed; ++attempt) {
        std::vector<int> resp = sample_decode(
            g1, pair.query, static_cast<int>(cfg.max_response_len),
            mix_seed(cfg.seed, kSeedNegDecode,
                     static_cast<uint64_t>(pair.pair_id), attempt));
        if (!chosen.insert(resp).second) continue;
        out.push_back({pair.pair_id, Provenance::Synthetic, resp});
        placed = true;
      }
    }
    if (!placed)
      out.push_back({pair.pair_id, Provenance::Random, draw_random()});
  }
  return out;
}

double pretrain_ranker(MatchingModel& ranker, const CorpusBundle& corpus,
                       const TrainConfig& cfg,
                       const std::vector<StoredNegative>& negatives,
                       Optimizer& opt, int passes) {
  if (negatives.empty()) throw ContractError("no pretraining negatives");
  std::map<int, const QRPair*> by_id;
  for (const QRPair& p : corpus.ranking_set) by_id[p.pair_id] = &p;

  std::vector<RankExample> examples;
  for (const StoredNegative& sn : negatives) {
    auto row = by_id.find(sn.pair_id);
    if (row == by_id.end())
      throw ContractError("stored negative references an unknown ranking pair");
    examples.push_back(
        {row->second->query, row->second->response, sn.response});
  }

  double last = 0.0;
  for (int pass = 0; pass < passes; ++pass) {
    Rng rng(mix_seed(cfg.seed, kSeedPreRankOrder, static_cast<uint64_t>(pass)));
    std::vector<size_t> order(examples.size());
    std::iota(order.begin(), order.end(), size_t{0});
    rng.shuffle(order);
    std::vector<double> losses;
    for (size_t at = 0, b = 0; at < order.size(); ++b) {
      std::vector<RankExample> batch;
      for (size_t i = 0; i < static_cast<size_t>(cfg.batch_size) &&
                         at < order.size();
           ++i, ++at)
        batch.push_back(examples[order[at]]);
      losses.push_back(ranker.hinge_pretrain_step(
          batch, cfg.margin, opt,
          mix_seed(cfg.seed, kSeedPreRankStep, pass, b)));
    }
    last = mean_of(losses);
  }
  return last;
}

void run_g1_steps(TrainState& st, const CorpusBundle& corpus) {
  const TrainConfig& cfg = st.config;
  const std::vector<QRPair>& data = corpus.generation_set;
  if (cfg.g1_steps > 0 && data.empty())
    throw ContractError("generation set is empty");
  for (int step = 0; step < cfg.g1_steps; ++step) {
    Rng rng(mix_seed(cfg.seed, kSeedG1Batch, static_cast<uint64_t>(st.epoch),
                     static_cast<uint64_t>(step)));
    std::vector<SeqPair> batch;
    for (size_t row : draw_rows(data.size(), cfg.batch_size, rng))
      batch.push_back({data[row].query, data[row].response});

    // The baseline is frozen per step so threaded rollouts stay pure, and
    // the history records raw (unshifted) rewards.
    double baseline = cfg.baseline == BaselineKind::RunningMean
                          ? mean_of(st.g1_reward_history)
                          : 0.0;
    const MatchingModel& judge = st.d;
    RewardForm form = cfg.reward_form;
    SeqRewardFn fn = [&judge, baseline, form](const std::vector<int>& q,
                                              const std::vector<int>& cand,
                                              const std::vector<int>& ref) {
      return judge.reward(q, cand, ref, form) - baseline;
    };

    RolloutConfig rc;
    rc.m1 = cfg.m1;
    rc.max_len = static_cast<int>(cfg.max_response_len);
    rc.temperature = 1.0;
    rc.seed = mix_seed(cfg.seed, kSeedG1Rollout, st.epoch, step);
    double shifted = st.g1.pg_update_g1(fn, batch, rc, st.opt_g1);
    st.g1_reward_history.push_back(shifted + baseline);
  }
}

void run_g2_steps(TrainState& st, const CorpusBundle& corpus) {
  const TrainConfig& cfg = st.config;
  const std::vector<QRPair>& data = corpus.ranking_set;
  if (cfg.g2_steps > 0 && data.empty())
    throw ContractError("ranking set is empty");
  const Seq2SeqModel* g1 = cfg.m_1 > 0 ? &st.g1 : nullptr;
  for (int step = 0; step < cfg.g2_steps; ++step) {
    Rng rng(mix_seed(cfg.seed, kSeedG2Batch, static_cast<uint64_t>(st.epoch),
                     static_cast<uint64_t>(step)));
    uint64_t pool_seed = mix_seed(cfg.seed, kSeedG2Pool, st.epoch, step);
    std::vector<G2Example> batch;
    size_t i = 0;
    for (size_t row : draw_rows(data.size(), cfg.batch_size, rng)) {
      CandidatePool pool =
          build_candidate_pool(cfg, corpus.retrieval_pool, st.by_response, g1,
                               data[row], mix_seed(pool_seed, i++), &st.audit);
      batch.push_back({data[row].query, data[row].response, std::move(pool)});
    }
    double w = st.g2.pg_update_g2(st.d, batch, cfg.h, st.opt_g2,
                                  mix_seed(cfg.seed, kSeedG2Update, st.epoch,
                                           step),
                                  cfg.reward_form);
    st.g2_reward_history.push_back(w);
  }
}

void run_d_steps(TrainState& st, const CorpusBundle& corpus) {
  const TrainConfig& cfg = st.config;
  const std::vector<QRPair>& data = corpus.ranking_set;
  if (cfg.d_steps > 0 && data.empty())
    throw ContractError("ranking set is empty");

  std::map<int, std::vector<const StoredNegative*>> stored;
  for (const StoredNegative& sn : st.pretrain_negatives)
    stored[sn.pair_id].push_back(&sn);
  const Seq2SeqModel* g1 = cfg.m_1 > 0 ? &st.g1 : nullptr;

  for (int step = 0; step < cfg.d_steps; ++step) {
    Rng rng(mix_seed(cfg.seed, kSeedDBatch, static_cast<uint64_t>(st.epoch),
                     static_cast<uint64_t>(step)));
    uint64_t g1_seed = mix_seed(cfg.seed, kSeedDG1Draw, st.epoch, step);
    uint64_t pool_seed = mix_seed(cfg.seed, kSeedDPool, st.epoch, step);
    uint64_t draw_seed = mix_seed(cfg.seed, kSeedDG2Draw, st.epoch, step);

    std::vector<RankExample> positives;
    std::vector<RankExample> adversarials;
    size_t i = 0;
    for (size_t row : draw_rows(data.size(), cfg.batch_size, rng)) {
      const QRPair& pair = data[row];
      auto it = stored.find(pair.pair_id);
      if (it != stored.end())
        for (const StoredNegative* sn : it->second)
          positives.push_back({pair.query, pair.response, sn->response});

      if (g1)
        for (int j = 0; j < cfg.m_1; ++j)
          adversarials.push_back(
              {pair.query, pair.response,
               sample_decode(*g1, pair.query,
                             static_cast<int>(cfg.max_response_len),
                             mix_seed(g1_seed, i, static_cast<uint64_t>(j)))});

      CandidatePool pool =
          build_candidate_pool(cfg, corpus.retrieval_pool, st.by_response, g1,
                               pair, mix_seed(pool_seed, i), &st.audit);
      for (const ResponsePair& rp :
           st.g2.g2_sample(pair.query, pair.response, pool, cfg.h,
                           mix_seed(draw_seed, i)))
        adversarials.push_back({pair.query, rp.positive, rp.negative});
      ++i;
    }
    double loss = st.d.d_update(positives, adversarials, st.opt_d,
                                mix_seed(cfg.seed, kSeedDDropout, st.epoch,
                                         step));
    st.d_loss_history.push_back(loss);
  }
}

void advance_epochs(TrainState& st, const CorpusBundle& corpus,
                    int target_epochs, const MinimaxOptions& opt) {
  while (st.epoch < target_epochs) {
    if (st.config.g1_steps > 0) run_g1_steps(st, corpus);
    if (st.config.g2_steps > 0) run_g2_steps(st, corpus);
    if (st.config.d_steps > 0) run_d_steps(st, corpus);
    st.epoch += 1;
    if (!opt.checkpoint_dir.empty())
      save_train_state(st, opt.checkpoint_dir + "/epoch_" +
                               std::to_string(st.epoch));
  }
}

TrainState run_minimax(const TrainConfig& cfg, const CorpusBundle& corpus,
                       const MinimaxOptions& opt) {
  TrainState st = make_train_state(cfg, corpus);

  if (cfg.mode != TrainMode::IrGan) {
    Optimizer pre_gen = make_adam(cfg.lr_pretrain_gen);
    pretrain_generator(st.g1, corpus, cfg, pre_gen, opt.pretrain_gen_passes);
  }
  st.pretrain_negatives =
      build_pretrain_negatives(cfg, corpus, st.by_response, st.g1);
  Optimizer pre_rank = make_adam(cfg.lr_pretrain_rank);
  pretrain_ranker(st.d, corpus, cfg, st.pretrain_negatives, pre_rank,
                  opt.pretrain_rank_passes);
  st.g2 = st.d.clone();

  if (!opt.checkpoint_dir.empty())
    save_train_state(st, opt.checkpoint_dir + "/epoch_0");
  advance_epochs(st, corpus, cfg.epochs, opt);
  return st;
}

namespace {

void write_series(std::ostringstream& body, const std::string& name,
                  const std::vector<double>& xs) {
  body << name << ' ' << xs.size();
  for (double x : xs) body << ' ' << double_to_hex(x);
  body << '\n';
}

Provenance parse_provenance(const std::string& s, const std::string& origin) {
  if (s == "ground_truth") return Provenance::GroundTruth;
  if (s == "retrieved") return Provenance::Retrieved;
  if (s == "random") return Provenance::Random;
  if (s == "synthetic") return Provenance::Synthetic;
  throw FormatError(origin + ": unknown provenance '" + s + "'");
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

void save_train_state(const TrainState& st, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir);

  save_checkpoint(dir + "/g1.ckpt", ModelRole::G1, st.config, st.g1.params(),
                  &st.opt_g1);
  save_checkpoint(dir + "/g2.ckpt", ModelRole::G2, st.config, st.g2.params(),
                  &st.opt_g2);
  save_checkpoint(dir + "/d.ckpt", ModelRole::D, st.config, st.d.params(),
                  &st.opt_d);

  std::ostringstream body;
  body << "EGSTATE1\n";
  body << "epoch " << st.epoch << '\n';
  write_series(body, "g1_rewards", st.g1_reward_history);
  write_series(body, "g2_rewards", st.g2_reward_history);
  write_series(body, "d_losses", st.d_loss_history);
  body << "audit " << st.audit.pools_built << ' ' << st.audit.random_members
       << ' ' << st.audit.retrieved_members << ' '
       << st.audit.synthetic_members << ' ' << st.audit.bound_violations
       << ' ' << st.audit.truth_collisions << '\n';
  body << "negatives " << st.pretrain_negatives.size() << '\n';
  for (const StoredNegative& sn : st.pretrain_negatives) {
    body << "n " << sn.pair_id << ' ' << provenance_name(sn.provenance) << ' '
         << sn.response.size();
    for (int id : sn.response) body << ' ' << id;
    body << '\n';
  }

  std::string text = body.str();
  char digest[32];
  std::snprintf(digest, sizeof(digest), "digest %016llx\n",
                static_cast<unsigned long long>(fnv1a64(text)));
  std::ofstream out(dir + "/state.txt", std::ios::binary | std::ios::trunc);
  if (!out.good()) throw IoError("cannot write " + dir + "/state.txt");
  out << text << digest;
  if (!out.good()) throw IoError("failed writing " + dir + "/state.txt");
}

TrainState load_train_state(const std::string& dir,
                            const CorpusBundle& corpus) {
  const std::string path = dir + "/state.txt";
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (text.empty() || text.back() != '\n')
    throw CorruptionError(path + ": missing trailing newline");
  size_t cut = text.rfind('\n', text.size() - 2);
  cut = cut == std::string::npos ? 0 : cut + 1;
  std::string last = text.substr(cut, text.size() - cut - 1);
  std::vector<std::string> dtok = split_ws(last);
  if (dtok.size() != 2 || dtok[0] != "digest")
    throw CorruptionError(path + ": missing digest line");
  std::string body = text.substr(0, cut);
  char expect[24];
  std::snprintf(expect, sizeof(expect), "%016llx",
                static_cast<unsigned long long>(fnv1a64(body)));
  if (dtok[1] != expect) throw CorruptionError(path + ": digest mismatch");

  std::istringstream lines(body);
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(lines, line))
      throw CorruptionError(path + ": ends before " + what);
    return split_ws(line);
  };

  std::vector<std::string> tok = next("magic");
  if (tok.size() != 1 || tok[0] != "EGSTATE1")
    throw FormatError(path + ": not a training-state file");

  CheckpointData d_data = load_checkpoint(dir + "/d.ckpt", ModelRole::D);
  TrainState st = make_train_state(d_data.config, corpus);
  apply_checkpoint(d_data, st.d.params(), &st.opt_d);
  apply_checkpoint(load_checkpoint(dir + "/g1.ckpt", ModelRole::G1),
                   st.g1.params(), &st.opt_g1);
  apply_checkpoint(load_checkpoint(dir + "/g2.ckpt", ModelRole::G2),
                   st.g2.params(), &st.opt_g2);

  tok = next("epoch");
  if (tok.size() != 2 || tok[0] != "epoch")
    throw FormatError(path + ": expected epoch line");
  st.epoch = std::stoi(tok[1]);

  auto read_series = [&](const char* name, std::vector<double>& out) {
    std::vector<std::string> t = next(name);
    if (t.size() < 2 || t[0] != name)
      throw FormatError(path + ": expected " + std::string(name) + " line");
    size_t n = std::stoull(t[1]);
    if (t.size() != n + 2)
      throw FormatError(path + ": " + std::string(name) + " count mismatch");
    out.clear();
    for (size_t i = 0; i < n; ++i)
      out.push_back(hex_to_double(t[i + 2], name));
  };
  read_series("g1_rewards", st.g1_reward_history);
  read_series("g2_rewards", st.g2_reward_history);
  read_series("d_losses", st.d_loss_history);

  tok = next("audit");
  if (tok.size() != 7 || tok[0] != "audit")
    throw FormatError(path + ": expected audit line");
  st.audit.pools_built = std::stoull(tok[1]);
  st.audit.random_members = std::stoull(tok[2]);
  st.audit.retrieved_members = std::stoull(tok[3]);
  st.audit.synthetic_members = std::stoull(tok[4]);
  st.audit.bound_violations = std::stoull(tok[5]);
  st.audit.truth_collisions = std::stoull(tok[6]);

  tok = next("negatives");
  if (tok.size() != 2 || tok[0] != "negatives")
    throw FormatError(path + ": expected negatives line");
  size_t n_neg = std::stoull(tok[1]);
  for (size_t i = 0; i < n_neg; ++i) {
    tok = next("negative entry");
    if (tok.size() < 4 || tok[0] != "n")
      throw FormatError(path + ": malformed negative entry");
    StoredNegative sn;
    sn.pair_id = std::stoi(tok[1]);
    sn.provenance = parse_provenance(tok[2], path);
    size_t len = std::stoull(tok[3]);
    if (tok.size() != len + 4)
      throw FormatError(path + ": negative entry length mismatch");
    for (size_t k = 0; k < len; ++k)
      sn.response.push_back(std::stoi(tok[k + 4]));
    st.pretrain_negatives.push_back(std::move(sn));
  }
  return st;
}

ServedResponse ensemble_respond(const Seq2SeqModel* g1,
                                const MatchingModel& ranker,
                                const std::vector<QRPair>& retrieval_pool,
                                const InvertedIndex& by_query,
                                const std::vector<int>& query,
                                int k_retrieved, int n_generated,
                                size_t max_resp_len, uint64_t seed) {
  if (k_retrieved < 0 || n_generated < 0)
    throw ContractError("candidate counts must be nonnegative");
  if (n_generated > 0 && g1 == nullptr)
    throw ContractError("generation requested without a generator");

  ServedResponse out;
  std::set<std::vector<int>> seen;

  if (k_retrieved > 0) {
    std::map<int, const QRPair*> by_id = rows_by_id(retrieval_pool);
    RetrievalResult rr = by_query.retrieve_top_k(query, k_retrieved, -1);
    for (const RetrievalHit& hit : rr.hits) {
      auto row = by_id.find(hit.pair_id);
      if (row == by_id.end())
        throw ContractError("by-query index does not match the retrieval pool");
      if (seen.insert(row->second->response).second)
        out.candidates.push_back(
            {row->second->response, Provenance::Retrieved});
    }
  }

  for (int j = 0; j < n_generated; ++j) {
    DecodeConfig dc;
    dc.max_len = static_cast<int>(max_resp_len);
    dc.temperature = 1.0;
    dc.seed = mix_seed(seed, kSeedServeDecode, static_cast<uint64_t>(j));
    std::vector<int> resp = g1->decode_sequence(
        query, j == 0 ? DecodeMode::Greedy : DecodeMode::Sample, dc);
    if (seen.insert(resp).second)
      out.candidates.push_back({std::move(resp), Provenance::Synthetic});
  }

  if (out.candidates.empty())
    throw ContractError("no response candidates for the query");

  std::vector<std::vector<int>> seqs;
  for (const Candidate& c : out.candidates) seqs.push_back(c.response);
  out.ranked = ranker.rank_candidates(query, seqs);
  const Candidate& top = out.candidates[static_cast<size_t>(out.ranked[0].index)];
  out.response = top.response;
  out.provenance = top.provenance;
  return out;
}

}  // namespace egan
