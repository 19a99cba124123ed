#include "ensemblegan.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "egan/adversarial.hpp"
#include "egan/checkpoint.hpp"
#include "egan/evaluate.hpp"
#include "egan/metrics.hpp"
#include "egan/rng.hpp"
#include "egan/stats.hpp"

using egan::CorpusBundle;
using egan::InvertedIndex;
using egan::TrainConfig;
using egan::TrainState;

struct eg_corpus {
  CorpusBundle bundle;
};

struct eg_config {
  TrainConfig cfg;
};

struct eg_index {
  InvertedIndex index;
};

struct eg_session {
  CorpusBundle corpus;
  TrainState state;
  InvertedIndex by_query;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

eg_status fail_contract(const std::string& message) {
  g_last_error = message;
  return EG_ERR_CONTRACT;
}

template <typename Body>
eg_status guarded(Body&& body) {
  try {
    body();
    g_last_error.clear();
    return EG_OK;
  } catch (const egan::DimensionError& e) {
    g_last_error = e.what();
    return EG_ERR_DIMENSION;
  } catch (const egan::ContractError& e) {
    g_last_error = e.what();
    return EG_ERR_CONTRACT;
  } catch (const egan::DomainError& e) {
    g_last_error = e.what();
    return EG_ERR_DOMAIN;
  } catch (const egan::IoError& e) {
    g_last_error = e.what();
    return EG_ERR_IO;
  } catch (const egan::FormatError& e) {
    g_last_error = e.what();
    return EG_ERR_FORMAT;
  } catch (const egan::CorruptionError& e) {
    g_last_error = e.what();
    return EG_ERR_CORRUPTION;
  } catch (const egan::VersionError& e) {
    g_last_error = e.what();
    return EG_ERR_VERSION;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EG_ERR_INTERNAL;
  }
}

egan::Optimizer adam_with(double lr) {
  egan::OptimizerConfig oc;
  oc.kind = egan::OptKind::Adam;
  oc.lr = lr;
  oc.clip_norm = 5.0;
  return egan::Optimizer(oc);
}

}  // namespace

extern "C" {

const char* eg_last_error(void) { return g_last_error.c_str(); }

const char* eg_version(void) { return "1.0.0"; }

void eg_set_thread_cap(unsigned threads) { egan::set_thread_cap(threads); }

void eg_string_free(char* s) { std::free(s); }

/* ---- corpus ----------------------------------------------------------- */

eg_status eg_corpus_generate(uint64_t seed, size_t n_pairs, size_t n_topics,
                             size_t paraphrases_per_topic, size_t vocab_max,
                             size_t max_query_len, size_t max_response_len,
                             eg_corpus** out) {
  if (!out) return fail_contract("eg_corpus_generate: out is NULL");
  *out = nullptr;
  return guarded([&] {
    egan::SynthOptions opt;
    opt.vocab_max = vocab_max;
    opt.caps = {max_query_len, max_response_len};
    *out = new eg_corpus{egan::generate_synthetic_corpus(
        seed, n_pairs, n_topics, paraphrases_per_topic, opt)};
  });
}

eg_status eg_corpus_load(const char* dir, size_t max_query_len,
                         size_t max_response_len, eg_corpus** out) {
  if (!out) return fail_contract("eg_corpus_load: out is NULL");
  *out = nullptr;
  if (!dir) return fail_contract("eg_corpus_load: dir is NULL");
  return guarded([&] {
    *out = new eg_corpus{
        CorpusBundle::load(dir, {max_query_len, max_response_len})};
  });
}

eg_status eg_corpus_save(const eg_corpus* corpus, const char* dir) {
  if (!corpus) return fail_contract("eg_corpus_save: corpus is NULL");
  if (!dir) return fail_contract("eg_corpus_save: dir is NULL");
  return guarded([&] { corpus->bundle.save(dir); });
}

eg_status eg_corpus_stats(const eg_corpus* corpus, char** out_text) {
  if (!corpus) return fail_contract("eg_corpus_stats: corpus is NULL");
  if (!out_text) return fail_contract("eg_corpus_stats: out_text is NULL");
  *out_text = nullptr;
  return guarded([&] {
    const CorpusBundle& b = corpus->bundle;
    std::ostringstream os;
    os << "pairs " << b.total_pairs() << " (pool " << b.retrieval_pool.size()
       << ", ranking " << b.ranking_set.size() << ", generation "
       << b.generation_set.size() << ", test " << b.test_set.size()
       << "), vocab " << b.vocab.size() << ", caps " << b.caps.max_query_len
       << "/" << b.caps.max_resp_len;
    *out_text = dup_string(os.str());
  });
}

void eg_corpus_free(eg_corpus* corpus) { delete corpus; }

/* ---- config ----------------------------------------------------------- */

eg_status eg_config_from_text(const char* text, const char* origin,
                              eg_config** out) {
  if (!out) return fail_contract("eg_config_from_text: out is NULL");
  *out = nullptr;
  if (!text) return fail_contract("eg_config_from_text: text is NULL");
  return guarded([&] {
    *out = new eg_config{
        egan::parse_train_config_text(text, origin ? origin : "config")};
  });
}

eg_status eg_config_render(const eg_config* config, char** out_text) {
  if (!config) return fail_contract("eg_config_render: config is NULL");
  if (!out_text) return fail_contract("eg_config_render: out_text is NULL");
  *out_text = nullptr;
  return guarded(
      [&] { *out_text = dup_string(egan::train_config_to_text(config->cfg)); });
}

void eg_config_free(eg_config* config) { delete config; }

/* ---- retrieval index --------------------------------------------------- */

eg_status eg_index_build(const eg_corpus* corpus, int by_response,
                         eg_index** out) {
  if (!out) return fail_contract("eg_index_build: out is NULL");
  *out = nullptr;
  if (!corpus) return fail_contract("eg_index_build: corpus is NULL");
  return guarded([&] {
    *out = new eg_index{InvertedIndex::build(
        corpus->bundle.retrieval_pool,
        by_response ? egan::IndexMode::ByResponse : egan::IndexMode::ByQuery)};
  });
}

eg_status eg_index_save(const eg_index* index, const char* path) {
  if (!index) return fail_contract("eg_index_save: index is NULL");
  if (!path) return fail_contract("eg_index_save: path is NULL");
  return guarded([&] { index->index.save(path); });
}

eg_status eg_index_load(const char* path, eg_index** out) {
  if (!out) return fail_contract("eg_index_load: out is NULL");
  *out = nullptr;
  if (!path) return fail_contract("eg_index_load: path is NULL");
  return guarded([&] { *out = new eg_index{InvertedIndex::load(path)}; });
}

eg_status eg_index_stats(const eg_index* index, char** out_text) {
  if (!index) return fail_contract("eg_index_stats: index is NULL");
  if (!out_text) return fail_contract("eg_index_stats: out_text is NULL");
  *out_text = nullptr;
  return guarded([&] {
    std::ostringstream os;
    os << "mode "
       << (index->index.mode() == egan::IndexMode::ByQuery ? "by_query"
                                                           : "by_response")
       << ", docs " << index->index.doc_count() << ", terms "
       << index->index.term_count();
    *out_text = dup_string(os.str());
  });
}

void eg_index_free(eg_index* index) { delete index; }

/* ---- pretraining ------------------------------------------------------- */

eg_status eg_pretrain_generator(const eg_config* config,
                                const eg_corpus* corpus, int passes,
                                const char* checkpoint_path,
                                double* out_final_loss) {
  if (!config) return fail_contract("eg_pretrain_generator: config is NULL");
  if (!corpus) return fail_contract("eg_pretrain_generator: corpus is NULL");
  if (!checkpoint_path)
    return fail_contract("eg_pretrain_generator: checkpoint_path is NULL");
  if (passes < 0)
    return fail_contract("eg_pretrain_generator: passes must be >= 0");
  return guarded([&] {
    const TrainConfig& cfg = config->cfg;
    TrainState st = egan::make_train_state(cfg, corpus->bundle);
    egan::Optimizer opt = adam_with(cfg.lr_pretrain_gen);
    double loss =
        egan::pretrain_generator(st.g1, corpus->bundle, cfg, opt, passes);
    egan::save_checkpoint(checkpoint_path, egan::ModelRole::G1, cfg,
                          st.g1.params(), &opt);
    if (out_final_loss) *out_final_loss = loss;
  });
}

eg_status eg_pretrain_ranker(const eg_config* config, const eg_corpus* corpus,
                             int generator_passes, int ranker_passes,
                             const char* checkpoint_path,
                             double* out_final_loss) {
  if (!config) return fail_contract("eg_pretrain_ranker: config is NULL");
  if (!corpus) return fail_contract("eg_pretrain_ranker: corpus is NULL");
  if (!checkpoint_path)
    return fail_contract("eg_pretrain_ranker: checkpoint_path is NULL");
  if (generator_passes < 0 || ranker_passes < 0)
    return fail_contract("eg_pretrain_ranker: pass counts must be >= 0");
  return guarded([&] {
    const TrainConfig& cfg = config->cfg;
    TrainState st = egan::make_train_state(cfg, corpus->bundle);
    if (cfg.mode != egan::TrainMode::IrGan) {
      egan::Optimizer gopt = adam_with(cfg.lr_pretrain_gen);
      egan::pretrain_generator(st.g1, corpus->bundle, cfg, gopt,
                               generator_passes);
    }
    std::vector<egan::StoredNegative> negatives =
        egan::build_pretrain_negatives(cfg, corpus->bundle, st.by_response,
                                       st.g1);
    egan::Optimizer ropt = adam_with(cfg.lr_pretrain_rank);
    double loss = egan::pretrain_ranker(st.d, corpus->bundle, cfg, negatives,
                                        ropt, ranker_passes);
    egan::save_checkpoint(checkpoint_path, egan::ModelRole::D, cfg,
                          st.d.params(), &ropt);
    if (out_final_loss) *out_final_loss = loss;
  });
}

/* ---- adversarial training session -------------------------------------- */

eg_status eg_train(const eg_config* config, const eg_corpus* corpus,
                   const char* snapshot_dir, int pretrain_generator_passes,
                   int pretrain_ranker_passes, eg_session** out) {
  if (!out) return fail_contract("eg_train: out is NULL");
  *out = nullptr;
  if (!config) return fail_contract("eg_train: config is NULL");
  if (!corpus) return fail_contract("eg_train: corpus is NULL");
  return guarded([&] {
    egan::MinimaxOptions mo;
    if (snapshot_dir) mo.checkpoint_dir = snapshot_dir;
    if (pretrain_generator_passes >= 0)
      mo.pretrain_gen_passes = pretrain_generator_passes;
    if (pretrain_ranker_passes >= 0)
      mo.pretrain_rank_passes = pretrain_ranker_passes;
    TrainState state = egan::run_minimax(config->cfg, corpus->bundle, mo);
    InvertedIndex by_query = InvertedIndex::build(corpus->bundle.retrieval_pool,
                                                  egan::IndexMode::ByQuery);
    *out =
        new eg_session{corpus->bundle, std::move(state), std::move(by_query)};
  });
}

eg_status eg_session_open(const char* snapshot_dir, const eg_corpus* corpus,
                          eg_session** out) {
  if (!out) return fail_contract("eg_session_open: out is NULL");
  *out = nullptr;
  if (!snapshot_dir)
    return fail_contract("eg_session_open: snapshot_dir is NULL");
  if (!corpus) return fail_contract("eg_session_open: corpus is NULL");
  return guarded([&] {
    TrainState state = egan::load_train_state(snapshot_dir, corpus->bundle);
    InvertedIndex by_query = InvertedIndex::build(corpus->bundle.retrieval_pool,
                                                  egan::IndexMode::ByQuery);
    *out =
        new eg_session{corpus->bundle, std::move(state), std::move(by_query)};
  });
}

eg_status eg_session_advance(eg_session* session, int target_epochs,
                             const char* snapshot_dir) {
  if (!session) return fail_contract("eg_session_advance: session is NULL");
  return guarded([&] {
    egan::MinimaxOptions mo;
    if (snapshot_dir) mo.checkpoint_dir = snapshot_dir;
    egan::advance_epochs(session->state, session->corpus, target_epochs, mo);
  });
}

eg_status eg_session_save(const eg_session* session, const char* dir) {
  if (!session) return fail_contract("eg_session_save: session is NULL");
  if (!dir) return fail_contract("eg_session_save: dir is NULL");
  return guarded([&] { egan::save_train_state(session->state, dir); });
}

int eg_session_epoch(const eg_session* session) {
  return session ? session->state.epoch : -1;
}

const char* eg_session_mode(const eg_session* session) {
  return session ? egan::train_mode_name(session->state.config.mode) : "";
}

eg_status eg_session_history(const eg_session* session, const char* series,
                             double* buffer, size_t capacity,
                             size_t* out_count) {
  if (!session) return fail_contract("eg_session_history: session is NULL");
  if (!series) return fail_contract("eg_session_history: series is NULL");
  if (!out_count) return fail_contract("eg_session_history: out_count is NULL");
  *out_count = 0;
  const std::vector<double>* src = nullptr;
  const std::string name = series;
  if (name == "g1") src = &session->state.g1_reward_history;
  else if (name == "g2") src = &session->state.g2_reward_history;
  else if (name == "d") src = &session->state.d_loss_history;
  else
    return fail_contract("eg_session_history: series must be g1, g2, or d");
  if (capacity > 0 && !buffer)
    return fail_contract("eg_session_history: buffer is NULL");
  size_t n = src->size() < capacity ? src->size() : capacity;
  for (size_t i = 0; i < n; ++i) buffer[i] = (*src)[i];
  *out_count = src->size();
  g_last_error.clear();
  return EG_OK;
}

eg_status eg_session_respond(const eg_session* session, const char* query_text,
                             int use_g2, int k_retrieved, int n_generated,
                             uint64_t seed, int top_scores, char** out_json) {
  if (!session) return fail_contract("eg_session_respond: session is NULL");
  if (!query_text)
    return fail_contract("eg_session_respond: query_text is NULL");
  if (!out_json) return fail_contract("eg_session_respond: out_json is NULL");
  *out_json = nullptr;
  if (top_scores < 0)
    return fail_contract("eg_session_respond: top_scores must be >= 0");
  return guarded([&] {
    const CorpusBundle& corpus = session->corpus;
    const TrainState& st = session->state;
    if (st.config.mode == egan::TrainMode::IrGan && n_generated != 0)
      throw egan::ContractError(
          "eg_session_respond: this mode serves retrieval only; "
          "n_generated must be 0");
    std::vector<std::string> tokens = egan::tokenize(query_text);
    std::vector<int> query =
        corpus.vocab.encode(tokens, corpus.caps.max_query_len);
    const egan::MatchingModel& ranker = use_g2 ? st.g2 : st.d;
    egan::ServedResponse served = egan::ensemble_respond(
        n_generated > 0 ? &st.g1 : nullptr, ranker, corpus.retrieval_pool,
        session->by_query, query, k_retrieved, n_generated,
        static_cast<size_t>(st.config.max_response_len), seed);

    nlohmann::json j;
    j["query"] = query_text;
    j["query_ids"] = query;
    j["response"] = egan::text_of(corpus.vocab, served.response);
    j["response_ids"] = served.response;
    j["provenance"] = egan::provenance_name(served.provenance);
    j["ranker"] = use_g2 ? "g2" : "d";
    nlohmann::json cands = nlohmann::json::array();
    size_t limit = static_cast<size_t>(top_scores);
    for (size_t i = 0; i < served.ranked.size() && i < limit; ++i) {
      const egan::RankedCandidate& rc = served.ranked[i];
      const egan::Candidate& c =
          served.candidates[static_cast<size_t>(rc.index)];
      nlohmann::json item;
      item["rank"] = i + 1;
      item["score"] = rc.score;
      item["provenance"] = egan::provenance_name(c.provenance);
      item["response"] = egan::text_of(corpus.vocab, c.response);
      cands.push_back(std::move(item));
    }
    j["candidates"] = std::move(cands);
    *out_json = dup_string(j.dump(2));
  });
}

eg_status eg_session_evaluate(const eg_session* session, int use_g2,
                              int k_retrieved, int n_generated,
                              int n_distractors, uint64_t seed,
                              char** out_text) {
  if (!session) return fail_contract("eg_session_evaluate: session is NULL");
  if (!out_text) return fail_contract("eg_session_evaluate: out_text is NULL");
  *out_text = nullptr;
  return guarded([&] {
    egan::EvalOptions opt;
    opt.ranker = use_g2 ? egan::RankerChoice::G2 : egan::RankerChoice::D;
    opt.k_retrieved = k_retrieved;
    opt.n_generated = n_generated;
    opt.n_distractors = n_distractors;
    opt.seed = seed;
    egan::MetricsReport report = egan::evaluate_system(
        session->state, session->corpus, session->by_query, opt);
    *out_text = dup_string(report.to_text());
  });
}

void eg_session_free(eg_session* session) { delete session; }

/* ---- self checks ------------------------------------------------------- */

eg_status eg_selftest(uint64_t seed, char** out_report) {
  if (!out_report) return fail_contract("eg_selftest: out_report is NULL");
  *out_report = nullptr;
  bool all_ok = true;
  std::ostringstream rep;
  auto check = [&](const char* name, auto&& fn) {
    try {
      std::string detail = fn();
      if (detail.empty()) {
        rep << "ok " << name << "\n";
      } else {
        all_ok = false;
        rep << "FAIL " << name << ": " << detail << "\n";
      }
    } catch (const std::exception& e) {
      all_ok = false;
      rep << "FAIL " << name << ": " << e.what() << "\n";
    }
  };

  check("rng_uniformity", [&]() -> std::string {
    egan::Rng rng(egan::mix_seed(seed, 0x5e1f, 1));
    const size_t bins = 16, draws = 20000;
    std::vector<double> observed(bins, 0.0);
    std::vector<double> expected(bins,
                                 static_cast<double>(draws) / bins);
    for (size_t i = 0; i < draws; ++i) observed[rng.uniform_index(bins)] += 1.0;
    double stat = egan::chi_square_stat(observed, expected);
    double p = egan::chi_square_pvalue(stat, static_cast<double>(bins - 1));
    if (p <= 0.001)
      return "uniform draws look biased, p = " + std::to_string(p);
    return {};
  });

  check("softmax_simplex", [&]() -> std::string {
    egan::Rng rng(egan::mix_seed(seed, 0x5e1f, 2));
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> logits(7);
      for (double& v : logits) v = 40.0 * (rng.uniform01() - 0.5);
      std::vector<double> p = egan::softmax_stable(logits);
      double sum = 0.0;
      for (double v : p) {
        if (v < 0.0) return "negative probability";
        sum += v;
      }
      if (sum < 1.0 - 1e-9 || sum > 1.0 + 1e-9)
        return "probabilities sum to " + std::to_string(sum);
    }
    return {};
  });

  // The remaining checks share one tiny trained-free world.
  TrainConfig cfg;
  cfg.seed = egan::mix_seed(seed, 0x5e1f, 3);
  cfg.vocab_size = 200;
  cfg.d_embed = 8;
  cfg.d_hidden = 8;
  cfg.max_query_len = 8;
  cfg.max_response_len = 8;
  cfg.dropout = 0.0;
  cfg.m1 = 2;
  cfg.h = 2;
  cfg.m_r = 4;
  cfg.m_p = 2;
  cfg.m_1 = 2;
  cfg.batch_size = 4;
  cfg.g1_steps = 1;
  cfg.g2_steps = 1;
  cfg.d_steps = 1;
  cfg.epochs = 1;
  egan::SynthOptions sopt;
  sopt.vocab_max = 200;
  sopt.caps = {8, 8};
  CorpusBundle corpus =
      egan::generate_synthetic_corpus(egan::mix_seed(seed, 0x5e1f, 4), 120, 4,
                                      3, sopt);
  TrainState st = egan::make_train_state(cfg, corpus);

  check("decode_termination", [&]() -> std::string {
    for (int trial = 0; trial < 50; ++trial) {
      const egan::QRPair& p =
          corpus.generation_set[static_cast<size_t>(trial) %
                                corpus.generation_set.size()];
      egan::DecodeConfig dc;
      dc.max_len = cfg.max_response_len;
      dc.seed = egan::mix_seed(seed, 0x5e1f, 5, static_cast<uint64_t>(trial));
      std::vector<int> out =
          st.g1.decode_sequence(p.query, egan::DecodeMode::Sample, dc);
      if (out.empty() || out.back() != egan::Vocab::kEos)
        return "decode did not terminate with the end marker";
      if (out.size() > static_cast<size_t>(cfg.max_response_len))
        return "decode exceeded the length cap";
      for (int id : out)
        if (id == egan::Vocab::kPad || id == egan::Vocab::kBos)
          return "decode emitted a reserved filler token";
    }
    return {};
  });

  check("ranker_antisymmetry", [&]() -> std::string {
    egan::Rng rng(egan::mix_seed(seed, 0x5e1f, 6));
    const size_t content_ids = corpus.vocab.size() - 4;
    for (int trial = 0; trial < 20; ++trial) {
      auto draw = [&](size_t len) {
        std::vector<int> ids;
        for (size_t i = 0; i < len; ++i)
          ids.push_back(4 + static_cast<int>(rng.uniform_index(content_ids)));
        ids.push_back(egan::Vocab::kEos);
        return ids;
      };
      std::vector<int> q = draw(3), a = draw(4), b = draw(5);
      double fwd = st.d.pair_prob(q, a, b);
      double bwd = st.d.pair_prob(q, b, a);
      if (fwd + bwd < 1.0 - 1e-12 || fwd + bwd > 1.0 + 1e-12)
        return "pair probabilities do not mirror";
      if (st.d.reward(q, a, a, egan::RewardForm::Advantage) != 0.0)
        return "self-comparison reward is not zero";
    }
    return {};
  });

  check("candidate_pool_audit", [&]() -> std::string {
    egan::PoolAudit audit;
    size_t n = corpus.ranking_set.size() < 10 ? corpus.ranking_set.size() : 10;
    for (size_t i = 0; i < n; ++i)
      egan::build_candidate_pool(
          cfg, corpus.retrieval_pool, st.by_response, &st.g1,
          corpus.ranking_set[i],
          egan::mix_seed(seed, 0x5e1f, 7, static_cast<uint64_t>(i)), &audit);
    if (audit.bound_violations != 0) return "a pool left its size bounds";
    if (audit.truth_collisions != 0)
      return "a pool admitted the ground truth";
    return {};
  });

  check("checkpoint_roundtrip", [&]() -> std::string {
    std::string path =
        "/tmp/egan_selftest_" + std::to_string(egan::mix_seed(seed, 0xcc)) +
        ".ckpt";
    egan::save_checkpoint(path, egan::ModelRole::D, cfg, st.d.params(),
                          nullptr);
    egan::CheckpointData data =
        egan::load_checkpoint(path, egan::ModelRole::D);
    egan::MatchingModel copy(static_cast<int>(corpus.vocab.size()),
                             cfg.d_embed, cfg.d_hidden, cfg.dropout, 999);
    egan::apply_checkpoint(data, copy.params(), nullptr);
    std::remove(path.c_str());
    const egan::QRPair& p = corpus.test_set.front();
    if (copy.score(p.query, p.response) != st.d.score(p.query, p.response))
      return "restored scorer disagrees with the original";
    return {};
  });

  check("metric_identity", [&]() -> std::string {
    std::vector<std::vector<int>> refs;
    for (size_t i = 0; i < 5; ++i) refs.push_back(corpus.test_set[i].response);
    for (int n = 1; n <= 4; ++n)
      if (egan::bleu_n(refs, refs, n) != 1.0)
        return "self-overlap is below 1";
    std::vector<std::vector<int>> disjoint(refs.size(),
                                           {4, 4, 4, egan::Vocab::kEos});
    bool all_disjoint = true;
    for (const auto& r : refs) {
      std::vector<int> c;
      for (int id : r) {
        if (id == egan::Vocab::kEos) break;
        c.push_back(id);
      }
      for (int id : c)
        if (id == 4) all_disjoint = false;
    }
    if (all_disjoint && egan::bleu_n(disjoint, refs, 1) != 0.0)
      return "disjoint overlap is above 0";
    egan::MetricsReport r;
    r.set("sys", "metric", 0.25);
    if (egan::MetricsReport::parse_text(r.to_text()).values != r.values)
      return "report text does not round-trip";
    return {};
  });

  *out_report = dup_string(rep.str());
  if (!all_ok) {
    g_last_error = "self-test reported failures";
    return EG_ERR_INTERNAL;
  }
  g_last_error.clear();
  return EG_OK;
}

}  // extern "C"
