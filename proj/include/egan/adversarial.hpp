#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "egan/candidates.hpp"
#include "egan/config.hpp"
#include "egan/corpus.hpp"
#include "egan/ranker.hpp"
#include "egan/retrieval.hpp"
#include "egan/seq2seq.hpp"

namespace egan {

// Running tally over every candidate pool a training run builds. The
// violation counters must stay zero; tests and the self-check audit them.
struct PoolAudit {
  uint64_t pools_built = 0;
  uint64_t random_members = 0;
  uint64_t retrieved_members = 0;
  uint64_t synthetic_members = 0;
  // Pools whose size left [m_r, m_r + m_p + m_1].
  uint64_t bound_violations = 0;
  // Members equal to the ground-truth sequence (never allowed).
  uint64_t truth_collisions = 0;
};

// Three-stage negative sampling for one (query, ground truth) context:
//   1. m_r uniform draws over the distinct response sequences of the
//      retrieval pool, ground truth excluded;
//   2. m_p responses fetched by probing the by-response index with the
//      ground truth, its own pair excluded;
//   3. m_1 sampled generator decodes conditioned on the query.
// The union is deduplicated by token sequence; when legs collide the
// surviving provenance follows the priority retrieved > synthetic > random.
// g1 may be null only when cfg.m_1 == 0. Fewer than m_r distinct eligible
// sequences is a contract error.
CandidatePool build_candidate_pool(const TrainConfig& cfg,
                                   const std::vector<QRPair>& retrieval_pool,
                                   const InvertedIndex& by_response,
                                   const Seq2SeqModel* g1,
                                   const QRPair& context, uint64_t seed,
                                   PoolAudit* audit = nullptr);

// One pretraining-style negative for a ranking-set pair, kept around so the
// discriminator phase can reuse the pair as a genuine-versus-negative
// positive example.
struct StoredNegative {
  int pair_id = -1;
  Provenance provenance = Provenance::Random;
  std::vector<int> response;
};

// Everything one adversarial run owns: the three players, their optimizers,
// the sampling index, bookkeeping histories, and the pool audit.
struct TrainState {
  TrainConfig config;
  Seq2SeqModel g1;
  MatchingModel g2;
  MatchingModel d;
  Optimizer opt_g1;
  Optimizer opt_g2;
  Optimizer opt_d;
  InvertedIndex by_response;
  std::vector<StoredNegative> pretrain_negatives;
  // Completed adversarial epochs; pretraining alone leaves it at 0.
  int epoch = 0;
  std::vector<double> g1_reward_history;
  std::vector<double> g2_reward_history;
  std::vector<double> d_loss_history;
  PoolAudit audit;
};

// Fresh untrained state: models seeded from cfg.seed, g2 and d identical,
// by-response index built over the corpus retrieval pool, no histories.
TrainState make_train_state(const TrainConfig& cfg,
                            const CorpusBundle& corpus);

// Cross-entropy passes over the generation set; returns the mean loss of
// the final pass.
double pretrain_generator(Seq2SeqModel& g1, const CorpusBundle& corpus,
                          const TrainConfig& cfg, Optimizer& opt, int passes);

// The k=5 negatives per ranking-set pair: 2 random + 2 retrieved by
// response + 1 generator sample (shortfalls fall back to random).
// Deterministic given (cfg.seed, corpus, g1 parameters).
std::vector<StoredNegative> build_pretrain_negatives(
    const TrainConfig& cfg, const CorpusBundle& corpus,
    const InvertedIndex& by_response, const Seq2SeqModel& g1);

// Margin-ranking passes over the stored negatives; returns the mean hinge
// loss of the final pass.
double pretrain_ranker(MatchingModel& ranker, const CorpusBundle& corpus,
                       const TrainConfig& cfg,
                       const std::vector<StoredNegative>& negatives,
                       Optimizer& opt, int passes);

// One policy-gradient phase for the sequence generator: cfg.g1_steps
// batches from the generation set, rewards from the frozen discriminator
// (minus the running-mean baseline when configured), one reward-history
// entry per step.
void run_g1_steps(TrainState& st, const CorpusBundle& corpus);

// One policy-gradient phase for the ranking generator: cfg.g2_steps batches
// from the ranking set, pools built with the current frozen g1, h draws per
// example, rewards from the frozen discriminator.
void run_g2_steps(TrainState& st, const CorpusBundle& corpus);

// One discriminator phase: cfg.d_steps batches from the ranking set; per
// pair the stored pretraining negatives serve as genuine examples while
// fresh g1 samples and g2 pool draws serve as adversarial ones, all summed
// into a single counts-weighted objective.
void run_d_steps(TrainState& st, const CorpusBundle& corpus);

struct MinimaxOptions {
  // Epoch snapshots are written under checkpoint_dir/epoch_<n>/ when set.
  std::string checkpoint_dir;
  int pretrain_gen_passes = 12;
  int pretrain_rank_passes = 6;
};

// Full game: pretrain the generator and the ranker, clone the ranker into
// g2 and d, then run {g1, g2, d} phases for cfg.epochs epochs honoring the
// mode gates. Deterministic given (cfg, corpus).
TrainState run_minimax(const TrainConfig& cfg, const CorpusBundle& corpus,
                       const MinimaxOptions& opt = {});

// Continues a (possibly resumed) state up to target_epochs total epochs.
void advance_epochs(TrainState& st, const CorpusBundle& corpus,
                    int target_epochs, const MinimaxOptions& opt = {});

// Writes g1/g2/d checkpoints plus a sidecar with epoch, histories, audit,
// and the stored negatives into dir (created if missing).
void save_train_state(const TrainState& st, const std::string& dir);

// Rebuilds a state from a snapshot directory; the corpus must match the one
// the run was started with.
TrainState load_train_state(const std::string& dir,
                            const CorpusBundle& corpus);

enum class RankerChoice { D, G2 };

struct ServedResponse {
  std::vector<int> response;
  Provenance provenance = Provenance::Retrieved;
  // Deduplicated candidate union in presentation order.
  std::vector<Candidate> candidates;
  // Indices into `candidates`, best first.
  std::vector<RankedCandidate> ranked;
};

// Serving-side ensemble: top k_retrieved responses from the by-query index
// plus n_generated decodes (one greedy, the rest sampled), deduplicated
// with retrieval provenance winning, reranked by the chosen ranker. The
// top-1 becomes the response. An empty candidate union is a contract error;
// g1 may be null only when n_generated == 0.
ServedResponse ensemble_respond(const Seq2SeqModel* g1,
                                const MatchingModel& ranker,
                                const std::vector<QRPair>& retrieval_pool,
                                const InvertedIndex& by_query,
                                const std::vector<int>& query,
                                int k_retrieved, int n_generated,
                                size_t max_resp_len, uint64_t seed);

}  // namespace egan
