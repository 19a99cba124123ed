#include "egan/evaluate.hpp"

#include <map>
#include <string>
#include <vector>

#include "egan/rng.hpp"

namespace egan {
namespace {

constexpr uint64_t kSeedEvalTable = 0xe7ab;
constexpr uint64_t kSeedEvalServe = 0xe5e5;
constexpr uint64_t kSeedEvalItems = 0xe111;

void add_overlap(MetricsReport& report, const std::string& system,
                 const std::vector<std::vector<int>>& candidates,
                 const std::vector<std::vector<int>>& references,
                 const EmbeddingTable& table) {
  for (int n = 1; n <= 4; ++n)
    report.set(system, "bleu" + std::to_string(n),
               bleu_n(candidates, references, n));
  EmbeddingMetrics em = embedding_metrics(candidates, references, table);
  report.set(system, "embed_average", em.average);
  report.set(system, "embed_greedy", em.greedy_match);
  report.set(system, "embed_extrema", em.vector_extrema);
  report.set(system, "embed_skipped", static_cast<double>(em.skipped));
}

std::vector<int> content_only(const std::vector<int>& seq) {
  std::vector<int> out;
  for (int id : seq) {
    if (id == Vocab::kEos) break;
    out.push_back(id);
  }
  return out;
}

}  // namespace

MetricsReport evaluate_system(const TrainState& st, const CorpusBundle& corpus,
                              const InvertedIndex& by_query,
                              const EvalOptions& opt) {
  if (corpus.test_set.empty())
    throw ContractError("evaluate_system: the corpus test set is empty");
  if (by_query.mode() != IndexMode::ByQuery)
    throw ContractError("evaluate_system: index must be built by query");
  if (opt.k_retrieved < 0 || opt.n_generated < 0)
    throw ContractError("evaluate_system: negative candidate width");
  if (opt.n_distractors < 1)
    throw ContractError("evaluate_system: need at least one distractor");
  if (opt.embed_dim < 1)
    throw ContractError("evaluate_system: embedding dimension must be >= 1");

  const TrainConfig& cfg = st.config;
  const bool has_gen = cfg.mode != TrainMode::IrGan;
  const int n_gen = has_gen ? opt.n_generated : 0;
  if (opt.k_retrieved == 0 && n_gen == 0)
    throw ContractError("evaluate_system: both serving legs are empty");
  const MatchingModel& ranker = opt.ranker == RankerChoice::D ? st.d : st.g2;

  EmbeddingTable table = EmbeddingTable::seeded_random(
      static_cast<int>(corpus.vocab.size()), opt.embed_dim,
      mix_seed(cfg.seed, kSeedEvalTable, opt.seed));

  std::map<int, const QRPair*> pool_rows;
  for (const QRPair& p : corpus.retrieval_pool) pool_rows[p.pair_id] = &p;

  std::vector<std::vector<int>> references;
  references.reserve(corpus.test_set.size());
  for (const QRPair& p : corpus.test_set) references.push_back(p.response);

  MetricsReport report;

  if (has_gen) {
    std::vector<std::vector<int>> outputs;
    outputs.reserve(corpus.test_set.size());
    DecodeConfig dc;
    dc.max_len = cfg.max_response_len;
    for (const QRPair& p : corpus.test_set)
      outputs.push_back(st.g1.decode_sequence(p.query, DecodeMode::Greedy, dc));
    add_overlap(report, "generation", outputs, references, table);
  }

  {
    std::vector<std::vector<int>> outputs;
    outputs.reserve(corpus.test_set.size());
    for (const QRPair& p : corpus.test_set) {
      RetrievalResult r = by_query.retrieve_top_k(p.query, 1);
      if (r.hits.empty())
        outputs.push_back({Vocab::kEos});
      else
        outputs.push_back(pool_rows.at(r.hits[0].pair_id)->response);
    }
    add_overlap(report, "retrieval", outputs, references, table);
  }

  {
    std::vector<std::vector<int>> outputs;
    outputs.reserve(corpus.test_set.size());
    std::vector<ServingLogEntry> log;
    double misses = 0.0;
    for (const QRPair& p : corpus.test_set) {
      // Retrieval-only serving can come up empty for an out-of-index query;
      // count that as a miss instead of failing the whole evaluation.
      if (n_gen == 0 &&
          by_query.retrieve_top_k(p.query, opt.k_retrieved).hits.empty()) {
        outputs.push_back({Vocab::kEos});
        misses += 1.0;
        continue;
      }
      ServedResponse sr = ensemble_respond(
          has_gen ? &st.g1 : nullptr, ranker, corpus.retrieval_pool, by_query,
          p.query, opt.k_retrieved, n_gen,
          static_cast<size_t>(cfg.max_response_len),
          mix_seed(cfg.seed, kSeedEvalServe, opt.seed,
                   static_cast<uint64_t>(p.pair_id)));
      outputs.push_back(sr.response);
      log.push_back({p.query, p.response, sr.response, sr.provenance});
    }
    add_overlap(report, "ensemble", outputs, references, table);
    report.set("ensemble", "serve_misses", misses);

    ModuleRankingLoss ml = module_ranking_loss(ranker, log, cfg.margin);
    if (ml.generation) report.set("ranking", "loss_generation", *ml.generation);
    if (ml.retrieval) report.set("ranking", "loss_retrieval", *ml.retrieval);
    if (ml.overall) report.set("ranking", "loss_overall", *ml.overall);
    report.set("ranking", "share_generation", ml.generation_share);
    report.set("ranking", "share_retrieval", ml.retrieval_share);
  }

  {
    // Distinct pool responses, first appearance wins, keyed by content so a
    // distractor never aliases the ground truth under ranking.
    std::vector<const std::vector<int>*> distinct;
    std::map<std::vector<int>, size_t> seen;
    for (const QRPair& p : corpus.retrieval_pool) {
      std::vector<int> key = content_only(p.response);
      if (seen.emplace(std::move(key), distinct.size()).second)
        distinct.push_back(&p.response);
    }
    std::vector<PrecisionItem> items;
    items.reserve(corpus.test_set.size());
    for (const QRPair& p : corpus.test_set) {
      const std::vector<int> truth_key = content_only(p.response);
      size_t eligible = distinct.size();
      if (seen.count(truth_key)) --eligible;
      if (eligible < static_cast<size_t>(opt.n_distractors))
        throw ContractError(
            "evaluate_system: retrieval pool holds too few distinct "
            "responses for the requested distractor count");
      Rng rng(mix_seed(cfg.seed, kSeedEvalItems, opt.seed,
                       static_cast<uint64_t>(p.pair_id)));
      std::vector<size_t> order(distinct.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      PrecisionItem item;
      item.query = p.query;
      item.truth = p.response;
      for (size_t i = 0;
           i < order.size() &&
           item.distractors.size() < static_cast<size_t>(opt.n_distractors);
           ++i) {
        const std::vector<int>& cand = *distinct[order[i]];
        if (content_only(cand) == truth_key) continue;
        item.distractors.push_back(cand);
      }
      items.push_back(std::move(item));
    }
    report.set("ranking", "p_at_1", p_at_1(ranker, items));
  }

  return report;
}

}  // namespace egan
