#pragma once

#include <cstdint>

#include "egan/adversarial.hpp"
#include "egan/metrics.hpp"

namespace egan {

struct EvalOptions {
  RankerChoice ranker = RankerChoice::D;
  int k_retrieved = 3;    // retrieval leg width when serving
  int n_generated = 2;    // generation leg width when serving
  int n_distractors = 5;  // precision distractors per test pair
  int embed_dim = 24;     // dimension of the seeded evaluation embeddings
  uint64_t seed = 0;
};

// Scores three serving systems over the corpus test set:
//   generation   greedy generator decodes (absent when the mode never
//                trains the generator),
//   retrieval    top-1 by-query retrieval, empty response on a miss,
//   ensemble     ensemble_respond with the chosen ranker,
// plus the ranker itself: precision at one against seeded distractor sets
// and the per-module ranking losses of the ensemble serving log. Overlap
// metrics are bleu1..bleu4; embedding metrics use a unit table seeded from
// the run seed. Deterministic given (state, corpus, options).
MetricsReport evaluate_system(const TrainState& st, const CorpusBundle& corpus,
                              const InvertedIndex& by_query,
                              const EvalOptions& opt = {});

}  // namespace egan
