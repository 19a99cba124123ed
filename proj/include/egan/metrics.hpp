#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "egan/candidates.hpp"
#include "egan/ranker.hpp"

namespace egan {

// Corpus-level n-gram overlap with brevity penalty: geometric mean of the
// modified precisions for orders 1..n, add-1 smoothed above order 1 so a
// single empty order does not annihilate the score. Order-1 precision 0
// yields exactly 0. Reserved tokens after the first EOS are not considered;
// the EOS itself is dropped from both sides.
double bleu_n(const std::vector<std::vector<int>>& candidates,
              const std::vector<std::vector<int>>& references, int n);

// Sentence-level variant averaged over pairs; kept for comparison against
// the corpus-level default.
double bleu_n_sentence_mean(const std::vector<std::vector<int>>& candidates,
                            const std::vector<std::vector<int>>& references,
                            int n);

// Fixed-dimension token vectors for the embedding-based metrics.
class EmbeddingTable {
 public:
  // Seeded unit vectors, one per token id in [0, vocab_size).
  static EmbeddingTable seeded_random(int vocab_size, int dim, uint64_t seed);
  // Text file, one line per token: "<id> <v0> <v1> ...". All rows must
  // share one dimension.
  static EmbeddingTable load(const std::string& path);

  bool contains(int token) const;
  const std::vector<double>& vector_of(int token) const;
  int dim() const { return dim_; }
  size_t size() const { return table_.size(); }

 private:
  int dim_ = 0;
  std::map<int, std::vector<double>> table_;
};

struct EmbeddingMetrics {
  double average = 0.0;        // cosine of sentence mean vectors
  double greedy_match = 0.0;   // symmetric greedy max-cosine alignment
  double vector_extrema = 0.0; // cosine of signed per-dimension extrema
  size_t skipped = 0;          // pairs with a side lacking in-table tokens
};

EmbeddingMetrics embedding_metrics(
    const std::vector<std::vector<int>>& candidates,
    const std::vector<std::vector<int>>& references,
    const EmbeddingTable& table);

struct PrecisionItem {
  std::vector<int> query;
  std::vector<int> truth;
  std::vector<std::vector<int>> distractors;
};

// Fraction of items whose ground truth strictly outranks every distractor;
// score ties count against the truth. Each item needs at least one
// distractor.
using ScoreFn = std::function<double(const std::vector<int>& query,
                                     const std::vector<int>& response)>;
double p_at_1(const ScoreFn& score, const std::vector<PrecisionItem>& items);
double p_at_1(const MatchingModel& ranker,
              const std::vector<PrecisionItem>& items);

// One served response with its provenance, logged for diagnostics.
struct ServingLogEntry {
  std::vector<int> query;
  std::vector<int> truth;
  std::vector<int> chosen;
  Provenance provenance = Provenance::Retrieved;
};

// Margin-ranking loss of the chosen responses against the ground truth,
// split by the module that produced them. A leg with no entries reports an
// absent loss and weight 0; the overall loss weights each present leg by
// its share of the log.
struct ModuleRankingLoss {
  std::optional<double> generation;
  std::optional<double> retrieval;
  std::optional<double> overall;
  double generation_share = 0.0;
  double retrieval_share = 0.0;
};

ModuleRankingLoss module_ranking_loss(const MatchingModel& ranker,
                                      const std::vector<ServingLogEntry>& log,
                                      double margin);

// system -> metric -> value, serialized one "system.metric = value" line
// per entry with keys sorted, for diffable regression baselines.
struct MetricsReport {
  std::map<std::string, std::map<std::string, double>> values;

  void set(const std::string& system, const std::string& metric, double v);
  std::string to_text() const;
  static MetricsReport parse_text(const std::string& text);
};

}  // namespace egan
