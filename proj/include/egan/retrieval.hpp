#pragma once

#include <map>
#include <string>
#include <vector>

#include "egan/corpus.hpp"

namespace egan {

// Which side of each pair gets indexed. By-query serves user queries; the
// candidate sampler probes a by-response index with ground-truth responses.
enum class IndexMode { ByQuery, ByResponse };

struct Posting {
  int pair_id = -1;
  int tf = 0;
};

struct RetrievalHit {
  int pair_id = -1;
  double score = 0.0;
};

struct RetrievalResult {
  // Nonincreasing by score; equal scores ordered by ascending pair id.
  std::vector<RetrievalHit> hits;
  std::vector<int> probe;
};

// Log-scaled term frequency times smoothed inverse document frequency:
// (1 + ln tf) * (ln((1 + N) / (1 + df)) + 1). Requires tf >= 1 and
// 1 <= df <= n_docs.
double tfidf_weight(int tf, int df, int n_docs);

// Immutable bag-of-words index over one side of a pair collection. Reserved
// token ids (pad, bos, eos, unk) are never indexed, so documents holding
// nothing else are unreachable by retrieval.
class InvertedIndex {
 public:
  static InvertedIndex build(const std::vector<QRPair>& pool, IndexMode mode);

  // Cosine similarity between the probe's weighted vector and every indexed
  // document sharing at least one term, truncated to the best k. A probe with
  // no in-index terms yields an empty result. exclude_pair_id drops one
  // document from consideration; pass -1 to keep all.
  RetrievalResult retrieve_top_k(const std::vector<int>& probe, int k,
                                 int exclude_pair_id = -1) const;

  IndexMode mode() const { return mode_; }
  int doc_count() const { return n_docs_; }
  // Documents containing the token; 0 when the token is unindexed.
  int df_of(int token) const;
  // Weighted-vector norm of an indexed document; throws for unknown ids or
  // documents that had no content tokens.
  double norm_of(int pair_id) const;
  size_t term_count() const { return postings_.size(); }

  void save(const std::string& path) const;
  static InvertedIndex load(const std::string& path);

 private:
  IndexMode mode_ = IndexMode::ByQuery;
  int n_docs_ = 0;
  std::map<int, std::vector<Posting>> postings_;
  std::map<int, double> norms_;
};

}  // namespace egan
