#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "egan/errors.hpp"

namespace egan {

// Lowercases ASCII letters, splits on whitespace, and emits each ASCII
// punctuation character as its own token: "Hello there!" becomes
// ["hello", "there", "!"].
std::vector<std::string> tokenize(const std::string& text);

// Token table with four reserved ids.  Content tokens are admitted by
// descending frequency with lexicographic tie-breaking, capped so that the
// total size (reserved included) never exceeds the configured maximum.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReservedCount = 4;

  Vocab();

  static Vocab build(const std::vector<std::vector<std::string>>& docs,
                     size_t max_size);

  size_t size() const { return id_to_tok_.size(); }
  bool contains(const std::string& token) const;
  // Id of a token; unknown tokens map to kUnk.
  int id_of(const std::string& token) const;
  const std::string& token_of(int id) const;

  // Maps tokens to ids (unknown -> UNK), truncates to cap - 1 content
  // tokens, and appends EOS.  cap must be at least 2.
  std::vector<int> encode(std::span<const std::string> tokens,
                          size_t cap) const;
  // Inverts encode: collects tokens up to (excluding) the first EOS.
  // Ids outside the table raise ContractError.
  std::vector<std::string> decode(std::span<const int> ids) const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> id_to_tok_;
  std::map<std::string, int> tok_to_id_;
};

// One query-response pair in id space.  Both sequences end with EOS.
struct QRPair {
  std::vector<int> query;
  std::vector<int> response;
  int pair_id = -1;
};

struct CorpusCaps {
  size_t max_query_len = 12;
  size_t max_resp_len = 12;
};

enum class Partition { RetrievalPool, RankingSet, GenerationSet, TestSet };

// Vocabulary plus four pairwise-disjoint partitions.
struct CorpusBundle {
  Vocab vocab;
  std::vector<QRPair> retrieval_pool;
  std::vector<QRPair> ranking_set;
  std::vector<QRPair> generation_set;
  std::vector<QRPair> test_set;
  CorpusCaps caps;

  const std::vector<QRPair>& partition(Partition p) const;
  size_t total_pairs() const;

  // Writes vocab.txt plus one TSV per partition into dir (created if
  // missing).  Identical bundles serialize to identical bytes.
  void save(const std::string& dir) const;
  static CorpusBundle load(const std::string& dir, CorpusCaps caps = {});
};

struct TextPair {
  std::string query;
  std::string response;
};

struct TsvLoadResult {
  std::vector<TextPair> pairs;
  // 1-based line numbers that were skipped as malformed.
  std::vector<size_t> malformed_lines;
};

// Reads "query<TAB>response" lines.  Lines without exactly one tab or with
// an empty side are reported in malformed_lines and skipped.
TsvLoadResult load_pairs_tsv(const std::string& path);

struct SynthOptions {
  size_t vocab_max = 2000;
  CorpusCaps caps;
  double ratio_retrieval = 0.6;
  double ratio_ranking = 0.2;
  double ratio_generation = 0.1;
  double ratio_test = 0.1;
};

// Slot words assigned to one synthetic topic.
struct TopicWords {
  std::string subject;
  std::string attribute;
  std::string place;
};

// The per-topic slot fillers a given (seed, n_topics) run will use.
// Exposed so tests can verify topic consistency without replicating the
// generator internals.
std::vector<TopicWords> synthetic_topic_lexicon(uint64_t seed,
                                                size_t n_topics);

// Deterministic template-based dialogue corpus: every query asks about its
// topic's subject and every response describes the same subject.
// Partition sizes are floor(ratio * n) with the remainder assigned to the
// retrieval pool.
CorpusBundle generate_synthetic_corpus(uint64_t seed, size_t n_pairs,
                                       size_t n_topics,
                                       size_t paraphrases_per_topic,
                                       const SynthOptions& opt = {});

// Space-joined token text for a sequence (EOS and the tokens after it are
// dropped).
std::string text_of(const Vocab& vocab, std::span<const int> ids);

}  // namespace egan
