#include "egan/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "egan/errors.hpp"
#include "egan/serialize.hpp"

namespace egan {

namespace {

constexpr char kMagic[] = "EGIDX1";
constexpr size_t kMagicLen = 6;

// Term frequencies of the content tokens of one document.
std::map<int, int> content_tf(const std::vector<int>& ids) {
  std::map<int, int> tf;
  for (int id : ids)
    if (id >= Vocab::kReservedCount) ++tf[id];
  return tf;
}

}  // namespace

double tfidf_weight(int tf, int df, int n_docs) {
  if (tf < 1)
    throw ContractError("tfidf_weight: tf must be at least 1, got " +
                        std::to_string(tf));
  if (df < 1 || df > n_docs)
    throw ContractError("tfidf_weight: df must be in [1, " +
                        std::to_string(n_docs) + "], got " +
                        std::to_string(df));
  double idf = std::log((1.0 + n_docs) / (1.0 + df)) + 1.0;
  return (1.0 + std::log(static_cast<double>(tf))) * idf;
}

InvertedIndex InvertedIndex::build(const std::vector<QRPair>& pool,
                                   IndexMode mode) {
  if (pool.empty()) throw ContractError("build_index: empty pool");
  InvertedIndex idx;
  idx.mode_ = mode;
  idx.n_docs_ = static_cast<int>(pool.size());

  std::set<int> seen_ids;
  std::map<int, std::map<int, int>> doc_tfs;
  for (const auto& p : pool) {
    if (!seen_ids.insert(p.pair_id).second)
      throw ContractError("build_index: duplicate pair id " +
                          std::to_string(p.pair_id));
    const auto& side = mode == IndexMode::ByQuery ? p.query : p.response;
    auto tf = content_tf(side);
    for (const auto& [tok, count] : tf)
      idx.postings_[tok].push_back({p.pair_id, count});
    if (!tf.empty()) doc_tfs.emplace(p.pair_id, std::move(tf));
  }
  for (auto& [tok, plist] : idx.postings_)
    std::sort(plist.begin(), plist.end(),
              [](const Posting& a, const Posting& b) {
                return a.pair_id < b.pair_id;
              });
  for (const auto& [pid, tf] : doc_tfs) {
    double sumsq = 0.0;
    for (const auto& [tok, count] : tf) {
      double w = tfidf_weight(count, idx.df_of(tok), idx.n_docs_);
      sumsq += w * w;
    }
    idx.norms_[pid] = std::sqrt(sumsq);
  }
  return idx;
}

int InvertedIndex::df_of(int token) const {
  auto it = postings_.find(token);
  return it == postings_.end() ? 0 : static_cast<int>(it->second.size());
}

double InvertedIndex::norm_of(int pair_id) const {
  auto it = norms_.find(pair_id);
  if (it == norms_.end())
    throw ContractError("norm_of: pair id " + std::to_string(pair_id) +
                        " has no indexed content");
  return it->second;
}

RetrievalResult InvertedIndex::retrieve_top_k(const std::vector<int>& probe,
                                              int k,
                                              int exclude_pair_id) const {
  if (k < 1)
    throw ContractError("retrieve_top_k: k must be at least 1, got " +
                        std::to_string(k));
  RetrievalResult out;
  out.probe = probe;

  std::map<int, int> probe_tf;
  for (const auto& [tok, count] : content_tf(probe))
    if (df_of(tok) > 0) probe_tf[tok] = count;
  if (probe_tf.empty()) return out;

  double qnorm_sq = 0.0;
  std::map<int, double> dot;
  for (const auto& [tok, count] : probe_tf) {
    int df = df_of(tok);
    double wq = tfidf_weight(count, df, n_docs_);
    qnorm_sq += wq * wq;
    for (const auto& p : postings_.at(tok)) {
      if (p.pair_id == exclude_pair_id) continue;
      dot[p.pair_id] += wq * tfidf_weight(p.tf, df, n_docs_);
    }
  }
  double qnorm = std::sqrt(qnorm_sq);

  out.hits.reserve(dot.size());
  for (const auto& [pid, d] : dot)
    out.hits.push_back({pid, d / (qnorm * norms_.at(pid))});
  std::sort(out.hits.begin(), out.hits.end(),
            [](const RetrievalHit& a, const RetrievalHit& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.pair_id < b.pair_id;
            });
  if (out.hits.size() > static_cast<size_t>(k)) out.hits.resize(k);
  return out;
}

void InvertedIndex::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("index file: cannot write " + path);
  f.write(kMagic, kMagicLen);
  char mode_byte = mode_ == IndexMode::ByQuery ? 0 : 1;
  f.write(&mode_byte, 1);
  write_u64_le(f, static_cast<uint64_t>(n_docs_));
  write_u64_le(f, postings_.size());
  for (const auto& [tok, plist] : postings_) {
    write_u64_le(f, static_cast<uint64_t>(tok));
    write_u64_le(f, plist.size());
    for (const auto& p : plist) {
      write_u64_le(f, static_cast<uint64_t>(p.pair_id));
      write_u64_le(f, static_cast<uint64_t>(p.tf));
    }
  }
  write_u64_le(f, norms_.size());
  for (const auto& [pid, norm] : norms_) {
    write_u64_le(f, static_cast<uint64_t>(pid));
    std::string hex = double_to_hex(norm);
    f.write(hex.data(), 16);
  }
  if (!f) throw IoError("index file: write failed for " + path);
}

InvertedIndex InvertedIndex::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("index file: cannot read " + path);
  char magic[kMagicLen];
  f.read(magic, kMagicLen);
  if (f.gcount() != static_cast<std::streamsize>(kMagicLen) ||
      std::string(magic, kMagicLen) != kMagic)
    throw FormatError("index file: bad magic in " + path);
  char mode_byte;
  f.read(&mode_byte, 1);
  if (f.gcount() != 1)
    throw CorruptionError("index file: unexpected end of file");
  if (mode_byte != 0 && mode_byte != 1)
    throw FormatError("index file: unknown mode byte " +
                      std::to_string(static_cast<int>(mode_byte)));

  InvertedIndex idx;
  idx.mode_ = mode_byte == 0 ? IndexMode::ByQuery : IndexMode::ByResponse;
  idx.n_docs_ = static_cast<int>(read_u64_le(f, "index file"));
  uint64_t n_terms = read_u64_le(f, "index file");
  for (uint64_t t = 0; t < n_terms; ++t) {
    int tok = static_cast<int>(read_u64_le(f, "index file"));
    uint64_t n_post = read_u64_le(f, "index file");
    if (n_post == 0 || n_post > static_cast<uint64_t>(idx.n_docs_))
      throw CorruptionError("index file: implausible posting count for token " +
                            std::to_string(tok));
    auto& plist = idx.postings_[tok];
    plist.reserve(n_post);
    for (uint64_t i = 0; i < n_post; ++i) {
      int pid = static_cast<int>(read_u64_le(f, "index file"));
      int tf = static_cast<int>(read_u64_le(f, "index file"));
      if (tf < 1)
        throw CorruptionError("index file: nonpositive term frequency");
      plist.push_back({pid, tf});
    }
  }
  uint64_t n_norms = read_u64_le(f, "index file");
  for (uint64_t i = 0; i < n_norms; ++i) {
    int pid = static_cast<int>(read_u64_le(f, "index file"));
    char hex[16];
    f.read(hex, 16);
    if (f.gcount() != 16)
      throw CorruptionError("index file: unexpected end of file");
    idx.norms_[pid] = hex_to_double(std::string(hex, 16), "index file");
  }
  if (f.peek() != std::ifstream::traits_type::eof())
    throw CorruptionError("index file: trailing data in " + path);
  return idx;
}

}  // namespace egan
