#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "egan/errors.hpp"
#include "egan/metrics.hpp"
#include "egan/rng.hpp"

using namespace egan;

namespace {

constexpr int kEos = 2;
using Seqs = std::vector<std::vector<int>>;

struct TempFile {
  std::string path;
  explicit TempFile(std::string p, const std::string& content)
      : path(std::move(p)) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("perfect overlap scores exactly one at every order") {
  Seqs refs = {{4, 5, 6, 7, kEos}, {8, 9, 10, 11, 12, kEos}};
  for (int n = 1; n <= 4; ++n) CHECK(bleu_n(refs, refs, n) == 1.0);
}

TEST_CASE("disjoint corpora score exactly zero") {
  Seqs cand = {{4, 5, kEos}};
  Seqs ref = {{6, 7, kEos}};
  for (int n = 1; n <= 4; ++n) CHECK(bleu_n(cand, ref, n) == 0.0);
}

TEST_CASE("hand-counted unigram and bigram precision") {
  // "a b c" vs "a b d": 2 of 3 unigrams match.
  Seqs cand = {{4, 5, 6, kEos}};
  Seqs ref = {{4, 5, 7, kEos}};
  CHECK(bleu_n(cand, ref, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  // Bigrams: {ab, bc} vs {ab, bd} -> smoothed (1+1)/(2+1); geometric mean
  // with the unsmoothed 2/3 unigram precision lands back on 2/3.
  CHECK(bleu_n(cand, ref, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("brevity penalty and clipping follow the textbook forms") {
  Seqs short_cand = {{4, kEos}};
  Seqs long_ref = {{4, 5, kEos}};
  CHECK(bleu_n(short_cand, long_ref, 1) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  Seqs repeat = {{4, 4, 4, kEos}};
  Seqs once = {{4, kEos}};
  CHECK(bleu_n(repeat, once, 1) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("corpus pooling differs from sentence averaging as designed") {
  Seqs cand = {{4, 5, 6, kEos}, {8, 9, kEos}};
  Seqs ref = {{4, 5, 7, kEos}, {10, 11, kEos}};
  // Pooled: (2+0)/(3+2) = 0.4; averaged: (2/3 + 0)/2 = 1/3.
  CHECK(bleu_n(cand, ref, 1) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(bleu_n_sentence_mean(cand, ref, 1) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("pair order cannot change the corpus score") {
  Seqs cand = {{4, 5, kEos}, {6, 7, 8, kEos}, {9, kEos}};
  Seqs ref = {{4, 9, kEos}, {6, 7, 10, kEos}, {9, 4, kEos}};
  Seqs cand_r(cand.rbegin(), cand.rend());
  Seqs ref_r(ref.rbegin(), ref.rend());
  for (int n = 1; n <= 4; ++n)
    CHECK(bleu_n(cand, ref, n) == bleu_n(cand_r, ref_r, n));
}

TEST_CASE("tokens after the terminator are invisible to the metric") {
  Seqs with_tail = {{4, 5, kEos, 9, 9}};
  Seqs plain = {{4, 5, kEos}};
  Seqs ref = {{4, 6, kEos}};
  CHECK(bleu_n(with_tail, ref, 2) == bleu_n(plain, ref, 2));

  Seqs empty_cand = {{kEos}};
  CHECK(bleu_n(empty_cand, ref, 1) == 0.0);
}

TEST_CASE("bleu input contracts") {
  Seqs one = {{4, kEos}};
  CHECK_THROWS_AS(bleu_n(one, one, 0), ContractError);
  CHECK_THROWS_AS(bleu_n(one, one, 5), ContractError);
  CHECK_THROWS_AS(bleu_n(one, {}, 1), ContractError);
}

TEST_CASE("seeded embedding tables hold deterministic unit vectors") {
  EmbeddingTable t = EmbeddingTable::seeded_random(20, 16, 5);
  CHECK(t.size() == 20);
  CHECK(t.dim() == 16);
  for (int id = 0; id < 20; ++id) {
    REQUIRE(t.contains(id));
    double norm = 0.0;
    for (double x : t.vector_of(id)) norm += x * x;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
  }
  EmbeddingTable same = EmbeddingTable::seeded_random(20, 16, 5);
  CHECK(same.vector_of(7) == t.vector_of(7));
  EmbeddingTable other = EmbeddingTable::seeded_random(20, 16, 6);
  CHECK(other.vector_of(7) != t.vector_of(7));
  CHECK(!t.contains(99));
  CHECK_THROWS_AS(t.vector_of(99), ContractError);
}

TEST_CASE("embedding tables load from token-per-line text") {
  TempFile f("emb_ok_tmp.txt", "4 1 0\n5 0 1\n\n6 0.5 0.5\n");
  EmbeddingTable t = EmbeddingTable::load(f.path);
  CHECK(t.size() == 3);
  CHECK(t.dim() == 2);
  CHECK(t.vector_of(5) == std::vector<double>{0.0, 1.0});

  TempFile bad_dim("emb_dim_tmp.txt", "4 1 0\n5 1\n");
  CHECK_THROWS_AS(EmbeddingTable::load(bad_dim.path), FormatError);
  TempFile bad_id("emb_id_tmp.txt", "x 1 0\n");
  CHECK_THROWS_AS(EmbeddingTable::load(bad_id.path), FormatError);
  TempFile empty("emb_empty_tmp.txt", "");
  CHECK_THROWS_AS(EmbeddingTable::load(empty.path), FormatError);
  CHECK_THROWS_AS(EmbeddingTable::load("no_such_table.txt"), IoError);
}

TEST_CASE("self-comparison drives every embedding metric to one") {
  EmbeddingTable t = EmbeddingTable::seeded_random(30, 8, 11);
  Seqs seqs = {{4, 9, 12, kEos}, {5, kEos}, {20, 21, 22, 23, kEos}};
  EmbeddingMetrics m = embedding_metrics(seqs, seqs, t);
  CHECK(m.skipped == 0);
  CHECK(m.average == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.greedy_match == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.vector_extrema == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("orthogonal one-token sentences are uncorrelated") {
  TempFile f("emb_orth_tmp.txt", "4 1 0\n5 0 1\n");
  EmbeddingTable t = EmbeddingTable::load(f.path);
  EmbeddingMetrics m = embedding_metrics({{4, kEos}}, {{5, kEos}}, t);
  CHECK(m.average == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(m.greedy_match == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(m.vector_extrema == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("two-token toy matches the hand-evaluated formulas") {
  TempFile f("emb_toy_tmp.txt", "4 1 0\n5 0 1\n6 0.6 0.8\n");
  EmbeddingTable t = EmbeddingTable::load(f.path);
  EmbeddingMetrics m = embedding_metrics({{4, 5, kEos}}, {{4, 6, kEos}}, t);
  // Means (0.5, 0.5) vs (0.8, 0.4).
  double ea = 0.6 / (std::sqrt(0.5) * std::sqrt(0.8));
  // Greedy alignments: forward (1 + 0.8)/2, backward (1 + 0.8)/2.
  double gm = 0.9;
  // Extrema (1, 1) vs (1, 0.8).
  double ve = 1.8 / (std::sqrt(2.0) * std::sqrt(1.64));
  CHECK(m.average == doctest::Approx(ea).epsilon(1e-9));
  CHECK(m.greedy_match == doctest::Approx(gm).epsilon(1e-9));
  CHECK(m.vector_extrema == doctest::Approx(ve).epsilon(1e-9));
  CHECK(m.skipped == 0);
}

TEST_CASE("pairs without in-table tokens are skipped and tallied") {
  TempFile f("emb_skip_tmp.txt", "4 1 0\n");
  EmbeddingTable t = EmbeddingTable::load(f.path);
  EmbeddingMetrics lone = embedding_metrics({{5, kEos}}, {{4, kEos}}, t);
  CHECK(lone.skipped == 1);
  CHECK(lone.average == 0.0);

  EmbeddingMetrics mixed =
      embedding_metrics({{5, kEos}, {4, kEos}}, {{4, kEos}, {4, kEos}}, t);
  CHECK(mixed.skipped == 1);
  CHECK(mixed.average == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("precision at one with oracle and adversarial scorers") {
  std::vector<int> truth = {4, kEos};
  std::vector<PrecisionItem> items;
  for (int i = 0; i < 5; ++i)
    items.push_back({{8, kEos}, truth, {{5, kEos}, {6, kEos}}});

  ScoreFn oracle = [&truth](const std::vector<int>&,
                            const std::vector<int>& r) {
    return r == truth ? 1.0 : 0.0;
  };
  CHECK(p_at_1(oracle, items) == 1.0);

  ScoreFn inverted = [&truth](const std::vector<int>&,
                              const std::vector<int>& r) {
    return r == truth ? -1.0 : 0.0;
  };
  CHECK(p_at_1(inverted, items) == 0.0);

  ScoreFn constant = [](const std::vector<int>&, const std::vector<int>&) {
    return 0.25;
  };
  CHECK(p_at_1(constant, items) == 0.0);  // ties count against the truth

  CHECK_THROWS_AS(p_at_1(oracle, {}), ContractError);
  std::vector<PrecisionItem> no_distractor = {{{8, kEos}, truth, {}}};
  CHECK_THROWS_AS(p_at_1(oracle, no_distractor), ContractError);
}

TEST_CASE("random scorer over one distractor sits near one half") {
  std::vector<PrecisionItem> items;
  for (int i = 0; i < 10000; ++i)
    items.push_back({{8, kEos}, {4, kEos}, {{5, kEos}}});
  Rng rng(404);
  ScoreFn random_score = [&rng](const std::vector<int>&,
                                const std::vector<int>&) {
    return rng.uniform01();
  };
  double p = p_at_1(random_score, items);
  CHECK(p > 0.5 - 0.015);  // 3 sigma of Bernoulli(0.5, n=10000)
  CHECK(p < 0.5 + 0.015);
}

TEST_CASE("module ranking loss splits hinges by provenance") {
  MatchingModel ranker(30, 6, 6, 0.0, 9);
  std::vector<int> q = {4, 5, kEos};
  std::vector<int> truth = {6, 7, kEos};

  // Choices equal to the truth keep the scores tied: hinge = margin.
  std::vector<ServingLogEntry> tied = {
      {q, truth, truth, Provenance::Retrieved},
      {q, truth, truth, Provenance::Retrieved},
      {q, truth, truth, Provenance::Synthetic},
  };
  ModuleRankingLoss tied_loss = module_ranking_loss(ranker, tied, 1.0);
  REQUIRE(tied_loss.generation.has_value());
  REQUIRE(tied_loss.retrieval.has_value());
  CHECK(*tied_loss.generation == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*tied_loss.retrieval == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*tied_loss.overall == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tied_loss.retrieval_share == doctest::Approx(2.0 / 3.0));
  CHECK(tied_loss.generation_share == doctest::Approx(1.0 / 3.0));

  ModuleRankingLoss empty = module_ranking_loss(ranker, {}, 1.0);
  CHECK(!empty.generation.has_value());
  CHECK(!empty.retrieval.has_value());
  CHECK(!empty.overall.has_value());
  CHECK(empty.generation_share == 0.0);
  CHECK(empty.retrieval_share == 0.0);

  std::vector<ServingLogEntry> skewed = {
      {q, truth, {8, kEos}, Provenance::Retrieved},
      {q, truth, {9, kEos}, Provenance::Retrieved},
      {q, truth, {10, kEos}, Provenance::Retrieved},
      {q, truth, {11, kEos}, Provenance::Synthetic},
  };
  ModuleRankingLoss skewat = module_ranking_loss(ranker, skewed, 1.0);
  CHECK(skewat.retrieval_share == 0.75);
  CHECK(skewat.generation_share == 0.25);
  CHECK(*skewat.overall ==
        doctest::Approx(0.75 * *skewat.retrieval + 0.25 * *skewat.generation)
            .epsilon(1e-12));

  std::vector<ServingLogEntry> lone = {
      {q, truth, {8, kEos}, Provenance::Synthetic}};
  ModuleRankingLoss only_gen = module_ranking_loss(ranker, lone, 1.0);
  CHECK(!only_gen.retrieval.has_value());
  CHECK(only_gen.generation_share == 1.0);
  CHECK(*only_gen.overall == *only_gen.generation);

  std::vector<ServingLogEntry> bad = {
      {q, truth, {8, kEos}, Provenance::Random}};
  CHECK_THROWS_AS(module_ranking_loss(ranker, bad, 1.0), ContractError);
  CHECK_THROWS_AS(module_ranking_loss(ranker, tied, 0.0), ContractError);
}

TEST_CASE("report serialization is sorted and round-trips") {
  MetricsReport r;
  r.set("retrieval", "bleu1", 0.25);
  r.set("ensemblegan", "p_at_1", 0.75);
  r.set("ensemblegan", "bleu1", 0.5);
  std::string text = r.to_text();
  CHECK(text ==
        "ensemblegan.bleu1 = 0.5\n"
        "ensemblegan.p_at_1 = 0.75\n"
        "retrieval.bleu1 = 0.25\n");

  MetricsReport back = MetricsReport::parse_text(text);
  CHECK(back.values == r.values);

  CHECK_THROWS_AS(r.set("a.b", "c", 1.0), ContractError);
  CHECK_THROWS_AS(r.set("a", "c d", 1.0), ContractError);
  CHECK_THROWS_AS(r.set("", "c", 1.0), ContractError);
  CHECK_THROWS_AS(r.set("a", "c", std::nan("")), ContractError);
  CHECK_THROWS_AS(MetricsReport::parse_text("no separator\n"), FormatError);
  CHECK_THROWS_AS(MetricsReport::parse_text("a.b = xyz\n"), FormatError);
}
