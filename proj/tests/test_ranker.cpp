#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "egan/ranker.hpp"
#include "egan/rng.hpp"
#include "egan/stats.hpp"

using namespace egan;

namespace {

constexpr int kEos = 2;

void zero_params(MatchingModel& m) {
  for (Parameter* p : m.params().all())
    std::fill(p->value.begin(), p->value.end(), 0.0);
}

std::vector<double> flat_values(const MatchingModel& m) {
  std::vector<double> out;
  for (const Parameter* p : m.params().all())
    out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

std::vector<double> flat_grads(const MatchingModel& m) {
  std::vector<double> out;
  for (const Parameter* p : m.params().all()) {
    if (p->grad.empty())
      out.insert(out.end(), p->numel(), 0.0);
    else
      out.insert(out.end(), p->grad.begin(), p->grad.end());
  }
  return out;
}

CandidatePool make_pool(std::vector<std::vector<int>> responses,
                        std::vector<Provenance> prov = {}) {
  CandidatePool pool;
  for (size_t i = 0; i < responses.size(); ++i) {
    Candidate c;
    c.response = std::move(responses[i]);
    c.provenance = i < prov.size() ? prov[i] : Provenance::Random;
    pool.members.push_back(std::move(c));
  }
  return pool;
}

std::vector<int> rand_seq(Rng& rng, int len, int lo, int hi) {
  std::vector<int> out;
  for (int i = 0; i < len; ++i)
    out.push_back(lo + static_cast<int>(rng.uniform_index(
                           static_cast<size_t>(hi - lo + 1))));
  out.push_back(kEos);
  return out;
}

}  // namespace

TEST_CASE("zero model scores zero and ranks in input order") {
  MatchingModel m(16, 5, 6, 0.0, 7);
  zero_params(m);
  CHECK(m.score({4, 5, kEos}, {6, kEos}) == 0.0);
  CHECK(m.score({9, kEos}, {4, 7, 8, kEos}) == 0.0);
  CHECK(m.pair_prob({4, kEos}, {5, kEos}, {6, 7, kEos}) == 0.5);
  CHECK(m.reward({4, kEos}, {5, kEos}, {6, kEos}) == 0.0);

  auto ranked = m.rank_candidates({4, kEos}, {{5, kEos}, {6, kEos}, {7, kEos}});
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].index == 0);
  CHECK(ranked[1].index == 1);
  CHECK(ranked[2].index == 2);
}

TEST_CASE("score is deterministic and seeded construction reproducible") {
  MatchingModel a(20, 6, 8, 0.0, 99);
  MatchingModel b(20, 6, 8, 0.0, 99);
  CHECK(flat_values(a) == flat_values(b));
  std::vector<int> q = {4, 9, kEos}, r = {11, 5, kEos};
  CHECK(a.score(q, r) == a.score(q, r));
  CHECK(a.score(q, r) == b.score(q, r));

  MatchingModel c(20, 6, 8, 0.0, 100);
  CHECK(flat_values(a) != flat_values(c));
}

TEST_CASE("pair_prob is the sigmoid of the score difference") {
  MatchingModel m(20, 6, 8, 0.0, 3);
  Rng rng(41);
  for (int i = 0; i < 20; ++i) {
    auto q = rand_seq(rng, 3, 4, 19);
    auto r1 = rand_seq(rng, 2, 4, 19);
    auto r2 = rand_seq(rng, 4, 4, 19);
    double d = m.score(q, r1) - m.score(q, r2);
    double expect = 1.0 / (1.0 + std::exp(-d));
    CHECK(m.pair_prob(q, r1, r2) == doctest::Approx(expect).epsilon(1e-12));
    // Antisymmetry
    CHECK(std::fabs(m.pair_prob(q, r1, r2) + m.pair_prob(q, r2, r1) - 1.0) <=
          1e-12);
  }
}

TEST_CASE("reward is the scaled pair probability and bounded") {
  MatchingModel m(20, 6, 8, 0.0, 5);
  Rng rng(17);
  for (int i = 0; i < 25; ++i) {
    auto q = rand_seq(rng, 3, 4, 19);
    auto a = rand_seq(rng, 3, 4, 19);
    auto b = rand_seq(rng, 3, 4, 19);
    double p = m.pair_prob(q, a, b);
    double r = m.reward(q, a, b);
    CHECK(r == doctest::Approx(2.0 * p - 1.0).epsilon(1e-14));
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
    // Same response on both sides scores identically: reward exactly zero.
    CHECK(m.reward(q, a, a) == 0.0);
    double lp = m.reward(q, a, b, RewardForm::LogProb);
    CHECK(lp == doctest::Approx(std::log(p)).epsilon(1e-12));
    CHECK(lp < 0.0);
    CHECK(lp >= std::log(1e-7));
  }
}

TEST_CASE("empty sequences are contract errors") {
  MatchingModel m(16, 4, 4, 0.0, 1);
  CHECK_THROWS_AS((void)m.score({}, {4, kEos}), ContractError);
  CHECK_THROWS_AS((void)m.score({4, kEos}, {}), ContractError);
  CHECK_THROWS_AS(MatchingModel(0, 4, 4, 0.0, 1), ContractError);
  CHECK_THROWS_AS(MatchingModel(16, 4, 4, 1.0, 1), ContractError);
}

TEST_CASE("hinge step returns the pre-update mean hinge loss") {
  MatchingModel m(20, 6, 8, 0.0, 11);
  Rng rng(23);
  std::vector<RankExample> batch;
  for (int i = 0; i < 6; ++i)
    batch.push_back({rand_seq(rng, 3, 4, 19), rand_seq(rng, 3, 4, 19),
                     rand_seq(rng, 3, 4, 19)});
  double margin = 1.0;
  double expect = 0.0;
  for (const auto& ex : batch) {
    double gp = m.score(ex.query, ex.positive);
    double gn = m.score(ex.query, ex.negative);
    expect += std::max(0.0, margin + gn - gp);
  }
  expect /= static_cast<double>(batch.size());

  Optimizer opt({OptKind::Sgd, 0.01, 0.9, 0.999, 1e-8, 0.0});
  double loss = m.hinge_pretrain_step(batch, margin, opt, 1);
  CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
  CHECK(opt.step_count() == 1);

  CHECK_THROWS_AS((void)m.hinge_pretrain_step({}, 1.0, opt, 1),
                  ContractError);
  CHECK_THROWS_AS((void)m.hinge_pretrain_step(batch, 0.0, opt, 1),
                  ContractError);
}

TEST_CASE("zero model hinge equals the margin exactly") {
  MatchingModel m(16, 4, 4, 0.0, 2);
  zero_params(m);
  Optimizer opt({OptKind::Sgd, 0.0, 0.9, 0.999, 1e-8, 0.0});
  std::vector<RankExample> batch = {{{4, kEos}, {5, kEos}, {6, kEos}},
                                    {{7, kEos}, {8, kEos}, {9, kEos}}};
  CHECK(m.hinge_pretrain_step(batch, 1.0, opt, 1) == 1.0);
  CHECK(m.hinge_pretrain_step(batch, 0.25, opt, 2) == 0.25);
}

TEST_CASE("hinge training separates a marked toy task") {
  MatchingModel m(16, 8, 10, 0.0, 77);
  Optimizer opt({OptKind::Adam, 0.01, 0.9, 0.999, 1e-8, 5.0});
  Rng rng(301);
  auto draw_example = [&](Rng& r) {
    RankExample ex;
    ex.query = rand_seq(r, 3, 4, 9);
    ex.positive = {10, 4 + static_cast<int>(r.uniform_index(6)), kEos};
    ex.negative = rand_seq(r, 2, 11, 15);
    return ex;
  };
  for (int step = 0; step < 300; ++step) {
    std::vector<RankExample> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(draw_example(rng));
    m.hinge_pretrain_step(batch, 1.0, opt, 1000 + static_cast<uint64_t>(step));
  }
  Rng heldout(999);
  int correct = 0;
  for (int i = 0; i < 50; ++i) {
    auto ex = draw_example(heldout);
    if (m.pair_prob(ex.query, ex.positive, ex.negative) > 0.5) ++correct;
  }
  CHECK(correct >= 48);  // 0.95 of 50, rounded up

  // A well-separated pair satisfies the margin: loss contribution zero.
  auto ex = draw_example(heldout);
  double gp = m.score(ex.query, ex.positive);
  double gn = m.score(ex.query, ex.negative);
  if (gp - gn > 1.0) {
    Optimizer frozen({OptKind::Sgd, 0.0, 0.9, 0.999, 1e-8, 0.0});
    CHECK(m.hinge_pretrain_step({ex}, 1.0, frozen, 5) == 0.0);
  }
}

TEST_CASE("d_update loss matches the clamped log objective") {
  MatchingModel m(20, 6, 8, 0.0, 13);
  Rng rng(71);
  std::vector<RankExample> pos, adv;
  for (int i = 0; i < 3; ++i) {
    pos.push_back({rand_seq(rng, 3, 4, 19), rand_seq(rng, 3, 4, 19),
                   rand_seq(rng, 3, 4, 19)});
    adv.push_back({rand_seq(rng, 3, 4, 19), rand_seq(rng, 3, 4, 19),
                   rand_seq(rng, 3, 4, 19)});
  }
  double expect = 0.0;
  for (const auto& ex : pos)
    expect -= std::log(m.pair_prob(ex.query, ex.positive, ex.negative));
  for (const auto& ex : adv)
    expect -= std::log(1.0 - m.pair_prob(ex.query, ex.negative, ex.positive));

  Optimizer opt({OptKind::Sgd, 0.0, 0.9, 0.999, 1e-8, 0.0});
  double loss = m.d_update(pos, adv, opt, 3);
  CHECK(loss == doctest::Approx(expect).epsilon(1e-9));
  CHECK_THROWS_AS((void)m.d_update({}, adv, opt, 1), ContractError);
  CHECK_THROWS_AS((void)m.d_update(pos, {}, opt, 1), ContractError);
}

TEST_CASE("zero model d_update loss is 2 ln 2 per positive-adversarial pair") {
  MatchingModel m(16, 4, 4, 0.0, 4);
  zero_params(m);
  Optimizer opt({OptKind::Sgd, 0.0, 0.9, 0.999, 1e-8, 0.0});
  std::vector<RankExample> pos = {{{4, kEos}, {5, kEos}, {6, kEos}}};
  std::vector<RankExample> adv = {{{7, kEos}, {8, kEos}, {9, kEos}}};
  CHECK(m.d_update(pos, adv, opt, 1) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("d_update pushes truth up and generated claims down") {
  MatchingModel m(20, 6, 8, 0.0, 31);
  std::vector<int> q = {4, 5, kEos};
  std::vector<RankExample> pos = {{q, {6, 7, kEos}, {8, 9, kEos}}};
  std::vector<RankExample> adv = {{q, {6, 7, kEos}, {10, 11, kEos}}};
  double p_pos_before = m.pair_prob(q, {6, 7, kEos}, {8, 9, kEos});
  double p_claim_before = m.pair_prob(q, {10, 11, kEos}, {6, 7, kEos});
  Optimizer opt({OptKind::Sgd, 0.05, 0.9, 0.999, 1e-8, 0.0});
  m.d_update(pos, adv, opt, 9);
  CHECK(m.pair_prob(q, {6, 7, kEos}, {8, 9, kEos}) > p_pos_before);
  CHECK(m.pair_prob(q, {10, 11, kEos}, {6, 7, kEos}) < p_claim_before);
}

TEST_CASE("d_update separates truth from unmarked fakes") {
  MatchingModel m(16, 8, 10, 0.0, 55);
  Optimizer opt({OptKind::Adam, 0.01, 0.9, 0.999, 1e-8, 5.0});
  Rng rng(401);
  auto draw_pos = [&](Rng& r) {
    RankExample ex;
    ex.query = rand_seq(r, 3, 4, 9);
    ex.positive = {10, 4 + static_cast<int>(r.uniform_index(6)), kEos};
    ex.negative = rand_seq(r, 2, 11, 15);
    return ex;
  };
  for (int step = 0; step < 300; ++step) {
    std::vector<RankExample> pos, adv;
    for (int i = 0; i < 4; ++i) {
      pos.push_back(draw_pos(rng));
      adv.push_back(draw_pos(rng));  // same structure: fake lacks the marker
    }
    m.d_update(pos, adv, opt, 2000 + static_cast<uint64_t>(step));
  }
  Rng heldout(888);
  int correct = 0;
  for (int i = 0; i < 50; ++i) {
    auto ex = draw_pos(heldout);
    if (m.pair_prob(ex.query, ex.positive, ex.negative) > 0.5) ++correct;
  }
  CHECK(correct >= 48);
}

TEST_CASE("g2 distribution is a softmax over pool scores") {
  MatchingModel m(16, 5, 6, 0.0, 21);
  std::vector<int> q = {4, 5, kEos};
  auto pool = make_pool({{6, kEos}, {7, kEos}, {8, 9, kEos}, {10, kEos}});

  auto dist = m.g2_distribution(q, pool);
  REQUIRE(dist.size() == 4);
  double sum = 0.0;
  std::vector<double> scores;
  for (const auto& mem : pool.members) scores.push_back(m.score(q, mem.response));
  auto expect = softmax_stable(scores);
  for (size_t i = 0; i < dist.size(); ++i) {
    CHECK(dist[i] == doctest::Approx(expect[i]).epsilon(1e-14));
    CHECK(dist[i] > 0.0);
    sum += dist[i];
  }
  CHECK(std::fabs(sum - 1.0) <= 1e-12);

  CandidatePool empty;
  CHECK_THROWS_AS((void)m.g2_distribution(q, empty), ContractError);
}

TEST_CASE("uniform zero model distribution and shift invariance") {
  MatchingModel m(16, 5, 6, 0.0, 22);
  zero_params(m);
  auto pool = make_pool({{4, kEos}, {5, kEos}, {6, kEos}, {7, kEos}});
  auto dist = m.g2_distribution({8, kEos}, pool);
  for (double p : dist) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

  std::vector<double> logits = {0.3, -1.2, 2.0};
  std::vector<double> shifted = {100.3, 98.8, 102.0};
  auto a = softmax_stable(logits);
  auto b = softmax_stable(shifted);
  for (size_t i = 0; i < a.size(); ++i)
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("g2_sample inherits provenance and is seed deterministic") {
  MatchingModel m(16, 5, 6, 0.0, 23);
  std::vector<int> q = {4, kEos}, truth = {5, 6, kEos};
  auto pool = make_pool({{7, kEos}, {8, kEos}},
                        {Provenance::Retrieved, Provenance::Synthetic});
  auto s1 = m.g2_sample(q, truth, pool, 12, 42);
  auto s2 = m.g2_sample(q, truth, pool, 12, 42);
  REQUIRE(s1.size() == 12);
  for (size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].negative == s2[i].negative);
    CHECK(s1[i].positive == truth);
    bool retrieved = s1[i].negative == std::vector<int>{7, kEos};
    CHECK(s1[i].provenance ==
          (retrieved ? Provenance::Retrieved : Provenance::Synthetic));
  }

  auto single = make_pool({{9, kEos}});
  auto s3 = m.g2_sample(q, truth, single, 5, 7);
  for (const auto& pr : s3) CHECK(pr.negative == std::vector<int>{9, kEos});
  CHECK_THROWS_AS((void)m.g2_sample(q, truth, pool, 0, 1), ContractError);
}

TEST_CASE("g2_sample frequencies match the uniform distribution") {
  MatchingModel m(16, 5, 6, 0.0, 24);
  zero_params(m);
  auto pool = make_pool({{4, kEos}, {5, kEos}, {6, kEos}, {7, kEos}});
  auto samples = m.g2_sample({8, kEos}, {9, kEos}, pool, 40000, 1234);
  std::map<int, double> counts;
  for (const auto& pr : samples) counts[pr.negative[0]] += 1.0;
  std::vector<double> observed, expected;
  for (int tok = 4; tok <= 7; ++tok) {
    observed.push_back(counts[tok]);
    expected.push_back(10000.0);
  }
  double stat = chi_square_stat(observed, expected);
  CHECK(chi_square_pvalue(stat, 3.0) > 0.01);
}

TEST_CASE("g2 policy gradient matches the analytic bandit gradient") {
  MatchingModel m(16, 5, 6, 0.0, 29);
  std::vector<int> q = {11, kEos}, truth = {12, kEos};
  auto pool = make_pool({{4, kEos}, {5, kEos}, {6, kEos}});
  std::map<int, double> arm_reward = {{4, 0.9}, {5, -0.4}, {6, 0.2}};
  PairRewardFn fn = [&](const std::vector<int>&,
                        const std::vector<int>& candidate,
                        const std::vector<int>&) {
    return arm_reward.at(candidate[0]);
  };
  auto dist = m.g2_distribution(q, pool);

  // Analytic expectation: sum_k p_k r_k d(log p_k)/d(theta).
  std::vector<double> analytic;
  for (size_t k = 0; k < pool.members.size(); ++k) {
    Tape t;
    Tensor row;
    for (const auto& mem : pool.members) {
      Tensor s = m.score_node(t, q, mem.response, false, 0);
      row = row.defined() ? concat(row, s, 1) : s;
    }
    Tensor logp = log_op(clamp_op(softmax_rows(row), 1e-300, 1.0));
    m.params().zero_grads();
    t.backward(slice(logp, 1, k, 1));
    auto gk = flat_grads(m);
    if (analytic.empty()) analytic.assign(gk.size(), 0.0);
    double w = dist[k] * arm_reward.at(pool.members[k].response[0]);
    for (size_t i = 0; i < gk.size(); ++i) analytic[i] += w * gk[i];
  }
  m.params().zero_grads();

  // Monte Carlo estimate observed through a unit-rate gradient ascent step.
  auto before = flat_values(m);
  Optimizer opt({OptKind::Sgd, 1.0, 0.9, 0.999, 1e-8, 0.0});
  std::vector<G2Example> batch = {{q, truth, pool}};
  double mean_w = m.pg_update_g2(fn, batch, 50000, opt, 97);
  auto after = flat_values(m);

  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    double mc = after[i] - before[i];
    num += (mc - analytic[i]) * (mc - analytic[i]);
    den += analytic[i] * analytic[i];
  }
  REQUIRE(den > 0.0);
  CHECK(std::sqrt(num / den) < 0.05);

  double expect_mean = 0.0;
  for (size_t k = 0; k < dist.size(); ++k)
    expect_mean += dist[k] * arm_reward.at(pool.members[k].response[0]);
  CHECK(mean_w == doctest::Approx(expect_mean).epsilon(0.05));
}

TEST_CASE("zero rewards leave the g2 policy untouched") {
  MatchingModel m(16, 5, 6, 0.0, 33);
  auto before = flat_values(m);
  PairRewardFn zero_fn = [](const std::vector<int>&, const std::vector<int>&,
                            const std::vector<int>&) { return 0.0; };
  Optimizer opt({OptKind::Sgd, 1.0, 0.9, 0.999, 1e-8, 0.0});
  std::vector<G2Example> batch = {
      {{4, kEos}, {5, kEos}, make_pool({{6, kEos}, {7, kEos}})}};
  m.pg_update_g2(zero_fn, batch, 16, opt, 5);
  CHECK(flat_values(m) == before);
}

TEST_CASE("g2 policy mass shifts toward rewarded candidates") {
  std::vector<double> deltas;
  for (uint64_t seed : {401ULL, 402ULL, 403ULL}) {
    MatchingModel m(16, 5, 6, 0.0, seed);
    std::vector<int> q = {4, 5, kEos}, truth = {6, kEos};
    auto pool = make_pool({{7, kEos}, {8, 9, kEos}, {10, kEos}},
                          {Provenance::Random, Provenance::Retrieved,
                           Provenance::Random});
    PairRewardFn fn = [&](const std::vector<int>&,
                          const std::vector<int>& candidate,
                          const std::vector<int>&) {
      return candidate == pool.members[1].response ? 0.8 : -0.5;
    };
    double before = m.g2_distribution(q, pool)[1];
    Optimizer opt({OptKind::Adam, 0.01, 0.9, 0.999, 1e-8, 5.0});
    std::vector<G2Example> batch = {{q, truth, pool}};
    for (int step = 0; step < 200; ++step)
      m.pg_update_g2(fn, batch, 4, opt, mix_seed(seed, 700, step));
    deltas.push_back(m.g2_distribution(q, pool)[1] - before);
  }
  std::sort(deltas.begin(), deltas.end());
  CHECK(deltas[1] > 0.05);  // median across seeds rises
}

TEST_CASE("rank_candidates sorts by score with index ties") {
  MatchingModel m(20, 6, 8, 0.0, 43);
  std::vector<int> q = {4, 5, kEos};
  std::vector<std::vector<int>> cands = {
      {6, kEos}, {7, 8, kEos}, {9, kEos}, {6, kEos}};  // 3 duplicates of 0
  auto ranked = m.rank_candidates(q, cands);
  REQUIRE(ranked.size() == 4);
  for (size_t i = 1; i < ranked.size(); ++i) {
    CHECK(ranked[i - 1].score >= ranked[i].score);
    if (ranked[i - 1].score == ranked[i].score)
      CHECK(ranked[i - 1].index < ranked[i].index);
  }
  // Duplicate candidates tie exactly; the earlier index precedes.
  size_t pos0 = 0, pos3 = 0;
  for (size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i].index == 0) pos0 = i;
    if (ranked[i].index == 3) pos3 = i;
  }
  CHECK(pos0 < pos3);

  auto single = m.rank_candidates(q, {{6, kEos}});
  CHECK(single[0].index == 0);
  CHECK_THROWS_AS((void)m.rank_candidates(q, {}), ContractError);
}

TEST_CASE("clones share values until trained apart") {
  MatchingModel d(18, 6, 8, 0.0, 61);
  MatchingModel g2 = d.clone();
  CHECK(flat_values(d) == flat_values(g2));
  std::vector<int> q = {4, 7, kEos}, r = {9, 11, kEos};
  CHECK(d.score(q, r) == g2.score(q, r));

  Optimizer opt({OptKind::Sgd, 0.05, 0.9, 0.999, 1e-8, 0.0});
  std::vector<RankExample> pos = {{q, r, {5, kEos}}};
  std::vector<RankExample> adv = {{q, r, {6, kEos}}};
  d.d_update(pos, adv, opt, 1);
  CHECK(flat_values(d) != flat_values(g2));
  CHECK(d.score(q, r) != g2.score(q, r));
}

TEST_CASE("score and training losses pass gradient checks") {
  MatchingModel m(12, 4, 5, 0.0, 101);
  std::vector<int> q = {4, 5, 6, kEos}, r = {7, 8, kEos}, rn = {9, kEos};

  SUBCASE("raw score") {
    auto fn = [&](bool with_grad) {
      Tape t;
      Tensor s = m.score_node(t, q, r, false, 0);
      if (with_grad) t.backward(s);
      return s.scalar();
    };
    FdCheckOptions opt;
    opt.floor = 1e-6;
    CHECK(finite_diff_check(fn, m.params().all(), opt) < 1e-4);
  }
  SUBCASE("hinge loss") {
    auto fn = [&](bool with_grad) {
      Tape t;
      Tensor gp = m.score_node(t, q, r, false, 0);
      Tensor gn = m.score_node(t, q, rn, false, 0);
      Tensor loss = relu_scalar(add_const(sub(gn, gp), 1.0));
      if (with_grad) t.backward(loss);
      return loss.scalar();
    };
    FdCheckOptions opt;
    opt.floor = 1e-6;
    CHECK(finite_diff_check(fn, m.params().all(), opt) < 1e-4);
  }
  SUBCASE("pair log likelihood") {
    auto fn = [&](bool with_grad) {
      Tape t;
      Tensor gp = m.score_node(t, q, r, false, 0);
      Tensor gn = m.score_node(t, q, rn, false, 0);
      Tensor loss = neg(
          log_op(clamp_op(sigmoid_op(sub(gp, gn)), 1e-7, 1.0 - 1e-7)));
      if (with_grad) t.backward(loss);
      return loss.scalar();
    };
    FdCheckOptions opt;
    opt.floor = 1e-6;
    CHECK(finite_diff_check(fn, m.params().all(), opt) < 1e-4);
  }
  SUBCASE("dropout-active hinge with fixed mask seed") {
    MatchingModel md(12, 4, 5, 0.4, 55);
    auto fn = [&](bool with_grad) {
      Tape t;
      Tensor gp = md.score_node(t, q, r, true, 71);
      Tensor gn = md.score_node(t, q, rn, true, 72);
      Tensor loss = relu_scalar(add_const(sub(gn, gp), 1.0));
      if (with_grad) t.backward(loss);
      return loss.scalar();
    };
    FdCheckOptions opt;
    opt.floor = 1e-6;
    CHECK(finite_diff_check(fn, md.params().all(), opt) < 1e-4);
  }
}

TEST_CASE("dropout training steps are reproducible by seed") {
  auto run = [](uint64_t step_seed) {
    MatchingModel m(16, 5, 6, 0.3, 71);
    Optimizer opt({OptKind::Sgd, 0.05, 0.9, 0.999, 1e-8, 0.0});
    std::vector<RankExample> batch = {{{4, kEos}, {5, kEos}, {6, kEos}},
                                      {{7, kEos}, {8, kEos}, {9, kEos}}};
    double loss = m.hinge_pretrain_step(batch, 1.0, opt, step_seed);
    return std::make_pair(loss, m.score({4, kEos}, {5, kEos}));
  };
  auto a = run(5), b = run(5), c = run(6);
  CHECK(a == b);
  CHECK(a != c);
}
