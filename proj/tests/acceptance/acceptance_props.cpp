// Criteria 4, 9, 10: ranker reward algebra, metric hand values, and
// chi-square agreement between sampled frequencies and model distributions.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include "acceptance.hpp"
#include "egan/corpus.hpp"
#include "egan/metrics.hpp"
#include "egan/ranker.hpp"
#include "egan/rng.hpp"
#include "egan/seq2seq.hpp"
#include "egan/stats.hpp"

namespace acceptance {
namespace {

using egan::MatchingModel;
using egan::Seq2SeqModel;
using egan::Vocab;

constexpr double kTolAntisymmetry = 1e-12;
constexpr double kTolMetricHand = 1e-9;
constexpr double kChiSquareAlpha = 0.01;
constexpr int kChiSquareDraws = 10000;
constexpr int kAntisymmetryTrials = 1000;

std::vector<int> random_response(egan::Rng& rng, int vocab_size) {
  size_t len = 1 + rng.uniform_index(6);
  std::vector<int> out;
  for (size_t i = 0; i < len; ++i)
    out.push_back(4 + static_cast<int>(rng.uniform_index(
                          static_cast<size_t>(vocab_size - 4))));
  out.push_back(Vocab::kEos);
  return out;
}

// ---- criterion 4: pairwise probability and reward algebra ---------------

void criterion_reward_algebra(std::vector<Criterion>& results) {
  Timer timer;
  MatchingModel ranker(60, 8, 8, 0.0, 31337);
  egan::Rng rng(0xA4A4);

  double worst_sum = 0.0;
  double worst_bound = 0.0;
  double worst_equal = 0.0;
  for (int t = 0; t < kAntisymmetryTrials; ++t) {
    std::vector<int> q = random_response(rng, 60);
    std::vector<int> a = random_response(rng, 60);
    std::vector<int> b = random_response(rng, 60);
    double ab = ranker.pair_prob(q, a, b);
    double ba = ranker.pair_prob(q, b, a);
    worst_sum = std::max(worst_sum, std::fabs(ab + ba - 1.0));

    double ra = ranker.reward(q, a, b, egan::RewardForm::Advantage);
    double rb = ranker.reward(q, b, a, egan::RewardForm::Advantage);
    worst_bound = std::max(worst_bound, std::fabs(ra) - 1.0);
    worst_bound = std::max(worst_bound, std::fabs(rb) - 1.0);

    double self_reward = ranker.reward(q, a, a, egan::RewardForm::Advantage);
    worst_equal = std::max(worst_equal, std::fabs(self_reward));
  }

  Criterion c;
  c.name = "4. pairwise probabilities are antisymmetric and advantage "
           "rewards stay centered and bounded";
  c.seconds = timer.seconds();
  c.pass = worst_sum < kTolAntisymmetry && worst_equal == 0.0 &&
           worst_bound <= 0.0;
  c.detail = std::to_string(kAntisymmetryTrials) +
             " random triples: max |p(a,b)+p(b,a)-1| " + fmt("%.3g", worst_sum) +
             ", max |reward(equal)| " + fmt("%.3g", worst_equal) +
             ", max bound excess " + fmt("%.3g", std::max(worst_bound, 0.0));
  results.push_back(std::move(c));
}

// ---- criterion 9: metric hand values ------------------------------------

void criterion_metric_hand_values(std::vector<Criterion>& results) {
  Timer timer;

  // Self-comparison scores 1 at every order.
  std::vector<int> sentence = {4, 5, 6, 7, 8, 9, Vocab::kEos};
  double worst_self = 0.0;
  for (int n = 1; n <= 4; ++n)
    worst_self = std::max(
        worst_self, std::fabs(egan::bleu_n({sentence}, {sentence}, n) - 1.0));

  // "a b c" against "a b d": two of three unigrams match, equal lengths.
  double hand_bleu = egan::bleu_n({{4, 5, 6, Vocab::kEos}},
                                  {{4, 5, 7, Vocab::kEos}}, 1);
  double err_bleu = std::fabs(hand_bleu - 2.0 / 3.0);

  // Two-dimensional table chosen so all three embedding scores have closed
  // forms: candidate tokens at the axes, reference token at (0.6, 0.8).
  std::filesystem::path table_path =
      std::filesystem::temp_directory_path() / "acceptance_embed_table.txt";
  {
    std::ofstream out(table_path);
    out << "4 1 0\n5 0 1\n6 0.6 0.8\n";
  }
  egan::EmbeddingTable table = egan::EmbeddingTable::load(table_path.string());
  egan::EmbeddingMetrics em = egan::embedding_metrics(
      {{4, 5, Vocab::kEos}}, {{6, Vocab::kEos}}, table);
  std::filesystem::remove(table_path);
  // mean vectors (0.5,0.5) vs (0.6,0.8); greedy (0.6+0.8)/2 then 0.8 back;
  // extrema (1,1) vs (0.6,0.8).
  double expect_average = 0.7 / std::sqrt(0.5);
  double expect_greedy = 0.75;
  double expect_extrema = 1.4 / std::sqrt(2.0);
  double err_embed = std::max(
      {std::fabs(em.average - expect_average),
       std::fabs(em.greedy_match - expect_greedy),
       std::fabs(em.vector_extrema - expect_extrema)});
  bool none_skipped = em.skipped == 0;

  // A scorer with perfect knowledge of the answer key ranks every truth
  // first.
  std::map<std::vector<int>, std::vector<int>> answer_key;
  std::vector<egan::PrecisionItem> items;
  egan::Rng rng(0xA9A9);
  for (int i = 0; i < 50; ++i) {
    egan::PrecisionItem item;
    item.query = {4 + i, Vocab::kEos};
    item.truth = {5 + i, 6 + i, Vocab::kEos};
    for (int d = 0; d < 3; ++d) {
      std::vector<int> distractor = random_response(rng, 60);
      if (distractor == item.truth) distractor.insert(distractor.begin(), 7);
      item.distractors.push_back(std::move(distractor));
    }
    answer_key[item.query] = item.truth;
    items.push_back(std::move(item));
  }
  egan::ScoreFn oracle = [&](const std::vector<int>& q,
                             const std::vector<int>& r) {
    auto it = answer_key.find(q);
    return (it != answer_key.end() && it->second == r) ? 1.0 : 0.0;
  };
  double oracle_p1 = egan::p_at_1(oracle, items);

  Criterion c;
  c.name = "9. overlap, embedding, and precision metrics reproduce hand "
           "values";
  c.seconds = timer.seconds();
  c.pass = worst_self < kTolMetricHand && err_bleu < kTolMetricHand &&
           err_embed < kTolMetricHand && none_skipped && oracle_p1 == 1.0;
  c.detail = "self-overlap error " + fmt("%.3g", worst_self) +
             ", hand unigram error " + fmt("%.3g", err_bleu) +
             ", embedding error " + fmt("%.3g", err_embed) +
             ", oracle precision " + fmt("%.3f", oracle_p1);
  results.push_back(std::move(c));
}

// ---- criterion 10: sampled frequencies match stated distributions -------

struct ChiSquareResult {
  double pvalue = 0.0;
  size_t bins = 0;
};

// Merges categories whose expected count is below 5 into one residual bin,
// then runs the test with bins-1 degrees of freedom.
ChiSquareResult binned_chi_square(const std::vector<double>& observed,
                                  const std::vector<double>& expected) {
  std::vector<double> obs_b, exp_b;
  double obs_rest = 0.0, exp_rest = 0.0;
  for (size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] >= 5.0) {
      obs_b.push_back(observed[i]);
      exp_b.push_back(expected[i]);
    } else {
      obs_rest += observed[i];
      exp_rest += expected[i];
    }
  }
  if (exp_rest > 0.0) {
    obs_b.push_back(obs_rest);
    exp_b.push_back(exp_rest);
  }
  ChiSquareResult r;
  r.bins = obs_b.size();
  double stat = egan::chi_square_stat(obs_b, exp_b);
  r.pvalue =
      egan::chi_square_pvalue(stat, static_cast<double>(r.bins - 1));
  return r;
}

void criterion_sampling_frequencies(std::vector<Criterion>& results) {
  Timer timer;

  // First-step decode frequencies against the model's own distribution.
  Seq2SeqModel m(12, 6, 6, 0.0, 2025, 6);
  std::vector<int> query = {4, 5, 6, Vocab::kEos};
  auto enc = m.encode_query(query);
  egan::DecodeStep root = m.decode_step(Vocab::kBos, m.initial_state(enc), enc);

  std::vector<double> observed(12, 0.0);
  for (int k = 0; k < kChiSquareDraws; ++k) {
    egan::DecodeConfig dc;
    dc.max_len = 8;
    dc.temperature = 1.0;
    dc.seed = egan::mix_seed(0xD1CE, static_cast<uint64_t>(k));
    std::vector<int> y = m.decode_sequence(query, egan::DecodeMode::Sample, dc);
    observed[static_cast<size_t>(y.front())] += 1.0;
  }
  bool reserved_clean = observed[Vocab::kPad] == 0.0 &&
                        observed[Vocab::kBos] == 0.0 &&
                        root.distribution[Vocab::kPad] == 0.0 &&
                        root.distribution[Vocab::kBos] == 0.0;
  std::vector<double> obs_decode, exp_decode;
  for (int id = 0; id < 12; ++id) {
    if (id == Vocab::kPad || id == Vocab::kBos) continue;
    obs_decode.push_back(observed[static_cast<size_t>(id)]);
    exp_decode.push_back(root.distribution[static_cast<size_t>(id)] *
                         kChiSquareDraws);
  }
  ChiSquareResult decode_test = binned_chi_square(obs_decode, exp_decode);

  // Pool sampling frequencies against the stated pool softmax.
  MatchingModel g2(40, 8, 8, 0.0, 909);
  egan::Rng pool_rng(0xB00B);
  egan::CandidatePool pool;
  pool.context_pair_id = 0;
  for (int i = 0; i < 6; ++i)
    pool.members.push_back(
        {random_response(pool_rng, 40), egan::Provenance::Random});
  std::vector<int> truth = random_response(pool_rng, 40);
  std::vector<int> g2_query = random_response(pool_rng, 40);

  std::vector<double> pool_probs = g2.g2_distribution(g2_query, pool);
  std::vector<egan::ResponsePair> draws =
      g2.g2_sample(g2_query, truth, pool, kChiSquareDraws, 0xCAFE);
  std::vector<double> pool_observed(pool.members.size(), 0.0);
  size_t unmatched = 0;
  for (const egan::ResponsePair& p : draws) {
    bool found = false;
    for (size_t i = 0; i < pool.members.size(); ++i) {
      if (p.negative == pool.members[i].response) {
        pool_observed[i] += 1.0;
        found = true;
        break;
      }
    }
    if (!found) ++unmatched;
  }
  std::vector<double> pool_expected;
  for (double p : pool_probs) pool_expected.push_back(p * kChiSquareDraws);
  ChiSquareResult pool_test = binned_chi_square(pool_observed, pool_expected);

  Criterion c;
  c.name = "10. sampled first-step and pool-draw frequencies match their "
           "stated distributions";
  c.seconds = timer.seconds();
  c.pass = reserved_clean && unmatched == 0 &&
           decode_test.pvalue > kChiSquareAlpha &&
           pool_test.pvalue > kChiSquareAlpha;
  c.detail = "decode p " + fmt("%.4f", decode_test.pvalue) + " over " +
             std::to_string(decode_test.bins) + " bins, pool p " +
             fmt("%.4f", pool_test.pvalue) + " over " +
             std::to_string(pool_test.bins) + " bins, " +
             std::to_string(kChiSquareDraws) + " draws each";
  results.push_back(std::move(c));
}

}  // namespace

void run_property_criteria(std::vector<Criterion>& results) {
  criterion_reward_algebra(results);
  criterion_metric_hand_values(results);
  criterion_sampling_frequencies(results);
}

}  // namespace acceptance
