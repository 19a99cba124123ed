#include "egan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "egan/corpus.hpp"
#include "egan/errors.hpp"
#include "egan/rng.hpp"

namespace egan {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<int> content_of(const std::vector<int>& seq) {
  std::vector<int> out;
  for (int t : seq) {
    if (t == Vocab::kEos) break;
    out.push_back(t);
  }
  return out;
}

std::map<std::vector<int>, int> ngram_counts(const std::vector<int>& toks,
                                             int k) {
  std::map<std::vector<int>, int> out;
  if (static_cast<int>(toks.size()) < k) return out;
  for (size_t i = 0; i + static_cast<size_t>(k) <= toks.size(); ++i)
    out[std::vector<int>(toks.begin() + static_cast<long>(i),
                         toks.begin() + static_cast<long>(i) + k)] += 1;
  return out;
}

void check_bleu_inputs(const std::vector<std::vector<int>>& candidates,
                       const std::vector<std::vector<int>>& references,
                       int n) {
  if (n < 1 || n > 4) throw ContractError("bleu order must be in [1, 4]");
  if (candidates.size() != references.size())
    throw ContractError("bleu needs one reference per candidate");
}

// Geometric-mean combination of clipped precisions with brevity penalty;
// order 1 is unsmoothed so disjoint corpora score exactly 0.
double combine_bleu(const std::vector<double>& match,
                    const std::vector<double>& total, double c_len,
                    double r_len, int n) {
  if (total[0] <= 0.0 || match[0] <= 0.0) return 0.0;
  double p1 = match[0] / total[0];
  double log_sum = std::log(p1);
  for (int k = 2; k <= n; ++k)
    log_sum += std::log((match[static_cast<size_t>(k - 1)] + 1.0) /
                        (total[static_cast<size_t>(k - 1)] + 1.0));
  double bp = c_len < r_len ? std::exp(1.0 - r_len / c_len) : 1.0;
  return bp * std::exp(log_sum / n);
}

void tally_orders(const std::vector<int>& cand, const std::vector<int>& ref,
                  int n, std::vector<double>& match,
                  std::vector<double>& total) {
  for (int k = 1; k <= n; ++k) {
    std::map<std::vector<int>, int> cg = ngram_counts(cand, k);
    std::map<std::vector<int>, int> rg = ngram_counts(ref, k);
    for (const auto& [gram, count] : cg) {
      auto it = rg.find(gram);
      if (it != rg.end())
        match[static_cast<size_t>(k - 1)] += std::min(count, it->second);
      total[static_cast<size_t>(k - 1)] += count;
    }
  }
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double gaussian(Rng& rng) {
  double u1 = std::max(rng.uniform01(), 1e-12);
  double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

std::string fmt_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double bleu_n(const std::vector<std::vector<int>>& candidates,
              const std::vector<std::vector<int>>& references, int n) {
  check_bleu_inputs(candidates, references, n);
  std::vector<double> match(static_cast<size_t>(n), 0.0);
  std::vector<double> total(static_cast<size_t>(n), 0.0);
  double c_len = 0.0, r_len = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    std::vector<int> cand = content_of(candidates[i]);
    std::vector<int> ref = content_of(references[i]);
    c_len += static_cast<double>(cand.size());
    r_len += static_cast<double>(ref.size());
    tally_orders(cand, ref, n, match, total);
  }
  return combine_bleu(match, total, c_len, r_len, n);
}

double bleu_n_sentence_mean(const std::vector<std::vector<int>>& candidates,
                            const std::vector<std::vector<int>>& references,
                            int n) {
  check_bleu_inputs(candidates, references, n);
  if (candidates.empty()) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    std::vector<int> cand = content_of(candidates[i]);
    std::vector<int> ref = content_of(references[i]);
    std::vector<double> match(static_cast<size_t>(n), 0.0);
    std::vector<double> total(static_cast<size_t>(n), 0.0);
    tally_orders(cand, ref, n, match, total);
    sum += combine_bleu(match, total, static_cast<double>(cand.size()),
                        static_cast<double>(ref.size()), n);
  }
  return sum / static_cast<double>(candidates.size());
}

EmbeddingTable EmbeddingTable::seeded_random(int vocab_size, int dim,
                                             uint64_t seed) {
  if (vocab_size < 1 || dim < 1)
    throw ContractError("embedding table needs positive vocab and dimension");
  EmbeddingTable t;
  t.dim_ = dim;
  Rng rng(mix_seed(seed, 0xe3b));
  for (int id = 0; id < vocab_size; ++id) {
    std::vector<double> v(static_cast<size_t>(dim));
    double norm = 0.0;
    while (norm == 0.0) {
      for (double& x : v) x = gaussian(rng);
      norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
    }
    for (double& x : v) x /= norm;
    t.table_[id] = std::move(v);
  }
  return t;
}

EmbeddingTable EmbeddingTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw IoError("cannot open " + path);
  EmbeddingTable t;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    int id;
    if (!(row >> id))
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected a token id");
    std::vector<double> v;
    double x;
    while (row >> x) v.push_back(x);
    if (v.empty())
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": token row has no values");
    for (double val : v)
      if (!std::isfinite(val))
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": non-finite value");
    if (t.dim_ == 0) t.dim_ = static_cast<int>(v.size());
    if (static_cast<int>(v.size()) != t.dim_)
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": inconsistent dimension");
    t.table_[id] = std::move(v);
  }
  if (t.table_.empty()) throw FormatError(path + ": empty embedding table");
  return t;
}

bool EmbeddingTable::contains(int token) const {
  return table_.count(token) > 0;
}

const std::vector<double>& EmbeddingTable::vector_of(int token) const {
  auto it = table_.find(token);
  if (it == table_.end())
    throw ContractError("token " + std::to_string(token) +
                        " has no embedding");
  return it->second;
}

EmbeddingMetrics embedding_metrics(
    const std::vector<std::vector<int>>& candidates,
    const std::vector<std::vector<int>>& references,
    const EmbeddingTable& table) {
  if (candidates.size() != references.size())
    throw ContractError("embedding metrics need one reference per candidate");
  EmbeddingMetrics out;
  size_t counted = 0;
  double ea = 0.0, gm = 0.0, ve = 0.0;
  size_t dim = static_cast<size_t>(table.dim());

  auto vectors_of = [&](const std::vector<int>& seq) {
    std::vector<const std::vector<double>*> vecs;
    for (int t : content_of(seq))
      if (table.contains(t)) vecs.push_back(&table.vector_of(t));
    return vecs;
  };
  auto mean_vec = [&](const std::vector<const std::vector<double>*>& vecs) {
    std::vector<double> m(dim, 0.0);
    for (const auto* v : vecs)
      for (size_t i = 0; i < dim; ++i) m[i] += (*v)[i];
    for (double& x : m) x /= static_cast<double>(vecs.size());
    return m;
  };
  auto extrema_vec = [&](const std::vector<const std::vector<double>*>& vecs) {
    std::vector<double> e(dim, 0.0);
    for (const auto* v : vecs)
      for (size_t i = 0; i < dim; ++i) {
        double x = (*v)[i];
        if (std::fabs(x) > std::fabs(e[i]) ||
            (std::fabs(x) == std::fabs(e[i]) && x > e[i]))
          e[i] = x;
      }
    return e;
  };

  for (size_t p = 0; p < candidates.size(); ++p) {
    auto cv = vectors_of(candidates[p]);
    auto rv = vectors_of(references[p]);
    if (cv.empty() || rv.empty()) {
      out.skipped += 1;
      continue;
    }
    ea += cosine(mean_vec(cv), mean_vec(rv));

    double fwd = 0.0;
    for (const auto* c : cv) {
      double best = -1.0;
      for (const auto* r : rv) best = std::max(best, cosine(*c, *r));
      fwd += best;
    }
    fwd /= static_cast<double>(cv.size());
    double bwd = 0.0;
    for (const auto* r : rv) {
      double best = -1.0;
      for (const auto* c : cv) best = std::max(best, cosine(*c, *r));
      bwd += best;
    }
    bwd /= static_cast<double>(rv.size());
    gm += 0.5 * (fwd + bwd);

    ve += cosine(extrema_vec(cv), extrema_vec(rv));
    ++counted;
  }
  if (counted > 0) {
    out.average = ea / static_cast<double>(counted);
    out.greedy_match = gm / static_cast<double>(counted);
    out.vector_extrema = ve / static_cast<double>(counted);
  }
  return out;
}

double p_at_1(const ScoreFn& score, const std::vector<PrecisionItem>& items) {
  if (items.empty()) throw ContractError("precision needs at least one item");
  size_t wins = 0;
  for (const PrecisionItem& item : items) {
    if (item.distractors.empty())
      throw ContractError("every precision item needs a distractor");
    double truth_score = score(item.query, item.truth);
    bool top = true;
    for (const std::vector<int>& d : item.distractors)
      if (score(item.query, d) >= truth_score) {
        top = false;
        break;
      }
    if (top) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(items.size());
}

double p_at_1(const MatchingModel& ranker,
              const std::vector<PrecisionItem>& items) {
  return p_at_1(
      [&ranker](const std::vector<int>& q, const std::vector<int>& r) {
        return ranker.score(q, r);
      },
      items);
}

ModuleRankingLoss module_ranking_loss(const MatchingModel& ranker,
                                      const std::vector<ServingLogEntry>& log,
                                      double margin) {
  if (margin <= 0.0) throw ContractError("margin must be positive");
  ModuleRankingLoss out;
  double gen_sum = 0.0, ret_sum = 0.0;
  size_t gen_n = 0, ret_n = 0;
  for (const ServingLogEntry& e : log) {
    double hinge = std::max(0.0, margin + ranker.score(e.query, e.chosen) -
                                     ranker.score(e.query, e.truth));
    if (e.provenance == Provenance::Synthetic) {
      gen_sum += hinge;
      ++gen_n;
    } else if (e.provenance == Provenance::Retrieved) {
      ret_sum += hinge;
      ++ret_n;
    } else {
      throw ContractError(
          "serving log provenance must be retrieved or synthetic");
    }
  }
  size_t total = gen_n + ret_n;
  if (gen_n > 0) {
    out.generation = gen_sum / static_cast<double>(gen_n);
    out.generation_share =
        static_cast<double>(gen_n) / static_cast<double>(total);
  }
  if (ret_n > 0) {
    out.retrieval = ret_sum / static_cast<double>(ret_n);
    out.retrieval_share =
        static_cast<double>(ret_n) / static_cast<double>(total);
  }
  if (total > 0)
    out.overall = out.generation_share * out.generation.value_or(0.0) +
                  out.retrieval_share * out.retrieval.value_or(0.0);
  return out;
}

void MetricsReport::set(const std::string& system, const std::string& metric,
                        double v) {
  if (system.empty() || metric.empty())
    throw ContractError("report keys must be nonempty");
  if (system.find('.') != std::string::npos ||
      system.find(' ') != std::string::npos ||
      system.find('=') != std::string::npos)
    throw ContractError("system name must not contain '.', ' ', or '='");
  if (metric.find(' ') != std::string::npos ||
      metric.find('=') != std::string::npos)
    throw ContractError("metric name must not contain ' ' or '='");
  if (!std::isfinite(v)) throw ContractError("metric values must be finite");
  values[system][metric] = v;
}

std::string MetricsReport::to_text() const {
  std::ostringstream out;
  for (const auto& [system, metrics] : values)
    for (const auto& [metric, v] : metrics)
      out << system << '.' << metric << " = " << fmt_value(v) << '\n';
  return out.str();
}

MetricsReport MetricsReport::parse_text(const std::string& text) {
  MetricsReport report;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    size_t eq = line.find('=');
    size_t dot = line.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw FormatError("report line " + std::to_string(line_no) +
                        ": expected 'system.metric = value'");
    auto trim = [](std::string s) {
      size_t b = s.find_first_not_of(" \t");
      size_t e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string()
                                    : s.substr(b, e - b + 1);
    };
    std::string system = trim(line.substr(0, dot));
    std::string metric = trim(line.substr(dot + 1, eq - dot - 1));
    std::string value = trim(line.substr(eq + 1));
    if (system.empty() || metric.empty() || value.empty())
      throw FormatError("report line " + std::to_string(line_no) +
                        ": empty field");
    char* end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    if (end != value.c_str() + value.size())
      throw FormatError("report line " + std::to_string(line_no) +
                        ": invalid number '" + value + "'");
    report.set(system, metric, v);
  }
  return report;
}

}  // namespace egan
