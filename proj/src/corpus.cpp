#include "egan/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "egan/rng.hpp"

namespace fs = std::filesystem;

namespace egan {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (c < 128 && std::ispunct(c)) {
      flush();
      out.push_back(std::string(1, static_cast<char>(c)));
    } else {
      cur.push_back(static_cast<char>(
          c < 128 ? std::tolower(c) : c));
    }
  }
  flush();
  return out;
}

// --- Vocab ------------------------------------------------------------------

namespace {
const std::array<const char*, 4> kReserved = {"<pad>", "<bos>", "<eos>",
                                              "<unk>"};
}

Vocab::Vocab() {
  for (const char* r : kReserved) {
    tok_to_id_[r] = static_cast<int>(id_to_tok_.size());
    id_to_tok_.push_back(r);
  }
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& docs,
                   size_t max_size) {
  if (max_size < kReserved.size() + 1)
    throw ContractError("Vocab::build: max_size leaves no room for tokens");
  std::map<std::string, size_t> freq;
  for (const auto& doc : docs)
    for (const auto& tok : doc) ++freq[tok];
  for (const char* r : kReserved) freq.erase(r);

  std::vector<std::pair<std::string, size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  size_t capacity = max_size - kReserved.size();
  for (size_t i = 0; i < ranked.size() && i < capacity; ++i) {
    v.tok_to_id_[ranked[i].first] = static_cast<int>(v.id_to_tok_.size());
    v.id_to_tok_.push_back(ranked[i].first);
  }
  return v;
}

bool Vocab::contains(const std::string& token) const {
  return tok_to_id_.count(token) != 0;
}

int Vocab::id_of(const std::string& token) const {
  auto it = tok_to_id_.find(token);
  return it == tok_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || static_cast<size_t>(id) >= id_to_tok_.size())
    throw ContractError("Vocab::token_of: id " + std::to_string(id) +
                        " outside vocabulary of " +
                        std::to_string(id_to_tok_.size()));
  return id_to_tok_[static_cast<size_t>(id)];
}

std::vector<int> Vocab::encode(std::span<const std::string> tokens,
                               size_t cap) const {
  if (cap < 2) throw ContractError("Vocab::encode: cap must be at least 2");
  std::vector<int> out;
  size_t content = std::min(tokens.size(), cap - 1);
  out.reserve(content + 1);
  for (size_t i = 0; i < content; ++i) out.push_back(id_of(tokens[i]));
  out.push_back(kEos);
  return out;
}

std::vector<std::string> Vocab::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id == kEos) break;
    out.push_back(token_of(id));
  }
  return out;
}

void Vocab::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("Vocab::save: cannot open " + path);
  f << "# one content token per line; token id = line index + "
    << kReserved.size() << "\n";
  f << "# ids 0..3 are reserved: <pad> <bos> <eos> <unk>\n";
  for (size_t i = kReserved.size(); i < id_to_tok_.size(); ++i)
    f << id_to_tok_[i] << "\n";
  if (!f) throw IoError("Vocab::save: write failed for " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("Vocab::load: cannot open " + path);
  Vocab v;
  std::string line;
  size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (v.tok_to_id_.count(line))
      throw FormatError("Vocab::load: duplicate token '" + line + "' at line " +
                        std::to_string(line_no));
    v.tok_to_id_[line] = static_cast<int>(v.id_to_tok_.size());
    v.id_to_tok_.push_back(line);
  }
  return v;
}

// --- CorpusBundle -----------------------------------------------------------

const std::vector<QRPair>& CorpusBundle::partition(Partition p) const {
  switch (p) {
    case Partition::RetrievalPool: return retrieval_pool;
    case Partition::RankingSet: return ranking_set;
    case Partition::GenerationSet: return generation_set;
    case Partition::TestSet: return test_set;
  }
  throw ContractError("CorpusBundle::partition: invalid id");
}

size_t CorpusBundle::total_pairs() const {
  return retrieval_pool.size() + ranking_set.size() + generation_set.size() +
         test_set.size();
}

std::string text_of(const Vocab& vocab, std::span<const int> ids) {
  auto toks = vocab.decode(ids);
  std::string out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

namespace {

const std::array<std::pair<const char*, Partition>, 4> kPartitionFiles = {{
    {"retrieval_pool.tsv", Partition::RetrievalPool},
    {"ranking_set.tsv", Partition::RankingSet},
    {"generation_set.tsv", Partition::GenerationSet},
    {"test_set.tsv", Partition::TestSet},
}};

void save_partition_tsv(const CorpusBundle& b, const std::string& path,
                        const std::vector<QRPair>& pairs) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("CorpusBundle::save: cannot open " + path);
  for (const auto& p : pairs)
    f << text_of(b.vocab, p.query) << "\t" << text_of(b.vocab, p.response)
      << "\n";
  if (!f) throw IoError("CorpusBundle::save: write failed for " + path);
}

}  // namespace

void CorpusBundle::save(const std::string& dir) const {
  fs::create_directories(dir);
  vocab.save((fs::path(dir) / "vocab.txt").string());
  for (const auto& [name, part] : kPartitionFiles)
    save_partition_tsv(*this, (fs::path(dir) / name).string(),
                       partition(part));
}

CorpusBundle CorpusBundle::load(const std::string& dir, CorpusCaps caps) {
  CorpusBundle b;
  b.caps = caps;
  b.vocab = Vocab::load((fs::path(dir) / "vocab.txt").string());
  int next_id = 0;
  for (const auto& [name, part] : kPartitionFiles) {
    auto loaded = load_pairs_tsv((fs::path(dir) / name).string());
    std::vector<QRPair>* dst = nullptr;
    switch (part) {
      case Partition::RetrievalPool: dst = &b.retrieval_pool; break;
      case Partition::RankingSet: dst = &b.ranking_set; break;
      case Partition::GenerationSet: dst = &b.generation_set; break;
      case Partition::TestSet: dst = &b.test_set; break;
    }
    for (const auto& tp : loaded.pairs) {
      QRPair qr;
      auto qt = tokenize(tp.query);
      auto rt = tokenize(tp.response);
      qr.query = b.vocab.encode(qt, caps.max_query_len);
      qr.response = b.vocab.encode(rt, caps.max_resp_len);
      qr.pair_id = next_id++;
      dst->push_back(std::move(qr));
    }
  }
  return b;
}

TsvLoadResult load_pairs_tsv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_pairs_tsv: cannot open " + path);
  TsvLoadResult res;
  std::string line;
  size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    bool ok = tab != std::string::npos &&
              line.find('\t', tab + 1) == std::string::npos;
    if (ok) {
      std::string q = line.substr(0, tab);
      std::string r = line.substr(tab + 1);
      ok = !tokenize(q).empty() && !tokenize(r).empty();
      if (ok) {
        res.pairs.push_back(TextPair{std::move(q), std::move(r)});
        continue;
      }
    }
    res.malformed_lines.push_back(line_no);
  }
  return res;
}

// --- synthetic corpus -------------------------------------------------------

namespace {

const std::vector<std::string> kSubjects = {
    "otter",   "falcon",  "badger",  "heron",   "lynx",    "viper",
    "walrus",  "magpie",  "gecko",   "bison",   "crane",   "ferret",
    "marmot",  "osprey",  "puffin",  "stoat",   "tapir",   "wombat",
    "ibex",    "jackal",  "kestrel", "lemur",   "mole",    "newt",
    "ocelot",  "pelican", "quail",   "raven",   "seal",    "toucan",
    "urchin",  "vole",    "weasel",  "yak",     "zebra",   "alpaca",
    "beetle",  "condor",  "dingo",   "egret",   "finch",   "gopher",
    "hornet",  "iguana",  "jaguar",  "koala",   "llama",   "mantis",
    "narwhal", "oriole",  "panther", "rabbit",  "sparrow", "turtle",
    "heronet", "vulture", "walleye", "xerus",   "yabby",   "zorilla"};

const std::vector<std::string> kAttributes = {
    "brave",  "calm",     "clever", "eager", "fierce", "gentle",
    "humble", "jolly",    "keen",   "lively", "mellow", "nimble",
    "patient", "quick",   "restless", "sturdy", "tidy",  "vivid",
    "wary",   "zesty",    "bold",   "bright", "quiet",  "steady"};

const std::vector<std::string> kPlaces = {
    "harbor",  "meadow",   "canyon", "forest", "glacier", "island",
    "jungle",  "lagoon",   "marsh",  "oasis",  "prairie", "quarry",
    "reef",    "savanna",  "tundra", "valley", "woodland", "delta",
    "dune",    "fjord"};

const std::vector<std::string> kQueryTemplates = {
    "tell me about the {s}",
    "what do you know about the {s}",
    "describe the {s} for me",
    "share a fact about the {s}",
    "i want to hear about the {s}",
    "what is the {s} like",
    "give me the story of the {s}",
    "any news about the {s}",
    "how would you describe the {s}",
    "talk to me about the {s}"};

const std::vector<std::string> kResponseTemplates = {
    "the {s} is {a} and lives near the {p}",
    "a {s} stays {a} around the {p}",
    "people say the {s} seems {a} by the {p}",
    "our {s} remains {a} close to the {p}",
    "that {s} looks {a} beside the {p}",
    "the {s} acts {a} near the {p}",
    "every {s} feels {a} at the {p}",
    "this {s} grows {a} within the {p}",
    "the {s} wanders {a} through the {p}",
    "some {s} rests {a} under the {p}"};

const std::vector<std::string> kFillers = {"please", "today",  "now",
                                           "friend", "kindly", "again"};

std::string render(const std::string& tmpl, const TopicWords& tw) {
  std::string out;
  for (size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}') {
      switch (tmpl[i + 1]) {
        case 's': out += tw.subject; i += 2; continue;
        case 'a': out += tw.attribute; i += 2; continue;
        case 'p': out += tw.place; i += 2; continue;
        default: break;
      }
    }
    out.push_back(tmpl[i]);
  }
  return out;
}

// Picks template variant `idx` from a base list, appending a filler word
// for indices past the base templates so any paraphrase count works.
std::string variant(const std::vector<std::string>& templates, size_t idx,
                    const TopicWords& tw) {
  std::string out = render(templates[idx % templates.size()], tw);
  size_t extra = idx / templates.size();
  if (extra > 0) {
    out.push_back(' ');
    out += kFillers[(extra - 1) % kFillers.size()];
  }
  return out;
}

}  // namespace

std::vector<TopicWords> synthetic_topic_lexicon(uint64_t seed,
                                                size_t n_topics) {
  std::vector<size_t> subj_idx(kSubjects.size());
  std::vector<size_t> attr_idx(kAttributes.size());
  std::vector<size_t> place_idx(kPlaces.size());
  for (size_t i = 0; i < subj_idx.size(); ++i) subj_idx[i] = i;
  for (size_t i = 0; i < attr_idx.size(); ++i) attr_idx[i] = i;
  for (size_t i = 0; i < place_idx.size(); ++i) place_idx[i] = i;
  Rng rng(mix_seed(seed, 0x701e));
  rng.shuffle(subj_idx);
  rng.shuffle(attr_idx);
  rng.shuffle(place_idx);

  std::vector<TopicWords> out;
  out.reserve(n_topics);
  for (size_t t = 0; t < n_topics; ++t) {
    TopicWords tw;
    tw.subject = t < kSubjects.size() ? kSubjects[subj_idx[t]]
                                      : "critter" + std::to_string(t);
    tw.attribute = kAttributes[attr_idx[t % kAttributes.size()]];
    tw.place = kPlaces[place_idx[t % kPlaces.size()]];
    out.push_back(std::move(tw));
  }
  return out;
}

CorpusBundle generate_synthetic_corpus(uint64_t seed, size_t n_pairs,
                                       size_t n_topics,
                                       size_t paraphrases_per_topic,
                                       const SynthOptions& opt) {
  if (n_pairs < 20)
    throw ContractError("generate_synthetic_corpus: need at least 20 pairs");
  if (n_topics < 2)
    throw ContractError("generate_synthetic_corpus: need at least 2 topics");
  if (paraphrases_per_topic < 2)
    throw ContractError(
        "generate_synthetic_corpus: need at least 2 paraphrases per topic");
  double ratio_sum = opt.ratio_retrieval + opt.ratio_ranking +
                     opt.ratio_generation + opt.ratio_test;
  if (opt.ratio_retrieval < 0 || opt.ratio_ranking < 0 ||
      opt.ratio_generation < 0 || opt.ratio_test < 0 ||
      std::abs(ratio_sum - 1.0) > 1e-9)
    throw ContractError(
        "generate_synthetic_corpus: partition ratios must be nonnegative and "
        "sum to 1");

  auto topics = synthetic_topic_lexicon(seed, n_topics);

  Rng rng(mix_seed(seed, 0xda7a));
  std::vector<TextPair> texts;
  texts.reserve(n_pairs);
  for (size_t i = 0; i < n_pairs; ++i) {
    const TopicWords& tw = topics[rng.uniform_index(n_topics)];
    size_t qv = rng.uniform_index(paraphrases_per_topic);
    size_t rv = rng.uniform_index(paraphrases_per_topic);
    texts.push_back(TextPair{variant(kQueryTemplates, qv, tw),
                             variant(kResponseTemplates, rv, tw)});
  }

  std::vector<std::vector<std::string>> docs;
  docs.reserve(2 * n_pairs);
  for (const auto& tp : texts) {
    docs.push_back(tokenize(tp.query));
    docs.push_back(tokenize(tp.response));
  }

  CorpusBundle b;
  b.caps = opt.caps;
  b.vocab = Vocab::build(docs, opt.vocab_max);

  std::vector<QRPair> all;
  all.reserve(n_pairs);
  for (size_t i = 0; i < n_pairs; ++i) {
    QRPair qr;
    qr.query = b.vocab.encode(docs[2 * i], opt.caps.max_query_len);
    qr.response = b.vocab.encode(docs[2 * i + 1], opt.caps.max_resp_len);
    qr.pair_id = static_cast<int>(i);
    all.push_back(std::move(qr));
  }

  std::vector<size_t> order(n_pairs);
  for (size_t i = 0; i < n_pairs; ++i) order[i] = i;
  Rng part_rng(mix_seed(seed, 0x9a57));
  part_rng.shuffle(order);

  size_t n_rank = static_cast<size_t>(opt.ratio_ranking * n_pairs);
  size_t n_gen = static_cast<size_t>(opt.ratio_generation * n_pairs);
  size_t n_test = static_cast<size_t>(opt.ratio_test * n_pairs);
  size_t n_ret = n_pairs - n_rank - n_gen - n_test;  // floor remainders here

  size_t pos = 0;
  for (size_t i = 0; i < n_ret; ++i)
    b.retrieval_pool.push_back(all[order[pos++]]);
  for (size_t i = 0; i < n_rank; ++i)
    b.ranking_set.push_back(all[order[pos++]]);
  for (size_t i = 0; i < n_gen; ++i)
    b.generation_set.push_back(all[order[pos++]]);
  for (size_t i = 0; i < n_test; ++i) b.test_set.push_back(all[order[pos++]]);
  return b;
}

}  // namespace egan
