#pragma once

#include <vector>

namespace egan {

// Where a candidate or negative sample came from.
enum class Provenance { GroundTruth, Retrieved, Random, Synthetic };

const char* provenance_name(Provenance p);

struct Candidate {
  std::vector<int> response;
  Provenance provenance = Provenance::Random;
};

// Negative-sampling pool for one (query, ground truth) context. The ground
// truth itself is excluded by construction; members are deduplicated by
// token sequence.
struct CandidatePool {
  std::vector<Candidate> members;
  int context_pair_id = -1;
};

// A preference pair: the model should rank `positive` above `negative`.
// `provenance` records where the negative came from.
struct ResponsePair {
  std::vector<int> positive;
  std::vector<int> negative;
  Provenance provenance = Provenance::Random;
};

}  // namespace egan
