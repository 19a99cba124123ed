#include "egan/candidates.hpp"

namespace egan {

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::GroundTruth:
      return "ground_truth";
    case Provenance::Retrieved:
      return "retrieved";
    case Provenance::Random:
      return "random";
    case Provenance::Synthetic:
      return "synthetic";
  }
  return "unknown";
}

}  // namespace egan
