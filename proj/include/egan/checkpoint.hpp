#pragma once

#include <map>
#include <string>
#include <vector>

#include "egan/config.hpp"
#include "egan/tensor.hpp"

namespace egan {

enum class ModelRole { G1, G2, D };

const char* model_role_name(ModelRole role);

struct ParamBlock {
  std::string name;
  size_t rows = 1;
  size_t cols = 1;
  std::vector<double> values;
};

// Parsed checkpoint contents.  Hex encoding keeps every double bit-exact.
struct CheckpointData {
  ModelRole role = ModelRole::G1;
  TrainConfig config;
  std::vector<ParamBlock> params;
  bool has_optimizer = false;
  uint64_t opt_step_count = 0;
  std::map<std::string, std::vector<double>> opt_m;
  std::map<std::string, std::vector<double>> opt_v;
};

// Writes a digest-protected text checkpoint.  Pass the optimizer to make
// a later resume bitwise-identical to an uninterrupted run; pass nullptr
// for inference-only artifacts.
void save_checkpoint(const std::string& path, ModelRole role,
                     const TrainConfig& cfg, const ParameterSet& params,
                     const Optimizer* opt);

// Verifies the digest, the format version, and the role before returning.
// Role mismatch -> ContractError; damaged content -> CorruptionError;
// unsupported version tag -> VersionError; unreadable file -> IoError.
CheckpointData load_checkpoint(const std::string& path,
                               ModelRole expected_role);

// Copies the stored values into an existing parameter set (names and
// shapes must match exactly) and, when present and wanted, restores the
// optimizer state.
void apply_checkpoint(const CheckpointData& data, ParameterSet& params,
                      Optimizer* opt);

}  // namespace egan
