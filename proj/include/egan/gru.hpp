#pragma once

#include <span>
#include <string>

#include "egan/tensor.hpp"

namespace egan {

class Rng;

// Per-tape view of a GruCell's parameters: one tracked node per weight
// block, shared by every step recorded on that tape.
struct BoundGru {
  Tensor wz, uz, bz;
  Tensor wr, ur, br;
  Tensor wn, un, bn;
  int hidden_dim;

  // One gated-recurrence step: x is 1 x in_dim, h is 1 x hidden_dim.
  // z = sigmoid(xWz + hUz + bz), r = sigmoid(xWr + hUr + br),
  // n = tanh(xWn + (r*h)Un + bn), h' = (1-z)*h + z*n.
  Tensor step(Tape& t, const Tensor& x, const Tensor& h) const;
  Tensor zero_state(Tape& t) const;
};

// A single-layer gated recurrent cell whose weights live in a ParameterSet
// under `prefix`.
struct GruCell {
  GruCell() = default;
  GruCell(ParameterSet& ps, const std::string& prefix, int in_dim,
          int hidden_dim);

  // Uniform init of all weight matrices in [lo, hi]; biases zero.
  void init(Rng& rng, double lo, double hi);

  BoundGru bind(Tape& t) const;

  int in_dim = 0;
  int hidden_dim = 0;
  Parameter* wz = nullptr;
  Parameter* uz = nullptr;
  Parameter* bz = nullptr;
  Parameter* wr = nullptr;
  Parameter* ur = nullptr;
  Parameter* br = nullptr;
  Parameter* wn = nullptr;
  Parameter* un = nullptr;
  Parameter* bn = nullptr;
};

// Runs the cell over the embedded token rows, starting from the zero state;
// returns the final hidden state. `table` must be the tape-bound embedding
// matrix. Throws ContractError on an empty sequence.
Tensor encode_sequence(Tape& t, const BoundGru& cell, const Tensor& table,
                       std::span<const int> ids);

// Same, but returns every hidden state (one per token) for attention.
std::vector<Tensor> encode_sequence_all(Tape& t, const BoundGru& cell,
                                        const Tensor& table,
                                        std::span<const int> ids);

}  // namespace egan
