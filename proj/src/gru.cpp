#include "egan/gru.hpp"

#include <vector>

#include "egan/errors.hpp"
#include "egan/rng.hpp"

namespace egan {

GruCell::GruCell(ParameterSet& ps, const std::string& prefix, int in,
                 int hidden)
    : in_dim(in), hidden_dim(hidden) {
  if (in < 1 || hidden < 1)
    throw ContractError("gru: dimensions must be positive");
  auto w = static_cast<size_t>(in);
  auto h = static_cast<size_t>(hidden);
  wz = &ps.add(prefix + ".wz", w, h);
  uz = &ps.add(prefix + ".uz", h, h);
  bz = &ps.add(prefix + ".bz", 1, h);
  wr = &ps.add(prefix + ".wr", w, h);
  ur = &ps.add(prefix + ".ur", h, h);
  br = &ps.add(prefix + ".br", 1, h);
  wn = &ps.add(prefix + ".wn", w, h);
  un = &ps.add(prefix + ".un", h, h);
  bn = &ps.add(prefix + ".bn", 1, h);
}

void GruCell::init(Rng& rng, double lo, double hi) {
  for (Parameter* p : {wz, uz, wr, ur, wn, un}) init_uniform(*p, rng, lo, hi);
  for (Parameter* p : {bz, br, bn}) init_zeros(*p);
}

BoundGru GruCell::bind(Tape& t) const {
  return BoundGru{t.param(*wz), t.param(*uz), t.param(*bz),
                  t.param(*wr), t.param(*ur), t.param(*br),
                  t.param(*wn), t.param(*un), t.param(*bn),
                  hidden_dim};
}

Tensor BoundGru::step(Tape& t, const Tensor& x, const Tensor& h) const {
  (void)t;
  Tensor z = sigmoid_op(add(add(matmul(x, wz), matmul(h, uz)), bz));
  Tensor r = sigmoid_op(add(add(matmul(x, wr), matmul(h, ur)), br));
  Tensor n = tanh_op(add(add(matmul(x, wn), matmul(mul(r, h), un)), bn));
  Tensor keep = add_const(neg(z), 1.0);
  return add(mul(keep, h), mul(z, n));
}

Tensor BoundGru::zero_state(Tape& t) const {
  std::vector<double> zeros(static_cast<size_t>(hidden_dim), 0.0);
  return t.constant(1, static_cast<size_t>(hidden_dim), zeros);
}

Tensor encode_sequence(Tape& t, const BoundGru& cell, const Tensor& table,
                       std::span<const int> ids) {
  auto states = encode_sequence_all(t, cell, table, ids);
  return states.back();
}

std::vector<Tensor> encode_sequence_all(Tape& t, const BoundGru& cell,
                                        const Tensor& table,
                                        std::span<const int> ids) {
  if (ids.empty()) throw ContractError("encode: empty token sequence");
  Tensor emb = embed_rows(table, ids);
  Tensor h = cell.zero_state(t);
  std::vector<Tensor> states;
  states.reserve(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    Tensor x = slice(emb, 0, i, 1);
    h = cell.step(t, x, h);
    states.push_back(h);
  }
  return states;
}

}  // namespace egan
