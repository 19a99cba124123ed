#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "egan/errors.hpp"

namespace egan {

class Tape;

// A persistent trainable weight block.  Parameters live outside any tape;
// backward passes accumulate into `grad` until an optimizer step consumes
// and zeroes it.
struct Parameter {
  std::string name;
  size_t rows = 1;
  size_t cols = 1;
  std::vector<double> value;
  std::vector<double> grad;

  size_t numel() const { return rows * cols; }
};

// Owning collection of named parameters with stable addresses.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, size_t rows, size_t cols);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  void zero_grads();
  size_t total_values() const;
  size_t count() const { return params_.size(); }

 private:
  std::deque<Parameter> params_;
  std::map<std::string, size_t> index_;
};

enum class Op : uint8_t {
  Leaf,
  Matmul,
  Add,
  Mul,
  Concat,
  Tanh,
  Sigmoid,
  SoftmaxRows,
  Log,
  EmbedRows,
  SumAll,
  MeanAll,
  MaxAxis,
  Slice,
  Dropout,
  Clamp,
};

// Handle to a node on a Tape.  Cheap to copy; valid until the tape is
// cleared or destroyed.
class Tensor {
 public:
  Tensor() = default;

  size_t rows() const;
  size_t cols() const;
  size_t numel() const { return rows() * cols(); }
  std::span<const double> values() const;
  double value(size_t i) const;
  // Value of a single-element tensor.
  double scalar() const;
  // Gradient buffer; empty span until a backward pass reaches this node.
  std::span<const double> grad() const;
  bool defined() const { return tape_ != nullptr; }
  bool tracked() const;
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Tensor(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records a topologically ordered computation graph for reverse-mode
// differentiation.  Single-threaded per instance; independent tapes may
// run concurrently over shared read-only parameters.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Untracked constant leaf (copies the data).
  Tensor constant(size_t rows, size_t cols, std::span<const double> values);
  Tensor constant_scalar(double v);
  // Tracked or untracked leaf with owned data.
  Tensor leaf(size_t rows, size_t cols, std::span<const double> values,
              bool tracked);
  // Tracked leaf viewing a parameter's storage.  Backward accumulates
  // directly into the parameter's grad.  The parameter must outlive the
  // tape and must not change value while the tape is alive.
  Tensor param(Parameter& p);

  // Accumulates d(root)/d(node) into grads of every tracked ancestor of
  // root.  root must hold exactly one element.  Repeated calls accumulate.
  void backward(const Tensor& root);

  // Drops all nodes.  Outstanding Tensor handles become invalid.
  void clear();
  size_t size() const { return nodes_.size(); }

 private:
  friend class Tensor;
  friend Tensor matmul(const Tensor&, const Tensor&);
  friend Tensor add(const Tensor&, const Tensor&);
  friend Tensor mul(const Tensor&, const Tensor&);
  friend Tensor concat(const Tensor&, const Tensor&, int);
  friend Tensor tanh_op(const Tensor&);
  friend Tensor sigmoid_op(const Tensor&);
  friend Tensor softmax_rows(const Tensor&);
  friend Tensor log_op(const Tensor&);
  friend Tensor embed_rows(const Tensor&, std::span<const int>);
  friend Tensor sum_all(const Tensor&);
  friend Tensor mean_all(const Tensor&);
  friend Tensor max_axis(const Tensor&, int);
  friend Tensor slice(const Tensor&, int, size_t, size_t);
  friend Tensor dropout_op(const Tensor&, double, uint64_t);
  friend Tensor clamp_op(const Tensor&, double, double);

  struct Node {
    Op op = Op::Leaf;
    size_t rows = 1;
    size_t cols = 1;
    std::vector<double> value;       // owned data; empty when ext is set
    const double* ext = nullptr;     // view into parameter storage
    std::vector<double> grad;        // lazily sized on backward
    bool tracked = false;
    int in0 = -1;
    int in1 = -1;
    int axis = 0;
    size_t start = 0;
    size_t len = 0;
    std::vector<int> indices;        // embedding ids or argmax positions
    std::vector<double> aux;         // dropout mask
    double a = 0.0;                  // clamp low / dropout rate
    double b = 0.0;                  // clamp high
    Parameter* bound = nullptr;
  };

  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  std::span<const double> vals(int id) const;
  std::vector<double>& grad_ref(int id);
  void add_grad(int id, size_t i, double g);
  int push(Node n);
  Tensor make(Node n);
  void check_same_tape(const Tensor& t) const;
  void backprop_node(int id, std::vector<std::vector<double>>& scratch);

  std::vector<Node> nodes_;
};

// --- primitives -----------------------------------------------------------

// (m x k) * (k x n) -> (m x n)
Tensor matmul(const Tensor& a, const Tensor& b);
// Elementwise sum.  b may also be a broadcast row (1 x n) or a scalar.
Tensor add(const Tensor& a, const Tensor& b);
// Elementwise product; either operand may be a scalar.
Tensor mul(const Tensor& a, const Tensor& b);
// Concatenation along axis 0 (stack rows) or axis 1 (extend columns).
Tensor concat(const Tensor& a, const Tensor& b, int axis);
Tensor tanh_op(const Tensor& x);
Tensor sigmoid_op(const Tensor& x);
// Row-wise softmax; every output row sums to 1.
Tensor softmax_rows(const Tensor& x);
// Natural log; every element must be positive.
Tensor log_op(const Tensor& x);
// Gathers rows of `table` (V x d) by id into a (len(ids) x d) tensor.
Tensor embed_rows(const Tensor& table, std::span<const int> ids);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
// Max reduction over the given axis; ties resolve to the first maximum and
// receive the full subgradient.
Tensor max_axis(const Tensor& x, int axis);
// Contiguous subrange along an axis.
Tensor slice(const Tensor& x, int axis, size_t start, size_t len);
// Inverted dropout with a seeded mask; rate in [0, 1).  Callers skip this
// op entirely in evaluation mode.
Tensor dropout_op(const Tensor& x, double rate, uint64_t seed);
// Clamps values into [lo, hi]; gradient passes only strictly inside.
Tensor clamp_op(const Tensor& x, double lo, double hi);

// --- conveniences (compositions of the primitives above) ------------------

Tensor neg(const Tensor& x);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);
// max(0, x) elementwise for a single-element tensor, via concat + max.
Tensor relu_scalar(const Tensor& x);

// --- optimizer ------------------------------------------------------------

enum class OptKind { Sgd, Adam };

struct OptimizerConfig {
  OptKind kind = OptKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global-norm gradient clipping threshold; 0 disables clipping.
  double clip_norm = 0.0;
};

// SGD / Adam over an explicit parameter list.  Adam moments are keyed by
// parameter name so optimizer state can round-trip through checkpoints.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  // Applies one update and zeroes all grads.  Every parameter must carry a
  // grad buffer matching its shape.
  void step(std::span<Parameter* const> params);
  void step(const std::vector<Parameter*>& params) {
    step(std::span<Parameter* const>(params.data(), params.size()));
  }

  uint64_t step_count() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

  const std::map<std::string, std::vector<double>>& first_moments() const {
    return m_;
  }
  const std::map<std::string, std::vector<double>>& second_moments() const {
    return v_;
  }
  // Restores serialized state (checkpoint resume).
  void restore(uint64_t step_count,
               std::map<std::string, std::vector<double>> first,
               std::map<std::string, std::vector<double>> second);

 private:
  OptimizerConfig cfg_;
  uint64_t t_ = 0;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
};

// --- gradient checking ----------------------------------------------------

struct FdCheckOptions {
  double epsilon = 1e-5;
  // Per parameter: half the sampled coordinates are those with the largest
  // analytic gradients, the rest are drawn at random.
  size_t coords_per_param = 10;
  // Coordinates where both analytic and numeric gradients fall below this
  // magnitude are skipped; they carry no trainable signal and sit at the
  // cancellation noise floor of central differences.
  double floor = 1e-3;
  uint64_t seed = 0x5eedULL;
};

// Compares analytic gradients with central finite differences and returns
// the maximum relative error |analytic - central| / (|central| + 1e-12)
// over the sampled coordinates.  loss_fn(true) must rebuild the graph,
// run backward, and accumulate into the params' grads; loss_fn(false)
// must only return the loss.  The loss must be deterministic: two
// identical calls returning different values raise ContractError.
double finite_diff_check(const std::function<double(bool)>& loss_fn,
                         std::span<Parameter* const> params, double epsilon);
double finite_diff_check(const std::function<double(bool)>& loss_fn,
                         std::span<Parameter* const> params,
                         const FdCheckOptions& opt);

// --- parameter initialization ---------------------------------------------

void init_uniform(Parameter& p, class Rng& rng, double lo, double hi);
// Scaled uniform (Glorot) draw in +-sqrt(6 / (rows + cols)).
void init_glorot(Parameter& p, class Rng& rng);
void init_zeros(Parameter& p);

// Process-wide cap on worker threads used for rollout batches.  Set from
// the EG_THREADS environment variable by the CLI and C API; defaults to 1.
void set_thread_cap(unsigned n);
unsigned thread_cap();

}  // namespace egan
