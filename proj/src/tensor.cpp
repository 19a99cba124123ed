#include "egan/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>

#include "egan/rng.hpp"

namespace egan {

// --- ParameterSet ---------------------------------------------------------

Parameter& ParameterSet::add(const std::string& name, size_t rows,
                             size_t cols) {
  if (index_.count(name))
    throw ContractError("ParameterSet: duplicate parameter name " + name);
  if (rows == 0 || cols == 0)
    throw DimensionError("ParameterSet: zero-sized parameter " + name);
  params_.push_back(Parameter{name, rows, cols,
                              std::vector<double>(rows * cols, 0.0),
                              std::vector<double>(rows * cols, 0.0)});
  index_[name] = params_.size() - 1;
  return params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ContractError("ParameterSet: unknown parameter " + name);
  return params_[it->second];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ContractError("ParameterSet: unknown parameter " + name);
  return params_[it->second];
}

bool ParameterSet::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

void ParameterSet::zero_grads() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

size_t ParameterSet::total_values() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.numel();
  return n;
}

// --- Tensor accessors -----------------------------------------------------

size_t Tensor::rows() const { return tape_->node(id_).rows; }
size_t Tensor::cols() const { return tape_->node(id_).cols; }

std::span<const double> Tensor::values() const { return tape_->vals(id_); }

double Tensor::value(size_t i) const {
  auto v = values();
  if (i >= v.size()) throw ContractError("Tensor::value: index out of range");
  return v[i];
}

double Tensor::scalar() const {
  if (numel() != 1)
    throw ContractError("Tensor::scalar: tensor is not a single element");
  return values()[0];
}

std::span<const double> Tensor::grad() const {
  const auto& n = tape_->node(id_);
  if (n.bound) return n.bound->grad;
  return n.grad;
}

bool Tensor::tracked() const { return tape_->node(id_).tracked; }

// --- Tape plumbing --------------------------------------------------------

std::span<const double> Tape::vals(int id) const {
  const Node& n = node(id);
  if (n.ext) return {n.ext, n.rows * n.cols};
  return n.value;
}

std::vector<double>& Tape::grad_ref(int id) {
  Node& n = node(id);
  if (n.bound) return n.bound->grad;
  if (n.grad.empty()) n.grad.assign(n.rows * n.cols, 0.0);
  return n.grad;
}

void Tape::add_grad(int id, size_t i, double g) {
  Node& n = node(id);
  if (!n.tracked) return;
  grad_ref(id)[i] += g;
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::make(Node n) { return Tensor(this, push(std::move(n))); }

void Tape::check_same_tape(const Tensor& t) const {
  if (t.tape() != this)
    throw ContractError("tensor belongs to a different tape");
}

Tensor Tape::constant(size_t rows, size_t cols,
                      std::span<const double> values) {
  return leaf(rows, cols, values, false);
}

Tensor Tape::constant_scalar(double v) {
  return leaf(1, 1, std::span<const double>(&v, 1), false);
}

Tensor Tape::leaf(size_t rows, size_t cols, std::span<const double> values,
                  bool tracked) {
  if (rows == 0 || cols == 0) throw DimensionError("leaf: zero-sized tensor");
  if (values.size() != rows * cols)
    throw DimensionError("leaf: value count does not match shape");
  Node n;
  n.op = Op::Leaf;
  n.rows = rows;
  n.cols = cols;
  n.value.assign(values.begin(), values.end());
  n.tracked = tracked;
  return make(std::move(n));
}

Tensor Tape::param(Parameter& p) {
  if (p.value.size() != p.numel())
    throw ContractError("param: malformed parameter " + p.name);
  Node n;
  n.op = Op::Leaf;
  n.rows = p.rows;
  n.cols = p.cols;
  n.ext = p.value.data();
  n.tracked = true;
  n.bound = &p;
  return make(std::move(n));
}

void Tape::clear() { nodes_.clear(); }

// --- primitive forward passes ---------------------------------------------

namespace {

std::string shape_str(size_t r, size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape* t = a.tape();
  t->check_same_tape(b);
  size_t m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
  if (k != k2)
    throw DimensionError("matmul: " + shape_str(m, k) + " vs " +
                         shape_str(k2, n));
  Tape::Node out;
  out.op = Op::Matmul;
  out.rows = m;
  out.cols = n;
  out.value.assign(m * n, 0.0);
  auto av = a.values(), bv = b.values();
  for (size_t i = 0; i < m; ++i)
    for (size_t l = 0; l < k; ++l) {
      double ail = av[i * k + l];
      if (ail == 0.0) continue;
      const double* brow = bv.data() + l * n;
      double* orow = out.value.data() + i * n;
      for (size_t j = 0; j < n; ++j) orow[j] += ail * brow[j];
    }
  out.tracked = a.tracked() || b.tracked();
  out.in0 = a.id();
  out.in1 = b.id();
  return t->make(std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tape* t = a.tape();
  t->check_same_tape(b);
  size_t m = a.rows(), n = a.cols();
  bool same = b.rows() == m && b.cols() == n;
  bool row = !same && b.rows() == 1 && b.cols() == n;
  bool scalar = !same && !row && b.numel() == 1;
  if (!same && !row && !scalar)
    throw DimensionError("add: " + shape_str(m, n) + " vs " +
                         shape_str(b.rows(), b.cols()));
  Tape::Node out;
  out.op = Op::Add;
  out.rows = m;
  out.cols = n;
  out.value.assign(m * n, 0.0);
  auto av = a.values(), bv = b.values();
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) {
      double bval = same ? bv[i * n + j] : (row ? bv[j] : bv[0]);
      out.value[i * n + j] = av[i * n + j] + bval;
    }
  out.tracked = a.tracked() || b.tracked();
  out.in0 = a.id();
  out.in1 = b.id();
  return t->make(std::move(out));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape* t = a.tape();
  t->check_same_tape(b);
  bool same = a.rows() == b.rows() && a.cols() == b.cols();
  bool b_scalar = b.numel() == 1;
  bool a_scalar = a.numel() == 1;
  if (!same && !b_scalar && !a_scalar)
    throw DimensionError("mul: " + shape_str(a.rows(), a.cols()) + " vs " +
                         shape_str(b.rows(), b.cols()));
  const Tensor& big = (!same && a_scalar) ? b : a;
  size_t m = big.rows(), n = big.cols();
  Tape::Node out;
  out.op = Op::Mul;
  out.rows = m;
  out.cols = n;
  out.value.assign(m * n, 0.0);
  auto av = a.values(), bv = b.values();
  for (size_t i = 0; i < m * n; ++i) {
    double x = same ? av[i] : (a_scalar ? av[0] : av[i]);
    double y = same ? bv[i] : (a_scalar ? bv[i] : bv[0]);
    out.value[i] = x * y;
  }
  out.tracked = a.tracked() || b.tracked();
  out.in0 = a.id();
  out.in1 = b.id();
  return t->make(std::move(out));
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
  Tape* t = a.tape();
  t->check_same_tape(b);
  if (axis != 0 && axis != 1) throw ContractError("concat: axis must be 0 or 1");
  Tape::Node out;
  out.op = Op::Concat;
  out.axis = axis;
  auto av = a.values(), bv = b.values();
  if (axis == 0) {
    if (a.cols() != b.cols())
      throw DimensionError("concat axis 0: " + shape_str(a.rows(), a.cols()) +
                           " vs " + shape_str(b.rows(), b.cols()));
    out.rows = a.rows() + b.rows();
    out.cols = a.cols();
    out.value.assign(av.begin(), av.end());
    out.value.insert(out.value.end(), bv.begin(), bv.end());
  } else {
    if (a.rows() != b.rows())
      throw DimensionError("concat axis 1: " + shape_str(a.rows(), a.cols()) +
                           " vs " + shape_str(b.rows(), b.cols()));
    out.rows = a.rows();
    out.cols = a.cols() + b.cols();
    out.value.assign(out.rows * out.cols, 0.0);
    for (size_t i = 0; i < out.rows; ++i) {
      std::copy_n(av.data() + i * a.cols(), a.cols(),
                  out.value.data() + i * out.cols);
      std::copy_n(bv.data() + i * b.cols(), b.cols(),
                  out.value.data() + i * out.cols + a.cols());
    }
  }
  out.start = a.rows();  // remember split point (rows for axis 0)
  out.len = a.cols();    // and columns of a (for axis 1)
  out.tracked = a.tracked() || b.tracked();
  out.in0 = a.id();
  out.in1 = b.id();
  return t->make(std::move(out));
}

Tensor tanh_op(const Tensor& x) {
  Tape* t = x.tape();
  Tape::Node out;
  out.op = Op::Tanh;
  out.rows = x.rows();
  out.cols = x.cols();
  auto xv = x.values();
  out.value.resize(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out.value[i] = std::tanh(xv[i]);
  out.tracked = x.tracked();
  out.in0 = x.id();
  return t->make(std::move(out));
}

Tensor sigmoid_op(const Tensor& x) {
  Tape* t = x.tape();
  Tape::Node out;
  out.op = Op::Sigmoid;
  out.rows = x.rows();
  out.cols = x.cols();
  auto xv = x.values();
  out.value.resize(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    double v = xv[i];
    out.value[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                            : std::exp(v) / (1.0 + std::exp(v));
  }
  out.tracked = x.tracked();
  out.in0 = x.id();
  return t->make(std::move(out));
}

Tensor softmax_rows(const Tensor& x) {
  Tape* t = x.tape();
  Tape::Node out;
  out.op = Op::SoftmaxRows;
  out.rows = x.rows();
  out.cols = x.cols();
  auto xv = x.values();
  out.value.resize(xv.size());
  size_t n = x.cols();
  for (size_t i = 0; i < x.rows(); ++i) {
    const double* row = xv.data() + i * n;
    double mx = row[0];
    for (size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) {
      double e = std::exp(row[j] - mx);
      out.value[i * n + j] = e;
      sum += e;
    }
    for (size_t j = 0; j < n; ++j) out.value[i * n + j] /= sum;
  }
  out.tracked = x.tracked();
  out.in0 = x.id();
  return t->make(std::move(out));
}

Tensor log_op(const Tensor& x) {
  Tape* t = x.tape();
  Tape::Node out;
  out.op = Op::Log;
  out.rows = x.rows();
  out.cols = x.cols();
  auto xv = x.values();
  out.value.resize(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    if (xv[i] <= 0.0) throw DomainError("log: nonpositive input");
    out.value[i] = std::log(xv[i]);
  }
  out.tracked = x.tracked();
  out.in0 = x.id();
  return t->make(std::move(out));
}

Tensor embed_rows(const Tensor& table, std::span<const int> ids) {
  Tape* t = table.tape();
  if (ids.empty()) throw ContractError("embed_rows: empty id list");
  size_t v = table.rows(), d = table.cols();
  Tape::Node out;
  out.op = Op::EmbedRows;
  out.rows = ids.size();
  out.cols = d;
  out.value.assign(ids.size() * d, 0.0);
  auto tv = table.values();
  for (size_t r = 0; r < ids.size(); ++r) {
    int id = ids[r];
    if (id < 0 || static_cast<size_t>(id) >= v)
      throw ContractError("embed_rows: id " + std::to_string(id) +
                          " outside table of " + std::to_string(v) + " rows");
    std::copy_n(tv.data() + static_cast<size_t>(id) * d, d,
                out.value.data() + r * d);
  }
  out.indices.assign(ids.begin(), ids.end());
  out.tracked = table.tracked();
  out.in0 = table.id();
  return t->make(std::move(out));
}

Tensor sum_all(const Tensor& x) {
  Tape* t = x.tape();
  Tape::Node out;
  out.op = Op::SumAll;
  out.rows = 1;
  out.cols = 1;
  double s = 0.0;
  for (double v : x.values()) s += v;
  out.value.assign(1, s);
  out.tracked = x.tracked();
  out.in0 = x.id();
  return t->make(std::move(out));
}

Tensor mean_all(const Tensor& x) {
  Tape* t = x.tape();
  Tape::Node out;
  out.op = Op::MeanAll;
  out.rows = 1;
  out.cols = 1;
  double s = 0.0;
  auto xv = x.values();
  for (double v : xv) s += v;
  out.value.assign(1, s / static_cast<double>(xv.size()));
  out.tracked = x.tracked();
  out.in0 = x.id();
  return t->make(std::move(out));
}

Tensor max_axis(const Tensor& x, int axis) {
  Tape* t = x.tape();
  if (axis != 0 && axis != 1)
    throw ContractError("max_axis: axis must be 0 or 1");
  size_t m = x.rows(), n = x.cols();
  Tape::Node out;
  out.op = Op::MaxAxis;
  out.axis = axis;
  auto xv = x.values();
  if (axis == 0) {
    out.rows = 1;
    out.cols = n;
    out.value.assign(n, 0.0);
    out.indices.assign(n, 0);
    for (size_t j = 0; j < n; ++j) {
      double best = xv[j];
      size_t arg = 0;
      for (size_t i = 1; i < m; ++i)
        if (xv[i * n + j] > best) {
          best = xv[i * n + j];
          arg = i;
        }
      out.value[j] = best;
      out.indices[j] = static_cast<int>(arg);
    }
  } else {
    out.rows = m;
    out.cols = 1;
    out.value.assign(m, 0.0);
    out.indices.assign(m, 0);
    for (size_t i = 0; i < m; ++i) {
      double best = xv[i * n];
      size_t arg = 0;
      for (size_t j = 1; j < n; ++j)
        if (xv[i * n + j] > best) {
          best = xv[i * n + j];
          arg = j;
        }
      out.value[i] = best;
      out.indices[i] = static_cast<int>(arg);
    }
  }
  out.tracked = x.tracked();
  out.in0 = x.id();
  return t->make(std::move(out));
}

Tensor slice(const Tensor& x, int axis, size_t start, size_t len) {
  Tape* t = x.tape();
  if (axis != 0 && axis != 1) throw ContractError("slice: axis must be 0 or 1");
  if (len == 0) throw ContractError("slice: empty range");
  size_t m = x.rows(), n = x.cols();
  size_t extent = axis == 0 ? m : n;
  if (start + len > extent)
    throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") exceeds extent " +
                         std::to_string(extent));
  Tape::Node out;
  out.op = Op::Slice;
  out.axis = axis;
  out.start = start;
  out.len = len;
  auto xv = x.values();
  if (axis == 0) {
    out.rows = len;
    out.cols = n;
    out.value.assign(xv.begin() + static_cast<long>(start * n),
                     xv.begin() + static_cast<long>((start + len) * n));
  } else {
    out.rows = m;
    out.cols = len;
    out.value.assign(m * len, 0.0);
    for (size_t i = 0; i < m; ++i)
      std::copy_n(xv.data() + i * n + start, len, out.value.data() + i * len);
  }
  out.tracked = x.tracked();
  out.in0 = x.id();
  return t->make(std::move(out));
}

Tensor dropout_op(const Tensor& x, double rate, uint64_t seed) {
  Tape* t = x.tape();
  if (rate < 0.0 || rate >= 1.0)
    throw ContractError("dropout: rate must be in [0, 1)");
  Tape::Node out;
  out.op = Op::Dropout;
  out.rows = x.rows();
  out.cols = x.cols();
  out.a = rate;
  auto xv = x.values();
  out.value.resize(xv.size());
  out.aux.resize(xv.size());
  Rng rng(seed);
  double keep_scale = 1.0 / (1.0 - rate);
  for (size_t i = 0; i < xv.size(); ++i) {
    double mask = rng.uniform01() < rate ? 0.0 : keep_scale;
    out.aux[i] = mask;
    out.value[i] = xv[i] * mask;
  }
  out.tracked = x.tracked();
  out.in0 = x.id();
  return t->make(std::move(out));
}

Tensor clamp_op(const Tensor& x, double lo, double hi) {
  Tape* t = x.tape();
  if (!(lo < hi)) throw ContractError("clamp: lo must be below hi");
  Tape::Node out;
  out.op = Op::Clamp;
  out.rows = x.rows();
  out.cols = x.cols();
  out.a = lo;
  out.b = hi;
  auto xv = x.values();
  out.value.resize(xv.size());
  for (size_t i = 0; i < xv.size(); ++i)
    out.value[i] = std::min(std::max(xv[i], lo), hi);
  out.tracked = x.tracked();
  out.in0 = x.id();
  return t->make(std::move(out));
}

// --- conveniences ----------------------------------------------------------

Tensor neg(const Tensor& x) {
  return mul(x, x.tape()->constant_scalar(-1.0));
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor scale(const Tensor& x, double c) {
  return mul(x, x.tape()->constant_scalar(c));
}

Tensor add_const(const Tensor& x, double c) {
  return add(x, x.tape()->constant_scalar(c));
}

Tensor relu_scalar(const Tensor& x) {
  if (x.numel() != 1)
    throw ContractError("relu_scalar: tensor is not a single element");
  Tensor zero = x.tape()->constant_scalar(0.0);
  return max_axis(concat(x, zero, 1), 1);
}

// --- backward --------------------------------------------------------------

void Tape::backward(const Tensor& root) {
  check_same_tape(root);
  if (root.numel() != 1)
    throw ContractError("backward: root must hold exactly one element");
  if (!root.tracked()) return;  // constant graph; nothing depends on params

  int root_id = root.id();
  std::vector<char> reachable(static_cast<size_t>(root_id) + 1, 0);
  std::vector<int> stack{root_id};
  reachable[static_cast<size_t>(root_id)] = 1;
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const Node& n = node(id);
    for (int in : {n.in0, n.in1}) {
      if (in < 0) continue;
      if (!node(in).tracked) continue;
      if (!reachable[static_cast<size_t>(in)]) {
        reachable[static_cast<size_t>(in)] = 1;
        stack.push_back(in);
      }
    }
  }

  // Propagate this call's contribution in scratch storage first, then fold
  // it into the persistent grads, so repeated backward calls each add
  // exactly one d(root)/d(tensor) instead of compounding earlier passes.
  std::vector<std::vector<double>> scratch(static_cast<size_t>(root_id) + 1);
  scratch[static_cast<size_t>(root_id)].assign(1, 1.0);
  for (int id = root_id; id >= 0; --id) {
    if (!reachable[static_cast<size_t>(id)]) continue;
    Node& n = node(id);
    auto& s = scratch[static_cast<size_t>(id)];
    if (s.empty()) s.assign(n.rows * n.cols, 0.0);
    backprop_node(id, scratch);
  }
  for (int id = root_id; id >= 0; --id) {
    if (!reachable[static_cast<size_t>(id)]) continue;
    const auto& s = scratch[static_cast<size_t>(id)];
    if (s.empty()) continue;
    auto& g = grad_ref(id);
    for (size_t i = 0; i < s.size(); ++i) g[i] += s[i];
  }
}

void Tape::backprop_node(int id, std::vector<std::vector<double>>& scratch) {
  Node& n = node(id);
  if (n.op == Op::Leaf) return;
  std::span<const double> g(scratch[static_cast<size_t>(id)]);
  auto grad_ref = [&](int in) -> std::vector<double>& {
    auto& s = scratch[static_cast<size_t>(in)];
    if (s.empty()) {
      const Node& m_ = node(in);
      s.assign(m_.rows * m_.cols, 0.0);
    }
    return s;
  };
  size_t m = n.rows, cn = n.cols;

  switch (n.op) {
    case Op::Matmul: {
      const Node& a = node(n.in0);
      const Node& b = node(n.in1);
      size_t k = a.cols;
      auto av = vals(n.in0), bv = vals(n.in1);
      if (a.tracked) {
        auto& ga = grad_ref(n.in0);
        for (size_t i = 0; i < m; ++i)
          for (size_t l = 0; l < k; ++l) {
            double s = 0.0;
            const double* grow = g.data() + i * cn;
            const double* brow = bv.data() + l * cn;
            for (size_t j = 0; j < cn; ++j) s += grow[j] * brow[j];
            ga[i * k + l] += s;
          }
      }
      if (b.tracked) {
        auto& gb = grad_ref(n.in1);
        for (size_t i = 0; i < m; ++i)
          for (size_t l = 0; l < k; ++l) {
            double ail = av[i * k + l];
            if (ail == 0.0) continue;
            const double* grow = g.data() + i * cn;
            double* gbrow = gb.data() + l * cn;
            for (size_t j = 0; j < cn; ++j) gbrow[j] += ail * grow[j];
          }
      }
      break;
    }
    case Op::Add: {
      const Node& a = node(n.in0);
      const Node& b = node(n.in1);
      if (a.tracked) {
        auto& ga = grad_ref(n.in0);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.tracked) {
        auto& gb = grad_ref(n.in1);
        if (b.rows == m && b.cols == cn) {
          for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        } else if (b.rows * b.cols == 1) {
          double s = 0.0;
          for (double v : g) s += v;
          gb[0] += s;
        } else {  // broadcast row
          for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < cn; ++j) gb[j] += g[i * cn + j];
        }
      }
      break;
    }
    case Op::Mul: {
      const Node& a = node(n.in0);
      const Node& b = node(n.in1);
      auto av = vals(n.in0), bv = vals(n.in1);
      bool a_scalar = a.rows * a.cols == 1 && m * cn != 1;
      bool b_scalar = b.rows * b.cols == 1 && m * cn != 1;
      if (a.tracked) {
        auto& ga = grad_ref(n.in0);
        if (a_scalar) {
          double s = 0.0;
          for (size_t i = 0; i < g.size(); ++i) s += g[i] * bv[i];
          ga[0] += s;
        } else {
          for (size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * (b_scalar ? bv[0] : bv[i]);
        }
      }
      if (b.tracked) {
        auto& gb = grad_ref(n.in1);
        if (b_scalar) {
          double s = 0.0;
          for (size_t i = 0; i < g.size(); ++i) s += g[i] * av[i];
          gb[0] += s;
        } else {
          for (size_t i = 0; i < g.size(); ++i)
            gb[i] += g[i] * (a_scalar ? av[0] : av[i]);
        }
      }
      break;
    }
    case Op::Concat: {
      const Node& a = node(n.in0);
      const Node& b = node(n.in1);
      if (n.axis == 0) {
        size_t split = a.rows * a.cols;
        if (a.tracked) {
          auto& ga = grad_ref(n.in0);
          for (size_t i = 0; i < split; ++i) ga[i] += g[i];
        }
        if (b.tracked) {
          auto& gb = grad_ref(n.in1);
          for (size_t i = 0; i < b.rows * b.cols; ++i) gb[i] += g[split + i];
        }
      } else {
        size_t ac = a.cols;
        if (a.tracked) {
          auto& ga = grad_ref(n.in0);
          for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < ac; ++j) ga[i * ac + j] += g[i * cn + j];
        }
        if (b.tracked) {
          auto& gb = grad_ref(n.in1);
          for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < b.cols; ++j)
              gb[i * b.cols + j] += g[i * cn + ac + j];
        }
      }
      break;
    }
    case Op::Tanh: {
      if (!node(n.in0).tracked) break;
      auto& gx = grad_ref(n.in0);
      for (size_t i = 0; i < g.size(); ++i)
        gx[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      break;
    }
    case Op::Sigmoid: {
      if (!node(n.in0).tracked) break;
      auto& gx = grad_ref(n.in0);
      for (size_t i = 0; i < g.size(); ++i)
        gx[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      break;
    }
    case Op::SoftmaxRows: {
      if (!node(n.in0).tracked) break;
      auto& gx = grad_ref(n.in0);
      for (size_t i = 0; i < m; ++i) {
        const double* y = n.value.data() + i * cn;
        const double* gy = g.data() + i * cn;
        double dot = 0.0;
        for (size_t j = 0; j < cn; ++j) dot += gy[j] * y[j];
        for (size_t j = 0; j < cn; ++j)
          gx[i * cn + j] += y[j] * (gy[j] - dot);
      }
      break;
    }
    case Op::Log: {
      if (!node(n.in0).tracked) break;
      auto& gx = grad_ref(n.in0);
      auto xv = vals(n.in0);
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv[i];
      break;
    }
    case Op::EmbedRows: {
      if (!node(n.in0).tracked) break;
      auto& gt = grad_ref(n.in0);
      for (size_t r = 0; r < n.indices.size(); ++r) {
        size_t base = static_cast<size_t>(n.indices[r]) * cn;
        const double* grow = g.data() + r * cn;
        for (size_t j = 0; j < cn; ++j) gt[base + j] += grow[j];
      }
      break;
    }
    case Op::SumAll: {
      if (!node(n.in0).tracked) break;
      auto& gx = grad_ref(n.in0);
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
      break;
    }
    case Op::MeanAll: {
      if (!node(n.in0).tracked) break;
      auto& gx = grad_ref(n.in0);
      double s = g[0] / static_cast<double>(gx.size());
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += s;
      break;
    }
    case Op::MaxAxis: {
      if (!node(n.in0).tracked) break;
      auto& gx = grad_ref(n.in0);
      const Node& x = node(n.in0);
      if (n.axis == 0) {
        for (size_t j = 0; j < cn; ++j)
          gx[static_cast<size_t>(n.indices[j]) * x.cols + j] += g[j];
      } else {
        for (size_t i = 0; i < m; ++i)
          gx[i * x.cols + static_cast<size_t>(n.indices[i])] += g[i];
      }
      break;
    }
    case Op::Slice: {
      if (!node(n.in0).tracked) break;
      auto& gx = grad_ref(n.in0);
      const Node& x = node(n.in0);
      if (n.axis == 0) {
        for (size_t i = 0; i < g.size(); ++i)
          gx[n.start * x.cols + i] += g[i];
      } else {
        for (size_t i = 0; i < m; ++i)
          for (size_t j = 0; j < cn; ++j)
            gx[i * x.cols + n.start + j] += g[i * cn + j];
      }
      break;
    }
    case Op::Dropout: {
      if (!node(n.in0).tracked) break;
      auto& gx = grad_ref(n.in0);
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.aux[i];
      break;
    }
    case Op::Clamp: {
      if (!node(n.in0).tracked) break;
      auto& gx = grad_ref(n.in0);
      auto xv = vals(n.in0);
      for (size_t i = 0; i < g.size(); ++i)
        if (xv[i] > n.a && xv[i] < n.b) gx[i] += g[i];
      break;
    }
    case Op::Leaf:
      break;
  }
}

// --- optimizer --------------------------------------------------------------

void Optimizer::step(std::span<Parameter* const> params) {
  for (const Parameter* p : params) {
    if (p == nullptr) throw ContractError("optimizer: null parameter");
    if (p->grad.size() != p->numel())
      throw ContractError("optimizer: parameter " + p->name +
                          " is missing its gradient");
  }
  double clip_scale = 1.0;
  if (cfg_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const Parameter* p : params)
      for (double gv : p->grad) sq += gv * gv;
    double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) clip_scale = cfg_.clip_norm / norm;
  }
  ++t_;
  for (Parameter* p : params) {
    if (cfg_.kind == OptKind::Sgd) {
      for (size_t i = 0; i < p->numel(); ++i)
        p->value[i] -= cfg_.lr * clip_scale * p->grad[i];
    } else {
      auto& mbuf = m_[p->name];
      auto& vbuf = v_[p->name];
      if (mbuf.empty()) mbuf.assign(p->numel(), 0.0);
      if (vbuf.empty()) vbuf.assign(p->numel(), 0.0);
      if (mbuf.size() != p->numel() || vbuf.size() != p->numel())
        throw ContractError("optimizer: moment shape mismatch for " + p->name);
      double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
      double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
      for (size_t i = 0; i < p->numel(); ++i) {
        double gv = clip_scale * p->grad[i];
        mbuf[i] = cfg_.beta1 * mbuf[i] + (1.0 - cfg_.beta1) * gv;
        vbuf[i] = cfg_.beta2 * vbuf[i] + (1.0 - cfg_.beta2) * gv * gv;
        double mhat = mbuf[i] / bc1;
        double vhat = vbuf[i] / bc2;
        p->value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }
  for (Parameter* p : params)
    std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

void Optimizer::restore(uint64_t step_count,
                        std::map<std::string, std::vector<double>> first,
                        std::map<std::string, std::vector<double>> second) {
  t_ = step_count;
  m_ = std::move(first);
  v_ = std::move(second);
}

// --- finite differences -----------------------------------------------------

double finite_diff_check(const std::function<double(bool)>& loss_fn,
                         std::span<Parameter* const> params, double epsilon) {
  FdCheckOptions opt;
  opt.epsilon = epsilon;
  return finite_diff_check(loss_fn, params, opt);
}

double finite_diff_check(const std::function<double(bool)>& loss_fn,
                         std::span<Parameter* const> params,
                         const FdCheckOptions& opt) {
  if (!(opt.epsilon > 0.0) || opt.epsilon > 1e-2)
    throw ContractError("finite_diff_check: epsilon must be in (0, 1e-2]");
  if (params.empty())
    throw ContractError("finite_diff_check: empty parameter list");

  double l1 = loss_fn(false);
  double l2 = loss_fn(false);
  if (std::memcmp(&l1, &l2, sizeof(double)) != 0)
    throw ContractError("finite_diff_check: loss function is not deterministic");

  for (Parameter* p : params) std::fill(p->grad.begin(), p->grad.end(), 0.0);
  loss_fn(true);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);
  for (Parameter* p : params) std::fill(p->grad.begin(), p->grad.end(), 0.0);

  Rng rng(opt.seed);
  double max_err = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    const std::vector<double>& g = analytic[pi];
    size_t n = p->numel();
    size_t want = std::min(opt.coords_per_param, n);
    if (want == 0) continue;

    // Largest-gradient coordinates first, then a seeded random sample.
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    size_t top = (want + 1) / 2;
    std::partial_sort(order.begin(),
                      order.begin() + static_cast<long>(std::min(top, n)),
                      order.end(), [&](size_t a, size_t b) {
                        return std::fabs(g[a]) > std::fabs(g[b]);
                      });
    std::vector<size_t> coords(order.begin(),
                               order.begin() + static_cast<long>(top));
    while (coords.size() < want) coords.push_back(rng.uniform_index(n));
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());

    for (size_t ci : coords) {
      double saved = p->value[ci];
      p->value[ci] = saved + opt.epsilon;
      double lp = loss_fn(false);
      p->value[ci] = saved - opt.epsilon;
      double lm = loss_fn(false);
      p->value[ci] = saved;
      double central = (lp - lm) / (2.0 * opt.epsilon);
      if (std::fabs(g[ci]) < opt.floor && std::fabs(central) < opt.floor)
        continue;
      double err = std::fabs(g[ci] - central) / (std::fabs(central) + 1e-12);
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

// --- initialization ---------------------------------------------------------

void init_uniform(Parameter& p, Rng& rng, double lo, double hi) {
  for (auto& v : p.value) v = rng.uniform(lo, hi);
}

void init_glorot(Parameter& p, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(p.rows + p.cols));
  init_uniform(p, rng, -bound, bound);
}

void init_zeros(Parameter& p) {
  std::fill(p.value.begin(), p.value.end(), 0.0);
}

// --- thread cap -------------------------------------------------------------

namespace {
std::atomic<unsigned> g_thread_cap{1};
}

void set_thread_cap(unsigned n) { g_thread_cap.store(n == 0 ? 1 : n); }
unsigned thread_cap() { return g_thread_cap.load(); }

}  // namespace egan
