#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace melgraph {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
class Tape;

template <typename S>
struct TensorData {
  Shape shape;
  std::vector<S> values;
  std::vector<S> grad;  // allocated lazily, same length as values
  bool requires_grad = false;
  bool grad_tracked = false;  // participates in the active tape's backward pass
  Tape<S>* tape = nullptr;
};

// Shared handle to a dense row-major n-d array. Copies alias the same
// storage; ops that record onto a tape keep their operands alive through
// these handles.
template <typename S>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, S fill = S(0)) : d_(std::make_shared<TensorData<S>>()) {
    d_->shape = std::move(shape);
    d_->values.assign(shape_numel(d_->shape), fill);
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, S v) { return Tensor(std::move(shape), v); }
  static Tensor from_values(Shape shape, std::vector<S> values) {
    Tensor t;
    t.d_ = std::make_shared<TensorData<S>>();
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
      throw std::invalid_argument("from_values: size mismatch");
    t.d_->shape = std::move(shape);
    t.d_->values = std::move(values);
    return t;
  }
  static Tensor scalar(S v) { return from_values({1}, {v}); }

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  std::int64_t ndim() const { return static_cast<std::int64_t>(d_->shape.size()); }
  std::int64_t dim(std::int64_t i) const { return d_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(d_->values.size()); }

  S* data() { return d_->values.data(); }
  const S* data() const { return d_->values.data(); }
  std::vector<S>& values() { return d_->values; }
  const std::vector<S>& values() const { return d_->values; }

  S& operator[](std::int64_t i) { return d_->values[static_cast<std::size_t>(i)]; }
  S operator[](std::int64_t i) const { return d_->values[static_cast<std::size_t>(i)]; }

  S& at(std::initializer_list<std::int64_t> idx) {
    return d_->values[static_cast<std::size_t>(flat_index(idx))];
  }
  S at(std::initializer_list<std::int64_t> idx) const {
    return d_->values[static_cast<std::size_t>(flat_index(idx))];
  }

  // 2-d Eigen view over the contiguous buffer.
  Eigen::Map<RowMat<S>> as_matrix(std::int64_t rows, std::int64_t cols) {
    if (rows * cols != numel()) throw std::invalid_argument("as_matrix: size mismatch");
    return Eigen::Map<RowMat<S>>(data(), rows, cols);
  }
  Eigen::Map<const RowMat<S>> as_matrix(std::int64_t rows, std::int64_t cols) const {
    if (rows * cols != numel()) throw std::invalid_argument("as_matrix: size mismatch");
    return Eigen::Map<const RowMat<S>>(data(), rows, cols);
  }

  void set_requires_grad(bool v) { d_->requires_grad = v; }
  bool requires_grad() const { return d_->requires_grad; }
  bool grad_tracked() const { return d_->grad_tracked; }
  Tape<S>* tape() const { return d_ ? d_->tape : nullptr; }

  bool has_grad() const { return !d_->grad.empty(); }
  // Gradient buffer, allocated on first touch. Tensor is a shared handle, so
  // the buffer stays reachable through const handles (pointer semantics).
  std::vector<S>& grad() const {
    if (d_->grad.empty()) d_->grad.assign(d_->values.size(), S(0));
    return d_->grad;
  }
  void zero_grad() {
    if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), S(0));
  }

  Tensor clone() const {
    Tensor t;
    t.d_ = std::make_shared<TensorData<S>>();
    t.d_->shape = d_->shape;
    t.d_->values = d_->values;
    return t;
  }

  std::shared_ptr<TensorData<S>> impl() const { return d_; }

 private:
  std::int64_t flat_index(std::initializer_list<std::int64_t> idx) const {
    if (static_cast<std::int64_t>(idx.size()) != ndim())
      throw std::invalid_argument("index rank mismatch");
    std::int64_t flat = 0;
    std::size_t k = 0;
    for (auto i : idx) {
      flat = flat * d_->shape[k] + i;
      ++k;
    }
    return flat;
  }

  std::shared_ptr<TensorData<S>> d_;
};

// Reverse-mode tape. Ops append one backward closure per executed primitive;
// backward() replays them in exact reverse order, then releases the graph.
template <typename S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape() { clear(); }

  // Registers a leaf whose gradient should be accumulated.
  void watch(Tensor<S>& t) {
    t.impl()->requires_grad = true;
    attach(t);
  }

  void attach(const Tensor<S>& t) {
    auto d = t.impl();
    if (d->tape && d->tape != this)
      throw std::runtime_error("tensor already attached to a different tape");
    d->tape = this;
    d->grad_tracked = true;
    touched_.push_back(d);
    consumed_ = false;
  }

  void push(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }

  // Resolves the tape shared by the given tensors (nullptr when none).
  static Tape* joint(std::initializer_list<const Tensor<S>*> ts) {
    Tape* found = nullptr;
    for (const Tensor<S>* t : ts) {
      if (!t->defined()) continue;
      Tape* tp = t->tape();
      if (!tp) continue;
      if (found && tp != found) throw std::runtime_error("operands on different tapes");
      found = tp;
    }
    return found;
  }

  void backward(const Tensor<S>& loss) {
    if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be a scalar");
    if (loss.tape() != this) throw std::invalid_argument("backward: loss not on this tape");
    if (consumed_) throw std::runtime_error("backward: tape already consumed; run a new forward pass");
    Tensor<S> l = loss;
    l.grad()[0] += S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    nodes_.clear();
    consumed_ = true;
    release_graph();
  }

  void clear() {
    nodes_.clear();
    release_graph();
    consumed_ = false;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  void release_graph() {
    for (auto& d : touched_) {
      d->tape = nullptr;
      d->grad_tracked = false;
    }
    touched_.clear();
  }

  std::vector<std::function<void()>> nodes_;
  std::vector<std::shared_ptr<TensorData<S>>> touched_;
  bool consumed_ = false;
};

// Named trainable (or buffer) tensor inside a model.
template <typename S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  bool trainable = true;
};

}  // namespace melgraph
