#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace personaforge::tensor {

using Shape = std::vector<std::size_t>;

/// Raised when operand extents are incompatible with an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a value leaves the finite range or the tape is misused.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;

  void accumulate_grad(std::size_t index, double value);
  double* grad_buffer();
};

/// Dense row-major array of doubles. Copies share storage (handle
/// semantics); use clone() for an independent deep copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                        bool requires_grad = false);
  static Tensor normal(Shape shape, double stddev, std::mt19937_64& rng,
                       bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }
  double& operator[](std::size_t i) { return impl_->data[i]; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }
  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient values; all zeros when nothing has accumulated yet.
  std::vector<double> grad() const;
  void zero_grad() { impl_->grad.clear(); }

  /// Deep copy without gradient history.
  Tensor clone() const;
  /// Same values, detached from any gradient bookkeeping.
  Tensor detach() const { return clone(); }

  bool all_finite() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend Tensor make_result(Shape shape, std::vector<double> values,
                            std::initializer_list<Tensor> inputs);
};

/// Builds an operation output; it requires grad iff any input does.
Tensor make_result(Shape shape, std::vector<double> values,
                   std::initializer_list<Tensor> inputs);

/// Ordered record of executed differentiable operations on one thread.
///
/// Constructing a Tape makes it the thread's active tape until it is
/// destroyed; operations executed while no tape is active are not recorded
/// (inference mode). Tapes nest: the innermost is active.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(std::shared_ptr<TensorImpl> output, BackwardFn fn);
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1, visits every node once in reverse execution
  /// order, then clears the record. Throws NumericError for non-scalar loss.
  void backward(const Tensor& loss);
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::shared_ptr<TensorImpl> output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  Tape* previous_;
};

/// Suspends recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool recording_enabled();

/// Runs backward on the thread's active tape.
void backward(const Tensor& loss);

}  // namespace personaforge::tensor
