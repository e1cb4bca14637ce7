#include "personaforge/tensor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace personaforge::tensor {

namespace {

thread_local Tape* g_active_tape = nullptr;
thread_local bool g_grad_suspended = false;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

void TensorImpl::accumulate_grad(std::size_t index, double value) {
  grad_buffer()[index] += value;
}

double* TensorImpl::grad_buffer() {
  if (grad.empty() && !data.empty()) grad.assign(data.size(), 0.0);
  return grad.data();
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) {
  impl_->shape = {0};
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  impl_->data.assign(shape_numel(shape), 0.0);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor: shape " + shape_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n_rows = rows.size();
  const std::size_t n_cols = n_rows ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(n_rows * n_cols);
  for (const auto& row : rows) {
    if (row.size() != n_cols) throw DimensionError("matrix: ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({n_rows, n_cols}, std::move(values));
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                       bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.impl_->data) v = dist(rng);
  return t;
}

Tensor Tensor::normal(Shape shape, double stddev, std::mt19937_64& rng,
                      bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.impl_->data) v = dist(rng);
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw DimensionError("dim: axis " + std::to_string(axis) +
                         " out of range for shape " + shape_string(shape()));
  }
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item: tensor of shape " + shape_string(shape()) +
                         " is not a scalar");
  }
  return impl_->data[0];
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return impl_->grad;
}

Tensor Tensor::clone() const {
  return Tensor(impl_->shape, impl_->data, impl_->requires_grad);
}

bool Tensor::all_finite() const {
  return std::all_of(impl_->data.begin(), impl_->data.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor make_result(Shape shape, std::vector<double> values,
                   std::initializer_list<Tensor> inputs) {
  Tensor out(std::move(shape), std::move(values));
  if (recording_enabled()) {
    for (const Tensor& in : inputs) {
      if (in.requires_grad()) {
        out.set_requires_grad(true);
        break;
      }
    }
  }
  return out;
}

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::shared_ptr<TensorImpl> output, BackwardFn fn) {
  nodes_.push_back({std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw NumericError("backward: loss must be scalar, got shape " +
                       shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw NumericError("backward: loss does not depend on any parameter");
  }
  loss.impl()->accumulate_grad(0, 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output->grad.empty()) it->backward();
  }
  nodes_.clear();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_suspended) {
  g_grad_suspended = true;
}

NoGradGuard::~NoGradGuard() { g_grad_suspended = previous_; }

bool recording_enabled() {
  return g_active_tape != nullptr && !g_grad_suspended;
}

void backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (tape == nullptr) throw NumericError("backward: no active tape");
  tape->backward(loss);
}

}  // namespace personaforge::tensor
