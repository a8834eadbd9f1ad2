#include "c2s/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "c2s/errors.hpp"

namespace c2s {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, std::vector<float> data, bool requires_grad)
    : storage_(std::make_shared<detail::TensorStorage>()) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_string(shape));
  }
  storage_->shape = std::move(shape);
  storage_->data = std::move(data);
  storage_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<float>(n, 0.0f), requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!storage_) throw ShapeError("use of undefined tensor");
  return storage_->shape;
}

std::size_t Tensor::dim(std::size_t i) const {
  const auto& s = shape();
  if (i >= s.size()) throw ShapeError("dimension index out of range");
  return s[i];
}

std::size_t Tensor::numel() const { return storage_ ? storage_->data.size() : 0; }

std::span<const float> Tensor::data() const {
  if (!storage_) return {};
  return storage_->data;
}

std::span<float> Tensor::mutable_data() const {
  if (!storage_) return {};
  return storage_->data;
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_string(shape()));
  return storage_->data[0];
}

bool Tensor::requires_grad() const { return storage_ && storage_->requires_grad; }

void Tensor::set_requires_grad(bool value) const {
  if (!storage_) throw ShapeError("use of undefined tensor");
  storage_->requires_grad = value;
}

bool Tensor::has_grad() const { return storage_ && !storage_->grad.empty(); }

std::span<const float> Tensor::grad() const {
  if (!storage_) return {};
  return storage_->grad;
}

std::span<float> Tensor::mutable_grad() const {
  if (!storage_) throw ShapeError("use of undefined tensor");
  if (storage_->grad.empty()) storage_->grad.assign(storage_->data.size(), 0.0f);
  return storage_->grad;
}

void Tensor::zero_grad() const {
  if (storage_ && !storage_->grad.empty()) std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const {
  Tensor out(shape(), storage_->data, storage_->requires_grad);
  if (!storage_->grad.empty()) out.storage_->grad = storage_->grad;
  return out;
}

Tensor Tensor::detach() const { return Tensor(shape(), storage_->data, false); }

Tensor Tensor::reshape(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw ShapeError("cannot reshape " + shape_string(shape()) + " to " + shape_string(new_shape));
  }
  return Tensor(std::move(new_shape), storage_->data, false);
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

void Tape::record(std::string_view op, std::function<void()> backward) {
  entries_.push_back(Entry{std::string(op), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_string(loss.shape()));
  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0f;
  visited_.clear();
  visited_.reserve(entries_.size());
  for (std::size_t i = entries_.size(); i-- > 0;) {
    visited_.push_back(i);
    entries_[i].backward();
  }
}

void Tape::clear() {
  entries_.clear();
  visited_.clear();
}

}  // namespace c2s
