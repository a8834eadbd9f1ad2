#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace c2s {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct TensorStorage {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first accumulated into
  bool requires_grad = false;
};
}  // namespace detail

/// Dense row-major float32 array.
///
/// A Tensor is a handle: copies share storage, which is what lets the tape
/// route gradients back to parameters. Use clone() for an independent copy.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<float> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t numel() const;

  std::span<const float> data() const;
  std::span<float> mutable_data() const;
  float item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value) const;

  bool has_grad() const;
  std::span<const float> grad() const;
  /// Gradient buffer, allocated as zeros on first access.
  std::span<float> mutable_grad() const;
  void zero_grad() const;

  Tensor clone() const;
  /// Same values, no gradient tracking, independent storage.
  Tensor detach() const;
  Tensor reshape(Shape shape) const;

  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  std::shared_ptr<detail::TensorStorage> storage_;
};

/// Ordered record of differentiable operations.
///
/// Operations record themselves on the tape active on the current thread
/// whenever one of their inputs requires a gradient. backward() replays the
/// entries in exact reverse order.
class Tape {
 public:
  void record(std::string_view op, std::function<void()> backward);
  void backward(const Tensor& loss);
  void clear();

  std::size_t size() const { return entries_.size(); }
  const std::string& op_name(std::size_t i) const { return entries_[i].op; }
  /// Indices of the entries in the order backward() visited them.
  const std::vector<std::size_t>& last_backward_order() const { return visited_; }

 private:
  struct Entry {
    std::string op;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
  std::vector<std::size_t> visited_;
};

/// Makes `tape` the active tape of this thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// Disables recording for the scope's lifetime (inference inside a training loop).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace c2s
