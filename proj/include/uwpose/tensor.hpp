#pragma once

// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap handle to shared storage. Operations (see ops.hpp)
// record themselves on the innermost live Tape whenever one of their inputs
// requires a gradient; Tape::backward then replays the records in reverse.
//
//   ad::Tape tape;
//   auto w = ad::Tensor::zeros({3}, /*requires_grad=*/true);
//   auto loss = ad::sum(ad::mul(w, w));
//   tape.backward(loss);      // w.grad() == 2w

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace uwpose::ad {

using Shape = std::vector<std::size_t>;

// Vectorized kernels peel differently depending on where a buffer starts, so
// all numeric storage is 64-byte aligned to keep results bit-reproducible.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct TensorImpl {
  Shape shape;
  Buffer data;
  // Empty until backward touches this node; same length as data otherwise.
  Buffer grad;
  bool requires_grad = false;

  // Returns grad, zero-allocating it on first use.
  Buffer& grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, const std::vector<double>& data, bool requires_grad = false);
  static Tensor from_buffer(Shape shape, Buffer data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  // Parameter updates only; tensors recorded on a live tape must not change.
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double operator[](std::size_t i) const { return impl_->data[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool has_grad() const { return !impl_->grad.empty(); }
  // All zeros when backward never reached this tensor.
  std::vector<double> grad() const;
  void zero_grad() { impl_->grad.clear(); }

  // Deep copy without graph history.
  Tensor detach() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor wrap(std::shared_ptr<TensorImpl> impl);

  std::shared_ptr<TensorImpl> impl_;
};

Tensor wrap(std::shared_ptr<TensorImpl> impl);

// Ordered record of differentiable operations. Constructing a Tape makes it
// the active tape for the current thread until it is destroyed; tapes nest.
class Tape {
 public:
  using Node = std::shared_ptr<TensorImpl>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(std::vector<Node> inputs, std::vector<Node> outputs,
              std::function<void()> backward);
  // Seeds d(loss)/d(loss) = 1 and runs every record once, newest first.
  // Gradients accumulate into whatever is already stored on each tensor.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::vector<Node> inputs;
    std::vector<Node> outputs;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
  Tape* previous_;
  bool replayed_ = false;
};

// Backward on the active tape.
void backward(const Tensor& loss);

}  // namespace uwpose::ad
