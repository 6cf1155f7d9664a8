#include "uwpose/tensor.hpp"

#include <sstream>

#include "uwpose/errors.hpp"

namespace uwpose::ad {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Buffer& TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, const std::vector<double>& data, bool requires_grad)
    : Tensor(from_buffer(std::move(shape), Buffer(data.begin(), data.end()), requires_grad)) {}

Tensor Tensor::from_buffer(Shape shape, Buffer data, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
  }
  if (numel(shape) != data.size()) {
    throw ShapeError("shape " + to_string(shape) + " needs " + std::to_string(numel(shape)) +
                     " elements, got " + std::to_string(data.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = numel(shape);
  return from_buffer(std::move(shape), Buffer(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(impl_->data.size(), 0.0);
  return {impl_->grad.begin(), impl_->grad.end()};
}

Tensor Tensor::detach() const { return from_buffer(impl_->shape, impl_->data, false); }

Tensor wrap(std::shared_ptr<TensorImpl> impl) { return Tensor(std::move(impl)); }

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::vector<Node> inputs, std::vector<Node> outputs, std::function<void()> backward) {
  if (replayed_) throw ContractError("cannot record on a tape that has already been replayed");
  entries_.push_back({std::move(inputs), std::move(outputs), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (replayed_) throw ContractError("tape already replayed");
  replayed_ = true;
  loss.impl()->grad_buffer()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    bool reached = false;
    for (const auto& out : it->outputs) reached = reached || !out->grad.empty();
    if (reached) it->backward();
  }
}

void backward(const Tensor& loss) {
  auto* tape = Tape::active();
  if (tape == nullptr) throw ContractError("backward() called with no active tape");
  tape->backward(loss);
}

}  // namespace uwpose::ad
