#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace tcm {

// Element type for all tensors. Double by default so gradient checks have
// headroom; define TCM_REAL32 for the faster single-precision build.
#ifdef TCM_REAL32
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

namespace detail {
struct TensorNode {
  Shape shape;
  std::vector<Real> values;
  std::vector<Real> grad;  // allocated iff requires_grad
  bool requires_grad = false;
};
}  // namespace detail

// Dense row-major tensor with shared-buffer value semantics: copies of a
// Tensor alias one underlying node, so optimizer updates are visible through
// every handle. A scalar is represented by an empty shape (one element).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<Real> values, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }

  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t i) const { return shape().at(i); }
  std::size_t size() const;

  std::span<Real> values();
  std::span<const Real> values() const;

  bool requires_grad() const;
  // Allocates (or drops) the gradient buffer.
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<Real> grad();
  std::span<const Real> grad() const;
  void zero_grad();

  // Value of a single-element tensor.
  Real item() const;

  // Deep copy; the clone never shares buffers with the source.
  Tensor clone() const;

  detail::TensorNode* node() const { return node_.get(); }
  std::shared_ptr<detail::TensorNode> node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;
};

// Reverse-mode tape. Operations append a record in execution order (a valid
// topological order); backward() replays the records that feed the loss in
// reverse. Per-pass gradients live in a scratch store and are added into the
// persistent .grad buffers at the end, so consecutive backward passes without
// zero_grad accumulate.
class Tape {
 public:
  // Scratch gradient store used during one backward pass.
  class GradStore {
   public:
    // Gradient buffer for `node`, or nullptr if nothing has flowed into it.
    std::vector<Real>* find(detail::TensorNode* node);
    // Gradient buffer for `node`, zero-initialized on first access.
    std::vector<Real>& at(detail::TensorNode* node, std::size_t numel);

   private:
    std::unordered_map<detail::TensorNode*, std::vector<Real>> grads_;
  };

  using BackwardFn = std::function<void(GradStore&)>;

  // Registers `output = op(inputs...)`. The closure must read the output
  // gradient from the store and accumulate into the inputs' store entries.
  void record(const Tensor& output, std::vector<Tensor> inputs, BackwardFn backward);

  // Accumulates dLoss/dx into the .grad buffer of every tensor recorded on
  // this tape that (a) feeds `loss` and (b) has requires_grad set.
  void backward(const Tensor& loss);

  // Drops all records and the intermediates they keep alive.
  void clear();

  std::size_t size() const { return records_.size(); }

 private:
  struct Record {
    std::shared_ptr<detail::TensorNode> output;
    std::vector<std::shared_ptr<detail::TensorNode>> inputs;
    BackwardFn backward;
  };
  std::vector<Record> records_;
};

}  // namespace tcm
