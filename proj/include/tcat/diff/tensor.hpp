#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tcat::diff {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;
  bool leaf = true;

  std::vector<double>& grad_buffer();
};

/// Handle to an immutable dense array of doubles (row-major). Copies share
/// the underlying node; the only mutation allowed is on leaf parameters,
/// between passes.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor matrix(const std::vector<std::vector<double>>& rows,
                       bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() const { node_->grad.clear(); }

  // Leaf-only in-place access, used by optimizers and checkpoint loading.
  std::vector<double>& leaf_data();

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Ordered record of differentiable operations for one forward pass.
class Tape {
 public:
  struct Entry {
    std::string op;
    std::vector<std::shared_ptr<Node>> inputs;
    std::shared_ptr<Node> output;
    std::function<void()> backward;
  };

  void record(std::string op, std::vector<std::shared_ptr<Node>> inputs,
              std::shared_ptr<Node> output, std::function<void()> backward);

  /// Seeds d(root)/d(root) = 1 and replays entries in reverse. Leaf grads
  /// accumulate across calls; intermediate grads are recomputed each call.
  void backward(const Tensor& root);

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

 private:
  std::vector<Entry> entries_;
};

/// Makes `tape` the recording target on this thread for the scope's lifetime.
/// Without an active tape ops only compute values.
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

void backward(const Tensor& root);

namespace testing {
// Scales the incoming gradient of every entry recorded under `op` by
// `factor` during backward. Empty name disables. Used as a negative control
// for the gradient checker.
void corrupt_backward(const std::string& op, double factor = 1.5);
}  // namespace testing

}  // namespace tcat::diff
