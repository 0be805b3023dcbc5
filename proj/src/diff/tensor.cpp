#include "tcat/diff/tensor.hpp"

#include <sstream>

#include "tcat/errors.hpp"

namespace tcat::diff {

namespace {

thread_local Tape* g_active_tape = nullptr;

struct Corruption {
  std::string op;
  double factor = 1.0;
};

Corruption& corruption() {
  static Corruption c;
  return c;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::ones(Shape shape, bool requires_grad) {
  return full(std::move(shape), 1.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({}, {v}, requires_grad);
}

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows,
                      bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows[0].size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return from({r, c}, std::move(data), requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape()));
  }
  return node_->shape[axis];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (rank() != 2) throw DimensionError("at(r, c) needs a matrix, got " + shape_str(shape()));
  return node_->value[r * node_->shape[1] + c];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
  }
  return node_->value[0];
}

std::vector<double>& Tensor::leaf_data() {
  if (!node_->leaf) throw ContractError("in-place access to a non-leaf tensor");
  return node_->value;
}

void Tape::record(std::string op, std::vector<std::shared_ptr<Node>> inputs,
                  std::shared_ptr<Node> output,
                  std::function<void()> backward) {
  output->leaf = false;
  entries_.push_back({std::move(op), std::move(inputs), std::move(output),
                      std::move(backward)});
}

void Tape::backward(const Tensor& root) {
  if (!root.defined() || root.size() != 1) {
    throw ContractError("backward() needs a scalar root, got " +
                        (root.defined() ? shape_str(root.shape()) : "undefined"));
  }
  Node* root_node = root.node();
  // A constant root depends on nothing, so every gradient is zero.
  if (root_node->leaf && !root_node->requires_grad) return;
  bool on_tape = root_node->leaf && root_node->requires_grad;
  for (auto& e : entries_) {
    e.output->grad.clear();
    if (e.output.get() == root_node) on_tape = true;
  }
  if (!on_tape) throw ContractError("backward() root is not recorded on this tape");

  root_node->grad_buffer()[0] += 1.0;

  const Corruption& bad = corruption();
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    if (!bad.op.empty() && it->op == bad.op) {
      for (double& g : it->output->grad) g *= bad.factor;
    }
    it->backward();
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void backward(const Tensor& root) {
  Tape* tape = active_tape();
  if (!tape) throw ContractError("backward() called with no active tape");
  tape->backward(root);
}

namespace testing {
void corrupt_backward(const std::string& op, double factor) {
  corruption() = {op, factor};
}
}  // namespace testing

}  // namespace tcat::diff
