#include "splinestroke/grad/tensor.hpp"

#include <sstream>

namespace splinestroke::grad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
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

namespace detail {

void accumulate(Node& node, const Buffer& g) {
  if (!node.requires_grad) return;
  if (node.grad) {
    *node.grad += g;
  } else {
    node.grad = g;
  }
}

void check_finite(const std::string& op, const Buffer& value, const std::vector<Tensor>& inputs) {
  if (value.allFinite()) return;
  std::ostringstream os;
  os << op << ": non-finite result for input shapes";
  for (const auto& t : inputs) os << ' ' << to_string(t.shape());
  throw GradError(os.str());
}

Tensor make_result(std::string op, Shape shape, Buffer value, std::vector<Tensor> parents,
                   BackwardFn fn) {
  if (static_cast<std::size_t>(value.size()) != numel(shape)) {
    throw GradError(op + ": internal size mismatch for shape " + to_string(shape));
  }
  check_finite(op, value, parents);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = std::move(op);

  Tape& tape = Tape::current();
  bool needs = false;
  if (tape.recording()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->backward = std::move(fn);
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    tape.record(node);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

Tensor::Tensor(Shape shape, Buffer values, bool requires_grad) {
  if (static_cast<std::size_t>(values.size()) != numel(shape)) {
    throw GradError("tensor: data length " + std::to_string(values.size()) +
                    " does not match shape " + to_string(shape));
  }
  detail::check_finite("tensor", values, {});
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = static_cast<Eigen::Index>(numel(shape));
  return Tensor(std::move(shape), Buffer::Zero(n), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = static_cast<Eigen::Index>(numel(shape));
  return Tensor(std::move(shape), Buffer::Constant(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({}, Buffer::Constant(1, value), requires_grad);
}

Tensor Tensor::vector(const Eigen::VectorXd& values, bool requires_grad) {
  return Tensor({static_cast<std::size_t>(values.size())}, values.array(), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  Buffer b = Eigen::Map<const Buffer>(values.data(), static_cast<Eigen::Index>(values.size()));
  return Tensor(std::move(shape), std::move(b), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw GradError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::extent(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw GradError("axis " + std::to_string(axis) + " out of range for " + to_string(s));
  return s[axis];
}

std::size_t Tensor::size() const { return numel(shape()); }

const Buffer& Tensor::value() const {
  if (!node_) throw GradError("use of undefined tensor");
  return node_->value;
}

Buffer& Tensor::mutable_value() {
  if (!node_) throw GradError("use of undefined tensor");
  if (node_->recorded()) throw GradError("mutable_value on a non-leaf tensor (" + node_->op + ")");
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw GradError("item() on tensor of shape " + to_string(shape()));
  return value()[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!node_) throw GradError("use of undefined tensor");
  if (node_->recorded()) throw GradError("set_requires_grad on a non-leaf tensor");
  node_->requires_grad = on;
}

bool Tensor::has_grad() const { return node_ && node_->grad.has_value(); }

Buffer Tensor::grad() const {
  if (!node_) throw GradError("use of undefined tensor");
  if (node_->grad) return *node_->grad;
  return Buffer::Zero(node_->value.size());
}

void Tensor::zero_grad() {
  if (node_) node_->grad.reset();
}

Tensor Tensor::detach() const { return Tensor(shape(), value(), false); }

Tensor Tensor::clone() const { return Tensor(shape(), value(), requires_grad() && is_leaf()); }

const std::string& Tensor::op() const {
  if (!node_) throw GradError("use of undefined tensor");
  return node_->op;
}

bool Tensor::is_leaf() const { return node_ && !node_->recorded(); }

Tape& Tape::current() {
  thread_local Tape tape;
  return tape;
}

void Tape::clear() {
  for (auto& n : nodes_) {
    n->parents.clear();
    n->backward = nullptr;
  }
  nodes_.clear();
  ++epoch_;
}

void Tape::record(const std::shared_ptr<detail::Node>& node) {
  node->epoch = epoch_;
  node->tape_index = nodes_.size();
  nodes_.push_back(node);
}

NoGradGuard::NoGradGuard() : previous_(Tape::current().recording()) {
  Tape::current().set_recording(false);
}

NoGradGuard::~NoGradGuard() { Tape::current().set_recording(previous_); }

void backward(const Tensor& root) {
  if (!root.defined()) throw GradError("backward: undefined root");
  if (root.size() != 1) {
    throw GradError("backward: root must be scalar, got shape " + to_string(root.shape()));
  }
  auto node = root.node();
  Tape& tape = Tape::current();
  if (!node->recorded()) {
    throw GradError("backward: root was not produced on the tape (no input requires grad)");
  }
  if (node->epoch != tape.epoch() || !node->backward) {
    throw GradError("backward: stale tape (root recorded before the last clear)");
  }
  const auto& nodes = tape.nodes();
  // Intermediate grads from an earlier backward on this tape must not leak in.
  for (std::size_t i = 0; i <= node->tape_index; ++i) nodes[i]->grad.reset();
  node->grad = Buffer::Ones(1);
  for (std::size_t i = node->tape_index + 1; i-- > 0;) {
    auto& n = nodes[i];
    if (n->grad && n->backward) n->backward(*n->grad);
  }
}

}  // namespace splinestroke::grad
