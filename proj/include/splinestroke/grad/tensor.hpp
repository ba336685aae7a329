#pragma once

#include "splinestroke/error.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace splinestroke::grad {

using Shape = std::vector<std::size_t>;
using Buffer = Eigen::ArrayXd;

/// Raised for shape mismatches, domain violations, non-finite values and
/// misuse of the tape.
class GradError : public Error {
 public:
  using Error::Error;
};

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct Node;
using BackwardFn = std::function<void(const Buffer& grad_out)>;

struct Node {
  Shape shape;
  Buffer value;
  std::optional<Buffer> grad;
  bool requires_grad = false;
  std::string op = "leaf";

  // Populated only for recorded (non-leaf) nodes. Dropped when the tape is
  // cleared, which releases every saved activation captured by `backward`.
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  std::uint64_t epoch = 0;
  std::size_t tape_index = static_cast<std::size_t>(-1);

  bool recorded() const { return tape_index != static_cast<std::size_t>(-1); }
};

void accumulate(Node& node, const Buffer& g);

}  // namespace detail

/// Dense row-major tensor of doubles with an optional gradient buffer.
///
/// Tensors are cheap handles: copies share the same storage and gradient.
/// Use `clone()` for a deep copy and `detach()` for a value copy that is cut
/// from the graph.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, Buffer values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(const Eigen::VectorXd& values, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t size() const;

  const Buffer& value() const;
  /// Mutable access for leaves (parameter updates, test perturbations).
  Buffer& mutable_value();
  double item() const;
  double operator[](std::size_t i) const { return value()[static_cast<Eigen::Index>(i)]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  /// Gradient buffer; zeros of matching size when none was accumulated.
  Buffer grad() const;
  void zero_grad();

  Tensor detach() const;
  Tensor clone() const;

  const std::string& op() const;
  bool is_leaf() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of differentiable operations for the current thread.
///
/// Every op whose inputs require grad appends its result here. `backward`
/// walks the record in reverse, so recording order must be a topological
/// order, which holds because results are appended after their inputs exist.
class Tape {
 public:
  static Tape& current();

  std::size_t size() const { return nodes_.size(); }
  std::uint64_t epoch() const { return epoch_; }
  void clear();

  void record(const std::shared_ptr<detail::Node>& node);
  const std::vector<std::shared_ptr<detail::Node>>& nodes() const { return nodes_; }

  bool recording() const { return enabled_; }
  void set_recording(bool on) { enabled_ = on; }

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  std::uint64_t epoch_ = 1;
  bool enabled_ = true;
};

/// Disables recording while alive; results never require grad.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Populate gradients of every requires-grad tensor reachable from `root`.
/// `root` must hold a single element and have been produced on the live tape.
void backward(const Tensor& root);

namespace detail {

/// Build the result of an op. When recording is on and any parent requires
/// grad the node is taped and `fn` is kept for the backward pass.
Tensor make_result(std::string op, Shape shape, Buffer value, std::vector<Tensor> parents,
                   BackwardFn fn);

void check_finite(const std::string& op, const Buffer& value, const std::vector<Tensor>& inputs);

}  // namespace detail

}  // namespace splinestroke::grad
