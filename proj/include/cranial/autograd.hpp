#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cranial/tensor.hpp"

namespace cranial {

/// Node of the reverse-mode tape. Gradients are allocated lazily.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // reads self.grad, accumulates into parents

    Tensor& grad_buffer();
};

/// Handle to a tape node. Copies share the node.
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    Tensor& value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    /// Empty tensor until a backward pass reaches this node.
    const Tensor& grad() const { return node_->grad; }
    Tensor& grad() { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    void zero_grad();

    const std::shared_ptr<Node>& node() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    std::shared_ptr<Node> node_;
};

/// Leaf that receives gradients.
Var parameter(Tensor t);
/// Leaf that does not.
Var constant(Tensor t);

/// Seeds d(root)/d(root) = 1 (root must hold a single element) and runs the
/// tape in reverse topological order.
void backward(const Var& root);

// Differentiable ops. All throw ShapeMismatch on incompatible inputs.

/// Cross-correlation; weight (out_c, in_c, kd, kh, kw) with odd extents, bias (1,out_c,1,1,1).
Var conv3d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
Var leaky_relu(const Var& x, double slope = 0.01);
Var sigmoid(const Var& x);
Var upsample_nearest2x(const Var& x);
Var concat_channels(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
/// Sum of all elements as a (1,1,1,1,1) tensor.
Var sum(const Var& x);
/// Elementwise product with a constant tensor (same shape), for probing gradients.
Var weighted(const Var& x, const Tensor& weights);

/// Per batch item 1 - (2 sum(p t) + eps) / (sum(p) + sum(t) + eps), averaged.
Var soft_dice_loss(const Var& pred, const Tensor& target, double eps = 1e-5);

}  // namespace cranial
