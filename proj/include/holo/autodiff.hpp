#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "holo/sac_ops.hpp"
#include "holo/tensor.hpp"

namespace holo::ad {

/// Node of the dynamically built computation graph. Values are computed
/// eagerly; backward functions accumulate into parent gradients.
struct Node {
    Tensor value;
    Tensor grad;  // allocated on demand
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    Tensor& ensure_grad() {
        if (grad.shape.empty()) grad = Tensor(value.shape);
        return grad;
    }
};

/// Lightweight handle to a graph node.
class Var {
public:
    Var() = default;
    Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }
    explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& grad() const { return node_->ensure_grad(); }
    bool requires_grad() const { return node_->requires_grad; }
    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Reverse-mode sweep from a scalar (or any) output; seeds with ones.
void backward(const Var& output);

// Elementwise and structural ops.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var silu(const Var& a);
Var sigmoid(const Var& a);
/// Per-channel RMS normalization over spatial positions, x / sqrt(mean(x^2)+eps).
Var rms_norm(const Var& a, double eps = 1e-6);
Var reshape(const Var& a, std::vector<int> shape);
Var concat_channels(const Var& a, const Var& b);

// Spatial ops on (c,h,w) tensors.
Var conv2d(const Var& x, const Var& w, const Var& b);  // w (cout,cin,k,k), b (cout)
Var avg_pool3(const Var& x);                           // 3x3, stride 1, zero pad
Var down2(const Var& x);                               // 2x2 mean, halves resolution
Var up2(const Var& x);                                 // bilinear x2

/// (c,h,w) -> (h,w,c) permutation; feeds per-position kernel heads.
Var chw_to_hwc(const Var& x);

// Dense ops for the attention block.
Var matmul(const Var& a, const Var& b);  // (m,k) x (k,n)
Var transpose(const Var& a);             // 2-d
Var softmax_rows(const Var& a);

// Channel statistics for the global-feature module.
Var global_avg_pool(const Var& x);                               // (c,h,w) -> (c)
Var linear(const Var& x, const Var& w, const Var& b);            // (n) -> (m)
Var channel_affine(const Var& x, const Var& s, const Var& t);    // x*(1+s[c]) + t[c]

// Spatially adaptive convolution ops; v is (h,w,cin,k,k), w is (cout,cin,k,k).
Var sv_conv_op(const Var& x, const Var& v);
Var sac_forward_op(const Var& x, const Var& v, const Var& w);

/// alpha0 * mean(m (r-t)^2) + alpha1 * mean((1-m)(r-t)^2); mean over all
/// elements, mask broadcast across channels. Returns a scalar Var.
Var masked_mse(const Var& r, const Tensor& target, const Tensor& mask, double alpha0,
               double alpha1);

}  // namespace holo::ad
