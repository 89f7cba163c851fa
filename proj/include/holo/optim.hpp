#pragma once

#include <vector>

#include "holo/tensor.hpp"

namespace holo {

/// Adam with the evaluation-section defaults; one instance drives model
/// training and hologram optimization alike.
class Adam {
public:
    explicit Adam(double lr = 2e-4, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /// One update over a fixed, ordered parameter list. Moment buffers are
    /// allocated on first use and must see the same shapes every step.
    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace holo
