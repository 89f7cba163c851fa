#pragma once

#include "holo/tensor.hpp"

namespace holo {

/// Feature stack, shape (channels, height, width).
using FeatureMap = Tensor;

/// Spatially invariant (standard) convolution kernel over the window
/// Omega(k) = {-k/2 .. k/2}^2, k odd.
struct SIKernel {
    Tensor data;  // (c_out, c_in, k, k)

    SIKernel() = default;
    SIKernel(int c_out, int c_in, int k) : data({c_out, c_in, k, k}) {}
    explicit SIKernel(Tensor t) : data(std::move(t)) {}
    int out_channels() const { return data.dim(0); }
    int in_channels() const { return data.dim(1); }
    int ksize() const { return data.dim(2); }
    static SIKernel ones(int c_out, int c_in, int k) {
        SIKernel w(c_out, c_in, k);
        for (double& v : w.data.data) v = 1.0;
        return w;
    }
};

/// Spatially varying kernel: one k x k x c_in window per output position,
/// output channel fixed to 1.
struct SVKernel {
    Tensor data;  // (h, w, c_in, k, k)

    SVKernel() = default;
    SVKernel(int h, int w, int c_in, int k) : data({h, w, c_in, k, k}) {}
    explicit SVKernel(Tensor t) : data(std::move(t)) {}
    int height() const { return data.dim(0); }
    int width() const { return data.dim(1); }
    int in_channels() const { return data.dim(2); }
    int ksize() const { return data.dim(3); }

    double& at(int x, int y, int cp, int xi, int yi) {
        return data.data[(((static_cast<size_t>(x) * data.shape[1] + y) * data.shape[2] + cp) *
                              data.shape[3] +
                          xi) *
                             data.shape[4] +
                         yi];
    }
    double at(int x, int y, int cp, int xi, int yi) const {
        return const_cast<SVKernel*>(this)->at(x, y, cp, xi, yi);
    }
};

/// Materialized spatially adaptive kernel A[c,x,y,c',x',y'] = V * W.
/// Testing aid only; memory is O(c_out h w c_in k^2).
struct SAKernel {
    Tensor data;  // (c_out, h, w, c_in, k, k)

    int out_channels() const { return data.dim(0); }
    int height() const { return data.dim(1); }
    int width() const { return data.dim(2); }
    int in_channels() const { return data.dim(3); }
    int ksize() const { return data.dim(4); }

    double& at(int c, int x, int y, int cp, int xi, int yi) {
        return data.data
            [((((static_cast<size_t>(c) * data.shape[1] + x) * data.shape[2] + y) * data.shape[3] +
               cp) *
                  data.shape[4] +
              xi) *
                 data.shape[5] +
             yi];
    }
    double at(int c, int x, int y, int cp, int xi, int yi) const {
        return const_cast<SAKernel*>(this)->at(c, x, y, cp, xi, yi);
    }
};

/// Standard convolution, stride 1, zero padding, same spatial size:
/// I[c,x,y] = sum_{c',x',y'} W[c,c',x',y'] In[c', x+x', y+y'].
FeatureMap si_conv(const FeatureMap& input, const SIKernel& w);

/// Spatially varying convolution (the all-ones-W special case); single
/// output channel.
FeatureMap sv_conv(const FeatureMap& input, const SVKernel& v);

/// Elementwise kernel product A[c,x,y,c',x',y'] = V[x,y,c',x',y'] W[c,c',x',y'].
SAKernel compose_sa_kernel(const SVKernel& v, const SIKernel& w);

/// Spatially adaptive convolution, evaluated fused (A is never materialized).
FeatureMap sac_forward(const FeatureMap& input, const SVKernel& v, const SIKernel& w);

struct SacGradients {
    FeatureMap grad_input;
    SVKernel grad_v;
    SIKernel grad_w;
};

/// Exact reverse-mode gradients of sac_forward with respect to all three
/// arguments.
SacGradients sac_backward(const FeatureMap& grad_output, const FeatureMap& input,
                          const SVKernel& v, const SIKernel& w);

/// Gradients of sv_conv (input and kernel only).
struct SvGradients {
    FeatureMap grad_input;
    SVKernel grad_v;
};
SvGradients sv_backward(const FeatureMap& grad_output, const FeatureMap& input, const SVKernel& v);

}  // namespace holo
