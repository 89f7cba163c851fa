#include "holo/sac_ops.hpp"

#include <stdexcept>

namespace holo {

namespace {

void check_feature(const FeatureMap& f, const char* what) {
    if (f.ndim() != 3) throw std::invalid_argument(std::string(what) + ": expected (c,h,w) input");
}

void check_odd(int k, const char* what) {
    if (k % 2 == 0) throw std::invalid_argument(std::string(what) + ": kernel size must be odd");
}

}  // namespace

FeatureMap si_conv(const FeatureMap& input, const SIKernel& w) {
    check_feature(input, "si_conv");
    check_odd(w.ksize(), "si_conv");
    if (input.dim(0) != w.in_channels())
        throw std::invalid_argument("si_conv: input channels do not match kernel");
    const int cin = input.dim(0), h = input.dim(1), wid = input.dim(2);
    const int cout = w.out_channels(), k = w.ksize(), r = k / 2;

    FeatureMap out({cout, h, wid});
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < cout; ++c) {
        for (int x = 0; x < h; ++x) {
            for (int y = 0; y < wid; ++y) {
                double acc = 0.0;
                for (int cp = 0; cp < cin; ++cp) {
                    for (int xi = 0; xi < k; ++xi) {
                        const int xx = x + xi - r;
                        if (xx < 0 || xx >= h) continue;
                        for (int yi = 0; yi < k; ++yi) {
                            const int yy = y + yi - r;
                            if (yy < 0 || yy >= wid) continue;
                            acc += w.data.at(c, cp, xi, yi) * input.at(cp, xx, yy);
                        }
                    }
                }
                out.at(c, x, y) = acc;
            }
        }
    }
    return out;
}

FeatureMap sv_conv(const FeatureMap& input, const SVKernel& v) {
    check_feature(input, "sv_conv");
    check_odd(v.ksize(), "sv_conv");
    if (input.dim(0) != v.in_channels() || input.dim(1) != v.height() ||
        input.dim(2) != v.width())
        throw std::invalid_argument("sv_conv: input shape does not match kernel");
    const int cin = input.dim(0), h = input.dim(1), wid = input.dim(2);
    const int k = v.ksize(), r = k / 2;

    FeatureMap out({1, h, wid});
#pragma omp parallel for schedule(static)
    for (int x = 0; x < h; ++x) {
        for (int y = 0; y < wid; ++y) {
            double acc = 0.0;
            for (int cp = 0; cp < cin; ++cp) {
                for (int xi = 0; xi < k; ++xi) {
                    const int xx = x + xi - r;
                    if (xx < 0 || xx >= h) continue;
                    for (int yi = 0; yi < k; ++yi) {
                        const int yy = y + yi - r;
                        if (yy < 0 || yy >= wid) continue;
                        acc += v.at(x, y, cp, xi, yi) * input.at(cp, xx, yy);
                    }
                }
            }
            out.at(0, x, y) = acc;
        }
    }
    return out;
}

SAKernel compose_sa_kernel(const SVKernel& v, const SIKernel& w) {
    check_odd(v.ksize(), "compose_sa_kernel");
    if (v.in_channels() != w.in_channels() || v.ksize() != w.ksize())
        throw std::invalid_argument("compose_sa_kernel: V and W disagree in c_in or k");
    const int cout = w.out_channels(), h = v.height(), wid = v.width();
    const int cin = v.in_channels(), k = v.ksize();

    SAKernel a;
    a.data = Tensor({cout, h, wid, cin, k, k});
    for (int c = 0; c < cout; ++c)
        for (int x = 0; x < h; ++x)
            for (int y = 0; y < wid; ++y)
                for (int cp = 0; cp < cin; ++cp)
                    for (int xi = 0; xi < k; ++xi)
                        for (int yi = 0; yi < k; ++yi)
                            a.at(c, x, y, cp, xi, yi) =
                                v.at(x, y, cp, xi, yi) * w.data.at(c, cp, xi, yi);
    return a;
}

FeatureMap sac_forward(const FeatureMap& input, const SVKernel& v, const SIKernel& w) {
    check_feature(input, "sac_forward");
    check_odd(v.ksize(), "sac_forward");
    if (v.in_channels() != w.in_channels() || v.ksize() != w.ksize())
        throw std::invalid_argument("sac_forward: V and W disagree in c_in or k");
    if (input.dim(0) != v.in_channels() || input.dim(1) != v.height() ||
        input.dim(2) != v.width())
        throw std::invalid_argument("sac_forward: input shape does not match V");
    const int cin = input.dim(0), h = input.dim(1), wid = input.dim(2);
    const int cout = w.out_channels(), k = v.ksize(), r = k / 2;

    // Fused V*W*input; channel summation order fixed (c' outer, then x', y')
    // for reproducibility.
    FeatureMap out({cout, h, wid});
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < cout; ++c) {
        for (int x = 0; x < h; ++x) {
            for (int y = 0; y < wid; ++y) {
                double acc = 0.0;
                for (int cp = 0; cp < cin; ++cp) {
                    for (int xi = 0; xi < k; ++xi) {
                        const int xx = x + xi - r;
                        if (xx < 0 || xx >= h) continue;
                        for (int yi = 0; yi < k; ++yi) {
                            const int yy = y + yi - r;
                            if (yy < 0 || yy >= wid) continue;
                            acc += v.at(x, y, cp, xi, yi) * w.data.at(c, cp, xi, yi) *
                                   input.at(cp, xx, yy);
                        }
                    }
                }
                out.at(c, x, y) = acc;
            }
        }
    }
    return out;
}

SacGradients sac_backward(const FeatureMap& grad_output, const FeatureMap& input,
                          const SVKernel& v, const SIKernel& w) {
    check_feature(grad_output, "sac_backward");
    const int cin = input.dim(0), h = input.dim(1), wid = input.dim(2);
    const int cout = w.out_channels(), k = v.ksize(), r = k / 2;
    if (grad_output.dim(0) != cout || grad_output.dim(1) != h || grad_output.dim(2) != wid)
        throw std::invalid_argument("sac_backward: grad_output shape does not match output");
    if (input.dim(0) != v.in_channels() || input.dim(1) != v.height() ||
        input.dim(2) != v.width() || v.in_channels() != w.in_channels() || v.ksize() != w.ksize())
        throw std::invalid_argument("sac_backward: operand shapes inconsistent");

    SacGradients g{FeatureMap({cin, h, wid}), SVKernel(h, wid, cin, k), SIKernel(cout, cin, k)};

    // d/d(input): gather over the output positions that read each input pixel.
#pragma omp parallel for collapse(2) schedule(static)
    for (int cp = 0; cp < cin; ++cp) {
        for (int u = 0; u < h; ++u) {
            for (int vv = 0; vv < wid; ++vv) {
                double acc = 0.0;
                for (int xi = 0; xi < k; ++xi) {
                    const int x = u - (xi - r);
                    if (x < 0 || x >= h) continue;
                    for (int yi = 0; yi < k; ++yi) {
                        const int y = vv - (yi - r);
                        if (y < 0 || y >= wid) continue;
                        const double vk = v.at(x, y, cp, xi, yi);
                        for (int c = 0; c < cout; ++c)
                            acc += grad_output.at(c, x, y) * vk * w.data.at(c, cp, xi, yi);
                    }
                }
                g.grad_input.at(cp, u, vv) = acc;
            }
        }
    }

    // d/dV
#pragma omp parallel for schedule(static)
    for (int x = 0; x < h; ++x) {
        for (int y = 0; y < wid; ++y) {
            for (int cp = 0; cp < cin; ++cp) {
                for (int xi = 0; xi < k; ++xi) {
                    const int xx = x + xi - r;
                    for (int yi = 0; yi < k; ++yi) {
                        const int yy = y + yi - r;
                        double acc = 0.0;
                        if (xx >= 0 && xx < h && yy >= 0 && yy < wid) {
                            const double in = input.at(cp, xx, yy);
                            for (int c = 0; c < cout; ++c)
                                acc += grad_output.at(c, x, y) * w.data.at(c, cp, xi, yi) * in;
                        }
                        g.grad_v.at(x, y, cp, xi, yi) = acc;
                    }
                }
            }
        }
    }

    // d/dW: reduction over all positions, done serially per weight element.
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < cout; ++c) {
        for (int cp = 0; cp < cin; ++cp) {
            for (int xi = 0; xi < k; ++xi) {
                for (int yi = 0; yi < k; ++yi) {
                    double acc = 0.0;
                    for (int x = 0; x < h; ++x) {
                        const int xx = x + xi - r;
                        if (xx < 0 || xx >= h) continue;
                        for (int y = 0; y < wid; ++y) {
                            const int yy = y + yi - r;
                            if (yy < 0 || yy >= wid) continue;
                            acc += grad_output.at(c, x, y) * v.at(x, y, cp, xi, yi) *
                                   input.at(cp, xx, yy);
                        }
                    }
                    g.grad_w.data.at(c, cp, xi, yi) = acc;
                }
            }
        }
    }
    return g;
}

SvGradients sv_backward(const FeatureMap& grad_output, const FeatureMap& input,
                        const SVKernel& v) {
    check_feature(grad_output, "sv_backward");
    const int cin = input.dim(0), h = input.dim(1), wid = input.dim(2);
    const int k = v.ksize(), r = k / 2;
    if (grad_output.dim(0) != 1 || grad_output.dim(1) != h || grad_output.dim(2) != wid)
        throw std::invalid_argument("sv_backward: grad_output shape does not match output");

    SvGradients g{FeatureMap({cin, h, wid}), SVKernel(h, wid, cin, k)};

#pragma omp parallel for collapse(2) schedule(static)
    for (int cp = 0; cp < cin; ++cp) {
        for (int u = 0; u < h; ++u) {
            for (int vv = 0; vv < wid; ++vv) {
                double acc = 0.0;
                for (int xi = 0; xi < k; ++xi) {
                    const int x = u - (xi - r);
                    if (x < 0 || x >= h) continue;
                    for (int yi = 0; yi < k; ++yi) {
                        const int y = vv - (yi - r);
                        if (y < 0 || y >= wid) continue;
                        acc += grad_output.at(0, x, y) * v.at(x, y, cp, xi, yi);
                    }
                }
                g.grad_input.at(cp, u, vv) = acc;
            }
        }
    }

#pragma omp parallel for schedule(static)
    for (int x = 0; x < h; ++x) {
        for (int y = 0; y < wid; ++y) {
            const double go = grad_output.at(0, x, y);
            for (int cp = 0; cp < cin; ++cp) {
                for (int xi = 0; xi < k; ++xi) {
                    const int xx = x + xi - r;
                    for (int yi = 0; yi < k; ++yi) {
                        const int yy = y + yi - r;
                        g.grad_v.at(x, y, cp, xi, yi) =
                            (xx >= 0 && xx < h && yy >= 0 && yy < wid) ? go * input.at(cp, xx, yy)
                                                                       : 0.0;
                    }
                }
            }
        }
    }
    return g;
}

}  // namespace holo
