#include "holo/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace holo::ad {

namespace {

bool any_grad(std::initializer_list<const Var*> vars) {
    for (const Var* v : vars)
        if (v->requires_grad()) return true;
    return false;
}

Var make_result(Tensor value, std::vector<std::shared_ptr<Node>> parents,
                std::function<void(Node&)> backward_fn, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    if (requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return Var(std::move(n));
}

void add_into(Tensor& dst, const Tensor& src) {
    for (long i = 0; i < src.size(); ++i) dst[i] += src[i];
}

}  // namespace

void backward(const Var& output) {
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    // iterative DFS post-order
    std::vector<std::pair<Node*, size_t>> stack{{output.node().get(), 0}};
    visited.insert(output.node().get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    output.node()->grad = Tensor(output.node()->value.shape, 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && !n->grad.shape.empty()) n->backward_fn(*n);
    }
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "ad::add");
    Tensor out = a.value();
    add_into(out, b.value());
    auto an = a.node(), bn = b.node();
    return make_result(
        std::move(out), {an, bn},
        [an, bn](Node& n) {
            if (an->requires_grad) add_into(an->ensure_grad(), n.grad);
            if (bn->requires_grad) add_into(bn->ensure_grad(), n.grad);
        },
        any_grad({&a, &b}));
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "ad::sub");
    Tensor out = a.value();
    for (long i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    auto an = a.node(), bn = b.node();
    return make_result(
        std::move(out), {an, bn},
        [an, bn](Node& n) {
            if (an->requires_grad) add_into(an->ensure_grad(), n.grad);
            if (bn->requires_grad) {
                Tensor& g = bn->ensure_grad();
                for (long i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
            }
        },
        any_grad({&a, &b}));
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "ad::mul");
    Tensor out = a.value();
    for (long i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    auto an = a.node(), bn = b.node();
    return make_result(
        std::move(out), {an, bn},
        [an, bn](Node& n) {
            if (an->requires_grad) {
                Tensor& g = an->ensure_grad();
                for (long i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                Tensor& g = bn->ensure_grad();
                for (long i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * an->value[i];
            }
        },
        any_grad({&a, &b}));
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (double& v : out.data) v *= s;
    auto an = a.node();
    return make_result(
        std::move(out), {an},
        [an, s](Node& n) {
            Tensor& g = an->ensure_grad();
            for (long i = 0; i < n.grad.size(); ++i) g[i] += s * n.grad[i];
        },
        a.requires_grad());
}

Var silu(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.data) v = v / (1.0 + std::exp(-v));
    auto an = a.node();
    return make_result(
        std::move(out), {an},
        [an](Node& n) {
            Tensor& g = an->ensure_grad();
            for (long i = 0; i < n.grad.size(); ++i) {
                const double x = an->value[i];
                const double s = 1.0 / (1.0 + std::exp(-x));
                g[i] += n.grad[i] * (s * (1.0 + x * (1.0 - s)));
            }
        },
        a.requires_grad());
}

Var sigmoid(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    auto an = a.node();
    return make_result(
        std::move(out), {an},
        [an](Node& n) {
            Tensor& g = an->ensure_grad();
            for (long i = 0; i < n.grad.size(); ++i) {
                const double s = n.value[i];
                g[i] += n.grad[i] * s * (1.0 - s);
            }
        },
        a.requires_grad());
}

Var rms_norm(const Var& a, double eps) {
    const Tensor& xv = a.value();
    if (xv.ndim() != 3) throw std::invalid_argument("ad::rms_norm: expected (c,h,w)");
    const int c = xv.dim(0);
    const long hw = static_cast<long>(xv.dim(1)) * xv.dim(2);
    Tensor out(xv.shape);
    std::vector<double> inv_rms(c);
    for (int ch = 0; ch < c; ++ch) {
        double m = 0.0;
        for (long i = 0; i < hw; ++i) m += xv[ch * hw + i] * xv[ch * hw + i];
        inv_rms[ch] = 1.0 / std::sqrt(m / static_cast<double>(hw) + eps);
        for (long i = 0; i < hw; ++i) out[ch * hw + i] = xv[ch * hw + i] * inv_rms[ch];
    }
    auto an = a.node();
    return make_result(
        std::move(out), {an},
        [an, c, hw, inv_rms = std::move(inv_rms)](Node& n) {
            Tensor& g = an->ensure_grad();
            // dL/dx_i = (g_i - y_i <g,y>/N) / rms
            for (int ch = 0; ch < c; ++ch) {
                double dot = 0.0;
                for (long i = 0; i < hw; ++i) dot += n.grad[ch * hw + i] * n.value[ch * hw + i];
                dot /= static_cast<double>(hw);
                for (long i = 0; i < hw; ++i)
                    g[ch * hw + i] +=
                        inv_rms[ch] * (n.grad[ch * hw + i] - n.value[ch * hw + i] * dot);
            }
        },
        a.requires_grad());
}

Var reshape(const Var& a, std::vector<int> shape) {
    if (Tensor::count(shape) != a.value().size())
        throw std::invalid_argument("ad::reshape: element count mismatch");
    Tensor out(shape, a.value().data);
    auto an = a.node();
    return make_result(
        std::move(out), {an},
        [an](Node& n) { add_into(an->ensure_grad(), n.grad); }, a.requires_grad());
}

Var concat_channels(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.ndim() != 3 || bv.ndim() != 3 || av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
        throw std::invalid_argument("ad::concat_channels: spatial shape mismatch");
    Tensor out({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
    std::copy(av.data.begin(), av.data.end(), out.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.size());
    auto an = a.node(), bn = b.node();
    const long na = av.size();
    return make_result(
        std::move(out), {an, bn},
        [an, bn, na](Node& n) {
            if (an->requires_grad) {
                Tensor& g = an->ensure_grad();
                for (long i = 0; i < na; ++i) g[i] += n.grad[i];
            }
            if (bn->requires_grad) {
                Tensor& g = bn->ensure_grad();
                for (long i = 0; i < n.grad.size() - na; ++i) g[i] += n.grad[na + i];
            }
        },
        any_grad({&a, &b}));
}

Var conv2d(const Var& x, const Var& w, const Var& b) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.ndim() != 3 || wv.ndim() != 4 || bv.ndim() != 1)
        throw std::invalid_argument("ad::conv2d: bad operand ranks");
    if (wv.dim(1) != xv.dim(0) || bv.dim(0) != wv.dim(0) || wv.dim(2) != wv.dim(3) ||
        wv.dim(2) % 2 == 0)
        throw std::invalid_argument("ad::conv2d: shape mismatch");

    const int cin = xv.dim(0), h = xv.dim(1), wid = xv.dim(2);
    const int cout = wv.dim(0), k = wv.dim(2), r = k / 2;

    // Row-contiguous accumulation: the tap order per output element stays
    // (c', x', y'), so results are bit-identical to the naive triple loop.
    Tensor out({cout, h, wid});
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < cout; ++c) {
        for (int xx = 0; xx < h; ++xx) {
            double* orow = &out.data[(static_cast<size_t>(c) * h + xx) * wid];
            for (int yy = 0; yy < wid; ++yy) orow[yy] = bv[c];
            for (int cp = 0; cp < cin; ++cp)
                for (int xi = 0; xi < k; ++xi) {
                    const int sx = xx + xi - r;
                    if (sx < 0 || sx >= h) continue;
                    const double* xrow = &xv.data[(static_cast<size_t>(cp) * h + sx) * wid];
                    for (int yi = 0; yi < k; ++yi) {
                        const double wgt = wv.at(c, cp, xi, yi);
                        const int d = yi - r;
                        const int y0 = std::max(0, -d), y1 = std::min(wid, wid - d);
                        for (int yy = y0; yy < y1; ++yy) orow[yy] += wgt * xrow[yy + d];
                    }
                }
        }
    }

    auto xn = x.node(), wn = w.node(), bn = b.node();
    return make_result(
        std::move(out), {xn, wn, bn},
        [xn, wn, bn, cin, h, wid, cout, k, r](Node& n) {
            const Tensor& go = n.grad;
            if (xn->requires_grad) {
                Tensor& gx = xn->ensure_grad();
#pragma omp parallel for collapse(2) schedule(static)
                for (int cp = 0; cp < cin; ++cp) {
                    for (int u = 0; u < h; ++u) {
                        double* grow = &gx.data[(static_cast<size_t>(cp) * h + u) * wid];
                        for (int xi = 0; xi < k; ++xi) {
                            const int ox = u - (xi - r);
                            if (ox < 0 || ox >= h) continue;
                            for (int c = 0; c < cout; ++c) {
                                const double* gorow =
                                    &go.data[(static_cast<size_t>(c) * h + ox) * wid];
                                for (int yi = 0; yi < k; ++yi) {
                                    const double wgt = wn->value.at(c, cp, xi, yi);
                                    const int d = yi - r;  // v - d indexes gorow
                                    const int v0 = std::max(0, d), v1 = std::min(wid, wid + d);
                                    for (int v = v0; v < v1; ++v) grow[v] += wgt * gorow[v - d];
                                }
                            }
                        }
                    }
                }
            }
            if (wn->requires_grad) {
                Tensor& gw = wn->ensure_grad();
#pragma omp parallel for collapse(2) schedule(static)
                for (int c = 0; c < cout; ++c) {
                    for (int cp = 0; cp < cin; ++cp) {
                        for (int xi = 0; xi < k; ++xi)
                            for (int yi = 0; yi < k; ++yi) {
                                const int d = yi - r;
                                const int y0 = std::max(0, -d), y1 = std::min(wid, wid - d);
                                double acc = 0.0;
                                for (int xx = 0; xx < h; ++xx) {
                                    const int sx = xx + xi - r;
                                    if (sx < 0 || sx >= h) continue;
                                    const double* gorow =
                                        &go.data[(static_cast<size_t>(c) * h + xx) * wid];
                                    const double* xrow =
                                        &xn->value.data[(static_cast<size_t>(cp) * h + sx) * wid];
                                    for (int yy = y0; yy < y1; ++yy)
                                        acc += gorow[yy] * xrow[yy + d];
                                }
                                gw.at(c, cp, xi, yi) += acc;
                            }
                    }
                }
            }
            if (bn->requires_grad) {
                Tensor& gb = bn->ensure_grad();
                for (int c = 0; c < cout; ++c) {
                    double acc = 0.0;
                    for (int xx = 0; xx < h; ++xx)
                        for (int yy = 0; yy < wid; ++yy) acc += go.at(c, xx, yy);
                    gb[c] += acc;
                }
            }
        },
        any_grad({&x, &w, &b}));
}

Var avg_pool3(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3) throw std::invalid_argument("ad::avg_pool3: expected (c,h,w)");
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double acc = 0.0;
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj) {
                        const int si = i + di, sj = j + dj;
                        if (si >= 0 && si < h && sj >= 0 && sj < w) acc += xv.at(ch, si, sj);
                    }
                out.at(ch, i, j) = acc / 9.0;
            }
    auto xn = x.node();
    return make_result(
        std::move(out), {xn},
        [xn, c, h, w](Node& n) {
            Tensor& g = xn->ensure_grad();
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        const double go = n.grad.at(ch, i, j) / 9.0;
                        for (int di = -1; di <= 1; ++di)
                            for (int dj = -1; dj <= 1; ++dj) {
                                const int si = i + di, sj = j + dj;
                                if (si >= 0 && si < h && sj >= 0 && sj < w)
                                    g.at(ch, si, sj) += go;
                            }
                    }
        },
        x.requires_grad());
}

Var down2(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3 || xv.dim(1) % 2 != 0 || xv.dim(2) % 2 != 0)
        throw std::invalid_argument("ad::down2: spatial dims must be even");
    const int c = xv.dim(0), h = xv.dim(1) / 2, w = xv.dim(2) / 2;
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
                out.at(ch, i, j) = 0.25 * (xv.at(ch, 2 * i, 2 * j) + xv.at(ch, 2 * i, 2 * j + 1) +
                                           xv.at(ch, 2 * i + 1, 2 * j) +
                                           xv.at(ch, 2 * i + 1, 2 * j + 1));
    auto xn = x.node();
    return make_result(
        std::move(out), {xn},
        [xn, c, h, w](Node& n) {
            Tensor& g = xn->ensure_grad();
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        const double go = 0.25 * n.grad.at(ch, i, j);
                        g.at(ch, 2 * i, 2 * j) += go;
                        g.at(ch, 2 * i, 2 * j + 1) += go;
                        g.at(ch, 2 * i + 1, 2 * j) += go;
                        g.at(ch, 2 * i + 1, 2 * j + 1) += go;
                    }
        },
        x.requires_grad());
}

namespace {

// Bilinear sample weights for 2x upsampling, output index i -> source
// coordinate (i + 0.5)/2 - 0.5, edges clamped.
struct Lerp {
    int i0, i1;
    double w0, w1;
};

Lerp lerp_coeff(int i, int n_in) {
    const double s = (i + 0.5) / 2.0 - 0.5;
    double f = std::floor(s);
    int i0 = static_cast<int>(f);
    double w1 = s - f;
    int i1 = i0 + 1;
    if (i0 < 0) i0 = 0;
    if (i1 > n_in - 1) i1 = n_in - 1;
    return {i0, i1, 1.0 - w1, w1};
}

}  // namespace

Var up2(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3) throw std::invalid_argument("ad::up2: expected (c,h,w)");
    const int c = xv.dim(0), hin = xv.dim(1), win = xv.dim(2);
    const int h = hin * 2, w = win * 2;
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h; ++i) {
            const Lerp li = lerp_coeff(i, hin);
            for (int j = 0; j < w; ++j) {
                const Lerp lj = lerp_coeff(j, win);
                out.at(ch, i, j) = li.w0 * (lj.w0 * xv.at(ch, li.i0, lj.i0) +
                                            lj.w1 * xv.at(ch, li.i0, lj.i1)) +
                                   li.w1 * (lj.w0 * xv.at(ch, li.i1, lj.i0) +
                                            lj.w1 * xv.at(ch, li.i1, lj.i1));
            }
        }
    auto xn = x.node();
    return make_result(
        std::move(out), {xn},
        [xn, c, h, w, hin, win](Node& n) {
            Tensor& g = xn->ensure_grad();
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < h; ++i) {
                    const Lerp li = lerp_coeff(i, hin);
                    for (int j = 0; j < w; ++j) {
                        const Lerp lj = lerp_coeff(j, win);
                        const double go = n.grad.at(ch, i, j);
                        g.at(ch, li.i0, lj.i0) += li.w0 * lj.w0 * go;
                        g.at(ch, li.i0, lj.i1) += li.w0 * lj.w1 * go;
                        g.at(ch, li.i1, lj.i0) += li.w1 * lj.w0 * go;
                        g.at(ch, li.i1, lj.i1) += li.w1 * lj.w1 * go;
                    }
                }
        },
        x.requires_grad());
}

Var chw_to_hwc(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3) throw std::invalid_argument("ad::chw_to_hwc: expected (c,h,w)");
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    Tensor out({h, w, c});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
                out[(static_cast<long>(i) * w + j) * c + ch] = xv.at(ch, i, j);
    auto xn = x.node();
    return make_result(
        std::move(out), {xn},
        [xn, c, h, w](Node& n) {
            Tensor& g = xn->ensure_grad();
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j)
                        g.at(ch, i, j) += n.grad[(static_cast<long>(i) * w + j) * c + ch];
        },
        x.requires_grad());
}

Var matmul(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.ndim() != 2 || bv.ndim() != 2 || av.dim(1) != bv.dim(0))
        throw std::invalid_argument("ad::matmul: shape mismatch");
    const int m = av.dim(0), kk = av.dim(1), nn = bv.dim(1);
    Tensor out({m, nn});
    for (int i = 0; i < m; ++i)
        for (int l = 0; l < kk; ++l) {
            const double aa = av[static_cast<long>(i) * kk + l];
            for (int j = 0; j < nn; ++j)
                out[static_cast<long>(i) * nn + j] += aa * bv[static_cast<long>(l) * nn + j];
        }
    auto an = a.node(), bn = b.node();
    return make_result(
        std::move(out), {an, bn},
        [an, bn, m, kk, nn](Node& n) {
            if (an->requires_grad) {
                Tensor& g = an->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int l = 0; l < kk; ++l) {
                        double acc = 0.0;
                        for (int j = 0; j < nn; ++j)
                            acc += n.grad[static_cast<long>(i) * nn + j] *
                                   bn->value[static_cast<long>(l) * nn + j];
                        g[static_cast<long>(i) * kk + l] += acc;
                    }
            }
            if (bn->requires_grad) {
                Tensor& g = bn->ensure_grad();
                for (int l = 0; l < kk; ++l)
                    for (int j = 0; j < nn; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i)
                            acc += an->value[static_cast<long>(i) * kk + l] *
                                   n.grad[static_cast<long>(i) * nn + j];
                        g[static_cast<long>(l) * nn + j] += acc;
                    }
            }
        },
        any_grad({&a, &b}));
}

Var transpose(const Var& a) {
    const Tensor& av = a.value();
    if (av.ndim() != 2) throw std::invalid_argument("ad::transpose: expected 2-d");
    const int m = av.dim(0), n2 = av.dim(1);
    Tensor out({n2, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n2; ++j)
            out[static_cast<long>(j) * m + i] = av[static_cast<long>(i) * n2 + j];
    auto an = a.node();
    return make_result(
        std::move(out), {an},
        [an, m, n2](Node& n) {
            Tensor& g = an->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n2; ++j)
                    g[static_cast<long>(i) * n2 + j] += n.grad[static_cast<long>(j) * m + i];
        },
        a.requires_grad());
}

Var softmax_rows(const Var& a) {
    const Tensor& av = a.value();
    if (av.ndim() != 2) throw std::invalid_argument("ad::softmax_rows: expected 2-d");
    const int m = av.dim(0), n2 = av.dim(1);
    Tensor out({m, n2});
    for (int i = 0; i < m; ++i) {
        double mx = av[static_cast<long>(i) * n2];
        for (int j = 1; j < n2; ++j) mx = std::max(mx, av[static_cast<long>(i) * n2 + j]);
        double sum = 0.0;
        for (int j = 0; j < n2; ++j) {
            const double e = std::exp(av[static_cast<long>(i) * n2 + j] - mx);
            out[static_cast<long>(i) * n2 + j] = e;
            sum += e;
        }
        for (int j = 0; j < n2; ++j) out[static_cast<long>(i) * n2 + j] /= sum;
    }
    auto an = a.node();
    return make_result(
        std::move(out), {an},
        [an, m, n2](Node& n) {
            Tensor& g = an->ensure_grad();
            for (int i = 0; i < m; ++i) {
                double dot = 0.0;
                for (int j = 0; j < n2; ++j)
                    dot += n.grad[static_cast<long>(i) * n2 + j] *
                           n.value[static_cast<long>(i) * n2 + j];
                for (int j = 0; j < n2; ++j) {
                    const long idx = static_cast<long>(i) * n2 + j;
                    g[idx] += n.value[idx] * (n.grad[idx] - dot);
                }
            }
        },
        a.requires_grad());
}

Var global_avg_pool(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3) throw std::invalid_argument("ad::global_avg_pool: expected (c,h,w)");
    const int c = xv.dim(0);
    const long hw = static_cast<long>(xv.dim(1)) * xv.dim(2);
    Tensor out({c});
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (long i = 0; i < hw; ++i) acc += xv[ch * hw + i];
        out[ch] = acc / static_cast<double>(hw);
    }
    auto xn = x.node();
    return make_result(
        std::move(out), {xn},
        [xn, c, hw](Node& n) {
            Tensor& g = xn->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                const double go = n.grad[ch] / static_cast<double>(hw);
                for (long i = 0; i < hw; ++i) g[ch * hw + i] += go;
            }
        },
        x.requires_grad());
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.ndim() != 1 || wv.ndim() != 2 || bv.ndim() != 1 || wv.dim(1) != xv.dim(0) ||
        wv.dim(0) != bv.dim(0))
        throw std::invalid_argument("ad::linear: shape mismatch");
    const int m = wv.dim(0), n2 = wv.dim(1);
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
        double acc = bv[i];
        for (int j = 0; j < n2; ++j) acc += wv[static_cast<long>(i) * n2 + j] * xv[j];
        out[i] = acc;
    }
    auto xn = x.node(), wn = w.node(), bn = b.node();
    return make_result(
        std::move(out), {xn, wn, bn},
        [xn, wn, bn, m, n2](Node& n) {
            if (xn->requires_grad) {
                Tensor& g = xn->ensure_grad();
                for (int j = 0; j < n2; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < m; ++i)
                        acc += n.grad[i] * wn->value[static_cast<long>(i) * n2 + j];
                    g[j] += acc;
                }
            }
            if (wn->requires_grad) {
                Tensor& g = wn->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n2; ++j)
                        g[static_cast<long>(i) * n2 + j] += n.grad[i] * xn->value[j];
            }
            if (bn->requires_grad) {
                Tensor& g = bn->ensure_grad();
                for (int i = 0; i < m; ++i) g[i] += n.grad[i];
            }
        },
        any_grad({&x, &w, &b}));
}

Var channel_affine(const Var& x, const Var& s, const Var& t) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3 || s.value().ndim() != 1 || t.value().ndim() != 1 ||
        s.value().dim(0) != xv.dim(0) || t.value().dim(0) != xv.dim(0))
        throw std::invalid_argument("ad::channel_affine: shape mismatch");
    const int c = xv.dim(0);
    const long hw = static_cast<long>(xv.dim(1)) * xv.dim(2);
    Tensor out = xv;
    for (int ch = 0; ch < c; ++ch) {
        const double sc = 1.0 + s.value()[ch], sh = t.value()[ch];
        for (long i = 0; i < hw; ++i) out[ch * hw + i] = out[ch * hw + i] * sc + sh;
    }
    auto xn = x.node(), sn = s.node(), tn = t.node();
    return make_result(
        std::move(out), {xn, sn, tn},
        [xn, sn, tn, c, hw](Node& n) {
            for (int ch = 0; ch < c; ++ch) {
                const double sc = 1.0 + sn->value[ch];
                double gs = 0.0, gt = 0.0;
                for (long i = 0; i < hw; ++i) {
                    const double go = n.grad[ch * hw + i];
                    if (xn->requires_grad) xn->ensure_grad()[ch * hw + i] += go * sc;
                    gs += go * xn->value[ch * hw + i];
                    gt += go;
                }
                if (sn->requires_grad) sn->ensure_grad()[ch] += gs;
                if (tn->requires_grad) tn->ensure_grad()[ch] += gt;
            }
        },
        any_grad({&x, &s, &t}));
}

Var sv_conv_op(const Var& x, const Var& v) {
    const Tensor& vv = v.value();
    if (vv.ndim() != 5) throw std::invalid_argument("ad::sv_conv_op: v must be (h,w,cin,k,k)");
    FeatureMap out = sv_conv(x.value(), SVKernel(vv));
    auto xn = x.node(), vn = v.node();
    return make_result(
        std::move(out), {xn, vn},
        [xn, vn](Node& n) {
            SvGradients g = sv_backward(n.grad, xn->value, SVKernel(vn->value));
            if (xn->requires_grad) add_into(xn->ensure_grad(), g.grad_input);
            if (vn->requires_grad) add_into(vn->ensure_grad(), g.grad_v.data);
        },
        any_grad({&x, &v}));
}

Var sac_forward_op(const Var& x, const Var& v, const Var& w) {
    const Tensor& vv = v.value();
    const Tensor& wv = w.value();
    if (vv.ndim() != 5 || wv.ndim() != 4)
        throw std::invalid_argument("ad::sac_forward_op: bad kernel ranks");
    FeatureMap out = sac_forward(x.value(), SVKernel(vv), SIKernel(wv));
    auto xn = x.node(), vn = v.node(), wn = w.node();
    return make_result(
        std::move(out), {xn, vn, wn},
        [xn, vn, wn](Node& n) {
            SacGradients g =
                sac_backward(n.grad, xn->value, SVKernel(vn->value), SIKernel(wn->value));
            if (xn->requires_grad) add_into(xn->ensure_grad(), g.grad_input);
            if (vn->requires_grad) add_into(vn->ensure_grad(), g.grad_v.data);
            if (wn->requires_grad) add_into(wn->ensure_grad(), g.grad_w.data);
        },
        any_grad({&x, &v, &w}));
}

Var masked_mse(const Var& r, const Tensor& target, const Tensor& mask, double alpha0,
               double alpha1) {
    const Tensor& rv = r.value();
    require_same_shape(rv, target, "ad::masked_mse");
    if (mask.ndim() != 3 || mask.dim(0) != 1 || mask.dim(1) != rv.dim(1) ||
        mask.dim(2) != rv.dim(2))
        throw std::invalid_argument("ad::masked_mse: mask shape mismatch");
    for (double m : mask.data)
        if (m != 0.0 && m != 1.0) throw std::invalid_argument("ad::masked_mse: non-binary mask");

    const int c = rv.dim(0);
    const long hw = static_cast<long>(rv.dim(1)) * rv.dim(2);
    const double inv_n = 1.0 / static_cast<double>(rv.size());
    double loss = 0.0;
    for (int ch = 0; ch < c; ++ch)
        for (long i = 0; i < hw; ++i) {
            const double d = rv[ch * hw + i] - target[ch * hw + i];
            const double wgt = mask[i] == 1.0 ? alpha0 : alpha1;
            loss += wgt * d * d;
        }
    loss *= inv_n;

    auto rn = r.node();
    Tensor tgt = target, msk = mask;
    return make_result(
        Tensor({1}, {loss}), {rn},
        [rn, tgt = std::move(tgt), msk = std::move(msk), alpha0, alpha1, c, hw,
         inv_n](Node& n) {
            Tensor& g = rn->ensure_grad();
            const double go = n.grad[0];
            for (int ch = 0; ch < c; ++ch)
                for (long i = 0; i < hw; ++i) {
                    const double d = rn->value[ch * hw + i] - tgt[ch * hw + i];
                    const double wgt = msk[i] == 1.0 ? alpha0 : alpha1;
                    g[ch * hw + i] += go * 2.0 * wgt * d * inv_n;
                }
        },
        r.requires_grad());
}

}  // namespace holo::ad
