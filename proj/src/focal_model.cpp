#include "holo/focal_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "holo/optim.hpp"
#include "holo/serialization.hpp"

namespace holo {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kScales = 4;

int fan_in(const std::vector<int>& shape) {
    int f = 1;
    for (size_t i = 1; i < shape.size(); ++i) f *= shape[i];
    return f;
}

}  // namespace

void ModelConfig::validate() const {
    if (height % 8 != 0 || width % 8 != 0 || height < 8 || width < 8)
        throw std::invalid_argument("ModelConfig: height and width must be multiples of 8");
    if (base_channels < 1) throw std::invalid_argument("ModelConfig: base_channels must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw std::invalid_argument("ModelConfig: kernel_size must be odd");
}

ModelParams ModelParams::init(const ModelConfig& config, uint64_t seed) {
    config.validate();
    ModelParams p;
    p.config = config;
    std::mt19937_64 rng(seed);

    auto add = [&](const std::string& name, std::vector<int> shape, bool he) {
        Tensor t(shape);
        if (he) {
            std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in(shape)));
            for (double& v : t.data) v = dist(rng);
        }
        p.tensors.emplace_back(name, std::move(t));
    };
    auto add_conv = [&](const std::string& name, int cout, int cin, int k) {
        add(name + ".w", {cout, cin, k, k}, true);
        add(name + ".b", {cout}, false);
    };
    auto add_linear = [&](const std::string& name, int m, int n) {
        add(name + ".w", {m, n}, true);
        add(name + ".b", {m}, false);
    };

    const int k = config.kernel_size;
    const int g3 = config.scale_channels(3);

    // Kernel generator: encoder over (phase, depth), attention bottleneck,
    // decoder with skip concatenation, one SVF head per scale.
    for (int i = 0; i < kScales; ++i) {
        const int cin = i == 0 ? 4 : config.scale_channels(i - 1);
        const int c = config.scale_channels(i);
        add_conv("kgen.enc" + std::to_string(i) + ".conv1", c, cin, k);
        add_conv("kgen.enc" + std::to_string(i) + ".conv2", c, c, k);
    }
    add_conv("kgen.attn.q", g3, g3, 1);
    add_conv("kgen.attn.k", g3, g3, 1);
    add_conv("kgen.attn.v", g3, g3, 1);
    add_conv("kgen.attn.out", g3, g3, 1);
    for (int i = kScales - 2; i >= 0; --i) {
        const int c = config.scale_channels(i);
        const int deeper = config.scale_channels(i + 1);
        add_conv("kgen.dec" + std::to_string(i) + ".conv1", c, deeper + c, k);
        add_conv("kgen.dec" + std::to_string(i) + ".conv2", c, c, k);
    }
    for (int i = 0; i < kScales; ++i) {
        const int c = config.scale_channels(i);
        add_conv("kgen.svf" + std::to_string(i) + ".conv", c * k * k, c, k);
    }

    // Transport network: encoder with one SAM per scale, global-feature
    // module at the bottleneck, decoder, linear output head.
    for (int i = 0; i < kScales; ++i) {
        const int cin = i == 0 ? 3 : config.scale_channels(i - 1);
        const int c = config.scale_channels(i);
        add_conv("tr.enc" + std::to_string(i) + ".conv1", c, cin, k);
        add("tr.sam" + std::to_string(i) + ".w", {c, c, k, k}, true);
        add_conv("tr.enc" + std::to_string(i) + ".conv2", c, c + 1, k);
    }
    add_linear("tr.gfm.fc1", g3, g3);
    add_linear("tr.gfm.scale", g3, g3);
    add_linear("tr.gfm.shift", g3, g3);
    for (int i = kScales - 2; i >= 0; --i) {
        const int c = config.scale_channels(i);
        const int deeper = config.scale_channels(i + 1);
        add_conv("tr.dec" + std::to_string(i) + ".conv1", c, deeper + c, k);
        add_conv("tr.dec" + std::to_string(i) + ".conv2", c, c, k);
    }
    add_conv("tr.out", 3, config.base_channels, k);
    return p;
}

long ModelParams::parameter_count() const {
    long n = 0;
    for (const auto& [name, t] : tensors) n += t.size();
    return n;
}

Tensor& ModelParams::find(const std::string& name) {
    for (auto& [n, t] : tensors)
        if (n == name) return t;
    throw std::invalid_argument("ModelParams: no tensor named " + name);
}

const Tensor& ModelParams::find(const std::string& name) const {
    return const_cast<ModelParams*>(this)->find(name);
}

void ModelParams::save(const std::string& path) const {
    std::vector<std::pair<std::string, Tensor>> all;
    all.emplace_back("__config__",
                     Tensor({4}, {static_cast<double>(config.height),
                                  static_cast<double>(config.width),
                                  static_cast<double>(config.base_channels),
                                  static_cast<double>(config.kernel_size)}));
    all.insert(all.end(), tensors.begin(), tensors.end());
    save_tensors(path, all);
}

ModelParams ModelParams::load(const std::string& path) {
    auto all = load_tensors(path);
    if (all.empty() || all[0].first != "__config__" || all[0].second.size() != 4)
        throw std::runtime_error(path + ": missing model config record");
    ModelParams p;
    p.config.height = static_cast<int>(all[0].second[0]);
    p.config.width = static_cast<int>(all[0].second[1]);
    p.config.base_channels = static_cast<int>(all[0].second[2]);
    p.config.kernel_size = static_cast<int>(all[0].second[3]);
    p.config.validate();
    p.tensors.assign(all.begin() + 1, all.end());
    return p;
}

namespace {

// Leaf lookup per forward pass; leaves are created in ModelParams order so
// gradients line up with the optimizer state.
struct ParamLeaves {
    std::vector<ad::Var> vars;
    const ModelParams* params;

    ParamLeaves(const ModelParams& p, bool requires_grad) : params(&p) {
        vars.reserve(p.tensors.size());
        for (const auto& [name, t] : p.tensors) vars.emplace_back(t, requires_grad);
    }
    const ad::Var& operator[](const std::string& name) const {
        for (size_t i = 0; i < params->tensors.size(); ++i)
            if (params->tensors[i].first == name) return vars[i];
        throw std::invalid_argument("ParamLeaves: no tensor named " + name);
    }
};

// Backbone block: conv, per-channel RMS normalization, SiLU. The norm keeps
// activations O(1) at every scale; without it the SAC product paths collapse
// (or blow up) at toy channel widths.
ad::Var conv_silu(const ParamLeaves& pl, const std::string& name, const ad::Var& x) {
    return ad::silu(ad::rms_norm(ad::conv2d(x, pl[name + ".w"], pl[name + ".b"])));
}

// Single-head dot-product attention over bottleneck positions, residual.
ad::Var attention_block(const ParamLeaves& pl, const ad::Var& x) {
    const int c = x.value().dim(0);
    const int n = x.value().dim(1) * x.value().dim(2);
    ad::Var q = ad::conv2d(x, pl["kgen.attn.q.w"], pl["kgen.attn.q.b"]);
    ad::Var k = ad::conv2d(x, pl["kgen.attn.k.w"], pl["kgen.attn.k.b"]);
    ad::Var v = ad::conv2d(x, pl["kgen.attn.v.w"], pl["kgen.attn.v.b"]);
    q = ad::reshape(q, {c, n});
    k = ad::reshape(k, {c, n});
    v = ad::reshape(v, {c, n});
    ad::Var scores = ad::scale(ad::matmul(ad::transpose(q), k), 1.0 / std::sqrt(c));
    ad::Var attn = ad::softmax_rows(scores);
    ad::Var y = ad::reshape(ad::matmul(v, ad::transpose(attn)), x.value().shape);
    return ad::add(x, ad::conv2d(y, pl["kgen.attn.out.w"], pl["kgen.attn.out.b"]));
}

// Global average pooling followed by per-channel affine modulation.
ad::Var global_feature_module(const ParamLeaves& pl, const ad::Var& x) {
    ad::Var g = ad::global_avg_pool(x);
    g = ad::silu(ad::linear(g, pl["tr.gfm.fc1.w"], pl["tr.gfm.fc1.b"]));
    ad::Var s = ad::linear(g, pl["tr.gfm.scale.w"], pl["tr.gfm.scale.b"]);
    ad::Var t = ad::linear(g, pl["tr.gfm.shift.w"], pl["tr.gfm.shift.b"]);
    return ad::channel_affine(x, s, t);
}

// Kernel generator; returns V_i as (h_i, w_i, c_i, k, k) graph nodes.
std::vector<ad::Var> kgen_graph(const ParamLeaves& pl, const ModelConfig& cfg,
                                const ad::Var& phase_norm, const ad::Var& depth) {
    const int k = cfg.kernel_size;
    ad::Var x = ad::concat_channels(phase_norm, depth);

    std::vector<ad::Var> enc(kScales);
    for (int i = 0; i < kScales; ++i) {
        if (i > 0) x = ad::down2(x);
        x = conv_silu(pl, "kgen.enc" + std::to_string(i) + ".conv1", x);
        x = conv_silu(pl, "kgen.enc" + std::to_string(i) + ".conv2", x);
        enc[i] = x;
    }

    std::vector<ad::Var> dec(kScales);
    dec[kScales - 1] = attention_block(pl, enc[kScales - 1]);
    for (int i = kScales - 2; i >= 0; --i) {
        ad::Var up = ad::concat_channels(ad::up2(dec[i + 1]), enc[i]);
        up = conv_silu(pl, "kgen.dec" + std::to_string(i) + ".conv1", up);
        dec[i] = conv_silu(pl, "kgen.dec" + std::to_string(i) + ".conv2", up);
    }

    std::vector<ad::Var> kernels(kScales);
    for (int i = 0; i < kScales; ++i) {
        const std::string head = "kgen.svf" + std::to_string(i) + ".conv";
        ad::Var f = ad::avg_pool3(ad::conv2d(dec[i], pl[head + ".w"], pl[head + ".b"]));
        const int hi = cfg.height >> i, wi = cfg.width >> i;
        kernels[i] =
            ad::reshape(ad::chw_to_hwc(f), {hi, wi, cfg.scale_channels(i), k, k});
    }
    return kernels;
}

// Transport network over the hologram phase, consuming the generated kernels.
ad::Var transport_graph(const ParamLeaves& pl, const ad::Var& phase_norm,
                        const std::vector<ad::Var>& kernels) {
    std::vector<ad::Var> skip(kScales);
    ad::Var x = phase_norm;
    for (int i = 0; i < kScales; ++i) {
        if (i > 0) x = ad::down2(x);
        x = conv_silu(pl, "tr.enc" + std::to_string(i) + ".conv1", x);
        ad::Var sv = ad::sv_conv_op(x, kernels[i]);
        ad::Var sa = ad::sac_forward_op(x, kernels[i], pl["tr.sam" + std::to_string(i) + ".w"]);
        x = conv_silu(pl, "tr.enc" + std::to_string(i) + ".conv2",
                      ad::concat_channels(sv, sa));
        skip[i] = x;
    }

    x = global_feature_module(pl, x);
    for (int i = kScales - 2; i >= 0; --i) {
        ad::Var up = ad::concat_channels(ad::up2(x), skip[i]);
        up = conv_silu(pl, "tr.dec" + std::to_string(i) + ".conv1", up);
        x = conv_silu(pl, "tr.dec" + std::to_string(i) + ".conv2", up);
    }
    return ad::conv2d(x, pl["tr.out.w"], pl["tr.out.b"]);
}

void check_model_inputs(const PhaseHologram& hologram, const FocalSurface& surface,
                        const ModelConfig& cfg) {
    if (hologram.height() != cfg.height || hologram.width() != cfg.width)
        throw std::invalid_argument("focal_model: hologram does not match model dimensions");
    if (surface.height() != cfg.height || surface.width() != cfg.width)
        throw std::invalid_argument("focal_model: focal surface does not match model dimensions");
}

}  // namespace

ModelGraph build_model_graph(const PhaseHologram& hologram, const FocalSurface& surface,
                             const ModelParams& params, bool hologram_grad, bool param_grad) {
    check_model_inputs(hologram, surface, params.config);
    ParamLeaves pl(params, param_grad);
    ad::Var h_leaf(hologram.phase, hologram_grad);
    ad::Var phase_norm = ad::scale(h_leaf, 1.0 / kPi);
    ad::Var depth(surface.depth, false);

    std::vector<ad::Var> kernels = kgen_graph(pl, params.config, phase_norm, depth);
    ad::Var out = transport_graph(pl, phase_norm, kernels);

    counters::model_inferences().fetch_add(1, std::memory_order_relaxed);
    return ModelGraph{std::move(out), std::move(h_leaf), std::move(pl.vars)};
}

SVKernelSet generate_sv_kernels(const PhaseHologram& hologram, const FocalSurface& surface,
                                const ModelParams& params) {
    check_model_inputs(hologram, surface, params.config);
    ParamLeaves pl(params, false);
    ad::Var h_leaf(hologram.phase, false);
    ad::Var phase_norm = ad::scale(h_leaf, 1.0 / kPi);
    ad::Var depth(surface.depth, false);
    std::vector<ad::Var> kernels = kgen_graph(pl, params.config, phase_norm, depth);

    SVKernelSet set;
    const int k = params.config.kernel_size;
    for (int i = 0; i < kScales; ++i) {
        const int n = (params.config.height >> i) * (params.config.width >> i);
        set.kernels.push_back(
            Tensor({n, params.config.scale_channels(i), k, k}, kernels[i].value().data));
    }
    return set;
}

FeatureMap sam_forward(const FeatureMap& features, const SVKernel& v, const SIKernel& w_learned) {
    FeatureMap branch_sv = sv_conv(features, v);
    FeatureMap branch_sac = sac_forward(features, v, w_learned);
    FeatureMap out({1 + branch_sac.dim(0), features.dim(1), features.dim(2)});
    std::copy(branch_sv.data.begin(), branch_sv.data.end(), out.data.begin());
    std::copy(branch_sac.data.begin(), branch_sac.data.end(),
              out.data.begin() + branch_sv.size());
    return out;
}

Image model_forward(const PhaseHologram& hologram, const FocalSurface& surface,
                    const ModelParams& params) {
    ModelGraph g = build_model_graph(hologram, surface, params, false, false);
    return g.output.value();
}

double masked_l2_loss(const Image& r, const Image& r_target, const Tensor& mask, double alpha0,
                      double alpha1) {
    require_same_shape(r, r_target, "masked_l2_loss");
    if (mask.ndim() != 3 || mask.dim(0) != 1 || mask.dim(1) != r.dim(1) ||
        mask.dim(2) != r.dim(2))
        throw std::invalid_argument("masked_l2_loss: mask shape mismatch");
    for (double m : mask.data)
        if (m != 0.0 && m != 1.0) throw std::invalid_argument("masked_l2_loss: non-binary mask");

    const int c = r.dim(0);
    const long hw = static_cast<long>(r.dim(1)) * r.dim(2);
    double loss = 0.0;
    for (int ch = 0; ch < c; ++ch)
        for (long i = 0; i < hw; ++i) {
            const double d = r[ch * hw + i] - r_target[ch * hw + i];
            loss += (mask[i] == 1.0 ? alpha0 : alpha1) * d * d;
        }
    return loss / static_cast<double>(r.size());
}

std::vector<double> train(const std::vector<TrainSample>& dataset, ModelParams& params,
                          const TrainSchedule& schedule) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    for (const TrainSample& s : dataset) {
        check_model_inputs(s.hologram, s.target.surface, params.config);
        require_same_shape(s.target.image, s.hologram.phase, "train");
    }

    Adam opt(schedule.lr, schedule.beta1, schedule.beta2);
    std::vector<Tensor*> param_ptrs;
    for (auto& [name, t] : params.tensors) param_ptrs.push_back(&t);

    std::mt19937_64 rng(schedule.seed);
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), size_t{0});

    std::vector<double> epoch_losses;
    epoch_losses.reserve(schedule.epochs);
    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        if (epoch > 0 && schedule.lr_decay_every > 0 && epoch % schedule.lr_decay_every == 0)
            opt.set_lr(opt.lr() * schedule.lr_decay);
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        for (size_t idx : order) {
            const TrainSample& s = dataset[idx];
            ModelGraph g = build_model_graph(s.hologram, s.target.surface, params, false, true);
            ad::Var loss = ad::masked_mse(g.output, s.target.image, s.target.mask,
                                          schedule.alpha0, schedule.alpha1);
            loss_sum += loss.value()[0];
            ad::backward(loss);
            std::vector<const Tensor*> grads;
            grads.reserve(g.params.size());
            for (ad::Var& leaf : g.params) grads.push_back(&leaf.grad());
            opt.step(param_ptrs, grads);
        }
        epoch_losses.push_back(loss_sum / static_cast<double>(dataset.size()));
    }
    return epoch_losses;
}

}  // namespace holo
