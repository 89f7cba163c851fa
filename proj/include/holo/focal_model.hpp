#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "holo/autodiff.hpp"
#include "holo/sac_ops.hpp"
#include "holo/tensor.hpp"
#include "holo/wave_optics.hpp"

namespace holo {

/// Per-pixel target focus depth, normalized to [0,1]; every value maps to
/// exactly one configured volume plane (level j <-> j/(n_planes-1)).
struct FocalSurface {
    Tensor depth;  // (1, h, w)

    FocalSurface() = default;
    FocalSurface(int height, int width) : depth({1, height, width}) {}
    int height() const { return depth.dim(1); }
    int width() const { return depth.dim(2); }
};

/// Training triple: target image R', focal surface D, in-focus mask M.
struct ReconstructionTarget {
    Image image;          // (3, h, w)
    FocalSurface surface;
    Tensor mask;          // (1, h, w), binary
};

/// The multi-scale spatially varying kernels emitted by the generator;
/// kernels[i] has shape (n_i, c_i, k, k) with n_i = (h/2^i)(w/2^i).
struct SVKernelSet {
    std::vector<Tensor> kernels;  // exactly 4 scales
};

struct ModelConfig {
    int height = 32;
    int width = 32;
    int base_channels = 8;
    int kernel_size = 3;

    int scale_channels(int i) const { return base_channels << i; }
    void validate() const;
};

/// All learnable tensors of the kernel generator (encoder, bottleneck
/// attention, decoder, SVF heads) and the transport network (encoder with
/// SAM blocks, global-feature module, decoder), in a fixed order.
struct ModelParams {
    ModelConfig config;
    std::vector<std::pair<std::string, Tensor>> tensors;

    static ModelParams init(const ModelConfig& config, uint64_t seed);
    long parameter_count() const;
    Tensor& find(const std::string& name);
    const Tensor& find(const std::string& name) const;

    void save(const std::string& path) const;
    static ModelParams load(const std::string& path);
};

/// Multi-scale SV kernel generation from (hologram, focal surface);
/// deterministic given params.
SVKernelSet generate_sv_kernels(const PhaseHologram& hologram, const FocalSurface& surface,
                                const ModelParams& params);

/// Spatially adaptive module: branch 1 is sv_conv (all-ones SI factor),
/// branch 2 is sac_forward with the learned SI kernel; outputs concatenated.
FeatureMap sam_forward(const FeatureMap& features, const SVKernel& v, const SIKernel& w_learned);

/// Full transport: hologram in, reconstruction at the focal surface out.
/// Counts one model inference.
Image model_forward(const PhaseHologram& hologram, const FocalSurface& surface,
                    const ModelParams& params);

/// alpha0 mean(M (r-r')^2) + alpha1 mean((1-M)(r-r')^2), mean over all
/// elements.
double masked_l2_loss(const Image& r, const Image& r_target, const Tensor& mask,
                      double alpha0 = 1.0, double alpha1 = 0.5);

/// Differentiable graph over one (hologram, surface) pair. Parameter leaves
/// are ordered like ModelParams::tensors; the hologram leaf carries raw
/// radians.
struct ModelGraph {
    ad::Var output;
    ad::Var hologram;
    std::vector<ad::Var> params;
};
ModelGraph build_model_graph(const PhaseHologram& hologram, const FocalSurface& surface,
                             const ModelParams& params, bool hologram_grad, bool param_grad);

struct TrainSchedule {
    int epochs = 500;
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double lr_decay = 0.5;
    int lr_decay_every = 50;
    double alpha0 = 1.0;
    double alpha1 = 0.5;
    uint64_t seed = 0;
};

struct TrainSample {
    PhaseHologram hologram;
    ReconstructionTarget target;
};

/// Adam training over the dataset; returns the per-epoch mean loss trace.
/// Seeded-reproducible: a fixed seed yields an identical trace.
std::vector<double> train(const std::vector<TrainSample>& dataset, ModelParams& params,
                          const TrainSchedule& schedule);

}  // namespace holo
