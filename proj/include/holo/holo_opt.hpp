#pragma once

#include <cstdint>
#include <vector>

#include "holo/focal_model.hpp"
#include "holo/tensor.hpp"
#include "holo/wave_optics.hpp"

namespace holo {

enum class OptimizeVariant { multiplane, focal_surface };

struct OptimizeConfig {
    int iterations = 200;
    double learning_rate = 0.05;  // phase steps; model training keeps its own rate
    double intensity_scale = 1.0;
    uint64_t seed = 0;
    double alpha0 = 1.0;
    double alpha1 = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    OptimizeVariant variant = OptimizeVariant::multiplane;

    void validate() const;
};

/// Per-plane target intensities and focus masks (from depth quantization).
struct MultiplaneTarget {
    std::vector<Image> plane_images;  // (3,h,w) each
    std::vector<Tensor> plane_masks;  // (1,h,w) binary each
};

/// Replicates the scene image to every plane and derives the per-plane focus
/// masks by quantizing the depth map over the configured plane set.
MultiplaneTarget make_multiplane_target(const Image& rgb, const Tensor& depth,
                                        const OpticalConfig& config);

struct FocalSurfaceTargetSet {
    std::vector<ReconstructionTarget> targets;
};

/// Focus/defocus guidance with n constant focal surfaces: surface i sits at
/// plane level round(i (P-1)/(n-1)); the target is the scene image and the
/// mask is the matching quantized-depth level mask.
FocalSurfaceTargetSet make_focal_targets(const Image& rgb, const Tensor& depth,
                                         const OpticalConfig& config, int n_surfaces);

struct OptimizeResult {
    PhaseHologram hologram;
    std::vector<double> loss_trace;  // objective value at the start of each iteration
};

/// I.i.d. uniform phase in [-pi, pi); seeded-deterministic.
PhaseHologram init_phase(const OpticalConfig& config, uint64_t seed);

/// Conventional multiplane optimization: Adam on the three phase channels
/// through propagate/phase_to_field/intensity; 3 x |planes| forward
/// propagation passes per iteration.
OptimizeResult optimize_multiplane(const MultiplaneTarget& targets, const OpticalConfig& config,
                                   const OptimizeConfig& opt);

/// Focal-surface optimization through the learned transport model; |targets|
/// model inferences per iteration, all three color channels jointly.
OptimizeResult optimize_focal_surface(const FocalSurfaceTargetSet& targets,
                                      const ModelParams& model, const OpticalConfig& config,
                                      const OptimizeConfig& opt);

/// Objective value of the multiplane formulation at a given hologram;
/// masked L2 per plane over the full-color stack, summed over planes.
double multiplane_loss(const PhaseHologram& hologram, const MultiplaneTarget& targets,
                       const OpticalConfig& config, const OptimizeConfig& opt);

/// Analytic gradient of multiplane_loss with respect to the phase channels
/// (adjoint propagation through |.|^2).
Tensor multiplane_loss_grad(const PhaseHologram& hologram, const MultiplaneTarget& targets,
                            const OpticalConfig& config, const OptimizeConfig& opt);

struct TraceStats {
    double initial = 0.0;
    double final = 0.0;
    long windows = 0;       // adjacent windowed-mean comparisons
    long violations = 0;    // comparisons where the mean increased
    long improvements = 0;  // comparisons where the mean decreased
};

/// Summary over a loss trace using means of sliding windows of the given
/// length. Errors on an empty trace.
TraceStats loss_trace_stats(const std::vector<double>& trace, int window = 10);

}  // namespace holo
