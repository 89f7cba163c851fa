#include "holo/holo_opt.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "holo/dataset_gen.hpp"
#include "holo/optim.hpp"

namespace holo {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_multiplane(const MultiplaneTarget& targets, const OpticalConfig& config) {
    if (targets.plane_images.size() != static_cast<size_t>(config.plane_count()) ||
        targets.plane_masks.size() != targets.plane_images.size())
        throw std::invalid_argument("optimize_multiplane: plane count mismatch with config");
    for (size_t j = 0; j < targets.plane_images.size(); ++j) {
        const Image& img = targets.plane_images[j];
        if (img.ndim() != 3 || img.dim(0) != 3 || img.dim(1) != config.height ||
            img.dim(2) != config.width)
            throw std::invalid_argument("optimize_multiplane: bad target image shape");
        const Tensor& m = targets.plane_masks[j];
        if (m.ndim() != 3 || m.dim(0) != 1 || m.dim(1) != config.height ||
            m.dim(2) != config.width)
            throw std::invalid_argument("optimize_multiplane: bad mask shape");
    }
}

// Loss and (optionally) phase gradient of the multiplane objective. The loss
// is the masked L2 of the full-color intensity stack at each plane, summed
// over planes; gradients flow through |.|^2 via adjoint propagation.
double multiplane_eval(const PhaseHologram& hologram, const MultiplaneTarget& targets,
                       const OpticalConfig& config,
                       const std::vector<std::vector<PropagationKernel>>& kernels,
                       const OptimizeConfig& opt, Tensor* grad_out) {
    const int h = config.height, w = config.width;
    const long hw = static_cast<long>(h) * w;
    const double inv_n = 1.0 / (3.0 * static_cast<double>(hw));
    const double s = opt.intensity_scale;

    double loss = 0.0;
    if (grad_out) *grad_out = Tensor({3, h, w});
    for (int p = 0; p < 3; ++p) {
        ComplexField v = phase_to_field(hologram, p, config);
        for (int j = 0; j < config.plane_count(); ++j) {
            ComplexField u = propagate(v, kernels[j][p]);
            const Image& target = targets.plane_images[j];
            const Tensor& mask = targets.plane_masks[j];
            ComplexField residual(w, h, v.wavelength_nm, v.pixel_pitch_um);
            for (int x = 0; x < h; ++x) {
                for (int y = 0; y < w; ++y) {
                    const double inten = std::norm(u.at(x, y));
                    const double diff = inten - s * target.at(p, x, y);
                    const double wgt =
                        (mask.at(0, x, y) == 1.0 ? opt.alpha0 : opt.alpha1) * inv_n;
                    loss += wgt * diff * diff;
                    if (grad_out) residual.at(x, y) = 2.0 * wgt * diff * u.at(x, y);
                }
            }
            if (grad_out) {
                ComplexField b = propagate_adjoint(residual, kernels[j][p]);
                for (int x = 0; x < h; ++x)
                    for (int y = 0; y < w; ++y)
                        grad_out->at(p, x, y) +=
                            2.0 * std::imag(std::conj(v.at(x, y)) * b.at(x, y));
            }
        }
    }
    return loss;
}

std::vector<std::vector<PropagationKernel>> build_plane_kernels(const OpticalConfig& config) {
    std::vector<std::vector<PropagationKernel>> kernels(config.plane_count());
    for (int j = 0; j < config.plane_count(); ++j)
        for (int p = 0; p < 3; ++p)
            kernels[j].push_back(build_asm_kernel(config, p, config.plane_distance_mm(j)));
    return kernels;
}

}  // namespace

void OptimizeConfig::validate() const {
    if (iterations < 0) throw std::invalid_argument("OptimizeConfig: iterations must be >= 0");
    if (learning_rate < 0.0)
        throw std::invalid_argument("OptimizeConfig: learning rate must be >= 0");
}

MultiplaneTarget make_multiplane_target(const Image& rgb, const Tensor& depth,
                                        const OpticalConfig& config) {
    if (rgb.ndim() != 3 || rgb.dim(0) != 3)
        throw std::invalid_argument("make_multiplane_target: rgb must be (3,h,w)");
    MultiplaneTarget t;
    std::vector<Tensor> masks = quantize_depth(depth, config.plane_count());
    for (int j = 0; j < config.plane_count(); ++j) {
        t.plane_images.push_back(rgb);
        t.plane_masks.push_back(std::move(masks[j]));
    }
    return t;
}

FocalSurfaceTargetSet make_focal_targets(const Image& rgb, const Tensor& depth,
                                         const OpticalConfig& config, int n_surfaces) {
    if (n_surfaces < 1 || n_surfaces > config.plane_count())
        throw std::invalid_argument("make_focal_targets: surface count out of range");
    const int planes = config.plane_count();
    std::vector<Tensor> masks = quantize_depth(depth, planes);

    FocalSurfaceTargetSet set;
    for (int i = 0; i < n_surfaces; ++i) {
        const int level =
            n_surfaces == 1 ? (planes - 1) / 2
                            : static_cast<int>(std::lround(static_cast<double>(i) * (planes - 1) /
                                                           (n_surfaces - 1)));
        ReconstructionTarget t;
        t.image = rgb;
        t.surface = FocalSurface(rgb.dim(1), rgb.dim(2));
        const double value = planes == 1 ? 0.0 : static_cast<double>(level) / (planes - 1);
        for (double& v : t.surface.depth.data) v = value;
        t.mask = masks[level];
        set.targets.push_back(std::move(t));
    }
    return set;
}

PhaseHologram init_phase(const OpticalConfig& config, uint64_t seed) {
    PhaseHologram h(config.height, config.width);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-kPi, kPi);
    for (double& v : h.phase.data) v = dist(rng);
    return h;
}

OptimizeResult optimize_multiplane(const MultiplaneTarget& targets, const OpticalConfig& config,
                                   const OptimizeConfig& opt) {
    config.validate();
    opt.validate();
    check_multiplane(targets, config);

    OptimizeResult result{init_phase(config, opt.seed), {}};
    result.loss_trace.reserve(opt.iterations);
    auto kernels = build_plane_kernels(config);

    Adam optimizer(opt.learning_rate, opt.beta1, opt.beta2);
    for (int it = 0; it < opt.iterations; ++it) {
        Tensor grad;
        const double loss = multiplane_eval(result.hologram, targets, config, kernels, opt, &grad);
        result.loss_trace.push_back(loss);
        optimizer.step({&result.hologram.phase}, {&grad});
    }
    return result;
}

OptimizeResult optimize_focal_surface(const FocalSurfaceTargetSet& targets,
                                      const ModelParams& model, const OpticalConfig& config,
                                      const OptimizeConfig& opt) {
    config.validate();
    opt.validate();
    if (targets.targets.empty())
        throw std::invalid_argument("optimize_focal_surface: empty target set");
    if (model.config.height != config.height || model.config.width != config.width)
        throw std::invalid_argument("optimize_focal_surface: model/config shape mismatch");

    // Intensity scaling applied to the targets, per the objective.
    std::vector<Image> scaled;
    scaled.reserve(targets.targets.size());
    for (const ReconstructionTarget& t : targets.targets) {
        Image r = t.image;
        for (double& v : r.data) v *= opt.intensity_scale;
        scaled.push_back(std::move(r));
    }

    OptimizeResult result{init_phase(config, opt.seed), {}};
    result.loss_trace.reserve(opt.iterations);

    Adam optimizer(opt.learning_rate, opt.beta1, opt.beta2);
    for (int it = 0; it < opt.iterations; ++it) {
        double loss_sum = 0.0;
        Tensor grad({3, config.height, config.width});
        for (size_t t = 0; t < targets.targets.size(); ++t) {
            ModelGraph g =
                build_model_graph(result.hologram, targets.targets[t].surface, model, true, false);
            ad::Var loss = ad::masked_mse(g.output, scaled[t], targets.targets[t].mask,
                                          opt.alpha0, opt.alpha1);
            loss_sum += loss.value()[0];
            ad::backward(loss);
            const Tensor& hg = g.hologram.grad();
            for (long i = 0; i < grad.size(); ++i) grad[i] += hg[i];
        }
        result.loss_trace.push_back(loss_sum);
        optimizer.step({&result.hologram.phase}, {&grad});
    }
    return result;
}

double multiplane_loss(const PhaseHologram& hologram, const MultiplaneTarget& targets,
                       const OpticalConfig& config, const OptimizeConfig& opt) {
    check_multiplane(targets, config);
    auto kernels = build_plane_kernels(config);
    return multiplane_eval(hologram, targets, config, kernels, opt, nullptr);
}

Tensor multiplane_loss_grad(const PhaseHologram& hologram, const MultiplaneTarget& targets,
                            const OpticalConfig& config, const OptimizeConfig& opt) {
    check_multiplane(targets, config);
    auto kernels = build_plane_kernels(config);
    Tensor grad;
    multiplane_eval(hologram, targets, config, kernels, opt, &grad);
    return grad;
}

TraceStats loss_trace_stats(const std::vector<double>& trace, int window) {
    if (trace.empty()) throw std::invalid_argument("loss_trace_stats: empty trace");
    if (window < 1) throw std::invalid_argument("loss_trace_stats: window must be >= 1");
    TraceStats s;
    s.initial = trace.front();
    s.final = trace.back();
    const long n = static_cast<long>(trace.size());
    if (n < window + 1) return s;

    double mean_prev = 0.0;
    for (int i = 0; i < window; ++i) mean_prev += trace[i];
    mean_prev /= window;
    for (long start = 1; start + window <= n; ++start) {
        double mean = 0.0;
        for (int i = 0; i < window; ++i) mean += trace[start + i];
        mean /= window;
        ++s.windows;
        if (mean > mean_prev) ++s.violations;
        if (mean < mean_prev) ++s.improvements;
        mean_prev = mean;
    }
    return s;
}

}  // namespace holo
