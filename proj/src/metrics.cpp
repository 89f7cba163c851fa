#include "holo/metrics.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "holo/dataset_gen.hpp"
#include "holo/focal_model.hpp"
#include "holo/holo_opt.hpp"

namespace holo {

double psnr(const Image& a, const Image& b, double peak) {
    require_same_shape(a, b, "psnr");
    double mse = 0.0;
    for (long i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(peak * peak / mse));
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(size);
    const int r = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        w[i] = std::exp(-(i - r) * (i - r) / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace

double ssim(const Image& a, const Image& b, double peak) {
    require_same_shape(a, b, "ssim");
    const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    int win = 11;
    if (win > h || win > w) {
        win = std::min(h, w);
        if (win % 2 == 0) --win;
        if (win < 1) throw std::invalid_argument("ssim: image too small");
    }
    const std::vector<double> g = gaussian_window(win, 1.5);
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);

    double total = 0.0;
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        long count = 0;
        for (int x = 0; x + win <= h; ++x) {
            for (int y = 0; y + win <= w; ++y) {
                double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
                for (int i = 0; i < win; ++i) {
                    for (int j = 0; j < win; ++j) {
                        const double wij = g[i] * g[j];
                        const double va = a.at(ch, x + i, y + j);
                        const double vb = b.at(ch, x + i, y + j);
                        ma += wij * va;
                        mb += wij * vb;
                        saa += wij * (va * va);
                        sbb += wij * (vb * vb);
                        sab += wij * (va * vb);  // argument-order symmetric
                    }
                }
                const double var_a = saa - ma * ma;
                const double var_b = sbb - mb * mb;
                const double cov = sab - ma * mb;
                acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                       ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
                ++count;
            }
        }
        total += acc / static_cast<double>(count);
    }
    return total / c;
}

MetricReport bench(const std::string& scenario, const OpticalConfig& config,
                   const BenchConfig& bench_config) {
    config.validate();
    MetricReport report;
    report.scenario = scenario;

    counters::reset();
    const auto t0 = std::chrono::steady_clock::now();

    if (scenario == "simulate-volume") {
        // ASM path: one full-color volume; model path: one inference per
        // focal surface.
        PhaseHologram hologram = init_phase(config, bench_config.seed);
        std::vector<Image> planes = reconstruct_volume(hologram, config);

        ModelConfig mc;
        mc.height = config.height;
        mc.width = config.width;
        ModelParams model = ModelParams::init(mc, bench_config.seed);
        std::vector<Tensor> masks = quantize_depth(Tensor({1, config.height, config.width}),
                                                   config.plane_count());
        for (int s = 0; s < bench_config.surfaces; ++s) {
            FocalSurface surface =
                generate_focal_surface(masks, bench_config.seed + static_cast<uint64_t>(s));
            model_forward(hologram, surface, model);
        }
    } else if (scenario == "optimize-multiplane") {
        RgbdSample scene = make_synthetic_rgbd(config.height, config.width, bench_config.seed);
        MultiplaneTarget target = make_multiplane_target(scene.rgb, scene.depth, config);
        OptimizeConfig opt;
        opt.iterations = bench_config.iterations;
        opt.seed = bench_config.seed;
        OptimizeResult res = optimize_multiplane(target, config, opt);
        // Counters freeze before the (uncounted) quality evaluation.
        report.propagation_passes = counters::propagation_passes().load();
        report.model_inferences = counters::model_inferences().load();
        report.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::vector<Image> planes = reconstruct_volume(res.hologram, config);
        report.psnr_db = psnr(planes[0], scene.rgb);
        report.ssim_value = ssim(planes[0], scene.rgb);
        return report;
    } else if (scenario == "optimize-focal") {
        RgbdSample scene = make_synthetic_rgbd(config.height, config.width, bench_config.seed);
        std::vector<Tensor> masks = quantize_depth(scene.depth, config.plane_count());
        ModelConfig mc;
        mc.height = config.height;
        mc.width = config.width;
        ModelParams model = ModelParams::init(mc, bench_config.seed);

        FocalSurfaceTargetSet targets;
        for (int s = 0; s < bench_config.surfaces; ++s) {
            ReconstructionTarget t;
            t.surface = generate_focal_surface(masks, bench_config.seed + static_cast<uint64_t>(s));
            t.image = scene.rgb;
            t.mask = Tensor({1, config.height, config.width}, 1.0);
            targets.targets.push_back(std::move(t));
        }
        OptimizeConfig opt;
        opt.iterations = bench_config.iterations;
        opt.seed = bench_config.seed;
        opt.variant = OptimizeVariant::focal_surface;
        optimize_focal_surface(targets, model, config, opt);
    } else {
        throw std::invalid_argument("bench: unknown scenario '" + scenario + "'");
    }

    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.propagation_passes = counters::propagation_passes().load();
    report.model_inferences = counters::model_inferences().load();
    return report;
}

std::string report_csv(const MetricReport& r) {
    std::ostringstream out;
    out << "scenario,psnr_db,ssim,propagation_passes,model_inferences,wall_clock_s\n";
    out << r.scenario << ',' << r.psnr_db << ',' << r.ssim_value << ',' << r.propagation_passes
        << ',' << r.model_inferences << ',' << r.wall_clock_seconds << '\n';
    return out.str();
}

std::string report_text(const MetricReport& r) {
    std::ostringstream out;
    out << "scenario:            " << r.scenario << '\n'
        << "psnr (dB):           " << r.psnr_db << '\n'
        << "ssim:                " << r.ssim_value << '\n'
        << "propagation passes:  " << r.propagation_passes << '\n'
        << "model inferences:    " << r.model_inferences << '\n'
        << "wall clock (s):      " << r.wall_clock_seconds << '\n';
    return out.str();
}

}  // namespace holo
