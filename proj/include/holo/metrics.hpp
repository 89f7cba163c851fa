#pragma once

#include <cstdint>
#include <string>

#include "holo/tensor.hpp"
#include "holo/wave_optics.hpp"

namespace holo {

/// 10 log10(peak^2 / MSE), capped at 100 dB (the zero-MSE sentinel).
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), C1 = (0.01 peak)^2,
/// C2 = (0.03 peak)^2, averaged over channels; windows are evaluated on the
/// valid interior only.
double ssim(const Image& a, const Image& b, double peak = 1.0);

/// Deterministic operation counts plus informational wall-clock time.
struct MetricReport {
    std::string scenario;
    double psnr_db = 0.0;
    double ssim_value = 0.0;
    long propagation_passes = 0;
    long model_inferences = 0;
    double wall_clock_seconds = 0.0;
};

struct BenchConfig {
    int iterations = 50;
    int surfaces = 6;
    uint64_t seed = 7;
};

/// Runs one scenario end to end with instrumented counters:
///   simulate-volume    — ASM volume reconstruction vs per-surface inference
///   optimize-multiplane — full multiplane optimization
///   optimize-focal      — focal-surface optimization through a fresh model
/// Unknown scenarios raise std::invalid_argument.
MetricReport bench(const std::string& scenario, const OpticalConfig& config,
                   const BenchConfig& bench_config);

/// CSV (header + one row) and human-readable renderings of a report.
std::string report_csv(const MetricReport& report);
std::string report_text(const MetricReport& report);

}  // namespace holo
