#pragma once

#include <atomic>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "holo/tensor.hpp"

namespace holo {

using cdouble = std::complex<double>;

/// Display geometry and illumination. Wavelengths are per color primary
/// (R, G, B order); plane distances are relative to the hologram plane and
/// are shifted globally by base_distance_mm.
struct OpticalConfig {
    std::vector<double> wavelengths_nm = {638.0, 520.0, 420.0};
    double pixel_pitch_um = 3.74;
    int width = 128;
    int height = 128;
    std::vector<double> volume_planes_mm;
    double base_distance_mm = 0.0;
    int pad_factor = 1;      // >1 zero-pads propagation to suppress wraparound
    bool band_limit = true;  // band-limited ASM window; false = plain ASM

    /// 6 planes evenly spaced over a 6 mm volume centered at base_distance.
    static OpticalConfig make(int width, int height, double base_distance_mm = 0.0,
                              int n_planes = 6, double volume_depth_mm = 6.0);

    void validate() const;
    int plane_count() const { return static_cast<int>(volume_planes_mm.size()); }
    /// Absolute propagation distance from the hologram plane to plane j.
    double plane_distance_mm(int j) const { return base_distance_mm + volume_planes_mm.at(j); }
};

/// Scalar wave field sampled on the SLM grid.
struct ComplexField {
    int width = 0;
    int height = 0;
    double wavelength_nm = 0.0;
    double pixel_pitch_um = 0.0;
    std::vector<cdouble> data;  // row-major, data[x * width + y]

    ComplexField() = default;
    ComplexField(int w, int h, double wl_nm, double pitch_um)
        : width(w), height(h), wavelength_nm(wl_nm), pixel_pitch_um(pitch_um),
          data(static_cast<size_t>(w) * h) {}

    cdouble& at(int x, int y) { return data[static_cast<size_t>(x) * width + y]; }
    cdouble at(int x, int y) const { return data[static_cast<size_t>(x) * width + y]; }
    double energy() const;  // sum of |amplitude|^2
};

/// Frequency-domain ASM transfer function. |transfer| = 1 inside the band
/// mask and 0 outside; distance 0 is the all-ones identity kernel.
struct PropagationKernel {
    int width = 0;
    int height = 0;
    double distance_mm = 0.0;
    double wavelength_nm = 0.0;
    std::vector<cdouble> transfer;
    std::vector<uint8_t> band_mask;
};

/// Phase-only hologram, one channel per color primary, radians.
struct PhaseHologram {
    Tensor phase;  // (3, h, w)

    PhaseHologram() = default;
    PhaseHologram(int height, int width) : phase({3, height, width}) {}
    int height() const { return phase.dim(1); }
    int width() const { return phase.dim(2); }
};

/// Transfer function exp(i 2 pi z sqrt(1/lambda^2 - fx^2 - fy^2)) on the FFT
/// frequency grid, zeroed for evanescent frequencies and outside the
/// band-limit window. Kernel dimensions are the config dimensions times
/// pad_factor.
PropagationKernel build_asm_kernel(const OpticalConfig& config, int color_index,
                                   double distance_mm);

/// Frequency-domain propagation: ifft2(fft2(field) * transfer). Pure; counts
/// one forward propagation pass.
ComplexField propagate(const ComplexField& field, const PropagationKernel& kernel);

/// Adjoint (conjugate-transpose) of propagate. Used for gradients; not
/// counted as a forward pass.
ComplexField propagate_adjoint(const ComplexField& field, const PropagationKernel& kernel);

/// Unit-amplitude field with the selected hologram channel as phase.
ComplexField phase_to_field(const PhaseHologram& hologram, int color_index,
                            const OpticalConfig& config);

/// Per-pixel squared magnitude, shape (1, h, w).
Tensor intensity(const ComplexField& field);

/// Full-color intensity image at every volume plane; one propagation pass per
/// (plane, color) pair.
std::vector<Tensor> reconstruct_volume(const PhaseHologram& hologram, const OpticalConfig& config);

/// Kernel disk cache: 16-byte magic/version header, then distance and
/// wavelength, interleaved little-endian float32 (re, im) row-major, then the
/// band mask as packed bits.
void save_kernel(const std::string& path, const PropagationKernel& kernel);
PropagationKernel load_kernel(const std::string& path);

/// Field export: a (re, im) pair of grayscale PFMs, and a gamma-encoded
/// intensity PNG for visualization.
void save_field_pfm(const std::string& path_re, const std::string& path_im,
                    const ComplexField& field);
ComplexField load_field_pfm(const std::string& path_re, const std::string& path_im,
                            double wavelength_nm, double pixel_pitch_um);
void save_field_png(const std::string& path, const ComplexField& field, double gamma = 2.2);

/// Forward-pass accounting. Thread-safe; read after quiescence.
namespace counters {
std::atomic<long>& propagation_passes();
std::atomic<long>& model_inferences();
void reset();
}  // namespace counters

}  // namespace holo
