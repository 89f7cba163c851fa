#include "holo/wave_optics.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>

#include "holo/image_io.hpp"

namespace holo {

namespace {

constexpr double kPi = 3.14159265358979323846;

// FFTW plans are cached per (height, width, sign); creation is serialized,
// execution via the new-array interface is thread-safe.
class FftPlanCache {
public:
    static FftPlanCache& instance() {
        static FftPlanCache cache;
        return cache;
    }

    fftw_plan get(int h, int w, int sign) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto key = std::make_tuple(h, w, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<cdouble> scratch(static_cast<size_t>(h) * w);
        fftw_plan plan = fftw_plan_dft_2d(h, w, reinterpret_cast<fftw_complex*>(scratch.data()),
                                          reinterpret_cast<fftw_complex*>(scratch.data()), sign,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

// In-place 2D FFT. Forward is unnormalized; inverse divides by h*w so that
// the identity-kernel round trip is exact.
void fft2(std::vector<cdouble>& data, int h, int w, bool inverse) {
    fftw_plan plan = FftPlanCache::instance().get(h, w, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(data.data()),
                     reinterpret_cast<fftw_complex*>(data.data()));
    if (inverse) {
        const double scale = 1.0 / (static_cast<double>(h) * w);
        for (cdouble& v : data) v *= scale;
    }
}

// FFT-ordered frequency for index i of n samples with spacing pitch:
// f = k/(n*pitch) with k in [-n/2, n/2), negative frequencies in the upper half.
double fft_freq(int i, int n, double pitch_m) {
    const int k = i < (n + 1) / 2 ? i : i - n;
    return static_cast<double>(k) / (static_cast<double>(n) * pitch_m);
}

ComplexField propagate_impl(const ComplexField& field, const PropagationKernel& kernel,
                            bool conjugate) {
    if (field.wavelength_nm != kernel.wavelength_nm)
        throw std::invalid_argument("propagate: field/kernel wavelength mismatch");
    const int fw = field.width, fh = field.height;
    const int kw = kernel.width, kh = kernel.height;
    if (kw < fw || kh < fh || kw % fw != 0 || kh % fh != 0)
        throw std::invalid_argument("propagate: kernel dimensions incompatible with field");

    std::vector<cdouble> buf(static_cast<size_t>(kw) * kh, cdouble(0.0, 0.0));
    for (int x = 0; x < fh; ++x)
        std::memcpy(buf.data() + static_cast<size_t>(x) * kw, field.data.data() + static_cast<size_t>(x) * fw,
                    sizeof(cdouble) * fw);

    fft2(buf, kh, kw, false);
    if (conjugate) {
        for (size_t i = 0; i < buf.size(); ++i) buf[i] *= std::conj(kernel.transfer[i]);
    } else {
        for (size_t i = 0; i < buf.size(); ++i) buf[i] *= kernel.transfer[i];
    }
    fft2(buf, kh, kw, true);

    ComplexField out(fw, fh, field.wavelength_nm, field.pixel_pitch_um);
    for (int x = 0; x < fh; ++x)
        std::memcpy(out.data.data() + static_cast<size_t>(x) * fw, buf.data() + static_cast<size_t>(x) * kw,
                    sizeof(cdouble) * fw);
    return out;
}

}  // namespace

namespace counters {

std::atomic<long>& propagation_passes() {
    static std::atomic<long> counter{0};
    return counter;
}

std::atomic<long>& model_inferences() {
    static std::atomic<long> counter{0};
    return counter;
}

void reset() {
    propagation_passes().store(0);
    model_inferences().store(0);
}

}  // namespace counters

OpticalConfig OpticalConfig::make(int width, int height, double base_distance_mm, int n_planes,
                                  double volume_depth_mm) {
    OpticalConfig c;
    c.width = width;
    c.height = height;
    c.base_distance_mm = base_distance_mm;
    c.volume_planes_mm.resize(n_planes);
    for (int j = 0; j < n_planes; ++j) {
        c.volume_planes_mm[j] =
            n_planes == 1 ? 0.0
                          : -volume_depth_mm / 2.0 + volume_depth_mm * j / (n_planes - 1.0);
    }
    c.validate();
    return c;
}

void OpticalConfig::validate() const {
    if (wavelengths_nm.size() != 3)
        throw std::invalid_argument("OpticalConfig: expected 3 wavelengths");
    for (double wl : wavelengths_nm)
        if (!(wl > 0.0)) throw std::invalid_argument("OpticalConfig: wavelengths must be positive");
    if (!(pixel_pitch_um > 0.0))
        throw std::invalid_argument("OpticalConfig: pixel pitch must be positive");
    if (volume_planes_mm.empty())
        throw std::invalid_argument("OpticalConfig: need at least one volume plane");
    for (size_t j = 1; j < volume_planes_mm.size(); ++j)
        if (!(volume_planes_mm[j] > volume_planes_mm[j - 1]))
            throw std::invalid_argument("OpticalConfig: volume planes must be strictly increasing");
    if (width % 8 != 0 || height % 8 != 0)
        throw std::invalid_argument("OpticalConfig: width and height must be divisible by 8");
    if (pad_factor < 1) throw std::invalid_argument("OpticalConfig: pad_factor must be >= 1");
}

double ComplexField::energy() const {
    double e = 0.0;
    for (const cdouble& v : data) e += std::norm(v);
    return e;
}

PropagationKernel build_asm_kernel(const OpticalConfig& config, int color_index,
                                   double distance_mm) {
    if (color_index < 0 || color_index > 2)
        throw std::invalid_argument("build_asm_kernel: color_index out of range");
    if (!std::isfinite(distance_mm))
        throw std::invalid_argument("build_asm_kernel: distance must be finite");

    const int w = config.width * config.pad_factor;
    const int h = config.height * config.pad_factor;
    const double wl_m = config.wavelengths_nm[color_index] * 1e-9;
    const double pitch_m = config.pixel_pitch_um * 1e-6;
    const double z_m = distance_mm * 1e-3;

    PropagationKernel k;
    k.width = w;
    k.height = h;
    k.distance_mm = distance_mm;
    k.wavelength_nm = config.wavelengths_nm[color_index];
    k.transfer.resize(static_cast<size_t>(w) * h);
    k.band_mask.resize(static_cast<size_t>(w) * h);

    if (distance_mm == 0.0) {  // analytic limit: identity
        std::fill(k.transfer.begin(), k.transfer.end(), cdouble(1.0, 0.0));
        std::fill(k.band_mask.begin(), k.band_mask.end(), uint8_t{1});
        return k;
    }

    // Band-limit window from the sampled frequency step and the propagation
    // distance; wider padding admits a wider band.
    const double dfx = 1.0 / (static_cast<double>(w) * pitch_m);
    const double dfy = 1.0 / (static_cast<double>(h) * pitch_m);
    const double fx_limit = 1.0 / (std::sqrt(std::pow(2.0 * dfx * z_m, 2) + 1.0) * wl_m);
    const double fy_limit = 1.0 / (std::sqrt(std::pow(2.0 * dfy * z_m, 2) + 1.0) * wl_m);
    const double inv_wl_sq = 1.0 / (wl_m * wl_m);

    for (int x = 0; x < h; ++x) {
        const double fy = fft_freq(x, h, pitch_m);
        for (int y = 0; y < w; ++y) {
            const double fx = fft_freq(y, w, pitch_m);
            const size_t i = static_cast<size_t>(x) * w + y;
            const double fsq = fx * fx + fy * fy;
            bool pass = fsq <= inv_wl_sq;  // evanescent cutoff
            if (config.band_limit && pass)
                pass = std::abs(fx) <= fx_limit && std::abs(fy) <= fy_limit;
            if (pass) {
                const double fz = std::sqrt(inv_wl_sq - fsq);
                k.transfer[i] = std::polar(1.0, 2.0 * kPi * z_m * fz);
                k.band_mask[i] = 1;
            } else {
                k.transfer[i] = cdouble(0.0, 0.0);
                k.band_mask[i] = 0;
            }
        }
    }
    return k;
}

ComplexField propagate(const ComplexField& field, const PropagationKernel& kernel) {
    ComplexField out = propagate_impl(field, kernel, false);
    counters::propagation_passes().fetch_add(1, std::memory_order_relaxed);
    return out;
}

ComplexField propagate_adjoint(const ComplexField& field, const PropagationKernel& kernel) {
    return propagate_impl(field, kernel, true);
}

ComplexField phase_to_field(const PhaseHologram& hologram, int color_index,
                            const OpticalConfig& config) {
    if (color_index < 0 || color_index > 2)
        throw std::invalid_argument("phase_to_field: color_index out of range");
    const int h = hologram.height(), w = hologram.width();
    if (h != config.height || w != config.width)
        throw std::invalid_argument("phase_to_field: hologram does not match config dimensions");
    ComplexField f(w, h, config.wavelengths_nm[color_index], config.pixel_pitch_um);
    for (int x = 0; x < h; ++x)
        for (int y = 0; y < w; ++y)
            f.at(x, y) = std::polar(1.0, hologram.phase.at(color_index, x, y));
    return f;
}

Tensor intensity(const ComplexField& field) {
    Tensor img({1, field.height, field.width});
    for (int x = 0; x < field.height; ++x)
        for (int y = 0; y < field.width; ++y) img.at(0, x, y) = std::norm(field.at(x, y));
    return img;
}

std::vector<Tensor> reconstruct_volume(const PhaseHologram& hologram,
                                       const OpticalConfig& config) {
    config.validate();
    std::vector<Tensor> planes;
    planes.reserve(config.volume_planes_mm.size());
    for (int j = 0; j < config.plane_count(); ++j) {
        Tensor img({3, config.height, config.width});
        for (int p = 0; p < 3; ++p) {
            PropagationKernel k = build_asm_kernel(config, p, config.plane_distance_mm(j));
            Tensor chan = intensity(propagate(phase_to_field(hologram, p, config), k));
            for (int x = 0; x < config.height; ++x)
                for (int y = 0; y < config.width; ++y) img.at(p, x, y) = chan.at(0, x, y);
        }
        planes.push_back(std::move(img));
    }
    return planes;
}

namespace {

constexpr char kKernelMagic[8] = {'H', 'S', 'K', 'R', 'N', '1', '\0', '\0'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error(path + ": truncated kernel file");
}

}  // namespace

void save_kernel(const std::string& path, const PropagationKernel& kernel) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(kKernelMagic, 8);
    write_pod(out, uint32_t{1});  // version
    write_pod(out, uint32_t{0});  // reserved; header is 16 bytes
    write_pod(out, static_cast<uint32_t>(kernel.width));
    write_pod(out, static_cast<uint32_t>(kernel.height));
    write_pod(out, kernel.distance_mm);
    write_pod(out, kernel.wavelength_nm);
    for (const cdouble& v : kernel.transfer) {
        write_pod(out, static_cast<float>(v.real()));
        write_pod(out, static_cast<float>(v.imag()));
    }
    uint8_t byte = 0;
    int bit = 0;
    for (uint8_t m : kernel.band_mask) {
        if (m) byte |= static_cast<uint8_t>(0x80 >> bit);
        if (++bit == 8) {
            write_pod(out, byte);
            byte = 0;
            bit = 0;
        }
    }
    if (bit != 0) write_pod(out, byte);
    if (!out) throw std::runtime_error(path + ": write failed");
}

PropagationKernel load_kernel(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kKernelMagic, 8) != 0)
        throw std::runtime_error(path + ": not a kernel cache file");
    uint32_t version, reserved, w, h;
    read_pod(in, version, path);
    read_pod(in, reserved, path);
    if (version != 1) throw std::runtime_error(path + ": unsupported kernel file version");
    read_pod(in, w, path);
    read_pod(in, h, path);
    PropagationKernel k;
    k.width = static_cast<int>(w);
    k.height = static_cast<int>(h);
    read_pod(in, k.distance_mm, path);
    read_pod(in, k.wavelength_nm, path);
    const size_t n = static_cast<size_t>(w) * h;
    k.transfer.resize(n);
    for (size_t i = 0; i < n; ++i) {
        float re, im;
        read_pod(in, re, path);
        read_pod(in, im, path);
        k.transfer[i] = cdouble(re, im);
    }
    k.band_mask.resize(n);
    uint8_t byte = 0;
    for (size_t i = 0; i < n; ++i) {
        if (i % 8 == 0) read_pod(in, byte, path);
        k.band_mask[i] = (byte & (0x80 >> (i % 8))) ? 1 : 0;
    }
    return k;
}

void save_field_pfm(const std::string& path_re, const std::string& path_im,
                    const ComplexField& field) {
    Tensor re({1, field.height, field.width}), im({1, field.height, field.width});
    for (int x = 0; x < field.height; ++x)
        for (int y = 0; y < field.width; ++y) {
            re.at(0, x, y) = field.at(x, y).real();
            im.at(0, x, y) = field.at(x, y).imag();
        }
    save_pfm(path_re, re);
    save_pfm(path_im, im);
}

ComplexField load_field_pfm(const std::string& path_re, const std::string& path_im,
                            double wavelength_nm, double pixel_pitch_um) {
    Tensor re = load_pfm(path_re), im = load_pfm(path_im);
    require_same_shape(re, im, "load_field_pfm");
    ComplexField f(re.dim(2), re.dim(1), wavelength_nm, pixel_pitch_um);
    for (int x = 0; x < f.height; ++x)
        for (int y = 0; y < f.width; ++y) f.at(x, y) = cdouble(re.at(0, x, y), im.at(0, x, y));
    return f;
}

void save_field_png(const std::string& path, const ComplexField& field, double gamma) {
    Tensor img = intensity(field);
    double peak = 0.0;
    for (double v : img.data) peak = std::max(peak, v);
    if (peak <= 0.0) peak = 1.0;
    for (double& v : img.data) v = std::pow(v / peak, 1.0 / gamma);
    save_png(path, img);
}

}  // namespace holo
