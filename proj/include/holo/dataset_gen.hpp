#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "holo/focal_model.hpp"
#include "holo/holo_opt.hpp"
#include "holo/tensor.hpp"
#include "holo/wave_optics.hpp"

namespace holo {

/// RGB image with its depth map, both in [0,1].
struct RgbdSample {
    Image rgb;     // (3,h,w)
    Tensor depth;  // (1,h,w)
};

/// Quantizes depth into n binary level masks. Level j covers depth in
/// [j/n, (j+1)/n); the last level is closed above. Masks partition the image.
std::vector<Tensor> quantize_depth(const Tensor& depth, int n_levels = 6);

/// Assigns each connected region of each level mask one depth value drawn
/// uniformly from the n plane depths (normalized j/(n-1)); seeded.
FocalSurface generate_focal_surface(const std::vector<Tensor>& level_masks, uint64_t seed);

/// Assembles the focal-surface target: R takes each pixel from the plane the
/// surface selects, and M marks pixels where that selection matches the
/// scene's true quantized depth level.
std::pair<Image, Tensor> in_focus_restoration(const std::vector<Image>& plane_images,
                                              const FocalSurface& surface,
                                              const std::vector<Tensor>& scene_level_masks);

struct DatasetGenConfig {
    int surfaces_per_image = 5;
    std::vector<double> base_distances_mm = {0.0, 10.0};
    int optimize_iterations = 50;   // full budget; generation runs a fraction of it
    double noise_fraction = 0.2;    // reduced-iteration fraction, injects noise
    double learning_rate = 0.05;
    uint64_t seed = 0;
};

/// One generated training case; paths are relative to the dataset directory.
struct DatasetRecord {
    std::string hologram_path;
    std::string surface_path;
    std::string target_path;
    std::string mask_path;
    double base_distance_mm = 0.0;
    uint64_t seed = 0;
};

/// Full pipeline: per sample and distance, optimize a deliberately noisy
/// hologram, reconstruct all planes, then emit surfaces_per_image records.
/// Writes holograms/, surfaces/, targets/, masks/ and manifest.txt under
/// out_dir; a fixed seed regenerates byte-identically.
std::vector<DatasetRecord> generate_dataset(const std::vector<RgbdSample>& samples,
                                            const OpticalConfig& config,
                                            const DatasetGenConfig& gen,
                                            const std::string& out_dir);

std::vector<DatasetRecord> load_manifest(const std::string& dir);

/// Reads a generated dataset back as training samples.
std::vector<TrainSample> load_dataset(const std::string& dir);

/// Procedural RGB-D scenes for desk-scale runs and tests; seeded.
RgbdSample make_synthetic_rgbd(int height, int width, uint64_t seed);

}  // namespace holo
