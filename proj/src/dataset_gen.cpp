#include "holo/dataset_gen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "holo/image_io.hpp"

namespace fs = std::filesystem;

namespace holo {

namespace {

constexpr double kPi = 3.14159265358979323846;

uint64_t mix_seed(uint64_t h, uint64_t v) {
    return h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
}

int surface_level(double value, int n_levels) {
    const int level = static_cast<int>(std::lround(value * (n_levels - 1)));
    if (level < 0 || level >= n_levels)
        throw std::invalid_argument("focal surface value outside the configured depth set");
    return level;
}

void check_partition(const std::vector<Tensor>& masks) {
    if (masks.empty()) throw std::invalid_argument("level masks: empty set");
    const Tensor& first = masks[0];
    for (const Tensor& m : masks) require_same_shape(m, first, "level masks");
    for (long i = 0; i < first.size(); ++i) {
        double sum = 0.0;
        for (const Tensor& m : masks) {
            if (m[i] != 0.0 && m[i] != 1.0)
                throw std::invalid_argument("level masks: non-binary value");
            sum += m[i];
        }
        if (sum != 1.0) throw std::invalid_argument("level masks: masks do not partition");
    }
}

std::string zero_pad(int v, int digits) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < digits) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

std::vector<Tensor> quantize_depth(const Tensor& depth, int n_levels) {
    if (n_levels < 1) throw std::invalid_argument("quantize_depth: n_levels must be >= 1");
    if (depth.ndim() != 3 || depth.dim(0) != 1)
        throw std::invalid_argument("quantize_depth: depth must be (1,h,w)");
    for (double v : depth.data)
        if (v < 0.0 || v > 1.0)
            throw std::invalid_argument("quantize_depth: depth values must lie in [0,1]");

    std::vector<Tensor> masks(n_levels, Tensor(depth.shape));
    for (long i = 0; i < depth.size(); ++i) {
        int level = static_cast<int>(std::floor(depth[i] * n_levels));
        if (level >= n_levels) level = n_levels - 1;  // closed upper bin
        masks[level][i] = 1.0;
    }
    return masks;
}

FocalSurface generate_focal_surface(const std::vector<Tensor>& level_masks, uint64_t seed) {
    check_partition(level_masks);
    const int n_levels = static_cast<int>(level_masks.size());
    const int h = level_masks[0].dim(1), w = level_masks[0].dim(2);

    FocalSurface surface(h, w);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, n_levels - 1);

    // Flood-fill connected regions (4-connectivity) in scan order, per level;
    // each region gets one depth drawn from the plane set.
    std::vector<int8_t> visited(static_cast<size_t>(h) * w, 0);
    std::vector<std::pair<int, int>> stack;
    for (int level = 0; level < n_levels; ++level) {
        const Tensor& mask = level_masks[level];
        for (int x = 0; x < h; ++x) {
            for (int y = 0; y < w; ++y) {
                const size_t idx = static_cast<size_t>(x) * w + y;
                if (visited[idx] || mask.at(0, x, y) != 1.0) continue;
                const double depth_value =
                    n_levels == 1 ? 0.0 : static_cast<double>(pick(rng)) / (n_levels - 1);
                stack.push_back({x, y});
                visited[idx] = 1;
                while (!stack.empty()) {
                    auto [cx, cy] = stack.back();
                    stack.pop_back();
                    surface.depth.at(0, cx, cy) = depth_value;
                    const int nx[4] = {cx - 1, cx + 1, cx, cx};
                    const int ny[4] = {cy, cy, cy - 1, cy + 1};
                    for (int d = 0; d < 4; ++d) {
                        if (nx[d] < 0 || nx[d] >= h || ny[d] < 0 || ny[d] >= w) continue;
                        const size_t nidx = static_cast<size_t>(nx[d]) * w + ny[d];
                        if (!visited[nidx] && mask.at(0, nx[d], ny[d]) == 1.0) {
                            visited[nidx] = 1;
                            stack.push_back({nx[d], ny[d]});
                        }
                    }
                }
            }
        }
    }
    return surface;
}

std::pair<Image, Tensor> in_focus_restoration(const std::vector<Image>& plane_images,
                                              const FocalSurface& surface,
                                              const std::vector<Tensor>& scene_level_masks) {
    if (plane_images.size() != scene_level_masks.size())
        throw std::invalid_argument("in_focus_restoration: plane count mismatch");
    check_partition(scene_level_masks);
    const int n_levels = static_cast<int>(plane_images.size());
    const int h = surface.height(), w = surface.width();
    for (const Image& img : plane_images)
        if (img.ndim() != 3 || img.dim(0) != 3 || img.dim(1) != h || img.dim(2) != w)
            throw std::invalid_argument("in_focus_restoration: bad plane image shape");

    Image target({3, h, w});
    Tensor mask({1, h, w});
    for (int x = 0; x < h; ++x) {
        for (int y = 0; y < w; ++y) {
            const int level = surface_level(surface.depth.at(0, x, y), n_levels);
            for (int c = 0; c < 3; ++c) target.at(c, x, y) = plane_images[level].at(c, x, y);
            mask.at(0, x, y) = scene_level_masks[level].at(0, x, y) == 1.0 ? 1.0 : 0.0;
        }
    }
    return {std::move(target), std::move(mask)};
}

std::vector<DatasetRecord> generate_dataset(const std::vector<RgbdSample>& samples,
                                            const OpticalConfig& config,
                                            const DatasetGenConfig& gen,
                                            const std::string& out_dir) {
    if (samples.empty()) throw std::invalid_argument("generate_dataset: no input samples");
    config.validate();
    for (const RgbdSample& s : samples) {
        if (s.rgb.ndim() != 3 || s.rgb.dim(0) != 3 || s.rgb.dim(1) != config.height ||
            s.rgb.dim(2) != config.width)
            throw std::invalid_argument("generate_dataset: rgb shape does not match config");
        if (s.depth.ndim() != 3 || s.depth.dim(0) != 1 || s.depth.dim(1) != config.height ||
            s.depth.dim(2) != config.width)
            throw std::invalid_argument("generate_dataset: depth shape does not match config");
    }

    fs::create_directories(fs::path(out_dir) / "holograms");
    fs::create_directories(fs::path(out_dir) / "surfaces");
    fs::create_directories(fs::path(out_dir) / "targets");
    fs::create_directories(fs::path(out_dir) / "masks");

    const int reduced_iters =
        std::max(1, static_cast<int>(std::lround(gen.optimize_iterations * gen.noise_fraction)));

    std::vector<DatasetRecord> records;
    for (size_t si = 0; si < samples.size(); ++si) {
        const RgbdSample& sample = samples[si];
        std::vector<Tensor> scene_masks = quantize_depth(sample.depth, config.plane_count());

        for (size_t di = 0; di < gen.base_distances_mm.size(); ++di) {
            OpticalConfig cfg = config;
            cfg.base_distance_mm = gen.base_distances_mm[di];

            OptimizeConfig opt;
            opt.iterations = reduced_iters;
            opt.learning_rate = gen.learning_rate;
            opt.seed = mix_seed(mix_seed(gen.seed, si), di);

            MultiplaneTarget target = make_multiplane_target(sample.rgb, sample.depth, cfg);
            PhaseHologram hologram = optimize_multiplane(target, cfg, opt).hologram;
            std::vector<Image> planes = reconstruct_volume(hologram, cfg);

            const std::string stem = "img" + zero_pad(static_cast<int>(si), 4) + "_d" +
                                     std::to_string(di);
            const std::string holo_rel = "holograms/" + stem + ".pfm";
            save_pfm((fs::path(out_dir) / holo_rel).string(), hologram.phase);

            for (int k = 0; k < gen.surfaces_per_image; ++k) {
                const uint64_t surf_seed =
                    mix_seed(mix_seed(mix_seed(gen.seed, si), di), static_cast<uint64_t>(k) + 1);
                FocalSurface surface = generate_focal_surface(scene_masks, surf_seed);
                auto [restored, mask] = in_focus_restoration(planes, surface, scene_masks);

                DatasetRecord rec;
                rec.hologram_path = holo_rel;
                rec.surface_path = "surfaces/" + stem + "_s" + std::to_string(k) + ".pfm";
                rec.target_path = "targets/" + stem + "_s" + std::to_string(k) + ".pfm";
                rec.mask_path = "masks/" + stem + "_s" + std::to_string(k) + ".png";
                rec.base_distance_mm = cfg.base_distance_mm;
                rec.seed = surf_seed;
                save_pfm((fs::path(out_dir) / rec.surface_path).string(), surface.depth);
                save_pfm((fs::path(out_dir) / rec.target_path).string(), restored);
                save_png_mask((fs::path(out_dir) / rec.mask_path).string(), mask);
                records.push_back(std::move(rec));
            }
        }
    }

    std::ofstream manifest(fs::path(out_dir) / "manifest.txt");
    if (!manifest) throw std::runtime_error(out_dir + "/manifest.txt: cannot open for writing");
    for (const DatasetRecord& r : records)
        manifest << r.hologram_path << ' ' << r.surface_path << ' ' << r.target_path << ' '
                 << r.mask_path << ' ' << r.base_distance_mm << ' ' << r.seed << '\n';
    return records;
}

std::vector<DatasetRecord> load_manifest(const std::string& dir) {
    const std::string path = (fs::path(dir) / "manifest.txt").string();
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open manifest");
    std::vector<DatasetRecord> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        DatasetRecord r;
        if (!(ss >> r.hologram_path >> r.surface_path >> r.target_path >> r.mask_path >>
              r.base_distance_mm >> r.seed))
            throw std::runtime_error(path + ": malformed record at line " +
                                     std::to_string(lineno));
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<TrainSample> load_dataset(const std::string& dir) {
    std::vector<TrainSample> out;
    for (const DatasetRecord& r : load_manifest(dir)) {
        TrainSample s;
        s.hologram.phase = load_pfm((fs::path(dir) / r.hologram_path).string());
        s.target.surface.depth = load_pfm((fs::path(dir) / r.surface_path).string());
        s.target.image = load_pfm((fs::path(dir) / r.target_path).string());
        s.target.mask = load_png_mask((fs::path(dir) / r.mask_path).string());
        out.push_back(std::move(s));
    }
    return out;
}

RgbdSample make_synthetic_rgbd(int height, int width, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> coord_x(0, height - 1);
    std::uniform_int_distribution<int> coord_y(0, width - 1);
    std::uniform_int_distribution<int> radius(std::min(height, width) / 8,
                                              std::min(height, width) / 3);

    RgbdSample s{Image({3, height, width}), Tensor({1, height, width})};
    // Smooth background gradient with randomly placed flat-depth disks.
    const double bg_phase = unit(rng);
    for (int x = 0; x < height; ++x)
        for (int y = 0; y < width; ++y) {
            const double t = (static_cast<double>(x) / height + static_cast<double>(y) / width) / 2.0;
            s.rgb.at(0, x, y) = 0.5 + 0.4 * std::sin(2.0 * kPi * (t + bg_phase));
            s.rgb.at(1, x, y) = t;
            s.rgb.at(2, x, y) = 1.0 - t;
            s.depth.at(0, x, y) = t;
        }
    const int n_disks = 4;
    for (int d = 0; d < n_disks; ++d) {
        const int cx = coord_x(rng), cy = coord_y(rng), r = radius(rng);
        const double depth_value = unit(rng);
        const double r0 = unit(rng), g0 = unit(rng), b0 = unit(rng);
        for (int x = std::max(0, cx - r); x < std::min(height, cx + r + 1); ++x)
            for (int y = std::max(0, cy - r); y < std::min(width, cy + r + 1); ++y) {
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
                s.rgb.at(0, x, y) = r0;
                s.rgb.at(1, x, y) = g0;
                s.rgb.at(2, x, y) = b0;
                s.depth.at(0, x, y) = depth_value;
            }
    }
    for (double& v : s.rgb.data) v = std::clamp(v, 0.0, 1.0);
    for (double& v : s.depth.data) v = std::clamp(v, 0.0, 1.0);
    return s;
}

}  // namespace holo
