#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "holo/config.hpp"
#include "holo/dataset_gen.hpp"
#include "holo/focal_model.hpp"
#include "holo/holo_opt.hpp"
#include "holo/image_io.hpp"
#include "holo/metrics.hpp"
#include "holo/wave_optics.hpp"

namespace fs = std::filesystem;
using namespace holo;

namespace {

struct GlobalOpts {
    std::string config_path;
    uint64_t seed = 0;
    std::string out_dir = ".";
};

KeyValueConfig load_cfg(const GlobalOpts& g) {
    return g.config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(g.config_path);
}

OpticalConfig optical_from(const KeyValueConfig& kv) {
    OpticalConfig base = OpticalConfig::make(kv.get_int("width", 128), kv.get_int("height", 128),
                                             kv.get_double("base_distance_mm", 0.0),
                                             kv.get_int("n_planes", 6),
                                             kv.get_double("volume_depth_mm", 6.0));
    base.wavelengths_nm = kv.get_list("wavelengths_nm", base.wavelengths_nm);
    base.pixel_pitch_um = kv.get_double("pixel_pitch_um", base.pixel_pitch_um);
    base.volume_planes_mm = kv.get_list("volume_planes_mm", base.volume_planes_mm);
    base.pad_factor = kv.get_int("pad_factor", base.pad_factor);
    base.band_limit = kv.get_bool("band_limit", base.band_limit);
    base.validate();
    return base;
}

ModelConfig model_from(const KeyValueConfig& kv, const OpticalConfig& oc) {
    ModelConfig mc;
    mc.height = oc.height;
    mc.width = oc.width;
    mc.base_channels = kv.get_int("base_channels", mc.base_channels);
    mc.kernel_size = kv.get_int("kernel_size", mc.kernel_size);
    mc.validate();
    return mc;
}

void write_loss_csv(const std::string& path, const std::vector<double>& trace,
                    long passes_per_iter) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "iteration,loss,passes\n";
    for (size_t i = 0; i < trace.size(); ++i)
        out << i << ',' << trace[i] << ',' << passes_per_iter * static_cast<long>(i + 1) << '\n';
}

void save_hologram_outputs(const PhaseHologram& hologram, const std::string& out_dir,
                           const std::string& stem) {
    save_pfm((fs::path(out_dir) / (stem + ".pfm")).string(), hologram.phase);
    // Phase visualization per channel, mapped from [-pi, pi) to [0, 1].
    for (int p = 0; p < 3; ++p) {
        Image vis({1, hologram.height(), hologram.width()});
        for (int x = 0; x < hologram.height(); ++x)
            for (int y = 0; y < hologram.width(); ++y)
                vis.at(0, x, y) = (hologram.phase.at(p, x, y) + 3.14159265358979323846) /
                                  (2.0 * 3.14159265358979323846);
        save_png((fs::path(out_dir) / (stem + "_phase" + std::to_string(p) + ".png")).string(),
                 vis);
    }
}

RgbdSample load_scene(const std::string& image_path, const std::string& depth_path,
                      const OpticalConfig& oc, uint64_t seed) {
    if (image_path.empty())
        return make_synthetic_rgbd(oc.height, oc.width, seed);
    RgbdSample s;
    s.rgb = load_png(image_path);
    if (s.rgb.dim(0) == 1) {  // broadcast grayscale
        Image rgb({3, s.rgb.dim(1), s.rgb.dim(2)});
        for (int c = 0; c < 3; ++c)
            std::copy(s.rgb.data.begin(), s.rgb.data.end(),
                      rgb.data.begin() + static_cast<long>(c) * s.rgb.size());
        s.rgb = std::move(rgb);
    }
    if (depth_path.empty())
        s.depth = Tensor({1, s.rgb.dim(1), s.rgb.dim(2)});
    else
        s.depth = load_pfm(depth_path);
    if (s.rgb.dim(1) != oc.height || s.rgb.dim(2) != oc.width)
        throw std::runtime_error("scene image does not match configured width/height");
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"holosurf: focal-surface holography toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--config", g.config_path, "key=value configuration file");
    app.add_option("--seed", g.seed, "global random seed");
    app.add_option("--out-dir", g.out_dir, "output directory");

    // propagate
    auto* cmd_prop = app.add_subcommand("propagate", "propagate a hologram channel by a distance");
    std::string prop_hologram, prop_kernel_cache;
    int prop_color = 0;
    double prop_distance = 0.0;
    cmd_prop->add_option("--hologram", prop_hologram, "3-channel phase PFM")->required();
    cmd_prop->add_option("--color", prop_color, "color index 0..2");
    cmd_prop->add_option("--distance", prop_distance, "propagation distance in mm")->required();
    cmd_prop->add_option("--kernel-cache", prop_kernel_cache, "kernel cache file to reuse");

    // reconstruct-volume
    auto* cmd_vol = app.add_subcommand("reconstruct-volume", "render every volume plane");
    std::string vol_hologram;
    cmd_vol->add_option("--hologram", vol_hologram, "3-channel phase PFM")->required();

    // optimize
    auto* cmd_opt = app.add_subcommand("optimize", "phase-only hologram optimization");
    std::string opt_variant = "multiplane", opt_image, opt_depth, opt_model;
    int opt_iterations = 200, opt_surfaces = 6;
    double opt_lr = -1.0;
    cmd_opt->add_option("--variant", opt_variant, "multiplane | focal_surface");
    cmd_opt->add_option("--image", opt_image, "target RGB PNG (synthetic scene if omitted)");
    cmd_opt->add_option("--depth", opt_depth, "depth PFM in [0,1]");
    cmd_opt->add_option("--model", opt_model, "model checkpoint (focal_surface variant)");
    cmd_opt->add_option("--iterations", opt_iterations, "Adam iterations");
    cmd_opt->add_option("--surfaces", opt_surfaces, "focal surfaces (focal_surface variant)");
    cmd_opt->add_option("--lr", opt_lr, "learning rate override");

    // gen-dataset
    auto* cmd_gen = app.add_subcommand("gen-dataset", "generate focal-surface training data");
    std::string gen_images_dir;
    int gen_synthetic = 0;
    cmd_gen->add_option("--images", gen_images_dir, "directory of <stem>.png + <stem>.pfm pairs");
    cmd_gen->add_option("--synthetic", gen_synthetic, "generate N procedural scenes instead");

    // train
    auto* cmd_train = app.add_subcommand("train", "train the focal-surface transport model");
    std::string train_dataset, train_out = "model.ckpt";
    cmd_train->add_option("--dataset", train_dataset, "dataset directory (from gen-dataset)")
        ->required();
    cmd_train->add_option("--out", train_out, "checkpoint output filename");

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "image quality metrics");
    std::string eval_a, eval_b, eval_model, eval_dataset;
    cmd_eval->add_option("--a", eval_a, "first image (PNG or PFM)");
    cmd_eval->add_option("--b", eval_b, "second image (PNG or PFM)");
    cmd_eval->add_option("--model", eval_model, "model checkpoint to evaluate");
    cmd_eval->add_option("--dataset", eval_dataset, "dataset directory to evaluate against");

    // bench
    auto* cmd_bench = app.add_subcommand("bench", "operation-count benchmark harness");
    std::string bench_scenario = "simulate-volume";
    int bench_iterations = 50, bench_surfaces = 6;
    cmd_bench->add_option("--scenario", bench_scenario,
                          "simulate-volume | optimize-multiplane | optimize-focal");
    cmd_bench->add_option("--iterations", bench_iterations, "optimization iterations");
    cmd_bench->add_option("--surfaces", bench_surfaces, "focal surfaces");

    CLI11_PARSE(app, argc, argv);

    try {
        KeyValueConfig kv = load_cfg(g);
        fs::create_directories(g.out_dir);

        if (*cmd_prop) {
            OpticalConfig oc = optical_from(kv);
            PhaseHologram hologram;
            hologram.phase = load_pfm(prop_hologram);
            ComplexField field = phase_to_field(hologram, prop_color, oc);
            PropagationKernel kernel;
            if (!prop_kernel_cache.empty() && fs::exists(prop_kernel_cache)) {
                kernel = load_kernel(prop_kernel_cache);
            } else {
                kernel = build_asm_kernel(oc, prop_color, prop_distance);
                if (!prop_kernel_cache.empty()) save_kernel(prop_kernel_cache, kernel);
            }
            ComplexField out = propagate(field, kernel);
            save_field_pfm((fs::path(g.out_dir) / "field_re.pfm").string(),
                           (fs::path(g.out_dir) / "field_im.pfm").string(), out);
            save_field_png((fs::path(g.out_dir) / "intensity.png").string(), out);
            save_pfm((fs::path(g.out_dir) / "intensity.pfm").string(), intensity(out));
            std::cout << "propagated color " << prop_color << " by " << prop_distance
                      << " mm -> " << g.out_dir << "\n";
        } else if (*cmd_vol) {
            OpticalConfig oc = optical_from(kv);
            PhaseHologram hologram;
            hologram.phase = load_pfm(vol_hologram);
            std::vector<Image> planes = reconstruct_volume(hologram, oc);
            for (size_t j = 0; j < planes.size(); ++j) {
                save_pfm((fs::path(g.out_dir) / ("plane" + std::to_string(j) + ".pfm")).string(),
                         planes[j]);
                Image vis = planes[j];
                double peak = 1e-12;
                for (double v : vis.data) peak = std::max(peak, v);
                for (double& v : vis.data) v = std::pow(v / peak, 1.0 / 2.2);
                save_png((fs::path(g.out_dir) / ("plane" + std::to_string(j) + ".png")).string(),
                         vis);
            }
            std::cout << "reconstructed " << planes.size() << " planes ("
                      << counters::propagation_passes().load() << " propagation passes)\n";
        } else if (*cmd_opt) {
            OpticalConfig oc = optical_from(kv);
            RgbdSample scene = load_scene(opt_image, opt_depth, oc, g.seed);
            OptimizeConfig opt;
            opt.iterations = opt_iterations;
            opt.seed = g.seed;
            opt.intensity_scale = kv.get_double("intensity_scale", 1.0);
            if (opt_lr > 0.0) opt.learning_rate = opt_lr;

            counters::reset();
            OptimizeResult result;
            long per_iter = 0;
            if (opt_variant == "multiplane") {
                opt.variant = OptimizeVariant::multiplane;
                result = optimize_multiplane(make_multiplane_target(scene.rgb, scene.depth, oc),
                                             oc, opt);
                per_iter = 3L * oc.plane_count();
            } else if (opt_variant == "focal_surface") {
                opt.variant = OptimizeVariant::focal_surface;
                if (opt_model.empty()) throw std::runtime_error("focal_surface requires --model");
                ModelParams model = ModelParams::load(opt_model);
                result = optimize_focal_surface(
                    make_focal_targets(scene.rgb, scene.depth, oc, opt_surfaces), model, oc, opt);
                per_iter = opt_surfaces;
            } else {
                throw std::runtime_error("unknown variant '" + opt_variant + "'");
            }
            save_hologram_outputs(result.hologram, g.out_dir, "hologram");
            write_loss_csv((fs::path(g.out_dir) / "loss.csv").string(), result.loss_trace,
                           per_iter);
            TraceStats stats = loss_trace_stats(
                result.loss_trace.empty() ? std::vector<double>{0.0} : result.loss_trace);
            std::cout << "optimized (" << opt_variant << "): loss " << stats.initial << " -> "
                      << stats.final << ", passes "
                      << counters::propagation_passes().load() << ", inferences "
                      << counters::model_inferences().load() << "\n";
        } else if (*cmd_gen) {
            OpticalConfig oc = optical_from(kv);
            DatasetGenConfig gen;
            gen.surfaces_per_image = kv.get_int("surfaces_per_image", gen.surfaces_per_image);
            gen.base_distances_mm = kv.get_list("distances_mm", gen.base_distances_mm);
            gen.optimize_iterations = kv.get_int("optimize_iterations", gen.optimize_iterations);
            gen.noise_fraction = kv.get_double("noise_fraction", gen.noise_fraction);
            gen.learning_rate = kv.get_double("lr", gen.learning_rate);
            gen.seed = g.seed;

            std::vector<RgbdSample> samples;
            if (gen_synthetic > 0) {
                for (int i = 0; i < gen_synthetic; ++i)
                    samples.push_back(
                        make_synthetic_rgbd(oc.height, oc.width, g.seed + static_cast<uint64_t>(i)));
            } else if (!gen_images_dir.empty()) {
                std::vector<fs::path> pngs;
                for (const auto& e : fs::directory_iterator(gen_images_dir))
                    if (e.path().extension() == ".png") pngs.push_back(e.path());
                std::sort(pngs.begin(), pngs.end());
                for (const fs::path& p : pngs) {
                    fs::path depth = p;
                    depth.replace_extension(".pfm");
                    if (!fs::exists(depth))
                        throw std::runtime_error(depth.string() + ": missing depth map");
                    RgbdSample s;
                    s.rgb = load_png(p.string());
                    s.depth = load_pfm(depth.string());
                    samples.push_back(std::move(s));
                }
            } else {
                throw std::runtime_error("gen-dataset needs --images or --synthetic");
            }
            auto records = generate_dataset(samples, oc, gen, g.out_dir);
            std::cout << "wrote " << records.size() << " records to " << g.out_dir << "\n";
        } else if (*cmd_train) {
            OpticalConfig oc = optical_from(kv);
            ModelConfig mc = model_from(kv, oc);
            std::vector<TrainSample> dataset = load_dataset(train_dataset);
            if (!dataset.empty()) {
                mc.height = dataset[0].hologram.height();
                mc.width = dataset[0].hologram.width();
            }
            ModelParams params = ModelParams::init(mc, g.seed);

            TrainSchedule schedule;
            schedule.epochs = kv.get_int("epochs", 500);
            schedule.lr = kv.get_double("lr", schedule.lr);
            schedule.lr_decay = kv.get_double("lr_decay", schedule.lr_decay);
            schedule.lr_decay_every = kv.get_int("lr_decay_every", schedule.lr_decay_every);
            schedule.alpha0 = kv.get_double("alpha0", schedule.alpha0);
            schedule.alpha1 = kv.get_double("alpha1", schedule.alpha1);
            schedule.seed = g.seed;

            std::vector<double> losses = train(dataset, params, schedule);
            params.save((fs::path(g.out_dir) / train_out).string());
            std::ofstream csv(fs::path(g.out_dir) / "train_loss.csv");
            csv << "epoch,loss\n";
            for (size_t e = 0; e < losses.size(); ++e) csv << e << ',' << losses[e] << '\n';
            std::cout << "trained " << schedule.epochs << " epochs ("
                      << params.parameter_count() << " parameters), loss " << losses.front()
                      << " -> " << losses.back() << ", saved " << train_out << "\n";
        } else if (*cmd_eval) {
            if (!eval_a.empty() && !eval_b.empty()) {
                auto load_any = [](const std::string& p) {
                    return fs::path(p).extension() == ".pfm" ? load_pfm(p) : load_png(p);
                };
                Image a = load_any(eval_a), b = load_any(eval_b);
                std::cout << "psnr_db=" << psnr(a, b) << " ssim=" << ssim(a, b) << "\n";
            } else if (!eval_model.empty() && !eval_dataset.empty()) {
                ModelParams model = ModelParams::load(eval_model);
                std::vector<TrainSample> dataset = load_dataset(eval_dataset);
                if (dataset.empty()) throw std::runtime_error("eval: empty dataset");
                double psnr_sum = 0.0, ssim_sum = 0.0;
                for (const TrainSample& s : dataset) {
                    Image r = model_forward(s.hologram, s.target.surface, model);
                    psnr_sum += psnr(r, s.target.image);
                    ssim_sum += ssim(r, s.target.image);
                }
                std::cout << "records=" << dataset.size()
                          << " mean_psnr_db=" << psnr_sum / dataset.size()
                          << " mean_ssim=" << ssim_sum / dataset.size() << "\n";
            } else {
                throw std::runtime_error("eval needs --a/--b or --model/--dataset");
            }
        } else if (*cmd_bench) {
            OpticalConfig oc = optical_from(kv);
            BenchConfig bc;
            bc.iterations = bench_iterations;
            bc.surfaces = bench_surfaces;
            bc.seed = g.seed;
            MetricReport report = bench(bench_scenario, oc, bc);
            std::ofstream csv(fs::path(g.out_dir) / "bench.csv");
            csv << report_csv(report);
            std::cout << report_text(report);
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "holosurf: " << e.what() << "\n";
        return 1;
    }
}
