// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Thresholds are fixed here, not tuned at runtime.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "holo/dataset_gen.hpp"
#include "holo/focal_model.hpp"
#include "holo/holo_opt.hpp"
#include "holo/image_io.hpp"
#include "holo/metrics.hpp"
#include "holo/sac_ops.hpp"
#include "holo/wave_optics.hpp"

using namespace holo;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int index, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    std::printf("[%s] criterion %d: %s (%s; %.1fs)\n", pass ? "PASS" : "FAIL", index,
                name.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
}

double rel_l2(const Tensor& a, const Tensor& b) {
    double num = 0.0, den = 0.0;
    for (long i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

double rel_l2_field(const ComplexField& a, const ComplexField& b) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        num += std::norm(a.data[i] - b.data[i]);
        den += std::norm(b.data[i]);
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& v : t.data) v = dist(rng);
    return t;
}

// Materialized-A direct summation; the oracle side of the fused-path check.
FeatureMap oracle_sa_conv(const FeatureMap& input, const SAKernel& a) {
    const int cout = a.out_channels(), h = a.height(), w = a.width();
    const int cin = a.in_channels(), k = a.ksize(), r = k / 2;
    FeatureMap out({cout, h, w});
    for (int c = 0; c < cout; ++c)
        for (int x = 0; x < h; ++x)
            for (int y = 0; y < w; ++y) {
                double acc = 0.0;
                for (int cp = 0; cp < cin; ++cp)
                    for (int xi = 0; xi < k; ++xi)
                        for (int yi = 0; yi < k; ++yi) {
                            const int xx = x + xi - r, yy = y + yi - r;
                            if (xx < 0 || xx >= h || yy < 0 || yy >= w) continue;
                            acc += a.at(c, x, y, cp, xi, yi) * input.at(cp, xx, yy);
                        }
                out.at(c, x, y) = acc;
            }
    return out;
}

void criterion1_sac_equivalence() {
    const auto t0 = clk::now();
    std::mt19937_64 rng(2024);
    double worst_sv = 0.0, worst_oracle = 0.0;
    const int instances = 200;
    for (int i = 0; i < instances; ++i) {
        std::uniform_int_distribution<int> dim(1, 8), cin_d(1, 3), cout_d(1, 4);
        const int h = dim(rng), w = dim(rng), cin = cin_d(rng), cout = cout_d(rng), k = 3;
        FeatureMap input = random_tensor({cin, h, w}, rng);
        SVKernel v(h, w, cin, k);
        v.data = random_tensor(v.data.shape, rng);
        SIKernel si(cout, cin, k);
        si.data = random_tensor(si.data.shape, rng);

        worst_sv = std::max(worst_sv,
                            rel_l2(sac_forward(input, v, SIKernel::ones(1, cin, k)),
                                   sv_conv(input, v)));
        worst_oracle = std::max(
            worst_oracle,
            rel_l2(sac_forward(input, v, si), oracle_sa_conv(input, compose_sa_kernel(v, si))));
    }
    const bool pass = worst_sv <= 1e-12 && worst_oracle <= 1e-10;
    std::ostringstream d;
    d << instances << " instances, max rel: vs sv_conv " << worst_sv << ", vs oracle "
      << worst_oracle;
    report(1, "SAC equivalence", pass, d.str(),
           std::chrono::duration<double>(clk::now() - t0).count());
}

void criterion2_wave_invariants() {
    const auto t0 = clk::now();
    double worst_identity = 0.0, worst_parseval = 0.0, worst_recip = 0.0;
    for (int color = 0; color < 3; ++color) {
        OpticalConfig cfg = OpticalConfig::make(128, 128);
        ComplexField f(cfg.width, cfg.height, cfg.wavelengths_nm[color], cfg.pixel_pitch_um);
        std::mt19937_64 rng(300 + color);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (cdouble& v : f.data) v = cdouble(dist(rng), dist(rng));

        worst_identity =
            std::max(worst_identity, rel_l2_field(propagate(f, build_asm_kernel(cfg, color, 0.0)), f));

        OpticalConfig plain = cfg;
        plain.band_limit = false;
        ComplexField out = propagate(f, build_asm_kernel(plain, color, 10.0));
        worst_parseval =
            std::max(worst_parseval, std::abs(out.energy() - f.energy()) / f.energy());

        ComplexField back = propagate(out, build_asm_kernel(plain, color, -10.0));
        worst_recip = std::max(worst_recip, rel_l2_field(back, f));

        // band-limited variant: identity on the in-band subspace
        ComplexField in_band = propagate(f, build_asm_kernel(cfg, color, 10.0));
        ComplexField round = propagate(propagate(in_band, build_asm_kernel(cfg, color, -10.0)),
                                       build_asm_kernel(cfg, color, 10.0));
        worst_recip = std::max(worst_recip, rel_l2_field(round, in_band));
    }
    const bool pass = worst_identity <= 1e-12 && worst_parseval <= 1e-6 && worst_recip <= 1e-6;
    std::ostringstream d;
    d << "identity " << worst_identity << ", parseval " << worst_parseval << ", reciprocity "
      << worst_recip;
    report(2, "wave-optics invariants", pass, d.str(),
           std::chrono::duration<double>(clk::now() - t0).count());
}

void criterion3_gradient_suites() {
    const auto t0 = clk::now();
    std::ostringstream d;
    bool pass = true;

    {  // sac_backward vs central differences, < 512 parameters total
        std::mt19937_64 rng(41);
        FeatureMap input = random_tensor({2, 5, 5}, rng);
        SVKernel v(5, 5, 2, 3);
        v.data = random_tensor(v.data.shape, rng);
        SIKernel w(2, 2, 3);
        w.data = random_tensor(w.data.shape, rng);
        FeatureMap go = random_tensor({2, 5, 5}, rng);
        auto loss = [&]() {
            FeatureMap out = sac_forward(input, v, w);
            double acc = 0.0;
            for (long i = 0; i < out.size(); ++i) acc += go[i] * out[i];
            return acc;
        };
        SacGradients g = sac_backward(go, input, v, w);
        double worst = 0.0;
        for (Tensor* t : {&input, &v.data, &w.data}) {
            const Tensor* analytic = t == &input ? &g.grad_input
                                    : t == &v.data ? &g.grad_v.data
                                                   : &g.grad_w.data;
            double dev = 0.0, mag = 0.0;
            for (long i = 0; i < t->size(); ++i) {
                const double saved = (*t)[i];
                (*t)[i] = saved + 1e-4;
                const double up = loss();
                (*t)[i] = saved - 1e-4;
                const double down = loss();
                (*t)[i] = saved;
                const double fd = (up - down) / 2e-4;
                dev = std::max(dev, std::abs(fd - (*analytic)[i]));
                mag = std::max({mag, std::abs(fd), std::abs((*analytic)[i])});
            }
            worst = std::max(worst, dev / mag);
        }
        pass = pass && worst <= 1e-4;
        d << "sac_backward " << worst;
    }

    {  // multiplane objective vs central differences at 8x8, single plane
        OpticalConfig cfg = OpticalConfig::make(8, 8, 0.0, 1, 0.0);
        cfg.volume_planes_mm = {2.0};
        RgbdSample scene = make_synthetic_rgbd(8, 8, 42);
        MultiplaneTarget target = make_multiplane_target(scene.rgb, Tensor({1, 8, 8}), cfg);
        OptimizeConfig opt;
        PhaseHologram h = init_phase(cfg, 43);
        Tensor analytic = multiplane_loss_grad(h, target, cfg, opt);
        double dev = 0.0, mag = 0.0;
        for (long i = 0; i < h.phase.size(); ++i) {
            const double saved = h.phase[i];
            h.phase[i] = saved + 1e-5;
            const double up = multiplane_loss(h, target, cfg, opt);
            h.phase[i] = saved - 1e-5;
            const double down = multiplane_loss(h, target, cfg, opt);
            h.phase[i] = saved;
            const double fd = (up - down) / 2e-5;
            dev = std::max(dev, std::abs(fd - analytic[i]));
            mag = std::max({mag, std::abs(fd), std::abs(analytic[i])});
        }
        pass = pass && dev / mag <= 1e-4;
        d << ", multiplane " << dev / mag;
    }

    {  // model_forward + masked_l2_loss vs central differences at 16x16
        ModelConfig mc;
        mc.height = 16;
        mc.width = 16;
        mc.base_channels = 2;
        ModelParams params = ModelParams::init(mc, 44);
        PhaseHologram h(16, 16);
        std::mt19937_64 rng(45);
        std::uniform_real_distribution<double> pd(-3.0, 3.0);
        for (double& v : h.phase.data) v = pd(rng);
        FocalSurface s(16, 16);
        for (double& v : s.depth.data) v = 0.6;
        Image target = random_tensor({3, 16, 16}, rng);
        for (double& v : target.data) v = std::abs(v);
        Tensor mask({1, 16, 16});
        for (long i = 0; i < 256; i += 2) mask[i] = 1.0;

        ModelGraph g = build_model_graph(h, s, params, true, true);
        ad::Var loss = ad::masked_mse(g.output, target, mask, 1.0, 0.5);
        ad::backward(loss);
        auto eval = [&]() {
            return masked_l2_loss(model_forward(h, s, params), target, mask, 1.0, 0.5);
        };

        double dev = 0.0, mag = 0.0;
        std::mt19937_64 pick(46);
        std::uniform_int_distribution<long> hi(0, h.phase.size() - 1);
        for (int t = 0; t < 32; ++t) {
            const long i = hi(pick);
            const double saved = h.phase[i];
            h.phase[i] = saved + 1e-4;
            const double up = eval();
            h.phase[i] = saved - 1e-4;
            const double down = eval();
            h.phase[i] = saved;
            const double fd = (up - down) / 2e-4;
            dev = std::max(dev, std::abs(fd - g.hologram.grad()[i]));
            mag = std::max({mag, std::abs(fd), std::abs(g.hologram.grad()[i])});
        }
        for (const char* name : {"tr.sam1.w", "kgen.svf0.conv.w", "tr.gfm.scale.w"}) {
            size_t li = 0;
            for (size_t i = 0; i < params.tensors.size(); ++i)
                if (params.tensors[i].first == name) li = i;
            Tensor& t = params.tensors[li].second;
            const Tensor& analytic = g.params[li].grad();
            std::uniform_int_distribution<long> pi(0, t.size() - 1);
            for (int trial = 0; trial < 8; ++trial) {
                const long i = pi(pick);
                const double saved = t[i];
                t[i] = saved + 1e-4;
                const double up = eval();
                t[i] = saved - 1e-4;
                const double down = eval();
                t[i] = saved;
                const double fd = (up - down) / 2e-4;
                dev = std::max(dev, std::abs(fd - analytic[i]));
                mag = std::max({mag, std::abs(fd), std::abs(analytic[i])});
            }
        }
        pass = pass && dev / mag <= 1e-3;
        d << ", model+loss " << dev / mag;
    }

    report(3, "gradient suites", pass, d.str(),
           std::chrono::duration<double>(clk::now() - t0).count());
}

void criterion4_pass_counts() {
    const auto t0 = clk::now();
    OpticalConfig cfg = OpticalConfig::make(16, 16, 0.0, 6);
    bool pass = true;
    std::ostringstream d;

    BenchConfig sim;
    sim.surfaces = 2;
    MetricReport r = bench("simulate-volume", cfg, sim);
    pass = pass && r.propagation_passes == 18 && r.model_inferences == 2;
    d << "simulate-volume " << r.propagation_passes << " passes / " << r.model_inferences
      << " inferences";

    const int iters = 5;
    BenchConfig mp;
    mp.iterations = iters;
    MetricReport rm = bench("optimize-multiplane", cfg, mp);
    pass = pass && rm.propagation_passes == 18L * iters;

    BenchConfig f6;
    f6.iterations = iters;
    f6.surfaces = 6;
    MetricReport r6 = bench("optimize-focal", cfg, f6);
    pass = pass && r6.model_inferences == 6L * iters;
    // Ours-6 vs ASM-6: exactly one third of the forward operations
    pass = pass && 3L * r6.model_inferences == rm.propagation_passes;

    BenchConfig f4;
    f4.iterations = iters;
    f4.surfaces = 4;
    MetricReport r4 = bench("optimize-focal", cfg, f4);
    pass = pass && r4.model_inferences == 4L * iters;
    // Ours-4 vs ASM-6: exactly two ninths
    pass = pass && 9L * r4.model_inferences == 2L * rm.propagation_passes;

    d << "; per-iter multiplane " << rm.propagation_passes / iters << ", focal-6 "
      << r6.model_inferences / iters << ", focal-4 " << r4.model_inferences / iters
      << "; wall-clock informational: sim " << r.wall_clock_seconds << "s";
    report(4, "pass-count speedup proxy", pass, d.str(),
           std::chrono::duration<double>(clk::now() - t0).count());
}

void criterion5_optimization_descent() {
    const auto t0 = clk::now();
    OpticalConfig cfg = OpticalConfig::make(64, 64, 0.0, 1, 0.0);
    cfg.volume_planes_mm = {3.0};
    RgbdSample scene = make_synthetic_rgbd(64, 64, 77);
    MultiplaneTarget target = make_multiplane_target(scene.rgb, Tensor({1, 64, 64}), cfg);

    OptimizeConfig opt;
    opt.iterations = 200;
    opt.learning_rate = 0.05;
    opt.seed = 3;

    auto recon_psnr = [&](const PhaseHologram& h) {
        return psnr(reconstruct_volume(h, cfg)[0], scene.rgb);
    };
    const double initial_psnr = recon_psnr(init_phase(cfg, opt.seed));
    OptimizeResult res = optimize_multiplane(target, cfg, opt);
    const double final_psnr = recon_psnr(res.hologram);
    TraceStats st = loss_trace_stats(res.loss_trace, 10);

    const bool pass = final_psnr - initial_psnr >= 10.0 &&
                      st.violations * 10 <= st.windows;  // >= 90% non-increasing
    std::ostringstream d;
    d << "psnr " << initial_psnr << " -> " << final_psnr << " dB (gain "
      << final_psnr - initial_psnr << "), window violations " << st.violations << "/"
      << st.windows;
    report(5, "optimization descent", pass, d.str(),
           std::chrono::duration<double>(clk::now() - t0).count());
}

void criterion6_toy_training() {
    const auto t0 = clk::now();
    OpticalConfig cfg = OpticalConfig::make(32, 32, 0.0, 6);
    DatasetGenConfig gen;
    gen.surfaces_per_image = 4;
    gen.base_distances_mm = {0.0};
    gen.optimize_iterations = 50;
    gen.noise_fraction = 0.2;
    gen.seed = 11;
    std::vector<RgbdSample> scenes = {make_synthetic_rgbd(32, 32, 1),
                                      make_synthetic_rgbd(32, 32, 2)};
    const fs::path dir = fs::temp_directory_path() / "holosurf_acceptance_ds";
    fs::remove_all(dir);
    generate_dataset(scenes, cfg, gen, dir.string());
    std::vector<TrainSample> dataset = load_dataset(dir.string());

    TrainSchedule sched;  // defaults: b1 .9, b2 .999, lr 2e-4, x0.5 every 50 epochs
    sched.epochs = 200;
    sched.seed = 5;
    ModelConfig mc;
    mc.height = 32;
    mc.width = 32;
    mc.base_channels = 8;
    ModelParams params = ModelParams::init(mc, 7);
    std::vector<double> losses = train(dataset, params, sched);

    // seeded reproducibility probed with a short rerun
    TrainSchedule short_sched = sched;
    short_sched.epochs = 3;
    ModelParams p1 = ModelParams::init(mc, 7);
    ModelParams p2 = ModelParams::init(mc, 7);
    std::vector<double> l1 = train(dataset, p1, short_sched);
    std::vector<double> l2 = train(dataset, p2, short_sched);
    const bool reproducible = l1 == l2;

    const double ratio = losses.back() / losses.front();
    const bool pass = dataset.size() == 8 && ratio <= 0.5 && losses[50] < losses[0] &&
                      reproducible;
    std::ostringstream d;
    d << dataset.size() << " samples, loss " << losses.front() << " -> " << losses.back()
      << " (ratio " << ratio << "), epoch50 " << losses[50] << ", reproducible "
      << (reproducible ? "yes" : "no");
    fs::remove_all(dir);
    report(6, "toy training halves the loss", pass, d.str(),
           std::chrono::duration<double>(clk::now() - t0).count());
}

void criterion7_dataset_pipeline() {
    const auto t0 = clk::now();
    OpticalConfig cfg = OpticalConfig::make(32, 32, 0.0, 6);
    DatasetGenConfig gen;
    gen.surfaces_per_image = 5;
    gen.base_distances_mm = {0.0, 10.0};
    gen.optimize_iterations = 10;
    gen.seed = 99;
    std::vector<RgbdSample> scenes = {make_synthetic_rgbd(32, 32, 11),
                                      make_synthetic_rgbd(32, 32, 12)};

    const fs::path dir1 = fs::temp_directory_path() / "holosurf_acc_ds1";
    const fs::path dir2 = fs::temp_directory_path() / "holosurf_acc_ds2";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    auto records = generate_dataset(scenes, cfg, gen, dir1.string());

    bool pass = true;
    std::ostringstream d;

    // record count law (and the full-scale instance of the same law)
    const size_t expected = scenes.size() * gen.surfaces_per_image * gen.base_distances_mm.size();
    pass = pass && records.size() == expected;
    pass = pass && 300 * 5 * 1 == 1500;
    d << records.size() << " records (expected " << expected << ")";

    // partition, closure, and mask laws on the emitted files
    for (size_t ri = 0; ri < records.size() && pass; ++ri) {
        const RgbdSample& scene = scenes[ri / (gen.surfaces_per_image * 2)];
        std::vector<Tensor> masks = quantize_depth(scene.depth, 6);
        for (long i = 0; i < scene.depth.size(); ++i) {
            double sum = 0.0;
            for (const Tensor& m : masks) sum += m[i];
            if (sum != 1.0) pass = false;
        }
        Tensor surface = load_pfm((dir1 / records[ri].surface_path).string());
        Tensor mask = load_png_mask((dir1 / records[ri].mask_path).string());
        for (int x = 0; x < 32 && pass; ++x)
            for (int y = 0; y < 32; ++y) {
                const double vs = surface.at(0, x, y) * 5.0;
                const int level = static_cast<int>(std::lround(vs));
                if (std::abs(vs - level) > 1e-6 || level < 0 || level > 5) {  // closure
                    pass = false;
                    break;
                }
                const bool consistent = masks[level].at(0, x, y) == 1.0;
                if (mask.at(0, x, y) != (consistent ? 1.0 : 0.0)) {  // restoration law
                    pass = false;
                    break;
                }
            }
    }
    d << ", partition/closure/mask laws " << (pass ? "hold" : "VIOLATED");

    // byte-identical regeneration
    generate_dataset(scenes, cfg, gen, dir2.string());
    auto bytes_of = [](const fs::path& root) {
        std::map<std::string, std::string> out;
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (!e.is_regular_file()) continue;
            std::ifstream in(e.path(), std::ios::binary);
            out[fs::relative(e.path(), root).string()] = std::string(
                (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        }
        return out;
    };
    const bool identical = bytes_of(dir1) == bytes_of(dir2);
    pass = pass && identical;
    d << ", regeneration " << (identical ? "byte-identical" : "DIFFERS");

    fs::remove_all(dir1);
    fs::remove_all(dir2);
    report(7, "dataset pipeline", pass, d.str(),
           std::chrono::duration<double>(clk::now() - t0).count());
}

void criterion8_metric_sanity() {
    const auto t0 = clk::now();
    std::mt19937_64 rng(123);
    Image a = random_tensor({3, 16, 16}, rng);
    for (double& v : a.data) v = std::abs(v);
    Image b = a;
    for (double& v : b.data) v += 0.1;  // MSE exactly 0.01

    bool pass = psnr(a, a) == 100.0;
    const double p20 = psnr(a, b);
    pass = pass && std::abs(p20 - 20.0) <= 1e-9;
    pass = pass && psnr(a, b) == psnr(b, a);
    pass = pass && ssim(a, a) == 1.0;
    pass = pass && ssim(a, b) == ssim(b, a);

    std::ostringstream d;
    d << "psnr(a,a) " << psnr(a, a) << ", mse 0.01 -> " << p20 << " dB, ssim(a,a) "
      << ssim(a, a);
    report(8, "metric sanity", pass, d.str(),
           std::chrono::duration<double>(clk::now() - t0).count());
}

}  // namespace

int main() {
    criterion1_sac_equivalence();
    criterion2_wave_invariants();
    criterion3_gradient_suites();
    criterion4_pass_counts();
    criterion5_optimization_descent();
    criterion6_toy_training();
    criterion7_dataset_pipeline();
    criterion8_metric_sanity();
    if (failures == 0)
        std::printf("all acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
