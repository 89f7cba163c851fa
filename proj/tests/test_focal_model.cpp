#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "holo/focal_model.hpp"
#include "holo/holo_opt.hpp"
#include "oracles.hpp"

using namespace holo;
using namespace holo::testing;

namespace {

PhaseHologram random_hologram(int h, int w, uint64_t seed) {
    PhaseHologram holo(h, w);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (double& v : holo.phase.data) v = dist(rng);
    return holo;
}

FocalSurface constant_surface(int h, int w, double value) {
    FocalSurface s(h, w);
    for (double& v : s.depth.data) v = value;
    return s;
}

}  // namespace

TEST_CASE("kernel-count law") {
    SUBCASE("32x32") {
        ModelConfig cfg;
        cfg.height = 32;
        cfg.width = 32;
        cfg.base_channels = 4;
        ModelParams params = ModelParams::init(cfg, 1);
        SVKernelSet set = generate_sv_kernels(random_hologram(32, 32, 2),
                                              constant_surface(32, 32, 0.4), params);
        REQUIRE(set.kernels.size() == 4);
        const int expected_n[4] = {1024, 256, 64, 16};
        for (int i = 0; i < 4; ++i) {
            CHECK(set.kernels[i].dim(0) == expected_n[i]);
            CHECK(set.kernels[i].dim(1) == cfg.scale_channels(i));
            CHECK(set.kernels[i].dim(2) == 3);
            CHECK(set.kernels[i].dim(3) == 3);
        }
    }
    SUBCASE("48x32 rectangular") {
        ModelConfig cfg;
        cfg.height = 48;
        cfg.width = 32;
        cfg.base_channels = 2;
        ModelParams params = ModelParams::init(cfg, 3);
        SVKernelSet set = generate_sv_kernels(random_hologram(48, 32, 4),
                                              constant_surface(48, 32, 0.0), params);
        CHECK(set.kernels[2].dim(0) == (48 / 4) * (32 / 4));  // 96
    }
}

TEST_CASE("kernel generation is deterministic") {
    ModelConfig cfg;
    cfg.height = 16;
    cfg.width = 16;
    cfg.base_channels = 4;
    ModelParams params = ModelParams::init(cfg, 5);
    PhaseHologram h = random_hologram(16, 16, 6);
    FocalSurface s = constant_surface(16, 16, 0.6);

    SVKernelSet a = generate_sv_kernels(h, s, params);
    SVKernelSet b = generate_sv_kernels(h, s, params);
    for (int i = 0; i < 4; ++i)
        for (long j = 0; j < a.kernels[i].size(); ++j)
            CHECK(a.kernels[i][j] == b.kernels[i][j]);
}

TEST_CASE("sam_forward decomposition") {
    std::mt19937_64 rng(7);
    FeatureMap features = random_tensor({4, 8, 8}, rng);
    SVKernel v(8, 8, 4, 3);
    v.data = random_tensor(v.data.shape, rng);
    SIKernel w(4, 4, 3);
    w.data = random_tensor(w.data.shape, rng);

    FeatureMap out = sam_forward(features, v, w);
    REQUIRE(out.dim(0) == 5);  // 1 sv channel + 4 sac channels

    FeatureMap sv = sv_conv(features, v);
    FeatureMap sac = sac_forward(features, v, w);
    for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y) {
            CHECK(std::abs(out.at(0, x, y) - sv.at(0, x, y)) < 1e-10);
            for (int c = 0; c < 4; ++c)
                CHECK(std::abs(out.at(1 + c, x, y) - sac.at(c, x, y)) < 1e-10);
        }
}

TEST_CASE("sam_forward limits") {
    std::mt19937_64 rng(8);
    FeatureMap features = random_tensor({2, 4, 4}, rng);
    SVKernel v(4, 4, 2, 3);
    v.data = random_tensor(v.data.shape, rng);

    SUBCASE("all-ones W replicates branch 1 in branch 2") {
        FeatureMap out = sam_forward(features, v, SIKernel::ones(3, 2, 3));
        for (int c = 1; c < 4; ++c)
            for (int x = 0; x < 4; ++x)
                for (int y = 0; y < 4; ++y) CHECK(out.at(c, x, y) == out.at(0, x, y));
    }
    SUBCASE("zero V zeroes both branches") {
        SVKernel zero_v(4, 4, 2, 3);
        SIKernel w(3, 2, 3);
        w.data = random_tensor(w.data.shape, rng);
        FeatureMap out = sam_forward(features, zero_v, w);
        for (double x : out.data) CHECK(x == 0.0);
    }
}

TEST_CASE("model_forward contract") {
    ModelConfig cfg;
    cfg.height = 16;
    cfg.width = 16;
    cfg.base_channels = 4;
    ModelParams params = ModelParams::init(cfg, 11);
    PhaseHologram h = random_hologram(16, 16, 12);
    FocalSurface s = constant_surface(16, 16, 0.2);

    Image r1 = model_forward(h, s, params);
    CHECK(r1.shape == std::vector<int>{3, 16, 16});
    for (double v : r1.data) CHECK(std::isfinite(v));

    Image r2 = model_forward(h, s, params);
    for (long i = 0; i < r1.size(); ++i) CHECK(r1[i] == r2[i]);

    CHECK_THROWS_AS(model_forward(random_hologram(32, 32, 1), s, params),
                    std::invalid_argument);
}

TEST_CASE("masked_l2_loss") {
    SUBCASE("zero at equality") {
        Image r({3, 4, 4}, 0.3);
        CHECK(masked_l2_loss(r, r, Tensor({1, 4, 4}, 1.0)) == 0.0);
    }
    SUBCASE("all-ones mask reduces to the alpha0 term and ignores alpha1") {
        std::mt19937_64 rng(2);
        Image r = random_tensor({3, 4, 4}, rng);
        Image t = random_tensor({3, 4, 4}, rng);
        Tensor m({1, 4, 4}, 1.0);
        double mse = 0.0;
        for (long i = 0; i < r.size(); ++i) mse += (r[i] - t[i]) * (r[i] - t[i]);
        mse /= r.size();
        CHECK(masked_l2_loss(r, t, m, 1.0, 0.5) == doctest::Approx(mse).epsilon(1e-12));
        CHECK(masked_l2_loss(r, t, m, 1.0, 0.5) ==
              masked_l2_loss(r, t, m, 1.0, 123.0));
    }
    SUBCASE("worked 2x2 example") {
        Image r({1, 2, 2}, 1.0);
        Image t({1, 2, 2}, 0.0);
        Tensor m({1, 2, 2});
        m.at(0, 0, 0) = 1.0;
        m.at(0, 0, 1) = 1.0;
        CHECK(masked_l2_loss(r, t, m, 1.0, 0.5) == doctest::Approx(0.75).epsilon(1e-14));
    }
    SUBCASE("symmetry and mask complement") {
        std::mt19937_64 rng(3);
        Image r = random_tensor({3, 4, 4}, rng);
        Image t = random_tensor({3, 4, 4}, rng);
        Tensor m({1, 4, 4});
        for (int i = 0; i < 16; i += 2) m[i] = 1.0;
        Tensor mc({1, 4, 4});
        for (long i = 0; i < 16; ++i) mc[i] = 1.0 - m[i];
        CHECK(masked_l2_loss(r, t, m) == masked_l2_loss(t, r, m));
        CHECK(masked_l2_loss(r, t, m, 1.0, 0.5) ==
              doctest::Approx(masked_l2_loss(r, t, mc, 0.5, 1.0)).epsilon(1e-14));
    }
    SUBCASE("errors") {
        Image r({3, 4, 4});
        Image t({3, 4, 2});
        CHECK_THROWS_AS(masked_l2_loss(r, t, Tensor({1, 4, 4}, 1.0)), std::invalid_argument);
        CHECK_THROWS_AS(masked_l2_loss(r, r, Tensor({1, 4, 4}, 0.5)), std::invalid_argument);
    }
}

TEST_CASE("end-to-end gradient matches finite differences") {
    ModelConfig cfg;
    cfg.height = 16;
    cfg.width = 16;
    cfg.base_channels = 2;
    ModelParams params = ModelParams::init(cfg, 21);
    PhaseHologram h = random_hologram(16, 16, 22);
    FocalSurface s = constant_surface(16, 16, 0.8);
    std::mt19937_64 rng(23);
    Image target = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
    Tensor mask({1, 16, 16});
    for (long i = 0; i < 256; i += 3) mask[i] = 1.0;

    ModelGraph g = build_model_graph(h, s, params, true, true);
    ad::Var loss = ad::masked_mse(g.output, target, mask, 1.0, 0.5);
    ad::backward(loss);

    auto eval = [&]() {
        return masked_l2_loss(model_forward(h, s, params), target, mask, 1.0, 0.5);
    };

    // hologram gradient, sampled coordinates
    {
        Tensor& grad = g.hologram.grad();
        Tensor fd_sample({3, 16, 16});
        Tensor ad_sample({3, 16, 16});
        std::mt19937_64 pick(24);
        std::uniform_int_distribution<long> dist(0, h.phase.size() - 1);
        double max_dev = 0.0, max_mag = 0.0;
        for (int trial = 0; trial < 24; ++trial) {
            const long i = dist(pick);
            const double saved = h.phase[i];
            h.phase[i] = saved + 1e-4;
            const double up = eval();
            h.phase[i] = saved - 1e-4;
            const double down = eval();
            h.phase[i] = saved;
            const double fd = (up - down) / 2e-4;
            max_dev = std::max(max_dev, std::abs(fd - grad[i]));
            max_mag = std::max({max_mag, std::abs(fd), std::abs(grad[i])});
        }
        CHECK(max_dev / max_mag < 1e-3);
    }

    // a few parameter tensors end to end
    for (const char* name : {"tr.sam0.w", "kgen.svf1.conv.b", "tr.gfm.scale.w"}) {
        Tensor& t = params.find(name);
        size_t leaf_index = 0;
        for (size_t i = 0; i < params.tensors.size(); ++i)
            if (params.tensors[i].first == name) leaf_index = i;
        Tensor& grad = g.params[leaf_index].grad();

        std::mt19937_64 pick(25);
        std::uniform_int_distribution<long> dist(0, t.size() - 1);
        double max_dev = 0.0, max_mag = 0.0;
        for (int trial = 0; trial < 8; ++trial) {
            const long i = dist(pick);
            const double saved = t[i];
            t[i] = saved + 1e-4;
            const double up = eval();
            t[i] = saved - 1e-4;
            const double down = eval();
            t[i] = saved;
            const double fd = (up - down) / 2e-4;
            max_dev = std::max(max_dev, std::abs(fd - grad[i]));
            max_mag = std::max({max_mag, std::abs(fd), std::abs(grad[i])});
        }
        CHECK(max_dev / max_mag < 1e-3);
    }
}

TEST_CASE("training basics") {
    ModelConfig cfg;
    cfg.height = 16;
    cfg.width = 16;
    cfg.base_channels = 2;

    std::vector<TrainSample> dataset;
    for (int i = 0; i < 2; ++i) {
        TrainSample s;
        s.hologram = random_hologram(16, 16, 30 + i);
        s.target.surface = constant_surface(16, 16, i * 0.5);
        std::mt19937_64 rng(40 + i);
        s.target.image = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
        s.target.mask = Tensor({1, 16, 16}, 1.0);
        dataset.push_back(std::move(s));
    }

    SUBCASE("zero learning rate leaves parameters and loss untouched") {
        ModelParams params = ModelParams::init(cfg, 50);
        ModelParams before = params;
        TrainSchedule sched;
        sched.epochs = 3;
        sched.lr = 0.0;
        std::vector<double> losses = train(dataset, params, sched);
        for (size_t i = 0; i < params.tensors.size(); ++i)
            for (long j = 0; j < params.tensors[i].second.size(); ++j)
                CHECK(params.tensors[i].second[j] == before.tensors[i].second[j]);
        CHECK(losses[0] == losses[1]);
        CHECK(losses[1] == losses[2]);
    }

    SUBCASE("fixed seed reproduces the loss trace") {
        TrainSchedule sched;
        sched.epochs = 3;
        sched.lr = 1e-3;
        sched.seed = 9;
        ModelParams p1 = ModelParams::init(cfg, 51);
        ModelParams p2 = ModelParams::init(cfg, 51);
        std::vector<double> a = train(dataset, p1, sched);
        std::vector<double> b = train(dataset, p2, sched);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }

    SUBCASE("positive learning rate reduces the loss") {
        TrainSchedule sched;
        sched.epochs = 10;
        sched.lr = 1e-3;
        ModelParams params = ModelParams::init(cfg, 52);
        std::vector<double> losses = train(dataset, params, sched);
        CHECK(losses.back() < losses.front());
    }

    SUBCASE("empty dataset rejected") {
        ModelParams params = ModelParams::init(cfg, 53);
        CHECK_THROWS_AS(train({}, params, TrainSchedule{}), std::invalid_argument);
    }
}

TEST_CASE("checkpoint round trip") {
    ModelConfig cfg;
    cfg.height = 16;
    cfg.width = 16;
    cfg.base_channels = 2;
    ModelParams params = ModelParams::init(cfg, 60);

    namespace fs = std::filesystem;
    const std::string p1 = (fs::temp_directory_path() / "holosurf_ckpt1.bin").string();
    const std::string p2 = (fs::temp_directory_path() / "holosurf_ckpt2.bin").string();
    params.save(p1);
    ModelParams loaded = ModelParams::load(p1);
    CHECK(loaded.config.height == 16);
    CHECK(loaded.config.base_channels == 2);
    CHECK(loaded.parameter_count() == params.parameter_count());
    loaded.save(p2);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("parameter count is positive and scales with channels") {
    ModelConfig small;
    small.height = 16;
    small.width = 16;
    small.base_channels = 2;
    ModelConfig big = small;
    big.base_channels = 8;
    CHECK(ModelParams::init(small, 0).parameter_count() > 0);
    CHECK(ModelParams::init(big, 0).parameter_count() >
          ModelParams::init(small, 0).parameter_count());
}
