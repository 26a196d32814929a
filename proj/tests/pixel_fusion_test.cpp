#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "msbench/pixel_fusion.hpp"

using namespace msbench;
using namespace msbench::pixel_fusion;

namespace {

// independent reflect-101 indexer for the convolution oracle
int oracle_reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

FeatureMap random_map(int h, int w, int c, uint64_t seed) {
    Rng r(Seed{seed});
    FeatureMap m(h, w, c);
    for (float& v : m.data) v = static_cast<float>(r.uniform(-1.0, 1.0));
    return m;
}

Image const_image(int h, int w, int c, float v) { return Image(h, w, c, v); }

}  // namespace

TEST_CASE("expand_tir replicates the channel") {
    Image tir(2, 2, 1, 0.5f);
    Image out = expand_tir(tir);
    REQUIRE(out.channels == 3);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == 0.5f);

    Rng r(Seed{9});
    Image rnd(8, 8, 1);
    for (float& v : rnd.data) v = static_cast<float>(r.uniform());
    Image e = expand_tir(rnd);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c) CHECK(e.at(y, x, c) == rnd.at(y, x));

    Image rgb(2, 2, 3);
    CHECK_THROWS_WITH_AS(expand_tir(rgb), doctest::Contains("ChannelMismatch"), Error);
}

TEST_CASE("interim_fuse passthrough and average") {
    Image rgb = const_image(4, 4, 3, 0.2f);
    Image tir3 = expand_tir(const_image(4, 4, 1, 0.6f));

    PixelFusionParams p = make_constant_params(4, 4, 1.0f, 0.0f, 0.0f, 0.0f);
    FeatureMap out = interim_fuse(rgb, tir3, p, Seed{1});
    for (float v : out.data) CHECK(v == doctest::Approx(0.2).epsilon(1e-6));

    PixelFusionParams q = make_constant_params(4, 4, 0.5f, 0.5f, 0.0f, 0.0f);
    FeatureMap avg = interim_fuse(rgb, tir3, q, Seed{1});
    for (float v : avg.data) CHECK(v == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("interim_fuse noise is unbiased over many seeds") {
    // Monte-Carlo: the mean over seeds converges to the deterministic part
    Image rgb = const_image(1, 1, 3, 0.2f);
    Image tir3 = expand_tir(const_image(1, 1, 1, 0.6f));
    PixelFusionParams p = make_constant_params(1, 1, 0.5f, 0.5f, 0.0f, 0.01f);
    double sum = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) sum += interim_fuse(rgb, tir3, p, Seed{77}.derive(i)).at(0, 0, 0);
    CHECK(std::abs(sum / n - 0.4) < 3.0 * 0.01 / 100.0);
}

TEST_CASE("conv_refine identity kernel and constant invariance") {
    FeatureMap x = random_map(5, 5, 3, 11);
    FeatureMap y = conv_refine(x, identity_kernel(3), 3, {0, 0, 0});
    for (size_t i = 0; i < x.data.size(); ++i)
        CHECK(y.data[i] == doctest::Approx(x.data[i]).epsilon(1e-7));

    // 3x3 box kernel, per-output-channel average of its own input channel
    std::vector<float> box(3 * 3 * 3 * 3, 0.0f);
    for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
            for (int c = 0; c < 3; ++c)
                box[((static_cast<size_t>(ky) * 3 + kx) * 3 + c) * 3 + c] = 1.0f / 9.0f;
    FeatureMap cst(4, 4, 3, 0.37f);
    FeatureMap b = conv_refine(cst, box, 3, {0, 0, 0});
    for (float v : b.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-6));
}

TEST_CASE("conv_refine matches the brute-force oracle to 1e-12") {
    FeatureMap x = random_map(4, 4, 3, 21);
    Rng r(Seed{22});
    const int k = 3;
    std::vector<float> kernel(static_cast<size_t>(k) * k * 3 * 3);
    for (float& v : kernel) v = static_cast<float>(r.uniform(-0.5, 0.5));
    std::array<float, 3> bias{0.1f, -0.2f, 0.3f};

    FeatureMap got = conv_refine(x, kernel, k, bias);
    for (int y = 0; y < 4; ++y)
        for (int xx = 0; xx < 4; ++xx)
            for (int co = 0; co < 3; ++co) {
                double acc = bias[co];
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx)
                        for (int ci = 0; ci < 3; ++ci) {
                            int sy = oracle_reflect(y + ky - 1, 4);
                            int sx = oracle_reflect(xx + kx - 1, 4);
                            acc += kernel[((static_cast<size_t>(ky) * k + kx) * 3 + co) * 3 + ci] *
                                   x.at(sy, sx, ci);
                        }
                CHECK(std::abs(got.at(y, xx, co) - acc) < 1e-12 + 1e-6 * std::abs(acc));
            }

    CHECK_THROWS_WITH_AS(conv_refine(x, kernel, 5, bias), doctest::Contains("BadKernelShape"),
                         Error);
}

TEST_CASE("gate fixtures") {
    FeatureMap interim(3, 3, 3, 0.0f);
    FeatureMap w0(3, 3, 3, 0.0f), a0(3, 3, 3, 0.0f);
    for (float v : gate(interim, w0, a0).data) CHECK(v == doctest::Approx(0.5).epsilon(1e-9));

    FeatureMap w10(3, 3, 3, 10.0f);
    for (float v : gate(interim, w10, a0).data)
        CHECK(std::abs(v - 0.9999546) < 1e-6);  // sigmoid(10)

    FeatureMap one(3, 3, 3, 1.0f), a1(3, 3, 3, 1.0f);
    for (float v : gate(one, w0, a1).data)
        CHECK(std::abs(v - 0.6816968) < 1e-5);  // sigmoid(tanh(1))
}

TEST_CASE("gate output strictly inside (0,1)") {
    Rng r(Seed{5});
    for (int trial = 0; trial < 50; ++trial) {
        FeatureMap interim = random_map(3, 3, 3, 100 + trial);
        FeatureMap w = random_map(3, 3, 3, 200 + trial);
        FeatureMap a = random_map(3, 3, 3, 300 + trial);
        for (float& v : w.data) v *= 8.0f;
        for (float v : gate(interim, w, a).data) {
            CHECK(v > 0.0f);
            CHECK(v < 1.0f);
        }
    }
}

TEST_CASE("pixel_fuse scalar fixture 0.44621") {
    // identity kernels, zero bias, W_R=1, W_T=0, alpha=0, sigma=0:
    // gate_R = sigmoid(1), gate_T = sigmoid(0); fused = sig(1)*0.2 + 0.5*0.6
    Image rgb = const_image(4, 4, 3, 0.2f);
    Image tir = const_image(4, 4, 1, 0.6f);
    PixelFusionParams p = make_constant_params(4, 4, 1.0f, 0.0f, 0.0f, 0.0f);
    Image out = pixel_fuse(rgb, tir, p, Seed{3});
    for (float v : out.data) CHECK(std::abs(v - 0.44621) < 1e-5);
}

TEST_CASE("pixel_fuse symmetry when rgb equals expanded tir") {
    Image tir(4, 4, 1);
    Rng r(Seed{31});
    for (float& v : tir.data) v = static_cast<float>(r.uniform());
    Image rgb = expand_tir(tir);
    PixelFusionParams p = make_constant_params(4, 4, 0.5f, 0.5f, 0.3f, 0.0f);
    Image fused = pixel_fuse(rgb, tir, p, Seed{4});
    // both branches see identical phi; gates are equal, so the fused image is
    // (F_R + F_T) * phi = 2 * F * phi
    FeatureMap interim = interim_fuse(rgb, rgb, p, Seed{4});
    FeatureMap rgbmap(4, 4, 3);
    rgbmap.data.assign(rgb.data.begin(), rgb.data.end());
    FeatureMap phi = conv_refine(rgbmap, p.k_rgb, p.kernel_size, p.beta_rgb);
    FeatureMap f = gate(interim, p.w_rgb, p.alpha_rgb);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) {
                float expect = clamp01(2.0f * f.at(y, x, c) * phi.at(y, x, c));
                CHECK(fused.at(y, x, c) == doctest::Approx(expect).epsilon(1e-5));
            }
}

TEST_CASE("pixel_fuse is deterministic and shape-preserving") {
    Image rgb(6, 5, 3), tir(6, 5, 1);
    Rng r(Seed{41});
    for (float& v : rgb.data) v = static_cast<float>(r.uniform());
    for (float& v : tir.data) v = static_cast<float>(r.uniform());
    PixelFusionParams p = make_default_params(6, 5, Seed{8});
    Image a = pixel_fuse(rgb, tir, p, Seed{9});
    Image b = pixel_fuse(rgb, tir, p, Seed{9});
    CHECK(a.data == b.data);
    CHECK(a.height == 6);
    CHECK(a.width == 5);
    CHECK(a.channels == 3);
    CHECK(a.in_range01());
}
