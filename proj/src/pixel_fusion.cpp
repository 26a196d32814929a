#include "msbench/pixel_fusion.hpp"

namespace msbench {
namespace pixel_fusion {

namespace {

int reflect(int i, int n) {
    // reflect-101-style without repeating the border sample's neighbor twice:
    // indices ..., 2, 1, 0, 1, 2, ...
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

void check_shape(int h1, int w1, int c1, int h2, int w2, int c2, const char* what) {
    if (h1 != h2 || w1 != w2 || c1 != c2)
        throw Error("ShapeMismatch", std::string(what) + ": shapes differ");
}

}  // namespace

std::vector<float> identity_kernel(int k) {
    std::vector<float> kern(static_cast<size_t>(k) * k * 3 * 3, 0.0f);
    int c = k / 2;
    for (int ch = 0; ch < 3; ++ch)
        kern[((static_cast<size_t>(c) * k + c) * 3 + ch) * 3 + ch] = 1.0f;
    return kern;
}

PixelFusionParams make_constant_params(int h, int w, float wr, float wt, float alpha,
                                       float sigma) {
    PixelFusionParams p;
    p.w_rgb = FeatureMap(h, w, 3, wr);
    p.w_tir = FeatureMap(h, w, 3, wt);
    p.alpha_rgb = FeatureMap(h, w, 3, alpha);
    p.alpha_tir = FeatureMap(h, w, 3, alpha);
    p.kernel_size = 3;
    p.k_rgb = identity_kernel(3);
    p.k_tir = identity_kernel(3);
    p.sigma_noise = sigma;
    return p;
}

PixelFusionParams make_default_params(int h, int w, Seed seed) {
    PixelFusionParams p = make_constant_params(h, w, 0.5f, 0.5f, 0.1f, 0.01f);
    Rng rng(seed);
    for (auto& v : p.k_rgb) v += static_cast<float>(rng.uniform(-0.05, 0.05));
    for (auto& v : p.k_tir) v += static_cast<float>(rng.uniform(-0.05, 0.05));
    return p;
}

Image expand_tir(const Image& tir) {
    if (tir.channels != 1)
        throw Error("ChannelMismatch", "expand_tir needs a 1-channel image");
    Image out(tir.height, tir.width, 3);
    for (int y = 0; y < tir.height; ++y)
        for (int x = 0; x < tir.width; ++x) {
            float v = tir.at(y, x);
            out.at(y, x, 0) = v;
            out.at(y, x, 1) = v;
            out.at(y, x, 2) = v;
        }
    return out;
}

FeatureMap interim_fuse(const Image& rgb, const Image& tir3, const PixelFusionParams& p,
                        Seed seed) {
    check_shape(rgb.height, rgb.width, rgb.channels, tir3.height, tir3.width, tir3.channels,
                "interim_fuse");
    check_shape(rgb.height, rgb.width, 3, p.w_rgb.height, p.w_rgb.width, p.w_rgb.channels,
                "interim_fuse weights");
    FeatureMap out(rgb.height, rgb.width, 3);
    Rng rng(seed);
    for (size_t i = 0; i < out.size(); ++i) {
        float noise = p.sigma_noise > 0.0f
                          ? static_cast<float>(rng.gaussian() * p.sigma_noise)
                          : 0.0f;
        out.data[i] = p.w_rgb.data[i] * rgb.data[i] + p.w_tir.data[i] * tir3.data[i] + noise;
    }
    return out;
}

FeatureMap conv_refine(const FeatureMap& input, const std::vector<float>& kernel, int k,
                       const std::array<float, 3>& bias) {
    if (k < 1 || k % 2 == 0 || kernel.size() != static_cast<size_t>(k) * k * 3 * 3)
        throw Error("BadKernelShape", "kernel must be k x k x 3 x 3 with odd k");
    if (input.channels != 3)
        throw Error("BadKernelShape", "conv_refine expects a 3-channel map");
    FeatureMap out(input.height, input.width, 3);
    int r = k / 2;
    for (int y = 0; y < input.height; ++y)
        for (int x = 0; x < input.width; ++x)
            for (int co = 0; co < 3; ++co) {
                double acc = bias[co];
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        int sy = reflect(y + ky - r, input.height);
                        int sx = reflect(x + kx - r, input.width);
                        for (int ci = 0; ci < 3; ++ci)
                            acc += kernel[((static_cast<size_t>(ky) * k + kx) * 3 + co) * 3 + ci] *
                                   input.at(sy, sx, ci);
                    }
                out.at(y, x, co) = static_cast<float>(acc);
            }
    return out;
}

FeatureMap gate(const FeatureMap& interim, const FeatureMap& w, const FeatureMap& alpha) {
    check_shape(interim.height, interim.width, interim.channels, w.height, w.width, w.channels,
                "gate");
    check_shape(interim.height, interim.width, interim.channels, alpha.height, alpha.width,
                alpha.channels, "gate alpha");
    // G = 3x3 mean filter over the interim image (per channel, reflect pad)
    FeatureMap smooth(interim.height, interim.width, interim.channels);
    for (int y = 0; y < interim.height; ++y)
        for (int x = 0; x < interim.width; ++x)
            for (int c = 0; c < interim.channels; ++c) {
                double acc = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        acc += interim.at(reflect(y + dy, interim.height),
                                          reflect(x + dx, interim.width), c);
                smooth.at(y, x, c) = static_cast<float>(acc / 9.0);
            }
    FeatureMap out(interim.height, interim.width, interim.channels);
    for (size_t i = 0; i < out.size(); ++i) {
        double z = w.data[i] + alpha.data[i] * std::tanh(smooth.data[i]);
        out.data[i] = static_cast<float>(1.0 / (1.0 + std::exp(-z)));
    }
    return out;
}

Image pixel_fuse(const Image& rgb, const Image& tir, const PixelFusionParams& p, Seed seed) {
    if (rgb.channels != 3 || tir.channels != 1)
        throw Error("ChannelMismatch", "pixel_fuse expects RGB(3) + TIR(1)");
    if (rgb.height != tir.height || rgb.width != tir.width)
        throw Error("ShapeMismatch", "pixel_fuse expects equal dimensions (register first)");

    Image tir3 = expand_tir(tir);
    FeatureMap interim = interim_fuse(rgb, tir3, p, seed);
    FeatureMap phi_r = conv_refine(to_feature_map(rgb), p.k_rgb, p.kernel_size, p.beta_rgb);
    FeatureMap phi_t = conv_refine(to_feature_map(tir3), p.k_tir, p.kernel_size, p.beta_tir);
    FeatureMap f_r = gate(interim, p.w_rgb, p.alpha_rgb);
    FeatureMap f_t = gate(interim, p.w_tir, p.alpha_tir);

    Image out(rgb.height, rgb.width, 3);
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = f_r.data[i] * phi_r.data[i] + f_t.data[i] * phi_t.data[i];
    if (p.clamp_output) out.clamp();
    return out;
}

}  // namespace pixel_fusion
}  // namespace msbench
