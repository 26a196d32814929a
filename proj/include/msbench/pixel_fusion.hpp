#ifndef MSBENCH_PIXEL_FUSION_HPP
#define MSBENCH_PIXEL_FUSION_HPP

#include "msbench/core.hpp"

namespace msbench {
namespace pixel_fusion {

/// Per-modality parameter bundle for the pixel-level fusion chain:
/// adaptive weights, convolutional refinement kernels, gate scaling,
/// and sensor-noise sigma. Weight/alpha maps are H x W x 3 (or scalar
/// broadcasts via the make_* helpers).
struct PixelFusionParams {
    FeatureMap w_rgb, w_tir;          // weight maps, values in [0,1]
    FeatureMap alpha_rgb, alpha_tir;  // gate scaling tensors
    std::vector<float> k_rgb, k_tir;  // k x k x 3(out) x 3(in), row-major
    int kernel_size = 3;
    std::array<float, 3> beta_rgb{0, 0, 0};
    std::array<float, 3> beta_tir{0, 0, 0};
    float sigma_noise = 0.01f;
    bool clamp_output = true;
};

/// Constant weight/alpha maps and identity-delta kernels.
PixelFusionParams make_constant_params(int h, int w, float w_rgb, float w_tir,
                                       float alpha = 0.0f, float sigma = 0.0f);

/// Default seeded initialization: identity delta + uniform(-0.05, 0.05)
/// kernel perturbation, weights 0.5 everywhere.
PixelFusionParams make_default_params(int h, int w, Seed seed);

/// kxkx3x3 kernel whose center tap is the channel-identity.
std::vector<float> identity_kernel(int k);

/// Replicates a single-channel image across 3 channels.
Image expand_tir(const Image& tir);

/// W_R (.) I_R + W_T (.) I_T' + eta, eta ~ iid N(0, sigma^2) from seed.
/// Unclamped; the interim image may leave [0,1].
FeatureMap interim_fuse(const Image& rgb, const Image& tir3, const PixelFusionParams& p,
                        Seed seed);

/// Direct 2-D cross-correlation with reflect padding, plus per-channel bias.
FeatureMap conv_refine(const FeatureMap& input, const std::vector<float>& kernel, int k,
                       const std::array<float, 3>& bias);

/// sigmoid(W + alpha (.) tanh(mean3x3(interim))); values strictly in (0,1).
FeatureMap gate(const FeatureMap& interim, const FeatureMap& w, const FeatureMap& alpha);

/// Full chain: expand -> interim -> conv refine -> gated combination.
Image pixel_fuse(const Image& rgb, const Image& tir, const PixelFusionParams& p, Seed seed);

}  // namespace pixel_fusion
}  // namespace msbench

#endif
