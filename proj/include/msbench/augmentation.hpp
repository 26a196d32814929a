#ifndef MSBENCH_AUGMENTATION_HPP
#define MSBENCH_AUGMENTATION_HPP

#include <string>
#include <vector>

#include "msbench/core.hpp"

namespace msbench {
namespace augmentation {

struct LabeledBox {
    Box box;
    int class_id = 0;
};

struct Sample {
    Image rgb;
    Image tir;
    std::vector<LabeledBox> boxes;  // RGB-frame ground truth
};

// ---- geometric ------------------------------------------------------------

enum class MirrorKind { None, Horizontal, Vertical, Both };

struct GeometricParams {
    double c_x = 1.0, c_y = 1.0;  // scale, > 0
    double theta = 0.0;           // rotation, radians
    MirrorKind mirror = MirrorKind::None;
    double phi_h = 0.0, phi_v = 0.0;  // mirror phase; 0 = pure +-1 mirror
    double t_x = 0.0, t_y = 0.0;      // translation, pixels
};

/// 2x2 mirroring factor: horizontal -> diag(-cos phi, cos phi),
/// vertical -> diag(cos phi, -cos phi), both -> diag(ch*cv, ch*cv).
std::array<double, 4> mirror_matrix(MirrorKind kind, double phi_h, double phi_v);

/// S * R * U * E, each lifted to homogeneous 3x3; the caller anchors the
/// action about the image center when warping.
PlanarTransform compose_affine(const GeometricParams& g);

/// Re-centers t so it acts about (cx, cy) instead of the origin.
PlanarTransform about_center(const PlanarTransform& t, double cx, double cy);

/// Warps both modalities with the same center-anchored transform (inverse
/// mapping + bilinear). upsilon, when nonempty, is added per pixel post-warp.
/// Boxes map to the axis-aligned hull of their warped corners, clipped;
/// boxes under 1 px^2 are dropped.
Sample warp_pair(const Sample& s, const PlanarTransform& t,
                 const Image* upsilon_rgb = nullptr, const Image* upsilon_tir = nullptr);

Image warp_image(const Image& im, const PlanarTransform& t);

// ---- pixel-level ----------------------------------------------------------

enum class MuMode { GlobalMean, PerChannelMean, Fixed };

struct PixelParams {
    double sigma = 0.0;
    std::array<double, 3> alpha{1.0, 1.0, 1.0};  // per-channel gain
    double beta = 1.0;                           // contrast factor
    MuMode mu_mode = MuMode::GlobalMean;
    double mu_fixed = 0.5;
};

Image add_noise(const Image& p, double sigma, Seed seed);
Image adjust_color(const Image& p, const std::array<double, 3>& alpha);
Image adjust_contrast(const Image& p, double beta, MuMode mode, double mu_fixed = 0.5);

/// noise -> color -> contrast, in that order.
Image pixel_transform(const Image& p, const PixelParams& params, Seed seed);

// ---- named enhancement ops ------------------------------------------------

/// Contrast-limited adaptive histogram equalization, 256 bins, bilinear
/// tile interpolation. Single-channel input.
Image clahe(const Image& channel, int tiles_x, int tiles_y, double clip_limit);

/// CLAHE on a 3-channel image applies per channel.
Image clahe_rgb(const Image& im, int tiles = 8, double clip_limit = 2.0);

enum class LightingOp { RandomLighting, LightEnhance };

/// random_lighting: gamma ~ U[0.5,1.5], gain ~ U[0.8,1.2]; out = clamp(a*P^g).
/// light_enhance: fixed gamma-0.7 brighten.
Image lighting_op(const Image& im, LightingOp op, Seed seed);

// ---- multimodal-specific --------------------------------------------------

enum class EnhanceMode { Synchronized, Complementary };

struct EnhancePolicy {
    EnhanceMode mode = EnhanceMode::Complementary;
    std::vector<std::string> rgb_ops;  // registry names: clahe, random_lighting, light_enhance
    std::vector<std::string> tir_ops;
    double gain_rgb = 0.0;  // A_R: weight of RGB-derived edges added to TIR
    double gain_tir = 0.0;  // A_T: weight of TIR-derived edges added to RGB
};

/// Sobel gradient magnitude of the (gray-reduced) image, normalized to [0,1].
Image sobel_edges(const Image& im);

Image apply_op_chain(const Image& im, const std::vector<std::string>& ops, Seed seed);

/// Applies each modality's op chain, then adds gain * cross-modal Sobel
/// edges; synchronized mode runs the RGB chain on both with zero gains.
Sample complementary_enhance(const Sample& s, const EnhancePolicy& policy, Seed seed);

// ---- small-sample strategies ----------------------------------------------

Sample resize_sample(const Sample& s, int out_h, int out_w);

/// Four samples scaled to half size and tiled into quadrants (Fastmosaic).
Sample mosaic4(const std::vector<Sample>& samples, int out_h, int out_w, Seed seed,
               bool jitter_center = false);

/// r x c grid tiling; grid (2,2) equals mosaic4 with no jitter.
Sample stitcher(const std::vector<Sample>& samples, int rows, int cols, int out_h, int out_w);

/// Copy-paste each ground-truth region `copies` times to random
/// non-overlapping locations; both modalities, boxes appended.
Sample region_resample(const Sample& s, int copies, Seed seed);

/// Boxes under area_threshold px^2 are re-rendered scaled by factor in place.
Sample small_object_magnify(const Sample& s, double area_threshold, double factor);

/// Stable external op names for policy serialization.
const std::vector<std::string>& op_registry();

}  // namespace augmentation
}  // namespace msbench

#endif
