#ifndef MSBENCH_REGISTRATION_HPP
#define MSBENCH_REGISTRATION_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "msbench/core.hpp"

namespace msbench {
namespace registration {

struct DescriptorGrid {
    int grid_h = 0, grid_w = 0;
    int dim = 0;
    std::vector<float> descriptors;       // grid_h * grid_w rows, L2-normalized
    std::vector<double> cell_centers_x;   // pixel coordinates per cell
    std::vector<double> cell_centers_y;
    std::vector<bool> textured;  // false for zero-gradient cells (excluded from matching)

    const float* desc(int i) const { return descriptors.data() + static_cast<size_t>(i) * dim; }
    int cells() const { return grid_h * grid_w; }
};

struct MatchConfig {
    double tau = 0.1;         // softmax temperature, > 0
    double score_floor = 0.2;  // keep pairs whose max prob >= floor
    bool mutual_nn = true;
};

struct RobustFitConfig {
    TransformKind model = TransformKind::Affine;
    int ransac_iters = 500;
    double inlier_px = 2.0;
    int min_inliers = 6;  // 8 for homography
    Seed seed{0};
};

struct AlignLossWeights {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
};

/// Per-cell gradient-orientation histogram descriptor: 8 orientation bins
/// over a 2x2 spatial layout (32 dims at the default), L2-normalized.
/// Zero-gradient cells get the uniform unit vector and are flagged
/// untextured.
DescriptorGrid extract_descriptors(const Image& image, int cell_size = 8, int spatial = 2,
                                   int orient_bins = 8);

/// Temperature-softmax matching over descriptor dot products, with optional
/// mutual-nearest-neighbor filtering. Matched points are cell centers.
PointMatchSet match_features(const DescriptorGrid& a, const DescriptorGrid& b,
                             const MatchConfig& cfg);

struct FitResult {
    PlanarTransform transform;
    std::vector<bool> inliers;
    double residual = 0;  // mean squared inlier residual
};

/// RANSAC hypothesis sampling + least-squares refit on inliers. Affine via
/// normal equations; homography via normalized DLT. ransac_iters=1 with
/// inlier_px=inf reduces to plain least squares on everything.
FitResult estimate_transform(const PointMatchSet& matches, const RobustFitConfig& cfg);

/// Inverse-map + bilinear resample; out-of-frame samples are zero.
Image apply_transform(const Image& image, const PlanarTransform& t);

double loftr_joint_loss(const DescriptorGrid& a, const DescriptorGrid& b,
                        const PointMatchSet& matches, const PlanarTransform& t,
                        const AlignLossWeights& w);

/// Nearest-valid-neighbor fill followed by 5x5 Gaussian smoothing (sigma 1).
Image complete_depth(const Image& sparse, const std::vector<bool>& valid);

struct DepthAttentionResult {
    Eigen::MatrixXd attention;  // rows sum to 1
    FeatureMap enhanced_tir;
};

/// H = softmax((Q K^T (.) depth per key column) / sqrt(d)); X_T' = H V.
/// Weights default to identity when empty matrices are passed.
DepthAttentionResult depth_guided_attention(const FeatureMap& x_rgb, const FeatureMap& x_tir,
                                            const Image& depth_dense,
                                            const Eigen::MatrixXd& w_q,
                                            const Eigen::MatrixXd& w_k,
                                            const Eigen::MatrixXd& w_v);

/// out(x,y) = sum_{x',y'} X(x',y') * prod_i max(0, 1 - |i' - i - flow_i|).
FeatureMap bilinear_warp(const FeatureMap& x, const FlowField& flow);
Image bilinear_warp(const Image& x, const FlowField& flow);

struct FlowConfig {
    int max_displacement = 4;  // search radius at the finest level
    int patch_radius = 3;
    int levels = 3;
};

/// Coarse-to-fine SSD patch search with 3x3 median smoothing; ties resolve
/// to the smallest-magnitude candidate.
FlowField estimate_flow(const FeatureMap& src, const FeatureMap& dst, const FlowConfig& cfg);

double superfusion_joint_loss(const FeatureMap& x_rgb, const FeatureMap& x_tir_enh,
                              const PointMatchSet& matches, const FlowField& flow,
                              const FlowField& flow_star, const AlignLossWeights& w);

enum class Method { LoftrStyle, SuperfusionStyle };
Method method_from_name(const std::string& s);

struct RegisterConfig {
    Method method = Method::LoftrStyle;
    Modality reference = Modality::RGB;
    MatchConfig match;
    RobustFitConfig fit;
    FlowConfig flow;
    int cell_size = 8;
    /// Finite-difference refinement (Gauss-Newton-free descent on a
    /// gradient-magnitude SSD) after the robust fit; 0 disables.
    int refine_steps = 50;
};

struct RegisterResult {
    Image aligned_rgb;
    Image aligned_tir;
    std::optional<PlanarTransform> transform;  // loftr_style
    std::optional<FlowField> flow;             // superfusion_style
};

/// Aligns the non-reference modality onto the reference frame.
/// Throws RegistrationFailed on textureless or unmatched inputs.
RegisterResult register_pair(const Image& rgb, const Image& tir, const RegisterConfig& cfg);

}  // namespace registration
}  // namespace msbench

#endif
