#ifndef MSBENCH_FEATURE_FUSION_HPP
#define MSBENCH_FEATURE_FUSION_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "msbench/core.hpp"

namespace msbench {
namespace feature_fusion {

/// Residual 1x1 channel-mixing module parameters (one modality).
struct NinModalityParams {
    Eigen::MatrixXd w;     // C x C
    Eigen::VectorXd zeta;  // C
};

struct NinParams {
    NinModalityParams rgb, tir;
    Eigen::VectorXd nu_weights;  // C; dynamic-weighting projection

    static NinParams zeros(int channels);
    static NinParams seeded(int channels, Seed seed);
};

/// Iterative cross-attention module parameters.
struct IcfeParams {
    int heads = 2;
    int dim = 0;  // model dim d, divisible by heads
    std::vector<Eigen::MatrixXd> w_q, w_k, w_v;  // per head, d x d_H
    Eigen::MatrixXd w_o;                          // d x d
    Eigen::VectorXd lambda_k, mu_k;               // per-iteration fusion weights
    int iterations = 1;

    int head_dim() const { return dim / heads; }
    static IcfeParams seeded(int dim, int heads, int iterations, Seed seed);
};

enum class Wiring { Baseline, Icfe, Nin, IcfeNin };
enum class BranchInputs { RgbTir, RgbRgb, TirTir };

Wiring wiring_from_name(const std::string& s);
BranchInputs inputs_from_name(const std::string& s);

/// D = X + (W * X + zeta); the 1x1 conv is a per-pixel C x C multiply.
FeatureMap nin_transform(const FeatureMap& x, const NinModalityParams& p);

struct NinFuseResult {
    FeatureMap fused;
    double alpha_rgb = 0, alpha_tir = 0;
};

/// alpha_l = sigmoid(nu(D_l)) with nu = per-channel GAP dotted with
/// nu_weights (scalar per map); fused = alpha_R D_R + alpha_T D_T.
NinFuseResult nin_fuse(const FeatureMap& d_rgb, const FeatureMap& d_tir, const NinParams& p);

/// Single cross-attention head: Q from a, K/V from b.
/// Tokens are rows of N x d matrices. Returns N x d_H.
Eigen::MatrixXd icfe_head(const Eigen::MatrixXd& tokens_q, const Eigen::MatrixXd& tokens_kv,
                          const Eigen::MatrixXd& w_q, const Eigen::MatrixXd& w_k,
                          const Eigen::MatrixXd& w_v);

/// All heads concatenated and projected by W_O. Returns N x d.
Eigen::MatrixXd icfe_cross(const Eigen::MatrixXd& tokens_q, const Eigen::MatrixXd& tokens_kv,
                           const IcfeParams& p);

/// Full iterative exchange; returns the fused map, same shape as inputs.
FeatureMap icfe_iterate(const FeatureMap& x_rgb, const FeatureMap& x_tir, const IcfeParams& p);

struct WireConfig {
    Wiring wiring = Wiring::Baseline;
    BranchInputs inputs = BranchInputs::RgbTir;
    NinParams nin;
    IcfeParams icfe;
};

FeatureMap wire_fusion(const FeatureMap& x_rgb, const FeatureMap& x_tir, const WireConfig& cfg);

/// Row-major flatten of spatial positions -> N x C token matrix.
Eigen::MatrixXd tokens_from_map(const FeatureMap& f);
FeatureMap map_from_tokens(const Eigen::MatrixXd& t, int h, int w);

}  // namespace feature_fusion
}  // namespace msbench

#endif
