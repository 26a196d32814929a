#include "msbench/feature_fusion.hpp"

namespace msbench {
namespace feature_fusion {

namespace {

void check_same_shape(const FeatureMap& a, const FeatureMap& b, const char* what) {
    if (a.height != b.height || a.width != b.width || a.channels != b.channels)
        throw Error("ShapeMismatch", std::string(what) + ": feature maps differ in shape");
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        double mx = logits.row(r).maxCoeff();
        Eigen::ArrayXd e = (logits.row(r).array() - mx).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return out;
}

Eigen::MatrixXd seeded_matrix(int rows, int cols, double scale, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-scale, scale);
    return m;
}

}  // namespace

NinParams NinParams::zeros(int channels) {
    NinParams p;
    p.rgb.w = Eigen::MatrixXd::Zero(channels, channels);
    p.rgb.zeta = Eigen::VectorXd::Zero(channels);
    p.tir = p.rgb;
    p.nu_weights = Eigen::VectorXd::Zero(channels);
    return p;
}

NinParams NinParams::seeded(int channels, Seed seed) {
    Rng rng(seed);
    double scale = 1.0 / std::sqrt(static_cast<double>(channels));
    NinParams p;
    p.rgb.w = seeded_matrix(channels, channels, scale, rng);
    p.rgb.zeta = seeded_matrix(channels, 1, scale, rng);
    p.tir.w = seeded_matrix(channels, channels, scale, rng);
    p.tir.zeta = seeded_matrix(channels, 1, scale, rng);
    p.nu_weights = seeded_matrix(channels, 1, scale, rng);
    return p;
}

IcfeParams IcfeParams::seeded(int dim, int heads, int iterations, Seed seed) {
    if (heads < 1 || dim % heads != 0)
        throw Error("BadConfig", "model dim must be divisible by head count");
    if (iterations < 1) throw Error("BadConfig", "icfe needs iterations >= 1");
    Rng rng(seed);
    double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    IcfeParams p;
    p.heads = heads;
    p.dim = dim;
    p.iterations = iterations;
    int dh = dim / heads;
    for (int h = 0; h < heads; ++h) {
        p.w_q.push_back(seeded_matrix(dim, dh, scale, rng));
        p.w_k.push_back(seeded_matrix(dim, dh, scale, rng));
        p.w_v.push_back(seeded_matrix(dim, dh, scale, rng));
    }
    p.w_o = seeded_matrix(dim, dim, scale, rng);
    p.lambda_k = Eigen::VectorXd::Constant(iterations, 0.5);
    p.mu_k = Eigen::VectorXd::Constant(iterations, 0.5);
    return p;
}

Wiring wiring_from_name(const std::string& s) {
    if (s == "B") return Wiring::Baseline;
    if (s == "I") return Wiring::Icfe;
    if (s == "N") return Wiring::Nin;
    if (s == "I+N") return Wiring::IcfeNin;
    throw Error("UnknownWiring", "wiring must be B, I, N, or I+N; got '" + s + "'");
}

BranchInputs inputs_from_name(const std::string& s) {
    if (s == "R+T") return BranchInputs::RgbTir;
    if (s == "R+R") return BranchInputs::RgbRgb;
    if (s == "T+T") return BranchInputs::TirTir;
    throw Error("UnknownWiring", "inputs must be R+T, R+R, or T+T; got '" + s + "'");
}

Eigen::MatrixXd tokens_from_map(const FeatureMap& f) {
    Eigen::MatrixXd t(static_cast<Eigen::Index>(f.height) * f.width, f.channels);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            for (int c = 0; c < f.channels; ++c)
                t(static_cast<Eigen::Index>(y) * f.width + x, c) = f.at(y, x, c);
    return t;
}

FeatureMap map_from_tokens(const Eigen::MatrixXd& t, int h, int w) {
    FeatureMap f(h, w, static_cast<int>(t.cols()));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < f.channels; ++c)
                f.at(y, x, c) = static_cast<float>(t(static_cast<Eigen::Index>(y) * w + x, c));
    return f;
}

FeatureMap nin_transform(const FeatureMap& x, const NinModalityParams& p) {
    if (p.w.rows() != x.channels || p.w.cols() != x.channels)
        throw Error("DimMismatch", "nin weight matrix does not match channel count");
    FeatureMap out(x.height, x.width, x.channels);
    Eigen::VectorXd px(x.channels);
    for (int y = 0; y < x.height; ++y)
        for (int xx = 0; xx < x.width; ++xx) {
            for (int c = 0; c < x.channels; ++c) px(c) = x.at(y, xx, c);
            Eigen::VectorXd r = px + (p.w * px + p.zeta);
            for (int c = 0; c < x.channels; ++c) out.at(y, xx, c) = static_cast<float>(r(c));
        }
    return out;
}

NinFuseResult nin_fuse(const FeatureMap& d_rgb, const FeatureMap& d_tir, const NinParams& p) {
    check_same_shape(d_rgb, d_tir, "nin_fuse");
    if (p.nu_weights.size() != d_rgb.channels)
        throw Error("DimMismatch", "nu_weights does not match channel count");

    auto weight_of = [&p](const FeatureMap& d) {
        Eigen::VectorXd gap = Eigen::VectorXd::Zero(d.channels);
        for (int y = 0; y < d.height; ++y)
            for (int x = 0; x < d.width; ++x)
                for (int c = 0; c < d.channels; ++c) gap(c) += d.at(y, x, c);
        gap /= static_cast<double>(d.height) * d.width;
        double nu = gap.dot(p.nu_weights);
        return 1.0 / (1.0 + std::exp(-nu));
    };

    NinFuseResult res;
    res.alpha_rgb = weight_of(d_rgb);
    res.alpha_tir = weight_of(d_tir);
    res.fused = FeatureMap(d_rgb.height, d_rgb.width, d_rgb.channels);
    for (size_t i = 0; i < res.fused.size(); ++i)
        res.fused.data[i] = static_cast<float>(res.alpha_rgb * d_rgb.data[i] +
                                               res.alpha_tir * d_tir.data[i]);
    return res;
}

Eigen::MatrixXd icfe_head(const Eigen::MatrixXd& tokens_q, const Eigen::MatrixXd& tokens_kv,
                          const Eigen::MatrixXd& w_q, const Eigen::MatrixXd& w_k,
                          const Eigen::MatrixXd& w_v) {
    if (tokens_q.cols() != w_q.rows() || tokens_kv.cols() != w_k.rows() ||
        tokens_kv.cols() != w_v.rows())
        throw Error("DimMismatch", "attention projection dims do not match tokens");
    Eigen::MatrixXd q = tokens_q * w_q;
    Eigen::MatrixXd k = tokens_kv * w_k;
    Eigen::MatrixXd v = tokens_kv * w_v;
    double dh = static_cast<double>(w_q.cols());
    Eigen::MatrixXd attn = softmax_rows(q * k.transpose() / std::sqrt(dh));
    return attn * v;
}

Eigen::MatrixXd icfe_cross(const Eigen::MatrixXd& tokens_q, const Eigen::MatrixXd& tokens_kv,
                           const IcfeParams& p) {
    int dh = p.head_dim();
    Eigen::MatrixXd concat(tokens_q.rows(), p.dim);
    for (int h = 0; h < p.heads; ++h)
        concat.middleCols(static_cast<Eigen::Index>(h) * dh, dh) =
            icfe_head(tokens_q, tokens_kv, p.w_q[h], p.w_k[h], p.w_v[h]);
    return concat * p.w_o;
}

FeatureMap icfe_iterate(const FeatureMap& x_rgb, const FeatureMap& x_tir, const IcfeParams& p) {
    check_same_shape(x_rgb, x_tir, "icfe_iterate");
    if (x_rgb.channels != p.dim)
        throw Error("DimMismatch", "feature channels must equal the model dim");
    if (p.iterations < 1) throw Error("BadConfig", "icfe needs iterations >= 1");

    Eigen::MatrixXd t_r = tokens_from_map(x_rgb);
    Eigen::MatrixXd t_t = tokens_from_map(x_tir);
    Eigen::MatrixXd fused;
    for (int k = 0; k < p.iterations; ++k) {
        Eigen::MatrixXd z_r = icfe_cross(t_r, t_t, p);
        Eigen::MatrixXd z_t = icfe_cross(t_t, t_r, p);
        fused = p.lambda_k(k) * z_r + p.mu_k(k) * z_t;
        // residual activation applies from the second iteration on;
        // at n=1 there is no prior fused term to feed it
        if (k > 0) fused = fused + fused.unaryExpr([](double v) { return std::tanh(v); });
        t_r = z_r;
        t_t = z_t;
    }
    return map_from_tokens(fused, x_rgb.height, x_rgb.width);
}

FeatureMap wire_fusion(const FeatureMap& x_rgb, const FeatureMap& x_tir, const WireConfig& cfg) {
    check_same_shape(x_rgb, x_tir, "wire_fusion");
    const FeatureMap* a = &x_rgb;
    const FeatureMap* b = &x_tir;
    switch (cfg.inputs) {
        case BranchInputs::RgbTir: break;
        case BranchInputs::RgbRgb: b = &x_rgb; break;
        case BranchInputs::TirTir: a = &x_tir; break;
    }
    switch (cfg.wiring) {
        case Wiring::Baseline: {
            FeatureMap out(a->height, a->width, a->channels);
            for (size_t i = 0; i < out.size(); ++i)
                out.data[i] = 0.5f * (a->data[i] + b->data[i]);
            return out;
        }
        case Wiring::Nin:
            return nin_fuse(nin_transform(*a, cfg.nin.rgb), nin_transform(*b, cfg.nin.tir),
                            cfg.nin)
                .fused;
        case Wiring::Icfe:
            return icfe_iterate(*a, *b, cfg.icfe);
        case Wiring::IcfeNin: {
            FeatureMap enhanced = icfe_iterate(*a, *b, cfg.icfe);
            return nin_fuse(nin_transform(enhanced, cfg.nin.rgb),
                            nin_transform(enhanced, cfg.nin.tir), cfg.nin)
                .fused;
        }
    }
    throw Error("UnknownWiring", "unhandled wiring");
}

}  // namespace feature_fusion
}  // namespace msbench
