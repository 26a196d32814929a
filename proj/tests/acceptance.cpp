// End-to-end acceptance gate: one pass/fail line per criterion, nonzero exit
// if any fails. Runs against the public library API only.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include <Eigen/Dense>

#include "msbench/augmentation.hpp"
#include "msbench/dataset.hpp"
#include "msbench/decision_fusion.hpp"
#include "msbench/feature_fusion.hpp"
#include "msbench/harness.hpp"
#include "msbench/metrics.hpp"
#include "msbench/pixel_fusion.hpp"
#include "msbench/registration.hpp"

using namespace msbench;

namespace {

int failures = 0;

void report(int criterion, const char* label, bool ok, const char* detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, label, detail);
    if (!ok) ++failures;
}

double now_minus(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- shared helpers -------------------------------------------------------

FeatureMap random_map(int h, int w, int c, uint64_t seed) {
    Rng r(Seed{seed});
    FeatureMap m(h, w, c);
    for (float& v : m.data) v = static_cast<float>(r.uniform(-1.0, 1.0));
    return m;
}

Eigen::MatrixXd random_matrix(int r, int c, uint64_t seed) {
    Rng rng(Seed{seed});
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(-0.5, 0.5);
    return m;
}

double corner_err(const PlanarTransform& est, const PlanarTransform& tru, int w, int h) {
    double err = 0;
    const double corners[4][2] = {
        {0, 0}, {double(w - 1), 0}, {0, double(h - 1)}, {double(w - 1), double(h - 1)}};
    for (const auto& c : corners) {
        double ex, ey, tx, ty;
        est.apply(c[0], c[1], ex, ey);
        tru.apply(c[0], c[1], tx, ty);
        err = std::max(err, std::hypot(ex - tx, ey - ty));
    }
    return err;
}

// one trial of a config: derived-seed batch -> pipeline -> mAP50
double trial_map(const harness::ExperimentConfig& cfg, int t) {
    Seed ts = Seed{cfg.base_seed}.derive(t);
    auto samples = dataset::synth_batch(cfg.dataset.synth, cfg.dataset.count, ts);
    std::vector<metrics::ImageRecord> recs;
    for (size_t i = 0; i < samples.size(); ++i) {
        auto pr = harness::run_pipeline(samples[i], cfg, ts.derive(1000003 + i));
        recs.push_back({pr.preds, pr.gts});
    }
    return metrics::mean_ap(recs).map50;
}

// ---- criterion 1: brute-force oracle equivalence --------------------------

int oracle_reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

bool oracle_conv_refine() {
    FeatureMap x = random_map(3, 3, 3, 9101);
    Rng r(Seed{9102});
    std::vector<float> kernel(3 * 3 * 3 * 3);
    for (float& v : kernel) v = static_cast<float>(r.uniform(-0.5, 0.5));
    std::array<float, 3> bias{0.05f, -0.1f, 0.2f};
    FeatureMap got = pixel_fusion::conv_refine(x, kernel, 3, bias);
    for (int y = 0; y < 3; ++y)
        for (int xx = 0; xx < 3; ++xx)
            for (int co = 0; co < 3; ++co) {
                double acc = bias[co];
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx)
                        for (int ci = 0; ci < 3; ++ci)
                            acc += kernel[((static_cast<size_t>(ky) * 3 + kx) * 3 + co) * 3 + ci] *
                                   x.at(oracle_reflect(y + ky - 1, 3),
                                        oracle_reflect(xx + kx - 1, 3), ci);
                if (std::abs(got.at(y, xx, co) - acc) > 1e-9 + 1e-6 * std::abs(acc)) return false;
            }
    return true;
}

bool oracle_nin_transform() {
    FeatureMap x = random_map(2, 2, 4, 9201);
    feature_fusion::NinModalityParams p{random_matrix(4, 4, 9202), Eigen::VectorXd::Zero(4)};
    Rng r(Seed{9203});
    for (int i = 0; i < 4; ++i) p.zeta(i) = r.uniform(-0.3, 0.3);
    FeatureMap got = feature_fusion::nin_transform(x, p);
    for (int y = 0; y < 2; ++y)
        for (int xx = 0; xx < 2; ++xx)
            for (int co = 0; co < 4; ++co) {
                double acc = x.at(y, xx, co) + p.zeta(co);
                for (int ci = 0; ci < 4; ++ci) acc += p.w(co, ci) * x.at(y, xx, ci);
                if (std::abs(got.at(y, xx, co) - acc) > 1e-6) return false;
            }
    return true;
}

Eigen::MatrixXd oracle_attention_head(const Eigen::MatrixXd& tq, const Eigen::MatrixXd& tkv,
                                      const Eigen::MatrixXd& wq, const Eigen::MatrixXd& wk,
                                      const Eigen::MatrixXd& wv) {
    Eigen::MatrixXd q = tq * wq, k = tkv * wk, v = tkv * wv;
    const int n = static_cast<int>(tq.rows()), m = static_cast<int>(tkv.rows());
    const int dh = static_cast<int>(wq.cols());
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, dh);
    for (int i = 0; i < n; ++i) {
        std::vector<double> logits(m);
        double mx = -1e300;
        for (int j = 0; j < m; ++j) {
            logits[j] = q.row(i).dot(k.row(j)) / std::sqrt(double(dh));
            mx = std::max(mx, logits[j]);
        }
        double denom = 0;
        for (int j = 0; j < m; ++j) denom += std::exp(logits[j] - mx);
        for (int j = 0; j < m; ++j) z.row(i) += std::exp(logits[j] - mx) / denom * v.row(j);
    }
    return z;
}

bool oracle_icfe() {
    Eigen::MatrixXd tq = random_matrix(3, 4, 9301), tkv = random_matrix(3, 4, 9302);
    Eigen::MatrixXd wq = random_matrix(4, 2, 9303), wk = random_matrix(4, 2, 9304),
                    wv = random_matrix(4, 2, 9305);
    Eigen::MatrixXd got = feature_fusion::icfe_head(tq, tkv, wq, wk, wv);
    if ((got - oracle_attention_head(tq, tkv, wq, wk, wv)).cwiseAbs().maxCoeff() > 1e-10)
        return false;

    feature_fusion::IcfeParams p = feature_fusion::IcfeParams::seeded(4, 2, 2, Seed{9306});
    FeatureMap a = random_map(2, 2, 4, 9307), b = random_map(2, 2, 4, 9308);
    FeatureMap out = feature_fusion::icfe_iterate(a, b, p);
    auto cross = [&](const Eigen::MatrixXd& q, const Eigen::MatrixXd& kv) {
        Eigen::MatrixXd cat(q.rows(), p.dim);
        for (int h = 0; h < p.heads; ++h)
            cat.block(0, h * p.head_dim(), q.rows(), p.head_dim()) =
                oracle_attention_head(q, kv, p.w_q[h], p.w_k[h], p.w_v[h]);
        return Eigen::MatrixXd(cat * p.w_o);
    };
    Eigen::MatrixXd tr = feature_fusion::tokens_from_map(a);
    Eigen::MatrixXd tt = feature_fusion::tokens_from_map(b);
    Eigen::MatrixXd zr0 = cross(tr, tt), zt0 = cross(tt, tr);
    Eigen::MatrixXd zr1 = cross(zr0, zt0), zt1 = cross(zt0, zr0);
    Eigen::MatrixXd fused = p.lambda_k(1) * zr1 + p.mu_k(1) * zt1;
    fused = fused + fused.unaryExpr([](double v) { return std::tanh(v); });
    FeatureMap want = feature_fusion::map_from_tokens(fused, 2, 2);
    for (size_t i = 0; i < out.data.size(); ++i)
        if (std::abs(out.data[i] - want.data[i]) > 1e-9 + 1e-6 * std::abs(want.data[i]))
            return false;
    return true;
}

bool oracle_depth_attention() {
    FeatureMap xr = random_map(2, 2, 4, 9401), xt = random_map(2, 2, 4, 9402);
    Image depth(2, 2, 1);
    Rng r(Seed{9403});
    for (float& v : depth.data) v = static_cast<float>(r.uniform(0.1, 1.0));
    Eigen::MatrixXd empty;
    auto res = registration::depth_guided_attention(xr, xt, depth, empty, empty, empty);
    for (int i = 0; i < 4; ++i) {
        double logits[4], mx = -1e300;
        for (int j = 0; j < 4; ++j) {
            double dot = 0;
            for (int c = 0; c < 4; ++c)
                dot += double(xr.at(i / 2, i % 2, c)) * double(xt.at(j / 2, j % 2, c));
            logits[j] = dot * depth.at(j / 2, j % 2) / 2.0;
            mx = std::max(mx, logits[j]);
        }
        double denom = 0;
        for (int j = 0; j < 4; ++j) denom += std::exp(logits[j] - mx);
        for (int j = 0; j < 4; ++j)
            if (std::abs(res.attention(i, j) - std::exp(logits[j] - mx) / denom) > 1e-10)
                return false;
    }
    return true;
}

bool oracle_average_precision() {
    using metrics::GroundTruth;
    using metrics::ImageRecord;
    for (int trial = 0; trial < 200; ++trial) {
        Rng r(Seed{9500u + static_cast<uint64_t>(trial)});
        ImageRecord rec;
        int np = static_cast<int>(r.uniform_index(6));
        int ng = static_cast<int>(r.uniform_index(4));
        for (int i = 0; i < np; ++i) {
            float x = static_cast<float>(r.uniform_index(4)) * 10.0f;
            float y = static_cast<float>(r.uniform_index(4)) * 10.0f;
            rec.preds.detections.push_back(
                {Box{x, y, x + 12, y + 12}, static_cast<float>(r.uniform(0.1, 1.0)), 0});
        }
        for (int i = 0; i < ng; ++i) {
            float x = static_cast<float>(r.uniform_index(4)) * 10.0f;
            float y = static_cast<float>(r.uniform_index(4)) * 10.0f;
            rec.gts.push_back(GroundTruth{Box{x, y, x + 12, y + 12}, 0});
        }
        std::vector<ImageRecord> recs{rec};
        // independent tally: pooled flags sorted by score, envelope area
        auto flags = metrics::match_detections(rec.preds, rec.gts, 0.5);
        struct E {
            float s;
            bool tp;
        };
        std::vector<E> es;
        for (size_t i = 0; i < flags.size(); ++i)
            es.push_back({rec.preds.detections[i].score, flags[i]});
        std::stable_sort(es.begin(), es.end(), [](const E& a, const E& b) { return a.s > b.s; });
        double want;
        if (ng == 0) {
            want = np == 0 ? 1.0 : 0.0;
        } else {
            std::vector<double> rec_v, prec_v;
            int tp = 0, fp = 0;
            for (const E& e : es) {
                e.tp ? ++tp : ++fp;
                rec_v.push_back(double(tp) / ng);
                prec_v.push_back(double(tp) / (tp + fp));
            }
            for (int i = static_cast<int>(prec_v.size()) - 2; i >= 0; --i)
                prec_v[i] = std::max(prec_v[i], prec_v[i + 1]);
            want = 0;
            double prev = 0;
            for (size_t i = 0; i < rec_v.size(); ++i) {
                want += (rec_v[i] - prev) * prec_v[i];
                prev = rec_v[i];
            }
        }
        if (std::abs(metrics::average_precision(recs, 0, 0.5) - want) > 1e-9) return false;
    }
    return true;
}

// ---- criterion 8 properties ------------------------------------------------

bool property_softmax_rows() {
    // match_features row scores implicitly, attention explicitly: check the
    // attention matrix row sums across random token sets
    for (int trial = 0; trial < 1000; ++trial) {
        FeatureMap xr = random_map(2, 2, 4, 20000u + static_cast<uint64_t>(trial));
        FeatureMap xt = random_map(2, 2, 4, 30000u + static_cast<uint64_t>(trial));
        Image depth(2, 2, 1);
        Rng r(Seed{40000u + static_cast<uint64_t>(trial)});
        for (float& v : depth.data) v = static_cast<float>(r.uniform(0.05, 1.0));
        Eigen::MatrixXd empty;
        auto res = registration::depth_guided_attention(xr, xt, depth, empty, empty, empty);
        for (int i = 0; i < res.attention.rows(); ++i) {
            if (std::abs(res.attention.row(i).sum() - 1.0) > 1e-9) return false;
            for (int j = 0; j < res.attention.cols(); ++j)
                if (res.attention(i, j) < 0.0) return false;
        }
    }
    return true;
}

bool property_bilinear_weights() {
    // warping a constant-1 image measures the per-pixel weight sum; interior
    // sample points must sum to exactly 1
    for (int trial = 0; trial < 1000; ++trial) {
        Rng r(Seed{50000u + static_cast<uint64_t>(trial)});
        Image ones(8, 8, 1, 1.0f);
        FlowField flow(8, 8);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                flow.dx(y, x) = static_cast<float>(r.uniform(-1.5, 1.5));
                flow.dy(y, x) = static_cast<float>(r.uniform(-1.5, 1.5));
            }
        Image out = registration::bilinear_warp(ones, flow);
        for (int y = 3; y < 5; ++y)
            for (int x = 3; x < 5; ++x) {
                // the sample point x + dx stays interior by construction
                if (std::abs(out.at(y, x) - 1.0f) > 1e-5f) return false;
            }
    }
    return true;
}

bool property_images_in_range() {
    for (int trial = 0; trial < 1000; ++trial) {
        dataset::SynthConfig sc;
        sc.height = 32;
        sc.width = 32;
        sc.seed = 60000u + static_cast<uint64_t>(trial);
        sc.illumination = (trial % 10) / 10.0;
        auto s = dataset::synth_scene(sc);
        if (!s.rgb.in_range01() || !s.tir.in_range01()) return false;
        if (trial % 50 == 0) {
            auto p = pixel_fusion::make_default_params(32, 32, Seed{sc.seed});
            if (!pixel_fusion::pixel_fuse(s.rgb, s.tir, p, Seed{sc.seed}).in_range01())
                return false;
        }
    }
    return true;
}

bool property_nms_idempotent() {
    for (int trial = 0; trial < 1000; ++trial) {
        Rng r(Seed{70000u + static_cast<uint64_t>(trial)});
        DetectionSet s;
        int n = 2 + static_cast<int>(r.uniform_index(10));
        for (int i = 0; i < n; ++i) {
            float x = static_cast<float>(r.uniform(0, 80));
            float y = static_cast<float>(r.uniform(0, 80));
            float w = static_cast<float>(r.uniform(4, 20));
            float h = static_cast<float>(r.uniform(4, 20));
            s.detections.push_back({Box{x, y, x + w, y + h},
                                    static_cast<float>(r.uniform(0.05, 1.0)),
                                    static_cast<int>(r.uniform_index(2))});
        }
        auto once = decision_fusion::nms(s, 0.5);
        auto twice = decision_fusion::nms(once, 0.5);
        if (once.detections.size() != twice.detections.size()) return false;
        for (size_t i = 0; i < once.detections.size(); ++i)
            if (once.detections[i].score != twice.detections[i].score) return false;
    }
    return true;
}

bool property_ap_monotone() {
    using metrics::GroundTruth;
    using metrics::ImageRecord;
    for (int trial = 0; trial < 1000; ++trial) {
        Rng r(Seed{80000u + static_cast<uint64_t>(trial)});
        ImageRecord rec;
        for (int i = 0; i < 4; ++i) {
            float x = static_cast<float>(r.uniform(0, 50));
            float y = static_cast<float>(r.uniform(0, 50));
            rec.gts.push_back(GroundTruth{Box{x, y, x + 15, y + 15}, 0});
            float jx = static_cast<float>(r.uniform(-6, 6));
            float jy = static_cast<float>(r.uniform(-6, 6));
            rec.preds.detections.push_back({Box{x + jx, y + jy, x + jx + 15, y + jy + 15},
                                            static_cast<float>(r.uniform(0.2, 1.0)), 0});
        }
        std::vector<ImageRecord> recs{rec};
        double prev = 2.0;
        for (double t : {0.3, 0.5, 0.7, 0.9}) {
            double ap = metrics::average_precision(recs, 0, t);
            if (ap > prev + 1e-12) return false;
            prev = ap;
        }
    }
    return true;
}

}  // namespace

int main() {
    char buf[160];

    // 1. oracle equivalence
    {
        auto t0 = std::chrono::steady_clock::now();
        bool c = oracle_conv_refine(), n = oracle_nin_transform(), i = oracle_icfe(),
             d = oracle_depth_attention(), a = oracle_average_precision();
        double secs = now_minus(t0);
        bool ok = c && n && i && d && a && secs < 60.0;
        std::snprintf(buf, sizeof buf, "conv %s, nin %s, icfe %s, depth %s, ap %s, %.1f s",
                      c ? "ok" : "FAIL", n ? "ok" : "FAIL", i ? "ok" : "FAIL",
                      d ? "ok" : "FAIL", a ? "ok" : "FAIL", secs);
        report(1, "brute-force oracle equivalence", ok, buf);
    }

    // 2. affine recovery
    {
        auto t0 = std::chrono::steady_clock::now();
        int ok_trials = 0;
        for (int t = 0; t < 100; ++t) {
            dataset::SynthConfig cfg;
            cfg.min_objects = 5;
            cfg.max_objects = 8;
            cfg.seed = Seed{424242}.derive(t).base;
            cfg.misalign.kind = dataset::MisalignKind::Affine;
            auto s = dataset::synth_scene(cfg);
            registration::RegisterConfig rc;
            try {
                auto res = registration::register_pair(s.rgb, s.tir, rc);
                if (res.transform &&
                    corner_err(*res.transform, *s.meta.injected, cfg.width, cfg.height) < 0.5)
                    ++ok_trials;
            } catch (const Error&) {
            }
        }
        double secs = now_minus(t0);
        std::snprintf(buf, sizeof buf, "%d/100 trials < 0.5 px, %.1f s", ok_trials, secs);
        report(2, "affine registration recovery", ok_trials >= 95 && secs < 30.0, buf);
    }

    // 3. flow recovery
    {
        auto t0 = std::chrono::steady_clock::now();
        int scenes_ok = 0;
        const int n_scenes = 20;
        for (int t = 0; t < n_scenes; ++t) {
            dataset::SynthConfig cfg;
            cfg.seed = Seed{77}.derive(t).base;
            auto s = dataset::synth_scene(cfg);
            Image src = s.tir;
            Image dst(src.height, src.width, 1);
            for (int y = 0; y < src.height; ++y)
                for (int x = 0; x < src.width; ++x)
                    dst.at(y, x) = src.at(y, std::clamp(x - 2, 0, src.width - 1));
            FeatureMap ms(src.height, src.width, 1), md(src.height, src.width, 1);
            ms.data.assign(src.data.begin(), src.data.end());
            md.data.assign(dst.data.begin(), dst.data.end());
            registration::FlowConfig fc;
            auto f = registration::estimate_flow(ms, md, fc);
            int good = 0, tot = 0;
            for (int y = 8; y < src.height - 8; ++y)
                for (int x = 8; x < src.width - 8; ++x) {
                    ++tot;
                    if (std::hypot(std::abs(f.dx(y, x)) - 2.0, (double)f.dy(y, x)) <= 0.5)
                        ++good;
                }
            if (good >= tot * 9 / 10) ++scenes_ok;
        }
        double secs = now_minus(t0);
        std::snprintf(buf, sizeof buf, "%d/%d scenes at >=90%% pixels, %.1f s", scenes_ok,
                      n_scenes, secs);
        report(3, "integer-shift flow recovery", scenes_ok == n_scenes && secs < 10.0, buf);
    }

    // 4. registration benefit (paired trials)
    {
        auto t0 = std::chrono::steady_clock::now();
        harness::ExperimentConfig base;
        base.base_seed = 20260826;
        base.dataset.count = 4;
        base.dataset.synth.misalign.kind = dataset::MisalignKind::Affine;
        base.fusion.mode = harness::FusionMode::Decision;
        harness::ExperimentConfig with_reg = base;
        with_reg.registration.method = "loftr_style";
        with_reg.registration.phase = "test_side";
        int ok_trials = 0;
        for (int t = 0; t < 100; ++t)
            if (trial_map(with_reg, t) >= trial_map(base, t)) ++ok_trials;
        double secs = now_minus(t0);
        std::snprintf(buf, sizeof buf, "registration >= none in %d/100, %.0f s", ok_trials,
                      secs);
        report(4, "test-side registration benefit", ok_trials >= 90 && secs < 300.0, buf);
    }

    // 5. fusion and complementary-enhancement benefit in low light
    {
        auto t0 = std::chrono::steady_clock::now();
        harness::ExperimentConfig base;
        base.base_seed = 555;
        base.dataset.count = 4;
        base.dataset.synth.illumination = 0.15;
        harness::ExperimentConfig fus = base;
        fus.fusion.mode = harness::FusionMode::Decision;
        harness::ExperimentConfig rgb = base;
        rgb.fusion.mode = harness::FusionMode::RgbOnly;
        int a_ok = 0;
        for (int t = 0; t < 100; ++t)
            if (trial_map(fus, t) >= trial_map(rgb, t)) ++a_ok;

        harness::ExperimentConfig aug = rgb;
        aug.augmentation.mode = "complementary";
        aug.augmentation.rgb_ops = {"light_enhance"};
        aug.augmentation.gain_tir = 0.3;
        int b_ok = 0;
        for (int t = 0; t < 100; ++t)
            if (trial_map(aug, t) >= trial_map(rgb, t)) ++b_ok;
        double secs = now_minus(t0);
        std::snprintf(buf, sizeof buf, "(a) fusion %d/100, (b) enhancement %d/100, %.0f s",
                      a_ok, b_ok, secs);
        report(5, "low-light fusion and enhancement benefit",
               a_ok >= 90 && b_ok >= 80 && secs < 600.0, buf);
    }

    // 6. metric fixtures
    {
        using metrics::GroundTruth;
        using metrics::ImageRecord;
        bool ok = true;
        // AP = 0.5: FP outranks the only TP
        {
            ImageRecord rec;
            rec.preds.detections = {{Box{50, 50, 70, 70}, 0.9f, 0},
                                    {Box{10, 10, 30, 30}, 0.8f, 0}};
            rec.gts = {GroundTruth{Box{10, 10, 30, 30}, 0}};
            std::vector<ImageRecord> recs{rec};
            ok = ok && std::abs(metrics::average_precision(recs, 0, 0.5) - 0.5) < 1e-9;
        }
        // IoU = 1/3 (float evaluation on both sides)
        ok = ok && std::abs(double(metrics::iou(Box{0, 0, 2, 2}, Box{1, 0, 3, 2})) -
                            double(1.0f / 3.0f)) < 1e-9;
        // constant miss rate 0.5 across the FPPI range
        {
            std::vector<ImageRecord> recs;
            for (int i = 0; i < 10; ++i) {
                ImageRecord rec;
                rec.preds.detections = {{Box{10, 10, 30, 30}, 0.9f, 0},
                                        {Box{200, 200, 220, 220},
                                         0.8f - 0.05f * static_cast<float>(i), 0}};
                rec.gts = {GroundTruth{Box{10, 10, 30, 30}, 0},
                           GroundTruth{Box{60, 60, 80, 80}, 0}};
                recs.push_back(std::move(rec));
            }
            ok = ok && std::abs(metrics::log_average_miss_rate(recs) - 0.5) < 1e-9;
        }
        report(6, "hand-computed metric fixtures", ok, "AP=0.5, IoU=1/3, LAMR=0.5");
    }

    // 7. determinism
    {
        harness::ExperimentConfig cfg;
        cfg.repeats = 4;
        cfg.dataset.count = 2;
        cfg.dataset.synth.height = 64;
        cfg.dataset.synth.width = 64;
        cfg.fusion.mode = harness::FusionMode::Decision;
        cfg.base_seed = 99;
        std::string a = harness::run_experiment(cfg).to_json(false).dump();
        std::string b = harness::run_experiment(cfg).to_json(false).dump();
        cfg.threads = 1;
        std::string one = harness::run_experiment(cfg).to_json(false).dump();
        cfg.threads = 8;
        std::string eight = harness::run_experiment(cfg).to_json(false).dump();
        bool ok = a == b && one == eight && a == one;
        report(7, "byte-identical reports across runs and thread counts", ok,
               ok ? "4 reports identical" : "report mismatch");
    }

    // 8. invariant property suites
    {
        auto t0 = std::chrono::steady_clock::now();
        bool sm = property_softmax_rows();
        bool bw = property_bilinear_weights();
        bool ir = property_images_in_range();
        bool ni = property_nms_idempotent();
        bool am = property_ap_monotone();
        bool ok = sm && bw && ir && ni && am;
        std::snprintf(buf, sizeof buf,
                      "softmax %s, bilinear %s, range %s, nms %s, ap %s, %.0f s",
                      sm ? "ok" : "FAIL", bw ? "ok" : "FAIL", ir ? "ok" : "FAIL",
                      ni ? "ok" : "FAIL", am ? "ok" : "FAIL", now_minus(t0));
        report(8, "invariant property suites (1000+ cases each)", ok, buf);
    }

    return failures == 0 ? 0 : 1;
}
