#include "msbench/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "msbench/augmentation.hpp"

namespace msbench {
namespace registration {

namespace {

constexpr double kPi = 3.14159265358979323846;

Image to_gray(const Image& im) {
    if (im.channels == 1) return im;
    Image g(im.height, im.width, 1);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            float s = 0;
            for (int c = 0; c < im.channels; ++c) s += im.at(y, x, c);
            g.at(y, x) = s / im.channels;
        }
    return g;
}

float sample_clamped(const Image& im, int y, int x, int c = 0) {
    y = std::clamp(y, 0, im.height - 1);
    x = std::clamp(x, 0, im.width - 1);
    return im.at(y, x, c);
}

float bilinear(const Image& im, double x, double y, int c = 0) {
    if (x < -1.0 || y < -1.0 || x > im.width || y > im.height) return 0.0f;
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    double fx = x - x0, fy = y - y0;
    double acc = 0;
    for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
            int sx = x0 + dx, sy = y0 + dy;
            if (sx < 0 || sy < 0 || sx >= im.width || sy >= im.height) continue;
            double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
            if (w != 0.0) acc += w * im.at(sy, sx, c);
        }
    return static_cast<float>(acc);
}

}  // namespace

DescriptorGrid extract_descriptors(const Image& image, int cell_size, int spatial,
                                   int orient_bins) {
    if (cell_size < 4) throw Error("BadConfig", "cell_size must be >= 4");
    Image gray = to_gray(image);
    int gh = gray.height / cell_size, gw = gray.width / cell_size;
    if (gh < 2 || gw < 2) throw Error("ImageTooSmall", "image too small for descriptor grid");

    DescriptorGrid grid;
    grid.grid_h = gh;
    grid.grid_w = gw;
    grid.dim = spatial * spatial * orient_bins;
    grid.descriptors.resize(static_cast<size_t>(gh) * gw * grid.dim, 0.0f);
    grid.cell_centers_x.resize(static_cast<size_t>(gh) * gw);
    grid.cell_centers_y.resize(static_cast<size_t>(gh) * gw);
    grid.textured.resize(static_cast<size_t>(gh) * gw, true);

    double sub = 2.0 * cell_size / spatial;  // window is 2x the cell
    for (int cy = 0; cy < gh; ++cy)
        for (int cx = 0; cx < gw; ++cx) {
            int idx = cy * gw + cx;
            grid.cell_centers_x[idx] = cx * cell_size + (cell_size - 1) / 2.0;
            grid.cell_centers_y[idx] = cy * cell_size + (cell_size - 1) / 2.0;
            float* d = grid.descriptors.data() + static_cast<size_t>(idx) * grid.dim;
            // window spans 2x the cell, centered, so neighbors overlap and a
            // few pixels of misalignment degrade similarity gracefully
            int win = 2 * cell_size;
            int oy = cy * cell_size - cell_size / 2, ox = cx * cell_size - cell_size / 2;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    int py = oy + y, px = ox + x;
                    double gx = sample_clamped(gray, py, px + 1) - sample_clamped(gray, py, px - 1);
                    double gy = sample_clamped(gray, py + 1, px) - sample_clamped(gray, py - 1, px);
                    double mag = std::sqrt(gx * gx + gy * gy);
                    if (mag <= 0) continue;
                    double ang = std::atan2(gy, gx);  // [-pi, pi]
                    int bin = static_cast<int>((ang + kPi) / (2.0 * kPi) * orient_bins);
                    bin = std::clamp(bin, 0, orient_bins - 1);
                    int sx = std::min(static_cast<int>(x / sub), spatial - 1);
                    int sy = std::min(static_cast<int>(y / sub), spatial - 1);
                    d[(sy * spatial + sx) * orient_bins + bin] += static_cast<float>(mag);
                }
        }

    // cells whose gradient energy sits near the noise floor (relative to the
    // image-wide mean) would match at random, so they are flagged untextured
    std::vector<double> norms(grid.cells());
    double mean_norm = 0;
    for (int i = 0; i < grid.cells(); ++i) {
        const float* d = grid.desc(i);
        double n = 0;
        for (int k = 0; k < grid.dim; ++k) n += d[k] * static_cast<double>(d[k]);
        norms[i] = std::sqrt(n);
        mean_norm += norms[i];
    }
    mean_norm /= grid.cells();
    double floor_norm = std::max(1e-8, 0.5 * mean_norm);
    for (int i = 0; i < grid.cells(); ++i) {
        float* d = grid.descriptors.data() + static_cast<size_t>(i) * grid.dim;
        if (norms[i] < floor_norm) {
            float u = static_cast<float>(1.0 / std::sqrt(static_cast<double>(grid.dim)));
            for (int k = 0; k < grid.dim; ++k) d[k] = u;
            grid.textured[i] = false;
        } else {
            for (int k = 0; k < grid.dim; ++k) d[k] = static_cast<float>(d[k] / norms[i]);
        }
    }
    return grid;
}

PointMatchSet match_features(const DescriptorGrid& a, const DescriptorGrid& b,
                             const MatchConfig& cfg) {
    if (a.dim != b.dim) throw Error("DimMismatch", "descriptor dims differ");
    if (cfg.tau <= 0) throw Error("BadConfig", "temperature must be > 0");

    int na = a.cells(), nb = b.cells();
    std::vector<int> best_b(na, -1);
    std::vector<double> best_prob(na, 0.0);
    std::vector<double> best_sim_a(na, -2.0);
    std::vector<int> best_a_of_b(nb, -1);
    std::vector<double> best_sim_b(nb, -2.0);

    std::vector<double> sims(nb);
    for (int i = 0; i < na; ++i) {
        if (!a.textured[i]) continue;
        double mx = -2.0;
        int arg = -1;
        for (int j = 0; j < nb; ++j) {
            if (!b.textured[j]) {
                sims[j] = -2.0;
                continue;
            }
            double s = 0;
            const float* da = a.desc(i);
            const float* db = b.desc(j);
            for (int k = 0; k < a.dim; ++k) s += static_cast<double>(da[k]) * db[k];
            sims[j] = s;
            if (s > mx) {
                mx = s;
                arg = j;
            }
            if (s > best_sim_b[j]) {
                best_sim_b[j] = s;
                best_a_of_b[j] = i;
            }
        }
        if (arg < 0) continue;
        // softmax over textured candidates at temperature tau
        double denom = 0;
        for (int j = 0; j < nb; ++j)
            if (sims[j] > -2.0) denom += std::exp((sims[j] - mx) / cfg.tau);
        best_b[i] = arg;
        best_prob[i] = 1.0 / denom;  // exp(0)/denom for the argmax entry
        best_sim_a[i] = mx;
    }

    PointMatchSet out;
    for (int i = 0; i < na; ++i) {
        int j = best_b[i];
        if (j < 0 || best_prob[i] < cfg.score_floor) continue;
        if (cfg.mutual_nn && best_a_of_b[j] != i) continue;
        out.pairs.push_back({a.cell_centers_x[i], a.cell_centers_y[i], b.cell_centers_x[j],
                             b.cell_centers_y[j], best_prob[i]});
    }
    return out;
}

namespace {

bool fit_affine_ls(const std::vector<PointMatch>& pts, PlanarTransform& out) {
    // rows [x y 1] -> (qx, qy); two independent 3-param solves
    Eigen::MatrixXd a(pts.size(), 3);
    Eigen::VectorXd bx(pts.size()), by(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        a(i, 0) = pts[i].px;
        a(i, 1) = pts[i].py;
        a(i, 2) = 1.0;
        bx(i) = pts[i].qx;
        by(i) = pts[i].qy;
    }
    Eigen::Matrix3d ata = a.transpose() * a;
    if (std::abs(ata.determinant()) < 1e-9) return false;  // collinear sample
    Eigen::Vector3d rx = ata.ldlt().solve(a.transpose() * bx);
    Eigen::Vector3d ry = ata.ldlt().solve(a.transpose() * by);
    out.kind = TransformKind::Affine;
    out.m = {rx(0), rx(1), rx(2), ry(0), ry(1), ry(2), 0, 0, 1};
    return out.invertible();
}

bool fit_homography_dlt(const std::vector<PointMatch>& pts, PlanarTransform& out) {
    if (pts.size() < 4) return false;
    // Hartley normalization of both point sets
    auto normalize = [](const std::vector<double>& xs, const std::vector<double>& ys) {
        double mx = 0, my = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= xs.size();
        my /= ys.size();
        double dist = 0;
        for (size_t i = 0; i < xs.size(); ++i)
            dist += std::hypot(xs[i] - mx, ys[i] - my);
        dist /= xs.size();
        double s = dist > 1e-12 ? std::sqrt(2.0) / dist : 1.0;
        Eigen::Matrix3d t;
        t << s, 0, -s * mx, 0, s, -s * my, 0, 0, 1;
        return t;
    };
    std::vector<double> px, py, qx, qy;
    for (const auto& m : pts) {
        px.push_back(m.px);
        py.push_back(m.py);
        qx.push_back(m.qx);
        qy.push_back(m.qy);
    }
    Eigen::Matrix3d tp = normalize(px, py), tq = normalize(qx, qy);

    Eigen::MatrixXd a(2 * pts.size(), 9);
    for (size_t i = 0; i < pts.size(); ++i) {
        double x = tp(0, 0) * px[i] + tp(0, 2);
        double y = tp(1, 1) * py[i] + tp(1, 2);
        double u = tq(0, 0) * qx[i] + tq(0, 2);
        double v = tq(1, 1) * qy[i] + tq(1, 2);
        a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    Eigen::Matrix3d full = tq.inverse() * hn * tp;
    if (std::abs(full(2, 2)) < 1e-15) return false;
    full /= full(2, 2);
    out.kind = TransformKind::Homography;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.m[r * 3 + c] = full(r, c);
    return out.invertible();
}

double reprojection_sq(const PlanarTransform& t, const PointMatch& m) {
    double x, y;
    t.apply(m.px, m.py, x, y);
    double dx = x - m.qx, dy = y - m.qy;
    return dx * dx + dy * dy;
}

}  // namespace

FitResult estimate_transform(const PointMatchSet& matches, const RobustFitConfig& cfg) {
    size_t minimal = cfg.model == TransformKind::Affine ? 3 : 4;
    const auto& pts = matches.pairs;
    if (pts.size() < minimal)
        throw Error("InsufficientMatches",
                    "need >= " + std::to_string(minimal) + " matches, got " +
                        std::to_string(pts.size()));
    if (cfg.ransac_iters < 1) throw Error("BadConfig", "ransac_iters must be >= 1");

    auto fit = [&cfg](const std::vector<PointMatch>& sample, PlanarTransform& t) {
        return cfg.model == TransformKind::Affine ? fit_affine_ls(sample, t)
                                                  : fit_homography_dlt(sample, t);
    };
    double thresh_sq = cfg.inlier_px * cfg.inlier_px;
    bool unbounded = !std::isfinite(cfg.inlier_px);

    Rng rng(cfg.seed);
    PlanarTransform best;
    size_t best_inliers = 0;
    double best_residual = std::numeric_limits<double>::infinity();
    bool have_model = false;

    for (int it = 0; it < cfg.ransac_iters; ++it) {
        std::vector<PointMatch> sample;
        if (unbounded || pts.size() == minimal) {
            sample = pts;  // plain least squares over everything
        } else {
            std::vector<size_t> idx;
            while (idx.size() < minimal) {
                size_t k = rng.uniform_index(pts.size());
                if (std::find(idx.begin(), idx.end(), k) == idx.end()) idx.push_back(k);
            }
            for (size_t k : idx) sample.push_back(pts[k]);
        }
        PlanarTransform t;
        if (!fit(sample, t)) continue;

        size_t inliers = 0;
        double residual = 0;
        for (const auto& m : pts) {
            double e = reprojection_sq(t, m);
            if (unbounded || e <= thresh_sq) {
                ++inliers;
                residual += e;
            }
        }
        residual = inliers > 0 ? residual / inliers : std::numeric_limits<double>::infinity();
        if (inliers > best_inliers ||
            (inliers == best_inliers && residual < best_residual)) {
            best = t;
            best_inliers = inliers;
            best_residual = residual;
            have_model = true;
        }
    }
    if (!have_model)
        throw Error("DegenerateConfiguration", "no non-degenerate hypothesis found");

    // least-squares refit on the consensus set
    std::vector<PointMatch> consensus;
    for (const auto& m : pts)
        if (unbounded || reprojection_sq(best, m) <= thresh_sq) consensus.push_back(m);
    if (consensus.size() >= minimal) {
        PlanarTransform refined;
        if (fit(consensus, refined)) best = refined;
    }

    FitResult res;
    res.transform = best;
    res.inliers.resize(pts.size());
    size_t n_in = 0;
    double resid = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
        double e = reprojection_sq(best, pts[i]);
        res.inliers[i] = unbounded || e <= thresh_sq;
        if (res.inliers[i]) {
            ++n_in;
            resid += e;
        }
    }
    res.residual = n_in > 0 ? resid / n_in : 0.0;
    size_t min_needed = static_cast<size_t>(std::max(cfg.min_inliers, static_cast<int>(minimal)));
    if (n_in < min_needed)
        throw Error("InsufficientMatches", "consensus too small: " + std::to_string(n_in));
    return res;
}

Image apply_transform(const Image& image, const PlanarTransform& t) {
    if (!t.invertible()) throw Error("SingularTransform", "cannot apply singular transform");
    PlanarTransform inv = t.inverse();
    Image out(image.height, image.width, image.channels);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            double sx, sy;
            inv.apply(x, y, sx, sy);
            for (int c = 0; c < image.channels; ++c)
                out.at(y, x, c) = bilinear(image, sx, sy, c);
        }
    return out;
}

namespace {

int nearest_cell(const DescriptorGrid& g, double x, double y) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g.cells(); ++i) {
        double dx = g.cell_centers_x[i] - x, dy = g.cell_centers_y[i] - y;
        double d = dx * dx + dy * dy;
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

}  // namespace

double loftr_joint_loss(const DescriptorGrid& a, const DescriptorGrid& b,
                        const PointMatchSet& matches, const PlanarTransform& t,
                        const AlignLossWeights& w) {
    double feature_term = 0, align_term = 0;
    for (const auto& m : matches.pairs) {
        const float* da = a.desc(nearest_cell(a, m.px, m.py));
        const float* db = b.desc(nearest_cell(b, m.qx, m.qy));
        for (int k = 0; k < a.dim; ++k) {
            double d = static_cast<double>(da[k]) - db[k];
            feature_term += d * d;
        }
        align_term += reprojection_sq(t, m);
    }
    if (!matches.pairs.empty()) align_term /= static_cast<double>(matches.pairs.size());
    return w.lambda1 * feature_term + w.lambda2 * align_term;
}

Image complete_depth(const Image& sparse, const std::vector<bool>& valid) {
    if (sparse.channels != 1) throw Error("ChannelMismatch", "depth map must be 1-channel");
    if (valid.size() != sparse.size())
        throw Error("DimMismatch", "validity mask size does not match depth map");

    // multi-source BFS nearest-valid fill
    Image filled = sparse;
    std::deque<int> queue;
    std::vector<int> source(sparse.size(), -1);
    for (size_t i = 0; i < valid.size(); ++i)
        if (valid[i]) {
            source[i] = static_cast<int>(i);
            queue.push_back(static_cast<int>(i));
        }
    if (queue.empty()) throw Error("EmptyDepth", "no valid depth pixels");
    const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
    while (!queue.empty()) {
        int i = queue.front();
        queue.pop_front();
        int y = i / sparse.width, x = i % sparse.width;
        for (int k = 0; k < 4; ++k) {
            int nx = x + dx[k], ny = y + dy[k];
            if (nx < 0 || ny < 0 || nx >= sparse.width || ny >= sparse.height) continue;
            int ni = ny * sparse.width + nx;
            if (source[ni] >= 0) continue;
            source[ni] = source[i];
            filled.data[ni] = filled.data[source[i]];
            queue.push_back(ni);
        }
    }

    // 5x5 Gaussian, sigma 1
    const double g[5] = {0.054488685, 0.24420135, 0.40261996, 0.24420135, 0.054488685};
    Image tmp(sparse.height, sparse.width, 1), out(sparse.height, sparse.width, 1);
    for (int y = 0; y < sparse.height; ++y)
        for (int x = 0; x < sparse.width; ++x) {
            double acc = 0;
            for (int k = -2; k <= 2; ++k) acc += g[k + 2] * sample_clamped(filled, y, x + k);
            tmp.at(y, x) = static_cast<float>(acc);
        }
    for (int y = 0; y < sparse.height; ++y)
        for (int x = 0; x < sparse.width; ++x) {
            double acc = 0;
            for (int k = -2; k <= 2; ++k) acc += g[k + 2] * sample_clamped(tmp, y + k, x);
            out.at(y, x) = static_cast<float>(acc);
        }
    return out;
}

DepthAttentionResult depth_guided_attention(const FeatureMap& x_rgb, const FeatureMap& x_tir,
                                            const Image& depth_dense,
                                            const Eigen::MatrixXd& w_q,
                                            const Eigen::MatrixXd& w_k,
                                            const Eigen::MatrixXd& w_v) {
    if (x_rgb.channels != x_tir.channels)
        throw Error("DimMismatch", "feature channels differ");
    int c = x_rgb.channels;
    auto tokens = [](const FeatureMap& f) {
        Eigen::MatrixXd t(static_cast<Eigen::Index>(f.height) * f.width, f.channels);
        for (int y = 0; y < f.height; ++y)
            for (int x = 0; x < f.width; ++x)
                for (int ch = 0; ch < f.channels; ++ch)
                    t(static_cast<Eigen::Index>(y) * f.width + x, ch) = f.at(y, x, ch);
        return t;
    };
    Eigen::MatrixXd wq = w_q.size() ? w_q : Eigen::MatrixXd::Identity(c, c);
    Eigen::MatrixXd wk = w_k.size() ? w_k : Eigen::MatrixXd::Identity(c, c);
    Eigen::MatrixXd wv = w_v.size() ? w_v : Eigen::MatrixXd::Identity(c, c);
    if (wq.rows() != c || wk.rows() != c || wv.rows() != c)
        throw Error("DimMismatch", "projection rows must equal channels");

    Eigen::MatrixXd q = tokens(x_rgb) * wq;
    Eigen::MatrixXd k = tokens(x_tir) * wk;
    Eigen::MatrixXd v = tokens(x_tir) * wv;

    // depth resampled to the key (TIR token) grid, broadcast per key column
    Eigen::VectorXd depth_cols(k.rows());
    for (int y = 0; y < x_tir.height; ++y)
        for (int x = 0; x < x_tir.width; ++x) {
            double sx = (x + 0.5) * depth_dense.width / x_tir.width - 0.5;
            double sy = (y + 0.5) * depth_dense.height / x_tir.height - 0.5;
            sx = std::clamp(sx, 0.0, depth_dense.width - 1.0);
            sy = std::clamp(sy, 0.0, depth_dense.height - 1.0);
            depth_cols(static_cast<Eigen::Index>(y) * x_tir.width + x) =
                bilinear(depth_dense, sx, sy);
        }

    Eigen::MatrixXd logits = q * k.transpose();
    for (Eigen::Index j = 0; j < logits.cols(); ++j) logits.col(j) *= depth_cols(j);
    logits /= std::sqrt(static_cast<double>(wq.cols()));

    DepthAttentionResult res;
    res.attention.resize(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        double mx = logits.row(r).maxCoeff();
        Eigen::ArrayXd e = (logits.row(r).array() - mx).exp();
        res.attention.row(r) = (e / e.sum()).matrix();
    }
    Eigen::MatrixXd enhanced = res.attention * v;
    res.enhanced_tir = FeatureMap(x_tir.height, x_tir.width, static_cast<int>(enhanced.cols()));
    for (int y = 0; y < x_tir.height; ++y)
        for (int x = 0; x < x_tir.width; ++x)
            for (int ch = 0; ch < res.enhanced_tir.channels; ++ch)
                res.enhanced_tir.at(y, x, ch) = static_cast<float>(
                    enhanced(static_cast<Eigen::Index>(y) * x_tir.width + x, ch));
    return res;
}

namespace {

template <typename MapT>
MapT bilinear_warp_impl(const MapT& x, const FlowField& flow) {
    if (flow.height != x.height || flow.width != x.width)
        throw Error("DimMismatch", "flow field dims do not match input");
    MapT out(x.height, x.width, x.channels);
    for (int y = 0; y < x.height; ++y)
        for (int xx = 0; xx < x.width; ++xx) {
            double sx = xx + flow.dx(y, xx);
            double sy = y + flow.dy(y, xx);
            int x0 = static_cast<int>(std::floor(sx));
            int y0 = static_cast<int>(std::floor(sy));
            for (int c = 0; c < x.channels; ++c) {
                double acc = 0;
                for (int dy = 0; dy <= 1; ++dy)
                    for (int dx = 0; dx <= 1; ++dx) {
                        int px = x0 + dx, py = y0 + dy;
                        if (px < 0 || py < 0 || px >= x.width || py >= x.height) continue;
                        double w = std::max(0.0, 1.0 - std::abs(px - sx)) *
                                   std::max(0.0, 1.0 - std::abs(py - sy));
                        if (w != 0.0) acc += w * x.at(py, px, c);
                    }
                out.at(y, xx, c) = static_cast<float>(acc);
            }
        }
    return out;
}

}  // namespace

FeatureMap bilinear_warp(const FeatureMap& x, const FlowField& flow) {
    return bilinear_warp_impl(x, flow);
}
Image bilinear_warp(const Image& x, const FlowField& flow) {
    return bilinear_warp_impl(x, flow);
}

namespace {

FeatureMap downsample2(const FeatureMap& f) {
    FeatureMap out((f.height + 1) / 2, (f.width + 1) / 2, f.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < f.channels; ++c) {
                double acc = 0;
                int n = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        int sy = 2 * y + dy, sx = 2 * x + dx;
                        if (sy < f.height && sx < f.width) {
                            acc += f.at(sy, sx, c);
                            ++n;
                        }
                    }
                out.at(y, x, c) = static_cast<float>(acc / n);
            }
    return out;
}

double patch_ssd(const FeatureMap& a, const FeatureMap& b, int ay, int ax, int by, int bx,
                 int r) {
    double ssd = 0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            int y1 = std::clamp(ay + dy, 0, a.height - 1);
            int x1 = std::clamp(ax + dx, 0, a.width - 1);
            int y2 = std::clamp(by + dy, 0, b.height - 1);
            int x2 = std::clamp(bx + dx, 0, b.width - 1);
            for (int c = 0; c < a.channels; ++c) {
                double d = static_cast<double>(a.at(y1, x1, c)) - b.at(y2, x2, c);
                ssd += d * d;
            }
        }
    return ssd;
}

/// Candidate offsets ordered by magnitude so ties resolve to the smallest
/// displacement.
std::vector<std::pair<int, int>> offsets_by_magnitude(int radius) {
    std::vector<std::pair<int, int>> offs;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) offs.emplace_back(dx, dy);
    std::stable_sort(offs.begin(), offs.end(), [](const auto& a, const auto& b) {
        int ma = std::abs(a.first) + std::abs(a.second);
        int mb = std::abs(b.first) + std::abs(b.second);
        if (ma != mb) return ma < mb;
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    return offs;
}

FlowField median3(const FlowField& f) {
    FlowField out(f.height, f.width);
    std::vector<float> vx, vy;
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            vx.clear();
            vy.clear();
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    int sy = std::clamp(y + dy, 0, f.height - 1);
                    int sx = std::clamp(x + dx, 0, f.width - 1);
                    vx.push_back(f.dx(sy, sx));
                    vy.push_back(f.dy(sy, sx));
                }
            std::nth_element(vx.begin(), vx.begin() + 4, vx.end());
            std::nth_element(vy.begin(), vy.begin() + 4, vy.end());
            out.dx(y, x) = vx[4];
            out.dy(y, x) = vy[4];
        }
    return out;
}

}  // namespace

FlowField estimate_flow(const FeatureMap& src, const FeatureMap& dst, const FlowConfig& cfg) {
    if (src.height != dst.height || src.width != dst.width || src.channels != dst.channels)
        throw Error("DimMismatch", "flow inputs must share dims");

    std::vector<FeatureMap> src_pyr{src}, dst_pyr{dst};
    for (int l = 1; l < cfg.levels; ++l) {
        if (src_pyr.back().height < 8 || src_pyr.back().width < 8) break;
        src_pyr.push_back(downsample2(src_pyr.back()));
        dst_pyr.push_back(downsample2(dst_pyr.back()));
    }

    auto offs = offsets_by_magnitude(cfg.max_displacement);
    FlowField flow;
    for (int l = static_cast<int>(src_pyr.size()) - 1; l >= 0; --l) {
        const FeatureMap& s = src_pyr[l];
        const FeatureMap& d = dst_pyr[l];
        FlowField init(s.height, s.width);
        if (flow.height > 0) {
            // propagate: double the coarse flow onto the finer grid
            for (int y = 0; y < s.height; ++y)
                for (int x = 0; x < s.width; ++x) {
                    int cy = std::min(y / 2, flow.height - 1);
                    int cx = std::min(x / 2, flow.width - 1);
                    init.dx(y, x) = 2.0f * flow.dx(cy, cx);
                    init.dy(y, x) = 2.0f * flow.dy(cy, cx);
                }
        }
        FlowField level_flow(s.height, s.width);
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
                int base_dx = static_cast<int>(std::lround(init.dx(y, x)));
                int base_dy = static_cast<int>(std::lround(init.dy(y, x)));
                double best = std::numeric_limits<double>::infinity();
                int bx = base_dx, by = base_dy;
                for (const auto& [odx, ody] : offs) {
                    int cand_x = base_dx + odx, cand_y = base_dy + ody;
                    double ssd =
                        patch_ssd(s, d, y, x, y + cand_y, x + cand_x, cfg.patch_radius);
                    if (ssd < best) {
                        best = ssd;
                        bx = cand_x;
                        by = cand_y;
                    }
                }
                level_flow.dx(y, x) = static_cast<float>(bx);
                level_flow.dy(y, x) = static_cast<float>(by);
            }
        flow = median3(level_flow);
    }
    return flow;
}

double superfusion_joint_loss(const FeatureMap& x_rgb, const FeatureMap& x_tir_enh,
                              const PointMatchSet& matches, const FlowField& flow,
                              const FlowField& flow_star, const AlignLossWeights& w) {
    if (flow.height != flow_star.height || flow.width != flow_star.width)
        throw Error("DimMismatch", "flow fields must share dims");
    double feature_term = 0;
    for (const auto& m : matches.pairs) {
        int py = std::clamp(static_cast<int>(std::lround(m.py)), 0, x_rgb.height - 1);
        int px = std::clamp(static_cast<int>(std::lround(m.px)), 0, x_rgb.width - 1);
        int qy = std::clamp(static_cast<int>(std::lround(m.qy)), 0, x_tir_enh.height - 1);
        int qx = std::clamp(static_cast<int>(std::lround(m.qx)), 0, x_tir_enh.width - 1);
        for (int c = 0; c < x_rgb.channels; ++c) {
            double d = static_cast<double>(x_rgb.at(py, px, c)) - x_tir_enh.at(qy, qx, c);
            feature_term += d * d;
        }
    }
    double align_term = 0;
    for (int y = 0; y < flow.height; ++y)
        for (int x = 0; x < flow.width; ++x) {
            double ddx = static_cast<double>(flow.dx(y, x)) - flow_star.dx(y, x);
            double ddy = static_cast<double>(flow.dy(y, x)) - flow_star.dy(y, x);
            align_term += ddx * ddx + ddy * ddy;
        }
    return w.lambda1 * feature_term + w.lambda2 * align_term;
}

Method method_from_name(const std::string& s) {
    if (s == "loftr_style") return Method::LoftrStyle;
    if (s == "superfusion_style") return Method::SuperfusionStyle;
    throw Error("BadConfig", "unknown registration method '" + s + "'");
}

namespace {

/// Marks pixels that carry real content: exact zeros (warp padding) and a
/// 2 px band around them are excluded so padding edges cannot attract fits.
std::vector<uint8_t> content_mask(const Image& gray) {
    std::vector<uint8_t> raw(gray.size()), out(gray.size(), 0);
    for (size_t i = 0; i < gray.size(); ++i) raw[i] = gray.data[i] > 1e-6f ? 1 : 0;
    for (int y = 0; y < gray.height; ++y)
        for (int x = 0; x < gray.width; ++x) {
            uint8_t ok = 1;
            for (int dy = -2; dy <= 2 && ok; ++dy)
                for (int dx = -2; dx <= 2 && ok; ++dx) {
                    int sy = std::clamp(y + dy, 0, gray.height - 1);
                    int sx = std::clamp(x + dx, 0, gray.width - 1);
                    ok = raw[sy * gray.width + sx];
                }
            out[y * gray.width + x] = ok;
        }
    return out;
}

bool mask_at(const std::vector<uint8_t>& mask, const Image& ref, int y, int x) {
    y = std::clamp(y, 0, ref.height - 1);
    x = std::clamp(x, 0, ref.width - 1);
    return mask[static_cast<size_t>(y) * ref.width + x] != 0;
}

/// Snaps each coarse grid match to the best local edge-map alignment:
/// integer SSD search over a window, then parabola subpixel interpolation.
/// Matches whose best patch distance stays poor are dropped.
PointMatchSet refine_matches(const Image& ref_edges, const Image& mov_edges,
                             const std::vector<uint8_t>& ref_mask,
                             const std::vector<uint8_t>& mov_mask,
                             const PointMatchSet& coarse, int patch_r = 6,
                             int search_r = 12) {
    PointMatchSet out;
    int patch_px = (2 * patch_r + 1) * (2 * patch_r + 1);
    for (const auto& m : coarse.pairs) {
        int px = static_cast<int>(std::lround(m.px));
        int py = static_cast<int>(std::lround(m.py));
        int qx = static_cast<int>(std::lround(m.qx));
        int qy = static_cast<int>(std::lround(m.qy));
        // 1 - masked NCC, so the two maps' different edge-contrast scales
        // cannot bias the offset estimate
        auto ssd_at = [&](int dx, int dy) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            int n = 0;
            for (int oy = -patch_r; oy <= patch_r; ++oy)
                for (int ox = -patch_r; ox <= patch_r; ++ox) {
                    if (!mask_at(ref_mask, ref_edges, py + oy, px + ox) ||
                        !mask_at(mov_mask, mov_edges, qy + dy + oy, qx + dx + ox))
                        continue;
                    double a = sample_clamped(ref_edges, py + oy, px + ox);
                    double b = sample_clamped(mov_edges, qy + dy + oy, qx + dx + ox);
                    sa += a;
                    sb += b;
                    saa += a * a;
                    sbb += b * b;
                    sab += a * b;
                    ++n;
                }
            if (n < (patch_px * 3) / 5) return std::numeric_limits<double>::infinity();
            double va = saa - sa * sa / n, vb = sbb - sb * sb / n;
            double cov = sab - sa * sb / n;
            if (va < 1e-9 || vb < 1e-9) return std::numeric_limits<double>::infinity();
            return 1.0 - cov / std::sqrt(va * vb);
        };
        double best = std::numeric_limits<double>::infinity();
        int bx = 0, by = 0;
        for (int dy = -search_r; dy <= search_r; ++dy)
            for (int dx = -search_r; dx <= search_r; ++dx) {
                double s = ssd_at(dx, dy);
                if (s < best) {
                    best = s;
                    bx = dx;
                    by = dy;
                }
            }
        // keep only snaps with a decent correlation peak
        if (!std::isfinite(best) || best > 0.7) continue;

        auto parabola = [](double sm, double s0, double sp) {
            if (!std::isfinite(sm) || !std::isfinite(sp)) return 0.0;
            double denom = sm - 2 * s0 + sp;
            if (denom <= 1e-12) return 0.0;
            return std::clamp(0.5 * (sm - sp) / denom, -0.5, 0.5);
        };
        double sub_x = 0, sub_y = 0;
        if (std::abs(bx) < search_r)
            sub_x = parabola(ssd_at(bx - 1, by), best, ssd_at(bx + 1, by));
        if (std::abs(by) < search_r)
            sub_y = parabola(ssd_at(bx, by - 1), best, ssd_at(bx, by + 1));
        out.pairs.push_back(
            {static_cast<double>(px), static_cast<double>(py),
             qx + bx + sub_x, qy + by + sub_y, m.score});
    }
    return out;
}

/// Finite-difference Levenberg-Marquardt refinement of an affine map on
/// Sobel gradient-magnitude images (cross-modality-stable structure).
PlanarTransform refine_affine(const Image& ref_edges, const Image& mov_edges,
                              const std::vector<uint8_t>& ref_mask,
                              const std::vector<uint8_t>& mov_mask,
                              PlanarTransform t, int max_steps, int margin = 10,
                              double* mean_cost_out = nullptr) {
    if (mean_cost_out) *mean_cost_out = std::numeric_limits<double>::infinity();
    if (max_steps <= 0 || t.kind != TransformKind::Affine) return t;
    const int stride = 1;
    struct SamplePoint {
        int x, y;
        double m, f, gx, gy;
    };
    size_t last_n = 0;
    // residual = a*m + b - f with (a, b) refit per evaluation, so the two
    // modalities' edge-contrast scales cannot bias the geometry
    auto cost_and_jacobian = [&](const std::array<double, 6>& p, Eigen::Matrix<double, 6, 6>* jtj,
                                 Eigen::Matrix<double, 6, 1>* jtr) {
        const double eps = 1e-3;
        // margin skips border artifacts (e.g. zero padding from earlier warps)
        std::vector<SamplePoint> pts;
        size_t candidates = 0;
        for (int y = margin; y < ref_edges.height - margin; y += stride)
            for (int x = margin; x < ref_edges.width - margin; x += stride) {
                if (!mask_at(ref_mask, ref_edges, y, x)) continue;
                ++candidates;
                double tx = p[0] * x + p[1] * y + p[2];
                double ty = p[3] * x + p[4] * y + p[5];
                if (tx < margin || ty < margin || tx > mov_edges.width - 1 - margin ||
                    ty > mov_edges.height - 1 - margin)
                    continue;
                int txi = static_cast<int>(std::floor(tx));
                int tyi = static_cast<int>(std::floor(ty));
                if (!mask_at(mov_mask, mov_edges, tyi, txi) ||
                    !mask_at(mov_mask, mov_edges, tyi + 1, txi + 1))
                    continue;
                SamplePoint sp{x, y, bilinear(mov_edges, tx, ty), ref_edges.at(y, x), 0, 0};
                if (jtj) {
                    sp.gx = (bilinear(mov_edges, tx + eps, ty) -
                             bilinear(mov_edges, tx - eps, ty)) /
                            (2 * eps);
                    sp.gy = (bilinear(mov_edges, tx, ty + eps) -
                             bilinear(mov_edges, tx, ty - eps)) /
                            (2 * eps);
                }
                pts.push_back(sp);
            }
        // a mean cost over a sliver of overlap says nothing; demand that most
        // of the reference stays in view
        if (pts.size() < 12 || pts.size() * 2 < candidates)
            return std::numeric_limits<double>::infinity();
        last_n = pts.size();

        double n = static_cast<double>(pts.size());
        double sm = 0, smm = 0, sf = 0, smf = 0;
        for (const auto& sp : pts) {
            sm += sp.m;
            smm += sp.m * sp.m;
            sf += sp.f;
            smf += sp.m * sp.f;
        }
        double denom = n * smm - sm * sm;
        double a = denom > 1e-12 ? (n * smf - sm * sf) / denom : 1.0;
        double b = (sf - a * sm) / n;

        double cost = 0;
        if (jtj) jtj->setZero();
        if (jtr) jtr->setZero();
        for (const auto& sp : pts) {
            double r = a * sp.m + b - sp.f;
            cost += r * r;
            if (!jtj) continue;
            Eigen::Matrix<double, 6, 1> j;
            j << a * sp.gx * sp.x, a * sp.gx * sp.y, a * sp.gx, a * sp.gy * sp.x,
                a * sp.gy * sp.y, a * sp.gy;
            *jtj += j * j.transpose();
            *jtr += j * r;
        }
        return cost;
    };

    std::array<double, 6> p = {t.m[0], t.m[1], t.m[2], t.m[3], t.m[4], t.m[5]};
    double lm_lambda = 1e-3;
    double cost = cost_and_jacobian(p, nullptr, nullptr);
    for (int step = 0; step < max_steps; ++step) {
        Eigen::Matrix<double, 6, 6> jtj;
        Eigen::Matrix<double, 6, 1> jtr;
        cost_and_jacobian(p, &jtj, &jtr);
        Eigen::Matrix<double, 6, 6> damped = jtj;
        for (int i = 0; i < 6; ++i) damped(i, i) += lm_lambda * (jtj(i, i) + 1e-12);
        Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(jtr);
        std::array<double, 6> cand = p;
        for (int i = 0; i < 6; ++i) cand[i] -= delta(i);
        double cand_cost = cost_and_jacobian(cand, nullptr, nullptr);
        if (cand_cost < cost) {
            p = cand;
            if (cost - cand_cost < 1e-12 * (1.0 + cost)) {
                cost = cand_cost;
                break;
            }
            cost = cand_cost;
            lm_lambda = std::max(lm_lambda * 0.5, 1e-8);
        } else {
            lm_lambda *= 4.0;
            if (lm_lambda > 1e6) break;
        }
    }
    t.m = {p[0], p[1], p[2], p[3], p[4], p[5], 0, 0, 1};
    if (mean_cost_out && last_n > 0) *mean_cost_out = cost / static_cast<double>(last_n);
    return t;
}

}  // namespace

namespace {

/// Registration between same-scale sensors: reject fits whose linear part
/// implies extreme scale or shear.
bool plausible_affine(const PlanarTransform& t) {
    Eigen::Matrix2d a;
    a << t.m[0], t.m[1], t.m[3], t.m[4];
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(a);
    double smax = svd.singularValues()(0), smin = svd.singularValues()(1);
    return smin > 0.5 && smax < 2.0;
}

/// 5-tap binomial smoothing, separable; suppresses sensor noise ahead of
/// gradient extraction
Image smooth5(const Image& im) {
    static const float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
    Image tmp(im.height, im.width, im.channels);
    Image out(im.height, im.width, im.channels);
    for (int c = 0; c < im.channels; ++c) {
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x) {
                float s = 0;
                for (int i = -2; i <= 2; ++i)
                    s += k[i + 2] * im.at(y, std::clamp(x + i, 0, im.width - 1), c);
                tmp.at(y, x, c) = s;
            }
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x) {
                float s = 0;
                for (int i = -2; i <= 2; ++i)
                    s += k[i + 2] * tmp.at(std::clamp(y + i, 0, im.height - 1), x, c);
                out.at(y, x, c) = s;
            }
    }
    return out;
}

Image downsample_half_img(const Image& im) {
    Image out(im.height / 2, im.width / 2, im.channels);
    for (int c = 0; c < im.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                out.at(y, x, c) = 0.25f * (im.at(2 * y, 2 * x, c) + im.at(2 * y, 2 * x + 1, c) +
                                           im.at(2 * y + 1, 2 * x, c) +
                                           im.at(2 * y + 1, 2 * x + 1, c));
    return out;
}

std::vector<uint8_t> downsample_half_mask(const std::vector<uint8_t>& m, int h, int w) {
    int oh = h / 2, ow = w / 2;
    std::vector<uint8_t> out(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out[static_cast<size_t>(y) * ow + x] =
                m[static_cast<size_t>(2 * y) * w + 2 * x] &&
                m[static_cast<size_t>(2 * y) * w + 2 * x + 1] &&
                m[static_cast<size_t>(2 * y + 1) * w + 2 * x] &&
                m[static_cast<size_t>(2 * y + 1) * w + 2 * x + 1];
    return out;
}

/// Coarse-to-fine photometric refinement of an affine map between the two
/// modalities' gradient-magnitude images. The coarse level has a wide
/// convergence basin (several pixels of corner displacement at full
/// resolution shrink below one pixel there), so this converges from an
/// identity start for moderate misalignments.
PlanarTransform refine_pyramid(const Image& ref_gray, const Image& mov_gray,
                               const std::vector<uint8_t>& ref_mask,
                               const std::vector<uint8_t>& mov_mask, PlanarTransform t,
                               int steps, double* mean_cost_out) {
    struct Level {
        Image ref_edges, mov_edges;
        std::vector<uint8_t> rm, mm;
        int margin;
    };
    std::vector<Level> levels;
    Image rg = ref_gray, mg = mov_gray;
    std::vector<uint8_t> rm = ref_mask, mm = mov_mask;
    int margin = 10;
    for (int l = 0; l < 3; ++l) {
        levels.push_back({augmentation::sobel_edges(smooth5(rg)),
                          augmentation::sobel_edges(smooth5(mg)), rm, mm, margin});
        if (rg.height / 2 < 24 || rg.width / 2 < 24) break;
        rm = downsample_half_mask(rm, rg.height, rg.width);
        mm = downsample_half_mask(mm, mg.height, mg.width);
        rg = downsample_half_img(rg);
        mg = downsample_half_img(mg);
        margin = std::max(3, margin / 2);
    }
    // conjugate t to the coarsest level: x_l = x / 2^l leaves the linear part
    // unchanged and divides the translation
    double scale = std::pow(2.0, static_cast<double>(levels.size() - 1));
    t.m[2] /= scale;
    t.m[5] /= scale;
    for (int l = static_cast<int>(levels.size()) - 1; l >= 0; --l) {
        const Level& lv = levels[l];
        t = refine_affine(lv.ref_edges, lv.mov_edges, lv.rm, lv.mm, t, steps, lv.margin,
                          l == 0 ? mean_cost_out : nullptr);
        if (l > 0) {
            t.m[2] *= 2.0;
            t.m[5] *= 2.0;
        }
    }
    return t;
}

}  // namespace

RegisterResult register_pair(const Image& rgb, const Image& tir, const RegisterConfig& cfg) {
    bool ref_is_rgb = cfg.reference == Modality::RGB;
    const Image& ref = ref_is_rgb ? rgb : tir;
    const Image& mov = ref_is_rgb ? tir : rgb;

    DescriptorGrid ref_grid, mov_grid;
    try {
        ref_grid = extract_descriptors(ref, cfg.cell_size);
        mov_grid = extract_descriptors(mov, cfg.cell_size);
    } catch (const Error& e) {
        throw Error("RegistrationFailed", e.what());
    }
    int ref_textured = 0, mov_textured = 0;
    for (bool t : ref_grid.textured) ref_textured += t;
    for (bool t : mov_grid.textured) mov_textured += t;
    if (ref_textured < 4 || mov_textured < 4)
        throw Error("RegistrationFailed", "not enough texture for registration");

    RegisterResult out;
    out.aligned_rgb = rgb;
    out.aligned_tir = tir;

    if (cfg.method == Method::LoftrStyle) {
        Image ref_gray = to_gray(ref);
        Image mov_gray = to_gray(mov);
        Image ref_edges = augmentation::sobel_edges(ref);
        Image mov_edges = augmentation::sobel_edges(mov);
        std::vector<uint8_t> ref_mask = content_mask(ref_gray);
        std::vector<uint8_t> mov_mask = content_mask(mov_gray);

        // candidate seed from coarse descriptor matches; a failure here is
        // not fatal because the pyramid also converges from identity
        PlanarTransform seed;  // maps reference coords -> moving coords
        bool seeded = false;
        size_t best_inliers = 0;
        std::string last_error = "no matches";
        // try a strict and a loose match floor, keep the larger consensus
        for (double floor : {cfg.match.score_floor, cfg.match.score_floor * 0.25}) {
            MatchConfig mc = cfg.match;
            mc.score_floor = floor;
            PointMatchSet coarse = match_features(ref_grid, mov_grid, mc);
            PointMatchSet reverse = match_features(mov_grid, ref_grid, mc);
            for (const auto& r : reverse.pairs)
                coarse.pairs.push_back({r.qx, r.qy, r.px, r.py, r.score});
            PointMatchSet matches =
                refine_matches(ref_edges, mov_edges, ref_mask, mov_mask, coarse);
            try {
                FitResult fit = estimate_transform(matches, cfg.fit);
                if (fit.transform.kind == TransformKind::Affine &&
                    !plausible_affine(fit.transform)) {
                    last_error = "implausible fit";
                    continue;
                }
                size_t inl = 0;
                for (bool b : fit.inliers) inl += b;
                if (!seeded || inl > best_inliers) {
                    seed = fit.transform;
                    best_inliers = inl;
                }
                seeded = true;
            } catch (const Error& e) {
                last_error = e.what();
            }
        }

        PlanarTransform t;
        if (cfg.refine_steps > 0) {
            // refine in one direction, starting from identity and (when
            // available) from the match seed, keeping the lower-cost result
            auto best_fit = [&](const Image& rg, const Image& mg,
                                const std::vector<uint8_t>& rm, const std::vector<uint8_t>& mm,
                                const PlanarTransform& sd, bool use_seed, double* cost_out) {
                double cost_id, cost_seed = std::numeric_limits<double>::infinity();
                PlanarTransform from_id = refine_pyramid(rg, mg, rm, mm, PlanarTransform{},
                                                         cfg.refine_steps, &cost_id);
                PlanarTransform from_seed;
                if (use_seed)
                    from_seed = refine_pyramid(rg, mg, rm, mm, sd, cfg.refine_steps, &cost_seed);
                *cost_out = std::min(cost_id, cost_seed);
                return cost_seed < cost_id ? from_seed : from_id;
            };
            bool use_seed = seeded && seed.kind == TransformKind::Affine;
            double cost_fwd, cost_bwd;
            PlanarTransform fwd = best_fit(ref_gray, mov_gray, ref_mask, mov_mask, seed,
                                           use_seed, &cost_fwd);
            PlanarTransform bwd = best_fit(mov_gray, ref_gray, mov_mask, ref_mask,
                                           seed.inverse(), use_seed, &cost_bwd);
            if (!std::isfinite(cost_fwd) && !std::isfinite(cost_bwd))
                throw Error("RegistrationFailed", last_error);
            // geometric mean of the forward and inverse-backward estimates:
            // bias shared by both directions cancels to first order. Only
            // valid when both converged to the same basin, so gate on their
            // agreement and otherwise keep the lower-cost estimate.
            PlanarTransform bi = bwd.inverse();
            double disagree = 0;
            for (double cx : {0.0, static_cast<double>(ref.width - 1)})
                for (double cy : {0.0, static_cast<double>(ref.height - 1)}) {
                    double fx, fy, bx, by;
                    fwd.apply(cx, cy, fx, fy);
                    bi.apply(cx, cy, bx, by);
                    disagree = std::max(disagree, std::hypot(fx - bx, fy - by));
                }
            if (std::isfinite(cost_fwd) && std::isfinite(cost_bwd) && disagree < 3.0) {
                Eigen::Matrix3d mf, mb;
                mf << fwd.m[0], fwd.m[1], fwd.m[2], fwd.m[3], fwd.m[4], fwd.m[5], 0, 0, 1;
                mb << bi.m[0], bi.m[1], bi.m[2], bi.m[3], bi.m[4], bi.m[5], 0, 0, 1;
                Eigen::Matrix3d avg = (0.5 * (mf.log() + mb.log())).exp();
                t.m = {avg(0, 0), avg(0, 1), avg(0, 2), avg(1, 0), avg(1, 1), avg(1, 2), 0, 0, 1};
            } else {
                t = cost_fwd <= cost_bwd ? fwd : bi;
            }
            if (!plausible_affine(t)) throw Error("RegistrationFailed", "implausible fit");
        } else {
            if (!seeded) throw Error("RegistrationFailed", last_error);
            t = seed;
        }
        // aligned(x) = mov(t(x)): warp the moving modality onto the reference
        Image aligned = apply_transform(mov, t.inverse());
        if (ref_is_rgb)
            out.aligned_tir = std::move(aligned);
        else
            out.aligned_rgb = std::move(aligned);
        out.transform = t;
        return out;
    }

    // superfusion_style: dense flow from patch search, then bilinear warp
    FeatureMap ref_map = to_feature_map(to_gray(ref));
    FeatureMap mov_map = to_feature_map(to_gray(mov));
    if (ref_map.height != mov_map.height || ref_map.width != mov_map.width)
        throw Error("RegistrationFailed", "superfusion_style needs equal dims");
    FlowField flow = estimate_flow(ref_map, mov_map, cfg.flow);
    Image aligned = bilinear_warp(mov, flow);
    if (ref_is_rgb)
        out.aligned_tir = std::move(aligned);
    else
        out.aligned_rgb = std::move(aligned);
    out.flow = flow;
    return out;
}

}  // namespace registration
}  // namespace msbench
