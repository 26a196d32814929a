#include "msbench/augmentation.hpp"

#include <algorithm>
#include <cmath>

namespace msbench {
namespace augmentation {

namespace {

float bilinear_sample(const Image& im, double x, double y, int c) {
    // zero outside the frame
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

Image resize_image(const Image& im, int out_h, int out_w) {
    Image out(out_h, out_w, im.channels);
    double sx = static_cast<double>(im.width) / out_w;
    double sy = static_cast<double>(im.height) / out_h;
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            double src_x = (x + 0.5) * sx - 0.5;
            double src_y = (y + 0.5) * sy - 0.5;
            src_x = std::clamp(src_x, 0.0, im.width - 1.0);
            src_y = std::clamp(src_y, 0.0, im.height - 1.0);
            for (int c = 0; c < im.channels; ++c)
                out.at(y, x, c) = bilinear_sample(im, src_x, src_y, c);
        }
    return out;
}

PlanarTransform from_2x2(const std::array<double, 4>& a) {
    PlanarTransform t;
    t.m = {a[0], a[1], 0, a[2], a[3], 0, 0, 0, 1};
    return t;
}

bool boxes_overlap(const Box& a, const Box& b) {
    return a.x1 < b.x2 && b.x1 < a.x2 && a.y1 < b.y2 && b.y1 < a.y2;
}

void paste_patch(Image& dst, const Image& src, int sx1, int sy1, int sx2, int sy2, int dx,
                 int dy) {
    for (int y = sy1; y < sy2; ++y)
        for (int x = sx1; x < sx2; ++x) {
            int ox = dx + (x - sx1), oy = dy + (y - sy1);
            if (ox < 0 || oy < 0 || ox >= dst.width || oy >= dst.height) continue;
            if (x < 0 || y < 0 || x >= src.width || y >= src.height) continue;
            for (int c = 0; c < dst.channels; ++c) dst.at(oy, ox, c) = src.at(y, x, c);
        }
}

}  // namespace

std::array<double, 4> mirror_matrix(MirrorKind kind, double phi_h, double phi_v) {
    switch (kind) {
        case MirrorKind::None:
            return {1, 0, 0, 1};
        case MirrorKind::Horizontal:
            return {-std::cos(phi_h), 0, 0, std::cos(phi_h)};
        case MirrorKind::Vertical:
            return {std::cos(phi_v), 0, 0, -std::cos(phi_v)};
        case MirrorKind::Both: {
            double d = std::cos(phi_h) * std::cos(phi_v);
            return {d, 0, 0, d};
        }
    }
    return {1, 0, 0, 1};
}

PlanarTransform compose_affine(const GeometricParams& g) {
    if (g.c_x <= 0 || g.c_y <= 0)
        throw Error("DegenerateScale", "scale factors must be positive");
    PlanarTransform s = from_2x2({g.c_x, 0, 0, g.c_y});
    PlanarTransform r = from_2x2({std::cos(g.theta), -std::sin(g.theta), std::sin(g.theta),
                                  std::cos(g.theta)});
    PlanarTransform u = from_2x2(mirror_matrix(g.mirror, g.phi_h, g.phi_v));
    PlanarTransform e;
    e.m = {1, 0, g.t_x, 0, 1, g.t_y, 0, 0, 1};
    return s.compose(r).compose(u).compose(e);
}

PlanarTransform about_center(const PlanarTransform& t, double cx, double cy) {
    PlanarTransform to_center, from_center;
    to_center.m = {1, 0, cx, 0, 1, cy, 0, 0, 1};
    from_center.m = {1, 0, -cx, 0, 1, -cy, 0, 0, 1};
    return to_center.compose(t).compose(from_center);
}

Image warp_image(const Image& im, const PlanarTransform& t) {
    PlanarTransform inv = t.inverse();
    Image out(im.height, im.width, im.channels);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            double sx, sy;
            inv.apply(x, y, sx, sy);
            for (int c = 0; c < im.channels; ++c) out.at(y, x, c) = bilinear_sample(im, sx, sy, c);
        }
    return out;
}

Sample warp_pair(const Sample& s, const PlanarTransform& t, const Image* upsilon_rgb,
                 const Image* upsilon_tir) {
    if (!t.invertible()) throw Error("SingularTransform", "warp needs an invertible transform");
    PlanarTransform centered =
        about_center(t, (s.rgb.width - 1) / 2.0, (s.rgb.height - 1) / 2.0);

    Sample out;
    out.rgb = warp_image(s.rgb, centered);
    // the same matrix drives both modalities (synchronized warp); the TIR
    // frame is re-centered about its own midpoint when dims differ
    PlanarTransform centered_tir =
        (s.tir.height == s.rgb.height && s.tir.width == s.rgb.width)
            ? centered
            : about_center(t, (s.tir.width - 1) / 2.0, (s.tir.height - 1) / 2.0);
    out.tir = warp_image(s.tir, centered_tir);

    if (upsilon_rgb) {
        for (size_t i = 0; i < out.rgb.size() && i < upsilon_rgb->size(); ++i)
            out.rgb.data[i] += upsilon_rgb->data[i];
    }
    if (upsilon_tir) {
        for (size_t i = 0; i < out.tir.size() && i < upsilon_tir->size(); ++i)
            out.tir.data[i] += upsilon_tir->data[i];
    }
    out.rgb.clamp();
    out.tir.clamp();

    for (const auto& lb : s.boxes) {
        double xs[4] = {lb.box.x1, lb.box.x2, lb.box.x1, lb.box.x2};
        double ys[4] = {lb.box.y1, lb.box.y1, lb.box.y2, lb.box.y2};
        double min_x = 1e30, min_y = 1e30, max_x = -1e30, max_y = -1e30;
        for (int i = 0; i < 4; ++i) {
            double ox, oy;
            centered.apply(xs[i], ys[i], ox, oy);
            min_x = std::min(min_x, ox);
            max_x = std::max(max_x, ox);
            min_y = std::min(min_y, oy);
            max_y = std::max(max_y, oy);
        }
        Box b;
        b.x1 = static_cast<float>(std::clamp(min_x, 0.0, static_cast<double>(s.rgb.width)));
        b.x2 = static_cast<float>(std::clamp(max_x, 0.0, static_cast<double>(s.rgb.width)));
        b.y1 = static_cast<float>(std::clamp(min_y, 0.0, static_cast<double>(s.rgb.height)));
        b.y2 = static_cast<float>(std::clamp(max_y, 0.0, static_cast<double>(s.rgb.height)));
        if (b.area() >= 1.0f) out.boxes.push_back({b, lb.class_id});
    }
    return out;
}

Image add_noise(const Image& p, double sigma, Seed seed) {
    if (sigma < 0) throw Error("BadConfig", "noise sigma must be >= 0");
    if (sigma == 0) return p;
    Image out = p;
    Rng rng(seed);
    for (auto& v : out.data) v = clamp01(v + static_cast<float>(rng.gaussian() * sigma));
    return out;
}

Image adjust_color(const Image& p, const std::array<double, 3>& alpha) {
    Image out = p;
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x)
            for (int c = 0; c < p.channels; ++c)
                out.at(y, x, c) = clamp01(static_cast<float>(alpha[c % 3] * p.at(y, x, c)));
    return out;
}

Image adjust_contrast(const Image& p, double beta, MuMode mode, double mu_fixed) {
    if (beta < 0) throw Error("BadConfig", "contrast beta must be >= 0");
    std::array<double, 3> mu{mu_fixed, mu_fixed, mu_fixed};
    if (mode == MuMode::GlobalMean) {
        double sum = 0;
        for (float v : p.data) sum += v;
        double m = p.data.empty() ? 0.0 : sum / p.data.size();
        mu = {m, m, m};
    } else if (mode == MuMode::PerChannelMean) {
        std::array<double, 3> sums{0, 0, 0};
        for (int y = 0; y < p.height; ++y)
            for (int x = 0; x < p.width; ++x)
                for (int c = 0; c < p.channels; ++c) sums[c] += p.at(y, x, c);
        double n = static_cast<double>(p.height) * p.width;
        for (int c = 0; c < 3; ++c) mu[c] = n > 0 ? sums[c] / n : 0.0;
    }
    Image out = p;
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x)
            for (int c = 0; c < p.channels; ++c)
                out.at(y, x, c) =
                    clamp01(static_cast<float>(beta * (p.at(y, x, c) - mu[c]) + mu[c]));
    return out;
}

Image pixel_transform(const Image& p, const PixelParams& params, Seed seed) {
    Image noisy = add_noise(p, params.sigma, seed);
    Image colored = adjust_color(noisy, params.alpha);
    return adjust_contrast(colored, params.beta, params.mu_mode, params.mu_fixed);
}

Image clahe(const Image& channel, int tiles_x, int tiles_y, double clip_limit) {
    if (channel.channels != 1) throw Error("ChannelMismatch", "clahe expects one channel");
    if (tiles_x < 1 || tiles_y < 1) throw Error("BadConfig", "clahe needs >= 1 tile");
    constexpr int kBins = 256;
    int h = channel.height, w = channel.width;
    tiles_x = std::min(tiles_x, w);
    tiles_y = std::min(tiles_y, h);

    // per-tile clipped-histogram CDF lookup tables
    std::vector<std::array<float, kBins>> luts(static_cast<size_t>(tiles_x) * tiles_y);
    for (int ty = 0; ty < tiles_y; ++ty)
        for (int tx = 0; tx < tiles_x; ++tx) {
            int y0 = ty * h / tiles_y, y1 = (ty + 1) * h / tiles_y;
            int x0 = tx * w / tiles_x, x1 = (tx + 1) * w / tiles_x;
            int count = (y1 - y0) * (x1 - x0);

            std::array<double, kBins> hist{};
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    int bin = static_cast<int>(clamp01(channel.at(y, x)) * 255.0f + 0.5f);
                    hist[std::min(bin, kBins - 1)] += 1.0;
                }

            if (clip_limit > 0) {
                // clip at clip_limit * uniform bin height, redistribute excess
                double limit = clip_limit * count / kBins;
                double excess = 0;
                for (auto& b : hist)
                    if (b > limit) {
                        excess += b - limit;
                        b = limit;
                    }
                double share = excess / kBins;
                for (auto& b : hist) b += share;
            }

            double cum = 0;
            for (int b = 0; b < kBins; ++b) {
                cum += hist[b];
                luts[static_cast<size_t>(ty) * tiles_x + tx][b] =
                    static_cast<float>(count > 0 ? cum / count : 0.0);
            }
        }

    // bilinear interpolation between the four surrounding tile mappings
    Image out(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double fy = (y + 0.5) * tiles_y / h - 0.5;
            double fx = (x + 0.5) * tiles_x / w - 0.5;
            int ty0 = static_cast<int>(std::floor(fy));
            int tx0 = static_cast<int>(std::floor(fx));
            double wy = fy - ty0, wx = fx - tx0;
            int bin = std::min(
                static_cast<int>(clamp01(channel.at(y, x)) * 255.0f + 0.5f), kBins - 1);
            double acc = 0;
            for (int dy = 0; dy <= 1; ++dy)
                for (int dx = 0; dx <= 1; ++dx) {
                    int ty = std::clamp(ty0 + dy, 0, tiles_y - 1);
                    int tx = std::clamp(tx0 + dx, 0, tiles_x - 1);
                    double wgt = (dy ? wy : 1.0 - wy) * (dx ? wx : 1.0 - wx);
                    acc += wgt * luts[static_cast<size_t>(ty) * tiles_x + tx][bin];
                }
            out.at(y, x) = clamp01(static_cast<float>(acc));
        }
    return out;
}

Image clahe_rgb(const Image& im, int tiles, double clip_limit) {
    if (im.channels == 1) return clahe(im, tiles, tiles, clip_limit);
    Image out(im.height, im.width, im.channels);
    for (int c = 0; c < im.channels; ++c) {
        Image ch(im.height, im.width, 1);
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x) ch.at(y, x) = im.at(y, x, c);
        Image eq = clahe(ch, tiles, tiles, clip_limit);
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x) out.at(y, x, c) = eq.at(y, x);
    }
    return out;
}

Image lighting_op(const Image& im, LightingOp op, Seed seed) {
    double gamma = 0.7, gain = 1.0;
    if (op == LightingOp::RandomLighting) {
        Rng rng(seed);
        gamma = rng.uniform(0.5, 1.5);
        gain = rng.uniform(0.8, 1.2);
    }
    Image out = im;
    for (auto& v : out.data)
        v = clamp01(static_cast<float>(gain * std::pow(static_cast<double>(v), gamma)));
    return out;
}

Image sobel_edges(const Image& im) {
    // gray reduce, then Sobel magnitude, max-normalized
    Image gray(im.height, im.width, 1);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            float s = 0;
            for (int c = 0; c < im.channels; ++c) s += im.at(y, x, c);
            gray.at(y, x) = s / im.channels;
        }
    Image mag(im.height, im.width, 1);
    float max_mag = 0;
    auto px = [&gray](int y, int x) {
        y = std::clamp(y, 0, gray.height - 1);
        x = std::clamp(x, 0, gray.width - 1);
        return gray.at(y, x);
    };
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            float gx = -px(y - 1, x - 1) - 2 * px(y, x - 1) - px(y + 1, x - 1) +
                       px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1);
            float gy = -px(y - 1, x - 1) - 2 * px(y - 1, x) - px(y - 1, x + 1) +
                       px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1);
            float m = std::sqrt(gx * gx + gy * gy);
            mag.at(y, x) = m;
            max_mag = std::max(max_mag, m);
        }
    if (max_mag > 0)
        for (auto& v : mag.data) v /= max_mag;
    return mag;
}

const std::vector<std::string>& op_registry() {
    static const std::vector<std::string> names = {
        "clahe",    "random_lighting", "light_enhance",   "noise",
        "color",    "contrast",        "affine",          "mosaic4",
        "stitcher", "region_resample", "small_object_magnify", "none"};
    return names;
}

Image apply_op_chain(const Image& im, const std::vector<std::string>& ops, Seed seed) {
    Image cur = im;
    uint64_t idx = 0;
    for (const auto& op : ops) {
        Seed s = seed.derive(idx++);
        if (op == "clahe")
            cur = clahe_rgb(cur);
        else if (op == "random_lighting")
            cur = lighting_op(cur, LightingOp::RandomLighting, s);
        else if (op == "light_enhance")
            cur = lighting_op(cur, LightingOp::LightEnhance, s);
        else if (op == "noise")
            cur = add_noise(cur, 0.02, s);
        else if (op == "none")
            ;  // explicit no-op
        else
            throw Error("UnknownOp", "unknown enhancement op '" + op + "'");
    }
    return cur;
}

Sample complementary_enhance(const Sample& s, const EnhancePolicy& policy, Seed seed) {
    Sample out = s;
    if (policy.mode == EnhanceMode::Synchronized) {
        out.rgb = apply_op_chain(s.rgb, policy.rgb_ops, seed.derive(0));
        out.tir = apply_op_chain(s.tir, policy.rgb_ops, seed.derive(1));
        return out;
    }
    Image rgb_base = apply_op_chain(s.rgb, policy.rgb_ops, seed.derive(0));
    Image tir_base = apply_op_chain(s.tir, policy.tir_ops, seed.derive(1));
    if (policy.gain_tir != 0.0) {
        Image edges = sobel_edges(s.tir);
        for (int y = 0; y < rgb_base.height; ++y)
            for (int x = 0; x < rgb_base.width; ++x) {
                float e = (y < edges.height && x < edges.width) ? edges.at(y, x) : 0.0f;
                for (int c = 0; c < rgb_base.channels; ++c)
                    rgb_base.at(y, x, c) =
                        clamp01(rgb_base.at(y, x, c) + static_cast<float>(policy.gain_tir) * e);
            }
    }
    if (policy.gain_rgb != 0.0) {
        Image edges = sobel_edges(s.rgb);
        for (int y = 0; y < tir_base.height; ++y)
            for (int x = 0; x < tir_base.width; ++x) {
                float e = (y < edges.height && x < edges.width) ? edges.at(y, x) : 0.0f;
                tir_base.at(y, x) =
                    clamp01(tir_base.at(y, x) + static_cast<float>(policy.gain_rgb) * e);
            }
    }
    out.rgb = std::move(rgb_base);
    out.tir = std::move(tir_base);
    return out;
}

Sample resize_sample(const Sample& s, int out_h, int out_w) {
    Sample out;
    out.rgb = resize_image(s.rgb, out_h, out_w);
    out.tir = resize_image(s.tir, out_h, out_w);
    double sx = static_cast<double>(out_w) / s.rgb.width;
    double sy = static_cast<double>(out_h) / s.rgb.height;
    for (const auto& lb : s.boxes) {
        Box b;
        b.x1 = static_cast<float>(lb.box.x1 * sx);
        b.x2 = static_cast<float>(lb.box.x2 * sx);
        b.y1 = static_cast<float>(lb.box.y1 * sy);
        b.y2 = static_cast<float>(lb.box.y2 * sy);
        if (b.area() >= 1.0f) out.boxes.push_back({b, lb.class_id});
    }
    return out;
}

Sample stitcher(const std::vector<Sample>& samples, int rows, int cols, int out_h, int out_w) {
    if (rows < 1 || cols < 1 ||
        static_cast<size_t>(rows) * cols != samples.size())
        throw Error("GridMismatch", "stitcher grid must match sample count");
    Sample out;
    out.rgb = Image(out_h, out_w, 3);
    out.tir = Image(out_h, out_w, 1);
    int cell_h = out_h / rows, cell_w = out_w / cols;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const Sample& src = samples[static_cast<size_t>(r) * cols + c];
            Sample cell = resize_sample(src, cell_h, cell_w);
            int oy = r * cell_h, ox = c * cell_w;
            paste_patch(out.rgb, cell.rgb, 0, 0, cell_w, cell_h, ox, oy);
            paste_patch(out.tir, cell.tir, 0, 0, cell_w, cell_h, ox, oy);
            for (const auto& lb : cell.boxes) {
                Box b = lb.box;
                b.x1 += ox;
                b.x2 += ox;
                b.y1 += oy;
                b.y2 += oy;
                out.boxes.push_back({b, lb.class_id});
            }
        }
    return out;
}

Sample mosaic4(const std::vector<Sample>& samples, int out_h, int out_w, Seed seed,
               bool jitter_center) {
    if (samples.size() != 4) throw Error("GridMismatch", "mosaic4 needs exactly 4 samples");
    if (!jitter_center) return stitcher(samples, 2, 2, out_h, out_w);

    // jittered center within the middle half of the frame
    Rng rng(seed);
    int cx = out_w / 4 + static_cast<int>(rng.uniform_index(std::max(1, out_w / 2)));
    int cy = out_h / 4 + static_cast<int>(rng.uniform_index(std::max(1, out_h / 2)));
    Sample out;
    out.rgb = Image(out_h, out_w, 3);
    out.tir = Image(out_h, out_w, 1);
    int xs[4] = {0, cx, 0, cx}, ys[4] = {0, 0, cy, cy};
    int ws[4] = {cx, out_w - cx, cx, out_w - cx};
    int hs[4] = {cy, cy, out_h - cy, out_h - cy};
    for (int i = 0; i < 4; ++i) {
        if (ws[i] < 1 || hs[i] < 1) continue;
        Sample cell = resize_sample(samples[i], hs[i], ws[i]);
        paste_patch(out.rgb, cell.rgb, 0, 0, ws[i], hs[i], xs[i], ys[i]);
        paste_patch(out.tir, cell.tir, 0, 0, ws[i], hs[i], xs[i], ys[i]);
        for (const auto& lb : cell.boxes) {
            Box b = lb.box;
            b.x1 += xs[i];
            b.x2 += xs[i];
            b.y1 += ys[i];
            b.y2 += ys[i];
            out.boxes.push_back({b, lb.class_id});
        }
    }
    return out;
}

Sample region_resample(const Sample& s, int copies, Seed seed) {
    if (copies < 0) throw Error("BadConfig", "copies must be >= 0");
    Sample out = s;
    if (copies == 0) return out;
    Rng rng(seed);
    bool tir_matches = s.tir.height == s.rgb.height && s.tir.width == s.rgb.width;

    std::vector<Box> occupied;
    for (const auto& lb : s.boxes) occupied.push_back(lb.box);

    for (const auto& lb : s.boxes) {
        int bx1 = static_cast<int>(std::floor(lb.box.x1));
        int by1 = static_cast<int>(std::floor(lb.box.y1));
        int bx2 = static_cast<int>(std::ceil(lb.box.x2));
        int by2 = static_cast<int>(std::ceil(lb.box.y2));
        int bw = bx2 - bx1, bh = by2 - by1;
        if (bw < 1 || bh < 1 || bw >= s.rgb.width || bh >= s.rgb.height) continue;
        for (int k = 0; k < copies; ++k) {
            for (int attempt = 0; attempt < 32; ++attempt) {
                int nx = static_cast<int>(rng.uniform_index(s.rgb.width - bw));
                int ny = static_cast<int>(rng.uniform_index(s.rgb.height - bh));
                Box nb{static_cast<float>(nx), static_cast<float>(ny),
                       static_cast<float>(nx + bw), static_cast<float>(ny + bh)};
                bool clash = false;
                for (const auto& ob : occupied)
                    if (boxes_overlap(nb, ob)) {
                        clash = true;
                        break;
                    }
                if (clash) continue;
                paste_patch(out.rgb, s.rgb, bx1, by1, bx2, by2, nx, ny);
                if (tir_matches) paste_patch(out.tir, s.tir, bx1, by1, bx2, by2, nx, ny);
                out.boxes.push_back({nb, lb.class_id});
                occupied.push_back(nb);
                break;
            }
        }
    }
    return out;
}

Sample small_object_magnify(const Sample& s, double area_threshold, double factor) {
    if (factor <= 1.0) throw Error("BadConfig", "magnification factor must be > 1");
    Sample out = s;
    bool tir_matches = s.tir.height == s.rgb.height && s.tir.width == s.rgb.width;
    for (auto& lb : out.boxes) {
        if (lb.box.area() >= area_threshold) continue;
        int bx1 = static_cast<int>(std::floor(lb.box.x1));
        int by1 = static_cast<int>(std::floor(lb.box.y1));
        int bx2 = static_cast<int>(std::ceil(lb.box.x2));
        int by2 = static_cast<int>(std::ceil(lb.box.y2));
        int bw = bx2 - bx1, bh = by2 - by1;
        if (bw < 1 || bh < 1) continue;
        int nw = static_cast<int>(std::lround(bw * factor));
        int nh = static_cast<int>(std::lround(bh * factor));
        double cx = lb.box.cx(), cy = lb.box.cy();
        int nx = static_cast<int>(std::lround(cx - nw / 2.0));
        int ny = static_cast<int>(std::lround(cy - nh / 2.0));

        auto magnify = [&](Image& dst, const Image& src) {
            Image patch(bh, bw, src.channels);
            for (int y = 0; y < bh; ++y)
                for (int x = 0; x < bw; ++x)
                    for (int c = 0; c < src.channels; ++c) {
                        int sy = std::clamp(by1 + y, 0, src.height - 1);
                        int sx = std::clamp(bx1 + x, 0, src.width - 1);
                        patch.at(y, x, c) = src.at(sy, sx, c);
                    }
            Image big = resize_image(patch, nh, nw);
            paste_patch(dst, big, 0, 0, nw, nh, nx, ny);
        };
        magnify(out.rgb, s.rgb);
        if (tir_matches) magnify(out.tir, s.tir);

        Box nb{static_cast<float>(nx), static_cast<float>(ny), static_cast<float>(nx + nw),
               static_cast<float>(ny + nh)};
        nb.x1 = std::clamp(nb.x1, 0.0f, static_cast<float>(s.rgb.width));
        nb.x2 = std::clamp(nb.x2, 0.0f, static_cast<float>(s.rgb.width));
        nb.y1 = std::clamp(nb.y1, 0.0f, static_cast<float>(s.rgb.height));
        nb.y2 = std::clamp(nb.y2, 0.0f, static_cast<float>(s.rgb.height));
        lb.box = nb;
    }
    return out;
}

}  // namespace augmentation
}  // namespace msbench
