#include "msbench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "msbench/image_io.hpp"
#include "msbench/registration.hpp"

namespace msbench {
namespace dataset {

namespace {

constexpr double kPi = 3.14159265358979323846;

float bilinear_grid(const std::vector<float>& g, int gh, int gw, double y, double x) {
    int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, gw - 1);
    int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, gh - 1);
    int x1 = std::min(x0 + 1, gw - 1);
    int y1 = std::min(y0 + 1, gh - 1);
    double fx = std::clamp(x - x0, 0.0, 1.0);
    double fy = std::clamp(y - y0, 0.0, 1.0);
    double top = g[y0 * gw + x0] * (1 - fx) + g[y0 * gw + x1] * fx;
    double bot = g[y1 * gw + x0] * (1 - fx) + g[y1 * gw + x1] * fx;
    return static_cast<float>(top * (1 - fy) + bot * fy);
}

struct SceneObject {
    bool ellipse = false;
    double cx = 0, cy = 0;
    double w = 0, h = 0;        // full extents
    double delta[3] = {0, 0, 0};  // RGB lift before illumination scaling
    double heat = 0;             // TIR lift before thermal_contrast scaling

    bool contains(double x, double y) const {
        double dx = x - cx, dy = y - cy;
        if (!ellipse)
            return std::abs(dx) <= w / 2 && std::abs(dy) <= h / 2;
        double a = w / 2, b = h / 2;
        return (dx * dx) / (a * a) + (dy * dy) / (b * b) <= 1.0;
    }
};

}  // namespace

PairedSample synth_scene(const SynthConfig& cfg) {
    if (cfg.height < 16 || cfg.width < 16)
        throw Error("BadConfig", "scene must be at least 16x16");
    if (cfg.min_objects < 0 || cfg.max_objects < cfg.min_objects)
        throw Error("BadConfig", "bad object count range");
    if (cfg.min_size < 2 || cfg.max_size < cfg.min_size)
        throw Error("BadConfig", "bad object size range");
    if (cfg.illumination < 0 || cfg.illumination > 1)
        throw Error("BadConfig", "illumination must be in [0,1]");
    if (cfg.thermal_contrast < 0 || cfg.thermal_contrast > 1)
        throw Error("BadConfig", "thermal_contrast must be in [0,1]");

    Rng rng(Seed{cfg.seed});

    // shared background: coarse smooth field + clutter-weighted fine detail
    const int cg = 6;
    std::vector<float> coarse(cg * cg);
    for (auto& v : coarse) v = static_cast<float>(rng.uniform());
    const int fg = 16;
    std::vector<float> fine(fg * fg);
    for (auto& v : fine) v = static_cast<float>(rng.uniform());

    double tint[3];
    for (double& t : tint) t = rng.uniform(0.85, 1.0);

    int range = cfg.max_objects - cfg.min_objects + 1;
    int n_obj = cfg.min_objects + static_cast<int>(rng.uniform_index(range));
    double margin = cfg.max_size / 2 + 2;
    double lo_x = margin, hi_x = cfg.width - margin;
    double lo_y = margin, hi_y = cfg.height - margin;
    if (hi_x <= lo_x || hi_y <= lo_y)
        throw Error("BadConfig", "objects do not fit the scene");

    std::vector<SceneObject> objs;
    for (int i = 0; i < n_obj; ++i) {
        SceneObject o;
        o.ellipse = rng.uniform_index(2) == 1;
        o.cx = rng.uniform(lo_x, hi_x);
        o.cy = rng.uniform(lo_y, hi_y);
        o.w = rng.uniform(cfg.min_size, cfg.max_size);
        o.h = rng.uniform(cfg.min_size, cfg.max_size);
        for (double& d : o.delta) d = rng.uniform(0.4, 0.6);
        o.heat = rng.uniform(0.5, 0.8);
        objs.push_back(o);
    }

    PairedSample out;
    out.rgb = Image(cfg.height, cfg.width, 3);
    out.tir = Image(cfg.height, cfg.width, 1);
    out.meta.seed = cfg.seed;
    out.meta.illumination = cfg.illumination;

    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
            double cyf = (y + 0.5) / cfg.height * (cg - 1);
            double cxf = (x + 0.5) / cfg.width * (cg - 1);
            double fyf = (y + 0.5) / cfg.height * (fg - 1);
            double fxf = (x + 0.5) / cfg.width * (fg - 1);
            double base = 0.22 + 0.2 * bilinear_grid(coarse, cg, cg, cyf, cxf) +
                          cfg.clutter * 0.2 *
                              (bilinear_grid(fine, fg, fg, fyf, fxf) - 0.5);

            const SceneObject* hit = nullptr;
            for (const auto& o : objs)
                if (o.contains(x + 0.0, y + 0.0)) hit = &o;  // last object on top

            for (int c = 0; c < 3; ++c) {
                double v = base * tint[c];
                if (hit) v += cfg.illumination * hit->delta[c];
                double sigma = 0.01 + 0.03 * (1.0 - cfg.illumination);
                v += sigma * rng.gaussian();
                out.rgb.at(y, x, c) = static_cast<float>(clamp01(v));
            }
            double tv = 0.15 + 0.5 * base;
            if (hit) tv += cfg.thermal_contrast * hit->heat;
            tv += 0.01 * rng.gaussian();
            out.tir.at(y, x) = static_cast<float>(clamp01(tv));
        }

    for (const auto& o : objs) {
        augmentation::LabeledBox b;
        b.box.x1 = static_cast<float>(std::max(0.0, o.cx - o.w / 2));
        b.box.y1 = static_cast<float>(std::max(0.0, o.cy - o.h / 2));
        b.box.x2 = static_cast<float>(std::min<double>(cfg.width, o.cx + o.w / 2));
        b.box.y2 = static_cast<float>(std::min<double>(cfg.height, o.cy + o.h / 2));
        b.class_id = o.ellipse ? 1 : 0;
        out.boxes.push_back(b);
    }

    if (cfg.misalign.kind == MisalignKind::Affine) {
        double rot = rng.uniform(-cfg.misalign.max_rot_deg, cfg.misalign.max_rot_deg) *
                     kPi / 180.0;
        double tx = rng.uniform(-cfg.misalign.max_trans_px, cfg.misalign.max_trans_px);
        double ty = rng.uniform(-cfg.misalign.max_trans_px, cfg.misalign.max_trans_px);
        double cx = cfg.width / 2.0, cy = cfg.height / 2.0;
        double ca = std::cos(rot), sa = std::sin(rot);
        // T(p) = R (p - c) + c + t, homogeneous
        PlanarTransform t;
        t.kind = TransformKind::Affine;
        t.m = {ca, -sa, cx - ca * cx + sa * cy + tx,
               sa, ca,  cy - sa * cx - ca * cy + ty,
               0,  0,   1};
        out.tir = registration::apply_transform(out.tir, t);
        out.meta.injected = t;
    }
    return out;
}

std::vector<PairedSample> synth_batch(const SynthConfig& cfg, int count, Seed base_seed) {
    if (count < 1) throw Error("BadConfig", "count must be >= 1");
    std::vector<PairedSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        SynthConfig c = cfg;
        c.seed = base_seed.derive(static_cast<uint64_t>(i)).base;
        out.push_back(synth_scene(c));
    }
    return out;
}

std::vector<PairedSample> load_manifest(const std::string& path, bool clip_boxes) {
    std::ifstream in(path);
    if (!in) throw Error("MissingFile", "cannot open manifest " + path);
    std::filesystem::path dir = std::filesystem::path(path).parent_path();

    std::vector<PairedSample> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("ParseError",
                        "manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!rec.contains("rgb") || !rec.contains("tir"))
            throw Error("ParseError", "manifest line " + std::to_string(line_no) +
                                          ": missing rgb/tir path");
        PairedSample s;
        auto resolve = [&dir](const std::string& p) {
            std::filesystem::path fp(p);
            return fp.is_absolute() ? fp.string() : (dir / fp).string();
        };
        try {
            s.rgb = msbench::load_image(resolve(rec["rgb"].get<std::string>()));
            s.tir = msbench::load_image(resolve(rec["tir"].get<std::string>()));
        } catch (const Error& e) {
            if (e.kind() == "MissingFile") throw;
            throw Error("ParseError",
                        "manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        validate_pair(s.rgb, s.tir);
        if (rec.contains("boxes")) {
            for (const auto& jb : rec["boxes"]) {
                if (!jb.is_array() || jb.size() < 4)
                    throw Error("ParseError", "manifest line " + std::to_string(line_no) +
                                                  ": box needs [x1,y1,x2,y2,class]");
                augmentation::LabeledBox b;
                b.box.x1 = jb[0].get<float>();
                b.box.y1 = jb[1].get<float>();
                b.box.x2 = jb[2].get<float>();
                b.box.y2 = jb[3].get<float>();
                b.class_id = jb.size() > 4 ? jb[4].get<int>() : 0;
                if (b.box.x1 > b.box.x2 || b.box.y1 > b.box.y2)
                    throw Error("ParseError", "manifest line " + std::to_string(line_no) +
                                                  ": inverted box");
                bool inside = b.box.x1 >= 0 && b.box.y1 >= 0 &&
                              b.box.x2 <= s.rgb.width && b.box.y2 <= s.rgb.height;
                if (!inside) {
                    if (!clip_boxes)
                        throw Error("BoxOutOfBounds", "manifest line " +
                                                          std::to_string(line_no) +
                                                          ": box outside frame");
                    b.box.x1 = std::max(b.box.x1, 0.0f);
                    b.box.y1 = std::max(b.box.y1, 0.0f);
                    b.box.x2 = std::min(b.box.x2, static_cast<float>(s.rgb.width));
                    b.box.y2 = std::min(b.box.y2, static_cast<float>(s.rgb.height));
                }
                s.boxes.push_back(b);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace dataset
}  // namespace msbench
