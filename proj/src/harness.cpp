#include "msbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <sstream>
#include <thread>

#include "msbench/augmentation.hpp"
#include "msbench/feature_fusion.hpp"
#include "msbench/pixel_fusion.hpp"
#include "msbench/registration.hpp"

namespace msbench {
namespace harness {

// ---- baseline detector ----------------------------------------------------

namespace {

Image project_channels(const Image& im, const std::vector<double>& weights) {
    std::vector<double> w = weights;
    if (w.empty()) w.assign(im.channels, 1.0 / im.channels);
    if (static_cast<int>(w.size()) != im.channels)
        throw Error("ConfigError", "channel_weights size does not match image channels");
    double total = 0;
    for (double v : w) total += v;
    if (total <= 0) throw Error("ConfigError", "channel_weights must sum to > 0");
    Image out(im.height, im.width, 1);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            double acc = 0;
            for (int c = 0; c < im.channels; ++c) acc += w[c] * im.at(y, x, c);
            out.at(y, x) = static_cast<float>(acc / total);
        }
    return out;
}

Image gaussian_smooth(const Image& im, double sigma) {
    if (sigma <= 0) return im;
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
    Image tmp(im.height, im.width, 1), out(im.height, im.width, 1);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * im.at(y, clampi(x + i, im.width - 1));
            tmp.at(y, x) = static_cast<float>(acc);
        }
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * tmp.at(clampi(y + i, im.height - 1), x);
            out.at(y, x) = static_cast<float>(acc);
        }
    return out;
}

}  // namespace

DetectionSet baseline_detect(const Image& image, const BaselineDetectorConfig& cfg) {
    if (cfg.threshold <= 0 || cfg.threshold >= 1)
        throw Error("ConfigError", "detector threshold must be in (0,1)");
    Image score = gaussian_smooth(project_channels(image, cfg.channel_weights), cfg.sigma);

    std::vector<int> label(score.size(), -1);
    DetectionSet out;
    int next = 0;
    for (int y = 0; y < score.height; ++y)
        for (int x = 0; x < score.width; ++x) {
            int start = y * score.width + x;
            if (label[start] >= 0 || score.data[start] <= cfg.threshold) continue;
            // BFS over the 4-neighborhood
            std::deque<int> queue{start};
            label[start] = next;
            int minx = x, maxx = x, miny = y, maxy = y;
            double sum = 0;
            int count = 0;
            while (!queue.empty()) {
                int i = queue.front();
                queue.pop_front();
                int cy = i / score.width, cx = i % score.width;
                sum += score.data[i];
                ++count;
                minx = std::min(minx, cx);
                maxx = std::max(maxx, cx);
                miny = std::min(miny, cy);
                maxy = std::max(maxy, cy);
                const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    int nx = cx + dx[k], ny = cy + dy[k];
                    if (nx < 0 || ny < 0 || nx >= score.width || ny >= score.height) continue;
                    int ni = ny * score.width + nx;
                    if (label[ni] >= 0 || score.data[ni] <= cfg.threshold) continue;
                    label[ni] = next;
                    queue.push_back(ni);
                }
            }
            ++next;
            if (count < cfg.min_area) continue;
            Detection d;
            d.box = {static_cast<float>(minx), static_cast<float>(miny),
                     static_cast<float>(maxx + 1), static_cast<float>(maxy + 1)};
            d.score = static_cast<float>(sum / count);
            double fill = count / static_cast<double>(d.box.area());
            d.class_id = fill < 0.88 ? 1 : 0;
            out.detections.push_back(d);
        }
    std::stable_sort(out.detections.begin(), out.detections.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    if (cfg.max_detections > 0 &&
        static_cast<int>(out.detections.size()) > cfg.max_detections)
        out.detections.resize(cfg.max_detections);
    return out;
}

// ---- config ---------------------------------------------------------------

namespace {

using nlohmann::json;

void expect_keys(const json& obj, const std::string& section,
                 std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw Error("ConfigError",
                        "unknown key '" + it.key() + "' in " + section);
    }
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

BaselineDetectorConfig detector_from_json(const json& j, const std::string& section) {
    expect_keys(j, section,
                {"channel_weights", "sigma", "threshold", "min_area", "max_detections"});
    BaselineDetectorConfig d;
    get_if(j, "channel_weights", d.channel_weights);
    get_if(j, "sigma", d.sigma);
    get_if(j, "threshold", d.threshold);
    get_if(j, "min_area", d.min_area);
    get_if(j, "max_detections", d.max_detections);
    if (d.threshold <= 0 || d.threshold >= 1)
        throw Error("ConfigError", section + ".threshold must be in (0,1)");
    return d;
}

json detector_to_json(const BaselineDetectorConfig& d) {
    return {{"channel_weights", d.channel_weights},
            {"sigma", d.sigma},
            {"threshold", d.threshold},
            {"min_area", d.min_area},
            {"max_detections", d.max_detections}};
}

}  // namespace

FusionMode fusion_mode_from_name(const std::string& s) {
    if (s == "rgb_only") return FusionMode::RgbOnly;
    if (s == "tir_only") return FusionMode::TirOnly;
    if (s == "pixel") return FusionMode::Pixel;
    if (s == "feature") return FusionMode::Feature;
    if (s == "decision") return FusionMode::Decision;
    throw Error("ConfigError", "unknown fusion mode '" + s + "'");
}

const char* fusion_mode_name(FusionMode m) {
    switch (m) {
        case FusionMode::RgbOnly: return "rgb_only";
        case FusionMode::TirOnly: return "tir_only";
        case FusionMode::Pixel: return "pixel";
        case FusionMode::Feature: return "feature";
        case FusionMode::Decision: return "decision";
    }
    return "?";
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    expect_keys(j, "config",
                {"dataset", "augmentation", "registration", "detector", "fusion", "metrics",
                 "repeats", "base_seed", "include_timing", "threads"});
    ExperimentConfig cfg;

    if (!j.contains("dataset")) throw Error("ConfigError", "missing 'dataset' section");
    const json& ds = j.at("dataset");
    expect_keys(ds, "dataset", {"manifest", "synth", "count"});
    if (ds.contains("manifest") == ds.contains("synth"))
        throw Error("ConfigError", "dataset needs exactly one of 'manifest' or 'synth'");
    if (ds.contains("manifest")) {
        cfg.dataset.use_manifest = true;
        cfg.dataset.manifest = ds.at("manifest").get<std::string>();
    } else {
        const json& sy = ds.at("synth");
        expect_keys(sy, "dataset.synth",
                    {"height", "width", "min_objects", "max_objects", "min_size", "max_size",
                     "illumination", "thermal_contrast", "clutter", "misalign"});
        auto& s = cfg.dataset.synth;
        get_if(sy, "height", s.height);
        get_if(sy, "width", s.width);
        get_if(sy, "min_objects", s.min_objects);
        get_if(sy, "max_objects", s.max_objects);
        get_if(sy, "min_size", s.min_size);
        get_if(sy, "max_size", s.max_size);
        get_if(sy, "illumination", s.illumination);
        get_if(sy, "thermal_contrast", s.thermal_contrast);
        get_if(sy, "clutter", s.clutter);
        if (sy.contains("misalign")) {
            const json& mis = sy.at("misalign");
            expect_keys(mis, "dataset.synth.misalign", {"kind", "max_rot_deg", "max_trans_px"});
            std::string kind = mis.value("kind", "none");
            if (kind == "none")
                s.misalign.kind = dataset::MisalignKind::None;
            else if (kind == "affine")
                s.misalign.kind = dataset::MisalignKind::Affine;
            else
                throw Error("ConfigError", "unknown misalign kind '" + kind + "'");
            get_if(mis, "max_rot_deg", s.misalign.max_rot_deg);
            get_if(mis, "max_trans_px", s.misalign.max_trans_px);
        }
    }
    get_if(ds, "count", cfg.dataset.count);
    if (cfg.dataset.count < 1) throw Error("ConfigError", "dataset.count must be >= 1");

    if (j.contains("augmentation")) {
        const json& a = j.at("augmentation");
        expect_keys(a, "augmentation", {"mode", "rgb_ops", "tir_ops", "gain_rgb", "gain_tir"});
        get_if(a, "mode", cfg.augmentation.mode);
        get_if(a, "rgb_ops", cfg.augmentation.rgb_ops);
        get_if(a, "tir_ops", cfg.augmentation.tir_ops);
        get_if(a, "gain_rgb", cfg.augmentation.gain_rgb);
        get_if(a, "gain_tir", cfg.augmentation.gain_tir);
        const std::string& m = cfg.augmentation.mode;
        if (m != "none" && m != "synchronized" && m != "complementary")
            throw Error("ConfigError", "unknown augmentation mode '" + m + "'");
    }

    if (j.contains("registration")) {
        const json& r = j.at("registration");
        expect_keys(r, "registration", {"method", "phase", "reference"});
        get_if(r, "method", cfg.registration.method);
        get_if(r, "phase", cfg.registration.phase);
        if (r.contains("reference"))
            cfg.registration.reference = modality_from_name(r.at("reference").get<std::string>());
        const std::string& m = cfg.registration.method;
        if (m != "none" && m != "loftr_style" && m != "superfusion_style")
            throw Error("ConfigError", "unknown registration method '" + m + "'");
        const std::string& p = cfg.registration.phase;
        if (p != "train_side" && p != "test_side")
            throw Error("ConfigError", "unknown registration phase '" + p + "'");
    }

    if (j.contains("detector")) {
        const json& d = j.at("detector");
        expect_keys(d, "detector", {"rgb", "tir"});
        if (d.contains("rgb")) cfg.detector_rgb = detector_from_json(d.at("rgb"), "detector.rgb");
        if (d.contains("tir")) cfg.detector_tir = detector_from_json(d.at("tir"), "detector.tir");
    }

    if (j.contains("fusion")) {
        const json& f = j.at("fusion");
        expect_keys(f, "fusion", {"mode", "wiring", "branches", "feature_pool", "policy"});
        if (f.contains("mode"))
            cfg.fusion.mode = fusion_mode_from_name(f.at("mode").get<std::string>());
        get_if(f, "wiring", cfg.fusion.wiring);
        get_if(f, "branches", cfg.fusion.branches);
        get_if(f, "feature_pool", cfg.fusion.feature_pool);
        if (f.contains("policy")) {
            const json& p = f.at("policy");
            expect_keys(p, "fusion.policy",
                        {"epsilon", "local_mode", "kappa_rgb", "kappa_tir", "theta",
                         "iou_match", "unmatched_penalty", "nms_iou", "score_floor"});
            auto& pol = cfg.fusion.policy;
            get_if(p, "epsilon", pol.epsilon);
            if (p.contains("local_mode"))
                pol.local_mode =
                    decision_fusion::local_mode_from_name(p.at("local_mode").get<std::string>());
            get_if(p, "kappa_rgb", pol.kappa_rgb);
            get_if(p, "kappa_tir", pol.kappa_tir);
            get_if(p, "theta", pol.theta);
            get_if(p, "iou_match", pol.iou_match);
            get_if(p, "unmatched_penalty", pol.unmatched_penalty);
            get_if(p, "nms_iou", pol.nms_iou);
            get_if(p, "score_floor", pol.score_floor);
        }
    }

    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        expect_keys(m, "metrics", {"map", "lamr"});
        get_if(m, "map", cfg.metric_map);
        get_if(m, "lamr", cfg.metric_lamr);
    }
    get_if(j, "repeats", cfg.repeats);
    if (cfg.repeats < 1) throw Error("ConfigError", "repeats must be >= 1");
    get_if(j, "base_seed", cfg.base_seed);
    get_if(j, "include_timing", cfg.include_timing);
    get_if(j, "threads", cfg.threads);
    return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    json ds;
    if (cfg.dataset.use_manifest) {
        ds["manifest"] = cfg.dataset.manifest;
    } else {
        const auto& s = cfg.dataset.synth;
        json mis{{"kind", s.misalign.kind == dataset::MisalignKind::Affine ? "affine" : "none"},
                 {"max_rot_deg", s.misalign.max_rot_deg},
                 {"max_trans_px", s.misalign.max_trans_px}};
        ds["synth"] = {{"height", s.height},
                       {"width", s.width},
                       {"min_objects", s.min_objects},
                       {"max_objects", s.max_objects},
                       {"min_size", s.min_size},
                       {"max_size", s.max_size},
                       {"illumination", s.illumination},
                       {"thermal_contrast", s.thermal_contrast},
                       {"clutter", s.clutter},
                       {"misalign", mis}};
    }
    ds["count"] = cfg.dataset.count;

    const char* local = "confidence_weighted";
    if (cfg.fusion.policy.local_mode == decision_fusion::LocalMode::SimpleAverage)
        local = "simple_average";
    else if (cfg.fusion.policy.local_mode == decision_fusion::LocalMode::MaxSelection)
        local = "max_selection";

    return {
        {"dataset", ds},
        {"augmentation",
         {{"mode", cfg.augmentation.mode},
          {"rgb_ops", cfg.augmentation.rgb_ops},
          {"tir_ops", cfg.augmentation.tir_ops},
          {"gain_rgb", cfg.augmentation.gain_rgb},
          {"gain_tir", cfg.augmentation.gain_tir}}},
        {"registration",
         {{"method", cfg.registration.method},
          {"phase", cfg.registration.phase},
          {"reference", modality_name(cfg.registration.reference)}}},
        {"detector",
         {{"rgb", detector_to_json(cfg.detector_rgb)},
          {"tir", detector_to_json(cfg.detector_tir)}}},
        {"fusion",
         {{"mode", fusion_mode_name(cfg.fusion.mode)},
          {"wiring", cfg.fusion.wiring},
          {"branches", cfg.fusion.branches},
          {"feature_pool", cfg.fusion.feature_pool},
          {"policy",
           {{"epsilon", cfg.fusion.policy.epsilon},
            {"local_mode", local},
            {"kappa_rgb", cfg.fusion.policy.kappa_rgb},
            {"kappa_tir", cfg.fusion.policy.kappa_tir},
            {"theta", cfg.fusion.policy.theta},
            {"iou_match", cfg.fusion.policy.iou_match},
            {"unmatched_penalty", cfg.fusion.policy.unmatched_penalty},
            {"nms_iou", cfg.fusion.policy.nms_iou},
            {"score_floor", cfg.fusion.policy.score_floor}}}}},
        {"metrics", {{"map", cfg.metric_map}, {"lamr", cfg.metric_lamr}}},
        {"repeats", cfg.repeats},
        {"base_seed", cfg.base_seed},
        {"include_timing", cfg.include_timing},
        {"threads", cfg.threads}};
}

// ---- TOML subset ----------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

json parse_toml_value(const std::string& raw, int line_no);

json parse_toml_array(const std::string& raw, int line_no) {
    json arr = json::array();
    std::string body = trim(raw.substr(1, raw.size() - 2));
    if (body.empty()) return arr;
    int depth = 0;
    bool in_str = false;
    std::string cur;
    for (char ch : body) {
        if (ch == '"') in_str = !in_str;
        if (!in_str) {
            if (ch == '[') ++depth;
            if (ch == ']') --depth;
            if (ch == ',' && depth == 0) {
                arr.push_back(parse_toml_value(trim(cur), line_no));
                cur.clear();
                continue;
            }
        }
        cur += ch;
    }
    if (!trim(cur).empty()) arr.push_back(parse_toml_value(trim(cur), line_no));
    return arr;
}

json parse_toml_value(const std::string& raw, int line_no) {
    if (raw.empty()) throw Error("ParseError", "toml line " + std::to_string(line_no) +
                                                   ": empty value");
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"')
            throw Error("ParseError",
                        "toml line " + std::to_string(line_no) + ": unterminated string");
        std::string out;
        for (size_t i = 1; i + 1 < raw.size(); ++i) {
            if (raw[i] == '\\' && i + 2 < raw.size()) {
                char n = raw[++i];
                out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
            } else {
                out += raw[i];
            }
        }
        return out;
    }
    if (raw.front() == '[') return parse_toml_array(raw, line_no);
    if (raw == "true") return true;
    if (raw == "false") return false;
    // integer first, then float
    {
        int64_t v = 0;
        auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
        if (ec == std::errc() && p == raw.data() + raw.size()) return v;
    }
    try {
        size_t pos = 0;
        double d = std::stod(raw, &pos);
        if (pos == raw.size()) return d;
    } catch (...) {
    }
    throw Error("ParseError",
                "toml line " + std::to_string(line_no) + ": bad value '" + raw + "'");
}

std::vector<std::string> split_dotted(const std::string& key, int line_no) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : key) {
        if (ch == '.') {
            if (cur.empty())
                throw Error("ParseError",
                            "toml line " + std::to_string(line_no) + ": empty key segment");
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (cur.empty())
        throw Error("ParseError", "toml line " + std::to_string(line_no) + ": empty key");
    parts.push_back(cur);
    return parts;
}

}  // namespace

nlohmann::json toml_to_json(const std::string& text) {
    json root = json::object();
    std::vector<std::string> section;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw Error("ParseError",
                            "toml line " + std::to_string(line_no) + ": bad section header");
            section = split_dotted(trim(s.substr(1, s.size() - 2)), line_no);
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw Error("ParseError",
                        "toml line " + std::to_string(line_no) + ": expected key = value");
        std::vector<std::string> path = section;
        for (const auto& p : split_dotted(trim(s.substr(0, eq)), line_no)) path.push_back(p);
        json* node = &root;
        for (size_t i = 0; i + 1 < path.size(); ++i) node = &(*node)[path[i]];
        (*node)[path.back()] = parse_toml_value(trim(s.substr(eq + 1)), line_no);
    }
    return root;
}

nlohmann::json parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("MissingFile", "cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".toml")
        return toml_to_json(buf.str());
    try {
        return json::parse(buf.str());
    } catch (const json::exception& e) {
        throw Error("ParseError", std::string("config: ") + e.what());
    }
}

// ---- pipeline -------------------------------------------------------------

namespace {

/// Box-average spatial pooling; pads the last cell by clamping.
FeatureMap pool_map(const FeatureMap& f, int factor) {
    if (factor <= 1) return f;
    FeatureMap out((f.height + factor - 1) / factor, (f.width + factor - 1) / factor,
                   f.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < f.channels; ++c) {
                double acc = 0;
                int n = 0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) {
                        int sy = y * factor + dy, sx = x * factor + dx;
                        if (sy < f.height && sx < f.width) {
                            acc += f.at(sy, sx, c);
                            ++n;
                        }
                    }
                out.at(y, x, c) = static_cast<float>(acc / n);
            }
    return out;
}

Image upsample_bilinear(const Image& im, int out_h, int out_w) {
    Image out(out_h, out_w, im.channels);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            double sy = (y + 0.5) * im.height / out_h - 0.5;
            double sx = (x + 0.5) * im.width / out_w - 0.5;
            int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, im.width - 1);
            int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, im.height - 1);
            int x1 = std::min(x0 + 1, im.width - 1);
            int y1 = std::min(y0 + 1, im.height - 1);
            double fx = std::clamp(sx - x0, 0.0, 1.0);
            double fy = std::clamp(sy - y0, 0.0, 1.0);
            for (int c = 0; c < im.channels; ++c) {
                double top = im.at(y0, x0, c) * (1 - fx) + im.at(y0, x1, c) * fx;
                double bot = im.at(y1, x0, c) * (1 - fx) + im.at(y1, x1, c) * fx;
                out.at(y, x, c) = static_cast<float>(top * (1 - fy) + bot * fy);
            }
        }
    return out;
}

DetectionSet detect_feature_fusion(const Image& rgb, const Image& tir,
                                   const ExperimentConfig& cfg, Seed seed) {
    Image tir3 = pixel_fusion::expand_tir(tir);
    FeatureMap fr = pool_map(to_feature_map(rgb), cfg.fusion.feature_pool);
    FeatureMap ft = pool_map(to_feature_map(tir3), cfg.fusion.feature_pool);

    feature_fusion::WireConfig w;
    w.wiring = feature_fusion::wiring_from_name(cfg.fusion.wiring);
    w.inputs = feature_fusion::inputs_from_name(cfg.fusion.branches);
    w.nin = feature_fusion::NinParams::seeded(3, seed.derive(101));
    w.icfe = feature_fusion::IcfeParams::seeded(3, 1, 1, seed.derive(102));
    FeatureMap fused = feature_fusion::wire_fusion(fr, ft, w);

    // channel-mean decode, back to image resolution
    Image score(fused.height, fused.width, 1);
    for (int y = 0; y < fused.height; ++y)
        for (int x = 0; x < fused.width; ++x) {
            double acc = 0;
            for (int c = 0; c < fused.channels; ++c) acc += fused.at(y, x, c);
            score.at(y, x) = static_cast<float>(clamp01(acc / fused.channels));
        }
    Image full = upsample_bilinear(score, rgb.height, rgb.width);
    BaselineDetectorConfig det = cfg.detector_rgb;
    det.channel_weights = {1.0};
    DetectionSet out = baseline_detect(full, det);
    out.modality = Modality::FUSED;
    return out;
}

void apply_registration(augmentation::Sample& s, const ExperimentConfig& cfg,
                        bool& fallback) {
    registration::RegisterConfig rc;
    rc.method = registration::method_from_name(cfg.registration.method);
    rc.reference = cfg.registration.reference;
    try {
        registration::RegisterResult res = registration::register_pair(s.rgb, s.tir, rc);
        s.rgb = std::move(res.aligned_rgb);
        s.tir = std::move(res.aligned_tir);
    } catch (const Error& e) {
        if (e.kind() != "RegistrationFailed") throw;
        fallback = true;  // identity alignment
    }
}

}  // namespace

PipelineResult run_pipeline(const dataset::PairedSample& sample, const ExperimentConfig& cfg,
                            Seed seed) {
    augmentation::Sample s{sample.rgb, sample.tir, sample.boxes};
    PipelineResult out;

    bool do_register = cfg.registration.method != "none";
    bool train_side = cfg.registration.phase == "train_side";
    if (do_register && train_side)
        apply_registration(s, cfg, out.registration_fallback);

    if (cfg.augmentation.mode != "none") {
        augmentation::EnhancePolicy pol;
        pol.mode = cfg.augmentation.mode == "synchronized"
                       ? augmentation::EnhanceMode::Synchronized
                       : augmentation::EnhanceMode::Complementary;
        pol.rgb_ops = cfg.augmentation.rgb_ops;
        pol.tir_ops = cfg.augmentation.tir_ops;
        pol.gain_rgb = cfg.augmentation.gain_rgb;
        pol.gain_tir = cfg.augmentation.gain_tir;
        s = augmentation::complementary_enhance(s, pol, seed.derive(11));
    }

    if (do_register && !train_side)
        apply_registration(s, cfg, out.registration_fallback);

    switch (cfg.fusion.mode) {
        case FusionMode::RgbOnly:
            out.preds = baseline_detect(s.rgb, cfg.detector_rgb);
            break;
        case FusionMode::TirOnly:
            out.preds = baseline_detect(s.tir, cfg.detector_tir);
            out.preds.modality = Modality::TIR;
            break;
        case FusionMode::Pixel: {
            auto p = pixel_fusion::make_default_params(s.rgb.height, s.rgb.width,
                                                       seed.derive(21));
            Image fused = pixel_fusion::pixel_fuse(s.rgb, s.tir, p, seed.derive(22));
            out.preds = baseline_detect(fused, cfg.detector_rgb);
            out.preds.modality = Modality::FUSED;
            break;
        }
        case FusionMode::Feature:
            out.preds = detect_feature_fusion(s.rgb, s.tir, cfg, seed);
            break;
        case FusionMode::Decision: {
            DetectionSet dr = baseline_detect(s.rgb, cfg.detector_rgb);
            dr.modality = Modality::RGB;
            DetectionSet dt = baseline_detect(s.tir, cfg.detector_tir);
            dt.modality = Modality::TIR;
            out.preds = decision_fusion::local_fuse(dr, dt, cfg.fusion.policy);
            break;
        }
    }

    for (const auto& b : s.boxes) out.gts.push_back({b.box, b.class_id});
    return out;
}

// ---- experiments ----------------------------------------------------------

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("MSBENCH_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

namespace {

TrialResult run_trial(const ExperimentConfig& cfg,
                      const std::vector<dataset::PairedSample>& manifest_samples,
                      Seed trial_seed) {
    std::vector<dataset::PairedSample> local;
    const std::vector<dataset::PairedSample>* samples;
    if (cfg.dataset.use_manifest) {
        samples = &manifest_samples;
    } else {
        local = dataset::synth_batch(cfg.dataset.synth, cfg.dataset.count, trial_seed);
        samples = &local;
    }

    TrialResult tr;
    std::vector<metrics::ImageRecord> records;
    for (size_t i = 0; i < samples->size(); ++i) {
        Seed pipe_seed = trial_seed.derive(1000003 + i);
        PipelineResult pr = run_pipeline((*samples)[i], cfg, pipe_seed);
        if (pr.registration_fallback) ++tr.registration_fallbacks;
        records.push_back({std::move(pr.preds), std::move(pr.gts)});
    }
    tr.eval = metrics::evaluate(records);
    return tr;
}

void aggregate_metric(Report& rep, const std::string& name,
                      const std::vector<double>& values) {
    double mean = 0;
    for (double v : values) mean += v;
    mean /= values.size();
    double var = 0;
    if (values.size() > 1) {
        for (double v : values) var += (v - mean) * (v - mean);
        var /= (values.size() - 1);
    }
    rep.aggregate[name] = {mean, std::sqrt(var)};
}

}  // namespace

Report run_experiment(const ExperimentConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<dataset::PairedSample> manifest_samples;
    if (cfg.dataset.use_manifest)
        manifest_samples = dataset::load_manifest(cfg.dataset.manifest);

    Seed base{cfg.base_seed};
    int k = cfg.repeats;
    std::vector<TrialResult> trials(k);
    std::vector<std::string> failures(k);

    int workers = std::min(resolve_threads(cfg.threads), k);
    std::atomic<int> next_trial{0};
    auto worker = [&]() {
        for (;;) {
            int i = next_trial.fetch_add(1);
            if (i >= k) return;
            try {
                trials[i] = run_trial(cfg, manifest_samples, base.derive(i));
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (int i = 0; i < k; ++i)
        if (!failures[i].empty())
            throw Error("TrialFailed", "trial " + std::to_string(i) + ": " + failures[i]);

    Report rep;
    rep.config_echo = config_to_json(cfg);
    // worker count influences scheduling only, never results; keeping it out
    // of the echo lets reports stay byte-identical across thread settings
    rep.config_echo.erase("threads");
    rep.seed = cfg.base_seed;
    rep.trials = std::move(trials);
    for (const auto& tr : rep.trials) rep.registration_fallbacks += tr.registration_fallbacks;

    std::vector<double> v;
    auto collect = [&](auto getter) {
        v.clear();
        for (const auto& tr : rep.trials) v.push_back(getter(tr.eval));
        return v;
    };
    if (cfg.metric_map) {
        aggregate_metric(rep, "map50", collect([](const auto& e) { return e.map50; }));
        aggregate_metric(rep, "map_coco", collect([](const auto& e) { return e.map_coco; }));
    }
    if (cfg.metric_lamr)
        aggregate_metric(rep, "lamr", collect([](const auto& e) { return e.lamr; }));

    rep.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

nlohmann::json Report::to_json(bool include_timing) const {
    json jt = json::array();
    for (const auto& tr : trials) {
        json e{{"map50", tr.eval.map50},
               {"map_coco", tr.eval.map_coco},
               {"lamr", tr.eval.lamr},
               {"registration_fallbacks", tr.registration_fallbacks}};
        json pc = json::object();
        for (const auto& [cls, ap] : tr.eval.per_class_ap) pc[std::to_string(cls)] = ap;
        e["per_class_ap50"] = pc;
        jt.push_back(e);
    }
    json agg = json::object();
    for (const auto& [name, ms] : aggregate)
        agg[name] = {{"mean", ms.first}, {"std", ms.second}};
    json out{{"schema_version", kReportSchemaVersion},
             {"tool_version", kToolVersion},
             {"config", config_echo},
             {"seed", seed},
             {"trials", jt},
             {"aggregate", agg},
             {"registration_fallbacks", registration_fallbacks}};
    if (include_timing) out["wall_clock_seconds"] = wall_clock_seconds;
    return out;
}

std::string Report::to_csv() const {
    std::ostringstream os;
    os << "trial,map50,map_coco,lamr,registration_fallbacks\n";
    for (size_t i = 0; i < trials.size(); ++i) {
        const auto& e = trials[i].eval;
        os << i << ',' << e.map50 << ',' << e.map_coco << ',' << e.lamr << ','
           << trials[i].registration_fallbacks << '\n';
    }
    return os.str();
}

// ---- ablation -------------------------------------------------------------

namespace {

json* resolve_path(json& root, const std::string& dotted) {
    json* node = &root;
    std::string cur;
    std::istringstream in(dotted);
    while (std::getline(in, cur, '.')) {
        if (!node->is_object() || !node->contains(cur)) return nullptr;
        node = &(*node)[cur];
    }
    return node;
}

double metric_mean(const Report& r, const std::string& name) {
    auto it = r.aggregate.find(name);
    return it == r.aggregate.end() ? 0.0 : it->second.first;
}

}  // namespace

AblationResult ablation_grid(const nlohmann::json& base_cfg,
                             const std::vector<AblationAxis>& axes) {
    if (axes.empty()) throw Error("ConfigError", "ablation needs at least one axis");
    {
        json probe = base_cfg;
        for (const auto& ax : axes)
            if (!resolve_path(probe, ax.field))
                throw Error("InvalidOverride", "no such config field '" + ax.field + "'");
    }

    AblationResult out;
    out.baseline = run_experiment(config_from_json(base_cfg));

    // Cartesian product in odometer order, then rows sorted by key.
    std::vector<size_t> idx(axes.size(), 0);
    std::vector<std::pair<std::string, json>> combos;  // key, config
    for (;;) {
        json cfg = base_cfg;
        std::vector<std::string> parts;
        for (size_t a = 0; a < axes.size(); ++a) {
            *resolve_path(cfg, axes[a].field) = axes[a].values[idx[a]];
            parts.push_back(axes[a].field + "=" + axes[a].values[idx[a]].dump());
        }
        std::sort(parts.begin(), parts.end());
        std::string key;
        for (const auto& p : parts) key += (key.empty() ? "" : ",") + p;
        combos.emplace_back(key, cfg);

        size_t a = 0;
        while (a < axes.size() && ++idx[a] == axes[a].values.size()) idx[a++] = 0;
        if (a == axes.size()) break;
    }
    std::sort(combos.begin(), combos.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });

    for (const auto& [key, cfg] : combos) {
        Report rep = run_experiment(config_from_json(cfg));
        AblationRow row;
        row.key = key;
        for (const auto& [name, ms] : rep.aggregate) {
            row.metric_means[name] = ms.first;
            row.deltas[name] = ms.first - metric_mean(out.baseline, name);
        }
        out.rows.push_back(std::move(row));
        out.reports.push_back(std::move(rep));
    }
    return out;
}

nlohmann::json AblationResult::to_json(bool include_timing) const {
    json rows_j = json::array();
    for (const auto& r : rows) {
        json means = json::object(), deltas_j = json::object();
        for (const auto& [k, v] : r.metric_means) means[k] = v;
        for (const auto& [k, v] : r.deltas) deltas_j[k] = v;
        rows_j.push_back({{"key", r.key}, {"means", means}, {"delta", deltas_j}});
    }
    json reports_j = json::array();
    for (const auto& r : reports) reports_j.push_back(r.to_json(include_timing));
    return {{"schema_version", kReportSchemaVersion},
            {"baseline", baseline.to_json(include_timing)},
            {"rows", rows_j},
            {"reports", reports_j}};
}

std::string AblationResult::table_csv() const {
    std::ostringstream os;
    os << "key";
    std::vector<std::string> names;
    if (!rows.empty())
        for (const auto& [k, v] : rows.front().metric_means) names.push_back(k);
    for (const auto& n : names) os << ',' << n << ",delta_" << n;
    os << '\n';
    for (const auto& r : rows) {
        os << '"' << r.key << '"';
        for (const auto& n : names)
            os << ',' << r.metric_means.at(n) << ',' << r.deltas.at(n);
        os << '\n';
    }
    return os.str();
}

}  // namespace harness
}  // namespace msbench
