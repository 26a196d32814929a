// msbench command-line front end.
//
// Exit codes: 0 ok, 2 configuration/usage error, 3 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msbench/augmentation.hpp"
#include "msbench/dataset.hpp"
#include "msbench/harness.hpp"
#include "msbench/image_io.hpp"
#include "msbench/pixel_fusion.hpp"
#include "msbench/registration.hpp"

using nlohmann::json;
using namespace msbench;

namespace {

bool is_config_error(const Error& e) {
    const std::string& k = e.kind();
    return k == "ConfigError" || k == "BadConfig" || k == "ParseError" ||
           k == "UnknownOp" || k == "InvalidOverride" || k == "MissingFile";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot write " + path);
    out << text;
}

harness::ExperimentConfig load_experiment_config(const std::string& path,
                                                 std::optional<uint64_t> seed, int threads) {
    json j = harness::parse_config_file(path);
    harness::ExperimentConfig cfg = harness::config_from_json(j);
    if (seed) cfg.base_seed = *seed;
    if (threads > 0) cfg.threads = threads;
    return cfg;
}

int cmd_run(const std::string& config, std::optional<uint64_t> seed, const std::string& out,
            const std::string& csv, int threads) {
    harness::ExperimentConfig cfg = load_experiment_config(config, seed, threads);
    harness::Report rep = harness::run_experiment(cfg);
    std::string text = rep.to_json(cfg.include_timing).dump(2) + "\n";
    if (out.empty())
        std::cout << text;
    else
        write_text(out, text);
    if (!csv.empty()) write_text(csv, rep.to_csv());
    return 0;
}

int cmd_ablate(const std::string& config, std::optional<uint64_t> seed,
               const std::vector<std::string>& axis_specs, const std::string& out,
               const std::string& csv, int threads) {
    json base = harness::parse_config_file(config);
    if (seed) base["base_seed"] = *seed;
    if (threads > 0) base["threads"] = threads;

    std::vector<harness::AblationAxis> axes;
    for (const std::string& spec : axis_specs) {
        size_t eq = spec.find('=');
        if (eq == std::string::npos)
            throw Error("ConfigError", "--axis needs field=v1,v2,... got '" + spec + "'");
        harness::AblationAxis ax;
        ax.field = spec.substr(0, eq);
        std::string vals = spec.substr(eq + 1);
        size_t pos = 0;
        while (pos <= vals.size()) {
            size_t comma = vals.find(',', pos);
            std::string v =
                vals.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            if (!v.empty()) {
                json parsed;
                try {
                    parsed = json::parse(v);
                } catch (const json::exception&) {
                    parsed = v;  // bare strings stay strings
                }
                ax.values.push_back(parsed);
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (ax.values.empty())
            throw Error("ConfigError", "--axis '" + ax.field + "' has no values");
        axes.push_back(std::move(ax));
    }

    bool timing = base.value("include_timing", false);
    harness::AblationResult res = harness::ablation_grid(base, axes);
    std::string text = res.to_json(timing).dump(2) + "\n";
    if (out.empty())
        std::cout << text;
    else
        write_text(out, text);
    if (!csv.empty()) write_text(csv, res.table_csv());
    return 0;
}

int cmd_fuse(const std::string& rgb_path, const std::string& tir_path,
             const std::string& method, uint64_t seed, const std::string& out) {
    Image rgb = load_image(rgb_path);
    Image tir = load_image(tir_path);
    validate_pair(rgb, tir);
    Image fused;
    if (method == "pixel") {
        auto p = pixel_fusion::make_default_params(rgb.height, rgb.width, Seed{seed});
        fused = pixel_fusion::pixel_fuse(rgb, tir, p, Seed{seed}.derive(1));
    } else {
        throw Error("ConfigError", "fuse supports method 'pixel', got '" + method + "'");
    }
    save_image(fused, out);
    return 0;
}

int cmd_register(const std::string& rgb_path, const std::string& tir_path,
                 const std::string& method, const std::string& reference,
                 const std::string& out_rgb, const std::string& out_tir,
                 const std::string& transform_out) {
    Image rgb = load_image(rgb_path);
    Image tir = load_image(tir_path);
    registration::RegisterConfig cfg;
    cfg.method = registration::method_from_name(method);
    cfg.reference = modality_from_name(reference);
    registration::RegisterResult res = registration::register_pair(rgb, tir, cfg);
    if (!out_rgb.empty()) save_image(res.aligned_rgb, out_rgb);
    if (!out_tir.empty()) save_image(res.aligned_tir, out_tir);
    if (!transform_out.empty()) {
        json j;
        j["method"] = method;
        j["reference"] = reference;
        if (res.transform) {
            j["transform"] = res.transform->m;
            j["kind"] =
                res.transform->kind == TransformKind::Affine ? "affine" : "homography";
        }
        if (res.flow) j["flow_dims"] = {res.flow->height, res.flow->width};
        write_text(transform_out, j.dump(2) + "\n");
    }
    return 0;
}

int cmd_augment(const std::string& rgb_path, const std::string& tir_path,
                const std::string& mode, const std::vector<std::string>& rgb_ops,
                const std::vector<std::string>& tir_ops, double gain_rgb, double gain_tir,
                uint64_t seed, const std::string& out_rgb, const std::string& out_tir) {
    augmentation::Sample s;
    s.rgb = load_image(rgb_path);
    s.tir = load_image(tir_path);
    augmentation::EnhancePolicy pol;
    if (mode == "synchronized")
        pol.mode = augmentation::EnhanceMode::Synchronized;
    else if (mode == "complementary")
        pol.mode = augmentation::EnhanceMode::Complementary;
    else
        throw Error("ConfigError", "augment mode must be synchronized or complementary");
    pol.rgb_ops = rgb_ops;
    pol.tir_ops = tir_ops;
    pol.gain_rgb = gain_rgb;
    pol.gain_tir = gain_tir;
    augmentation::Sample res = augmentation::complementary_enhance(s, pol, Seed{seed});
    save_image(res.rgb, out_rgb);
    save_image(res.tir, out_tir);
    return 0;
}

int cmd_evaluate(const std::string& detections_path, const std::string& manifest_path,
                 const std::string& out) {
    auto samples = dataset::load_manifest(manifest_path);
    std::ifstream in(detections_path);
    if (!in) throw Error("MissingFile", "cannot open " + detections_path);
    json dets;
    try {
        in >> dets;
    } catch (const json::exception& e) {
        throw Error("ParseError", std::string("detections: ") + e.what());
    }
    if (!dets.is_array() || dets.size() != samples.size())
        throw Error("ParseError", "detections must be one array per manifest record");

    std::vector<metrics::ImageRecord> records;
    for (size_t i = 0; i < samples.size(); ++i) {
        metrics::ImageRecord rec;
        for (const auto& jd : dets[i]) {
            if (!jd.is_array() || jd.size() < 5)
                throw Error("ParseError", "detection needs [x1,y1,x2,y2,score,class]");
            Detection d;
            d.box = {jd[0].get<float>(), jd[1].get<float>(), jd[2].get<float>(),
                     jd[3].get<float>()};
            d.score = jd[4].get<float>();
            d.class_id = jd.size() > 5 ? jd[5].get<int>() : 0;
            rec.preds.detections.push_back(d);
        }
        for (const auto& b : samples[i].boxes) rec.gts.push_back({b.box, b.class_id});
        records.push_back(std::move(rec));
    }
    metrics::EvalResult ev = metrics::evaluate(records);
    json pc = json::object();
    for (const auto& [cls, ap] : ev.per_class_ap) pc[std::to_string(cls)] = ap;
    json j{{"map50", ev.map50}, {"map_coco", ev.map_coco}, {"lamr", ev.lamr},
           {"per_class_ap50", pc}};
    std::string text = j.dump(2) + "\n";
    if (out.empty())
        std::cout << text;
    else
        write_text(out, text);
    return 0;
}

int cmd_synth(const std::string& out_dir, int count, uint64_t seed,
              const std::string& config) {
    dataset::SynthConfig scfg;
    if (!config.empty()) {
        json j = harness::parse_config_file(config);
        json wrapped{{"dataset", {{"synth", j}, {"count", 1}}}};
        scfg = harness::config_from_json(wrapped).dataset.synth;
    }
    std::filesystem::create_directories(out_dir);
    auto samples = dataset::synth_batch(scfg, count, Seed{seed});
    std::ostringstream manifest;
    for (size_t i = 0; i < samples.size(); ++i) {
        std::string rgb_name = "scene_" + std::to_string(i) + "_rgb.png";
        std::string tir_name = "scene_" + std::to_string(i) + "_tir.png";
        save_image(samples[i].rgb, out_dir + "/" + rgb_name);
        save_image(samples[i].tir, out_dir + "/" + tir_name);
        json boxes = json::array();
        for (const auto& b : samples[i].boxes)
            boxes.push_back({b.box.x1, b.box.y1, b.box.x2, b.box.y2, b.class_id});
        json rec{{"rgb", rgb_name}, {"tir", tir_name}, {"boxes", boxes}};
        manifest << rec.dump() << "\n";
    }
    write_text(out_dir + "/manifest.jsonl", manifest.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multispectral detection benchmark"};
    app.require_subcommand(1);

    std::string config, out, csv;
    std::optional<uint64_t> seed;
    int threads = 0;

    auto* run = app.add_subcommand("run", "Run a seeded experiment from a config file");
    run->add_option("--config", config)->required();
    run->add_option("--seed", seed);
    run->add_option("--out", out);
    run->add_option("--csv", csv);
    run->add_option("--threads", threads);

    std::vector<std::string> axis_specs;
    auto* ablate = app.add_subcommand("ablate", "Run a grid of config overrides");
    ablate->add_option("--config", config)->required();
    ablate->add_option("--axis", axis_specs, "field=v1,v2,... (repeatable)")->required();
    ablate->add_option("--seed", seed);
    ablate->add_option("--out", out);
    ablate->add_option("--csv", csv);
    ablate->add_option("--threads", threads);

    std::string rgb_path, tir_path, method = "pixel", reference = "RGB";
    uint64_t raw_seed = 0;
    auto* fuse = app.add_subcommand("fuse", "Fuse one RGB/TIR pair into an image");
    fuse->add_option("--rgb", rgb_path)->required();
    fuse->add_option("--tir", tir_path)->required();
    fuse->add_option("--method", method, "pixel");
    fuse->add_option("--seed", raw_seed);
    fuse->add_option("--out", out)->required();

    std::string out_rgb, out_tir, transform_out, reg_method = "loftr_style";
    auto* reg = app.add_subcommand("register", "Align one RGB/TIR pair");
    reg->add_option("--rgb", rgb_path)->required();
    reg->add_option("--tir", tir_path)->required();
    reg->add_option("--method", reg_method, "loftr_style | superfusion_style");
    reg->add_option("--reference", reference, "RGB | TIR");
    reg->add_option("--out-rgb", out_rgb);
    reg->add_option("--out-tir", out_tir);
    reg->add_option("--transform-out", transform_out);

    std::string aug_mode = "complementary";
    std::vector<std::string> rgb_ops, tir_ops;
    double gain_rgb = 0, gain_tir = 0;
    auto* aug = app.add_subcommand("augment", "Apply enhancement chains to a pair");
    aug->add_option("--rgb", rgb_path)->required();
    aug->add_option("--tir", tir_path)->required();
    aug->add_option("--mode", aug_mode, "synchronized | complementary");
    aug->add_option("--rgb-ops", rgb_ops, "clahe, random_lighting, light_enhance, noise");
    aug->add_option("--tir-ops", tir_ops);
    aug->add_option("--gain-rgb", gain_rgb);
    aug->add_option("--gain-tir", gain_tir);
    aug->add_option("--seed", raw_seed);
    aug->add_option("--out-rgb", out_rgb)->required();
    aug->add_option("--out-tir", out_tir)->required();

    std::string detections_path, manifest_path;
    auto* eval = app.add_subcommand("evaluate", "Score detections against a manifest");
    eval->add_option("--detections", detections_path)->required();
    eval->add_option("--manifest", manifest_path)->required();
    eval->add_option("--out", out);

    std::string synth_dir;
    int synth_count = 8;
    auto* synth = app.add_subcommand("synth", "Emit a synthetic dataset + manifest");
    synth->add_option("--out", synth_dir)->required();
    synth->add_option("--count", synth_count);
    synth->add_option("--seed", raw_seed);
    synth->add_option("--config", config, "synth config (toml/json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(config, seed, out, csv, threads);
        if (*ablate) return cmd_ablate(config, seed, axis_specs, out, csv, threads);
        if (*fuse) return cmd_fuse(rgb_path, tir_path, method, raw_seed, out);
        if (*reg)
            return cmd_register(rgb_path, tir_path, reg_method, reference, out_rgb, out_tir,
                                transform_out);
        if (*aug)
            return cmd_augment(rgb_path, tir_path, aug_mode, rgb_ops, tir_ops, gain_rgb,
                               gain_tir, raw_seed, out_rgb, out_tir);
        if (*eval) return cmd_evaluate(detections_path, manifest_path, out);
        if (*synth) return cmd_synth(synth_dir, synth_count, raw_seed, config);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_config_error(e) ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
