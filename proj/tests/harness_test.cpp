#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <string>

#include "msbench/harness.hpp"

using namespace msbench;
using namespace msbench::harness;
using nlohmann::json;

TEST_CASE("toml_to_json basic forms") {
    std::string text =
        "# comment line\n"
        "repeats = 3\n"
        "base_seed = 42\n"
        "[dataset]\n"
        "count = 4\n"
        "[dataset.synth]\n"
        "height = 64\n"
        "width = 64\n"
        "illumination = 0.5\n"
        "[augmentation]\n"
        "mode = \"complementary\"\n"
        "rgb_ops = [\"clahe\", \"light_enhance\"]\n"
        "[fusion]\n"
        "mode = \"decision\"\n";
    json j = toml_to_json(text);
    CHECK(j["repeats"] == 3);
    CHECK(j["base_seed"] == 42);
    CHECK(j["dataset"]["count"] == 4);
    CHECK(j["dataset"]["synth"]["height"] == 64);
    CHECK(j["dataset"]["synth"]["illumination"] == doctest::Approx(0.5));
    CHECK(j["augmentation"]["mode"] == "complementary");
    REQUIRE(j["augmentation"]["rgb_ops"].size() == 2);
    CHECK(j["augmentation"]["rgb_ops"][1] == "light_enhance");
    CHECK(j["fusion"]["mode"] == "decision");
}

TEST_CASE("toml_to_json booleans, dotted keys, and errors") {
    json j = toml_to_json("include_timing = true\ndataset.count = 7\n");
    CHECK(j["include_timing"] == true);
    CHECK(j["dataset"]["count"] == 7);

    CHECK_THROWS_WITH_AS(toml_to_json("broken line without equals\n"),
                         doctest::Contains("ParseError"), Error);
    // the error names the offending line
    try {
        toml_to_json("ok = 1\nbad line\n");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
}

TEST_CASE("config json round trip and unknown keys") {
    ExperimentConfig cfg;
    cfg.repeats = 5;
    cfg.base_seed = 123;
    cfg.dataset.count = 3;
    cfg.dataset.synth.illumination = 0.2;
    cfg.augmentation.mode = "complementary";
    cfg.augmentation.rgb_ops = {"clahe"};
    cfg.fusion.mode = FusionMode::Feature;
    cfg.fusion.wiring = "I+N";
    json j = config_to_json(cfg);
    ExperimentConfig back = config_from_json(j);
    CHECK(config_to_json(back) == j);
    CHECK(back.repeats == 5);
    CHECK(back.fusion.mode == FusionMode::Feature);
    CHECK(back.fusion.wiring == "I+N");

    json bad = j;
    bad["no_such_key"] = 1;
    CHECK_THROWS_WITH_AS(config_from_json(bad), doctest::Contains("ConfigError"), Error);
    json bad2 = j;
    bad2["dataset"]["synht"] = json::object();
    CHECK_THROWS_WITH_AS(config_from_json(bad2), doctest::Contains("ConfigError"), Error);
}

TEST_CASE("fusion mode names round trip") {
    for (FusionMode m : {FusionMode::RgbOnly, FusionMode::TirOnly, FusionMode::Pixel,
                         FusionMode::Feature, FusionMode::Decision})
        CHECK(fusion_mode_from_name(fusion_mode_name(m)) == m);
    CHECK_THROWS_AS(fusion_mode_from_name("laser"), Error);
}

TEST_CASE("baseline_detect finds a bright square") {
    Image im(48, 48, 3, 0.1f);
    for (int y = 10; y < 22; ++y)
        for (int x = 14; x < 26; ++x)
            for (int c = 0; c < 3; ++c) im.at(y, x, c) = 0.95f;
    BaselineDetectorConfig cfg;
    DetectionSet dets = baseline_detect(im, cfg);
    REQUIRE(dets.detections.size() == 1);
    const Detection& d = dets.detections[0];
    CHECK(d.box.x1 <= 15.0f);
    CHECK(d.box.x2 >= 25.0f);
    CHECK(d.box.y1 <= 11.0f);
    CHECK(d.box.y2 >= 21.0f);
    CHECK(d.score > 0.5f);
    CHECK(d.class_id == 0);  // filled rectangle

    // empty image yields nothing
    CHECK(baseline_detect(Image(48, 48, 3, 0.1f), cfg).detections.empty());
}

TEST_CASE("run_pipeline rgb_only matches the bare detector") {
    dataset::SynthConfig sc;
    sc.seed = 5;
    dataset::PairedSample s = dataset::synth_scene(sc);
    ExperimentConfig cfg;
    cfg.fusion.mode = FusionMode::RgbOnly;
    PipelineResult res = run_pipeline(s, cfg, Seed{1});
    DetectionSet direct = baseline_detect(s.rgb, cfg.detector_rgb);
    REQUIRE(res.preds.detections.size() == direct.detections.size());
    for (size_t i = 0; i < direct.detections.size(); ++i)
        CHECK(res.preds.detections[i].score == direct.detections[i].score);
    CHECK(res.gts.size() == s.boxes.size());
    CHECK_FALSE(res.registration_fallback);
}

TEST_CASE("run_experiment aggregates and determinism") {
    ExperimentConfig cfg;
    cfg.repeats = 1;
    cfg.dataset.count = 2;
    cfg.dataset.synth.height = 64;
    cfg.dataset.synth.width = 64;
    cfg.fusion.mode = FusionMode::RgbOnly;
    cfg.base_seed = 77;

    SUBCASE("K=1 aggregate equals the single trial") {
        Report rep = run_experiment(cfg);
        REQUIRE(rep.trials.size() == 1);
        CHECK(rep.aggregate.at("map50").first ==
              doctest::Approx(rep.trials[0].eval.map50).epsilon(1e-12));
        CHECK(rep.aggregate.at("map50").second == doctest::Approx(0.0));
    }

    SUBCASE("identical config and seed give byte-identical reports") {
        cfg.repeats = 3;
        std::string a = run_experiment(cfg).to_json(false).dump();
        std::string b = run_experiment(cfg).to_json(false).dump();
        CHECK(a == b);
    }

    SUBCASE("reports agree across thread counts") {
        cfg.repeats = 4;
        cfg.threads = 1;
        std::string one = run_experiment(cfg).to_json(false).dump();
        cfg.threads = 8;
        std::string eight = run_experiment(cfg).to_json(false).dump();
        CHECK(one == eight);
    }

    SUBCASE("scene randomization produces spread across trials") {
        cfg.repeats = 8;
        Report rep = run_experiment(cfg);
        bool all_equal = true;
        for (const TrialResult& t : rep.trials)
            if (t.eval.map50 != rep.trials[0].eval.map50) all_equal = false;
        CHECK_FALSE(all_equal);
    }
}

TEST_CASE("report csv has one row per trial") {
    ExperimentConfig cfg;
    cfg.repeats = 3;
    cfg.dataset.count = 2;
    cfg.dataset.synth.height = 64;
    cfg.dataset.synth.width = 64;
    cfg.fusion.mode = FusionMode::RgbOnly;
    Report rep = run_experiment(cfg);
    std::string csv = rep.to_csv();
    int rows = 0;
    for (char c : csv)
        if (c == '\n') ++rows;
    CHECK(rows == 4);  // header + 3 trials
}

TEST_CASE("ablation_grid baseline delta is zero") {
    ExperimentConfig cfg;
    cfg.repeats = 2;
    cfg.dataset.count = 2;
    cfg.dataset.synth.height = 64;
    cfg.dataset.synth.width = 64;
    cfg.fusion.mode = FusionMode::RgbOnly;
    json base = config_to_json(cfg);

    AblationAxis axis;
    axis.field = "dataset.synth.illumination";
    axis.values = {json(1.0), json(0.3)};
    AblationResult res = ablation_grid(base, {axis});
    REQUIRE(res.rows.size() == 2);
    // the row matching the base config has delta exactly 0
    bool found_zero = false;
    for (const AblationRow& row : res.rows)
        if (row.deltas.count("map50") && row.deltas.at("map50") == 0.0 &&
            row.key.find("illumination=1") != std::string::npos)
            found_zero = true;
    CHECK(found_zero);

    CHECK_THROWS_WITH_AS(
        ablation_grid(base, {AblationAxis{"dataset.synth.no_field", {json(1)}}}),
        doctest::Contains("InvalidOverride"), Error);
}

TEST_CASE("ablation_grid rows match individual runs") {
    ExperimentConfig cfg;
    cfg.repeats = 2;
    cfg.dataset.count = 2;
    cfg.dataset.synth.height = 64;
    cfg.dataset.synth.width = 64;
    cfg.fusion.mode = FusionMode::RgbOnly;
    json base = config_to_json(cfg);

    AblationAxis axis;
    axis.field = "dataset.synth.illumination";
    axis.values = {json(1.0), json(0.4)};
    AblationResult res = ablation_grid(base, {axis});
    REQUIRE(res.reports.size() == 2);
    for (size_t i = 0; i < res.rows.size(); ++i) {
        json override_cfg = base;
        double v = res.rows[i].key.find("=1") != std::string::npos ? 1.0 : 0.4;
        override_cfg["dataset"]["synth"]["illumination"] = v;
        Report manual = run_experiment(config_from_json(override_cfg));
        CHECK(res.reports[i].to_json(false).dump() == manual.to_json(false).dump());
    }
}

TEST_CASE("resolve_threads precedence") {
    unsetenv("MSBENCH_THREADS");
    CHECK(resolve_threads(0) == 1);
    CHECK(resolve_threads(6) == 6);
    setenv("MSBENCH_THREADS", "3", 1);
    CHECK(resolve_threads(0) == 3);
    CHECK(resolve_threads(2) == 2);  // explicit request wins
    setenv("MSBENCH_THREADS", "junk", 1);
    CHECK(resolve_threads(0) == 1);
    unsetenv("MSBENCH_THREADS");
}

TEST_CASE("parse_config_file dispatches by extension") {
    const std::string toml_path = "/tmp/msbench_harness_cfg.toml";
    const std::string json_path = "/tmp/msbench_harness_cfg.json";
    {
        FILE* f = fopen(toml_path.c_str(), "w");
        fputs("repeats = 2\n[fusion]\nmode = \"rgb_only\"\n", f);
        fclose(f);
        FILE* g = fopen(json_path.c_str(), "w");
        fputs("{\"repeats\": 2, \"fusion\": {\"mode\": \"rgb_only\"}}", g);
        fclose(g);
    }
    json a = parse_config_file(toml_path);
    json b = parse_config_file(json_path);
    CHECK(a["repeats"] == b["repeats"]);
    CHECK(a["fusion"]["mode"] == b["fusion"]["mode"]);
    remove(toml_path.c_str());
    remove(json_path.c_str());
}
