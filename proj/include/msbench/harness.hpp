#ifndef MSBENCH_HARNESS_HPP
#define MSBENCH_HARNESS_HPP

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "msbench/core.hpp"
#include "msbench/dataset.hpp"
#include "msbench/decision_fusion.hpp"
#include "msbench/metrics.hpp"

namespace msbench {
namespace harness {

inline constexpr const char* kToolVersion = "msbench 0.1.0";
inline constexpr int kReportSchemaVersion = 1;

// ---- baseline detector ----------------------------------------------------

struct BaselineDetectorConfig {
    std::vector<double> channel_weights;  // empty = uniform mean
    double sigma = 1.0;                   // Gaussian smoothing, 0 disables
    double threshold = 0.55;              // in (0,1)
    double min_area = 9.0;                // px^2
    int max_detections = 50;
};

/// Channel projection -> Gaussian smooth -> threshold -> 4-connected
/// components -> boxes. Score is the mean smoothed intensity of the
/// component; class is 1 (rounded) when the component fills under 88% of
/// its box, else 0 (rectangular).
DetectionSet baseline_detect(const Image& image, const BaselineDetectorConfig& cfg);

// ---- experiment configuration ---------------------------------------------

enum class FusionMode { RgbOnly, TirOnly, Pixel, Feature, Decision };
FusionMode fusion_mode_from_name(const std::string& s);
const char* fusion_mode_name(FusionMode m);

struct DatasetSettings {
    bool use_manifest = false;
    std::string manifest;
    dataset::SynthConfig synth;
    int count = 8;  // scenes per trial (synth source)
};

struct AugmentationSettings {
    std::string mode = "none";  // none | synchronized | complementary
    std::vector<std::string> rgb_ops, tir_ops;
    double gain_rgb = 0.0, gain_tir = 0.0;
};

struct RegistrationSettings {
    std::string method = "none";  // none | loftr_style | superfusion_style
    std::string phase = "test_side";
    Modality reference = Modality::RGB;
};

struct FusionSettings {
    FusionMode mode = FusionMode::Decision;
    std::string wiring = "B";      // feature mode: B | I | N | I+N
    std::string branches = "R+T";  // feature mode: R+T | R+R | T+T
    int feature_pool = 4;          // spatial pooling factor before attention
    decision_fusion::FusionPolicy policy;
};

struct ExperimentConfig {
    DatasetSettings dataset;
    AugmentationSettings augmentation;
    RegistrationSettings registration;
    BaselineDetectorConfig detector_rgb, detector_tir;
    FusionSettings fusion;
    bool metric_map = true, metric_lamr = true;
    int repeats = 20;
    uint64_t base_seed = 0;
    bool include_timing = false;  // wall clock is excluded by default so
                                  // reports stay byte-identical across runs
    int threads = 0;              // 0 = MSBENCH_THREADS or 1
};

/// Strict conversion: unknown keys anywhere raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Reads .toml or .json by extension and returns the JSON form.
nlohmann::json parse_config_file(const std::string& path);

/// Minimal TOML reader covering sections, dotted keys, strings, numbers,
/// booleans, flat arrays, and # comments.
nlohmann::json toml_to_json(const std::string& text);

// ---- pipeline and experiments ---------------------------------------------

struct PipelineResult {
    DetectionSet preds;
    std::vector<metrics::GroundTruth> gts;
    bool registration_fallback = false;
};

PipelineResult run_pipeline(const dataset::PairedSample& sample, const ExperimentConfig& cfg,
                            Seed seed);

struct TrialResult {
    metrics::EvalResult eval;
    int registration_fallbacks = 0;
};

struct Report {
    nlohmann::json config_echo;
    uint64_t seed = 0;
    std::vector<TrialResult> trials;
    // metric -> (mean, sample std over trials)
    std::map<std::string, std::pair<double, double>> aggregate;
    int registration_fallbacks = 0;
    double wall_clock_seconds = 0;

    nlohmann::json to_json(bool include_timing) const;
    std::string to_csv() const;  // one row per trial
};

Report run_experiment(const ExperimentConfig& cfg);

struct AblationAxis {
    std::string field;  // dotted path into the config JSON
    std::vector<nlohmann::json> values;
};

struct AblationRow {
    std::string key;  // "field=value,..." sorted by field
    std::map<std::string, double> metric_means;
    std::map<std::string, double> deltas;  // vs the base-config run
};

struct AblationResult {
    std::vector<AblationRow> rows;
    std::vector<Report> reports;  // aligned with rows
    Report baseline;
    nlohmann::json to_json(bool include_timing) const;
    std::string table_csv() const;
};

AblationResult ablation_grid(const nlohmann::json& base_cfg,
                             const std::vector<AblationAxis>& axes);

/// --threads N > MSBENCH_THREADS > 1.
int resolve_threads(int requested);

}  // namespace harness
}  // namespace msbench

#endif
