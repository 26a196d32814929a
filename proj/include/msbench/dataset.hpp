#ifndef MSBENCH_DATASET_HPP
#define MSBENCH_DATASET_HPP

#include <optional>
#include <string>
#include <vector>

#include "msbench/augmentation.hpp"
#include "msbench/core.hpp"

namespace msbench {
namespace dataset {

struct SceneMeta {
    uint64_t seed = 0;
    std::optional<PlanarTransform> injected;  // RGB frame -> TIR frame, when misaligned
    double illumination = 1.0;
};

struct PairedSample {
    Image rgb;
    Image tir;
    std::vector<augmentation::LabeledBox> boxes;  // RGB-frame ground truth
    SceneMeta meta;
};

enum class MisalignKind { None, Affine };

struct MisalignConfig {
    MisalignKind kind = MisalignKind::None;
    double max_rot_deg = 10.0;
    double max_trans_px = 5.0;
};

struct SynthConfig {
    int height = 96;
    int width = 96;
    int min_objects = 2;
    int max_objects = 5;
    double min_size = 8.0;   // object extent, px
    double max_size = 20.0;
    double illumination = 1.0;      // 1 = day
    double thermal_contrast = 0.8;  // object-vs-background lift in TIR
    MisalignConfig misalign;
    double clutter = 0.3;  // fine-scale shared background detail
    uint64_t seed = 0;
};

/// JSON-Lines manifest, one record per line:
///   {"rgb": path, "tir": path, "boxes": [[x1,y1,x2,y2,class], ...]}
/// Paths resolve relative to the manifest directory. Out-of-frame boxes are
/// clipped when clip_boxes is set, otherwise rejected.
std::vector<PairedSample> load_manifest(const std::string& path, bool clip_boxes = true);

/// Renders a paired scene over a shared smooth background. Object color
/// contrast in RGB scales with illumination; TIR contrast does not. With
/// affine misalignment the TIR frame is warped by a seeded transform stored
/// in meta. Random draws never branch on illumination, so scene geometry is
/// identical across illumination levels at a fixed seed.
PairedSample synth_scene(const SynthConfig& cfg);

/// count scenes under seeds derived from (base_seed, index); index order.
std::vector<PairedSample> synth_batch(const SynthConfig& cfg, int count, Seed base_seed);

}  // namespace dataset
}  // namespace msbench

#endif
