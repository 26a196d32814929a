#ifndef MSBENCH_DECISION_FUSION_HPP
#define MSBENCH_DECISION_FUSION_HPP

#include <string>
#include <vector>

#include "msbench/core.hpp"

namespace msbench {
namespace decision_fusion {

enum class LocalMode { SimpleAverage, ConfidenceWeighted, MaxSelection };

LocalMode local_mode_from_name(const std::string& s);

struct FusionPolicy {
    double epsilon = 1e-6;
    LocalMode local_mode = LocalMode::ConfidenceWeighted;
    double kappa_rgb = 1.0;
    double kappa_tir = 1.0;
    std::vector<double> theta;  // empty = uniform 1/N
    double iou_match = 0.5;
    double unmatched_penalty = 1.0;
    double nms_iou = 0.5;
    double score_floor = 1e-6;  // boxes below this score are dropped
};

float iou(const Box& a, const Box& b);

/// Min-max normalized confidences; single element -> 1, constant set -> all 1.
std::vector<double> confidence_scores(const DetectionSet& m);

/// Cross-modality greedy IoU pairing + Eq.-style confidence-weighted merge.
DetectionSet confidence_weighted_fuse(const DetectionSet& m_rgb, const DetectionSet& m_tir,
                                      const FusionPolicy& policy);

/// Local fusion with kappa-scaled scores and one of the three modes.
DetectionSet local_fuse(const DetectionSet& m_rgb, const DetectionSet& m_tir,
                        const FusionPolicy& policy);

/// theta-weighted concatenation of per-region local results, then NMS.
DetectionSet global_fuse(const std::vector<DetectionSet>& locals, const FusionPolicy& policy);

/// Greedy per-class NMS; ties by smaller area, then input order.
DetectionSet nms(const DetectionSet& dets, double iou_threshold);

}  // namespace decision_fusion
}  // namespace msbench

#endif
