#ifndef MSBENCH_METRICS_HPP
#define MSBENCH_METRICS_HPP

#include <map>
#include <utility>
#include <vector>

#include "msbench/core.hpp"

namespace msbench {
namespace metrics {

struct GroundTruth {
    Box box;
    int class_id = 0;
};

/// Predictions/GTs for one image.
struct ImageRecord {
    DetectionSet preds;
    std::vector<GroundTruth> gts;
};

struct EvalResult {
    std::map<int, double> per_class_ap;  // at IoU 0.5
    double map50 = 0;
    double map_coco = 0;  // mean over IoU 0.50:0.05:0.95
    double lamr = 0;
    std::vector<std::pair<double, double>> pr_points;       // (recall, precision)
    std::vector<std::pair<double, double>> fppi_mr_points;  // (fppi, miss rate)
};

float iou(const Box& a, const Box& b);

/// Greedy matching per image: by descending score, each pred claims the
/// highest-IoU unmatched same-class GT with IoU >= thresh. Returns one
/// TP(true)/FP(false) flag per prediction, in input order.
std::vector<bool> match_detections(const DetectionSet& preds,
                                   const std::vector<GroundTruth>& gts, double iou_thresh);

/// All-points-interpolated AP over a dataset of image records, one class.
/// No GTs and no preds -> 1 (documented convention); no GTs + preds -> 0.
double average_precision(const std::vector<ImageRecord>& records, int class_id,
                         double iou_thresh,
                         std::vector<std::pair<double, double>>* pr_points = nullptr);

struct MeanApResult {
    std::map<int, double> per_class_ap50;
    double map50 = 0;
    double map_coco = 0;
};

MeanApResult mean_ap(const std::vector<ImageRecord>& records,
                     bool skip_absent_classes = false);

/// Caltech-style log-average miss rate: miss rate sampled at 9 log-spaced
/// FPPI points in [1e-2, 1], floored at 1e-4, geometric mean.
double log_average_miss_rate(const std::vector<ImageRecord>& records,
                             std::vector<std::pair<double, double>>* curve = nullptr);

EvalResult evaluate(const std::vector<ImageRecord>& records);

}  // namespace metrics
}  // namespace msbench

#endif
