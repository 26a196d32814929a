#include "msbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "msbench/decision_fusion.hpp"

namespace msbench {
namespace metrics {

float iou(const Box& a, const Box& b) { return decision_fusion::iou(a, b); }

std::vector<bool> match_detections(const DetectionSet& preds,
                                   const std::vector<GroundTruth>& gts, double iou_thresh) {
    std::vector<size_t> order(preds.detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return preds.detections[a].score > preds.detections[b].score;
    });

    std::vector<bool> gt_used(gts.size(), false);
    std::vector<bool> tp(preds.detections.size(), false);
    for (size_t pi : order) {
        const Detection& p = preds.detections[pi];
        int best = -1;
        float best_iou = 0;
        for (size_t gi = 0; gi < gts.size(); ++gi) {
            if (gt_used[gi] || gts[gi].class_id != p.class_id) continue;
            float v = iou(p.box, gts[gi].box);
            if (v >= iou_thresh && v > best_iou) {
                best_iou = v;
                best = static_cast<int>(gi);
            }
        }
        if (best >= 0) {
            gt_used[best] = true;
            tp[pi] = true;
        }
    }
    return tp;
}

namespace {

struct ScoredFlag {
    float score;
    bool tp;
};

/// All predictions of one class across the dataset, with per-image greedy
/// TP/FP labels, sorted by descending score.
std::vector<ScoredFlag> collect_flags(const std::vector<ImageRecord>& records, int class_id,
                                      double iou_thresh, size_t* total_gts) {
    std::vector<ScoredFlag> flags;
    size_t n_gt = 0;
    for (const auto& rec : records) {
        DetectionSet cls_preds;
        for (const auto& d : rec.preds.detections)
            if (d.class_id == class_id) cls_preds.detections.push_back(d);
        std::vector<GroundTruth> cls_gts;
        for (const auto& g : rec.gts)
            if (g.class_id == class_id) cls_gts.push_back(g);
        n_gt += cls_gts.size();
        std::vector<bool> tp = match_detections(cls_preds, cls_gts, iou_thresh);
        for (size_t i = 0; i < tp.size(); ++i)
            flags.push_back({cls_preds.detections[i].score, tp[i]});
    }
    std::stable_sort(flags.begin(), flags.end(),
                     [](const ScoredFlag& a, const ScoredFlag& b) { return a.score > b.score; });
    if (total_gts) *total_gts = n_gt;
    return flags;
}

}  // namespace

double average_precision(const std::vector<ImageRecord>& records, int class_id,
                         double iou_thresh, std::vector<std::pair<double, double>>* pr_points) {
    size_t n_gt = 0;
    std::vector<ScoredFlag> flags = collect_flags(records, class_id, iou_thresh, &n_gt);
    if (n_gt == 0) return flags.empty() ? 1.0 : 0.0;
    if (flags.empty()) return 0.0;

    std::vector<double> precision(flags.size()), recall(flags.size());
    size_t tp = 0, fp = 0;
    for (size_t i = 0; i < flags.size(); ++i) {
        if (flags[i].tp)
            ++tp;
        else
            ++fp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(tp + fp);
        recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    }
    if (pr_points) {
        pr_points->clear();
        for (size_t i = 0; i < flags.size(); ++i)
            pr_points->emplace_back(recall[i], precision[i]);
    }
    // precision envelope (right-to-left running max), exact area under it
    for (size_t i = precision.size() - 1; i > 0; --i)
        precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = recall[0] * precision[0];
    for (size_t i = 1; i < flags.size(); ++i) ap += (recall[i] - recall[i - 1]) * precision[i];
    return ap;
}

MeanApResult mean_ap(const std::vector<ImageRecord>& records, bool skip_absent_classes) {
    std::set<int> classes;
    for (const auto& rec : records) {
        for (const auto& d : rec.preds.detections) classes.insert(d.class_id);
        for (const auto& g : rec.gts) classes.insert(g.class_id);
    }
    MeanApResult res;
    if (classes.empty()) {
        res.map50 = 1.0;  // empty dataset, nothing missed
        res.map_coco = 1.0;
        return res;
    }
    double sum50 = 0, sum_coco = 0;
    int counted = 0;
    for (int cls : classes) {
        bool has_gt = false, has_pred = false;
        for (const auto& rec : records) {
            for (const auto& g : rec.gts) has_gt |= g.class_id == cls;
            for (const auto& d : rec.preds.detections) has_pred |= d.class_id == cls;
        }
        if (skip_absent_classes && !has_gt && !has_pred) continue;
        double ap50 = average_precision(records, cls, 0.5);
        res.per_class_ap50[cls] = ap50;
        sum50 += ap50;
        double acc = 0;
        for (int t = 0; t < 10; ++t) acc += average_precision(records, cls, 0.5 + 0.05 * t);
        sum_coco += acc / 10.0;
        ++counted;
    }
    if (counted > 0) {
        res.map50 = sum50 / counted;
        res.map_coco = sum_coco / counted;
    }
    return res;
}

double log_average_miss_rate(const std::vector<ImageRecord>& records,
                             std::vector<std::pair<double, double>>* curve) {
    constexpr double kFloor = 1e-4;
    size_t n_images = records.size();
    if (n_images == 0) throw Error("EmptyInput", "log_average_miss_rate needs >= 1 image");

    // per-prediction TP/FP flags at IoU 0.5, class-aware, pooled over classes
    size_t n_gt = 0;
    std::vector<ScoredFlag> flags;
    for (const auto& rec : records) {
        n_gt += rec.gts.size();
        std::vector<bool> tp = match_detections(rec.preds, rec.gts, 0.5);
        for (size_t i = 0; i < tp.size(); ++i)
            flags.push_back({rec.preds.detections[i].score, tp[i]});
    }
    if (n_gt == 0) return kFloor;
    std::stable_sort(flags.begin(), flags.end(),
                     [](const ScoredFlag& a, const ScoredFlag& b) { return a.score > b.score; });

    // sweep: after each prediction (descending score) record (fppi, mr)
    std::vector<std::pair<double, double>> pts;
    size_t tp = 0, fp = 0;
    for (const auto& f : flags) {
        if (f.tp)
            ++tp;
        else
            ++fp;
        double fppi = static_cast<double>(fp) / static_cast<double>(n_images);
        double mr = 1.0 - static_cast<double>(tp) / static_cast<double>(n_gt);
        pts.emplace_back(fppi, mr);
    }
    if (curve) *curve = pts;

    double log_sum = 0;
    for (int i = 0; i < 9; ++i) {
        double ref = std::pow(10.0, -2.0 + 0.25 * i);
        // miss rate of the rightmost sweep point with fppi <= ref;
        // before any acceptable operating point the miss rate is 1
        double mr = 1.0;
        for (const auto& [fppi, m] : pts) {
            if (fppi <= ref)
                mr = m;
            else
                break;
        }
        log_sum += std::log(std::max(mr, kFloor));
    }
    return std::exp(log_sum / 9.0);
}

EvalResult evaluate(const std::vector<ImageRecord>& records) {
    EvalResult r;
    MeanApResult m = mean_ap(records);
    r.per_class_ap = m.per_class_ap50;
    r.map50 = m.map50;
    r.map_coco = m.map_coco;
    if (!records.empty()) {
        if (!m.per_class_ap50.empty())
            average_precision(records, m.per_class_ap50.begin()->first, 0.5, &r.pr_points);
        r.lamr = log_average_miss_rate(records, &r.fppi_mr_points);
    }
    return r;
}

}  // namespace metrics
}  // namespace msbench
