#include "msbench/decision_fusion.hpp"

#include <algorithm>
#include <numeric>

namespace msbench {
namespace decision_fusion {

namespace {

struct Pairing {
    // index into m_tir for each rgb detection, or -1
    std::vector<int> tir_of_rgb;
    std::vector<bool> tir_used;
};

/// Greedy cross-modality pairing: RGB boxes in descending score order each
/// claim the highest-IoU unmatched TIR box of the same class with
/// IoU >= iou_match.
Pairing pair_sets(const DetectionSet& m_rgb, const DetectionSet& m_tir, double iou_match) {
    Pairing p;
    p.tir_of_rgb.assign(m_rgb.detections.size(), -1);
    p.tir_used.assign(m_tir.detections.size(), false);

    std::vector<size_t> order(m_rgb.detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return m_rgb.detections[a].score > m_rgb.detections[b].score;
    });

    for (size_t ri : order) {
        const Detection& r = m_rgb.detections[ri];
        int best = -1;
        float best_iou = 0;
        for (size_t ti = 0; ti < m_tir.detections.size(); ++ti) {
            if (p.tir_used[ti]) continue;
            const Detection& t = m_tir.detections[ti];
            if (t.class_id != r.class_id) continue;
            float v = iou(r.box, t.box);
            if (v >= iou_match && v > best_iou) {
                best_iou = v;
                best = static_cast<int>(ti);
            }
        }
        if (best >= 0) {
            p.tir_of_rgb[ri] = best;
            p.tir_used[best] = true;
        }
    }
    return p;
}

Box weighted_box(const Box& a, const Box& b, double wa, double wb) {
    double s = wa + wb;
    if (s <= 0) {
        wa = wb = 0.5;
        s = 1.0;
    }
    Box out;
    out.x1 = static_cast<float>((wa * a.x1 + wb * b.x1) / s);
    out.y1 = static_cast<float>((wa * a.y1 + wb * b.y1) / s);
    out.x2 = static_cast<float>((wa * a.x2 + wb * b.x2) / s);
    out.y2 = static_cast<float>((wa * a.y2 + wb * b.y2) / s);
    return out;
}

float clamp_score(double s) { return static_cast<float>(s < 0 ? 0 : (s > 1 ? 1 : s)); }

DetectionSet scale_scores(const DetectionSet& m, double kappa) {
    DetectionSet out = m;
    for (auto& d : out.detections) d.score = clamp_score(kappa * d.score);
    return out;
}

}  // namespace

LocalMode local_mode_from_name(const std::string& s) {
    if (s == "simple_average") return LocalMode::SimpleAverage;
    if (s == "confidence_weighted") return LocalMode::ConfidenceWeighted;
    if (s == "max_selection") return LocalMode::MaxSelection;
    throw Error("UnknownMode", "unknown local fusion mode '" + s + "'");
}

float iou(const Box& a, const Box& b) {
    float ix1 = std::max(a.x1, b.x1), iy1 = std::max(a.y1, b.y1);
    float ix2 = std::min(a.x2, b.x2), iy2 = std::min(a.y2, b.y2);
    float iw = ix2 - ix1, ih = iy2 - iy1;
    if (iw <= 0 || ih <= 0) return 0.0f;
    float inter = iw * ih;
    float uni = a.area() + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0f;
}

std::vector<double> confidence_scores(const DetectionSet& m) {
    std::vector<double> c(m.detections.size());
    if (m.detections.empty()) return c;
    double lo = m.detections[0].score, hi = lo;
    for (const auto& d : m.detections) {
        lo = std::min(lo, static_cast<double>(d.score));
        hi = std::max(hi, static_cast<double>(d.score));
    }
    // constant set (and the single-element case) maps to all-ones
    if (hi - lo < 1e-12) {
        std::fill(c.begin(), c.end(), 1.0);
        return c;
    }
    for (size_t i = 0; i < c.size(); ++i) c[i] = (m.detections[i].score - lo) / (hi - lo);
    return c;
}

DetectionSet confidence_weighted_fuse(const DetectionSet& m_rgb, const DetectionSet& m_tir,
                                      const FusionPolicy& policy) {
    Pairing pairing = pair_sets(m_rgb, m_tir, policy.iou_match);
    std::vector<double> c_r = confidence_scores(m_rgb);
    std::vector<double> c_t = confidence_scores(m_tir);

    DetectionSet fused;
    fused.modality = Modality::FUSED;
    for (size_t ri = 0; ri < m_rgb.detections.size(); ++ri) {
        const Detection& r = m_rgb.detections[ri];
        int ti = pairing.tir_of_rgb[ri];
        if (ti < 0) {
            Detection d = r;
            d.score = clamp_score(d.score * policy.unmatched_penalty);
            fused.detections.push_back(d);
            continue;
        }
        const Detection& t = m_tir.detections[ti];
        double cr = c_r[ri], ct = c_t[ti];
        Detection d;
        d.class_id = r.class_id;
        d.box = weighted_box(r.box, t.box, cr, ct);
        if (cr + ct < policy.epsilon) {
            // both-zero-confidence degenerate case; the raw formula would
            // evaluate to ~1 regardless of the scores
            d.score = clamp_score(0.5 * (r.score + t.score));
        } else if (cr == ct && r.score == t.score) {
            d.score = r.score;
        } else {
            d.score = clamp_score((cr * r.score + ct * t.score + policy.epsilon) /
                                  (cr + ct + policy.epsilon));
        }
        fused.detections.push_back(d);
    }
    for (size_t ti = 0; ti < m_tir.detections.size(); ++ti) {
        if (pairing.tir_used[ti]) continue;
        Detection d = m_tir.detections[ti];
        d.score = clamp_score(d.score * policy.unmatched_penalty);
        fused.detections.push_back(d);
    }
    return nms(fused, policy.nms_iou);
}

DetectionSet local_fuse(const DetectionSet& m_rgb, const DetectionSet& m_tir,
                        const FusionPolicy& policy) {
    DetectionSet r = scale_scores(m_rgb, policy.kappa_rgb);
    DetectionSet t = scale_scores(m_tir, policy.kappa_tir);
    if (policy.local_mode == LocalMode::ConfidenceWeighted)
        return confidence_weighted_fuse(r, t, policy);

    Pairing pairing = pair_sets(r, t, policy.iou_match);
    DetectionSet fused;
    fused.modality = Modality::FUSED;
    for (size_t ri = 0; ri < r.detections.size(); ++ri) {
        const Detection& dr = r.detections[ri];
        int ti = pairing.tir_of_rgb[ri];
        if (ti < 0) {
            Detection d = dr;
            d.score = clamp_score(d.score * policy.unmatched_penalty);
            fused.detections.push_back(d);
            continue;
        }
        const Detection& dt = t.detections[ti];
        Detection d;
        d.class_id = dr.class_id;
        if (policy.local_mode == LocalMode::SimpleAverage) {
            d.score = clamp_score(0.5 * (dr.score + dt.score));
            d.box = weighted_box(dr.box, dt.box, 0.5, 0.5);
        } else {  // MaxSelection; tie goes to RGB
            if (dt.score > dr.score) {
                d.score = dt.score;
                d.box = dt.box;
            } else {
                d.score = dr.score;
                d.box = dr.box;
            }
        }
        fused.detections.push_back(d);
    }
    for (size_t ti = 0; ti < t.detections.size(); ++ti) {
        if (pairing.tir_used[ti]) continue;
        Detection d = t.detections[ti];
        d.score = clamp_score(d.score * policy.unmatched_penalty);
        fused.detections.push_back(d);
    }
    return nms(fused, policy.nms_iou);
}

DetectionSet global_fuse(const std::vector<DetectionSet>& locals, const FusionPolicy& policy) {
    if (locals.empty()) throw Error("EmptyInput", "global_fuse needs at least one region");
    size_t n = locals.size();
    std::vector<double> theta = policy.theta;
    if (theta.empty()) theta.assign(n, 1.0 / static_cast<double>(n));
    if (theta.size() != n)
        throw Error("EmptyInput", "theta size does not match region count");

    DetectionSet all;
    all.modality = Modality::FUSED;
    for (size_t i = 0; i < n; ++i) {
        double scale = theta[i] * static_cast<double>(n);  // uniform theta is a no-op
        for (const auto& d : locals[i].detections) {
            Detection nd = d;
            nd.score = clamp_score(d.score * scale);
            if (nd.score >= policy.score_floor) all.detections.push_back(nd);
        }
    }
    return nms(all, policy.nms_iou);
}

DetectionSet nms(const DetectionSet& dets, double iou_threshold) {
    std::vector<size_t> order(dets.detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const Detection &da = dets.detections[a], &db = dets.detections[b];
        if (da.score != db.score) return da.score > db.score;
        return da.box.area() < db.box.area();
    });

    DetectionSet out;
    out.modality = dets.modality;
    std::vector<bool> suppressed(dets.detections.size(), false);
    for (size_t i = 0; i < order.size(); ++i) {
        if (suppressed[order[i]]) continue;
        const Detection& keep = dets.detections[order[i]];
        out.detections.push_back(keep);
        for (size_t j = i + 1; j < order.size(); ++j) {
            const Detection& other = dets.detections[order[j]];
            if (other.class_id != keep.class_id) continue;
            if (iou(keep.box, other.box) >= iou_threshold) suppressed[order[j]] = true;
        }
    }
    return out;
}

}  // namespace decision_fusion
}  // namespace msbench
