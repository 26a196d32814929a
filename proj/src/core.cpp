#include "msbench/core.hpp"

namespace msbench {

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::RGB: return "RGB";
        case Modality::TIR: return "TIR";
        case Modality::FUSED: return "FUSED";
    }
    return "RGB";
}

Modality modality_from_name(const std::string& s) {
    if (s == "RGB") return Modality::RGB;
    if (s == "TIR") return Modality::TIR;
    if (s == "FUSED") return Modality::FUSED;
    throw Error("BadModality", "unknown modality tag '" + s + "'");
}

PlanarTransform PlanarTransform::inverse() const {
    if (!invertible()) throw Error("SingularTransform", "transform is not invertible");
    const auto& a = m;
    double d = det();
    PlanarTransform out;
    out.kind = kind;
    out.m = {
        (a[4] * a[8] - a[5] * a[7]) / d, (a[2] * a[7] - a[1] * a[8]) / d,
        (a[1] * a[5] - a[2] * a[4]) / d, (a[5] * a[6] - a[3] * a[8]) / d,
        (a[0] * a[8] - a[2] * a[6]) / d, (a[2] * a[3] - a[0] * a[5]) / d,
        (a[3] * a[7] - a[4] * a[6]) / d, (a[1] * a[6] - a[0] * a[7]) / d,
        (a[0] * a[4] - a[1] * a[3]) / d,
    };
    if (kind == TransformKind::Affine) {
        // renormalize so the last row is exactly [0,0,1]
        double s = out.m[8];
        for (auto& v : out.m) v /= s;
        out.m[6] = out.m[7] = 0.0;
        out.m[8] = 1.0;
    }
    return out;
}

PlanarTransform PlanarTransform::compose(const PlanarTransform& rhs) const {
    PlanarTransform out;
    out.kind = (kind == TransformKind::Homography || rhs.kind == TransformKind::Homography)
                   ? TransformKind::Homography
                   : TransformKind::Affine;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += m[r * 3 + k] * rhs.m[k * 3 + c];
            out.m[r * 3 + c] = s;
        }
    return out;
}

ValidatedPair validate_pair(Image rgb, Image tir) {
    if (rgb.height == 0 || rgb.width == 0 || tir.height == 0 || tir.width == 0)
        throw Error("EmptyImage", "zero-sized image in pair");
    if (rgb.channels != 3)
        throw Error("ChannelMismatch", "rgb image must have 3 channels, got " +
                                           std::to_string(rgb.channels));
    if (tir.channels != 1)
        throw Error("ChannelMismatch", "tir image must have 1 channel, got " +
                                           std::to_string(tir.channels));
    return ValidatedPair{std::move(rgb), std::move(tir)};
}

}  // namespace msbench
