#ifndef MSBENCH_CORE_HPP
#define MSBENCH_CORE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace msbench {

/// All library errors carry a stable kind tag usable by callers and the CLI.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

/// Row-major float image, intensities in [0,1] after any clamping op.
/// channels is 1 (gray/TIR) or 3 (RGB).
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t size() const { return data.size(); }

    void clamp() {
        for (float& v : data) v = clamp01(v);
    }
    bool in_range01() const {
        for (float v : data)
            if (!(v >= 0.0f && v <= 1.0f)) return false;
        return true;
    }
};

/// Unbounded row-major float tensor H x W x C.
struct FeatureMap {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    FeatureMap() = default;
    FeatureMap(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t size() const { return data.size(); }
};

inline FeatureMap to_feature_map(const Image& im) {
    FeatureMap f(im.height, im.width, im.channels);
    f.data = im.data;
    return f;
}

struct Box {
    float x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    float area() const { return (x2 > x1 && y2 > y1) ? (x2 - x1) * (y2 - y1) : 0.0f; }
    float cx() const { return 0.5f * (x1 + x2); }
    float cy() const { return 0.5f * (y1 + y2); }
};

struct Detection {
    Box box;
    float score = 0.0f;
    int class_id = 0;
};

enum class Modality { RGB, TIR, FUSED };

const char* modality_name(Modality m);
Modality modality_from_name(const std::string& s);

struct DetectionSet {
    std::vector<Detection> detections;
    Modality modality = Modality::RGB;
};

enum class TransformKind { Affine, Homography };

/// 3x3 homogeneous planar map; affine keeps last row [0,0,1].
struct PlanarTransform {
    TransformKind kind = TransformKind::Affine;
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static PlanarTransform identity(TransformKind k = TransformKind::Affine) {
        PlanarTransform t;
        t.kind = k;
        return t;
    }

    /// Maps (x, y); homography divides by the w coordinate.
    void apply(double x, double y, double& ox, double& oy) const {
        double u = m[0] * x + m[1] * y + m[2];
        double v = m[3] * x + m[4] * y + m[5];
        double w = m[6] * x + m[7] * y + m[8];
        ox = u / w;
        oy = v / w;
    }

    double det_linear() const { return m[0] * m[4] - m[1] * m[3]; }
    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
    bool invertible() const {
        return kind == TransformKind::Affine ? std::abs(det_linear()) > 1e-12
                                             : std::abs(det()) > 1e-12;
    }
    PlanarTransform inverse() const;
    PlanarTransform compose(const PlanarTransform& rhs) const;  // this * rhs
};

/// Per-pixel (dx, dy) displacement in pixels.
struct FlowField {
    int height = 0;
    int width = 0;
    std::vector<float> data;  // 2 floats per pixel

    FlowField() = default;
    FlowField(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 2, 0.0f) {}

    float& dx(int y, int x) { return data[(static_cast<size_t>(y) * width + x) * 2]; }
    float& dy(int y, int x) { return data[(static_cast<size_t>(y) * width + x) * 2 + 1]; }
    float dx(int y, int x) const { return data[(static_cast<size_t>(y) * width + x) * 2]; }
    float dy(int y, int x) const { return data[(static_cast<size_t>(y) * width + x) * 2 + 1]; }
};

struct PointMatch {
    double px = 0, py = 0;  // point in image/grid a
    double qx = 0, qy = 0;  // matched point in image/grid b
    double score = 0;       // in [0,1]
};

struct PointMatchSet {
    std::vector<PointMatch> pairs;
};

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// Seed derivation uses the splitmix64 finalizer over base ^ (GOLDEN*(i+1)),
// which is injective in i for a fixed base. The stream itself is
// counter-based: draw k is mix64(key + GOLDEN*k), so streams never depend
// on consumption order of other streams.
// ---------------------------------------------------------------------------

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline uint64_t mix64(uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

struct Seed {
    uint64_t base = 0;

    Seed derive(uint64_t index) const {
        return Seed{mix64(base ^ (kGolden * (index + 1)))};
    }
};

class Rng {
public:
    explicit Rng(Seed s) : key_(s.base) {}
    explicit Rng(uint64_t base) : key_(base) {}

    uint64_t next_u64() { return mix64(key_ + kGolden * ++counter_); }

    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

    /// Marsaglia polar method; consumes pairs, caches the second deviate.
    double gaussian() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double k = std::sqrt(-2.0 * std::log(s) / s);
        cached_ = v * k;
        has_cached_ = true;
        return u * k;
    }

private:
    uint64_t key_;
    uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// ---------------------------------------------------------------------------

struct ValidatedPair {
    Image rgb;
    Image tir;
    bool same_dims() const { return rgb.height == tir.height && rgb.width == tir.width; }
};

ValidatedPair validate_pair(Image rgb, Image tir);

}  // namespace msbench

#endif
